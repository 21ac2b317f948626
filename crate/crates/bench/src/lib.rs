//! Benchmark harness for hyra: shared loading of bundled instances.

use hyra_core::encode::{encode, ClauseDB};
use hyra_core::hnsolve::{Config, Guidance};
use hyra_core::modelio::{bundled, parse_model, ModelDocument};

/// A bundled model, panicking if the name is unknown.
pub fn model(name: &str) -> ModelDocument {
    parse_model(bundled::get(name).unwrap_or_else(|| panic!("no bundled model {name}"))).expect("bundled models parse")
}

/// The encoding of a bundled model at bound `k` and its default delay bound.
pub fn encoded(name: &str, k: usize) -> ClauseDB {
    let doc = model(name);
    encode(&doc.network, &doc.goal, k, doc.max_delay).expect("bundled models encode")
}

/// Solver settings for a bundled model with its own delay bound and precision.
pub fn config(doc: &ModelDocument, guidance: Guidance, k: usize) -> Config {
    Config { guidance, k, max_delay: doc.max_delay, delta: doc.delta, ..Config::default() }
}
