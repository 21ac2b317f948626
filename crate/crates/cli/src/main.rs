//! Command-line driver: loads a model, solves it, reports the verdict.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use hyra_core::encode::encode;
use hyra_core::hnsolve::{solve_db, Config, Guidance, Outcome};
use hyra_core::icp::{IcpConfig, DEFAULT_FLOW_STEPS, DEFAULT_MAX_BOXES};
use hyra_core::model::validate;
use hyra_core::modelio::{bundled, parse_model, serialize_witness};

const EXIT_SAT: u8 = 0;
const EXIT_UNSAT: u8 = 1;
const EXIT_UNKNOWN: u8 = 2;
const EXIT_USAGE: u8 = 64;

/// Bounded reachability for networks of nonlinear hybrid automata.
#[derive(Debug, Parser)]
#[command(name = "hyra", version)]
struct Cli {
    /// Model file. Names of bundled models are accepted when no such file exists.
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    /// Number of transitions (defaults to the model's value).
    #[arg(short = 'k', value_name = "INT")]
    k: Option<usize>,
    /// Upper bound on the time spent in each state (defaults to the model's value).
    #[arg(short = 'M', value_name = "REAL")]
    max_delay: Option<f64>,
    /// Precision of the δ-decision (defaults to the model's value).
    #[arg(long, value_name = "REAL")]
    delta: Option<f64>,
    /// Search strategy: plain, heuristic or heuristic-learn.
    #[arg(long, value_name = "MODE", default_value = "heuristic-learn")]
    mode: Guidance,
    /// Enclosure boxes used to check invariants along each flow.
    #[arg(long, value_name = "INT", default_value_t = DEFAULT_FLOW_STEPS)]
    n_flow_steps: usize,
    /// Box budget of one full interval check.
    #[arg(long, value_name = "INT", default_value_t = DEFAULT_MAX_BOXES)]
    max_boxes: usize,
    /// Wall-clock limit; the verdict is unknown when it runs out.
    #[arg(long, value_name = "SECONDS")]
    timeout: Option<f64>,
    /// Where to write the witness run when the answer is delta-sat.
    #[arg(long, value_name = "PATH")]
    witness_out: Option<PathBuf>,
    /// Where to write a listing of the Boolean encoding.
    #[arg(long, value_name = "PATH")]
    dump_encoding: Option<PathBuf>,
    /// Where to write a trace of the Boolean search.
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    /// Worker threads for interval branching.
    #[arg(long, value_name = "INT", default_value_t = 1)]
    threads: usize,
}

/// Prints a line to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("hyra: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn load(path: &PathBuf) -> Result<String, String> {
    match std::fs::read_to_string(path) {
        Ok(t) => Ok(t),
        Err(e) => path
            .to_str()
            .and_then(bundled::get)
            .map(str::to_string)
            .ok_or_else(|| format!("cannot read {}: {e}", path.display())),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let text = match load(&cli.model) {
        Ok(t) => t,
        Err(e) => return usage(e),
    };
    let doc = match parse_model(&text) {
        Ok(d) => d,
        Err(e) => return usage(format!("{}: {e}", cli.model.display())),
    };
    let diags = validate(&doc.network, &doc.goal);
    if !diags.is_empty() {
        for d in diags {
            eprintln!("hyra: {}: {d}", cli.model.display());
        }
        return ExitCode::from(EXIT_USAGE);
    }
    let delta = cli.delta.unwrap_or(doc.delta);
    let max_delay = cli.max_delay.unwrap_or(doc.max_delay);
    if !(delta > 0.0) || !(max_delay >= 0.0) || cli.threads == 0 || cli.n_flow_steps == 0 {
        return usage("delta must be positive, -M non-negative, and thread and step counts at least 1");
    }
    let timeout = match cli.timeout {
        Some(t) if t.is_finite() && t >= 0.0 => Some(Duration::from_secs_f64(t)),
        Some(_) => return usage("timeout must be a non-negative number of seconds"),
        None => None,
    };
    let cfg = Config {
        guidance: cli.mode,
        k: cli.k.unwrap_or(doc.k),
        max_delay,
        delta,
        icp: IcpConfig { max_boxes: cli.max_boxes, threads: cli.threads, ..IcpConfig::default() },
        n_flow_steps: cli.n_flow_steps,
        timeout,
    };
    let db = match encode(&doc.network, &doc.goal, cfg.k, cfg.max_delay) {
        Ok(db) => db,
        Err(e) => {
            say!("verdict: unknown");
            eprintln!("hyra: {e}");
            return ExitCode::from(EXIT_UNKNOWN);
        }
    };
    if let Some(p) = &cli.dump_encoding {
        if let Err(e) = std::fs::write(p, db.dump()) {
            return usage(format!("cannot write {}: {e}", p.display()));
        }
    }
    let trace: Option<Box<dyn std::io::Write + Send>> = match &cli.trace {
        Some(p) => match File::create(p) {
            Ok(f) => Some(Box::new(BufWriter::new(f))),
            Err(e) => return usage(format!("cannot write {}: {e}", p.display())),
        },
        None => None,
    };
    let (outcome, stats) = match solve_db(&db, &cfg, trace) {
        Ok(r) => r,
        Err(e) => {
            say!("verdict: unknown");
            eprintln!("hyra: {e}");
            return ExitCode::from(EXIT_UNKNOWN);
        }
    };
    say!("verdict: {}", outcome.label());
    say!("stats: {stats}");
    match outcome {
        Outcome::DeltaSat(w) => {
            if let Some(p) = &cli.witness_out {
                if let Err(e) = std::fs::write(p, serialize_witness(&w.run)) {
                    eprintln!("hyra: cannot write {}: {e}", p.display());
                } else {
                    say!("witness: {}", p.display());
                }
            }
            ExitCode::from(EXIT_SAT)
        }
        Outcome::Unsat => ExitCode::from(EXIT_UNSAT),
        Outcome::Unknown(why) => {
            say!("reason: {why}");
            ExitCode::from(EXIT_UNKNOWN)
        }
    }
}
