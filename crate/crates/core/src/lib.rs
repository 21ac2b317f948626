//! Bounded reachability for networks of nonlinear hybrid automata.

pub mod expr;
pub mod model;
pub mod modelio;
pub mod encode;
pub mod icp;
pub mod sat;
pub mod hnsolve;
