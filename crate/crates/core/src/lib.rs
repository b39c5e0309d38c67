//! Global optimization of box-constrained polynomial programs by RLT-based
//! spatial branch-and-bound with bound tightening.

pub mod bnb;
pub mod clock;
pub mod conic;
pub mod cuts;
pub mod fbbt;
pub mod heuristic;
pub mod interval;
pub mod lp;
pub mod obbt;
pub mod poly;
pub mod rlt;

pub use poly::{compute_jsets, Bounds, Constraint, Monomial, Polynomial, Problem, Sense};
