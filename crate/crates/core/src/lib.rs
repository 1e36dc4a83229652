//! Finite-scale noncommutative orbifolds: crossed-product algebras of finite
//! group actions on graphs, Morita bitorsors and their imprimitivity
//! bimodules, induced spectral triples, a Morita-equivalence checker and a
//! Connes spectral-distance solver.

pub mod algebra;
pub mod bimodule;
pub mod bitorsor;
pub mod dirac;
pub mod distance;
pub mod error;
pub mod geometry;
pub mod induction;
pub mod linalg;
pub mod models;
pub mod morita;
pub mod scenario;

pub use error::{Error, Result, ScenarioErrorKind};
