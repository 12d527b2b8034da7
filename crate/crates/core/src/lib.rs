//! Conformal, cross-conformal and repeated/balanced inductive conformal
//! e-predictors for label-only classification under a Dirichlet-categorical
//! model, plus a reproducible Monte Carlo harness that measures their
//! predictive efficiency.

pub mod aggregation;
pub mod bayes;
pub mod conformal_full;
pub mod conformal_inductive;
pub mod criteria;
pub mod error;
pub mod harness;
pub mod model;
pub mod rng;
pub mod selftest;

pub use error::{Error, Result};
