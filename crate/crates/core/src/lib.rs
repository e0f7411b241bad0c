//! Solver and verifier for two-point boundary value problems of the form
//! `-(p u')' + q u ∈ λ F(u)` with `u(a) = 0`, `u'(b) = 0`, where the
//! reaction `F` may be an interval map coming from a discontinuous
//! nonlinearity. The library checks explicit hypotheses that guarantee at
//! least three solutions for `λ` in a computable open interval, then finds
//! and certifies those solutions with a P1 finite element discretization.

pub mod certify;
pub mod cli;
pub mod config;
pub mod error;
pub mod expr;
pub mod fem;
pub mod hypotheses;
pub mod jsonout;
pub mod piecewise;
pub mod quad;
pub mod setvalued;
pub mod solver;

pub use error::{Error, Result};
