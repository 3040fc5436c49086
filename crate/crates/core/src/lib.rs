//! Limited-memory structured BFGS methods.
//!
//! The objective is split as `f = k̂ + û`, where `k̂` has a known Hessian
//! `K(x)` and `û` only a gradient. The structured-minus and structured-plus
//! updates approximate the unknown part of the Hessian and are stored in
//! compact (low-rank) form, see [`minus`] and [`plus`].

pub mod bench;
pub mod dense;
pub mod error;
pub mod history;
pub mod line_search;
pub mod minus;
pub mod oracles;
pub mod plus;
pub mod problems;
pub mod solver;
pub mod vecops;
