//! Core library: a path-attention method-name classifier over the MiniLang
//! toy language, gradient-guided renaming and dead-code attacks against it,
//! and the corresponding defenses, metrics, and experiment harness.

pub mod attack;
pub mod corpus;
pub mod defense;
pub mod eval;
pub mod minilang;
pub mod model;
pub mod pathctx;
pub mod rng;
