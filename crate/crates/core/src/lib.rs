//! Torsional conformer search over discretized angles.
//!
//! The molecule is reduced to a tree of rigid bodies joined by rotatable
//! bonds. Variable neighbourhood descent repeatedly selects a set of torsions
//! whose contracted body graph is a star, encodes the best move within that
//! neighbourhood as a one-hot QUBO, and hands it to a pluggable solver.

pub mod encoding;
pub mod energy;
pub mod harness;
pub mod molmodel;
pub mod neighbourhoods;
pub mod search;
pub mod solvers;
pub mod uff;
pub mod unionfind;
