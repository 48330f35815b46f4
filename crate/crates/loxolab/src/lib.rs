//! Geodesic combing automata for graph products, their Perron-Frobenius and
//! Markov-chain structure, and counting experiments for isometric actions on
//! trees.
//!
//! The pipeline: [`group`] holds exact graph-product arithmetic (the
//! word-problem oracle), [`combing`] builds the recurrent geodesic combing
//! automaton for the standard generators, [`graph`] counts/enumerates/samples
//! its paths, [`spectral`] extracts the growth rate and the associated Markov
//! chain, [`hyp`] evaluates actions on trees (translation lengths, Gromov
//! products, shadows), and [`experiments`] wires everything into the counting
//! experiments exposed by the `loxolab` CLI.

pub mod combing;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod group;
pub mod hyp;
pub mod par;
pub mod rng;
pub mod spectral;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
