//! Rewriting codes for flash memory built on lattices with lower-triangular
//! generators.
//!
//! Cell values are points of a lattice inside the cube `[0, D M)^n`. The
//! cube is split into `D^n` blocks of side `M`; each block carries a full
//! copy of the information alphabet, so new data can always be written at
//! a codeword that only raises cell values, until the memory is full.
//!
//! - [`lattice`]: generators, determinant, forward substitution, E8.
//! - [`codebook`]: cube and block geometry, codebook enumeration.
//! - [`codec`]: block hash, shaping encoder, decoder, rewrite selection.
//! - [`memsim`]: memory model and write-lifetime simulation.
//! - [`cli`]: the `lattice-rewrite` command-line tool.

pub mod cli;
pub mod codebook;
pub mod codec;
pub mod error;
pub mod lattice;
pub mod memsim;
pub mod rational;

pub use codebook::{BlockIndex, CodeParams, Codeword};
pub use codec::{HashKey, Hashing, InfoWord, RewriteCode, RewriteRule, Selection, Strategy};
pub use error::{Error, Result};
pub use lattice::{GeneratorMatrix, LatticeSpec};
pub use memsim::MemoryState;
pub use rational::Rational;
