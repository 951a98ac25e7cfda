// SPDX-License-Identifier: Apache-2.0

//! Ranked concept search over encrypted indexes.
//!
//! The crate is organised around the parties of an outsourced search
//! deployment. The data owner builds a concept ontology ([`ontology`]),
//! indexes a corpus ([`textindex`]) and produces one of two encrypted
//! indexes:
//!
//! * a vector-model index whose rows are secure-kNN encrypted concept
//!   vectors ([`sse`], scored in bulk by [`parsearch`]);
//! * a secure inverted index whose scores live in a compressed table of
//!   additively homomorphic ciphertexts ([`siis`] on top of [`he`]).
//!
//! Documents themselves are split into versioned, encrypted blocks and
//! fetched through [`aph`] so the server cannot tell which document a user
//! retrieved. [`oracle`] holds plaintext reference implementations used to
//! check every encrypted path.

pub mod aph;
pub mod error;
pub mod exec;
pub mod he;
pub mod ontology;
pub mod oracle;
pub mod parsearch;
pub mod ranking;
pub mod seal;
pub mod siis;
pub mod sknn;
pub mod sse;
pub mod synth;
pub mod textindex;

pub use error::{Error, Result};
