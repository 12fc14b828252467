//! Budget argument mining over Japanese political minutes.
//!
//! Monetary expressions are first screened by handcrafted rules
//! ([`money_gate`]), segmented into argument propositions ([`segmenter`]),
//! classified into seven argument classes by a premise/claim cascade
//! ([`cascade_ac`]) and linked to a budget item by pair classification plus
//! cosine reranking ([`rid`]). [`evalkit`] scores the results.

pub mod cascade_ac;
pub mod class;
pub mod config;
pub mod corpus;
mod error;
pub mod evalkit;
pub mod money_gate;
pub mod pipeline;
pub mod rid;
pub mod segmenter;
pub mod synthetic;
pub mod text;
pub mod textclf;

pub use class::{ArgumentClass, Level1};
pub use error::{Error, Result};

/// Per-component seed derived from the run seed.
pub fn derive_seed(seed: u64, component: &str) -> u64 {
    textclf::splitmix(seed ^ textclf::mix_hash(component.as_bytes()))
}
