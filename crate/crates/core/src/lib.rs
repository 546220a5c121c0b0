//! Entailment reformulation of text classification tasks, contrastive
//! augmentation, and a seeded few-shot evaluation harness.

pub mod backend;
pub mod corpus;
pub mod error;
pub mod metrics;
pub mod protocol;
pub mod reformulator;
pub mod rng;
pub mod uca;

pub use error::{Error, ErrorKind, Result};
pub use rng::Rng;
