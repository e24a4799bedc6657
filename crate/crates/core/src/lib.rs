//! Extract-then-abstract summarization learning at desk scale: pseudo-oracle
//! supervision with relaxed loss weights, summary-referenced sentence scoring,
//! credit-aware self-critic training and ROUGE evaluation.

pub mod abstractor;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod extractor;
pub mod learning;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod rouge;
pub mod supervision;
pub mod synthetic;

pub use config::Config;
pub use corpus::DocumentCluster;
pub use error::{Error, Result};
pub use pipeline::Pipeline;
