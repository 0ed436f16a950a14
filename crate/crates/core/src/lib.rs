pub mod classical;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod evalharness;
pub mod embeddings;
pub mod features;
pub mod neural;
pub mod pipeline;

pub use error::{Error, Result};
