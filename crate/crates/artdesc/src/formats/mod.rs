//! On-disk formats.

pub mod binary;
pub mod checkpoint;
pub mod features;
pub mod index;
pub mod text;

use serde::{Deserialize, Serialize};

/// Seed and configuration digest recorded in every artifact.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub seed: u64,
    pub config_digest: String,
}
