//! Header block stamped on every artifact written by the pipeline.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub seed: u64,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(seed: u64, config_hash: impl Into<String>) -> Self {
        Self { tool: format!("arplace {}", env!("CARGO_PKG_VERSION")), seed, config_hash: config_hash.into() }
    }

    /// `# tool=... seed=... config=...` as a single comment line (no trailing newline).
    pub fn comment_line(&self) -> String {
        format!("# tool={} seed={} config={}", self.tool, self.seed, self.config_hash)
    }
}
