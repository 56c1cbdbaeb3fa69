use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Stamp written at the top of every output file. Contains no timestamps so
/// that reruns with the same configuration are byte-identical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>, seed: Option<u64>) -> Self {
        Provenance {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.into(),
            seed,
        }
    }

    /// Provenance for library-level writes with no run configuration.
    pub fn library() -> Self {
        Provenance::new("none", None)
    }

    /// Header lines, each starting with `prefix` (e.g. `"# "` or `"% "`).
    pub fn comment_lines(&self, prefix: &str) -> String {
        let seed = self
            .seed
            .map(|s| s.to_string())
            .unwrap_or_else(|| "none".into());
        format!(
            "{prefix}generator: {} {}\n{prefix}config_hash: {}\n{prefix}seed: {seed}\n",
            self.tool, self.version, self.config_hash
        )
    }
}

/// Hex SHA-256 of arbitrary bytes.
pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
