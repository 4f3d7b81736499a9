use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Provenance record written next to every output file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunManifest {
    /// Subcommand name.
    pub command: String,
    /// SHA-256 of the input bytes, hex encoded.
    pub input_digest: String,
    /// Parameters as given on the command line.
    pub parameters: BTreeMap<String, String>,
    /// Version of this tool.
    pub tool_version: String,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` overrides the clock.
    pub timestamp: u64,
}

impl RunManifest {
    /// Builds a manifest for `command` run on `input`.
    pub fn new(command: &str, input: &[u8], parameters: BTreeMap<String, String>) -> Self {
        let timestamp = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
        RunManifest {
            command: command.into(),
            input_digest: digest(input),
            parameters,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            timestamp,
        }
    }

    /// JSON form.
    pub fn to_value(&self) -> Value {
        json!({
            "command": self.command,
            "input_digest": self.input_digest,
            "parameters": self.parameters,
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
        })
    }
}

/// Lowercase hex SHA-256.
pub fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(digest(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
