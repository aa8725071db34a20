//! Run manifests: a content digest of the spec, the command, timestamps
//! and the list of emitted files.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

pub fn spec_digest(source: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(source.as_bytes());
    let out = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in out {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

pub struct RunManifest {
    pub spec_sha256: String,
    pub command: String,
    pub started_unix: u64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(spec_source: &str, command: String) -> Self {
        Self {
            spec_sha256: spec_digest(spec_source),
            command,
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            outputs: Vec::new(),
        }
    }

    pub fn render(&self) -> String {
        let finished = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut s = String::new();
        let _ = writeln!(s, "spec_sha256 = {}", self.spec_sha256);
        let _ = writeln!(s, "command = {}", self.command);
        let _ = writeln!(s, "started_unix = {}", self.started_unix);
        let _ = writeln!(s, "finished_unix = {finished}");
        let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
        for o in &self.outputs {
            let _ = writeln!(s, "output = {o}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_changes_iff_content_changes() {
        let a = spec_digest("alpha");
        let b = spec_digest("alpha");
        let c = spec_digest("alpha ");
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 64);
    }
}
