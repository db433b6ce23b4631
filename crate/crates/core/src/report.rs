//! Deterministic result files.
//!
//! Every emitted file starts with a `# config <digest>` line tying it to the
//! configuration that produced it, followed by either a delimited table (a
//! space-separated column-header line, then one space-separated row per
//! record) or a key-value summary (`key value`, one pair per line). Files
//! contain no timestamps or machine identifiers, so identical runs produce
//! byte-identical output.

use crate::error::{Error, Result};
use crate::rng::fnv1a;
use std::fs;
use std::path::{Path, PathBuf};

/// Hex FNV-1a digest of a configuration's canonical text form.
pub fn config_digest(canonical_config: &str) -> String {
    format!("{:016x}", fnv1a(canonical_config.as_bytes()))
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    fs::write(&path, content).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

/// Writes `body` (a column-header line followed by data rows) as a table
/// file under `dir`, prefixed by the config digest header.
pub fn write_table(dir: &Path, name: &str, digest: &str, body: &str) -> Result<PathBuf> {
    let mut content = format!("# config {digest}\n");
    content.push_str(body);
    if !content.ends_with('\n') {
        content.push('\n');
    }
    write_file(dir, name, &content)
}

/// Writes a key-value summary file under `dir`: the config digest header,
/// then one `key value` line per pair, in the given order.
pub fn write_kv(dir: &Path, name: &str, digest: &str, pairs: &[(String, String)]) -> Result<PathBuf> {
    let mut content = format!("# config {digest}\n");
    for (key, value) in pairs {
        if key.contains(char::is_whitespace) || key.is_empty() {
            return Err(Error::InvalidTrainConfig(format!(
                "summary key {key:?} must be nonempty and whitespace-free"
            )));
        }
        content.push_str(&format!("{key} {value}\n"));
    }
    write_file(dir, name, &content)
}
