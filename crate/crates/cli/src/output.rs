use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::commands::Artifact;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const CONFIG_ECHO: &str = "config.toml";
pub const MANIFEST: &str = "manifest.txt";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Writes the artifacts, the resolved configuration and a manifest hashing
/// all of them. Returns the paths written, manifest last.
pub fn write_run(cfg: &RunConfig, command: &str, artifacts: &[Artifact]) -> CliResult<Vec<PathBuf>> {
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let echo = Artifact { name: CONFIG_ECHO.into(), contents: cfg.to_toml().into_bytes() };

    let mut manifest = String::new();
    let _ = writeln!(manifest, "command = \"{command}\"");
    let _ = writeln!(manifest, "seed = {}", cfg.seed);
    if let Some(path) = cfg.cascade.strip_prefix("table:") {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        let _ = writeln!(manifest, "cascade_table_sha256 = \"{}\"", sha256_hex(&bytes));
    }
    let _ = writeln!(manifest, "\n[artifacts]");

    let mut written = Vec::new();
    for a in std::iter::once(&echo).chain(artifacts) {
        let path = dir.join(&a.name);
        write_file(&path, &a.contents)?;
        let _ = writeln!(manifest, "\"{}\" = \"{}\"", a.name, sha256_hex(&a.contents));
        written.push(path);
    }
    let path = dir.join(MANIFEST);
    write_file(&path, manifest.as_bytes())?;
    written.push(path);
    Ok(written)
}

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
