//! File writers shared by the subcommands. Every file is rendered in memory
//! and written once, so each output has exactly one writer.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// One written artifact as listed in a manifest.
#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    /// Data rows, header excluded; `None` for non-tabular files.
    pub rows: Option<usize>,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// Command line that regenerates every file listed below.
    pub reproduce: String,
    pub seed: u64,
    pub scale: f64,
    pub scenario_fingerprint: String,
    pub parameters: serde_json::Value,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn new(command: &str, reproduce: String, seed: u64, scale: f64, fingerprint: String) -> Self {
        Self {
            tool: "mqsac",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            reproduce,
            seed,
            scale,
            scenario_fingerprint: fingerprint,
            parameters: serde_json::Value::Null,
            files: Vec::new(),
        }
    }
}

/// Creates `dir`, refusing an existing one unless `force` is set.
pub fn prepare_dir(dir: &Path, force: bool) -> anyhow::Result<()> {
    if dir.exists() && !force {
        bail!("output directory {} already exists; pass --force to overwrite", dir.display());
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_bytes(dir: &Path, name: &str, bytes: &[u8], rows: Option<usize>) -> anyhow::Result<FileEntry> {
    let path: PathBuf = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(FileEntry {
        name: name.to_string(),
        rows,
        sha256: digest(bytes),
    })
}

/// Renders a CSV table with a header row.
pub fn render_csv(header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))
}

pub fn write_csv(dir: &Path, name: &str, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<FileEntry> {
    let bytes = render_csv(header, rows)?;
    write_bytes(dir, name, &bytes, Some(rows.len()))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> anyhow::Result<FileEntry> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_bytes(dir, name, &bytes, None)
}

pub fn write_jsonl<T: Serialize>(dir: &Path, name: &str, items: &[T]) -> anyhow::Result<FileEntry> {
    let mut bytes = Vec::new();
    for item in items {
        serde_json::to_writer(&mut bytes, item)?;
        bytes.push(b'\n');
    }
    write_bytes(dir, name, &bytes, Some(items.len()))
}

/// Writes the manifest last, after every file it lists.
pub fn write_manifest(dir: &Path, manifest: &Manifest) -> anyhow::Result<()> {
    write_json(dir, "manifest.json", manifest)?;
    Ok(())
}

pub fn num(x: f64) -> String {
    x.to_string()
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Writes to stdout, treating a closed pipe as success.
pub fn emit(text: &str) -> anyhow::Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

pub fn emit_json<T: Serialize + ?Sized>(value: &T) -> anyhow::Result<()> {
    emit(&(serde_json::to_string_pretty(value)? + "\n"))
}
