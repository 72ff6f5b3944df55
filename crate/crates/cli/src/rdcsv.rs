//! The `rd.csv` results file: a `# rdcsv v1` line, a header row, then one
//! row per grid cell.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const VERSION_LINE: &str = "# rdcsv v1";

pub const COLUMNS: [&str; 12] = [
    "scene",
    "space",
    "preset",
    "qp",
    "path",
    "bits_latent",
    "bits_backend",
    "bits_total",
    "psnr_left",
    "psnr_right",
    "error",
    "cell_id",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdRow {
    pub scene: String,
    pub space: String,
    pub preset: String,
    pub qp: u8,
    pub path: String,
    pub bits_latent: Option<u64>,
    pub bits_backend: Option<u64>,
    pub bits_total: Option<u64>,
    pub psnr_left: Option<f64>,
    pub psnr_right: Option<f64>,
    pub error: String,
    pub cell_id: String,
}

impl RdRow {
    pub fn ok(&self) -> bool {
        self.error.is_empty()
    }
}

/// First 16 hex digits of SHA-256 over the cell's defining fields.
pub fn cell_id(scene: &str, space: &str, preset: &str, qp: u8, path: &str, backend: &str) -> String {
    let digest = Sha256::digest(format!("{scene}|{space}|{preset}|{qp}|{path}|{backend}").as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Write a complete file, replacing any existing one.
pub fn write_rows(path: &Path, rows: &[RdRow]) -> Result<()> {
    let mut f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    writeln!(f, "{VERSION_LINE}")?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(f);
    w.write_record(COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Appends rows to an existing file, creating it with its preamble if absent.
pub struct Appender {
    writer: csv::Writer<File>,
}

impl Appender {
    pub fn open(path: &Path) -> Result<Self> {
        if !path.exists() {
            write_rows(path, &[])?;
        }
        let f = OpenOptions::new().append(true).open(path).with_context(|| format!("opening {}", path.display()))?;
        Ok(Self { writer: csv::WriterBuilder::new().has_headers(false).from_writer(f) })
    }

    pub fn append(&mut self, row: &RdRow) -> Result<()> {
        self.writer.serialize(row)?;
        self.writer.flush()?;
        Ok(())
    }
}

pub fn read_rows(path: &Path) -> Result<Vec<RdRow>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut first = String::new();
    BufReader::new(&file).read_line(&mut first)?;
    if first.trim_end() != VERSION_LINE {
        bail!("{}:1: expected `{VERSION_LINE}`", path.display());
    }
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let mut rows = Vec::new();
    for rec in reader.deserialize::<RdRow>() {
        let row = rec.map_err(|e| {
            let line = e.position().map(|p| p.line().to_string()).unwrap_or_else(|| "?".into());
            anyhow::anyhow!("{}:{line}: malformed row: {e}", path.display())
        })?;
        rows.push(row);
    }
    Ok(rows)
}

/// Concatenate, keeping the last row seen for every cell id in first-seen order.
pub fn dedupe_keep_last(rows: impl IntoIterator<Item = RdRow>) -> Vec<RdRow> {
    let mut order: Vec<String> = Vec::new();
    let mut latest: HashMap<String, RdRow> = HashMap::new();
    for r in rows {
        if !latest.contains_key(&r.cell_id) {
            order.push(r.cell_id.clone());
        }
        latest.insert(r.cell_id.clone(), r);
    }
    order.into_iter().map(|id| latest.remove(&id).expect("id recorded")).collect()
}
