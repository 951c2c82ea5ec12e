//! CSV tables, content hashes and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use netindep_core::metrics::{AggregateTrace, RunTrace};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

/// 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub const TRACE_HEADER: &str = "k,U,V,R,node_err_max,lambda,seed";
pub const AGGREGATE_HEADER: &str = "k,U_mean,V_mean,R_mean,reps";

pub fn trace_csv(trace: &RunTrace<f64>) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    let lambda = fmt_f64(trace.meta.lambda);
    for r in &trace.records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.k,
            fmt_opt(r.u),
            fmt_opt(r.v),
            fmt_opt(r.r),
            fmt_opt(r.node_err_max),
            lambda,
            trace.meta.seed
        )
        .expect("writing to a String");
    }
    out
}

pub fn aggregate_csv(agg: &AggregateTrace<f64>) -> String {
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for r in &agg.records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.k,
            fmt_opt(r.u_mean),
            fmt_opt(r.v_mean),
            fmt_opt(r.r_mean),
            agg.reps
        )
        .expect("writing to a String");
    }
    out
}

/// Git-style object hash: SHA-256 of `"blob <len>\0" || bytes`, hex encoded.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize()
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            write!(s, "{b:02x}").expect("writing to a String");
            s
        })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub hash: String,
}

/// Writes files into one directory and remembers their hashes.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<OutputFile>,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| HarnessError::io(&root, e))?;
        Ok(Self {
            root,
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|e| HarnessError::io(&path, e))?;
        self.files.push(OutputFile {
            path: name.to_string(),
            hash: content_hash(contents.as_bytes()),
        });
        Ok(path)
    }

    pub fn files(&self) -> &[OutputFile] {
        &self.files
    }

    /// Writes `manifest.json` (pretty printed, trailing newline); the
    /// manifest itself is not listed among the outputs.
    pub fn write_manifest<M: Serialize>(&self, manifest: &M) -> Result<PathBuf> {
        let path = self.root.join("manifest.json");
        let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
        Ok(path)
    }
}
