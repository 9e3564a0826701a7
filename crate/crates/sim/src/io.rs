//! Matrix and dataset files.
//!
//! Matrices are stored either as CSV (one row per line, no header) or in a
//! little-endian binary layout:
//!
//! ```text
//! u64 rows | u64 cols | rows * cols f64, row-major
//! ```
//!
//! The format is chosen by extension: `.csv` means CSV, anything else
//! binary. A dataset is its point matrix (one row per point) plus a JSON
//! sidecar at `<path>.json` holding the parameters, the planted labels and
//! the realised centres.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use kclust_core::{Dataset, Matrix, ModelParams, Partition};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    pub fn from_path(path: &Path) -> MatrixFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => MatrixFormat::Csv,
            _ => MatrixFormat::Binary,
        }
    }
}

/// `<path>.json`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_matrix_binary<W: Write>(mut w: W, m: &Matrix) -> Result<()> {
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    for v in m.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_binary<R: Read>(mut r: R) -> Result<Matrix> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word).context("missing row count")?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word).context("missing column count")?;
    let cols = u64::from_le_bytes(word) as usize;
    let n = rows.checked_mul(cols).context("matrix dimensions overflow")?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    ensure!(bytes.len() == 8 * n, "expected {} bytes of data for a {rows}x{cols} matrix, found {}", 8 * n, bytes.len());
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(Matrix::from_vec(rows, cols, data)?)
}

pub fn write_matrix_csv<W: Write>(w: W, m: &Matrix) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for i in 0..m.rows() {
        wr.write_record(m.row(i).iter().map(|v| v.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_matrix_csv<R: Read>(r: R) -> Result<Matrix> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(r);
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().with_context(|| format!("line {}: {f:?} is not a number", i + 1)))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("matrix file is empty");
    }
    Ok(Matrix::from_rows(&rows)?)
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let w = BufWriter::new(f);
    match MatrixFormat::from_path(path) {
        MatrixFormat::Csv => write_matrix_csv(w, m),
        MatrixFormat::Binary => write_matrix_binary(w, m),
    }
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let r = BufReader::new(f);
    match MatrixFormat::from_path(path) {
        MatrixFormat::Csv => read_matrix_csv(r),
        MatrixFormat::Binary => read_matrix_binary(r),
    }
    .with_context(|| format!("reading {}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub params: ModelParams,
    pub m: usize,
    /// Planted labels, 0-based.
    pub truth: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    write_matrix(path, &ds.points)?;
    let side = DatasetSidecar {
        params: ds.params,
        m: ds.m(),
        truth: ds.truth.labels().to_vec(),
        centers: (0..ds.centers.rows()).map(|s| ds.centers.row(s).to_vec()).collect(),
    };
    write_json(&sidecar_path(path), &side)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let points = read_matrix(path)?;
    let side: DatasetSidecar = read_json(&sidecar_path(path))?;
    let truth = Partition::new(side.truth, side.params.k)?;
    let centers = Matrix::from_rows(&side.centers)?;
    Dataset::from_parts(points, centers, truth, side.params).with_context(|| format!("dataset {}", path.display()))
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut w = BufWriter::new(File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?);
        write(&mut w)?;
        w.flush()?;
        w.get_ref().sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))
}
