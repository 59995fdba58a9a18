//! Dataset containers, file formats and synthetic generators.
//!
//! Two on-disk matrix formats are supported:
//!
//! * CSV: comma-separated numbers, one point per line, no header.
//! * raw-f32: an 8-byte header of two little-endian `u32` (`n`, `m`) followed
//!   by `n * m` little-endian `f32` values in row-major order.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, TrimapError};
use crate::linalg::Embedding;

/// `n` points in `m` dimensions, one point per row.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    n: usize,
    m: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    /// Builds a matrix from row-major values, checking shape and finiteness.
    pub fn new(n: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(TrimapError::Empty(
                "a data matrix needs at least one row and one column",
            ));
        }
        if values.len() != n * m {
            return Err(TrimapError::DimensionMismatch(format!(
                "{} values cannot fill a {n}x{m} matrix",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(TrimapError::NonFinite {
                line: (pos / m + 1) as u64,
                column: pos % m + 1,
            });
        }
        Ok(DataMatrix { n, m, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let m = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * m);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != m {
                return Err(TrimapError::RaggedRow {
                    line: i as u64 + 1,
                    expected: m,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        DataMatrix::new(rows.len(), m, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.m)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Squared Euclidean distance between rows `i` and `j`.
    pub fn sqdist(&self, i: usize, j: usize) -> f64 {
        sqdist(self.row(i), self.row(j))
    }

    /// Multiplies every entry by `c`.
    pub fn scaled(&self, c: f64) -> DataMatrix {
        DataMatrix {
            n: self.n,
            m: self.m,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

#[inline]
pub(crate) fn sqdist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Integer class ids, one per point.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Labels(pub Vec<i64>);

impl Labels {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    /// Fails unless there is exactly one label per point.
    pub fn check_len(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(TrimapError::DimensionMismatch(format!(
                "{} labels for {n} points",
                self.len()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    RawF32,
}

pub fn load_matrix(path: impl AsRef<Path>, format: MatrixFormat) -> Result<DataMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| TrimapError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    match format {
        MatrixFormat::Csv => parse_csv(&bytes),
        MatrixFormat::RawF32 => parse_raw_f32(&bytes),
    }
}

pub fn parse_csv(bytes: &[u8]) -> Result<DataMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut values = Vec::new();
    let mut width = None;
    let mut n = 0;
    for record in reader.records() {
        let record = record.map_err(|e| TrimapError::Csv {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(n as u64 + 1, |p| p.line());
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(TrimapError::RaggedRow {
                line,
                expected,
                found: record.len(),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| TrimapError::NonNumeric {
                line,
                column: c + 1,
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(TrimapError::NonFinite { line, column: c + 1 });
            }
            values.push(v);
        }
        n += 1;
    }
    DataMatrix::new(n, width.unwrap_or(0), values)
}

pub fn parse_raw_f32(bytes: &[u8]) -> Result<DataMatrix> {
    if bytes.len() < 8 {
        return Err(TrimapError::HeaderMismatch {
            n: 0,
            m: 0,
            expected: 0,
            found: bytes.len() as u64,
        });
    }
    let n = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let m = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let payload = &bytes[8..];
    let expected = n as u64 * m as u64 * 4;
    if payload.len() as u64 != expected {
        return Err(TrimapError::HeaderMismatch {
            n,
            m,
            expected,
            found: payload.len() as u64,
        });
    }
    let values = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    DataMatrix::new(n as usize, m as usize, values)
}

/// Serializes `x` in the raw-f32 layout (values are narrowed to `f32`).
pub fn encode_raw_f32(x: &DataMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + x.values.len() * 4);
    out.extend_from_slice(&(x.n as u32).to_le_bytes());
    out.extend_from_slice(&(x.m as u32).to_le_bytes());
    for v in &x.values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

/// Reads one integer label per line. Blank trailing lines are ignored.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Labels> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| TrimapError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_labels(&text)
}

pub fn parse_labels(text: &str) -> Result<Labels> {
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v = line.parse().map_err(|_| TrimapError::BadLabel {
            line: i + 1,
            value: line.to_string(),
        })?;
        labels.push(v);
    }
    Ok(Labels(labels))
}

/// Formats an embedding as CSV, appending the label as a last column when
/// given. Floats use the shortest representation that parses back exactly.
pub fn format_embedding(y: &Embedding, labels: Option<&Labels>) -> Result<String> {
    if let Some(labels) = labels {
        labels.check_len(y.n())?;
    }
    let mut out = String::with_capacity(y.n() * y.d() * 12);
    for (i, row) in y.rows().enumerate() {
        for (c, v) in row.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            write!(out, "{v}").unwrap();
        }
        if let Some(labels) = labels {
            write!(out, ",{}", labels.0[i]).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_embedding(y: &Embedding, labels: Option<&Labels>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = format_embedding(y, labels)?;
    fs::write(path, text).map_err(|source| TrimapError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Samples `n` points from a 3-D S-shaped sheet.
///
/// Points are `(sin t, u, sign(t) (cos t - 1))` with `t` uniform on
/// `[-3pi/2, 3pi/2]` and `u` uniform on `[0, 2]`. Labels split the `t` range
/// into 10 equal-width bins.
pub fn make_s_curve(n: usize, seed: u64) -> (DataMatrix, Labels) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(3 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let t = 3.0 * PI * (rng.random::<f64>() - 0.5);
        let u = 2.0 * rng.random::<f64>();
        values.extend_from_slice(&[t.sin(), u, t.signum() * (t.cos() - 1.0)]);
        let bin = ((t + 1.5 * PI) / (3.0 * PI) * 10.0).floor() as i64;
        labels.push(bin.clamp(0, 9));
    }
    (
        DataMatrix::new(n, 3, values).expect("s-curve needs n >= 1"),
        Labels(labels),
    )
}

/// Isotropic Gaussian clusters.
///
/// Cluster centers are drawn from `N(0, center_spread^2 I)`; each point gets
/// a uniformly chosen cluster and `N(0, cluster_std^2 I)` noise. Labels are
/// cluster ids.
pub fn make_blobs(
    n: usize,
    dims: usize,
    clusters: usize,
    center_spread: f64,
    cluster_std: f64,
    seed: u64,
) -> (DataMatrix, Labels) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clusters = clusters.max(1);
    let centers: Vec<f64> = (0..clusters * dims)
        .map(|_| center_spread * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut values = Vec::with_capacity(n * dims);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.random_range(0..clusters);
        let center = &centers[c * dims..(c + 1) * dims];
        values.extend(
            center
                .iter()
                .map(|mu| mu + cluster_std * rng.sample::<f64, _>(StandardNormal)),
        );
        labels.push(c as i64);
    }
    (
        DataMatrix::new(n, dims, values).expect("blobs need n, dims >= 1"),
        Labels(labels),
    )
}
