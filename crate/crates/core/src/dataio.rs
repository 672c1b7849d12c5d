//! LibSVM text parsing into a compressed sparse row dataset.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: malformed token `{token}`")]
    Malformed { line: usize, token: String },
    #[error("line {line}: feature index {index} does not increase")]
    NonIncreasingIndex { line: usize, index: usize },
    #[error("line {line}: label `{label}` is not +1 or -1")]
    BadLabel { line: usize, label: String },
    #[error("line {line}: feature index {index} exceeds declared dimension {dim}")]
    IndexOutOfRange {
        line: usize,
        index: usize,
        dim: usize,
    },
    #[error("dataset has no samples")]
    Empty,
}

/// Binary-labelled sparse dataset, rows stored in CSR form.
///
/// Indices are 0-based in memory (1-based on disk) and strictly increasing
/// within each row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    labels: Vec<f64>,
    row_ptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

/// Borrowed view of one sparse row.
#[derive(Clone, Copy, Debug)]
pub struct SparseRow<'a> {
    pub indices: &'a [u32],
    pub values: &'a [f64],
}

impl SparseRow<'_> {
    #[inline]
    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(self.values)
            .map(|(&j, &v)| v * dense[j as usize])
            .sum()
    }

    /// `out += scale * row`
    #[inline]
    pub fn add_scaled_to(&self, scale: f64, out: &mut [f64]) {
        for (&j, &v) in self.indices.iter().zip(self.values) {
            out[j as usize] += scale * v;
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

impl Dataset {
    /// Build from dense-ish `(label, [(index, value)])` rows with 0-based
    /// indices. Validates every invariant the parser would.
    pub fn from_rows<I>(dim: usize, rows: I) -> Result<Self, DataError>
    where
        I: IntoIterator<Item = (f64, Vec<(usize, f64)>)>,
    {
        let mut ds = Self::empty(dim);
        for (k, (label, feats)) in rows.into_iter().enumerate() {
            let line = k + 1;
            if label != 1.0 && label != -1.0 {
                return Err(DataError::BadLabel {
                    line,
                    label: label.to_string(),
                });
            }
            let mut prev: Option<usize> = None;
            for &(j, v) in &feats {
                if prev.is_some_and(|p| j <= p) {
                    return Err(DataError::NonIncreasingIndex { line, index: j + 1 });
                }
                if j >= dim {
                    return Err(DataError::IndexOutOfRange {
                        line,
                        index: j + 1,
                        dim,
                    });
                }
                if !v.is_finite() {
                    return Err(DataError::Malformed {
                        line,
                        token: format!("{}:{v}", j + 1),
                    });
                }
                prev = Some(j);
                ds.indices.push(j as u32);
                ds.values.push(v);
            }
            ds.labels.push(label);
            ds.row_ptr.push(ds.indices.len());
        }
        if ds.labels.is_empty() {
            return Err(DataError::Empty);
        }
        Ok(ds)
    }

    fn empty(dim: usize) -> Self {
        Self {
            dim,
            labels: Vec::new(),
            row_ptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    #[inline]
    pub fn row(&self, i: usize) -> SparseRow<'_> {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        SparseRow {
            indices: &self.indices[a..b],
            values: &self.values[a..b],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = SparseRow<'_>> + '_ {
        (0..self.n()).map(move |i| self.row(i))
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// SHA-256 over the canonical LibSVM serialization, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.dim as u64).to_le_bytes());
        self.write_libsvm(&mut HashWriter(&mut hasher))
            .expect("hashing cannot fail");
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Canonical serialization: label (`+1`/`-1`) then `index:value` pairs,
    /// 1-based, values in shortest round-trip form.
    pub fn write_libsvm<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for i in 0..self.n() {
            out.write_all(if self.labels[i] > 0.0 { b"+1" } else { b"-1" })?;
            let row = self.row(i);
            for (&j, &v) in row.indices.iter().zip(row.values) {
                write!(out, " {}:{}", j + 1, v)?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_libsvm_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_libsvm(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serialization is ASCII")
    }
}

struct HashWriter<'a>(&'a mut Sha256);

impl Write for HashWriter<'_> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.update(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Parse LibSVM text. With `declared_dim`, indices beyond it are an error;
/// without, the dimension is the largest index seen.
///
/// Blank lines are skipped and anything after `#` is a comment. Line `k` of
/// the input (counting only data lines) becomes sample `k`.
pub fn parse_libsvm<R: Read>(input: R, declared_dim: Option<usize>) -> Result<Dataset, DataError> {
    let reader = BufReader::new(input);
    let mut ds = Dataset::empty(declared_dim.unwrap_or(0));
    let mut max_index = 0usize;

    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line.map_err(|source| DataError::Io {
            path: PathBuf::from("<input>"),
            source,
        })?;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line.as_str(),
        };
        let mut tokens = content.split_ascii_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let label = parse_label(label_tok).ok_or_else(|| DataError::BadLabel {
            line: line_no,
            label: label_tok.to_string(),
        })?;

        let mut prev = 0usize;
        for tok in tokens {
            let malformed = || DataError::Malformed {
                line: line_no,
                token: tok.to_string(),
            };
            let (idx, val) = tok.split_once(':').ok_or_else(malformed)?;
            let index: usize = idx.parse().map_err(|_| malformed())?;
            let value: f64 = val.parse().map_err(|_| malformed())?;
            if index == 0 || !value.is_finite() {
                return Err(malformed());
            }
            if index <= prev {
                return Err(DataError::NonIncreasingIndex {
                    line: line_no,
                    index,
                });
            }
            if let Some(dim) = declared_dim {
                if index > dim {
                    return Err(DataError::IndexOutOfRange {
                        line: line_no,
                        index,
                        dim,
                    });
                }
            }
            prev = index;
            max_index = max_index.max(index);
            ds.indices.push((index - 1) as u32);
            ds.values.push(value);
        }
        ds.labels.push(label);
        ds.row_ptr.push(ds.indices.len());
    }

    if ds.labels.is_empty() {
        return Err(DataError::Empty);
    }
    if declared_dim.is_none() {
        ds.dim = max_index;
    }
    Ok(ds)
}

fn parse_label(tok: &str) -> Option<f64> {
    match tok {
        "+1" | "1" => Some(1.0),
        "-1" => Some(-1.0),
        other => match other.parse::<f64>() {
            Ok(v) if v == 1.0 || v == -1.0 => Some(v),
            _ => None,
        },
    }
}

/// Read a LibSVM file; names ending in `.gz` are decompressed first.
pub fn load_libsvm(path: &Path, declared_dim: Option<usize>) -> Result<Dataset, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let gz = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("gz"));
    let result = if gz {
        parse_libsvm(MultiGzDecoder::new(file), declared_dim)
    } else {
        parse_libsvm(file, declared_dim)
    };
    result.map_err(|e| match e {
        DataError::Io { source, .. } => DataError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetStats {
    pub n: usize,
    pub dim: usize,
    pub max_row_norm_sq: f64,
    pub mean_row_norm_sq: f64,
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} dim={} max_row_norm_sq={} mean_row_norm_sq={}",
            self.n, self.dim, self.max_row_norm_sq, self.mean_row_norm_sq
        )
    }
}

/// Exact sample count and squared-row-norm statistics. A [`Dataset`] is
/// never empty, so the mean is always defined.
pub fn dataset_stats(ds: &Dataset) -> DatasetStats {
    let (max, sum) = ds
        .rows()
        .map(|r| r.norm_sq())
        .fold((0.0f64, 0.0f64), |(m, s), x| (m.max(x), s + x));
    DatasetStats {
        n: ds.n(),
        dim: ds.dim(),
        max_row_norm_sq: max,
        mean_row_norm_sq: sum / ds.n() as f64,
    }
}
