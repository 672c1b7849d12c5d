use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::sweep::{EvalRecord, SweepRow};
use super::{io_err, HarnessError};

/// Finite floats as numbers, infinities and NaN as the strings `inf`,
/// `-inf`, `nan`, so JSON can carry diverged runs. Reading accepts either.
pub(crate) mod float_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(s) => match s.trim() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => other.parse().map_err(serde::de::Error::custom),
            },
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |e| HarnessError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(create(path)?);
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize()
        .collect::<Result<_, _>>()
        .map_err(csv_err(path))
}

pub const RECORD_HEADER: [&str; 7] = ["algorithm", "M", "K", "eta", "seed", "t", "suboptimality"];
pub const ROW_HEADER: [&str; 5] = ["algorithm", "M", "K", "best_eta", "best_suboptimality"];

/// `algorithm,M,K,eta,seed,t,suboptimality`; floats in shortest round-trip
/// form. An empty slice yields a header-only file.
pub fn write_records_csv(path: &Path, records: &[EvalRecord]) -> Result<(), HarnessError> {
    write_csv(path, &RECORD_HEADER, records)
}

/// `algorithm,M,K,best_eta,best_suboptimality`.
pub fn write_rows_csv(path: &Path, rows: &[SweepRow]) -> Result<(), HarnessError> {
    write_csv(path, &ROW_HEADER, rows)
}

pub fn read_records_csv(path: &Path) -> Result<Vec<EvalRecord>, HarnessError> {
    read_csv(path)
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<SweepRow>, HarnessError> {
    read_csv(path)
}

/// Array of objects with the same fields as the CSV columns.
pub fn write_json<T: Serialize>(path: &Path, items: &[T]) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, items).map_err(|e| HarnessError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
