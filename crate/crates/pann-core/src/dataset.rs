//! Dataset records and CSV persistence.
//!
//! One row per tuple: the nine components of F, the parameter vector, the
//! nine components of P, the load path id and the parameter index. Values
//! are written with 17 significant digits so a write/read round trip is
//! bit-exact.

use crate::float::{format_full, parse_full, Real};
use crate::tensor::Tensor2;
use sha2::{Digest, Sha256};
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed dataset: {0}")]
    Malformed(String),
}

/// Calibration or test split.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Calib,
    Test,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Calib => "calib",
            Role::Test => "test",
        }
    }
}

/// One (F, t, P) record with its grouping metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct DataTuple<T> {
    pub f: Tensor2<T>,
    pub t: Vec<T>,
    pub p: Tensor2<T>,
    pub load_path: u32,
    pub t_index: u32,
}

/// A list of tuples sharing one parameter dimensionality.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub tuples: Vec<DataTuple<T>>,
    pub t_dim: usize,
}

impl<T: Real> Dataset<T> {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Mean Frobenius norm of the stresses; the normalisation factor of
    /// the vector-valued study.
    pub fn mean_stress_norm(&self) -> T {
        if self.tuples.is_empty() {
            return T::one();
        }
        let mut sum = T::zero();
        for tuple in &self.tuples {
            sum += tuple.p.frobenius_norm();
        }
        sum / T::real(self.tuples.len() as f64)
    }

    /// Group tuples by (load path, parameter index); the grouping of the
    /// path-weighted loss. Groups come out in first-appearance order.
    pub fn groups(&self) -> Vec<((u32, u32), Vec<usize>)> {
        let mut order: Vec<(u32, u32)> = Vec::new();
        let mut buckets: Vec<Vec<usize>> = Vec::new();
        for (i, tuple) in self.tuples.iter().enumerate() {
            let key = (tuple.load_path, tuple.t_index);
            match order.iter().position(|k| *k == key) {
                Some(pos) => buckets[pos].push(i),
                None => {
                    order.push(key);
                    buckets.push(vec![i]);
                }
            }
        }
        order.into_iter().zip(buckets).collect()
    }

    pub fn header(&self) -> String {
        let mut cols: Vec<String> = Vec::new();
        for i in 1..=3 {
            for j in 1..=3 {
                cols.push(format!("F{i}{j}"));
            }
        }
        for k in 1..=self.t_dim {
            cols.push(format!("t{k}"));
        }
        for i in 1..=3 {
            for j in 1..=3 {
                cols.push(format!("P{i}{j}"));
            }
        }
        cols.push("load_path_id".into());
        cols.push("t_id".into());
        cols.join(",")
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<(), DatasetError> {
        writeln!(w, "{}", self.header())?;
        for tuple in &self.tuples {
            let mut fields: Vec<String> = Vec::with_capacity(20 + self.t_dim);
            for v in tuple.f.to_array() {
                fields.push(format_full(v));
            }
            for v in &tuple.t {
                fields.push(format_full(*v));
            }
            for v in tuple.p.to_array() {
                fields.push(format_full(v));
            }
            fields.push(tuple.load_path.to_string());
            fields.push(tuple.t_index.to_string());
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, DatasetError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| DatasetError::Malformed("empty file".into()))??;
        let cols: Vec<&str> = header.split(',').collect();
        let t_dim = cols
            .iter()
            .filter(|c| c.starts_with('t') && c[1..].parse::<usize>().is_ok())
            .count();
        if t_dim == 0 || cols.len() != 20 + t_dim {
            return Err(DatasetError::Malformed(format!(
                "unexpected header {header:?}"
            )));
        }
        let mut tuples = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 20 + t_dim {
                return Err(DatasetError::Malformed(format!(
                    "row {} has {} fields, expected {}",
                    lineno + 2,
                    fields.len(),
                    20 + t_dim
                )));
            }
            let num = |s: &str| -> Result<T, DatasetError> {
                parse_full(s)
                    .ok_or_else(|| DatasetError::Malformed(format!("bad number {s:?}")))
            };
            let mut f = [T::zero(); 9];
            for (slot, s) in f.iter_mut().zip(&fields[0..9]) {
                *slot = num(s)?;
            }
            let mut t = Vec::with_capacity(t_dim);
            for s in &fields[9..9 + t_dim] {
                t.push(num(s)?);
            }
            let mut p = [T::zero(); 9];
            for (slot, s) in p.iter_mut().zip(&fields[9 + t_dim..18 + t_dim]) {
                *slot = num(s)?;
            }
            let load_path = fields[18 + t_dim]
                .parse::<u32>()
                .map_err(|_| DatasetError::Malformed("bad load_path_id".into()))?;
            let t_index = fields[19 + t_dim]
                .parse::<u32>()
                .map_err(|_| DatasetError::Malformed("bad t_id".into()))?;
            tuples.push(DataTuple {
                f: Tensor2::from_array(f),
                t,
                p: Tensor2::from_array(p),
                load_path,
                t_index,
            });
        }
        Ok(Dataset { tuples, t_dim })
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut w)
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let r = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_csv(r)
    }
}

/// Hex SHA-256 of a file, recorded as model provenance.
pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(sha256_bytes(&bytes))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
