//! Feature matrices and the Euclidean distance used by every metric.
//!
//! All distances in the crate go through [`euclidean`] or [`euclidean_within`].
//! Both accumulate squared differences in the same fixed lane order, so a
//! distance computed with an early-exit bound is bit-identical to the full
//! computation whenever it is reported.

use crate::error::{Error, Result};

const LANES: usize = 8;
/// Number of `LANES`-sized chunks between early-exit checks.
const CHECK_EVERY: usize = 4;

/// An `n x d` row-major table of finite `f64` feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl FeatureMatrix {
    /// Builds a matrix from a flat row-major buffer, validating shape and finiteness.
    pub fn from_flat(data: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidMatrix(format!(
                "need at least one row and one column, got {n}x{d}"
            )));
        }
        if data.len() != n * d {
            return Err(Error::InvalidMatrix(format!(
                "buffer of length {} does not match shape {n}x{d}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / d,
                col: pos % d,
            });
        }
        Ok(FeatureMatrix { data, n, d })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has dimension {} but row 0 has {d}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(data, rows.len(), d)
    }

    /// One-dimensional points, one per row.
    pub fn from_column(values: &[f64]) -> Result<Self> {
        Self::from_flat(values.to_vec(), values.len(), 1)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Size of the payload in bytes.
    pub fn footprint_bytes(&self) -> usize {
        self.data.len() * std::mem::size_of::<f64>()
    }

    /// Rows selected by `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self::from_flat(data, indices.len(), self.d)
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &FeatureMatrix) -> Result<Self> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch {
                left: self.d,
                right: other.d,
            });
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Self::from_flat(data, self.n + other.n, self.d)
    }

    /// Replaces row `i` with `values`.
    pub fn set_row(&mut self, i: usize, values: &[f64]) -> Result<()> {
        if values.len() != self.d {
            return Err(Error::DimensionMismatch {
                left: self.d,
                right: values.len(),
            });
        }
        if let Some(col) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col });
        }
        self.data[i * self.d..(i + 1) * self.d].copy_from_slice(values);
        Ok(())
    }

    /// Adds `offset` to every row.
    pub fn translate(&mut self, offset: &[f64]) -> Result<()> {
        if offset.len() != self.d {
            return Err(Error::DimensionMismatch {
                left: self.d,
                right: offset.len(),
            });
        }
        for row in self.data.chunks_exact_mut(self.d) {
            for (x, o) in row.iter_mut().zip(offset) {
                *x += o;
            }
        }
        Ok(())
    }
}

/// Euclidean distance between two vectors of equal dimension.
pub fn distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(euclidean(a, b))
}

#[inline]
fn combine(l: &[f64; LANES]) -> f64 {
    ((l[0] + l[1]) + (l[2] + l[3])) + ((l[4] + l[5]) + (l[6] + l[7]))
}

#[inline]
fn accumulate_tail(lanes: &mut [f64; LANES], a: &[f64], b: &[f64]) {
    for (t, (x, y)) in a.iter().zip(b).enumerate() {
        let diff = x - y;
        lanes[t] += diff * diff;
    }
}

/// Unchecked Euclidean distance; callers guarantee equal lengths.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f64; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (xa, xb) in ca.zip(cb) {
        for t in 0..LANES {
            let diff = xa[t] - xb[t];
            lanes[t] += diff * diff;
        }
    }
    accumulate_tail(&mut lanes, ra, rb);
    combine(&lanes).sqrt()
}

/// Returns `Some(euclidean(a, b))` when it is `<= bound`, `None` otherwise.
///
/// The squared partial sum is checked periodically against a slightly
/// inflated bound, so `None` is only returned when the full distance
/// provably exceeds `bound`.
#[inline]
pub fn euclidean_within(a: &[f64], b: &[f64], bound: f64) -> Option<f64> {
    debug_assert_eq!(a.len(), b.len());
    let inflated = bound * (1.0 + 1e-9);
    let limit = inflated * inflated;
    let mut lanes = [0.0f64; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (c, (xa, xb)) in ca.zip(cb).enumerate() {
        for t in 0..LANES {
            let diff = xa[t] - xb[t];
            lanes[t] += diff * diff;
        }
        if c % CHECK_EVERY == CHECK_EVERY - 1 && combine(&lanes) > limit {
            return None;
        }
    }
    accumulate_tail(&mut lanes, ra, rb);
    let dist = combine(&lanes).sqrt();
    (dist <= bound).then_some(dist)
}
