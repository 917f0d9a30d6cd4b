//! Observed triples `(Yᵢ, Xᵢ, Zᵢ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A sample of `n` responses with a `d`-dimensional covariate `X` and a
/// `q`-dimensional covariate block `Z`. Covariates are stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    y: Vec<T>,
    x: Vec<T>,
    z: Vec<T>,
    d: usize,
    q: usize,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dataset from row-major covariate buffers.
    pub fn new(y: Vec<T>, x: Vec<T>, d: usize, z: Vec<T>, q: usize) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::SampleTooSmall { n, min: 2 });
        }
        if d == 0 || q == 0 {
            return Err(Error::InvalidData("covariate dimensions must be at least 1".into()));
        }
        if x.len() != n * d {
            return Err(Error::InvalidData(format!("x has {} entries, expected {n}×{d}", x.len())));
        }
        if z.len() != n * q {
            return Err(Error::InvalidData(format!("z has {} entries, expected {n}×{q}", z.len())));
        }
        for (name, buf) in [("y", &y), ("x", &x), ("z", &z)] {
            if let Some(pos) = buf.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!("non-finite value in {name} at flat index {pos}")));
            }
        }
        Ok(Self { y, x, z, d, q })
    }

    /// Convenience constructor for scalar `X` and `Z`.
    pub fn univariate(y: Vec<T>, x: Vec<T>, z: Vec<T>) -> Result<Self> {
        Self::new(y, x, 1, z, 1)
    }

    /// Builds a dataset from column vectors.
    pub fn from_columns(y: Vec<T>, x_cols: &[Vec<T>], z_cols: &[Vec<T>]) -> Result<Self> {
        let n = y.len();
        let interleave = |cols: &[Vec<T>], what: &str| -> Result<Vec<T>> {
            if let Some(c) = cols.iter().find(|c| c.len() != n) {
                return Err(Error::InvalidData(format!(
                    "{what} column has {} rows, expected {n}",
                    c.len()
                )));
            }
            Ok((0..n).flat_map(|i| cols.iter().map(move |c| c[i])).collect())
        };
        let x = interleave(x_cols, "x")?;
        let z = interleave(z_cols, "z")?;
        Self::new(y, x, x_cols.len(), z, z_cols.len())
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn x_flat(&self) -> &[T] {
        &self.x
    }

    pub fn z_flat(&self) -> &[T] {
        &self.z
    }

    #[inline]
    pub fn x_row(&self, i: usize) -> &[T] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn z_row(&self, i: usize) -> &[T] {
        &self.z[i * self.q..(i + 1) * self.q]
    }

    /// Returns a copy with the responses replaced.
    pub fn with_y(&self, y: Vec<T>) -> Result<Self> {
        Self::new(y, self.x.clone(), self.d, self.z.clone(), self.q)
    }

    /// Returns a copy with the Z block replaced.
    pub fn with_z(&self, z: Vec<T>, q: usize) -> Result<Self> {
        Self::new(self.y.clone(), self.x.clone(), self.d, z, q)
    }
}

/// `a ≤ b` coordinatewise.
#[inline]
pub(crate) fn dominated<T: PartialOrd>(a: &[T], b: &[T]) -> bool {
    a.iter().zip(b).all(|(u, v)| u <= v)
}
