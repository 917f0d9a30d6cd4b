//! Smoothed local-polynomial estimator of the conditional distribution
//! function `F(y | x)`.
//!
//! For a fixed evaluation point `x` the estimator is linear in the smoothed
//! responses `Ω((y - Yᵢ)/dₙ)`: `F̂(y|x) = Σᵢ ℓᵢ(x) Ω((y - Yᵢ)/dₙ)`. The
//! equivalent weights `ℓᵢ(x)` are the first row of `(XᵗWX)⁻¹XᵗW` and are
//! computed once per `x` by [`LocalCdf::fit`]; every evaluation in `y`
//! afterwards costs `O(n)`.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{check_bandwidth, KernelBundle, KernelSpec};
use crate::scalar::Scalar;

/// Designs whose condition estimate exceeds this are ridge-regularized.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig<T> {
    /// Polynomial order `p`.
    pub p: usize,
    /// Bandwidth in x.
    pub h: T,
    /// Smoothing bandwidth `dₙ` of the response indicator.
    pub d_smooth: T,
    pub kernels: KernelBundle,
    /// Ridge added to the normal equations, as a multiple of their trace,
    /// when the local design is ill-conditioned.
    pub ridge_eps: T,
}

impl<T: Scalar> EstimatorConfig<T> {
    /// Local quadratic fit with the default kernels.
    pub fn new(h: T, d_smooth: T) -> Self {
        Self { p: 2, h, d_smooth, kernels: KernelBundle::default(), ridge_eps: T::lit(1e-9) }
    }

    pub fn validate(&self) -> Result<()> {
        check_bandwidth("h", self.h)?;
        check_bandwidth("d_smooth", self.d_smooth)?;
        if !(self.ridge_eps >= T::zero() && self.ridge_eps.is_finite()) {
            return Err(Error::InvalidConfig("ridge_eps must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// All multi-indices `k ∈ ℕ₀ᵈ` with total degree `≤ p`, ordered by degree and,
/// within a degree, lexicographically with the first coordinate varying
/// slowest and largest first: `(0,0), (1,0), (0,1), (2,0), (1,1), (0,2)`.
pub fn monomial_basis(d: usize, p: usize) -> Vec<Vec<u32>> {
    fn compositions(total: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=total).rev() {
            prefix.push(first);
            compositions(total - first, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    assert!(d >= 1, "dimension must be at least 1");
    let mut out = Vec::new();
    for degree in 0..=p as u32 {
        compositions(degree, d, &mut Vec::with_capacity(d), &mut out);
    }
    out
}

/// Which solve produced the equivalent weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitPath {
    Polynomial,
    Ridged,
    LocalConstant,
}

/// The local fit at one evaluation point.
#[derive(Clone, Debug)]
pub struct LocalCdf<'a, T> {
    y: &'a [T],
    d_smooth: T,
    omega: KernelSpec,
    weights: Vec<T>,
    path: FitPath,
}

impl<'a, T: Scalar> LocalCdf<'a, T> {
    pub fn fit(data: &'a Dataset<T>, x: &[T], cfg: &EstimatorConfig<T>) -> Result<Self> {
        cfg.validate()?;
        if x.len() != data.d() {
            return Err(Error::InvalidConfig(format!(
                "evaluation point has dimension {}, data has {}",
                x.len(),
                data.d()
            )));
        }
        let n = data.n();
        let d = data.d();
        let scale = T::one() / (T::from_usize_lossy(n) * cfg.h.powi(d as i32));

        let mut kernel_w = Vec::with_capacity(n);
        let mut scaled = Vec::with_capacity(n * d);
        for i in 0..n {
            let mut w = scale;
            for (xj, xij) in x.iter().zip(data.x_row(i)) {
                let u = (*xj - *xij) / cfg.h;
                w = w * cfg.kernels.k_smooth.density(u);
                scaled.push(u);
            }
            kernel_w.push(w);
        }
        if kernel_w.iter().all(|w| *w == T::zero()) {
            return Err(Error::EmptyWindow);
        }

        let (weights, path) = if cfg.p == 0 {
            (local_constant(&kernel_w), FitPath::LocalConstant)
        } else {
            let basis = monomial_basis(d, cfg.p);
            match polynomial_weights(&kernel_w, &scaled, d, &basis, cfg.ridge_eps) {
                Some(found) => found,
                None => (local_constant(&kernel_w), FitPath::LocalConstant),
            }
        };
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::SingularDesign);
        }
        Ok(Self { y: data.y(), d_smooth: cfg.d_smooth, omega: cfg.kernels.omega, weights, path })
    }

    /// Equivalent weights `ℓᵢ(x)`; they sum to one up to rounding.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn path(&self) -> FitPath {
        self.path
    }

    /// `F̂(y|x)` clamped to `[0, 1]`.
    #[inline]
    pub fn eval(&self, y: T) -> T {
        self.eval_raw(y).clamp_unit()
    }

    /// The unclamped local-polynomial value.
    pub fn eval_raw(&self, y: T) -> T {
        let mut acc = T::zero();
        for (&w, &yi) in self.weights.iter().zip(self.y) {
            acc = acc + w * self.omega.cdf((y - yi) / self.d_smooth);
        }
        acc
    }

    pub fn eval_many(&self, ys: &[T]) -> Vec<T> {
        ys.iter().map(|&y| self.eval(y)).collect()
    }
}

fn local_constant<T: Scalar>(kernel_w: &[T]) -> Vec<T> {
    let total: T = kernel_w.iter().copied().sum();
    kernel_w.iter().map(|&w| w / total).collect()
}

/// Solves the weighted normal equations for `e₁` and returns `ℓᵢ`, or `None`
/// when even the ridged system cannot be factorized.
fn polynomial_weights<T: Scalar>(
    kernel_w: &[T],
    scaled: &[T],
    d: usize,
    basis: &[Vec<u32>],
    ridge_eps: T,
) -> Option<(Vec<T>, FitPath)> {
    let n = kernel_w.len();
    let m = basis.len();
    let mut design = vec![T::zero(); n * m];
    for i in 0..n {
        let u = &scaled[i * d..(i + 1) * d];
        for (c, k) in basis.iter().enumerate() {
            let mut v = T::one();
            for (uj, &kj) in u.iter().zip(k) {
                v = v * uj.powi(kj as i32);
            }
            design[i * m + c] = v;
        }
    }
    let mut gram = vec![T::zero(); m * m];
    for i in 0..n {
        let w = kernel_w[i];
        if w == T::zero() {
            continue;
        }
        let row = &design[i * m..(i + 1) * m];
        for a in 0..m {
            let wa = w * row[a];
            for b in 0..=a {
                gram[a * m + b] = gram[a * m + b] + wa * row[b];
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            gram[b * m + a] = gram[a * m + b];
        }
    }

    let mut path = FitPath::Polynomial;
    let factor = match cholesky(&gram, m) {
        Some(l) if condition_estimate(&l, m) <= T::lit(CONDITION_LIMIT) => l,
        _ => {
            path = FitPath::Ridged;
            let trace = (0..m).map(|a| gram[a * m + a]).fold(T::zero(), |s, v| s + v);
            let ridge = ridge_eps * trace;
            let mut ridged = gram.clone();
            for a in 0..m {
                ridged[a * m + a] = ridged[a * m + a] + ridge;
            }
            cholesky(&ridged, m)?
        }
    };
    let mut rhs = vec![T::zero(); m];
    rhs[0] = T::one();
    let coef = cholesky_solve(&factor, m, rhs);
    if coef.iter().any(|c| !c.is_finite()) {
        return None;
    }
    let weights = (0..n)
        .map(|i| {
            let row = &design[i * m..(i + 1) * m];
            let proj = row.iter().zip(&coef).fold(T::zero(), |s, (r, c)| s + *r * *c);
            kernel_w[i] * proj
        })
        .collect();
    Some((weights, path))
}

/// Lower Cholesky factor of a symmetric matrix, `None` unless it is
/// numerically positive definite.
fn cholesky<T: Scalar>(a: &[T], m: usize) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = a[i * m + j];
            for k in 0..j {
                s = s - l[i * m + k] * l[j * m + k];
            }
            if i == j {
                if !(s > T::zero()) || !s.is_finite() {
                    return None;
                }
                l[i * m + i] = s.sqrt();
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }
    Some(l)
}

/// `(max Lᵢᵢ / min Lᵢᵢ)²`, a cheap lower bound on the 2-norm condition
/// number of `LLᵗ`.
fn condition_estimate<T: Scalar>(l: &[T], m: usize) -> T {
    let diag = (0..m).map(|i| l[i * m + i]);
    let (lo, hi) = diag.fold((T::infinity(), T::zero()), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let r = hi / lo;
    r * r
}

fn cholesky_solve<T: Scalar>(l: &[T], m: usize, mut b: Vec<T>) -> Vec<T> {
    for i in 0..m {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i * m + k] * b[k];
        }
        b[i] = s / l[i * m + i];
    }
    for i in (0..m).rev() {
        let mut s = b[i];
        for k in i + 1..m {
            s = s - l[k * m + i] * b[k];
        }
        b[i] = s / l[i * m + i];
    }
    b
}

/// `F̂(y|x)` at a single point.
pub fn estimate_cdf<T: Scalar>(data: &Dataset<T>, x: &[T], y: T, cfg: &EstimatorConfig<T>) -> Result<T> {
    Ok(LocalCdf::fit(data, x, cfg)?.eval(y))
}

/// `F̂(yⱼ|x)` for every `yⱼ`, factorizing the local design once.
pub fn estimate_cdf_profile<T: Scalar>(
    data: &Dataset<T>,
    x: &[T],
    y_values: &[T],
    cfg: &EstimatorConfig<T>,
) -> Result<Vec<T>> {
    Ok(LocalCdf::fit(data, x, cfg)?.eval_many(y_values))
}
