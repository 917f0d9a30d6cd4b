//! Monotone rearrangement of a conditional distribution estimate and the
//! resulting non-crossing quantile estimator.
//!
//! For a reference distribution `G`, a kernel `κ` and bandwidth `b`,
//!
//! ```text
//! H(F) = (1/b) ∫₀¹ ∫_{-∞}^{τ} κ((F(G⁻¹(u)) - v)/b) dv du
//!      = ∫₀¹ K̄((F(G⁻¹(u)) - τ)/b) du,      K̄(w) = 1 - κ_cdf(w),
//! ```
//!
//! and the quantile estimate is `G⁻¹(H(F̂(·|x)))`. The inner integral is
//! evaluated in closed form; only the outer integral is discretized, with a
//! midpoint rule on `u_grid` nodes.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF as _, Normal};

use crate::cdf_estimator::{EstimatorConfig, LocalCdf};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{check_bandwidth, KernelSpec};
use crate::scalar::Scalar;

/// Values of `H` are clamped to `[H_CLAMP, 1 - H_CLAMP]` before inversion.
pub const H_CLAMP: f64 = 1e-9;
/// Smallest sample size `select_g` accepts.
pub const MIN_G_SAMPLE: usize = 10;

/// A normal reference distribution `G = N(mu, sigma²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GSpec<T> {
    pub mu: T,
    pub sigma: T,
}

impl<T: Scalar> GSpec<T> {
    pub fn new(mu: T, sigma: T) -> Result<Self> {
        if !(sigma > T::zero() && sigma.is_finite() && mu.is_finite()) {
            return Err(Error::InvalidConfig(format!("invalid reference distribution N({mu}, {sigma}²)")));
        }
        Ok(Self { mu, sigma })
    }

    pub fn standard() -> Self {
        Self { mu: T::zero(), sigma: T::one() }
    }

    pub fn cdf(&self, y: T) -> T {
        T::lit(std_normal_cdf(((y - self.mu) / self.sigma).as_f64()))
    }

    pub fn quantile(&self, u: T) -> T {
        self.mu + self.sigma * T::lit(std_normal_quantile(u.as_f64()))
    }
}

fn std_normal() -> Normal {
    Normal::standard()
}

/// `Φ(x)` through the musl `erfc`.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `Φ⁻¹(u)`: the statrs approximation polished by Newton steps on
/// [`std_normal_cdf`].
pub fn std_normal_quantile(u: f64) -> f64 {
    let mut x = std_normal().inverse_cdf(u);
    if !x.is_finite() {
        return x;
    }
    for _ in 0..2 {
        let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if density <= f64::MIN_POSITIVE {
            break;
        }
        // upper tail through the reflected lower tail for relative accuracy
        let step = if x > 0.0 {
            (std_normal_cdf(-x) - (1.0 - u)) / density
        } else {
            (std_normal_cdf(x) - u) / density
        };
        x = if x > 0.0 { x + step } else { x - step };
    }
    x
}

/// Linear-interpolation (type 7) empirical quantile of sorted data.
pub fn quantile_type7<T: Scalar>(sorted: &[T], p: f64) -> T {
    assert!(!sorted.is_empty());
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let frac = T::lit(pos - lo as f64);
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Normal `G` whose 5% and 95% quantiles match the empirical ones of `Y`.
pub fn select_g<T: Scalar>(data: &Dataset<T>) -> Result<GSpec<T>> {
    let n = data.n();
    if n < MIN_G_SAMPLE {
        return Err(Error::SampleTooSmall { n, min: MIN_G_SAMPLE });
    }
    let mut ys = data.y().to_vec();
    ys.sort_by(|a, b| a.partial_cmp(b).expect("finite responses"));
    let lo = quantile_type7(&ys, 0.05);
    let hi = quantile_type7(&ys, 0.95);
    if !(hi > lo) {
        return Err(Error::DegenerateSample(
            "5% and 95% empirical quantiles of Y coincide".into(),
        ));
    }
    let z95 = T::lit(std_normal_quantile(0.95));
    GSpec::new((lo + hi) * T::lit(0.5), (hi - lo) / (T::lit(2.0) * z95))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RearrangeConfig<T> {
    /// Bandwidth `b` of the rearrangement kernel.
    pub b: T,
    pub kappa: KernelSpec,
    /// Number of midpoint nodes of the outer integral.
    pub u_grid: usize,
}

impl<T: Scalar> RearrangeConfig<T> {
    pub const DEFAULT_U_GRID: usize = 256;

    pub fn new(b: T) -> Self {
        Self { b, kappa: KernelSpec::Epanechnikov, u_grid: Self::DEFAULT_U_GRID }
    }

    pub fn validate(&self) -> Result<()> {
        check_bandwidth("b", self.b)?;
        if self.b >= T::lit(0.5) {
            return Err(Error::InvalidBandwidth { name: "b", value: self.b.as_f64() });
        }
        if self.u_grid < 16 {
            return Err(Error::InvalidConfig(format!("u_grid = {} < 16", self.u_grid)));
        }
        if !(self.kappa.is_compact() && self.kappa.is_nonnegative()) {
            return Err(Error::InvalidConfig(format!(
                "rearrangement kernel {} must be nonnegative with compact support",
                self.kappa
            )));
        }
        Ok(())
    }

    /// Midpoints `(j + 1/2)/m`.
    pub fn u_nodes(&self) -> Vec<T> {
        let m = T::from_usize_lossy(self.u_grid);
        (0..self.u_grid)
            .map(|j| (T::from_usize_lossy(j) + T::lit(0.5)) / m)
            .collect()
    }
}

fn check_level<T: Scalar>(tau: T) -> Result<()> {
    if tau > T::zero() && tau < T::one() {
        Ok(())
    } else {
        Err(Error::InvalidLevel(tau.to_f64().unwrap_or(f64::NAN)))
    }
}

/// `H` from the values `F(G⁻¹(uⱼ))` on the midpoint nodes.
pub fn h_functional<T: Scalar>(f_on_grid: &[T], tau: T, cfg: &RearrangeConfig<T>) -> Result<T> {
    check_level(tau)?;
    if f_on_grid.len() != cfg.u_grid {
        return Err(Error::InvalidConfig(format!(
            "expected {} grid values, got {}",
            cfg.u_grid,
            f_on_grid.len()
        )));
    }
    Ok(h_unchecked(f_on_grid, tau, cfg))
}

#[inline]
fn h_unchecked<T: Scalar>(f_on_grid: &[T], tau: T, cfg: &RearrangeConfig<T>) -> T {
    let mut acc = T::zero();
    for &f in f_on_grid {
        acc = acc + cfg.kappa.survival((f - tau) / cfg.b);
    }
    (acc / T::from_usize_lossy(f_on_grid.len())).clamp_unit()
}

fn invert<T: Scalar>(h: T, g: &GSpec<T>) -> T {
    let eps = T::lit(H_CLAMP);
    g.quantile(h.max(eps).min(T::one() - eps))
}

/// `G⁻¹(H(F))` for a known distribution function `F`.
pub fn rearranged_quantile<T: Scalar>(
    f: impl Fn(T) -> T,
    tau: T,
    g: &GSpec<T>,
    cfg: &RearrangeConfig<T>,
) -> Result<T> {
    cfg.validate()?;
    let values: Vec<T> = cfg.u_nodes().into_iter().map(|u| f(g.quantile(u))).collect();
    Ok(invert(h_functional(&values, tau, cfg)?, g))
}

/// Conditional quantile estimator `q̂_τ(x) = G⁻¹(H(F̂(·|x)))` bound to one
/// dataset. The response nodes `G⁻¹(uⱼ)` are shared by every `x`.
#[derive(Clone, Debug)]
pub struct QuantileEstimator<'a, T> {
    data: &'a Dataset<T>,
    cfg: EstimatorConfig<T>,
    rcfg: RearrangeConfig<T>,
    g: GSpec<T>,
    y_nodes: Vec<T>,
}

impl<'a, T: Scalar> QuantileEstimator<'a, T> {
    pub fn new(
        data: &'a Dataset<T>,
        cfg: &EstimatorConfig<T>,
        rcfg: &RearrangeConfig<T>,
        g: &GSpec<T>,
    ) -> Result<Self> {
        cfg.validate()?;
        rcfg.validate()?;
        let y_nodes = rcfg.u_nodes().into_iter().map(|u| g.quantile(u)).collect();
        Ok(Self { data, cfg: cfg.clone(), rcfg: *rcfg, g: *g, y_nodes })
    }

    /// Clamped CDF estimate at every node `G⁻¹(uⱼ)`.
    pub fn profile(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(LocalCdf::fit(self.data, x, &self.cfg)?.eval_many(&self.y_nodes))
    }

    pub fn estimate(&self, x: &[T], tau: T) -> Result<T> {
        check_level(tau)?;
        let profile = self.profile(x)?;
        Ok(invert(h_unchecked(&profile, tau, &self.rcfg), &self.g))
    }

    /// Estimates at several levels from a single profile.
    pub fn estimate_levels(&self, x: &[T], taus: &[T]) -> Result<Vec<T>> {
        for &t in taus {
            check_level(t)?;
        }
        let profile = self.profile(x)?;
        Ok(taus
            .iter()
            .map(|&t| invert(h_unchecked(&profile, t, &self.rcfg), &self.g))
            .collect())
    }
}

/// Single-point convenience wrapper around [`QuantileEstimator`].
pub fn quantile_estimate<T: Scalar>(
    data: &Dataset<T>,
    x: &[T],
    tau: T,
    cfg: &EstimatorConfig<T>,
    rcfg: &RearrangeConfig<T>,
    g: &GSpec<T>,
) -> Result<T> {
    QuantileEstimator::new(data, cfg, rcfg, g)?.estimate(x, tau)
}
