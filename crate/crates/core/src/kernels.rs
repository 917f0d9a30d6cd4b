//! One-dimensional kernels, their distribution functions, the smoothed
//! indicator and multivariate product kernels with monomial weights.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Kernel families available to the estimators.
///
/// `Quartic4` is the fourth-order polynomial kernel
/// `(15/32)(3 - 10u² + 7u⁴)` on `[-1, 1]`. Its second moment vanishes, so it
/// takes negative values for `|u| > sqrt(3/7)` and its distribution function
/// overshoots `[0, 1]` slightly inside the support.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelSpec {
    #[serde(rename = "gaussian")]
    Gaussian,
    #[serde(rename = "epanechnikov")]
    Epanechnikov,
    #[serde(rename = "quartic4")]
    Quartic4,
}

impl KernelSpec {
    pub const ALL: [KernelSpec; 3] = [Self::Gaussian, Self::Epanechnikov, Self::Quartic4];

    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Epanechnikov => "epanechnikov",
            Self::Quartic4 => "quartic4",
        }
    }

    /// Support as `(lo, hi)`, `None` for the Gaussian.
    pub fn support(self) -> Option<(f64, f64)> {
        match self {
            Self::Gaussian => None,
            Self::Epanechnikov | Self::Quartic4 => Some((-1.0, 1.0)),
        }
    }

    pub fn is_compact(self) -> bool {
        self.support().is_some()
    }

    /// Whether the density is nonnegative everywhere.
    pub fn is_nonnegative(self) -> bool {
        !matches!(self, Self::Quartic4)
    }

    /// Kernel density at `u`.
    pub fn density<T: Scalar>(self, u: T) -> T {
        match self {
            Self::Gaussian => (-(u * u) * T::lit(0.5)).exp() / (T::TAU()).sqrt(),
            Self::Epanechnikov => {
                if u.abs() > T::one() {
                    T::zero()
                } else {
                    T::lit(0.75) * (T::one() - u * u)
                }
            }
            Self::Quartic4 => {
                if u.abs() > T::one() {
                    T::zero()
                } else {
                    let u2 = u * u;
                    T::lit(15.0 / 32.0) * (T::lit(3.0) - T::lit(10.0) * u2 + T::lit(7.0) * u2 * u2)
                }
            }
        }
    }

    /// `∫_{-∞}^{u}` of the density, in closed form.
    pub fn cdf<T: Scalar>(self, u: T) -> T {
        match self {
            Self::Gaussian => {
                T::lit(crate::rearrangement::std_normal_cdf(u.as_f64()))
            }
            Self::Epanechnikov => {
                if u <= -T::one() {
                    T::zero()
                } else if u >= T::one() {
                    T::one()
                } else {
                    T::lit(0.5) + u * (T::lit(0.75) - T::lit(0.25) * u * u)
                }
            }
            Self::Quartic4 => {
                if u <= -T::one() {
                    T::zero()
                } else if u >= T::one() {
                    T::one()
                } else {
                    let u2 = u * u;
                    let poly = T::lit(3.0) - T::lit(10.0 / 3.0) * u2 + T::lit(7.0 / 5.0) * u2 * u2;
                    T::lit(0.5) + T::lit(15.0 / 32.0) * u * poly
                }
            }
        }
    }

    /// Upper tail `1 - cdf(u)`; for compact kernels this is exact at and
    /// beyond the support edges.
    #[inline]
    pub fn survival<T: Scalar>(self, u: T) -> T {
        T::one() - self.cdf(u)
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Self::Gaussian),
            "epanechnikov" => Ok(Self::Epanechnikov),
            "quartic4" => Ok(Self::Quartic4),
            other => Err(Error::InvalidConfig(format!("unknown kernel family {other:?}"))),
        }
    }
}

/// The smoothed indicator `Ω(v) = ∫_{-∞}^{v} ω(u) du` for the default
/// fourth-order `ω`. `Ω(v) = 0` for `v ≤ -1` and `1` for `v ≥ 1`.
#[inline]
pub fn smoothed_indicator<T: Scalar>(v: T) -> T {
    KernelSpec::Quartic4.cdf(v)
}

/// The kernels used by the different stages of the test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelBundle {
    /// `K`: local-polynomial weights in x.
    pub k_smooth: KernelSpec,
    /// `ω`: derivative of the smoothed indicator applied to responses.
    pub omega: KernelSpec,
    /// `κ`: rearrangement kernel.
    pub kappa: KernelSpec,
    /// `L`: X-kernel of the conditional distribution estimator of Z.
    pub l_boot: KernelSpec,
    /// `N`: residual kernel of the conditional distribution estimator of Z.
    pub n_boot: KernelSpec,
}

impl Default for KernelBundle {
    fn default() -> Self {
        Self {
            k_smooth: KernelSpec::Gaussian,
            omega: KernelSpec::Quartic4,
            kappa: KernelSpec::Epanechnikov,
            l_boot: KernelSpec::Gaussian,
            n_boot: KernelSpec::Gaussian,
        }
    }
}

impl KernelBundle {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_compact() && self.kappa.is_nonnegative()) {
            return Err(Error::InvalidConfig(format!(
                "rearrangement kernel must be a nonnegative compact kernel, got {}",
                self.kappa
            )));
        }
        Ok(())
    }
}

/// `∏ⱼ K(x_diff[j]/h) · ∏ⱼ (x_diff[j]/h)^{multi_index[j]}`.
pub fn product_kernel<T: Scalar>(
    kernel: KernelSpec,
    x_diff: &[T],
    h: T,
    multi_index: &[u32],
) -> Result<T> {
    check_bandwidth("h", h)?;
    if x_diff.len() != multi_index.len() {
        return Err(Error::InvalidConfig(format!(
            "dimension mismatch: x_diff has {} entries, multi_index {}",
            x_diff.len(),
            multi_index.len()
        )));
    }
    let mut acc = T::one();
    for (&dx, &k) in x_diff.iter().zip(multi_index) {
        let u = dx / h;
        acc = acc * kernel.density(u) * u.powi(k as i32);
    }
    Ok(acc)
}

pub(crate) fn check_bandwidth<T: Scalar>(name: &'static str, value: T) -> Result<()> {
    if value.is_finite() && value > T::zero() {
        Ok(())
    } else {
        Err(Error::InvalidBandwidth { name, value: value.to_f64().unwrap_or(f64::NAN) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson rule; test-only oracle.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let n = panels * 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    fn lower_edge(k: KernelSpec) -> f64 {
        k.support().map_or(-40.0, |s| s.0)
    }

    #[test]
    fn density_examples() {
        assert_eq!(KernelSpec::Epanechnikov.density(0.0_f64), 0.75);
        assert_eq!(KernelSpec::Quartic4.density(0.0_f64), 1.40625);
        assert_eq!(KernelSpec::Epanechnikov.density(2.0_f64), 0.0);
        assert_eq!(KernelSpec::Quartic4.density(-1.5_f64), 0.0);
    }

    #[test]
    fn cdf_examples() {
        let e = KernelSpec::Epanechnikov;
        assert_eq!(e.cdf(-1.0_f64), 0.0);
        assert_eq!(e.cdf(0.0_f64), 0.5);
        assert!((e.cdf(0.5_f64) - 0.84375).abs() < 1e-15);
        assert_eq!(e.cdf(1.0_f64), 1.0);
        assert!((KernelSpec::Gaussian.cdf(0.0_f64) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn densities_integrate_to_one() {
        for k in KernelSpec::ALL {
            let (a, b) = k.support().unwrap_or((-40.0, 40.0));
            let total = simpson(|u| k.density(u), a, b, 20_000);
            let tol = if k.is_compact() { 1e-10 } else { 1e-8 };
            assert!((total - 1.0).abs() < tol, "{k}: {total}");
        }
    }

    #[test]
    fn compact_kernels_vanish_outside_support() {
        for k in [KernelSpec::Epanechnikov, KernelSpec::Quartic4] {
            for u in [-3.0, -1.0001, 1.0001, 7.5] {
                assert_eq!(k.density(u), 0.0);
            }
            assert_eq!(k.cdf(-1.0_f64), 0.0);
            assert_eq!(k.cdf(1.0_f64), 1.0);
        }
    }

    #[test]
    fn nonnegative_families_have_monotone_cdf() {
        for k in [KernelSpec::Gaussian, KernelSpec::Epanechnikov] {
            let mut prev = -1.0;
            for i in 0..=4000 {
                let u = -4.0 + 8.0 * i as f64 / 4000.0;
                assert!(k.density(u) >= 0.0);
                let c = k.cdf(u);
                assert!(c >= prev, "{k} at {u}");
                prev = c;
            }
        }
    }

    #[test]
    fn cdf_matches_quadrature_of_density() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for k in KernelSpec::ALL {
            for _ in 0..100 {
                let u: f64 = rng.random_range(-1.5..1.5);
                let a = lower_edge(k);
                let upper = k.support().map_or(u, |(_, hi)| u.min(hi));
                let quad = if upper <= a { 0.0 } else { simpson(|t| k.density(t), a, upper, 4000) };
                assert!((k.cdf(u) - quad).abs() < 1e-8, "{k} at {u}: {} vs {quad}", k.cdf(u));
            }
        }
    }

    #[test]
    fn omega_moments() {
        let w = |u: f64| KernelSpec::Quartic4.density(u);
        assert!((simpson(w, -1.0, 1.0, 2000) - 1.0).abs() < 1e-10);
        assert!(simpson(|u| u * w(u), -1.0, 1.0, 2000).abs() < 1e-10);
        assert!(simpson(|u| u * u * w(u), -1.0, 1.0, 2000).abs() < 1e-10);
    }

    #[test]
    fn omega_smoothed_indicator_values() {
        assert_eq!(smoothed_indicator(-1.0_f64), 0.0);
        assert_eq!(smoothed_indicator(-3.0_f64), 0.0);
        assert_eq!(smoothed_indicator(0.0_f64), 0.5);
        assert_eq!(smoothed_indicator(1.0_f64), 1.0);
        let quad = simpson(|u| KernelSpec::Quartic4.density(u), -1.0, 0.5, 2000);
        assert!((smoothed_indicator(0.5_f64) - quad).abs() < 1e-12);
        assert!((quad - 1.028_320_312_5).abs() < 1e-12);
    }

    #[test]
    fn omega_reflection_symmetry() {
        for i in 0..=200 {
            let v = -1.2 + 2.4 * i as f64 / 200.0;
            let s = smoothed_indicator(v) + smoothed_indicator(-v);
            assert!((s - 1.0).abs() < 1e-14, "{v}");
        }
    }

    #[test]
    fn omega_monotone_where_omega_is_nonnegative() {
        let edge = (3.0_f64 / 7.0).sqrt();
        let mut prev = smoothed_indicator(-edge);
        for i in 1..=1000 {
            let v = -edge + 2.0 * edge * i as f64 / 1000.0;
            let cur = smoothed_indicator(v);
            assert!(cur >= prev);
            prev = cur;
        }
        // Overshoot of the fourth-order kernel.
        assert!(smoothed_indicator(edge) > 1.0);
        assert!(smoothed_indicator(-edge) < 0.0);
    }

    #[test]
    fn kappa_symmetry_on_grid() {
        let bundle = KernelBundle::default();
        for i in 0..=500 {
            let u = -2.0 + 4.0 * i as f64 / 500.0;
            assert_eq!(bundle.kappa.density(u), bundle.kappa.density(-u));
        }
        bundle.validate().unwrap();
    }

    #[test]
    fn bundle_rejects_non_compact_kappa() {
        let b = KernelBundle { kappa: KernelSpec::Gaussian, ..KernelBundle::default() };
        assert!(b.validate().is_err());
        let b = KernelBundle { kappa: KernelSpec::Quartic4, ..KernelBundle::default() };
        assert!(b.validate().is_err());
    }

    #[test]
    fn product_kernel_examples() {
        let g = KernelSpec::Gaussian;
        let v = product_kernel(g, &[0.0_f64, 0.0], 1.0, &[0, 0]).unwrap();
        assert!((v - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
        assert!((v - 0.159_15).abs() < 1e-5);
        assert_eq!(product_kernel(g, &[0.0_f64, 0.3], 0.5, &[1, 0]).unwrap(), 0.0);
        let h = 0.37;
        let v = product_kernel(g, &[h], h, &[1]).unwrap();
        assert_eq!(v, g.density(1.0_f64));
        assert!(matches!(
            product_kernel(g, &[0.1_f64], 0.0, &[0]),
            Err(Error::InvalidBandwidth { .. })
        ));
        assert!(product_kernel(g, &[0.1_f64], -1.0, &[0]).is_err());
    }

    #[test]
    fn names_round_trip() {
        for k in KernelSpec::ALL {
            assert_eq!(k.name().parse::<KernelSpec>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert!("triweight".parse::<KernelSpec>().is_err());
    }

    #[test]
    fn f32_evaluation_agrees() {
        for k in KernelSpec::ALL {
            let a = k.density(0.3_f32) as f64;
            assert!((a - k.density(0.3_f64)).abs() < 1e-6);
            assert!((k.cdf(0.3_f32) as f64 - k.cdf(0.3_f64)).abs() < 1e-6);
        }
    }
}
