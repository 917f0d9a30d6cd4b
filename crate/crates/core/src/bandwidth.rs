//! Data-driven bandwidths: a first-difference (Rice) estimate of the noise
//! variance and the power rule `h = (σ̂²/(2n))^{13/50}` that all other
//! bandwidths are tied to.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::check_bandwidth;
use crate::scalar::Scalar;

/// Exponent of the bandwidth power rule.
pub const BANDWIDTH_EXPONENT: f64 = 13.0 / 50.0;
/// Lower bound on the rearrangement bandwidth.
pub const MIN_REARRANGE_BANDWIDTH: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSet<T> {
    /// x-smoothing of the local polynomial fit.
    pub h: T,
    /// Smoothing of the response indicator.
    pub d_smooth: T,
    /// Rearrangement bandwidth.
    pub b: T,
    /// X-bandwidth of the conditional distribution estimator of Z.
    pub a: T,
    /// Residual bandwidth of the conditional distribution estimator of Z.
    pub e: T,
}

impl<T: Scalar> BandwidthSet<T> {
    /// `d = a = e = h` and `b = max(h³, 1e-4)`.
    pub fn from_h(h: T) -> Result<Self> {
        check_bandwidth("h", h)?;
        let b = (h * h * h).max(T::lit(MIN_REARRANGE_BANDWIDTH));
        Ok(Self { h, d_smooth: h, b, a: h, e: h })
    }

    pub fn validate(&self) -> Result<()> {
        check_bandwidth("h", self.h)?;
        check_bandwidth("d_smooth", self.d_smooth)?;
        check_bandwidth("b", self.b)?;
        check_bandwidth("a", self.a)?;
        check_bandwidth("e", self.e)
    }
}

/// `Σ (Y₍ᵢ₊₁₎ - Y₍ᵢ₎)² / (2(n-1))` along an ordering of the X values.
///
/// For `d = 1` the ordering is by X with ties broken by Y. For `d > 1` it is
/// the greedy nearest-neighbour path in X (Euclidean distance, ties to the
/// lower index) starting at the point with the smallest first coordinate.
pub fn rice_variance<T: Scalar>(data: &Dataset<T>) -> Result<T> {
    let n = data.n();
    if n < 3 {
        return Err(Error::SampleTooSmall { n, min: 3 });
    }
    let order = if data.d() == 1 { sorted_order(data) } else { nearest_neighbour_path(data) };
    let y = data.y();
    let ss = order
        .windows(2)
        .map(|w| {
            let diff = y[w[1]] - y[w[0]];
            diff * diff
        })
        .fold(T::zero(), |s, v| s + v);
    Ok(ss / (T::lit(2.0) * T::from_usize_lossy(n - 1)))
}

fn sorted_order<T: Scalar>(data: &Dataset<T>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..data.n()).collect();
    let y = data.y();
    order.sort_by(|&i, &j| {
        data.x_row(i)[0]
            .partial_cmp(&data.x_row(j)[0])
            .unwrap()
            .then(y[i].partial_cmp(&y[j]).unwrap())
            .then(i.cmp(&j))
    });
    order
}

fn nearest_neighbour_path<T: Scalar>(data: &Dataset<T>) -> Vec<usize> {
    let n = data.n();
    let dist2 = |i: usize, j: usize| {
        data.x_row(i)
            .iter()
            .zip(data.x_row(j))
            .fold(T::zero(), |s, (a, b)| s + (*a - *b) * (*a - *b))
    };
    let start = (0..n)
        .min_by(|&i, &j| data.x_row(i)[0].partial_cmp(&data.x_row(j)[0]).unwrap().then(i.cmp(&j)))
        .unwrap();
    let mut visited = vec![false; n];
    let mut path = Vec::with_capacity(n);
    let mut cur = start;
    visited[cur] = true;
    path.push(cur);
    for _ in 1..n {
        let mut best = None;
        let mut best_d = T::infinity();
        for j in 0..n {
            if !visited[j] {
                let dj = dist2(cur, j);
                if dj < best_d {
                    best_d = dj;
                    best = Some(j);
                }
            }
        }
        cur = best.expect("unvisited point remains");
        visited[cur] = true;
        path.push(cur);
    }
    path
}

/// Bandwidths from the power rule.
pub fn default_bandwidths<T: Scalar>(sigma2: T, n: usize) -> Result<BandwidthSet<T>> {
    if !(sigma2 > T::zero() && sigma2.is_finite()) {
        return Err(Error::InvalidVariance(sigma2.to_f64().unwrap_or(f64::NAN)));
    }
    if n < 3 {
        return Err(Error::SampleTooSmall { n, min: 3 });
    }
    let h = (sigma2 / (T::lit(2.0) * T::from_usize_lossy(n))).powf(T::lit(BANDWIDTH_EXPONENT));
    BandwidthSet::from_h(h)
}

/// Bandwidths for a dataset: the fixed `h` when given, else the power rule
/// applied to the Rice variance. Returns the variance estimate as well.
pub fn select_bandwidths<T: Scalar>(data: &Dataset<T>, h_override: Option<T>) -> Result<(BandwidthSet<T>, T)> {
    let sigma2 = rice_variance(data)?;
    let bw = match h_override {
        Some(h) => BandwidthSet::from_h(h)?,
        None => default_bandwidths(sigma2, data.n())?,
    };
    Ok((bw, sigma2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn ds(y: Vec<f64>, x: Vec<f64>) -> Dataset<f64> {
        let n = y.len();
        Dataset::univariate(y, x, vec![0.0; n]).unwrap()
    }

    #[test]
    fn constant_response_has_zero_variance() {
        let d = ds(vec![4.0; 10], (0..10).map(f64::from).collect());
        assert_eq!(rice_variance(&d).unwrap(), 0.0);
    }

    #[test]
    fn noiseless_line() {
        let x: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let d = ds(x.clone(), x);
        assert!((rice_variance(&d).unwrap() - 5e-5).abs() < 1e-15);
    }

    #[test]
    fn iid_noise_recovers_unit_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 10_000;
        let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let v = rice_variance(&ds(y, x)).unwrap();
        assert!((v - 1.0).abs() < 0.05, "{v}");
    }

    #[test]
    fn ordering_uses_x_and_breaks_ties_by_y() {
        // sorted by x: y = 0, 10, 1 (ties at x=1 broken by y → 1 before 10)
        let d = ds(vec![10.0, 0.0, 1.0], vec![1.0, 0.0, 1.0]);
        let want = (1.0 + 81.0) / 4.0;
        assert_eq!(rice_variance(&d).unwrap(), want);
    }

    #[test]
    fn shift_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..50).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..50).map(|_| rng.random()).collect();
        let a = rice_variance(&ds(y.clone(), x.clone())).unwrap();
        let b = rice_variance(&ds(y.iter().map(|v| v + 3.0).collect(), x)).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn multivariate_path_is_deterministic() {
        // points on a line in 2D: the path is the line order
        let x: Vec<f64> = [3.0, 0.0, 1.0, 2.0].iter().flat_map(|&t| [t, 2.0 * t]).collect();
        let y = vec![3.0, 0.0, 1.0, 2.0];
        let d = Dataset::new(y, x, 2, vec![0.0; 4], 1).unwrap();
        assert_eq!(rice_variance(&d).unwrap(), 3.0 / 6.0);
    }

    #[test]
    fn too_small() {
        assert!(matches!(rice_variance(&ds(vec![1.0, 2.0], vec![0.0, 1.0])), Err(Error::SampleTooSmall { .. })));
    }

    #[test]
    fn power_rule_examples() {
        let bw = default_bandwidths(1.0_f64, 50).unwrap();
        assert!((bw.h - 0.30200).abs() < 5e-6, "{}", bw.h);
        assert!((bw.h - 0.01_f64.powf(0.26)).abs() < 1e-15);
        let bw = default_bandwidths(1.0_f64, 100).unwrap();
        assert!((bw.h - 0.25217).abs() < 5e-5, "{}", bw.h);
        assert!((bw.h - 0.005_f64.powf(0.26)).abs() < 1e-15);
        assert_eq!((bw.d_smooth, bw.a, bw.e), (bw.h, bw.h, bw.h));
        let bw = BandwidthSet::from_h(0.3_f64).unwrap();
        assert!((bw.b - 0.027).abs() < 1e-15);
        assert_eq!(BandwidthSet::from_h(0.01).unwrap().b, 1e-4);
        assert!(matches!(default_bandwidths(0.0, 50), Err(Error::InvalidVariance(_))));
        assert!(default_bandwidths(-1.0, 50).is_err());
    }

    #[test]
    fn power_rule_monotonicity() {
        let mut prev = f64::INFINITY;
        for n in 3..400 {
            let h = default_bandwidths(0.5, n).unwrap().h;
            assert!(h < prev);
            prev = h;
        }
        let mut prev = 0.0;
        for k in 1..100 {
            let bw = default_bandwidths(k as f64 * 0.05, 80).unwrap();
            assert!(bw.h > prev);
            assert!(bw.b <= bw.h);
            prev = bw.h;
        }
    }
}
