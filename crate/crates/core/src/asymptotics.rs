//! Kiefer–Müller limit of the KS statistic for independent scalar X and Z.
//!
//! `B(s, t)` is the centered Gaussian sheet on `[0,1]²` with covariance
//! `(s₁∧s₂)(t₁∧t₂ - t₁t₂)`; the limit of `√n·K̃ₙ` is `√(τ(1-τ)) · sup|B|`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rearrangement::quantile_type7;
use crate::streams::stream_rng;

pub const DEFAULT_GRID_M: usize = 64;
pub const DEFAULT_PATHS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitSample {
    pub draws: Vec<f64>,
    pub grid_m: usize,
    pub tau: f64,
}

impl LimitSample {
    /// Empirical quantile (linear interpolation) at each level.
    pub fn quantiles(&self, levels: &[f64]) -> Result<Vec<f64>> {
        let mut sorted = self.draws.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        levels
            .iter()
            .map(|&p| {
                if (0.0..=1.0).contains(&p) {
                    Ok(quantile_type7(&sorted, p))
                } else {
                    Err(Error::InvalidLevel(p))
                }
            })
            .collect()
    }
}

/// One sheet on the `(m+1)²` grid `s, t ∈ {0, 1/m, ..., 1}`, stored at
/// `[j * (m+1) + k]` for `(s_j, t_k)`.
///
/// Each of the `m` increments in s is `√(1/m)` times an independent Brownian
/// bridge in t, obtained from a random walk `W` by `W(t) - t W(1)`.
pub fn kiefer_mueller_sheet<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Vec<f64> {
    let w = m + 1;
    let step = (1.0 / m as f64).sqrt();
    let mut sheet = vec![0.0; w * w];
    let mut walk = vec![0.0; w];
    for j in 1..w {
        for k in 1..w {
            let z: f64 = rng.sample(StandardNormal);
            walk[k] = walk[k - 1] + step * z;
        }
        let end = walk[m];
        for k in 0..w {
            let t = k as f64 / m as f64;
            let bridge = walk[k] - t * end;
            sheet[j * w + k] = sheet[(j - 1) * w + k] + step * bridge;
        }
    }
    sheet
}

/// `√(τ(1-τ)) · max |B|` over the grid for `n_paths` independent sheets;
/// path `p` draws from stream `p` of `seed`.
pub fn kiefer_mueller_sup(grid_m: usize, n_paths: usize, tau: f64, seed: u64) -> Result<LimitSample> {
    if grid_m < 2 {
        return Err(Error::InvalidConfig(format!("grid_m must be at least 2, got {grid_m}")));
    }
    if n_paths == 0 {
        return Err(Error::InvalidConfig("n_paths must be at least 1".into()));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidLevel(tau));
    }
    let scale = (tau * (1.0 - tau)).sqrt();
    let draws = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let sheet = kiefer_mueller_sheet(&mut stream_rng(seed, p as u64), grid_m);
            scale * sheet.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
        })
        .collect();
    Ok(LimitSample { draws, grid_m, tau })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_rows_vanish() {
        let m = 16;
        let sheet = kiefer_mueller_sheet(&mut stream_rng(1, 0), m);
        for k in 0..=m {
            assert_eq!(sheet[k], 0.0);
        }
        for j in 0..=m {
            assert_eq!(sheet[j * (m + 1)], 0.0);
            assert!(sheet[j * (m + 1) + m].abs() < 1e-12);
        }
    }

    #[test]
    fn variance_at_unit_half() {
        let m = 20;
        let paths = 100_000;
        let idx = m * (m + 1) + m / 2;
        let vals: Vec<f64> = (0..paths).map(|p| kiefer_mueller_sheet(&mut stream_rng(3, p), m)[idx]).collect();
        let var = vals.iter().map(|v| v * v).sum::<f64>() / paths as f64;
        assert!((var - 0.25).abs() < 0.01, "{var}");
    }

    #[test]
    fn tau_scaling_is_exact() {
        let a = kiefer_mueller_sup(8, 50, 0.5, 4).unwrap();
        let b = kiefer_mueller_sup(8, 50, 0.25, 4).unwrap();
        let ratio = 0.25_f64.sqrt() / 0.1875_f64.sqrt();
        for (x, y) in a.draws.iter().zip(&b.draws) {
            assert!((x / y - ratio).abs() < 1e-14 * ratio);
        }
    }

    #[test]
    fn quantiles_monotone_and_nonnegative() {
        let s = kiefer_mueller_sup(16, 500, 0.5, 9).unwrap();
        let q = s.quantiles(&[0.0, 0.5, 0.9, 0.95, 0.99, 1.0]).unwrap();
        assert!(q[0] >= 0.0);
        assert!(q.windows(2).all(|w| w[0] <= w[1]));
        assert!(s.quantiles(&[1.5]).is_err());
        assert!(kiefer_mueller_sup(1, 10, 0.5, 0).is_err());
        assert!(kiefer_mueller_sup(4, 0, 0.5, 0).is_err());
    }

    #[test]
    fn determinism_across_pools() {
        let a = kiefer_mueller_sup(10, 40, 0.5, 11).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let b = pool.install(|| kiefer_mueller_sup(10, 40, 0.5, 11).unwrap());
        assert_eq!(a, b);
    }
}
