//! Multiplier bootstrap for the KS statistic.
//!
//! The residual-sign marks of `T̃ₙ` are replaced by `Bᵢ - τ̂` with
//! `Bᵢ ~ Bernoulli(τ̂)`, and the Z-centering uses the kernel estimate of the
//! conditional distribution of Z given `(X, ε = 0)`. The centering matrix is
//! computed once; each replicate only draws new multipliers.

use rand::distr::{Bernoulli, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::BandwidthSet;
use crate::data::{dominated, Dataset};
use crate::error::{Error, Result};
use crate::kernels::{check_bandwidth, KernelBundle, KernelSpec};
use crate::process::{indicator, GridPoint, GridRule, MarkedProcess, QuantileFit, ThresholdGrid};
use crate::scalar::Scalar;
use crate::streams::stream_rng;

pub const DEFAULT_N_REPS: usize = 300;

/// Slack when converting `(1 - α)·R` to an order statistic index.
const ORDER_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig<T> {
    pub n_reps: usize,
    pub alpha: T,
    pub seed: u64,
    pub bandwidths: BandwidthSet<T>,
    pub kernels: KernelBundle,
}

impl<T: Scalar> BootstrapConfig<T> {
    pub fn new(alpha: T, seed: u64, bandwidths: BandwidthSet<T>) -> Self {
        Self { n_reps: DEFAULT_N_REPS, alpha, seed, bandwidths, kernels: KernelBundle::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_reps == 0 {
            return Err(Error::InvalidConfig("n_reps must be at least 1".into()));
        }
        check_alpha(self.alpha)?;
        self.bandwidths.validate()
    }
}

fn check_alpha<T: Scalar>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha < T::one() {
        Ok(())
    } else {
        Err(Error::InvalidLevel(alpha.as_f64()))
    }
}

/// Result of one test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome<T> {
    /// `K̃ₙ`.
    pub k_stat: T,
    /// `K*_{n,1-α}`.
    pub boot_quantile: T,
    pub p_value: T,
    pub reject: bool,
    pub alpha: T,
    pub boot_draws: Vec<T>,
    pub argmax: GridPoint<T>,
}

/// Sorted bootstrap draws `K*₁..K*_R`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDistribution<T> {
    draws: Vec<T>,
    sorted: Vec<T>,
}

impl<T: Scalar> BootstrapDistribution<T> {
    pub fn new(draws: Vec<T>) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::InvalidConfig("no bootstrap draws".into()));
        }
        if draws.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite bootstrap draw".into()));
        }
        let mut sorted = draws.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        Ok(Self { draws, sorted })
    }

    /// In replicate order.
    pub fn draws(&self) -> &[T] {
        &self.draws
    }

    pub fn n_reps(&self) -> usize {
        self.draws.len()
    }

    /// The `⌈(1-α)R⌉`-th order statistic.
    pub fn quantile(&self, alpha: T) -> Result<T> {
        check_alpha(alpha)?;
        let r = self.sorted.len();
        let k = ((1.0 - alpha.as_f64()) * r as f64 - ORDER_EPS).ceil() as usize;
        Ok(self.sorted[k.clamp(1, r) - 1])
    }

    /// `(1 + #{K* ≥ k}) / (1 + R)`.
    pub fn p_value(&self, k_stat: T) -> T {
        let below = self.sorted.partition_point(|v| *v < k_stat);
        let ge = self.sorted.len() - below;
        T::from_usize_lossy(1 + ge) / T::from_usize_lossy(1 + self.sorted.len())
    }

    pub fn decide(&self, k_stat: T, alpha: T) -> Result<bool> {
        Ok(k_stat > self.quantile(alpha)?)
    }

    pub fn outcome(&self, k_stat: T, alpha: T, argmax: GridPoint<T>) -> Result<TestOutcome<T>> {
        let boot_quantile = self.quantile(alpha)?;
        Ok(TestOutcome {
            k_stat,
            boot_quantile,
            p_value: self.p_value(k_stat),
            reject: k_stat > boot_quantile,
            alpha,
            boot_draws: self.draws.clone(),
            argmax,
        })
    }
}

fn kernel_weight<T: Scalar>(k: KernelSpec, diff: &[T], bw: T) -> T {
    diff.iter().fold(T::one(), |acc, &v| acc * k.density(v / bw))
}

/// `F̂_{Z|X,ε}(z | x, y)`: kernel-weighted empirical CDF of Z with weights
/// `L((Xⱼ - x)/a) · N((ε̂ⱼ - y)/e)`.
#[allow(clippy::too_many_arguments)]
pub fn cond_dist_z_at<T: Scalar>(
    data: &Dataset<T>,
    resid: &[T],
    z: &[T],
    x: &[T],
    y: T,
    bw: &BandwidthSet<T>,
    kernels: &KernelBundle,
) -> Result<T> {
    check_bandwidth("a", bw.a)?;
    check_bandwidth("e", bw.e)?;
    if x.len() != data.d() || z.len() != data.q() || resid.len() != data.n() {
        return Err(Error::InvalidConfig("dimension mismatch in conditional distribution".into()));
    }
    let mut num = T::zero();
    let mut den = T::zero();
    let mut diff = vec![T::zero(); data.d()];
    for j in 0..data.n() {
        for (dv, (&xj, &xv)) in diff.iter_mut().zip(data.x_row(j).iter().zip(x)) {
            *dv = xj - xv;
        }
        let w = kernel_weight(kernels.l_boot, &diff, bw.a) * kernels.n_boot.density((resid[j] - y) / bw.e);
        den = den + w;
        if dominated(data.z_row(j), z) {
            num = num + w;
        }
    }
    if !(den > T::zero()) {
        return Err(Error::EmptyWindow);
    }
    Ok(num / den)
}

/// `F̂_{Z|X,ε}(z | x, 0)`.
pub fn cond_dist_z<T: Scalar>(
    data: &Dataset<T>,
    fit: &QuantileFit<T>,
    z: &[T],
    x: &[T],
    bw: &BandwidthSet<T>,
    kernels: &KernelBundle,
) -> Result<T> {
    cond_dist_z_at(data, &fit.resid, z, x, T::zero(), bw, kernels)
}

/// `Ĉ(i, z_l) = I{Zᵢ ≤ z_l} - F̂_{Z|X,ε}(z_l | Xᵢ, 0)` over the grid, at
/// `[l * n + i]`.
pub fn centering_matrix<T: Scalar>(
    data: &Dataset<T>,
    fit: &QuantileFit<T>,
    grid: &ThresholdGrid<T>,
    bw: &BandwidthSet<T>,
    kernels: &KernelBundle,
) -> Result<Vec<T>> {
    check_bandwidth("a", bw.a)?;
    check_bandwidth("e", bw.e)?;
    let n = data.n();
    let d = data.d();
    let zn = grid.z_nodes();
    let gz = zn.len();
    let n_part: Vec<T> = fit.resid.iter().map(|&r| kernels.n_boot.density(r / bw.e)).collect();
    let mut out: Vec<T> = grid.z_indicators(data).into_iter().map(indicator).collect();

    // Z order and, for scalar Z, the number of sorted observations under each node.
    let scalar_z = data.q() == 1;
    let mut z_order: Vec<usize> = (0..n).collect();
    let mut node_ends = Vec::new();
    if scalar_z {
        let z = data.z_flat();
        z_order.sort_by(|&i, &j| z[i].partial_cmp(&z[j]).expect("finite").then(i.cmp(&j)));
        let mut pos = 0;
        for l in 0..gz {
            while pos < n && z[z_order[pos]] <= zn.nodes[l] {
                pos += 1;
            }
            node_ends.push(pos);
        }
    }

    let mut w = vec![T::zero(); n];
    let mut diff = vec![T::zero(); d];
    for i in 0..n {
        let xi = data.x_row(i);
        for j in 0..n {
            for (dv, (&a, &b)) in diff.iter_mut().zip(data.x_row(j).iter().zip(xi)) {
                *dv = a - b;
            }
            w[j] = kernel_weight(kernels.l_boot, &diff, bw.a) * n_part[j];
        }
        if scalar_z {
            let mut acc = T::zero();
            let mut pos = 0;
            let mut cum = Vec::with_capacity(gz);
            for &end in &node_ends {
                while pos < end {
                    acc = acc + w[z_order[pos]];
                    pos += 1;
                }
                cum.push(acc);
            }
            let total = z_order[pos..].iter().fold(acc, |s, &j| s + w[j]);
            if !(total > T::zero()) {
                return Err(Error::EmptyWindow);
            }
            for (l, c) in cum.into_iter().enumerate() {
                out[l * n + i] = out[l * n + i] - c / total;
            }
        } else {
            let total = w.iter().fold(T::zero(), |s, &v| s + v);
            if !(total > T::zero()) {
                return Err(Error::EmptyWindow);
            }
            for l in 0..gz {
                let node = zn.node(l);
                let num = (0..n).filter(|&j| dominated(data.z_row(j), node)).fold(T::zero(), |s, j| s + w[j]);
                out[l * n + i] = out[l * n + i] - num / total;
            }
        }
    }
    Ok(out)
}

/// The bootstrap process on the `T̃ₙ` grid.
pub fn bootstrap_process<T: Scalar>(
    data: &Dataset<T>,
    fit: &QuantileFit<T>,
    bw: &BandwidthSet<T>,
    kernels: &KernelBundle,
    rule: GridRule,
) -> Result<MarkedProcess<T>> {
    let grid = ThresholdGrid::new(data, rule);
    let c = centering_matrix(data, fit, &grid, bw, kernels)?;
    MarkedProcess::new(grid, c)
}

/// Marks `Bᵢ - τ̂`.
pub fn multiplier_marks<T: Scalar>(b: &[bool], tau_hat: T) -> Vec<T> {
    b.iter().map(|&v| indicator::<T>(v) - tau_hat).collect()
}

/// `K*_r` for `r = 0..n_reps`; replicate `r` draws from stream `r` of `seed`.
pub fn bootstrap_draws<T: Scalar>(process: &MarkedProcess<T>, tau_hat: T, n_reps: usize, seed: u64) -> Result<Vec<T>> {
    let p = tau_hat.as_f64();
    let bern = Bernoulli::new(p).map_err(|_| Error::InvalidData(format!("tau_hat {p} outside [0, 1]")))?;
    let n = process.grid().n();
    Ok((0..n_reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let b: Vec<bool> = (0..n).map(|_| bern.sample(&mut rng)).collect();
            process.sup_abs(&multiplier_marks(&b, tau_hat)).0
        })
        .collect())
}

/// Calibrates `K̃ₙ` with the multiplier bootstrap.
pub fn bootstrap_ks<T: Scalar>(
    data: &Dataset<T>,
    fit: &QuantileFit<T>,
    cfg: &BootstrapConfig<T>,
) -> Result<TestOutcome<T>> {
    cfg.validate()?;
    let observed = crate::process::t_tilde_surface(data, fit);
    let process = bootstrap_process(data, fit, &cfg.bandwidths, &cfg.kernels, GridRule::Auto)?;
    let dist = BootstrapDistribution::new(bootstrap_draws(&process, fit.tau_hat, cfg.n_reps, cfg.seed)?)?;
    dist.outcome(observed.sup_abs, cfg.alpha, observed.argmax)
}
