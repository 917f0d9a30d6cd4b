//! End-to-end significance test on a dataset.

use serde::{Deserialize, Serialize};

use crate::bandwidth::{select_bandwidths, BandwidthSet};
use crate::bootstrap::{bootstrap_draws, bootstrap_process, BootstrapDistribution, TestOutcome, DEFAULT_N_REPS};
use crate::cdf_estimator::EstimatorConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::KernelBundle;
use crate::process::{fit_quantile_curve, t_tilde_process, centered_marks, GridRule};
use crate::rearrangement::{select_g, GSpec, RearrangeConfig};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestSettings<T> {
    pub tau: T,
    pub alpha: T,
    pub n_reps: usize,
    pub seed: u64,
    /// Fixed `h`; the other bandwidths follow from it.
    pub h_override: Option<T>,
    /// Local polynomial order.
    pub p: usize,
    pub kernels: KernelBundle,
    pub u_grid: usize,
    pub ridge_eps: T,
    /// Threshold grid for multivariate X or Z.
    pub grid_rule: GridRule,
}

impl<T: Scalar> TestSettings<T> {
    pub fn new(tau: T, alpha: T, seed: u64) -> Self {
        Self {
            tau,
            alpha,
            n_reps: DEFAULT_N_REPS,
            seed,
            h_override: None,
            p: 2,
            kernels: KernelBundle::default(),
            u_grid: RearrangeConfig::<T>::DEFAULT_U_GRID,
            ridge_eps: T::lit(1e-9),
            grid_rule: GridRule::Auto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > T::zero() && self.tau < T::one()) {
            return Err(Error::InvalidLevel(self.tau.as_f64()));
        }
        if !(self.alpha > T::zero() && self.alpha < T::one()) {
            return Err(Error::InvalidLevel(self.alpha.as_f64()));
        }
        if self.n_reps == 0 {
            return Err(Error::InvalidConfig("n_reps must be at least 1".into()));
        }
        self.kernels.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport<T> {
    pub n: usize,
    pub g: GSpec<T>,
    /// Rice variance estimate.
    pub sigma2: T,
    pub bandwidths: BandwidthSet<T>,
    pub tau: T,
    pub tau_hat: T,
    pub outcome: TestOutcome<T>,
    pub distribution: BootstrapDistribution<T>,
}

/// Reference distribution, bandwidths, quantile fit, `K̃ₙ`, bootstrap.
pub fn run_test<T: Scalar>(data: &Dataset<T>, settings: &TestSettings<T>) -> Result<TestReport<T>> {
    settings.validate()?;
    let g = select_g(data)?;
    let (bandwidths, sigma2) = select_bandwidths(data, settings.h_override)?;
    let cfg = EstimatorConfig {
        p: settings.p,
        h: bandwidths.h,
        d_smooth: bandwidths.d_smooth,
        kernels: settings.kernels,
        ridge_eps: settings.ridge_eps,
    };
    let rcfg = RearrangeConfig { b: bandwidths.b, kappa: settings.kernels.kappa, u_grid: settings.u_grid };
    let fit = fit_quantile_curve(data, settings.tau, &cfg, &rcfg, &g)?;
    let observed = t_tilde_process(data, settings.grid_rule).surface(&centered_marks(&fit));
    let process = bootstrap_process(data, &fit, &bandwidths, &settings.kernels, settings.grid_rule)?;
    let draws = bootstrap_draws(&process, fit.tau_hat, settings.n_reps, settings.seed)?;
    let distribution = BootstrapDistribution::new(draws)?;
    let outcome = distribution.outcome(observed.sup_abs, settings.alpha, observed.argmax)?;
    Ok(TestReport {
        n: data.n(),
        g,
        sigma2,
        bandwidths,
        tau: settings.tau,
        tau_hat: fit.tau_hat,
        outcome,
        distribution,
    })
}

/// Runs `f` on a dedicated pool of `workers` threads. Results do not depend
/// on the worker count.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if workers == 0 {
        return Err(Error::InvalidConfig("workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}
