//! Significance testing for a covariate block in nonparametric quantile
//! regression.
//!
//! Given observations `(Yᵢ, Xᵢ, Zᵢ)`, the test asks whether the conditional
//! τ-quantile of `Y` given `(X, Z)` depends on `Z`. The conditional quantile
//! given `X` alone is estimated by a local polynomial CDF estimator followed
//! by a smoothing rearrangement ([`cdf_estimator`], [`rearrangement`]). The
//! signs of the residuals are fed into a marked empirical process indexed by
//! `(x, z)` ([`process`]), whose supremum is calibrated by a multiplier
//! bootstrap ([`bootstrap`]).
//!
//! ```
//! use quantsig::{run_test, Dataset64, TestSettings64};
//!
//! let n = 60;
//! let x: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
//! let z: Vec<f64> = (0..n).map(|i| ((i * 37) % n) as f64 / n as f64).collect();
//! let y: Vec<f64> = (0..n).map(|i| x[i] + 0.1 * ((i * 13) % 7) as f64).collect();
//! let data = Dataset64::univariate(y, x, z).unwrap();
//!
//! let mut settings = TestSettings64::new(0.5, 0.05, 42);
//! settings.n_reps = 99;
//! let report = run_test(&data, &settings).unwrap();
//! assert!((0.0..=1.0).contains(&report.outcome.p_value));
//! ```
//!
//! The estimation, process and bootstrap layers are generic over [`Scalar`]
//! (`f32` or `f64`); the study harnesses in [`asymptotics`] and
//! [`simulation`] work in `f64`.

pub mod asymptotics;
pub mod bandwidth;
pub mod bootstrap;
pub mod cdf_estimator;
pub mod data;
pub mod error;
pub mod kernels;
pub mod pipeline;
pub mod process;
pub mod rearrangement;
pub mod scalar;
pub mod simulation;
pub mod streams;

pub use asymptotics::{kiefer_mueller_sup, LimitSample};
pub use bandwidth::{select_bandwidths, BandwidthSet};
pub use bootstrap::{bootstrap_ks, cond_dist_z, BootstrapConfig, BootstrapDistribution, TestOutcome};
pub use cdf_estimator::{estimate_cdf, EstimatorConfig, LocalCdf};
pub use data::Dataset;
pub use error::{Error, Result};
pub use kernels::{KernelBundle, KernelSpec};
pub use pipeline::{run_test, with_workers, TestReport, TestSettings};
pub use process::{
    fit_quantile_curve, t_original_surface, t_tilde_surface, GridRule, ProcessSurface, QuantileFit, RegionSpec,
};
pub use rearrangement::{quantile_estimate, select_g, GSpec, RearrangeConfig};
pub use scalar::Scalar;
pub use simulation::{run_power_study, Model, RejectionTable, Scenario, StudyConfig};

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type BandwidthSet64 = BandwidthSet<f64>;
pub type BandwidthSet32 = BandwidthSet<f32>;
pub type QuantileFit64 = QuantileFit<f64>;
pub type QuantileFit32 = QuantileFit<f32>;
pub type TestOutcome64 = TestOutcome<f64>;
pub type TestOutcome32 = TestOutcome<f32>;
pub type TestSettings64 = TestSettings<f64>;
pub type TestSettings32 = TestSettings<f32>;
pub type TestReport64 = TestReport<f64>;
pub type TestReport32 = TestReport<f32>;
