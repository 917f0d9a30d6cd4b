//! Location-scale simulation models and the Monte Carlo rejection-rate study.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::pipeline::{run_test, with_workers, TestSettings};
use crate::process::GridRule;
use crate::rearrangement::std_normal_quantile;
use crate::streams::{derive_seed, stable_hash, stream_rng};

/// Scenarios with more failed runs than this fraction are flagged.
pub const FAILURE_FLAG_FRACTION: f64 = 0.01;
pub const DESK_RUNS: usize = 200;
pub const FULL_RUNS: usize = 1000;

/// Mean and scale functions of `Y = q(X, Z) + s(X, Z) ε`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Scalar Z, location `q_loc` and scale `s_scale`, both in `1..=4`.
    LocScale { loc: u8, scale: u8 },
    /// `Z ∈ [0,1]²`, `q = x`, `s = 0.5`.
    PlaneNull,
    /// `Z ∈ [0,1]²`, `q = z₂x + z₁²`, `s = 0.5`.
    PlaneAlt,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub model: Model,
    pub tau: f64,
    pub n: usize,
}

impl Scenario {
    pub fn new(model: Model, tau: f64, n: usize) -> Result<Self> {
        let sc = Self { model, tau, n };
        sc.validate()?;
        Ok(sc)
    }

    pub fn loc_scale(loc: u8, scale: u8, tau: f64, n: usize) -> Result<Self> {
        Self::new(Model::LocScale { loc, scale }, tau, n)
    }

    pub fn validate(&self) -> Result<()> {
        if let Model::LocScale { loc, scale } = self.model {
            if !(1..=4).contains(&loc) || !(1..=4).contains(&scale) {
                return Err(Error::InvalidConfig(format!("no scenario ({loc},{scale})")));
            }
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidLevel(self.tau));
        }
        if self.n < 10 {
            return Err(Error::SampleTooSmall { n: self.n, min: 10 });
        }
        Ok(())
    }

    pub fn q_dim(&self) -> usize {
        match self.model {
            Model::LocScale { .. } => 1,
            Model::PlaneNull | Model::PlaneAlt => 2,
        }
    }

    /// Identifier of the model, independent of `tau` and `n`.
    pub fn label(&self) -> String {
        self.model.to_string()
    }

    /// Stable key for random stream derivation.
    pub fn id(&self) -> u64 {
        stable_hash(format!("{}|{}|{}", self.model, self.tau.to_bits(), self.n).as_bytes())
    }

    pub fn location(&self, x: f64, z: &[f64]) -> f64 {
        match self.model {
            Model::LocScale { loc, .. } => {
                let z = z[0];
                match loc {
                    1 => (2.0 * x * x).exp(),
                    2 => (x - 0.5).powi(2),
                    3 => (2.0 * x * x).exp() * z * z,
                    _ => (2.0 * std::f64::consts::PI * (x + z)).sin(),
                }
            }
            Model::PlaneNull => x,
            Model::PlaneAlt => z[1] * x + z[0] * z[0],
        }
    }

    pub fn scale(&self, x: f64, z: &[f64]) -> f64 {
        match self.model {
            Model::LocScale { scale, .. } => {
                let z = z[0];
                match scale {
                    1 => 0.5 * (x + 0.2),
                    2 => 0.5 * (x.sin() + 1.2),
                    3 => 0.5 * (z + 0.2),
                    _ => 0.5 * ((x + 0.2) * (z + 0.2)).sqrt(),
                }
            }
            Model::PlaneNull | Model::PlaneAlt => 0.5,
        }
    }

    /// Whether the conditional `tau`-quantile is free of Z, checked on a
    /// 21-point grid per coordinate.
    pub fn is_null(&self) -> bool {
        let pts: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let zs: Vec<Vec<f64>> = match self.q_dim() {
            1 => pts.iter().map(|&z| vec![z]).collect(),
            _ => pts.iter().flat_map(|&a| pts.iter().map(move |&b| vec![a, b])).collect(),
        };
        pts.iter().all(|&x| {
            let vals: Vec<f64> = zs.iter().map(|z| true_quantile(self, self.tau, x, z)).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            hi - lo <= 1e-12 * (1.0 + hi.abs())
        })
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::LocScale { loc, scale } => write!(f, "({loc},{scale})"),
            Model::PlaneNull => f.write_str("q1_2d"),
            Model::PlaneAlt => f.write_str("q2_2d"),
        }
    }
}

impl FromStr for Model {
    type Err = Error;

    /// Accepts `1,2`, `(1,2)`, `q1_2d`/`q1`, `q2_2d`/`q2`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches('(').trim_end_matches(')');
        match t {
            "q1_2d" | "q1" => return Ok(Model::PlaneNull),
            "q2_2d" | "q2" => return Ok(Model::PlaneAlt),
            _ => {}
        }
        let bad = || Error::InvalidConfig(format!("unknown scenario '{s}'"));
        let (a, b) = t.split_once(',').ok_or_else(bad)?;
        let loc: u8 = a.trim().parse().map_err(|_| bad())?;
        let scale: u8 = b.trim().parse().map_err(|_| bad())?;
        if !(1..=4).contains(&loc) || !(1..=4).contains(&scale) {
            return Err(bad());
        }
        Ok(Model::LocScale { loc, scale })
    }
}

/// `n` draws of `(X, Z, ε)`, observation by observation.
pub fn generate_dataset<R: Rng + ?Sized>(sc: &Scenario, rng: &mut R) -> Result<Dataset<f64>> {
    sc.validate()?;
    let q = sc.q_dim();
    let mut y = Vec::with_capacity(sc.n);
    let mut x = Vec::with_capacity(sc.n);
    let mut z = Vec::with_capacity(sc.n * q);
    let mut zi = vec![0.0; q];
    for _ in 0..sc.n {
        let xi: f64 = rng.random();
        for v in zi.iter_mut() {
            *v = rng.random();
        }
        let eps: f64 = rng.sample(StandardNormal);
        y.push(sc.location(xi, &zi) + sc.scale(xi, &zi) * eps);
        x.push(xi);
        z.extend_from_slice(&zi);
    }
    Dataset::new(y, x, 1, z, q)
}

/// `q(x, z) + s(x, z) Φ⁻¹(tau)`.
pub fn true_quantile(sc: &Scenario, tau: f64, x: f64, z: &[f64]) -> f64 {
    sc.location(x, z) + sc.scale(x, z) * std_normal_quantile(tau)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub runs: usize,
    pub boot_reps: usize,
    pub alphas: Vec<f64>,
    pub seed: u64,
    pub workers: usize,
    /// Fixed `h` for every run instead of the data-driven rule.
    pub bandwidth_h: Option<f64>,
    /// Include wall-clock times in the table (makes output nondeterministic).
    pub record_wall_time: bool,
    #[serde(default)]
    pub grid_rule: GridRule,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            runs: DESK_RUNS,
            boot_reps: 300,
            alphas: vec![0.025, 0.05, 0.10],
            seed: 0,
            workers: 1,
            bandwidth_h: None,
            record_wall_time: false,
            grid_rule: GridRule::Auto,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidConfig("runs must be at least 1".into()));
        }
        if self.boot_reps == 0 {
            return Err(Error::InvalidConfig("boot_reps must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        if self.alphas.is_empty() {
            return Err(Error::InvalidConfig("at least one alpha is required".into()));
        }
        if let Some(&a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::InvalidLevel(a));
        }
        if let Some(h) = self.bandwidth_h {
            crate::kernels::check_bandwidth("h", h)?;
        }
        Ok(())
    }
}

/// One `(scenario, alpha)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectionRow {
    pub scenario: String,
    pub tau: f64,
    pub n: usize,
    pub alpha: f64,
    /// Rejections over successful runs (0 when none succeeded).
    pub rate: f64,
    /// `√(rate(1-rate)/runs)`.
    pub se: f64,
    /// Successful runs.
    pub runs: usize,
    pub failed: usize,
    /// More than 1% of runs failed.
    pub flagged: bool,
    /// The quantile at `tau` does not depend on Z.
    pub null: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectionTable {
    pub seed: u64,
    pub boot_reps: usize,
    pub bandwidth_h: Option<f64>,
    pub rows: Vec<RejectionRow>,
}

impl RejectionTable {
    pub fn row(&self, scenario: &Scenario, alpha: f64) -> Option<&RejectionRow> {
        let label = scenario.label();
        self.rows
            .iter()
            .find(|r| r.scenario == label && r.tau == scenario.tau && r.n == scenario.n && r.alpha == alpha)
    }

    /// One line per `(tau, scenario, n)` with a column per alpha; flagged
    /// cells carry a `*`.
    pub fn to_text(&self) -> String {
        let mut alphas: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !alphas.contains(&r.alpha) {
                alphas.push(r.alpha);
            }
        }
        let mut keys: Vec<(f64, String, usize)> = Vec::new();
        for r in &self.rows {
            let k = (r.tau, r.scenario.clone(), r.n);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        let mut out = format!("{:<6} {:<8} {:>5} {:>6}", "tau", "(k,l)", "n", "runs");
        for a in &alphas {
            out.push_str(&format!(" {:>10}", format!("a={a}")));
        }
        out.push('\n');
        for (tau, sc, n) in keys {
            let cells: Vec<&RejectionRow> =
                self.rows.iter().filter(|r| r.tau == tau && r.scenario == sc && r.n == n).collect();
            let runs = cells.first().map_or(0, |r| r.runs);
            out.push_str(&format!("{:<6} {:<8} {:>5} {:>6}", tau, sc, n, runs));
            for a in &alphas {
                match cells.iter().find(|r| r.alpha == *a) {
                    Some(r) => {
                        let flag = if r.flagged { "*" } else { " " };
                        out.push_str(&format!(" {:>9.3}{}", r.rate, flag));
                    }
                    None => out.push_str(&format!(" {:>10}", "-")),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Seed of run `run` of a scenario.
pub fn run_seed(master: u64, scenario: &Scenario, run: usize) -> u64 {
    derive_seed(&[master, scenario.id(), run as u64])
}

/// Decisions at every alpha for one simulated dataset.
pub fn simulate_run(sc: &Scenario, cfg: &StudyConfig, run: usize) -> Result<Vec<bool>> {
    let seed = run_seed(cfg.seed, sc, run);
    let data = generate_dataset(sc, &mut stream_rng(seed, 0))?;
    let mut settings = TestSettings::new(sc.tau, cfg.alphas[0], derive_seed(&[seed, 1]));
    settings.n_reps = cfg.boot_reps;
    settings.h_override = cfg.bandwidth_h;
    settings.grid_rule = cfg.grid_rule;
    let report = run_test(&data, &settings)?;
    cfg.alphas.iter().map(|&a| report.distribution.decide(report.outcome.k_stat, a)).collect()
}

/// Rejection rates of the bootstrap test for each scenario and alpha.
pub fn run_power_study(scenarios: &[Scenario], cfg: &StudyConfig) -> Result<RejectionTable> {
    cfg.validate()?;
    for sc in scenarios {
        sc.validate()?;
    }
    let mut rows = Vec::with_capacity(scenarios.len() * cfg.alphas.len());
    for sc in scenarios {
        let start = Instant::now();
        let results: Vec<Option<Vec<bool>>> =
            with_workers(cfg.workers, || (0..cfg.runs).into_par_iter().map(|r| simulate_run(sc, cfg, r).ok()).collect())?;
        let elapsed = start.elapsed().as_secs_f64();
        let ok: Vec<&Vec<bool>> = results.iter().flatten().collect();
        let failed = cfg.runs - ok.len();
        let flagged = failed as f64 > FAILURE_FLAG_FRACTION * cfg.runs as f64;
        let null = sc.is_null();
        for (ai, &alpha) in cfg.alphas.iter().enumerate() {
            let rejections = ok.iter().filter(|d| d[ai]).count();
            let (rate, se) = if ok.is_empty() {
                (0.0, 0.0)
            } else {
                let p = rejections as f64 / ok.len() as f64;
                (p, (p * (1.0 - p) / ok.len() as f64).sqrt())
            };
            rows.push(RejectionRow {
                scenario: sc.label(),
                tau: sc.tau,
                n: sc.n,
                alpha,
                rate,
                se,
                runs: ok.len(),
                failed,
                flagged,
                null,
                wall_time_s: cfg.record_wall_time.then_some(elapsed),
            });
        }
    }
    Ok(RejectionTable { seed: cfg.seed, boot_reps: cfg.boot_reps, bandwidth_h: cfg.bandwidth_h, rows })
}
