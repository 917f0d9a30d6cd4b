//! Residual marks, the marked empirical processes and the Kolmogorov–Smirnov
//! statistic.
//!
//! Every process here has the form
//!
//! ```text
//! P(x, z) = (1/n) Σᵢ mᵢ · I{Xᵢ ≤ x} · c(i, z)
//! ```
//!
//! with per-observation marks `mᵢ` and a centering term `c(i, z)`. It is a
//! step function whose value only changes at sample thresholds, so its
//! supremum is attained on the threshold grid built by [`ThresholdGrid`].
//! [`MarkedProcess`] holds the grid and `c` once and evaluates many mark
//! vectors against them, which is what the bootstrap needs.

use serde::{Deserialize, Serialize};

use crate::cdf_estimator::EstimatorConfig;
use crate::data::{dominated, Dataset};
use crate::error::{Error, Result};
use crate::rearrangement::{GSpec, QuantileEstimator, RearrangeConfig};
use crate::scalar::Scalar;

/// Multivariate axes use the full coordinatewise product of thresholds up to
/// this sample size.
pub const PRODUCT_GRID_MAX_N: usize = 500;
/// ...and only while `nodes × n` stays below this many cells.
pub const PRODUCT_GRID_MAX_CELLS: usize = 1 << 25;

/// Fitted conditional quantiles at the sample points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileFit<T> {
    pub qhat: Vec<T>,
    /// `Yᵢ - q̂(Xᵢ)`.
    pub resid: Vec<T>,
    /// Fraction of nonpositive residuals.
    pub tau_hat: T,
    pub tau: T,
}

impl<T: Scalar> QuantileFit<T> {
    pub fn from_fitted(data: &Dataset<T>, qhat: Vec<T>, tau: T) -> Result<Self> {
        if qhat.len() != data.n() {
            return Err(Error::InvalidData(format!(
                "{} fitted values for {} observations",
                qhat.len(),
                data.n()
            )));
        }
        let resid: Vec<T> = data.y().iter().zip(&qhat).map(|(&y, &q)| y - q).collect();
        let below = resid.iter().filter(|r| **r <= T::zero()).count();
        let tau_hat = T::from_usize_lossy(below) / T::from_usize_lossy(data.n());
        Ok(Self { qhat, resid, tau_hat, tau })
    }

    /// `I{Yᵢ ≤ q̂(Xᵢ)}`.
    pub fn below(&self) -> impl Iterator<Item = bool> + '_ {
        self.resid.iter().map(|r| *r <= T::zero())
    }
}

/// `q̂_τ(Xᵢ)` at every sample point.
pub fn fit_quantile_curve<T: Scalar>(
    data: &Dataset<T>,
    tau: T,
    cfg: &EstimatorConfig<T>,
    rcfg: &RearrangeConfig<T>,
    g: &GSpec<T>,
) -> Result<QuantileFit<T>> {
    let est = QuantileEstimator::new(data, cfg, rcfg, g)?;
    let qhat = (0..data.n())
        .map(|i| est.estimate(data.x_row(i), tau))
        .collect::<Result<Vec<T>>>()?;
    QuantileFit::from_fitted(data, qhat, tau)
}

/// How multivariate thresholds are formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridRule {
    /// Product grid while small enough, observed rows otherwise.
    #[default]
    Auto,
    Product,
    ObservedRows,
}

/// Threshold nodes on one axis block (X or Z), row-major `count × dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds<T> {
    pub dim: usize,
    pub nodes: Vec<T>,
}

impl<T: Scalar> Thresholds<T> {
    pub fn build(points: &[T], dim: usize, rule: GridRule) -> Self {
        let n = points.len() / dim;
        if dim == 1 {
            return Self { dim, nodes: sorted_unique(points.to_vec()) };
        }
        let axes: Vec<Vec<T>> = (0..dim)
            .map(|c| sorted_unique((0..n).map(|i| points[i * dim + c]).collect()))
            .collect();
        let product_count = axes.iter().try_fold(1usize, |acc, a| acc.checked_mul(a.len()));
        let use_product = match rule {
            GridRule::Product => true,
            GridRule::ObservedRows => false,
            GridRule::Auto => {
                n <= PRODUCT_GRID_MAX_N
                    && product_count
                        .and_then(|c| c.checked_mul(n))
                        .is_some_and(|cells| cells <= PRODUCT_GRID_MAX_CELLS)
            }
        };
        if use_product {
            let count = product_count.expect("product grid size overflow");
            let mut nodes = Vec::with_capacity(count * dim);
            let mut idx = vec![0usize; dim];
            for _ in 0..count {
                for c in 0..dim {
                    nodes.push(axes[c][idx[c]]);
                }
                // odometer, last coordinate fastest
                for c in (0..dim).rev() {
                    idx[c] += 1;
                    if idx[c] < axes[c].len() {
                        break;
                    }
                    idx[c] = 0;
                }
            }
            Self { dim, nodes }
        } else {
            let mut rows: Vec<&[T]> = points.chunks(dim).collect();
            rows.sort_by(|a, b| lex_cmp(a, b));
            rows.dedup();
            Self { dim, nodes: rows.concat() }
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn node(&self, k: usize) -> &[T] {
        &self.nodes[k * self.dim..(k + 1) * self.dim]
    }
}

fn sorted_unique<T: Scalar>(mut v: Vec<T>) -> Vec<T> {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    v.dedup();
    v
}

fn lex_cmp<T: Scalar>(a: &[T], b: &[T]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y).expect("finite") {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

#[derive(Clone, Debug)]
enum XIndex {
    /// `d = 1`: observations sorted by X; node `k` covers the first
    /// `ends[k]` of them.
    Sorted { order: Vec<usize>, ends: Vec<usize> },
    /// `d > 1`: the observations dominated by each node, in index order.
    Members(Vec<Vec<usize>>),
}

/// The `(x, z)` evaluation grid of a dataset.
#[derive(Clone, Debug)]
pub struct ThresholdGrid<T> {
    x_nodes: Thresholds<T>,
    z_nodes: Thresholds<T>,
    x_index: XIndex,
    n: usize,
}

impl<T: Scalar> ThresholdGrid<T> {
    pub fn new(data: &Dataset<T>, rule: GridRule) -> Self {
        let n = data.n();
        let x_nodes = Thresholds::build(data.x_flat(), data.d(), rule);
        let z_nodes = Thresholds::build(data.z_flat(), data.q(), rule);
        let x_index = if data.d() == 1 {
            let xs: Vec<T> = (0..n).map(|i| data.x_row(i)[0]).collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| xs[i].partial_cmp(&xs[j]).expect("finite").then(i.cmp(&j)));
            let mut ends = Vec::with_capacity(x_nodes.len());
            let mut pos = 0;
            for k in 0..x_nodes.len() {
                let t = x_nodes.nodes[k];
                while pos < n && xs[order[pos]] <= t {
                    pos += 1;
                }
                ends.push(pos);
            }
            XIndex::Sorted { order, ends }
        } else {
            XIndex::Members(
                (0..x_nodes.len())
                    .map(|k| (0..n).filter(|&i| dominated(data.x_row(i), x_nodes.node(k))).collect())
                    .collect(),
            )
        };
        Self { x_nodes, z_nodes, x_index, n }
    }

    pub fn x_nodes(&self) -> &Thresholds<T> {
        &self.x_nodes
    }

    pub fn z_nodes(&self) -> &Thresholds<T> {
        &self.z_nodes
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `I{Zᵢ ≤ z_l}` for every node `l` (outer) and observation `i` (inner).
    pub fn z_indicators(&self, data: &Dataset<T>) -> Vec<bool> {
        let gz = self.z_nodes.len();
        let mut out = Vec::with_capacity(gz * self.n);
        for l in 0..gz {
            let node = self.z_nodes.node(l);
            out.extend((0..self.n).map(|i| dominated(data.z_row(i), node)));
        }
        out
    }
}

/// A location on the evaluation grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint<T> {
    pub x_index: usize,
    pub z_index: usize,
    pub x: Vec<T>,
    pub z: Vec<T>,
}

/// A process evaluated on the whole grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessSurface<T> {
    pub x_nodes: Thresholds<T>,
    pub z_nodes: Thresholds<T>,
    /// Row-major `x node × z node`.
    pub values: Vec<T>,
    pub sup_abs: T,
    pub argmax: GridPoint<T>,
}

impl<T: Scalar> ProcessSurface<T> {
    pub fn value(&self, x_index: usize, z_index: usize) -> T {
        self.values[x_index * self.z_nodes.len() + z_index]
    }

    /// Value at an arbitrary `(x, z)` for scalar X and Z: the value at the
    /// largest nodes not exceeding `x` and `z`, zero below the grid. `None`
    /// for multivariate axes.
    pub fn lookup(&self, x: T, z: T) -> Option<T> {
        if self.x_nodes.dim != 1 || self.z_nodes.dim != 1 {
            return None;
        }
        let k = self.x_nodes.nodes.partition_point(|v| *v <= x);
        let l = self.z_nodes.nodes.partition_point(|v| *v <= z);
        if k == 0 || l == 0 {
            return Some(T::zero());
        }
        Some(self.value(k - 1, l - 1))
    }
}

/// Grid plus centering term; evaluates mark vectors.
#[derive(Clone, Debug)]
pub struct MarkedProcess<T> {
    grid: ThresholdGrid<T>,
    /// `c(i, z_l)` at `[l * n + i]`.
    centering: Vec<T>,
}

impl<T: Scalar> MarkedProcess<T> {
    pub fn new(grid: ThresholdGrid<T>, centering: Vec<T>) -> Result<Self> {
        if centering.len() != grid.z_nodes.len() * grid.n {
            return Err(Error::InvalidConfig(format!(
                "centering has {} entries, grid needs {}",
                centering.len(),
                grid.z_nodes.len() * grid.n
            )));
        }
        Ok(Self { grid, centering })
    }

    /// `c(i, z) = I{Zᵢ ≤ z} - F̂_Z(z)` with the empirical CDF of Z.
    pub fn empirically_centered(data: &Dataset<T>, grid: ThresholdGrid<T>) -> Self {
        let n = grid.n;
        let inv = grid.z_indicators(data);
        let mut centering = Vec::with_capacity(inv.len());
        for col in inv.chunks(n) {
            let f = T::from_usize_lossy(col.iter().filter(|b| **b).count()) / T::from_usize_lossy(n);
            centering.extend(col.iter().map(|&b| indicator::<T>(b) - f));
        }
        Self { grid, centering }
    }

    /// `c(i, z) = I{Zᵢ ≤ z}`.
    pub fn uncentered(data: &Dataset<T>, grid: ThresholdGrid<T>) -> Self {
        let centering = grid.z_indicators(data).into_iter().map(indicator).collect();
        Self { grid, centering }
    }

    pub fn grid(&self) -> &ThresholdGrid<T> {
        &self.grid
    }

    pub fn centering(&self) -> &[T] {
        &self.centering
    }

    /// Visits every grid value as `(x node, z node, value)`, z-major.
    fn sweep(&self, marks: &[T], mut visit: impl FnMut(usize, usize, T)) {
        let n = self.grid.n;
        assert_eq!(marks.len(), n, "one mark per observation");
        let nf = T::from_usize_lossy(n);
        for (l, col) in self.centering.chunks(n).enumerate() {
            match &self.grid.x_index {
                XIndex::Sorted { order, ends } => {
                    let mut acc = T::zero();
                    let mut pos = 0;
                    for (k, &end) in ends.iter().enumerate() {
                        while pos < end {
                            let i = order[pos];
                            acc = acc + marks[i] * col[i];
                            pos += 1;
                        }
                        visit(k, l, acc / nf);
                    }
                }
                XIndex::Members(members) => {
                    for (k, set) in members.iter().enumerate() {
                        let acc = set.iter().fold(T::zero(), |s, &i| s + marks[i] * col[i]);
                        visit(k, l, acc / nf);
                    }
                }
            }
        }
    }

    /// `sup |P|` over the grid and the first location attaining it.
    pub fn sup_abs(&self, marks: &[T]) -> (T, usize, usize) {
        let mut best = (T::zero(), 0, 0);
        self.sweep(marks, |k, l, v| {
            if v.abs() > best.0 {
                best = (v.abs(), k, l);
            }
        });
        best
    }

    pub fn surface(&self, marks: &[T]) -> ProcessSurface<T> {
        let gz = self.grid.z_nodes.len();
        let mut values = vec![T::zero(); self.grid.x_nodes.len() * gz];
        self.sweep(marks, |k, l, v| values[k * gz + l] = v);
        let (sup_abs, k, l) = self.sup_abs(marks);
        ProcessSurface {
            argmax: GridPoint {
                x_index: k,
                z_index: l,
                x: self.grid.x_nodes.node(k).to_vec(),
                z: self.grid.z_nodes.node(l).to_vec(),
            },
            x_nodes: self.grid.x_nodes.clone(),
            z_nodes: self.grid.z_nodes.clone(),
            values,
            sup_abs,
        }
    }
}

#[inline]
pub(crate) fn indicator<T: Scalar>(b: bool) -> T {
    if b {
        T::one()
    } else {
        T::zero()
    }
}

/// Marks `I{Yᵢ ≤ q̂(Xᵢ)} - τ̂`.
pub fn centered_marks<T: Scalar>(fit: &QuantileFit<T>) -> Vec<T> {
    fit.below().map(|b| indicator::<T>(b) - fit.tau_hat).collect()
}

/// The process `T̃ₙ` with its grid, ready for evaluation.
pub fn t_tilde_process<T: Scalar>(data: &Dataset<T>, rule: GridRule) -> MarkedProcess<T> {
    MarkedProcess::empirically_centered(data, ThresholdGrid::new(data, rule))
}

/// `T̃ₙ(x, z) = (1/n) Σ (I{Yᵢ ≤ q̂(Xᵢ)} - τ̂) I{Xᵢ ≤ x} (I{Zᵢ ≤ z} - F̂_Z(z))`
/// on the threshold grid; `sup_abs` is the statistic `K̃ₙ`.
pub fn t_tilde_surface<T: Scalar>(data: &Dataset<T>, fit: &QuantileFit<T>) -> ProcessSurface<T> {
    t_tilde_process(data, GridRule::Auto).surface(&centered_marks(fit))
}

/// Shape of the covariate region `Θ` restricting the original process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RegionKind<T> {
    /// `{x ≤ upper}`.
    LowerRectangle { upper: Vec<T> },
    /// `{lower ≤ x ≤ upper}`.
    IntervalBox { lower: Vec<T>, upper: Vec<T> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec<T> {
    pub kind: RegionKind<T>,
    /// When set to `h`, drops observations within `h` of the edge of the
    /// sample range of X in any coordinate.
    pub trim_boundary: Option<T>,
}

impl<T: Scalar> RegionSpec<T> {
    /// All of `ℝᵈ`.
    pub fn unbounded(d: usize) -> Self {
        Self { kind: RegionKind::LowerRectangle { upper: vec![T::infinity(); d] }, trim_boundary: None }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let ok = match &self.kind {
            RegionKind::LowerRectangle { upper } => upper.len() == d,
            RegionKind::IntervalBox { lower, upper } => {
                lower.len() == d && upper.len() == d && dominated(lower, upper)
            }
        };
        if !ok {
            return Err(Error::InvalidConfig("region bounds must have dimension d and satisfy lower ≤ upper".into()));
        }
        if let Some(h) = self.trim_boundary {
            crate::kernels::check_bandwidth("trim_boundary", h)?;
        }
        Ok(())
    }

    fn contains(&self, x: &[T]) -> bool {
        match &self.kind {
            RegionKind::LowerRectangle { upper } => dominated(x, upper),
            RegionKind::IntervalBox { lower, upper } => dominated(lower, x) && dominated(x, upper),
        }
    }
}

/// The uncentered process `Tₙ(Θ, z) = (1/n) Σ (I{Yᵢ ≤ q̂(Xᵢ)} - τ) I{Xᵢ ∈ Θ ∩ {X ≤ x}} I{Zᵢ ≤ z}`.
pub fn t_original_surface<T: Scalar>(
    data: &Dataset<T>,
    fit: &QuantileFit<T>,
    region: &RegionSpec<T>,
) -> Result<ProcessSurface<T>> {
    region.validate(data.d())?;
    let d = data.d();
    let (lo, hi) = {
        let mut lo = vec![T::infinity(); d];
        let mut hi = vec![T::neg_infinity(); d];
        for i in 0..data.n() {
            for (c, &v) in data.x_row(i).iter().enumerate() {
                lo[c] = lo[c].min(v);
                hi[c] = hi[c].max(v);
            }
        }
        (lo, hi)
    };
    let inside = |x: &[T]| match region.trim_boundary {
        None => true,
        Some(h) => x.iter().enumerate().all(|(c, &v)| v - h >= lo[c] && v + h <= hi[c]),
    };
    let marks: Vec<T> = fit
        .below()
        .enumerate()
        .map(|(i, b)| {
            let x = data.x_row(i);
            if region.contains(x) && inside(x) {
                indicator::<T>(b) - fit.tau
            } else {
                T::zero()
            }
        })
        .collect();
    let process = MarkedProcess::uncentered(data, ThresholdGrid::new(data, GridRule::Auto));
    Ok(process.surface(&marks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct evaluation of the defining sum of `T̃ₙ`, index order.
    fn t_tilde_brute(data: &Dataset<f64>, below: &[bool], tau_hat: f64, x: &[f64], z: &[f64]) -> f64 {
        let n = data.n();
        let fz = (0..n).filter(|&j| dominated(data.z_row(j), z)).count() as f64 / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            if dominated(data.x_row(i), x) {
                let m = if below[i] { 1.0 } else { 0.0 } - tau_hat;
                let c = if dominated(data.z_row(i), z) { 1.0 } else { 0.0 } - fz;
                acc += m * c;
            }
        }
        acc / n as f64
    }

    fn hand_instance() -> (Dataset<f64>, QuantileFit<f64>) {
        let ds = Dataset::univariate(vec![0.0; 4], vec![1.0, 2.0, 3.0, 4.0], vec![4.0, 3.0, 2.0, 1.0]).unwrap();
        // residual signs (-, +, -, +)
        let fit = QuantileFit::from_fitted(&ds, vec![1.0, -1.0, 1.0, -1.0], 0.5).unwrap();
        (ds, fit)
    }

    #[test]
    fn hand_instance_matches_enumeration() {
        let (ds, fit) = hand_instance();
        assert_eq!(fit.tau_hat, 0.5);
        let below: Vec<bool> = fit.below().collect();
        assert_eq!(below, vec![true, false, true, false]);
        let s = t_tilde_surface(&ds, &fit);
        assert_eq!(s.values.len(), 16);
        for (k, &x) in [1.0, 2.0, 3.0, 4.0].iter().enumerate() {
            for (l, &z) in [1.0, 2.0, 3.0, 4.0].iter().enumerate() {
                assert_eq!(s.value(k, l), t_tilde_brute(&ds, &below, 0.5, &[x], &[z]));
            }
        }
        // (x=1, z=1): only obs 1 (Z=4 > 1): (0.5)(0 - 0.25)/4
        assert_eq!(s.value(0, 0), -0.03125);
        assert_eq!(s.sup_abs, s.values.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    }

    #[test]
    fn right_edge_and_left_edge_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40;
        let ds = Dataset::univariate(
            (0..n).map(|_| rng.random()).collect(),
            (0..n).map(|_| rng.random()).collect(),
            (0..n).map(|_| rng.random()).collect(),
        )
        .unwrap();
        let fit = QuantileFit::from_fitted(&ds, vec![0.5; n], 0.5).unwrap();
        let s = t_tilde_surface(&ds, &fit);
        let gz = s.z_nodes.len();
        for k in 0..s.x_nodes.len() {
            assert_eq!(s.value(k, gz - 1), 0.0);
        }
        assert_eq!(s.lookup(-1.0, 0.5), Some(0.0));
        assert_eq!(s.lookup(0.5, -1.0), Some(0.0));
    }

    #[test]
    fn step_function_supremum_is_on_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 30;
        let ds = Dataset::univariate(
            (0..n).map(|_| rng.random()).collect(),
            (0..n).map(|_| rng.random()).collect(),
            (0..n).map(|_| rng.random()).collect(),
        )
        .unwrap();
        let fit = QuantileFit::from_fitted(&ds, vec![0.4; n], 0.4).unwrap();
        let below: Vec<bool> = fit.below().collect();
        let s = t_tilde_surface(&ds, &fit);
        for _ in 0..100 {
            let x: f64 = rng.random_range(-0.2..1.2);
            let z: f64 = rng.random_range(-0.2..1.2);
            let direct = t_tilde_brute(&ds, &below, fit.tau_hat, &[x], &[z]);
            let on_grid = s.lookup(x, z).unwrap();
            assert!((direct - on_grid).abs() < 1e-15, "({x},{z})");
            assert!(direct.abs() <= s.sup_abs + 1e-15);
        }
    }

    #[test]
    fn rank_invariance_in_z() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 50;
        let ds = Dataset::univariate(
            (0..n).map(|_| rng.random()).collect(),
            (0..n).map(|_| rng.random()).collect(),
            (0..n).map(|_| rng.random::<f64>() * 3.0 - 1.0).collect(),
        )
        .unwrap();
        let fit = QuantileFit::from_fitted(&ds, vec![0.5; n], 0.5).unwrap();
        let exp_z = ds.with_z(ds.z_flat().iter().map(|z| z.exp()).collect(), 1).unwrap();
        let a = t_tilde_surface(&ds, &fit);
        let b = t_tilde_surface(&exp_z, &fit);
        assert_eq!(a.sup_abs.to_bits(), b.sup_abs.to_bits());
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn vanishes_when_all_marks_equal() {
        let (ds, _) = hand_instance();
        for q in [vec![5.0; 4], vec![-5.0; 4]] {
            let fit = QuantileFit::from_fitted(&ds, q, 0.5).unwrap();
            let s = t_tilde_surface(&ds, &fit);
            assert!(s.values.iter().all(|v| *v == 0.0));
            assert_eq!(s.sup_abs, 0.0);
        }
    }

    #[test]
    fn bivariate_z_uses_product_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 20;
        let z: Vec<f64> = (0..2 * n).map(|_| rng.random()).collect();
        let ds = Dataset::new(
            (0..n).map(|_| rng.random()).collect(),
            (0..n).map(|_| rng.random()).collect(),
            1,
            z,
            2,
        )
        .unwrap();
        let qhat: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let fit = QuantileFit::from_fitted(&ds, qhat, 0.5).unwrap();
        let below: Vec<bool> = fit.below().collect();
        let s = t_tilde_surface(&ds, &fit);
        assert_eq!(s.z_nodes.len(), n * n);
        for k in 0..s.x_nodes.len() {
            for l in 0..s.z_nodes.len() {
                let want = t_tilde_brute(&ds, &below, fit.tau_hat, s.x_nodes.node(k), s.z_nodes.node(l));
                assert!((s.value(k, l) - want).abs() < 1e-15);
            }
        }
        let rows = Thresholds::build(ds.z_flat(), 2, GridRule::ObservedRows);
        assert_eq!(rows.len(), n);
    }

    #[test]
    fn bivariate_x_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 15;
        let ds = Dataset::new(
            (0..n).map(|_| rng.random()).collect(),
            (0..2 * n).map(|_| rng.random()).collect(),
            2,
            (0..n).map(|_| rng.random()).collect(),
            1,
        )
        .unwrap();
        let fit = QuantileFit::from_fitted(&ds, vec![0.5; n], 0.5).unwrap();
        let below: Vec<bool> = fit.below().collect();
        let s = t_tilde_surface(&ds, &fit);
        for k in 0..s.x_nodes.len() {
            for l in 0..s.z_nodes.len() {
                let want = t_tilde_brute(&ds, &below, fit.tau_hat, s.x_nodes.node(k), s.z_nodes.node(l));
                assert_eq!(s.value(k, l), want);
            }
        }
    }

    #[test]
    fn original_process_by_enumeration() {
        let (ds, fit) = hand_instance();
        let s = t_original_surface(&ds, &fit, &RegionSpec::unbounded(1)).unwrap();
        let below: Vec<bool> = fit.below().collect();
        for (k, &x) in [1.0, 2.0, 3.0, 4.0].iter().enumerate() {
            for (l, &z) in [1.0, 2.0, 3.0, 4.0].iter().enumerate() {
                let mut acc = 0.0;
                for i in 0..4 {
                    if ds.x_row(i)[0] <= x && ds.z_row(i)[0] <= z {
                        acc += if below[i] { 1.0 } else { 0.0 } - 0.5;
                    }
                }
                assert_eq!(s.value(k, l), acc / 4.0);
            }
        }
        // not centered in z: at z = max the column is generally nonzero
        assert_eq!(s.value(0, 3), 0.125);
    }

    #[test]
    fn original_process_regions() {
        let (ds, fit) = hand_instance();
        let empty = RegionSpec {
            kind: RegionKind::IntervalBox { lower: vec![10.0], upper: vec![11.0] },
            trim_boundary: None,
        };
        let s = t_original_surface(&ds, &fit, &empty).unwrap();
        assert!(s.values.iter().all(|v| *v == 0.0));
        // trimming by 1.0 keeps X ∈ [2, 3]
        let trimmed = RegionSpec { trim_boundary: Some(1.0), ..RegionSpec::unbounded(1) };
        let s = t_original_surface(&ds, &fit, &trimmed).unwrap();
        // obs 2 (X=2, +) and obs 3 (X=3, -) remain
        assert_eq!(s.value(3, 3), ((0.0 - 0.5) + (1.0 - 0.5)) / 4.0);
        assert_eq!(s.value(1, 3), -0.125);
        let bad = RegionSpec {
            kind: RegionKind::IntervalBox { lower: vec![2.0], upper: vec![1.0] },
            trim_boundary: None,
        };
        assert!(t_original_surface(&ds, &fit, &bad).is_err());
    }

    #[test]
    fn fit_quantile_curve_tau_hat_bands() {
        use crate::bandwidth::select_bandwidths;
        use crate::rearrangement::select_g;
        use rand_distr::StandardNormal;
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let n = 400;
        let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y: Vec<f64> = x.iter().map(|&v| v + 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let ds = Dataset::univariate(y, x, z).unwrap();
        let g = select_g(&ds).unwrap();
        let (bw, _) = select_bandwidths(&ds, None).unwrap();
        let cfg = EstimatorConfig::new(bw.h, bw.d_smooth);
        let rcfg = RearrangeConfig::new(bw.b);
        let fit = fit_quantile_curve(&ds, 0.5, &cfg, &rcfg, &g).unwrap();
        assert!((0.4..=0.6).contains(&fit.tau_hat), "{}", fit.tau_hat);
        let fit = fit_quantile_curve(&ds, 0.25, &cfg, &rcfg, &g).unwrap();
        assert!((fit.tau_hat - 0.25).abs() <= 0.1, "{}", fit.tau_hat);
        for i in 0..n {
            assert_eq!(fit.resid[i], ds.y()[i] - fit.qhat[i]);
        }
    }
}
