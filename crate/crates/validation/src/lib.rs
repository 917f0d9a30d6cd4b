//! Helpers for the reproduction criteria: Monte Carlo tolerance bands and
//! the one-line verdict format.

use std::fmt;

use quantsig::simulation::{RejectionTable, Scenario};

/// `3·√(p(1-p)/runs)`.
pub fn mc_band(p: f64, runs: usize) -> f64 {
    3.0 * (p * (1.0 - p) / runs as f64).sqrt()
}

pub fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

/// Outcome of one criterion.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub id: u8,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(id: u8, title: &'static str, pass: bool, detail: impl Into<String>) -> Self {
        Self { id, title, pass, detail: detail.into() }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "criterion {:>2} [{tag}] {}: {}", self.id, self.title, self.detail)
    }
}

/// Rejection rate of a scenario at `alpha`, or NaN when absent.
pub fn rate(table: &RejectionTable, sc: &Scenario, alpha: f64) -> f64 {
    table.row(sc, alpha).map_or(f64::NAN, |r| r.rate)
}

/// Failed-run count of a scenario, summed over its rows' first alpha.
pub fn failed_runs(table: &RejectionTable, sc: &Scenario) -> usize {
    table.rows.iter().find(|r| r.scenario == sc.label() && r.tau == sc.tau && r.n == sc.n).map_or(0, |r| r.failed)
}

/// Checks `rate` against a published value: `ok`, a printable summary.
pub fn compare(label: &str, rate: f64, reference: f64, tol: f64) -> (bool, String) {
    let ok = within(rate, reference, tol);
    (ok, format!("{label} {rate:.3} vs {reference:.3}±{tol:.4}{}", if ok { "" } else { " (out)" }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bands_match_closed_form() {
        assert!((mc_band(0.044, 200) - 0.0435072).abs() < 1e-6);
        assert!((mc_band(0.026, 200) - 0.0337577).abs() < 1e-6);
        assert_eq!(mc_band(0.0, 200), 0.0);
        assert_eq!(mc_band(1.0, 200), 0.0);
    }

    #[test]
    fn within_is_inclusive() {
        assert!(within(0.5, 0.4, 0.1 + 1e-12));
        assert!(!within(0.52, 0.4, 0.1));
        assert!(!within(f64::NAN, 0.4, 0.1));
    }

    #[test]
    fn verdict_line() {
        let v = Verdict::new(3, "power", true, "rate 1.000");
        assert_eq!(v.to_string(), "criterion  3 [PASS] power: rate 1.000");
        let v = Verdict::new(12, "x", false, "y");
        assert!(v.to_string().contains("[FAIL]"));
    }

    #[test]
    fn compare_formats() {
        let (ok, s) = compare("a=0.05", 0.065, 0.044, 0.0435);
        assert!(ok);
        assert_eq!(s, "a=0.05 0.065 vs 0.044±0.0435");
        assert!(!compare("x", 0.2, 0.044, 0.0435).0);
    }
}
