use quantsig::{run_test, Dataset64, TestSettings64};

#[test]
fn crate_level_example() {
    let n = 60;
    let x: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    let z: Vec<f64> = (0..n).map(|i| ((i * 37) % n) as f64 / n as f64).collect();
    let y: Vec<f64> = (0..n).map(|i| x[i] + 0.1 * ((i * 13) % 7) as f64).collect();
    let data = Dataset64::univariate(y, x, z).unwrap();

    let mut settings = TestSettings64::new(0.5, 0.05, 42);
    settings.n_reps = 99;
    let report = run_test(&data, &settings).unwrap();
    assert!((0.0..=1.0).contains(&report.outcome.p_value));
}
