use quantsig::simulation::{run_power_study, Model, Scenario, StudyConfig};

#[test]
fn power_grows_with_sample_size() {
    let cfg = StudyConfig { runs: 200, seed: 31, alphas: vec![0.05], ..StudyConfig::default() };
    let small = Scenario::loc_scale(3, 2, 0.5, 50).unwrap();
    let large = Scenario::loc_scale(3, 2, 0.5, 100).unwrap();
    let t = run_power_study(&[small, large], &cfg).unwrap();
    let r50 = t.row(&small, 0.05).unwrap().rate;
    let r100 = t.row(&large, 0.05).unwrap().rate;
    assert!(r100 + 0.05 >= r50, "{r100} vs {r50}");
    assert!(r100 > 0.9, "{r100}");
}

#[test]
fn tables_identical_for_one_and_eight_workers() {
    let scs = [
        Scenario::loc_scale(1, 3, 0.25, 40).unwrap(),
        Scenario::loc_scale(4, 4, 0.5, 40).unwrap(),
        Scenario::new(Model::PlaneAlt, 0.5, 30).unwrap(),
    ];
    let cfg = StudyConfig { runs: 16, boot_reps: 60, seed: 8, ..StudyConfig::default() };
    let one = run_power_study(&scs, &cfg).unwrap();
    let eight = run_power_study(&scs, &StudyConfig { workers: 8, ..cfg.clone() }).unwrap();
    assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&eight).unwrap());
}

#[test]
fn null_and_alternative_flags_in_table() {
    let scs = [Scenario::loc_scale(1, 3, 0.5, 30).unwrap(), Scenario::loc_scale(1, 3, 0.25, 30).unwrap()];
    let cfg = StudyConfig { runs: 2, boot_reps: 10, ..StudyConfig::default() };
    let t = run_power_study(&scs, &cfg).unwrap();
    assert!(t.row(&scs[0], 0.05).unwrap().null);
    assert!(!t.row(&scs[1], 0.05).unwrap().null);
}

#[test]
fn json_round_trip() {
    let cfg = StudyConfig { runs: 3, boot_reps: 10, record_wall_time: true, ..StudyConfig::default() };
    let t = run_power_study(&[Scenario::loc_scale(2, 1, 0.5, 25).unwrap()], &cfg).unwrap();
    assert!(t.rows.iter().all(|r| r.wall_time_s.is_some()));
    let back: quantsig::RejectionTable = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
    assert_eq!(back, t);
}
