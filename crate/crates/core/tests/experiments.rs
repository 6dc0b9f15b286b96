use mingap_core::experiments::{
    prime_gap_experiment, run, scan_minimal_gap, verify_theorem2, ExperimentConfig, ExperimentKind,
    OutputConfig, OutputFormat,
};
use num_bigint::BigUint;
use num_traits::One;

fn config(kind: ExperimentKind, seq: &str, ns: &str, samples: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(kind, seq.parse().unwrap(), ns.parse().unwrap());
    c.alphas.samples = samples;
    c.alphas.seed = 77;
    c
}

#[test]
fn squares_scan_has_one_row_per_cell() {
    let c = config(ExperimentKind::Scan, "monomial:d=2", "geom:256:8192:2", 32);
    let t = scan_minimal_gap(&c).unwrap();
    assert_eq!(t.len(), 32 * 6);
    for r in &t.rows {
        assert!(r.delta.le_ratio(&BigUint::one(), &BigUint::from(r.n)));
        assert!(!r.collision);
    }
}

#[test]
fn lacunary_upper_bound_holds_often() {
    let mut c = config(ExperimentKind::Theorem2, "lacunary:q=2", "1024", 32);
    c.eta = Some(0.3);
    let out = verify_theorem2(&c).unwrap();
    let s = &out.summary;
    assert!(s.bits >= 1024 + 2 * 10 + 40);
    assert!(s.satisfaction_fraction.unwrap() >= 0.8, "{s:?}");
    assert_eq!(s.hypothesis_ok, Some(true));
    assert_eq!(s.implication_failures, Some(0));
}

#[test]
fn prime_table_has_positive_normalized_values() {
    let mut c = config(ExperimentKind::Primes, "primes", "4096", 32);
    c.epsilon = 0.1;
    let out = prime_gap_experiment(&c).unwrap();
    assert_eq!(out.table.len(), 32);
    assert!(out.table.rows.iter().all(|r| r.normalized.is_some_and(|x| x > 0.0)));
    assert!(out.summary.normalized_min.unwrap() > 0.0);
    assert_eq!(out.summary.floor_violations, Some(0));
    let again = prime_gap_experiment(&c).unwrap();
    assert_eq!(again.table.to_csv_string(), out.table.to_csv_string());
}

#[test]
fn run_creates_output_directories() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(ExperimentKind::Threegap, "naturals", "10,100", 4);
    let path = dir.path().join("a/b/gaps.json");
    c.output = Some(OutputConfig { path: path.clone(), format: OutputFormat::Json });
    let r = run(&c).unwrap();
    assert_eq!(r.exit_code(), 0);
    let rows: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 8);
    assert!(dir.path().join("a/b/gaps.manifest.json").exists());
}
