use multisecant::bench::{
    performance_profile, run_suite, write_profile, write_results, ProfileMetric, RESULTS_HEADER,
};
use multisecant::problems::{default_suite, ProblemKind, SuiteEntry};
use multisecant::solver::{Method, SolveStatus, SolverConfig};
use multisecant::{default_tau_grid, emit_profile, emit_results};

fn small_suite() -> Vec<SuiteEntry> {
    vec![
        SuiteEntry::new(ProblemKind::Rosenbrock, 2),
        SuiteEntry::scaled(ProblemKind::HelicalValley, 3, 10),
        SuiteEntry::new(ProblemKind::DiscreteIntegral, 20),
    ]
}

#[test]
fn single_cell_suite() {
    let records = run_suite(&[Method::Qn1], &[SuiteEntry::new(ProblemKind::Rosenbrock, 2)], &SolverConfig::default(), 1).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].status, SolveStatus::Converged);
}

#[test]
fn order_is_problem_major() {
    let suite = small_suite();
    let records = run_suite(&Method::ALL, &suite, &SolverConfig::default(), 2).unwrap();
    assert_eq!(records.len(), suite.len() * 4);
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r.problem, suite[i / 4].label());
        assert_eq!(r.n, suite[i / 4].n);
        assert_eq!(r.method, Method::ALL[i % 4]);
    }
}

#[test]
fn results_do_not_depend_on_parallelism() {
    let cfg = SolverConfig::default();
    let suite = default_suite();
    let key = |rs: &[multisecant::RunRecord]| {
        rs.iter()
            .map(|r| (r.problem.clone(), r.n, r.method, r.status, r.iterations, r.fevals, r.f_norm_final.to_bits()))
            .collect::<Vec<_>>()
    };
    let sequential = run_suite(&Method::ALL, &suite, &cfg, 1).unwrap();
    let parallel = run_suite(&Method::ALL, &suite, &cfg, 4).unwrap();
    let repeat = run_suite(&Method::ALL, &suite, &cfg, 0).unwrap();
    assert_eq!(sequential.len(), 120);
    assert_eq!(key(&sequential), key(&parallel));
    assert_eq!(key(&sequential), key(&repeat));
}

#[test]
fn csv_outputs_have_expected_shape() {
    let records = run_suite(&Method::ALL, &default_suite(), &SolverConfig::default(), 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("results.csv");
    emit_results(&records, &results).unwrap();
    let text = std::fs::read_to_string(&results).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 121);
    assert_eq!(lines[0], RESULTS_HEADER);
    for line in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 8, "{line}");
        let mantissa = fields[6].split('e').next().unwrap();
        assert_eq!(mantissa.trim_start_matches('-').len(), 7, "{line}");
        fields[6].parse::<f64>().unwrap();
    }

    let table = performance_profile(&records, ProfileMetric::Fevals, &default_tau_grid()).unwrap();
    let profile = dir.path().join("profile.csv");
    emit_profile(&table, &profile).unwrap();
    let text = std::fs::read_to_string(&profile).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 51);
    assert_eq!(lines[0], "tau,qn1,qn2,qn3,qn4");
    assert!(lines.iter().all(|l| l.split(',').count() == 5));
}

#[test]
fn writers_are_deterministic() {
    let records = run_suite(&Method::ALL, &small_suite(), &SolverConfig::default(), 0).unwrap();
    let render = |rs: &[multisecant::RunRecord]| {
        let mut buf = Vec::new();
        let cleaned: Vec<_> = rs.iter().cloned().map(|mut r| { r.wall_time_ms = 0.0; r }).collect();
        write_results(&cleaned, &mut buf).unwrap();
        let table = performance_profile(rs, ProfileMetric::Iterations, &[1.0, 2.0, 4.0]).unwrap();
        write_profile(&table, &mut buf).unwrap();
        buf
    };
    let again = run_suite(&Method::ALL, &small_suite(), &SolverConfig::default(), 1).unwrap();
    assert_eq!(render(&records), render(&again));
}
