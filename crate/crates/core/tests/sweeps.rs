use pinch_uplink::experiments::{run_sweep, Method, SweepKind, SweepSpec};

#[test]
fn pass_dominates_ula_per_realization() {
    let spec = SweepSpec {
        methods: vec![Method::PassSic, Method::UlaSic],
        ..SweepSpec::new(SweepKind::PmaxSweep)
    };
    let spec = SweepSpec {
        pmax_dbm: vec![10.0],
        realizations: 200,
        ..spec
    };
    let res = run_sweep(&spec).unwrap();
    let pass = res.row(10.0, Method::PassSic).unwrap();
    let ula = res.row(10.0, Method::UlaSic).unwrap();
    let wins = pass.samples.iter().zip(&ula.samples).filter(|(p, u)| p >= u).count();
    assert!(wins as f64 >= 0.95 * 200.0, "{wins} of 200");
    assert!(pass.mean_bits > ula.mean_bits);
}

#[test]
fn rate_grows_with_power_budget() {
    let spec = SweepSpec {
        pmax_dbm: vec![0.0, 10.0, 20.0],
        methods: vec![Method::PassSic],
        realizations: 200,
        ..SweepSpec::new(SweepKind::PmaxSweep)
    };
    let res = run_sweep(&spec).unwrap();
    let means: Vec<f64> = [0.0, 10.0, 20.0]
        .iter()
        .map(|&p| res.row(p, Method::PassSic).unwrap().mean_bits)
        .collect();
    assert!(means.windows(2).all(|w| w[1] >= w[0]), "{means:?}");
}

#[test]
fn sweep_is_deterministic() {
    let spec = SweepSpec {
        realizations: 3,
        n_users: vec![1, 5],
        ..SweepSpec::new(SweepKind::UserSweep)
    };
    assert_eq!(run_sweep(&spec).unwrap(), run_sweep(&spec).unwrap());
}
