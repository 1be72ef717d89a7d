mod common;

use cmpplab_core::process::simulate_coupled_renewal_path;
use cmpplab_core::{
    increments, simulate_cmpp_path, simulate_cpp_path, simulate_renewal_path, ClaimLaw, Domain,
    Error, MixingLaw, Observable, PathStreams, ProcessKind, ProcessModel, RiskPath, TimeGrid,
    DEFAULT_MAX_EVENTS,
};
use common::mean_and_se;
use proptest::prelude::*;

fn unit_claims() -> ClaimLaw {
    ClaimLaw::degenerate(1.0).unwrap()
}

#[test]
fn horizon_must_be_positive() {
    let mut s = PathStreams::from_seed(1);
    assert!(simulate_cpp_path(1.0, &unit_claims(), 0.0, &mut s, DEFAULT_MAX_EVENTS).is_err());
    let path = simulate_cpp_path(1.0, &unit_claims(), 1e-12, &mut s, DEFAULT_MAX_EVENTS).unwrap();
    assert!(path.is_empty());
    assert_eq!(path.aggregate_at(1e-12).unwrap(), 0.0);
}

#[test]
fn long_poisson_path_has_rate_theta() {
    let mut s = PathStreams::from_seed(7);
    let horizon = 1000.0;
    let path = simulate_cpp_path(2.0, &unit_claims(), horizon, &mut s, DEFAULT_MAX_EVENTS).unwrap();
    let rate = path.count_at(horizon).unwrap() as f64 / horizon;
    // Var(N_T / T) = θ / T.
    let se = (2.0 / horizon).sqrt();
    assert!((rate - 2.0).abs() <= 4.0 * se, "rate {rate}");
    assert_eq!(path.kind(), ProcessKind::Cpp);
}

#[test]
fn event_cap_is_an_error() {
    let mut s = PathStreams::from_seed(3);
    let err = simulate_cpp_path(100.0, &unit_claims(), 10.0, &mut s, 50).unwrap_err();
    assert!(matches!(err, Error::EventCapExceeded { cap: 50, .. }));
}

#[test]
fn deterministic_renewal_spacing() {
    let w = ClaimLaw::degenerate(0.5).unwrap();
    let mut s = PathStreams::from_seed(1);
    let path = simulate_renewal_path(&w, &unit_claims(), 2.0, &mut s, DEFAULT_MAX_EVENTS).unwrap();
    assert_eq!(path.arrivals(), &[0.5, 1.0, 1.5, 2.0]);
    assert_eq!(path.theta(), 2.0);
    assert_eq!(path.count_at(0.75).unwrap(), 1);
    let grid = TimeGrid::new(vec![0.0, 0.5, 1.0, 1.5, 2.0]).unwrap();
    assert_eq!(
        increments(&path, &grid, Observable::Count).unwrap(),
        vec![1.0; 4]
    );
}

#[test]
fn count_and_aggregate_examples() {
    let path = RiskPath::new(
        1.0,
        vec![0.5, 1.0, 1.5],
        vec![2.0, 3.0, 4.0],
        2.0,
        ProcessKind::Cpp,
    )
    .unwrap();
    assert_eq!(path.count_at(0.0).unwrap(), 0);
    assert_eq!(path.count_at(1.0).unwrap(), 2);
    assert_eq!(path.count_at(0.999).unwrap(), 1);
    assert_eq!(path.aggregate_at(0.0).unwrap().to_bits(), 0.0f64.to_bits());
    assert_eq!(path.aggregate_at(1.2).unwrap(), 5.0);
    assert!(matches!(
        path.count_at(2.5),
        Err(Error::OutOfHorizon { .. })
    ));
    assert!(path.count_at(-0.1).is_err());
}

#[test]
fn invalid_paths_are_rejected() {
    let k = ProcessKind::Cpp;
    assert!(RiskPath::new(1.0, vec![0.5, 0.5], vec![1.0, 1.0], 1.0, k).is_err());
    assert!(RiskPath::new(1.0, vec![0.5, 1.5], vec![1.0, 1.0], 1.0, k).is_err());
    assert!(RiskPath::new(1.0, vec![0.5], vec![0.0], 1.0, k).is_err());
    assert!(RiskPath::new(1.0, vec![0.5], vec![], 1.0, k).is_err());
    assert!(RiskPath::new(0.0, vec![], vec![], 1.0, k).is_err());
    assert!(RiskPath::new(1.0, vec![0.0], vec![1.0], 1.0, k).is_err());
}

#[test]
fn degenerate_mixing_is_bitwise_cpp() {
    let mixing = MixingLaw::degenerate(1.7).unwrap();
    let claims = ClaimLaw::exponential(1.0).unwrap();
    for seed in 0..50 {
        let mut a = PathStreams::from_seed(seed);
        let mut b = PathStreams::from_seed(seed);
        let cmpp = simulate_cmpp_path(&mixing, &claims, 5.0, &mut a, DEFAULT_MAX_EVENTS).unwrap();
        let cpp = simulate_cpp_path(1.7, &claims, 5.0, &mut b, DEFAULT_MAX_EVENTS).unwrap();
        assert_eq!(cmpp.theta(), 1.7);
        assert_eq!(cmpp.arrivals(), cpp.arrivals());
        assert_eq!(cmpp.claims(), cpp.claims());
        assert_eq!(cmpp.kind(), ProcessKind::Cmpp);
    }
}

#[test]
fn ensemble_is_deterministic_per_index() {
    let model = ProcessModel::Cmpp {
        mixing: MixingLaw::gamma(2.0, 1.0).unwrap(),
        claims: ClaimLaw::lognormal(0.0, 0.5).unwrap(),
    };
    let a = model
        .simulate_ensemble(2.0, 500, 42, Domain::Test, DEFAULT_MAX_EVENTS)
        .unwrap();
    let b = model
        .simulate_ensemble(2.0, 500, 42, Domain::Test, DEFAULT_MAX_EVENTS)
        .unwrap();
    assert_eq!(a, b);
    // Path i does not depend on the ensemble size.
    let c = model
        .simulate_ensemble(2.0, 100, 42, Domain::Test, DEFAULT_MAX_EVENTS)
        .unwrap();
    assert_eq!(&a[..100], &c[..]);
    let d = model
        .simulate_ensemble(2.0, 100, 42, Domain::Calibration, DEFAULT_MAX_EVENTS)
        .unwrap();
    assert_ne!(&a[..100], &d[..]);
    assert!(a.iter().all(|p| p.theta() > 0.0));
}

#[test]
fn gamma_mixture_probability_of_no_arrival() {
    let model = ProcessModel::Cmpp {
        mixing: MixingLaw::gamma(2.0, 1.0).unwrap(),
        claims: unit_claims(),
    };
    let paths = model
        .simulate_ensemble(1.0, 100_000, 5, Domain::Test, DEFAULT_MAX_EVENTS)
        .unwrap();
    let hits: Vec<f64> = paths
        .iter()
        .map(|p| (p.count_at(1.0).unwrap() == 0) as u8 as f64)
        .collect();
    let (p, _) = mean_and_se(&hits);
    let se = (0.25f64 * 0.75 / hits.len() as f64).sqrt();
    assert!((p - 0.25).abs() <= 4.0 * se, "P(N1=0) = {p}");
}

#[test]
fn increment_covariance_matches_mixing_variance() {
    // Cov(N_1, N_2 − N_1) = s(t−s)·Var(Θ) = 1·1·2 for Gamma(2,1).
    let model = ProcessModel::Cmpp {
        mixing: MixingLaw::gamma(2.0, 1.0).unwrap(),
        claims: unit_claims(),
    };
    let n = 200_000;
    let paths = model
        .simulate_ensemble(2.0, n, 9, Domain::Test, DEFAULT_MAX_EVENTS)
        .unwrap();
    let grid = TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
    let incs: Vec<Vec<f64>> = paths
        .iter()
        .map(|p| increments(p, &grid, Observable::Count).unwrap())
        .collect();
    let a: Vec<f64> = incs.iter().map(|v| v[0]).collect();
    let b: Vec<f64> = incs.iter().map(|v| v[1]).collect();
    let (ma, _) = mean_and_se(&a);
    let (mb, _) = mean_and_se(&b);
    let products: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let (cov, se) = mean_and_se(&products);
    assert!((cov - 2.0).abs() <= 4.0 * se, "cov {cov} ± {se}");
}

#[test]
fn renewal_with_exponential_gaps_has_poisson_mean() {
    let model = ProcessModel::Renewal {
        interarrival: ClaimLaw::exponential(2.0).unwrap(),
        claims: unit_claims(),
    };
    let paths = model
        .simulate_ensemble(1.0, 50_000, 3, Domain::Test, DEFAULT_MAX_EVENTS)
        .unwrap();
    let counts: Vec<f64> = paths
        .iter()
        .map(|p| p.count_at(1.0).unwrap() as f64)
        .collect();
    let (m, se) = mean_and_se(&counts);
    assert!((m - 2.0).abs() <= 4.0 * se);
    let var = counts.iter().map(|c| (c - m) * (c - m)).sum::<f64>() / (counts.len() - 1) as f64;
    assert!((var - 2.0).abs() < 0.1, "variance {var}");
}

#[test]
fn coupled_renewal_claims_are_interarrivals() {
    let w = ClaimLaw::exponential(1.0).unwrap();
    let mut s = PathStreams::from_seed(4);
    let path = simulate_coupled_renewal_path(&w, 20.0, &mut s, DEFAULT_MAX_EVENTS).unwrap();
    let mut prev = 0.0;
    for (a, x) in path.arrivals().iter().zip(path.claims()) {
        assert_eq!(*x, a - prev);
        prev = *a;
    }
    assert_eq!(
        path.aggregate_at(20.0).unwrap(),
        path.claims().iter().sum::<f64>()
    );
}

#[test]
fn paths_csv_has_one_row_per_event() {
    let model = ProcessModel::Cpp {
        theta: 1.0,
        claims: unit_claims(),
    };
    let paths = model
        .simulate_ensemble(1.0, 50, 1, Domain::Test, DEFAULT_MAX_EVENTS)
        .unwrap();
    let mut buf = Vec::new();
    cmpplab_core::process::write_paths_csv(&paths, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows = text.lines().count() - 1;
    let expected: usize = paths.iter().map(|p| p.len().max(1)).sum();
    assert_eq!(rows, expected);
    assert!(text.starts_with("path_id,theta,arrival,claim\n"));
}

fn any_path_params() -> impl Strategy<Value = (u64, f64, f64)> {
    (any::<u64>(), 0.1f64..20.0, 0.1f64..10.0)
}

proptest! {
    #[test]
    fn jump_structure_and_telescoping((seed, theta, horizon) in any_path_params()) {
        let claims = ClaimLaw::exponential(1.5).unwrap();
        let mut s = PathStreams::from_seed(seed);
        let path = simulate_cpp_path(theta, &claims, horizon, &mut s, DEFAULT_MAX_EVENTS).unwrap();
        let arr = path.arrivals();
        prop_assert!(arr.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(arr.iter().all(|&a| a > 0.0 && a <= horizon));
        prop_assert!(path.claims().iter().all(|&x| x > 0.0));
        let min_gap = arr
            .iter()
            .scan(0.0, |prev, &a| { let g = a - *prev; *prev = a; Some(g) })
            .fold(f64::INFINITY, f64::min);
        for (k, &t) in arr.iter().enumerate() {
            let eps = 0.5 * min_gap;
            let jump = path.aggregate_at(t).unwrap() - path.aggregate_at(t - eps).unwrap();
            let expected = path.claims()[k];
            prop_assert!((jump - expected).abs() <= 1e-12 * (1.0 + path.aggregate_at(t).unwrap()));
            prop_assert_eq!(path.count_at(t).unwrap(), k + 1);
        }
        let grid = TimeGrid::new(vec![0.0, horizon / 3.0, horizon / 2.0, horizon]).unwrap();
        for which in [Observable::Count, Observable::Aggregate] {
            let inc = increments(&path, &grid, which).unwrap();
            prop_assert!(inc.iter().all(|&d| d >= 0.0));
            let total: f64 = inc.iter().sum();
            let last = match which {
                Observable::Count => path.count_at(horizon).unwrap() as f64,
                Observable::Aggregate => path.aggregate_at(horizon).unwrap(),
            };
            prop_assert!((total - last).abs() <= 1e-9 * (1.0 + last));
        }
        let single = TimeGrid::new(vec![0.0, horizon]).unwrap();
        prop_assert_eq!(
            increments(&path, &single, Observable::Count).unwrap(),
            vec![path.count_at(horizon).unwrap() as f64]
        );
    }

    #[test]
    fn unit_claims_make_aggregate_equal_count(seed in any::<u64>(), t in 0.0f64..3.0) {
        let mixing = MixingLaw::gamma(2.0, 1.0).unwrap();
        let mut s = PathStreams::from_seed(seed);
        let path = simulate_cmpp_path(&mixing, &unit_claims(), 3.0, &mut s, DEFAULT_MAX_EVENTS).unwrap();
        prop_assert_eq!(path.aggregate_at(t).unwrap(), path.count_at(t).unwrap() as f64);
    }
}
