use infmodel::fixed_point::{picard_solve, reconstruct_f, stationarity_residual, SolverConfig};
use infmodel::limit::{gamma0, lambda0};
use infmodel::{Error, MortalityModel, Polynomial, Preset, Stage};

#[test]
fn double_well_minima_each_carry_a_profile() {
    let eps = 0.1;
    let cfg = SolverConfig::default();
    let mut lambdas = Vec::new();
    for k in 0..2 {
        let m = MortalityModel::from_preset(Preset::DoubleWell, k).unwrap();
        let sol = picard_solve(&m, eps, &cfg).unwrap();
        let f = reconstruct_f(&sol, &m, 3.0, 4096).unwrap();
        assert!((f.mean() - m.critical_point()).abs() < 0.05);
        assert!(stationarity_residual(&f, sol.lambda, &m, eps).unwrap() < 1e-4);
        assert!((sol.lambda - lambda0(&m)).abs() < 0.05);
        lambdas.push(sol.lambda);
    }
    assert!((lambdas[0] - lambdas[1]).abs() > 0.4);
}

#[test]
fn reflected_rate_flips_gamma() {
    let cfg = SolverConfig::default();
    let m = MortalityModel::from_preset(Preset::CubicPerturbed, 0).unwrap();
    let a = picard_solve(&m, 0.1, &cfg).unwrap();
    let b = picard_solve(&m.reflected(), 0.1, &cfg).unwrap();
    assert!((a.gamma + b.gamma).abs() < 1e-8);
    assert!((a.lambda - b.lambda).abs() < 1e-10);
    assert!((gamma0(&m).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn large_eps_is_refused() {
    let m = MortalityModel::from_preset(Preset::Quadratic, 0).unwrap();
    let err = picard_solve(&m, 0.8, &SolverConfig::default()).unwrap_err();
    assert!(matches!(err, Error::EpsilonTooLarge { stage: Stage::Cap, .. }));
}

#[test]
fn rate_without_a_quadratic_minimum_is_refused() {
    // z^4 has a degenerate minimum: m''(0) = 0
    let m = MortalityModel::new(Polynomial::new(vec![0.0, 0.0, 0.0, 0.0, 1.0]), 0.0);
    assert!(picard_solve(&m, 0.1, &SolverConfig::default()).is_err());
}
