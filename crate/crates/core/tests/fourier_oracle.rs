use kac_core::fourier::{
    integrate_ode, integrate_ode_at, wild_product, wild_series_eval, wild_terms, SolverConfig,
};
use kac_core::{CharGrid64, InitialLaw};
use num_complex::Complex64;

fn rademacher() -> CharGrid64 {
    let cfg = SolverConfig::default();
    CharGrid64::from_law(&InitialLaw::rademacher(1.0), 10.0, cfg.n_points).unwrap()
}

fn maxwellian(grid: &CharGrid64) -> CharGrid64 {
    CharGrid64::from_fn(grid.xi_max(), grid.n_points(), |x| {
        Complex64::new((-x * x / 2.0).exp(), 0.0)
    })
    .unwrap()
}

#[test]
fn rademacher_t1_matches_golden_file() {
    // golden values from an independent solver: 4001-point grid, cubic
    // splines, full-period 512-node rule, step 0.005
    let text = include_str!("fixtures/rademacher_t1_golden.csv");
    let out = integrate_ode(&rademacher(), 1.0, 0.01, 256).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(2) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let got = out.eval(cols[0]);
        assert!(
            (got.re - cols[1]).abs() < 1e-7,
            "xi = {}: {} vs {}",
            cols[0],
            got.re,
            cols[1]
        );
        assert!(got.im.abs() < 1e-15);
        rows += 1;
    }
    assert_eq!(rows, 41);
}

#[test]
fn rademacher_square_is_bessel() {
    // cos ∘ cos (ξ) = J_0(√2 ξ); reference values from a 30-digit quadrature
    let r = rademacher();
    let p = wild_product(&r, &r, 256).unwrap();
    for (xi, want) in [
        (1.0, 0.559_134_144_418_979_9),
        (2.0, -0.196_548_095_270_468_2),
    ] {
        assert!((p.eval(xi).re - want).abs() < 1e-8);
    }
}

#[test]
fn series_and_ode_agree_over_time() {
    let cfg = SolverConfig::default();
    let r = rademacher();
    let state = wild_terms(&r, cfg.wild_terms, cfg.theta_nodes).unwrap();
    let times = [0.5, 1.0, 2.0];
    let ode = integrate_ode_at(&r, &times, cfg.step, cfg.theta_nodes).unwrap();
    for (&t, o) in times.iter().zip(&ode) {
        let s = wild_series_eval(&state, t).unwrap();
        let sup = s.grid.sup_distance(o).unwrap();
        // at ξ = 0 the gap is the omitted mass itself; 1e−9 covers RK4 error
        assert!(
            sup <= 1e-4f64.max(s.truncation_bound) + 1e-9,
            "t = {t}: {sup}"
        );
    }
}

#[test]
fn solutions_stay_characteristic_functions() {
    let law = InitialLaw::two_point(-1.0, 3.0, 0.7);
    let cfg = SolverConfig::default();
    let phi0 = CharGrid64::from_law(&law, cfg.resolve_xi_max(&law).unwrap(), 513).unwrap();
    let m2 = law.second_moment();
    let times = [0.25, 1.0, 3.0];
    for g in integrate_ode_at(&phi0, &times, 0.02, cfg.theta_nodes).unwrap() {
        assert!(g.max_modulus() <= 1.0 + 1e-9);
        assert_eq!(g.values()[0], Complex64::new(1.0, 0.0));
        for xi in [0.3, 1.7, 4.4] {
            assert!((g.eval(-xi) - g.eval(xi).conj()).norm() < 1e-15);
        }
        assert!((g.second_moment() / m2 - 1.0).abs() < 1e-3);
    }
}

#[test]
fn long_time_limit_approaches_maxwellian_at_rate_one_quarter() {
    // The slowest nontrivial mode of the linearised collision operator on
    // even moments decays like e^{−(1−2α_4)t} = e^{−t/4}; for Rademacher data
    // the fourth cumulant −2e^{−t/4} dominates the distance, which is
    // therefore ≈ 0.02 at t = 10 and crosses 1e−3 only near t ≈ 21.
    let r = rademacher();
    let g = maxwellian(&r);
    let times = [10.0, 16.0, 22.0];
    let out = integrate_ode_at(&r, &times, 0.05, 256).unwrap();
    let d: Vec<f64> = out.iter().map(|o| o.sup_distance(&g).unwrap()).collect();
    assert!(d[0] > 0.01 && d[0] < 0.03, "{d:?}");
    assert!(d[2] < 1e-3, "{d:?}");
    let rate = (d[1] / d[2]).ln() / 6.0;
    assert!((rate - 0.25).abs() < 0.03, "rate {rate}");
}
