use sdwave_core::dispersion::{critical_speed, CharacteristicContext, SPEED_TOL};
use sdwave_core::model::{BirthFunction, DelayFunction, ModelSpec};
use sdwave_core::pdesim::{
    front_speed, nonexistence_probe, run, simulate_comparison, spreading_probe, Boundary, ComparisonParams, Dynamics,
    HistoryMode, InitialDatum, SimConfig,
};
use sdwave_core::profile::{solve_monotone, SolverConfig, SolverMode};

const SAT: DelayFunction = DelayFunction::SaturatingRational { m: 0.2, big_m: 0.7 };

fn ricker(p: f64, delay: DelayFunction) -> ModelSpec {
    ModelSpec::new(1.0, BirthFunction::ricker(p).unwrap(), delay).unwrap()
}

fn c_star(m: &ModelSpec) -> f64 {
    critical_speed(&CharacteristicContext::from_model(m), SPEED_TOL).unwrap().c_star
}

fn step_speed(m: &ModelSpec, nx: usize, dt_factor: f64) -> f64 {
    let dy = Dynamics::Model(m.clone());
    let coarse = SimConfig::step_run(&dy, -50.0, 350.0, 2000, 80.0, 0.0, m.k_eq());
    let mut cfg = SimConfig::step_run(&dy, -50.0, 350.0, nx, 80.0, 0.0, m.k_eq());
    cfg.dt = coarse.dt * dt_factor;
    let rec = run(&cfg, &dy).unwrap();
    assert!(!rec.near_boundary);
    front_speed(&rec.track, 0.5).unwrap().speed
}

#[test]
fn kpp_front_speed_is_two() {
    let m = ricker(2.0, DelayFunction::Constant { m: 0.0 });
    let s = step_speed(&m, 2000, 1.0);
    assert!((s / 2.0 - 1.0).abs() < 0.05, "{s}");
}

#[test]
fn delayed_front_speed_matches_dispersion_and_refines() {
    for p in [2.0, 3.0] {
        let m = ricker(p, SAT);
        let (a, b) = (step_speed(&m, 2000, 1.0), step_speed(&m, 4000, 0.5));
        assert!((a / c_star(&m) - 1.0).abs() < 0.05, "p={p}: {a}");
        assert!((a / b - 1.0).abs() < 0.01, "p={p}: {a} vs {b}");
    }
}

#[test]
fn step_front_advances_rightward() {
    let m = ricker(2.0, SAT);
    let dy = Dynamics::Model(m.clone());
    let cfg = SimConfig::step_run(&dy, -50.0, 350.0, 2000, 80.0, 0.0, m.k_eq());
    let rec = run(&cfg, &dy).unwrap();
    let xs: Vec<f64> = rec.track.samples.iter().map(|s| s.1).collect();
    assert!(xs.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    assert!(xs[xs.len() - 1] > 100.0);
    assert_eq!(rec.band_violations, 0);
    assert_eq!(rec.clamp_warnings, 0);
}

#[test]
fn profile_datum_keeps_its_shape() {
    let m = ricker(2.0, SAT);
    let c = 1.2 * c_star(&m);
    let sol = solve_monotone(&m, &SolverConfig::for_model(&m, c, SolverMode::Monotone).unwrap()).unwrap();
    let dy = Dynamics::Model(m.clone());
    let mut cfg = SimConfig::step_run(&dy, -60.0, 60.0, 2001, 20.0, 0.0, 1.0);
    cfg.boundary = Boundary::Dirichlet { left: 0.0, right: m.k_eq() };
    cfg.initial = InitialDatum::Profile { grid: sol.profile.clone(), offset: 20.0 };
    cfg.history = HistoryMode::TranslateWithSpeed(c);
    let rec = run(&cfg, &dy).unwrap();
    let xs = rec.xs();
    let mut worst = 0.0f64;
    for s in &rec.snapshots {
        for (x, u) in xs.iter().zip(&s.u) {
            worst = worst.max((u - sol.profile.eval(x - 20.0 + c * s.t)).abs());
        }
    }
    assert!(worst / m.k_eq() < 0.02, "{worst}");
    let fit = front_speed(&rec.track, 0.5).unwrap();
    assert!((fit.speed + c).abs() < 0.02 * c, "{}", fit.speed);
}

#[test]
fn fronts_outrun_subcritical_test_speeds() {
    for (p, frac) in [(2.0, 0.5), (3.0, 0.8)] {
        let m = ricker(p, SAT);
        let cs = c_star(&m);
        let dy = Dynamics::Model(m.clone());
        let cfg = SimConfig::step_run(&dy, -50.0, 350.0, 2000, 80.0, 0.0, m.k_eq());
        let rep = nonexistence_probe(&m, frac * cs, &cfg).unwrap();
        assert!((rep.measured.speed / cs - 1.0).abs() < 0.05, "p={p}: {}", rep.measured.speed);
        assert!(rep.excess > 0.1 * cs);
        assert!(rep.window.0 >= 39.0 && rep.window.1 <= 80.0 + 1e-9);
    }
}

#[test]
fn comparison_system_fills_the_subcritical_cone() {
    let params = ComparisonParams::new(1.0, 2.0, 1.0, 0.0).unwrap();
    let cc = params.spreading_speed().unwrap();
    assert!((cc - 2.0).abs() < 1e-9);
    let dy = Dynamics::Comparison(params);
    let t_end = 160.0;
    let l = 1.3 * cc * t_end + 20.0;
    let mut cfg = SimConfig::step_run(&dy, -l, l, (2.0 * l / 0.2).round() as usize + 1, t_end, 0.0, 1.0);
    cfg.initial = InitialDatum::Bump { center: 0.0, half_width: 2.0, height: 0.5 };
    let rec = simulate_comparison(params, &cfg).unwrap();
    let (lo, hi) = spreading_probe(&rec, 0.9 * cc).unwrap();
    assert!((lo - 1.0).abs() < 0.02 && (hi - 1.0).abs() < 0.02, "{lo} {hi}");
    let (outer_lo, _) = spreading_probe(&rec, 1.2 * cc).unwrap();
    assert!(outer_lo < 1e-6);
}
