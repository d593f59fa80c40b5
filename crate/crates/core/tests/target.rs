mod common;

use mare_forge::dataio::SidSelection;
use mare_forge::fit::{fit_all, BetaParams, FittedModel, Level, WindowSummary};
use mare_forge::fixture::{make_fixture, FixtureKind};
use mare_forge::target::{
    adjust_params, feasible_region, m_max, nu, nu_params, plausibility_score, solve_program, target_function,
    weight_function, SOLVER_TOL,
};
use mare_forge::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn rng(seed: u64) -> rand::rngs::StdRng {
    rand::rngs::StdRng::seed_from_u64(seed)
}

#[test]
fn nu_matches_quadrature() {
    let mut r = rng(11);
    for _ in 0..300 {
        let alpha = 10f64.powf(r.random_range(-0.5..1.5));
        let beta = 10f64.powf(r.random_range(-0.5..1.5));
        let s = r.random_range(0.1..100.0);
        let l = -s * r.random_range(-0.2..1.2);
        let want = common::nu_quadrature(l, s, alpha, beta);
        let got = nu(l, s, alpha, beta);
        assert!(
            (got - want).abs() <= 1e-8 * want,
            "alpha={alpha} beta={beta} l={l} s={s}: {got} vs {want}"
        );
    }
}

#[test]
fn nu_grows_like_the_shape_mean() {
    for (alpha, beta) in [(0.7, 2.0), (3.0, 3.0), (8.0, 1.5)] {
        let l: f64 = -2.5;
        let s = 1e6 * l.abs();
        let ratio = nu(l, s, alpha, beta) * (alpha + beta) / (s * alpha);
        assert!((ratio - 1.0).abs() < 1e-3);
    }
    // zero scale is a point mass at l
    assert_eq!(nu(-4.0, 0.0, 2.0, 2.0), 4.0);
}

#[test]
fn m_max_beats_a_dense_grid() {
    let cap = 100.0;
    let mut r = rng(5);
    for _ in 0..30 {
        let x = r.random_range(0.0..cap);
        let (alpha, beta) = (r.random_range(0.5..6.0), r.random_range(0.5..6.0));
        let top = m_max(x, alpha, beta, cap);
        let mut grid_best: f64 = 0.0;
        for i in 0..=60 {
            let l = -x * i as f64 / 60.0;
            for j in 0..=60 {
                let s = (cap - x - l) * j as f64 / 60.0;
                grid_best = grid_best.max(nu(l, s, alpha, beta));
            }
        }
        assert!(top >= grid_best * (1.0 - 1e-12), "x={x}: {top} < {grid_best}");
        assert!(top <= cap);
    }
}

#[test]
fn program_is_no_farther_than_sampled_curve_points() {
    let series = common::twenty_level_series(4000, 3);
    let model = fit_all(&series, 0.05).unwrap();
    let cap = series.cap();
    let mut r = rng(17);
    for k in 0..20 {
        let x = cap * (k as f64 + 0.5) / 20.0;
        let est = model.params_at(x);
        let top = m_max(x, est.alpha, est.beta, cap);
        let m = top * r.random_range(0.01..1.0);
        let (l, s) = solve_program(x, cap, est.alpha, est.beta, est.l, est.s, m).unwrap();
        assert!((nu(l, s, est.alpha, est.beta) - m).abs() <= SOLVER_TOL * cap);
        assert!((-x..=0.0).contains(&l) && s >= 0.0 && s <= cap - x - l + 1e-9 * cap);
        let d = ((l - est.l).powi(2) + (s - est.s).powi(2)).sqrt();
        let samples = common::curve_samples(x, cap, est.alpha, est.beta, m, 1000, &mut r);
        assert!(samples.len() == 1000);
        for (sl, ss) in samples {
            let ds = ((sl - est.l).powi(2) + (ss - est.s).powi(2)).sqrt();
            assert!(d <= ds + 1e-9 * cap, "level {x}: solver {d} vs sample {ds}");
        }
    }
}

fn uniform_level(x: f64, half: f64) -> Level {
    let window = WindowSummary {
        count: 10,
        min: -half,
        max: half,
        mean: 0.0,
        var: (2.0 * half).powi(2) / 12.0,
    };
    Level {
        x_bar: x,
        params: BetaParams::new(1.0, 1.0, -half, 2.0 * half),
        window,
        fallback: false,
    }
}

#[test]
fn weight_function_on_two_levels() {
    let model = FittedModel {
        cap: 200.0,
        a: 0.5,
        levels: vec![uniform_level(10.0, 2.0), uniform_level(100.0, 2.0)],
    };
    let s = common::series(vec![10.0, 100.0, 10.0, 100.0], vec![11.0, 99.0, 9.0, 101.0], 200.0);
    let w = weight_function(&model, &s).unwrap();
    assert!((w.levels[0].m_hat - 1.0).abs() < 1e-12);
    assert!((w.r_mhat - 0.055).abs() < 1e-12);
    assert!((w.omega_at(10.0) - 1.0 / 0.55).abs() < 1e-10);
    assert!((w.omega_at(100.0) - 1.0 / 5.5).abs() < 1e-10);
}

#[test]
fn weights_average_to_one_and_whole_input_is_fully_plausible() {
    let series = make_fixture(FixtureKind::Ar1Error, 1500, 4).unwrap();
    let model = fit_all(&series, 0.05).unwrap();
    let w = weight_function(&model, &series).unwrap();
    let pos: Vec<f64> = series.x().iter().copied().filter(|&x| x > 0.0).collect();
    let mean = pos.iter().map(|&x| w.omega_at(x)).sum::<f64>() / pos.len() as f64;
    assert!((mean - 1.0).abs() < 1e-9);
    let p = plausibility_score(&w, &SidSelection::whole(&series)).unwrap();
    assert!((p - 1.0).abs() < 1e-9);
}

#[test]
fn feasibility_boundary() {
    let series = make_fixture(FixtureKind::IidError, 1500, 8).unwrap();
    let model = fit_all(&series, 0.05).unwrap();
    let w = weight_function(&model, &series).unwrap();
    let sid = SidSelection::from_range(&series, None, Some(series.timestamps()[71])).unwrap();
    let feas = feasible_region(&w, &sid, &model).unwrap();
    assert!(target_function(&w, &sid, &model, feas.r_max).is_ok());
    let err = target_function(&w, &sid, &model, feas.r_max * (1.0 + 1e-6)).unwrap_err();
    assert!(matches!(err, Error::Infeasible { r_max, .. } if r_max == feas.r_max));
}

#[test]
fn zero_level_keeps_its_estimate() {
    let series = make_fixture(FixtureKind::IidError, 2000, 2).unwrap();
    assert!(series.x().contains(&0.0));
    let model = fit_all(&series, 0.05).unwrap();
    let w = weight_function(&model, &series).unwrap();
    let sid = SidSelection::whole(&series);
    let r_max = feasible_region(&w, &sid, &model).unwrap().r_max;
    for frac in [0.0, 0.1, 0.5, 1.0] {
        let t = target_function(&w, &sid, &model, frac * r_max).unwrap();
        let adj = adjust_params(&t).unwrap();
        assert_eq!(adj.params_at(0.0), model.params_at(0.0));
    }
}

#[test]
fn expected_mare_equals_target() {
    let series = make_fixture(FixtureKind::Ar1Error, 2000, 6).unwrap();
    let model = fit_all(&series, 0.05).unwrap();
    let w = weight_function(&model, &series).unwrap();
    let sid = SidSelection::from_range(&series, Some(series.timestamps()[100]), Some(series.timestamps()[399])).unwrap();
    let r_max = feasible_region(&w, &sid, &model).unwrap().r_max;
    let r = 0.6 * r_max;
    let t = target_function(&w, &sid, &model, r).unwrap();
    assert!((t.expected_mare(&sid) - r).abs() < 1e-12);
    let adj = adjust_params(&t).unwrap();
    let pos: Vec<f64> = sid.x.iter().copied().filter(|&x| x > 0.0).collect();
    let realized = pos.iter().map(|&x| nu_params(&adj.params_at(x)) / x).sum::<f64>() / pos.len() as f64;
    let slack = pos.iter().map(|&x| SOLVER_TOL * model.cap / x).sum::<f64>() / pos.len() as f64;
    assert!((realized - r).abs() <= slack);
}

#[test]
fn model_mare_target_leaves_laws_unchanged() {
    let series = make_fixture(FixtureKind::IidError, 1000, 12).unwrap();
    let model = fit_all(&series, 0.05).unwrap();
    let w = weight_function(&model, &series).unwrap();
    let sid = SidSelection::whole(&series);
    let t = target_function(&w, &sid, &model, w.r_mhat).unwrap();
    let adj = adjust_params(&t).unwrap();
    for lv in &adj.levels {
        assert!((lv.params.l - lv.estimated.l).abs() <= 1e-6 * model.cap);
        assert!((lv.params.s - lv.estimated.s).abs() <= 1e-6 * model.cap);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn nu_is_bounded_and_homogeneous(
        alpha in 0.3f64..20.0,
        beta in 0.3f64..20.0,
        l in -50.0f64..0.0,
        s in 0.0f64..100.0,
        c in 0.1f64..10.0,
    ) {
        let v = nu(l, s, alpha, beta);
        let mean = l + s * alpha / (alpha + beta);
        prop_assert!(v >= mean.abs() - 1e-9);
        prop_assert!(v <= l.abs() + s * alpha / (alpha + beta) + 1e-9);
        let scaled = nu(c * l, c * s, alpha, beta);
        prop_assert!((scaled - c * v).abs() <= 1e-9 * (1.0 + c * v));
    }

    #[test]
    fn program_lands_on_target_inside_box(
        x in 1.0f64..99.0,
        alpha in 0.5f64..8.0,
        beta in 0.5f64..8.0,
        lf in 0.0f64..1.0,
        sf in 0.0f64..1.0,
        mf in 0.0f64..1.0,
    ) {
        let cap = 100.0;
        let l_hat = -x * lf;
        let s_hat = (cap - x - l_hat) * sf;
        let m = m_max(x, alpha, beta, cap) * mf;
        let (l, s) = solve_program(x, cap, alpha, beta, l_hat, s_hat, m).unwrap();
        prop_assert!((nu(l, s, alpha, beta) - m).abs() <= SOLVER_TOL * cap);
        prop_assert!(l >= -x && l <= 0.0);
        prop_assert!(s >= 0.0 && x + l + s <= cap * (1.0 + 1e-12));
    }
}
