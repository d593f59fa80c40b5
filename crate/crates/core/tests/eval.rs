use mare_forge::arma::{simulate_base_process, ArmaModel};
use mare_forge::eval::{
    autocorrelation, score_autocorrelation, score_mare, score_report, score_second_difference, Aggregation, Curvature,
    ScoreInputs,
};
use proptest::prelude::*;

#[test]
fn iid_scenarios_against_ar1_history() {
    let reference = simulate_base_process(&ArmaModel::new(vec![0.8], vec![], 0.6), 200_000, 1);
    let n = 5000;
    let x = vec![100.0; n];
    let scenarios: Vec<Vec<f64>> = (0..20)
        .map(|k| {
            simulate_base_process(&ArmaModel::white_noise(), n, 100 + k)
                .into_iter()
                .map(|e| 100.0 + e)
                .collect()
        })
        .collect();
    let p = 5;
    let want = (1..=p).map(|j| 0.8f64.powi(2 * j as i32)).sum::<f64>().sqrt();
    let got = score_autocorrelation(&scenarios, &x, &reference, p, Aggregation::Rms).unwrap();
    assert!((got - want).abs() < 0.02, "{got} vs {want}");
}

#[test]
fn autocorrelation_of_a_known_sequence() {
    // alternating signs: centered series ±1, ρ(1) = -1, ρ(2) = 1
    let e: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 3.0 } else { 1.0 }).collect();
    let rho = autocorrelation(&e, 2).unwrap();
    assert!((rho[0] + 1.0).abs() < 1e-12);
    assert!((rho[1] - 1.0).abs() < 1e-12);
}

#[test]
fn sum_aggregation_scales_with_the_root_of_m() {
    let x = vec![10.0, 20.0, 40.0];
    let s = vec![vec![11.0, 22.0, 44.0]; 4];
    let rms = score_mare(&s, &x, 0.05, Aggregation::Rms).unwrap();
    let sum = score_mare(&s, &x, 0.05, Aggregation::Sum).unwrap();
    assert!((rms - 5.0).abs() < 1e-9);
    assert!((sum - 2.0 * rms).abs() < 1e-9);
}

#[test]
fn signed_and_absolute_curvature_differ_on_zigzags() {
    let zig = vec![vec![0.0, 2.0, 0.0, 2.0, 0.0]];
    let flat = [1.0; 5];
    let abs = score_second_difference(&zig, &flat, Curvature::Absolute, Aggregation::Rms).unwrap();
    let signed = score_second_difference(&zig, &flat, Curvature::Signed, Aggregation::Rms).unwrap();
    assert!((abs - 4.0).abs() < 1e-12);
    assert!((signed - 4.0 / 3.0).abs() < 1e-12);
}

#[test]
fn report_combines_the_scores() {
    let x = vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0];
    let hist = vec![1.0, -1.0, 2.0, 0.5, -0.5, 1.5, -2.0, 0.0];
    let s = vec![vec![11.0, 19.0, 33.0, 41.0, 48.0, 61.0], vec![9.0, 21.0, 29.0, 38.0, 52.0, 59.0]];
    let reference = [5.0, 7.0, 6.0, 9.0, 4.0];
    let inputs = ScoreInputs {
        scenarios: &s,
        x: &x,
        r_tilde: 0.05,
        input_errors: &hist,
        reference: &reference,
    };
    let r = score_report(inputs, "iid", 2, [1.0, 2.0, 0.5], Aggregation::Rms, Curvature::Absolute).unwrap();
    assert!((r.composite - (r.s_mare + 2.0 * r.s_autocorr + 0.5 * r.s_second_diff)).abs() < 1e-12);
    assert_eq!((r.m, r.n_t), (2, 6));
    assert!(score_report(inputs, "iid", 2, [1.0, -1.0, 0.0], Aggregation::Rms, Curvature::Absolute).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn autocorrelation_is_scale_and_shift_invariant(
        e in prop::collection::vec(-10.0f64..10.0, 12..60),
        c in 0.1f64..50.0,
        shift in -100.0f64..100.0,
    ) {
        let var = {
            let m = e.iter().sum::<f64>() / e.len() as f64;
            e.iter().map(|v| (v - m).powi(2)).sum::<f64>()
        };
        prop_assume!(var > 1e-6);
        let a = autocorrelation(&e, 4).unwrap();
        let scaled: Vec<f64> = e.iter().map(|v| c * v + shift).collect();
        let b = autocorrelation(&scaled, 4).unwrap();
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn scores_ignore_scenario_order(
        rows in prop::collection::vec(prop::collection::vec(1.0f64..100.0, 8), 2..6),
        rot in 0usize..6,
    ) {
        let x = vec![50.0; 8];
        let hist: Vec<f64> = (0..30).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let mut turned = rows.clone();
        turned.rotate_left(rot % rows.len());
        for agg in [Aggregation::Rms, Aggregation::Sum] {
            let a = score_mare(&rows, &x, 0.1, agg).unwrap();
            let b = score_mare(&turned, &x, 0.1, agg).unwrap();
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + a));
            let a = score_second_difference(&rows, &hist, Curvature::Absolute, agg).unwrap();
            let b = score_second_difference(&turned, &hist, Curvature::Absolute, agg).unwrap();
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + a));
        }
    }
}
