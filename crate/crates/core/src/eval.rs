//! Scores for scenario sets: target MAPE attainment, error autocorrelation
//! and curvature fidelity, and their weighted sum.
//!
//! Each score aggregates one squared deviation per scenario. By default the
//! aggregate is a root mean square over scenarios; [`Aggregation::Sum`]
//! keeps the plain root of the sum.

use serde::{Deserialize, Serialize};

use crate::curvature::second_difference;
use crate::dataio::mape;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Rms,
    Sum,
}

/// How a series' curvature is summarized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Curvature {
    /// Mean absolute second difference.
    #[default]
    Absolute,
    /// Mean signed second difference.
    Signed,
}

fn aggregate(squares: &[f64], agg: Aggregation) -> f64 {
    let total: f64 = squares.iter().sum();
    match agg {
        Aggregation::Rms => (total / squares.len() as f64).sqrt(),
        Aggregation::Sum => total.sqrt(),
    }
}

fn check_scenarios(scenarios: &[Vec<f64>], n: usize) -> Result<()> {
    if scenarios.is_empty() {
        return Err(Error::InvalidInput("no scenarios to score".into()));
    }
    if let Some(k) = scenarios.iter().position(|s| s.len() != n) {
        return Err(Error::InvalidInput(format!(
            "scenario {} has length {}, expected {n}",
            k + 1,
            scenarios[k].len()
        )));
    }
    Ok(())
}

/// Deviation of each scenario's MAPE from `100 r̃`, in percentage points.
pub fn score_mare(scenarios: &[Vec<f64>], x: &[f64], r_tilde: f64, agg: Aggregation) -> Result<f64> {
    check_scenarios(scenarios, x.len())?;
    let squares = scenarios
        .iter()
        .map(|s| Ok((100.0 * r_tilde - mape(x, s)?).powi(2)))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(&squares, agg))
}

/// Sample autocorrelations at lags `1..=max_lag` of the centered series,
/// `ρ(j) = Σ e_{i+j} e_i / ((n - j) σ²)` with `σ²` the population variance.
pub fn autocorrelation(eps: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = eps.len();
    if max_lag >= n {
        return Err(Error::InvalidInput(format!("lag {max_lag} too large for {n} points")));
    }
    let mean = eps.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = eps.iter().map(|e| e - mean).collect();
    let var = c.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if !(var > 0.0) {
        return Err(Error::Domain("zero-variance error series".into()));
    }
    Ok((1..=max_lag)
        .map(|j| c[j..].iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() / ((n - j) as f64 * var))
        .collect())
}

/// Squared distance between the input errors' autocorrelations and each
/// scenario's simulated-error autocorrelations over lags `1..=p`.
pub fn score_autocorrelation(
    scenarios: &[Vec<f64>],
    x: &[f64],
    input_errors: &[f64],
    p: usize,
    agg: Aggregation,
) -> Result<f64> {
    check_scenarios(scenarios, x.len())?;
    let reference = autocorrelation(input_errors, p)?;
    let squares = scenarios
        .iter()
        .map(|s| {
            let eps: Vec<f64> = s.iter().zip(x).map(|(y, x)| y - x).collect();
            let rho = autocorrelation(&eps, p)?;
            Ok(reference.iter().zip(&rho).map(|(a, b)| (a - b).powi(2)).sum())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(aggregate(&squares, agg))
}

pub fn curvature_summary(y: &[f64], kind: Curvature) -> Result<f64> {
    let s = second_difference(y)?;
    let total: f64 = match kind {
        Curvature::Absolute => s.iter().map(|v| v.abs()).sum(),
        Curvature::Signed => s.iter().sum(),
    };
    Ok(total / s.len() as f64)
}

/// Deviation of each scenario's curvature summary from the reference's.
/// The reference may be longer than the scenarios, e.g. the whole
/// historical output series.
pub fn score_second_difference(
    scenarios: &[Vec<f64>],
    reference: &[f64],
    kind: Curvature,
    agg: Aggregation,
) -> Result<f64> {
    check_scenarios(scenarios, scenarios.first().map_or(0, Vec::len))?;
    let d_ref = curvature_summary(reference, kind)?;
    let squares = scenarios
        .iter()
        .map(|s| Ok((d_ref - curvature_summary(s, kind)?).powi(2)))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(&squares, agg))
}

pub fn composite_score(s_mare: f64, s_autocorr: f64, s_second_diff: f64, weights: [f64; 3]) -> f64 {
    weights[0] * s_mare + weights[1] * s_autocorr + weights[2] * s_second_diff
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub s_mare: f64,
    pub s_autocorr: f64,
    pub s_second_diff: f64,
    pub composite: f64,
    pub m: usize,
    pub n_t: usize,
    pub mode: String,
    pub p_lags: usize,
    /// `(w_m, w_ac, w_sd)`
    pub weights: [f64; 3],
    pub aggregation: Aggregation,
    pub curvature: Curvature,
}

/// Inputs shared by the three scores.
#[derive(Debug, Clone, Copy)]
pub struct ScoreInputs<'a> {
    pub scenarios: &'a [Vec<f64>],
    /// SID input series.
    pub x: &'a [f64],
    pub r_tilde: f64,
    /// Historical errors whose autocorrelation is the reference.
    pub input_errors: &'a [f64],
    /// Series whose curvature is the reference, any length `>= 3`.
    pub reference: &'a [f64],
}

pub fn score_report(
    inputs: ScoreInputs<'_>,
    mode: &str,
    p_lags: usize,
    weights: [f64; 3],
    aggregation: Aggregation,
    curvature: Curvature,
) -> Result<ScoreReport> {
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidInput(format!("score weights must be >= 0, got {weights:?}")));
    }
    let s_mare = score_mare(inputs.scenarios, inputs.x, inputs.r_tilde, aggregation)?;
    let s_autocorr = score_autocorrelation(inputs.scenarios, inputs.x, inputs.input_errors, p_lags, aggregation)?;
    let s_second_diff = score_second_difference(inputs.scenarios, inputs.reference, curvature, aggregation)?;
    Ok(ScoreReport {
        s_mare,
        s_autocorr,
        s_second_diff,
        composite: composite_score(s_mare, s_autocorr, s_second_diff, weights),
        m: inputs.scenarios.len(),
        n_t: inputs.x.len(),
        mode: mode.to_string(),
        p_lags,
        weights,
        aggregation,
        curvature,
    })
}

impl ScoreReport {
    /// Fixed-width text table.
    pub fn table(&self) -> String {
        let rows = [
            ("s_mare", self.s_mare),
            ("s_autocorr", self.s_autocorr),
            ("s_second_diff", self.s_second_diff),
            ("composite", self.composite),
        ];
        let mut out = format!(
            "mode={} M={} n_t={} p={} weights={},{},{}\n",
            self.mode, self.m, self.n_t, self.p_lags, self.weights[0], self.weights[1], self.weights[2]
        );
        for (k, v) in rows {
            out.push_str(&format!("{k:<14} {v:>14.6}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mare_score_examples() {
        let x = vec![100.0, 200.0];
        let exact = vec![vec![110.0, 180.0]];
        assert!(score_mare(&exact, &x, 0.1, Aggregation::Rms).unwrap().abs() < 1e-12);
        let off = vec![vec![112.0, 176.0]];
        assert!((score_mare(&off, &x, 0.1, Aggregation::Rms).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn identical_errors_give_zero_autocorrelation_score() {
        let x: Vec<f64> = (0..50).map(|i| 50.0 + (i % 7) as f64).collect();
        let eps: Vec<f64> = (0..50).map(|i| ((i * 31) % 11) as f64 - 5.0).collect();
        let y: Vec<f64> = x.iter().zip(&eps).map(|(a, b)| a + b).collect();
        let s = score_autocorrelation(&[y], &x, &eps, 5, Aggregation::Rms).unwrap();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn constant_errors_are_rejected() {
        assert!(autocorrelation(&[1.0; 10], 2).is_err());
        assert!(autocorrelation(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn second_difference_score_examples() {
        let r: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(score_second_difference(&[r.clone()], &r, Curvature::Absolute, Aggregation::Rms).unwrap(), 0.0);
        let other: Vec<f64> = (0..10).map(|i| 5.0 - 0.5 * i as f64).collect();
        assert_eq!(score_second_difference(&[other], &r, Curvature::Absolute, Aggregation::Rms).unwrap(), 0.0);
    }

    #[test]
    fn composite_examples() {
        assert_eq!(composite_score(1.5, 2.0, 3.0, [1.0, 0.0, 0.0]), 1.5);
        assert_eq!(composite_score(0.0, 0.0, 0.0, [1.0, 2.0, 3.0]), 0.0);
        let a = composite_score(1.0, 2.0, 3.0, [0.5, 1.0, 2.0]);
        let b = composite_score(1.0, 2.0, 3.0, [1.0, 2.0, 4.0]);
        assert!((b - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn aggregation_modes() {
        let x = vec![100.0];
        let sc = vec![vec![102.0], vec![104.0]];
        // scenario MAPEs 2 and 4 against a zero target
        let rms = score_mare(&sc, &x, 0.0, Aggregation::Rms).unwrap();
        let sum = score_mare(&sc, &x, 0.0, Aggregation::Sum).unwrap();
        assert!((rms - 10f64.sqrt()).abs() < 1e-9);
        assert!((sum - 20f64.sqrt()).abs() < 1e-9);
    }
}
