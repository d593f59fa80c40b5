//! Scenario generation.
//!
//! Per SID input the simulation law is fixed once (target MAE, adjusted
//! location and scale). Each scenario then draws a uniform sequence, iid or
//! through the ARMA base process and `Φ`, maps it through the conditional
//! quantiles and optionally smooths the result.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arma::{simulate_with, ArmaModel};
use crate::curvature::{mean_abs_second_difference, smooth, CurvatureSpec};
use crate::dataio::{column_index, format_datetime, parse_timestamp, parse_value, PairedSeries, SidSelection};
use crate::error::{Error, Result};
use crate::fit::{BetaParams, FittedModel};
use crate::rng::substream;
use crate::special::norm_cdf;
use crate::target::{adjust_params, target_function, AdjustedParams, TargetFunction, WeightFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Independent uniforms.
    Iid,
    /// ARMA base process.
    Arma,
    /// ARMA base process followed by curvature smoothing.
    Curvature,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Iid => "iid",
            Mode::Arma => "arma",
            Mode::Curvature => "curvature",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iid" | "a" => Ok(Mode::Iid),
            "arma" | "b" => Ok(Mode::Arma),
            "curvature" | "c" => Ok(Mode::Curvature),
            other => Err(Error::InvalidInput(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRequest {
    pub sid: SidSelection,
    pub r_tilde: f64,
    pub n_scenarios: usize,
    pub mode: Mode,
    pub seed: u64,
    pub curvature: Option<CurvatureSpec>,
}

/// Curvature spec with the historical output series' mean absolute second
/// difference as target and default weights.
pub fn default_curvature_spec(series: &PairedSeries) -> Result<CurvatureSpec> {
    Ok(CurvatureSpec::new(mean_abs_second_difference(series.y())?, series.cap()))
}

/// Solver statistics for one smoothed scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureStats {
    pub objective: f64,
    pub bound: f64,
    pub gap_achieved: f64,
    pub nodes: usize,
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub seed: u64,
    pub mode: Mode,
    pub r_tilde: f64,
    pub target_mape: f64,
    pub n_scenarios: usize,
    pub n_sid: usize,
    pub cap: f64,
    pub plausibility: f64,
    pub r_max: f64,
    pub r_mhat: f64,
    pub arma: Option<ArmaModel>,
    pub curvature: Option<CurvatureSpec>,
    pub model_sha256: String,
    pub weights_sha256: String,
    pub arma_sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub timestamps: Vec<NaiveDateTime>,
    pub x: Vec<f64>,
    /// `scenarios[k][t]`.
    pub scenarios: Vec<Vec<f64>>,
    pub provenance: Provenance,
    pub target: TargetFunction,
    pub adjusted: AdjustedParams,
    /// One entry per scenario in curvature mode, empty otherwise.
    pub curvature_stats: Vec<CurvatureStats>,
}

/// SHA-256 of a value's JSON serialization.
pub fn fingerprint<T: Serialize>(value: &T) -> Result<String> {
    let json = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&json)))
}

/// Error at quantile `u` of a conditional law.
pub fn inverse_conditional_cdf(params: &BetaParams, u: f64) -> f64 {
    params.quantile(u)
}

fn draw_uniforms<R: Rng>(mode: Mode, arma: Option<&ArmaModel>, n: usize, rng: &mut R) -> Vec<f64> {
    match (mode, arma) {
        (Mode::Iid, _) | (_, None) => (0..n).map(|_| rng.random::<f64>()).collect(),
        (_, Some(m)) => simulate_with(m, n, rng).into_iter().map(norm_cdf).collect(),
    }
}

/// Runs the full generation for a request.
pub fn simulate(
    model: &FittedModel,
    weights: &WeightFunction,
    arma: Option<&ArmaModel>,
    req: &SimulationRequest,
) -> Result<ScenarioSet> {
    if req.n_scenarios == 0 {
        return Err(Error::InvalidInput("number of scenarios must be at least 1".into()));
    }
    if req.mode != Mode::Iid && arma.is_none() {
        return Err(Error::InvalidInput(format!("mode {} needs an ARMA model", req.mode)));
    }
    let curvature = match req.mode {
        Mode::Curvature => {
            let spec = req
                .curvature
                .ok_or_else(|| Error::InvalidInput("curvature mode needs a curvature spec".into()))?;
            spec.validate(model.cap)?;
            Some(spec)
        }
        _ => None,
    };
    let target = target_function(weights, &req.sid, model, req.r_tilde)?;
    let adjusted = adjust_params(&target)?;

    let cap = model.cap;
    let x = &req.sid.x;
    let n = x.len();
    let laws: Vec<BetaParams> = x.iter().map(|&xt| adjusted.params_at(xt)).collect();
    let arma = if req.mode == Mode::Iid { None } else { arma };

    let runs: Vec<(Vec<f64>, Option<CurvatureStats>)> = (0..req.n_scenarios as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(req.seed, k);
            let u = draw_uniforms(req.mode, arma, n, &mut rng);
            let y: Vec<f64> = x
                .iter()
                .zip(&laws)
                .zip(&u)
                .map(|((&xt, law), &ut)| (xt + inverse_conditional_cdf(law, ut)).clamp(0.0, cap))
                .collect();
            match curvature {
                Some(spec) => {
                    let eps: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
                    let sol = smooth(x, &eps, &spec, cap)?;
                    let stats = CurvatureStats {
                        objective: sol.objective,
                        bound: sol.bound,
                        gap_achieved: sol.gap_achieved,
                        nodes: sol.nodes,
                        budget_exhausted: sol.budget_exhausted,
                    };
                    Ok((sol.y, Some(stats)))
                }
                None => Ok((y, None)),
            }
        })
        .collect::<Result<_>>()?;

    let (scenarios, stats): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let provenance = Provenance {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: req.seed,
        mode: req.mode,
        r_tilde: req.r_tilde,
        target_mape: 100.0 * req.r_tilde,
        n_scenarios: req.n_scenarios,
        n_sid: n,
        cap,
        plausibility: target.plausibility,
        r_max: target.r_max,
        r_mhat: weights.r_mhat,
        arma: arma.cloned(),
        curvature,
        model_sha256: fingerprint(model)?,
        weights_sha256: fingerprint(weights)?,
        arma_sha256: arma.map(fingerprint).transpose()?,
    };
    Ok(ScenarioSet {
        timestamps: req.sid.timestamps.clone(),
        x: x.clone(),
        scenarios,
        provenance,
        target,
        adjusted,
        curvature_stats: stats.into_iter().flatten().collect(),
    })
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    /// CSV with columns `datetime, x, scenario_1, ..., scenario_M`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_scenario_csv(out, &self.timestamps, &self.x, &self.scenarios)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn provenance_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.provenance)?)
    }
}

/// Writes `datetime, x, scenario_1, ..., scenario_M`.
pub fn write_scenario_csv<W: Write>(
    out: W,
    timestamps: &[NaiveDateTime],
    x: &[f64],
    scenarios: &[Vec<f64>],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["datetime".to_string(), "x".to_string()];
    header.extend((1..=scenarios.len()).map(|k| format!("scenario_{k}")));
    w.write_record(&header)?;
    for t in 0..x.len() {
        let mut rec = vec![format_datetime(&timestamps[t]), x[t].to_string()];
        rec.extend(scenarios.iter().map(|s| s[t].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Scenario CSV read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTable {
    pub timestamps: Vec<NaiveDateTime>,
    pub x: Vec<f64>,
    pub scenarios: Vec<Vec<f64>>,
}

impl ScenarioTable {
    /// Reads the layout written by [`write_scenario_csv`]: every column after
    /// `datetime` and `x` is one scenario.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let it = column_index(&headers, "datetime")?;
        let ix = column_index(&headers, "x")?;
        let cols: Vec<(usize, String)> = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != it && *i != ix)
            .map(|(i, h)| (i, h.to_string()))
            .collect();
        if cols.is_empty() {
            return Err(Error::InvalidInput("scenario file has no scenario columns".into()));
        }
        let mut table = ScenarioTable {
            timestamps: Vec::new(),
            x: Vec::new(),
            scenarios: vec![Vec::new(); cols.len()],
        };
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            table.timestamps.push(parse_timestamp(&rec, it, i + 1)?);
            table.x.push(parse_value(&rec, ix, i + 1, "x")?);
            for (k, (c, name)) in cols.iter().enumerate() {
                table.scenarios[k].push(parse_value(&rec, *c, i + 1, name)?);
            }
        }
        Ok(table)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_scenario_csv(out, &self.timestamps, &self.x, &self.scenarios)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_parsing() {
        assert_eq!("iid".parse::<Mode>().unwrap(), Mode::Iid);
        assert_eq!("ARMA".parse::<Mode>().unwrap(), Mode::Arma);
        assert_eq!("c".parse::<Mode>().unwrap(), Mode::Curvature);
        assert!("x".parse::<Mode>().is_err());
        assert_eq!(serde_json::to_string(&Mode::Curvature).unwrap(), "\"curvature\"");
    }

    #[test]
    fn uniform_quantile() {
        let p = BetaParams::new(1.0, 1.0, -1.0, 2.0);
        assert_eq!(inverse_conditional_cdf(&p, 0.0), -1.0);
        assert_eq!(inverse_conditional_cdf(&p, 1.0), 1.0);
        assert!((inverse_conditional_cdf(&p, 0.75) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn scenario_csv_round_trip() {
        let t0 = chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        let table = ScenarioTable {
            timestamps: (0..3).map(|i| t0 + chrono::TimeDelta::hours(i)).collect(),
            x: vec![1.0, 2.5, 0.0],
            scenarios: vec![vec![1.5, 2.0, 0.1], vec![0.0, 3.25, 0.0]],
        };
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("datetime,x,scenario_1,scenario_2\n"));
        assert_eq!(ScenarioTable::read_csv(&buf[..]).unwrap(), table);
    }

    #[test]
    fn fingerprints_are_stable() {
        let a = fingerprint(&vec![1.0, 2.0]).unwrap();
        assert_eq!(a, fingerprint(&vec![1.0, 2.0]).unwrap());
        assert_ne!(a, fingerprint(&vec![1.0, 2.5]).unwrap());
        assert_eq!(a.len(), 64);
    }
}
