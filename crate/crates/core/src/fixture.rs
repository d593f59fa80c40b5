//! Synthetic forecast/actual pairs with a known error law.
//!
//! Forecasts: hourly from 2013-07-01, a smooth AR(2) latent path (double
//! root 0.9, unit variance) mapped to `cap · (0.45 + 0.28 L)`, clamped to
//! `[0, cap]` and rounded to 0.1 MW; roughly 5 % of the hours sit at zero.
//!
//! Errors given the forecast `x` follow Beta(4, 4) on
//! `[-min(x, h), min(cap - x, h)]`, so actuals stay in `[0, cap]`:
//! - `iid-error`: `h = 0.15 cap`, independent uniforms;
//! - `ar1-error`: `h = 0.15 cap`, uniforms `Φ(Z_t)` with `Z` a unit-variance
//!   AR(1) of coefficient 0.8;
//! - `heteroscedastic`: `h(x) = cap (0.03 + 1.2 (x/cap)(1 - x/cap))`,
//!   independent uniforms.
//!
//! Actuals are rounded to 0.1 MW.

use chrono::{NaiveDate, TimeDelta};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataio::PairedSeries;
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::special::{beta_reg_inv, norm_cdf};

pub const FIXTURE_CAP: f64 = 5000.0;
pub const FIXTURE_SHAPE: f64 = 4.0;
pub const AR1_COEF: f64 = 0.8;
const BURN_IN: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureKind {
    IidError,
    Ar1Error,
    Heteroscedastic,
}

impl FixtureKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FixtureKind::IidError => "iid-error",
            FixtureKind::Ar1Error => "ar1-error",
            FixtureKind::Heteroscedastic => "heteroscedastic",
        }
    }
}

impl std::str::FromStr for FixtureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid-error" => Ok(FixtureKind::IidError),
            "ar1-error" => Ok(FixtureKind::Ar1Error),
            "heteroscedastic" => Ok(FixtureKind::Heteroscedastic),
            other => Err(Error::InvalidInput(format!(
                "unknown fixture kind {other:?} (iid-error, ar1-error, heteroscedastic)"
            ))),
        }
    }
}

/// Error half-width at forecast `x`.
pub fn half_width(kind: FixtureKind, x: f64, cap: f64) -> f64 {
    match kind {
        FixtureKind::Heteroscedastic => {
            let r = x / cap;
            cap * (0.03 + 1.2 * r * (1.0 - r))
        }
        _ => 0.15 * cap,
    }
}

/// Support `(l, s)` of the error law at forecast `x`.
pub fn error_support(kind: FixtureKind, x: f64, cap: f64) -> (f64, f64) {
    let h = half_width(kind, x, cap);
    let lo = x.min(h);
    let hi = (cap - x).min(h);
    (-lo, lo + hi)
}

fn round_tenth(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

fn forecasts<R: Rng>(n: usize, cap: f64, rng: &mut R) -> Vec<f64> {
    let (phi1, phi2): (f64, f64) = (1.8, -0.81);
    // stationary variance of the AR(2) per unit innovation variance
    let gamma0 = (1.0 - phi2) / ((1.0 + phi2) * ((1.0 - phi2).powi(2) - phi1 * phi1));
    let sd = 1.0 / gamma0.sqrt();
    let (mut l1, mut l2) = (0.0, 0.0);
    let mut out = Vec::with_capacity(n);
    for t in 0..BURN_IN + n {
        let eta: f64 = StandardNormal.sample(rng);
        let l = phi1 * l1 + phi2 * l2 + sd * eta;
        l2 = l1;
        l1 = l;
        if t >= BURN_IN {
            out.push(round_tenth((cap * (0.45 + 0.28 * l)).clamp(0.0, cap)));
        }
    }
    out
}

fn uniforms<R: Rng>(kind: FixtureKind, n: usize, rng: &mut R) -> Vec<f64> {
    match kind {
        FixtureKind::Ar1Error => {
            let sd = (1.0 - AR1_COEF * AR1_COEF).sqrt();
            let mut z: f64 = StandardNormal.sample(rng);
            (0..n)
                .map(|_| {
                    let u = norm_cdf(z);
                    let eta: f64 = StandardNormal.sample(rng);
                    z = AR1_COEF * z + sd * eta;
                    u
                })
                .collect()
        }
        _ => (0..n).map(|_| rng.random::<f64>()).collect(),
    }
}

/// Generates `n ≥ 100` hourly pairs.
pub fn make_fixture(kind: FixtureKind, n: usize, seed: u64) -> Result<PairedSeries> {
    if n < 100 {
        return Err(Error::InvalidInput(format!("fixture length must be at least 100, got {n}")));
    }
    let cap = FIXTURE_CAP;
    let x = forecasts(n, cap, &mut substream(seed, 0));
    let u = uniforms(kind, n, &mut substream(seed, 1));
    let y: Vec<f64> = x
        .iter()
        .zip(&u)
        .map(|(&xt, &ut)| {
            let (l, s) = error_support(kind, xt, cap);
            let e = l + s * beta_reg_inv(FIXTURE_SHAPE, FIXTURE_SHAPE, ut);
            round_tenth(xt + e).clamp(0.0, cap)
        })
        .collect();
    let t0 = NaiveDate::from_ymd_opt(2013, 7, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid start date");
    let timestamps = (0..n).map(|i| t0 + TimeDelta::hours(i as i64)).collect();
    PairedSeries::new(timestamps, x, y, cap)
}
