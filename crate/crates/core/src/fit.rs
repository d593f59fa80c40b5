//! Conditional beta laws of the error given the input level.
//!
//! For each distinct input level `x` a window holding a fraction `a` of the
//! data on each side (by empirical CDF rank) is collected. The window's
//! errors give the location and scale of a four-parameter beta law, clamped
//! so that `x + error` stays in `[0, cap]`, and the shapes follow from the
//! method of moments.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{sorted_view, PairedSeries};
use crate::error::{Error, Result};
use crate::special::{beta_reg, beta_reg_inv};

/// Default window fraction.
pub const DEFAULT_A: f64 = 0.05;

/// Floor on the normalized variance relative to its upper limit `m(1-m)`
/// used by the fallback path; keeps `alpha + beta` below about 1000.
const FALLBACK_MIN_VAR_RATIO: f64 = 1e-3;
/// Shrink factor applied to an infeasible normalized variance.
const FALLBACK_SHRINK: f64 = 0.99;
const FALLBACK_MIN_MEAN: f64 = 1e-6;

/// Beta law on `[l, l + s]` with shapes `alpha`, `beta`.
///
/// `s == 0` is a point mass at `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
    pub l: f64,
    pub s: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64, l: f64, s: f64) -> Self {
        Self { alpha, beta, l, s }
    }

    pub fn point_mass(l: f64) -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            l,
            s: 0.0,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.s <= 0.0
    }

    pub fn shape_mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn mean(&self) -> f64 {
        self.l + self.s * self.shape_mean()
    }

    pub fn variance(&self) -> f64 {
        let ab = self.alpha + self.beta;
        self.s * self.s * self.alpha * self.beta / (ab * ab * (ab + 1.0))
    }

    pub fn cdf(&self, e: f64) -> f64 {
        if self.is_degenerate() {
            return if e >= self.l { 1.0 } else { 0.0 };
        }
        beta_reg(self.alpha, self.beta, (e - self.l) / self.s)
    }

    /// Quantile mapped onto `[l, l + s]`; `u = 0` gives `l` and `u = 1` gives `l + s`.
    pub fn quantile(&self, u: f64) -> f64 {
        if self.is_degenerate() {
            return self.l;
        }
        if u >= 1.0 {
            return self.l + self.s;
        }
        self.l + self.s * beta_reg_inv(self.alpha, self.beta, u)
    }

    pub fn pdf(&self, e: f64) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        let t = (e - self.l) / self.s;
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        let ln_b = statrs::function::beta::ln_beta(self.alpha, self.beta);
        ((self.alpha - 1.0) * t.ln() + (self.beta - 1.0) * (1.0 - t).ln() - ln_b).exp() / self.s
    }
}

/// One estimation window over the x-sorted data.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
    /// Midpoint of `[lo, hi]`.
    pub center: f64,
    /// Positions in the sorted order whose x lies in `[lo, hi]`.
    pub range: Range<usize>,
}

fn ceil_guarded(v: f64) -> f64 {
    (v - 1e-9).ceil()
}

/// Window `[G^-1(G(x) - a), G^-1(G(x) + a)]` of the empirical CDF `G` of
/// `sorted_x`, truncated at the sample boundaries.
pub fn estimation_window(sorted_x: &[f64], x: f64, a: f64) -> Result<Window> {
    let n = sorted_x.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    if !(a > 0.0 && a <= 0.5) {
        return Err(Error::InvalidInput(format!("window fraction a = {a} outside (0, 0.5]")));
    }
    if x < sorted_x[0] || x > sorted_x[n - 1] {
        return Err(Error::Domain(format!(
            "x = {x} outside the sample range [{}, {}]",
            sorted_x[0],
            sorted_x[n - 1]
        )));
    }
    let rank = sorted_x.partition_point(|&v| v <= x) as f64;
    let an = a * n as f64;
    // G^-1(p) = x_(ceil(p n)) with 1-based order statistics, clamped to the sample.
    let order = |k: f64| -> usize { (k.max(1.0).min(n as f64) as usize) - 1 };
    let lo = sorted_x[order(ceil_guarded(rank - an))];
    let hi = sorted_x[order(ceil_guarded(rank + an))];
    let start = sorted_x.partition_point(|&v| v < lo);
    let end = sorted_x.partition_point(|&v| v <= hi);
    if start >= end {
        return Err(Error::InvalidInput(format!("empty estimation window at x = {x}")));
    }
    Ok(Window {
        lo,
        hi,
        center: 0.5 * (lo + hi),
        range: start..end,
    })
}

fn location_from_extremes(min: f64, max: f64, x: f64, cap: f64) -> (f64, f64) {
    let l = min.max(-x).min(0.0);
    let upper = (cap - x - l).max(0.0);
    let s = (max.min(cap - x) - l).clamp(0.0, upper);
    (l, s)
}

/// Location `l` and scale `s` from a window sample, clamped so the support
/// `[x + l, x + l + s]` stays inside `[0, cap]`.
pub fn fit_location(sample: &[f64], x: f64, cap: f64) -> Result<(f64, f64)> {
    if sample.is_empty() {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    if !(0.0..=cap).contains(&x) {
        return Err(Error::Domain(format!("x = {x} outside [0, {cap}]")));
    }
    let min = sample.iter().copied().fold(f64::INFINITY, f64::min);
    let max = sample.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(location_from_extremes(min, max, x, cap))
}

/// Method-of-moments shapes for a beta law on `[l, l + s]` matching `mean`
/// and (population) `var`.
pub fn shape_from_moments(mean: f64, var: f64, l: f64, s: f64) -> Result<(f64, f64)> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("scale must be positive, got {s}")));
    }
    if !(var > 0.0) {
        return Err(Error::Domain(format!("sample variance must be positive, got {var}")));
    }
    let m = (mean - l) / s;
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::Domain(format!(
            "sample mean {mean} not strictly inside the support [{l}, {}]",
            l + s
        )));
    }
    let v = var / (s * s);
    let limit = m * (1.0 - m);
    if v >= limit {
        return Err(Error::IncompatibleVariance { m, v, limit });
    }
    let k = limit / v - 1.0;
    Ok((m * k, (1.0 - m) * k))
}

fn mean_var(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Shapes from a sample's mean and population variance.
pub fn fit_shape_moments(sample: &[f64], l: f64, s: f64) -> Result<(f64, f64)> {
    if sample.is_empty() {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    let (mean, var) = mean_var(sample);
    shape_from_moments(mean, var, l, s)
}

/// Summary statistics of one window's errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub var: f64,
}

impl WindowSummary {
    pub fn of(sample: &[f64]) -> Self {
        let (mean, var) = mean_var(sample);
        Self {
            count: sample.len(),
            min: sample.iter().copied().fold(f64::INFINITY, f64::min),
            max: sample.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            var,
        }
    }

    /// Beta law for input level `x` from this window. Returns the law and
    /// whether the moment fallback was needed.
    pub fn params_for(&self, x: f64, cap: f64) -> (BetaParams, bool) {
        let (l, s) = location_from_extremes(self.min, self.max, x, cap);
        if s <= 1e-12 * cap {
            return (BetaParams::point_mass(l), self.min != self.max);
        }
        match shape_from_moments(self.mean, self.var, l, s) {
            Ok((alpha, beta)) => (BetaParams::new(alpha, beta, l, s), false),
            Err(_) => {
                let m = ((self.mean - l) / s).clamp(FALLBACK_MIN_MEAN, 1.0 - FALLBACK_MIN_MEAN);
                let limit = m * (1.0 - m);
                let mut v = self.var / (s * s);
                if v >= limit {
                    v = FALLBACK_SHRINK * limit;
                }
                let v = v.max(FALLBACK_MIN_VAR_RATIO * limit);
                let k = limit / v - 1.0;
                (BetaParams::new(m * k, (1.0 - m) * k, l, s), true)
            }
        }
    }
}

/// Fitted law at one window center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub x_bar: f64,
    #[serde(flatten)]
    pub params: BetaParams,
    pub window: WindowSummary,
    /// The moment equations had no admissible solution and were relaxed.
    #[serde(default)]
    pub fallback: bool,
}

/// Conditional beta laws indexed by window center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub cap: f64,
    pub a: f64,
    /// Sorted by `x_bar`.
    pub levels: Vec<Level>,
}

impl FittedModel {
    /// Level whose window center is closest to `x` (the lower one on ties).
    pub fn nearest_level(&self, x: f64) -> &Level {
        let i = self.levels.partition_point(|lv| lv.x_bar < x);
        if i == 0 {
            return &self.levels[0];
        }
        if i == self.levels.len() {
            return &self.levels[i - 1];
        }
        let (below, above) = (&self.levels[i - 1], &self.levels[i]);
        if x - below.x_bar <= above.x_bar - x {
            below
        } else {
            above
        }
    }

    /// Estimated law for input level `x`: the nearest window's statistics,
    /// with location and scale clamped for `x` itself.
    pub fn params_at(&self, x: f64) -> BetaParams {
        self.nearest_level(x).window.params_for(x, self.cap).0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        if m.levels.is_empty() {
            return Err(Error::InvalidInput("fitted model has no levels".into()));
        }
        Ok(m)
    }
}

/// Sorted `(x, error)` pairs.
fn sort_pairs(x: &[f64], eps: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let perm = sorted_view(x);
    (perm.iter().map(|&i| x[i]).collect(), perm.iter().map(|&i| eps[i]).collect())
}

/// Fits a conditional beta law for every distinct input level.
pub fn fit_all(series: &PairedSeries, a: f64) -> Result<FittedModel> {
    fit_pairs(series.x(), &series.errors(), series.cap(), a)
}

fn fit_pairs(x: &[f64], eps: &[f64], cap: f64, a: f64) -> Result<FittedModel> {
    let n = x.len();
    if a < 2.0 / n as f64 || a > 0.5 {
        return Err(Error::InvalidInput(format!(
            "window fraction a = {a} outside [2/n, 0.5] for n = {n}"
        )));
    }
    let (xs, es) = sort_pairs(x, eps);
    let mut distinct = xs.clone();
    distinct.dedup();

    let fitted: Vec<Level> = distinct
        .par_iter()
        .map(|&x| {
            let w = estimation_window(&xs, x, a).map_err(|e| Error::LevelFit {
                level: x,
                source: Box::new(e),
            })?;
            let window = WindowSummary::of(&es[w.range.clone()]);
            let (params, fallback) = window.params_for(w.center, cap);
            Ok(Level {
                x_bar: w.center,
                params,
                window,
                fallback,
            })
        })
        .collect::<Result<_>>()?;

    let mut levels: Vec<Level> = Vec::with_capacity(fitted.len());
    for lv in fitted {
        if levels.last().is_none_or(|p| p.x_bar != lv.x_bar) {
            levels.push(lv);
        }
    }
    Ok(FittedModel { cap, a, levels })
}

/// Result of choosing the window fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ASelection {
    pub best: f64,
    /// `(a, D^2(a))` for every candidate, in input order.
    pub curve: Vec<(f64, f64)>,
}

/// Squared L2 distance between the empirical joint density of `(x, error)`
/// and the fitted one, on a histogram grid of `ceil(sqrt(n))` bins per axis
/// over `[0, cap] x [-cap, cap]`.
///
/// The fitted density in an x-bin is the empirical x-histogram times the
/// average conditional law of the points falling in that bin. Evaluated on
/// the data the model was fitted to, this favours the smallest windows; see
/// [`select_a`] for the cross-fitted version.
pub fn density_discrepancy(series: &PairedSeries, model: &FittedModel) -> f64 {
    discrepancy_pairs(series.x(), &series.errors(), series.cap(), model)
}

fn discrepancy_pairs(x: &[f64], eps: &[f64], cap: f64, model: &FittedModel) -> f64 {
    let n = x.len();
    let bins = (n as f64).sqrt().ceil() as usize;
    let dx = cap / bins as f64;
    let de = 2.0 * cap / bins as f64;
    let bin_of = |v: f64, lo: f64, w: f64| -> usize { (((v - lo) / w).floor().max(0.0) as usize).min(bins - 1) };

    let mut observed = vec![0.0; bins * bins];
    let mut expected = vec![0.0; bins * bins];
    for (&x, &e) in x.iter().zip(eps) {
        let bx = bin_of(x, 0.0, dx);
        observed[bx * bins + bin_of(e, -cap, de)] += 1.0;

        let p = model.params_at(x);
        let row = &mut expected[bx * bins..(bx + 1) * bins];
        if p.is_degenerate() {
            row[bin_of(p.l, -cap, de)] += 1.0;
            continue;
        }
        let first = bin_of(p.l, -cap, de);
        let last = bin_of(p.l + p.s, -cap, de);
        let mut prev = 0.0;
        for (b, slot) in row.iter_mut().enumerate().take(last + 1).skip(first) {
            let c = if b == last {
                1.0
            } else {
                p.cdf(-cap + (b + 1) as f64 * de)
            };
            *slot += c - prev;
            prev = c;
        }
    }
    let norm = (n as f64).powi(2) * dx * de;
    observed
        .iter()
        .zip(&expected)
        .map(|(o, e)| (o - e) * (o - e))
        .sum::<f64>()
        / norm
}

/// Two-fold cross-fitted discrepancy: fit on the even-indexed pairs and
/// score on the odd ones, then the reverse, and average.
pub fn cross_fitted_discrepancy(series: &PairedSeries, a: f64) -> Result<f64> {
    let x = series.x();
    let eps = series.errors();
    let split = |parity: usize| -> (Vec<f64>, Vec<f64>) {
        (0..x.len()).filter(|i| i % 2 == parity).map(|i| (x[i], eps[i])).unzip()
    };
    let folds = [split(0), split(1)];
    let mut total = 0.0;
    for k in 0..2 {
        let (fx, fe) = &folds[k];
        let (ex, ee) = &folds[1 - k];
        let model = fit_pairs(fx, fe, series.cap(), a)?;
        total += discrepancy_pairs(ex, ee, series.cap(), &model);
    }
    Ok(total / 2.0)
}

/// Picks the window fraction minimizing [`cross_fitted_discrepancy`].
pub fn select_a(series: &PairedSeries, candidates: &[f64]) -> Result<ASelection> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no candidate window fractions".into()));
    }
    let n = series.len() as f64;
    if let Some(bad) = candidates.iter().find(|&&a| a < 4.0 / n || a > 0.5) {
        return Err(Error::InvalidInput(format!("candidate a = {bad} outside [4/n, 0.5]")));
    }
    let curve = candidates
        .iter()
        .map(|&a| Ok((a, cross_fitted_discrepancy(series, a)?)))
        .collect::<Result<Vec<_>>>()?;
    let best = curve
        .iter()
        .fold(curve[0], |b, &c| if c.1 < b.1 { c } else { b })
        .0;
    Ok(ASelection { best, curve })
}
