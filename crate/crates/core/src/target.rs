//! From a target MARE to per-level beta laws.
//!
//! The fitted conditional laws give a mean absolute error `m̂(x)` per input
//! level. A weight function spreads a target MARE over the levels, each level
//! gets an MAE target `m̃(x)`, and its location and scale are moved (shapes
//! kept) to the nearest point of the box where the MAE equals the target.
//!
//! Two facts about the MAE `ν(l, s) = E|l + s T|`, `T ~ Beta(α, β)`, drive
//! the numerics: it is convex in `(l, s)` and positively homogeneous of
//! degree one. So its maximum over the feasible box sits at a vertex, and
//! the level curve `ν = m` inside the quadrant `l ≤ 0 ≤ s` is the radial
//! image `m d / ν(d)` of the unit directions `d = (-cos φ, sin φ)`.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{PairedSeries, SidSelection};
use crate::error::{Error, Result};
use crate::fit::{BetaParams, FittedModel};
use crate::special::beta_reg;

/// Absolute tolerance on `ν(l̃, s̃) = m̃`, relative to capacity.
pub const SOLVER_TOL: f64 = 1e-6;

/// Mean absolute value of the beta law `(alpha, beta)` on `[l, l + s]`.
pub fn nu(l: f64, s: f64, alpha: f64, beta: f64) -> f64 {
    if s <= 0.0 {
        return l.abs();
    }
    let mu = alpha / (alpha + beta);
    let t0 = -l / s;
    if t0 <= 0.0 || t0 >= 1.0 {
        return (l + s * mu).abs();
    }
    let v = l * (1.0 - 2.0 * beta_reg(alpha, beta, t0)) + s * mu * (1.0 - 2.0 * beta_reg(alpha + 1.0, beta, t0));
    v.max(0.0)
}

pub fn nu_params(p: &BetaParams) -> f64 {
    nu(p.l, p.s, p.alpha, p.beta)
}

fn box_vertices(x: f64, cap: f64) -> [(f64, f64); 4] {
    [(-x, 0.0), (-x, cap), (0.0, 0.0), (0.0, cap - x)]
}

/// Largest MAE reachable at input `x` with shapes `(alpha, beta)`, and the
/// box vertex `(l, s)` attaining it.
pub fn m_max_point(x: f64, alpha: f64, beta: f64, cap: f64) -> (f64, (f64, f64)) {
    box_vertices(x, cap)
        .into_iter()
        .map(|(l, s)| (nu(l, s, alpha, beta), (l, s)))
        .fold((f64::NEG_INFINITY, (0.0, 0.0)), |best, c| if c.0 > best.0 { c } else { best })
}

/// Maximum of `ν(l, s; alpha, beta)` over `-x ≤ l ≤ 0`, `0 ≤ s ≤ cap - x - l`.
pub fn m_max(x: f64, alpha: f64, beta: f64, cap: f64) -> f64 {
    m_max_point(x, alpha, beta, cap).0
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if (b - a).abs() < 1e-14 {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Root of `f` on `[a, b]` given opposite signs at the ends.
fn bisect(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if (f(mid) > 0.0) == (fa > 0.0) {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Level curve `ν = m` parameterized by direction angle.
struct LevelCurve {
    m: f64,
    alpha: f64,
    beta: f64,
}

impl LevelCurve {
    fn point(&self, phi: f64) -> (f64, f64) {
        let (dl, ds) = (-phi.cos(), phi.sin());
        let r = self.m / nu(dl, ds, self.alpha, self.beta);
        (r * dl, r * ds)
    }
}

/// Zeros of `h` on `[0, π/2]` for `h` with at most one interior extremum.
fn crossings(h: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let (lo, _) = golden_min(h, 0.0, FRAC_PI_2);
    let (hi, _) = golden_min(&|p| -h(p), 0.0, FRAC_PI_2);
    let mut knots = vec![0.0, lo, hi, FRAC_PI_2];
    knots.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 0.0 {
            continue;
        }
        let (ha, hb) = (h(a), h(b));
        if ha == 0.0 {
            out.push(a);
        }
        if (ha < 0.0 && hb > 0.0) || (ha > 0.0 && hb < 0.0) {
            out.push(bisect(h, a, b));
        }
    }
    out
}

/// Location and scale at input `x` with `ν(l, s; alpha, beta) = m`, inside
/// the box, nearest to `(l_hat, s_hat)`.
pub fn solve_program(x: f64, cap: f64, alpha: f64, beta: f64, l_hat: f64, s_hat: f64, m: f64) -> Result<(f64, f64)> {
    let tol = SOLVER_TOL * cap;
    let fail = |msg: String| Error::Solver { level: x, msg };
    if !(m >= 0.0) {
        return Err(fail(format!("negative target {m}")));
    }
    if (nu(l_hat, s_hat, alpha, beta) - m).abs() <= 1e-12 * cap {
        return Ok((l_hat, s_hat));
    }
    if m == 0.0 {
        return Ok((0.0, 0.0));
    }
    let (top, vertex) = m_max_point(x, alpha, beta, cap);
    if m > top * (1.0 + 1e-9) + 1e-12 * cap {
        return Err(fail(format!("target {m} exceeds the reachable maximum {top}")));
    }
    if m >= top * (1.0 - 1e-9) {
        return Ok(vertex);
    }

    let curve = LevelCurve { m, alpha, beta };
    let slack = 1e-12 * cap;
    let h_low = |p: f64| -curve.point(p).0 - x;
    let h_high = |p: f64| {
        let (l, s) = curve.point(p);
        l + s - (cap - x)
    };
    let feasible = |p: f64| h_low(p) <= slack && h_high(p) <= slack;

    let mut knots = vec![0.0, FRAC_PI_2];
    knots.extend(crossings(&h_low));
    knots.extend(crossings(&h_high));
    knots.sort_by(f64::total_cmp);
    knots.dedup();

    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for w in knots.windows(2) {
        if feasible(0.5 * (w[0] + w[1])) {
            match intervals.last_mut() {
                Some(last) if last.1 == w[0] => last.1 = w[1],
                _ => intervals.push((w[0], w[1])),
            }
        }
    }
    if intervals.is_empty() {
        return Err(fail(format!("no feasible point for target {m}")));
    }

    let dist = |p: f64| {
        let (l, s) = curve.point(p);
        (l - l_hat).powi(2) + (s - s_hat).powi(2)
    };
    let radial = s_hat.max(0.0).atan2((-l_hat).max(0.0));
    let mut best = (f64::NAN, f64::INFINITY);
    for &(a, b) in &intervals {
        const SAMPLES: usize = 128;
        let grid: Vec<f64> = (0..=SAMPLES).map(|k| a + (b - a) * k as f64 / SAMPLES as f64).collect();
        let values: Vec<f64> = grid.iter().map(|&p| dist(p)).collect();
        let k = (0..grid.len()).fold(0, |bk, k| if values[k] < values[bk] { k } else { bk });
        let mut cands = vec![(grid[k], values[k])];
        let lo = grid[k.saturating_sub(1)];
        let hi = grid[(k + 1).min(SAMPLES)];
        if hi > lo {
            cands.push(golden_min(&dist, lo, hi));
        }
        if (a..=b).contains(&radial) {
            let lo = (radial - (b - a) / SAMPLES as f64).max(a);
            let hi = (radial + (b - a) / SAMPLES as f64).min(b);
            cands.push(golden_min(&dist, lo, hi));
        }
        for c in cands {
            if c.1 < best.1 {
                best = c;
            }
        }
    }

    let (l, s) = curve.point(best.0);
    let l = l.clamp(-x, 0.0);
    let s = s.clamp(0.0, (cap - x - l).max(0.0));
    let got = nu(l, s, alpha, beta);
    if (got - m).abs() > tol {
        return Err(fail(format!("reached MAE {got} for target {m}")));
    }
    Ok((l, s))
}

/// Weight attached to one positive input level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightLevel {
    pub x: f64,
    pub m_hat: f64,
    pub omega: f64,
}

/// Estimated weight function over the distinct positive inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightFunction {
    /// Sorted by `x`; zero inputs are not part of the weight function.
    pub levels: Vec<WeightLevel>,
    /// Model-implied MARE `(1/n₊) Σ m̂(x_i)/x_i` over inputs `x_i > 0`.
    pub r_mhat: f64,
    /// Number of input points with `x > 0`.
    pub n_pos: usize,
}

impl WeightFunction {
    /// Weight level nearest to `x`.
    pub fn nearest(&self, x: f64) -> &WeightLevel {
        let i = self.levels.partition_point(|lv| lv.x < x);
        if i == 0 {
            return &self.levels[0];
        }
        if i == self.levels.len() {
            return &self.levels[i - 1];
        }
        let (a, b) = (&self.levels[i - 1], &self.levels[i]);
        if x - a.x <= b.x - x {
            a
        } else {
            b
        }
    }

    pub fn omega_at(&self, x: f64) -> f64 {
        self.nearest(x).omega
    }
}

/// Computes `m̂`, `r_m̂` and `ω̂(x) = m̂(x) / (x r_m̂)` from the fitted laws.
pub fn weight_function(model: &FittedModel, series: &PairedSeries) -> Result<WeightFunction> {
    let mut xs: Vec<f64> = series.x().iter().copied().filter(|&x| x > 0.0).collect();
    if xs.is_empty() {
        return Err(Error::Domain("no positive input values".into()));
    }
    let n_pos = xs.len();
    xs.sort_by(f64::total_cmp);
    let mut counts: Vec<(f64, usize)> = Vec::new();
    for x in xs {
        match counts.last_mut() {
            Some(last) if last.0 == x => last.1 += 1,
            _ => counts.push((x, 1)),
        }
    }
    let m_hats: Vec<f64> = counts.par_iter().map(|&(x, _)| nu_params(&model.params_at(x))).collect();
    let r_mhat = counts
        .iter()
        .zip(&m_hats)
        .map(|(&(x, c), m)| c as f64 * m / x)
        .sum::<f64>()
        / n_pos as f64;
    if !(r_mhat > 0.0) {
        return Err(Error::Domain("all fitted laws are degenerate at zero error".into()));
    }
    let levels = counts
        .iter()
        .zip(m_hats)
        .map(|(&(x, _), m_hat)| WeightLevel {
            x,
            m_hat,
            omega: m_hat / (x * r_mhat),
        })
        .collect();
    Ok(WeightFunction { levels, r_mhat, n_pos })
}

/// Mean of `ω̂` over the positive SID inputs.
pub fn plausibility_score(weights: &WeightFunction, sid: &SidSelection) -> Result<f64> {
    let pos: Vec<f64> = sid.x.iter().copied().filter(|&x| x > 0.0).collect();
    if pos.is_empty() {
        return Err(Error::Domain("SID has no positive input values".into()));
    }
    Ok(pos.iter().map(|&x| weights.omega_at(x)).sum::<f64>() / pos.len() as f64)
}

/// Largest admissible target MARE for a SID.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub plausibility: f64,
    pub r_max: f64,
    /// SID input where the bound binds (`None` when every weight is zero).
    pub binding_x: Option<f64>,
}

/// Per-SID-level quantities shared by the feasibility check and the targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetLevel {
    pub x: f64,
    pub estimated: BetaParams,
    pub m_hat: f64,
    pub m_max: f64,
    /// `ω̂` at this input; zero at `x = 0`.
    pub omega: f64,
    pub m_tilde: f64,
}

fn distinct_sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn sid_levels(weights: &WeightFunction, sid: &SidSelection, model: &FittedModel) -> Vec<TargetLevel> {
    distinct_sorted(&sid.x)
        .par_iter()
        .map(|&x| {
            let est = model.params_at(x);
            TargetLevel {
                x,
                estimated: est,
                m_hat: nu_params(&est),
                m_max: m_max(x, est.alpha, est.beta, model.cap),
                omega: if x > 0.0 { weights.omega_at(x) } else { 0.0 },
                m_tilde: f64::NAN,
            }
        })
        .collect()
}

fn feasibility_of(levels: &[TargetLevel], plausibility: f64) -> Feasibility {
    let mut r_max = f64::INFINITY;
    let mut binding_x = None;
    for lv in levels.iter().filter(|lv| lv.x > 0.0 && lv.omega > 0.0) {
        let r = plausibility * lv.m_max / (lv.x * lv.omega);
        if r < r_max {
            r_max = r;
            binding_x = Some(lv.x);
        }
    }
    Feasibility {
        plausibility,
        r_max,
        binding_x,
    }
}

/// `R̃ = P_SID · min m_max(x) / (x ω̂(x))` over positive SID inputs.
pub fn feasible_region(weights: &WeightFunction, sid: &SidSelection, model: &FittedModel) -> Result<Feasibility> {
    let p = plausibility_score(weights, sid)?;
    Ok(feasibility_of(&sid_levels(weights, sid, model), p))
}

/// Per-level MAE targets for a SID.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetFunction {
    pub r_tilde: f64,
    pub plausibility: f64,
    pub r_max: f64,
    pub binding_x: Option<f64>,
    pub cap: f64,
    /// Distinct SID inputs, sorted.
    pub levels: Vec<TargetLevel>,
}

impl TargetFunction {
    pub fn level(&self, x: f64) -> Option<&TargetLevel> {
        self.levels
            .binary_search_by(|lv| lv.x.total_cmp(&x))
            .ok()
            .map(|i| &self.levels[i])
    }

    /// `(1/n₊) Σ m̃(x_t)/x_t` over the positive SID inputs.
    pub fn expected_mare(&self, sid: &SidSelection) -> f64 {
        let pos: Vec<f64> = sid.x.iter().copied().filter(|&x| x > 0.0).collect();
        pos.iter()
            .map(|&x| self.level(x).map_or(f64::NAN, |lv| lv.m_tilde / x))
            .sum::<f64>()
            / pos.len() as f64
    }
}

/// Targets `m̃(x) = r̃ x ω̂(x) / P_SID` for `x > 0` and `m̃(0) = m̂(0)`.
pub fn target_function(
    weights: &WeightFunction,
    sid: &SidSelection,
    model: &FittedModel,
    r_tilde: f64,
) -> Result<TargetFunction> {
    if !(r_tilde >= 0.0) || !r_tilde.is_finite() {
        return Err(Error::InvalidInput(format!("target MARE must be a finite value >= 0, got {r_tilde}")));
    }
    let p = plausibility_score(weights, sid)?;
    let mut levels = sid_levels(weights, sid, model);
    let feas = feasibility_of(&levels, p);
    if r_tilde > feas.r_max {
        return Err(Error::Infeasible {
            r_tilde,
            r_max: feas.r_max,
            binding_x: feas.binding_x.unwrap_or(f64::NAN),
        });
    }
    for lv in &mut levels {
        lv.m_tilde = if lv.x > 0.0 {
            (r_tilde * lv.x * lv.omega / p).min(lv.m_max)
        } else {
            lv.m_hat
        };
    }
    Ok(TargetFunction {
        r_tilde,
        plausibility: p,
        r_max: feas.r_max,
        binding_x: feas.binding_x,
        cap: model.cap,
        levels,
    })
}

/// Simulation law at one SID input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjustedLevel {
    pub x: f64,
    pub m_tilde: f64,
    pub estimated: BetaParams,
    pub params: BetaParams,
}

/// Simulation laws for every distinct SID input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustedParams {
    pub levels: Vec<AdjustedLevel>,
}

impl AdjustedParams {
    /// Law at `x`, or at the nearest SID input if `x` is not one.
    pub fn params_at(&self, x: f64) -> BetaParams {
        let i = self.levels.partition_point(|lv| lv.x < x);
        let pick = if i == self.levels.len() {
            i - 1
        } else if i == 0 || self.levels[i].x == x || self.levels[i].x - x < x - self.levels[i - 1].x {
            i
        } else {
            i - 1
        };
        self.levels[pick].params
    }
}

/// Moves every SID level's location and scale onto its MAE target.
pub fn adjust_params(target: &TargetFunction) -> Result<AdjustedParams> {
    let cap = target.cap;
    let levels = target
        .levels
        .par_iter()
        .map(|lv| {
            let est = lv.estimated;
            let params = if lv.x == 0.0 {
                est
            } else {
                let (l, s) = solve_program(lv.x, cap, est.alpha, est.beta, est.l, est.s, lv.m_tilde)?;
                BetaParams::new(est.alpha, est.beta, l, s)
            };
            Ok(AdjustedLevel {
                x: lv.x,
                m_tilde: lv.m_tilde,
                estimated: est,
                params,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AdjustedParams { levels })
}
