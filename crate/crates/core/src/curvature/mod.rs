//! A-posteriori curvature adjustment of a simulated series.
//!
//! Minimizes
//! `Σ_j w_s (|s_j| - d)² + Σ_i w_ε (y_i - x_i - ε̃_i)²` over `y ∈ [0, cap]ⁿ`,
//! with `s_j = y_j - 2 y_{j+1} + y_{j+2}`. Splitting each `s_j` into
//! `λ⁺ - λ⁻` with a binary sign selector makes this a mixed-integer QP; the
//! solver branches on the signs depth first. With a sign fixed, the
//! curvature term is the convex `(σ_j s_j - d)²` on `σ_j s_j ≥ 0`; with it
//! free, the relaxation of the big-M constraints reduces the term to
//! `(|s_j| - d)₊²`.

mod qp;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use qp::BandedQp;

pub const DEFAULT_GAP: f64 = 0.05;
pub const DEFAULT_NODE_LIMIT: usize = 10_000;
const BANDWIDTH: usize = 5;

/// `y_{j+2} - 2 y_{j+1} + y_j` for every valid `j`.
pub fn second_difference(y: &[f64]) -> Result<Vec<f64>> {
    if y.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "second differences need at least 3 points, got {}",
            y.len()
        )));
    }
    Ok(y.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect())
}

pub fn mean_abs_second_difference(y: &[f64]) -> Result<f64> {
    let s = second_difference(y)?;
    Ok(s.iter().map(|v| v.abs()).sum::<f64>() / s.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSpec {
    /// Target magnitude of the second differences.
    pub d: f64,
    pub w_s: f64,
    pub w_eps: f64,
    /// Big-M constant bounding `λ⁺` and `λ⁻`.
    pub d_max: f64,
    /// Relative optimality gap at which branch-and-bound stops.
    pub gap: f64,
    pub node_limit: usize,
}

impl CurvatureSpec {
    /// Unit weights, `d_max = 4 cap`, default gap and node budget.
    pub fn new(d: f64, cap: f64) -> Self {
        Self {
            d,
            w_s: 1.0,
            w_eps: 1.0,
            d_max: 4.0 * cap,
            gap: DEFAULT_GAP,
            node_limit: DEFAULT_NODE_LIMIT,
        }
    }

    pub fn validate(&self, cap: f64) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.d >= 0.0) || !self.d.is_finite() {
            return bad(format!("curvature target d must be >= 0, got {}", self.d));
        }
        if !(self.w_s >= 0.0 && self.w_eps >= 0.0) || self.w_s + self.w_eps <= 0.0 {
            return bad(format!(
                "weights must be >= 0 with a positive sum, got w_s = {}, w_eps = {}",
                self.w_s, self.w_eps
            ));
        }
        if !(self.d_max >= 4.0 * cap) || self.d > self.d_max {
            return bad(format!("d_max = {} must be >= 4 cap and >= d", self.d_max));
        }
        if !(self.gap >= 0.0) {
            return bad(format!("gap must be >= 0, got {}", self.gap));
        }
        if self.node_limit == 0 {
            return bad("node limit must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSolution {
    pub y: Vec<f64>,
    pub objective: f64,
    /// Lower bound on the optimal objective proven by the search.
    pub bound: f64,
    pub gap_achieved: f64,
    pub nodes: usize,
    pub budget_exhausted: bool,
    /// `b_j = true` when `s_j ≥ 0`.
    pub b: Vec<bool>,
    pub lambda_plus: Vec<f64>,
    pub lambda_minus: Vec<f64>,
}

/// Objective of the curvature program at `y`.
pub fn objective(y: &[f64], target: &[f64], spec: &CurvatureSpec) -> f64 {
    let fid: f64 = y.iter().zip(target).map(|(a, t)| (a - t).powi(2)).sum();
    let curv: f64 = y
        .windows(3)
        .map(|w| ((w[2] - 2.0 * w[1] + w[0]).abs() - spec.d).powi(2))
        .sum();
    spec.w_eps * fid + spec.w_s * curv
}

fn pos_y(i: usize) -> usize {
    if i < 2 {
        i
    } else {
        2 * i - 2
    }
}

fn pos_u(j: usize) -> usize {
    2 * j + 3
}

/// Node subproblems in units of `cap`.
struct Instance<'a> {
    n: usize,
    target: &'a [f64],
    d: f64,
    w_s: f64,
    w_fid: f64,
}

impl Instance<'_> {
    fn nvar(&self) -> usize {
        2 * self.n - 2
    }

    /// Relaxation with `signs[j] ∈ {-1, 0, 1}`, 0 meaning free.
    /// Returns the objective (constant included), `y`, and whether the QP
    /// solver converged.
    fn solve(&self, signs: &[i8], start: &[f64]) -> (f64, Vec<f64>, bool) {
        let n = self.n;
        let mut qp = BandedQp::new(self.nvar(), BANDWIDTH);
        let mut constant = 0.0;
        for i in 0..n {
            let p = pos_y(i);
            qp.add_h(p, p, 2.0 * self.w_fid);
            qp.g[p] -= 2.0 * self.w_fid * self.target[i];
            constant += self.w_fid * self.target[i] * self.target[i];
            qp.push_row(&[(p, 1.0)], 0.0);
            qp.push_row(&[(p, -1.0)], -1.0);
        }
        for (j, &sg) in signs.iter().enumerate() {
            let c = [(pos_y(j), 1.0), (pos_y(j + 1), -2.0), (pos_y(j + 2), 1.0)];
            let u = pos_u(j);
            if sg == 0 {
                qp.add_h(u, u, 2.0 * self.w_s);
                qp.push_row(&[(u, 1.0)], 0.0);
                qp.push_row(&[(u, 1.0), (c[0].0, -1.0), (c[1].0, 2.0), (c[2].0, -1.0)], -self.d);
                qp.push_row(&[(u, 1.0), (c[0].0, 1.0), (c[1].0, -2.0), (c[2].0, 1.0)], -self.d);
            } else {
                let sigma = f64::from(sg);
                qp.add_h(u, u, 2.0);
                qp.push_row(&[(u, 1.0)], 0.0);
                for &(a, va) in &c {
                    for &(b, vb) in &c {
                        if a >= b {
                            qp.add_h(a, b, 2.0 * self.w_s * va * vb);
                        }
                    }
                    qp.g[a] -= 2.0 * self.w_s * self.d * sigma * va;
                }
                constant += self.w_s * self.d * self.d;
                qp.push_row(&[(c[0].0, sigma), (c[1].0, -2.0 * sigma), (c[2].0, sigma)], 0.0);
            }
        }
        let mut v0 = vec![0.0; self.nvar()];
        for i in 0..n {
            v0[pos_y(i)] = start[i].clamp(0.01, 0.99);
        }
        let sol = qp.solve(&v0);
        let y = (0..n).map(|i| sol.v[pos_y(i)].clamp(0.0, 1.0)).collect();
        (sol.objective + constant, y, sol.converged)
    }

    fn true_objective(&self, y: &[f64]) -> f64 {
        let fid: f64 = y.iter().zip(self.target).map(|(a, t)| (a - t).powi(2)).sum();
        let curv: f64 = y
            .windows(3)
            .map(|w| ((w[2] - 2.0 * w[1] + w[0]).abs() - self.d).powi(2))
            .sum();
        self.w_fid * fid + self.w_s * curv
    }
}

fn signs_of(y: &[f64]) -> Vec<i8> {
    y.windows(3)
        .map(|w| if w[2] - 2.0 * w[1] + w[0] >= 0.0 { 1 } else { -1 })
        .collect()
}

fn finish(y: Vec<f64>, target: &[f64], spec: &CurvatureSpec, bound: f64, nodes: usize, exhausted: bool) -> CurvatureSolution {
    let objective = objective(&y, target, spec);
    let s = if y.len() >= 3 { second_difference(&y).unwrap() } else { Vec::new() };
    let bound = bound.min(objective);
    let gap_achieved = if objective > 0.0 { ((objective - bound) / objective).max(0.0) } else { 0.0 };
    CurvatureSolution {
        objective,
        bound,
        gap_achieved,
        nodes,
        budget_exhausted: exhausted,
        b: s.iter().map(|&v| v >= 0.0).collect(),
        lambda_plus: s.iter().map(|&v| v.max(0.0)).collect(),
        lambda_minus: s.iter().map(|&v| (-v).max(0.0)).collect(),
        y,
    }
}

/// Solves the curvature program for the simulated series `x + eps_tilde`.
pub fn smooth(x: &[f64], eps_tilde: &[f64], spec: &CurvatureSpec, cap: f64) -> Result<CurvatureSolution> {
    if x.len() != eps_tilde.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} inputs, {} errors",
            x.len(),
            eps_tilde.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::InvalidInput("empty series".into()));
    }
    if !(cap > 0.0) {
        return Err(Error::InvalidInput(format!("cap must be positive, got {cap}")));
    }
    spec.validate(cap)?;
    let target: Vec<f64> = x.iter().zip(eps_tilde).map(|(a, e)| a + e).collect();
    let n = x.len();
    if spec.w_s == 0.0 || n < 3 {
        let y: Vec<f64> = target.iter().map(|t| t.clamp(0.0, cap)).collect();
        let obj = objective(&y, &target, spec);
        return Ok(finish(y, &target, spec, obj, 0, false));
    }
    let plain: Vec<f64> = target.iter().map(|t| (t / cap).clamp(0.0, 1.0)).collect();

    let scaled_target: Vec<f64> = target.iter().map(|t| t / cap).collect();
    let inst = Instance {
        n,
        target: &scaled_target,
        d: spec.d / cap,
        w_s: spec.w_s,
        w_fid: spec.w_eps.max(1e-9 * spec.w_s),
    };
    let tol = |inc: f64| inc - spec.gap * inc.abs() - 1e-9 * inc.abs() - 1e-14;

    let mut best_y = plain.clone();
    let mut best = inst.true_objective(&plain);
    let offer = |y: Vec<f64>, best: &mut f64, best_y: &mut Vec<f64>| {
        let v = inst.true_objective(&y);
        if v < *best {
            *best = v;
            *best_y = y;
        }
    };
    let (_, y_pat, _) = inst.solve(&signs_of(&plain), &plain);
    offer(y_pat, &mut best, &mut best_y);

    let free = vec![0i8; n - 2];
    let mut stack: Vec<(Vec<i8>, f64, Vec<f64>)> = vec![(free, f64::NEG_INFINITY, plain.clone())];
    let mut bound = f64::INFINITY;
    let mut nodes = 0;
    let mut exhausted = false;
    while let Some((signs, parent_lb, start)) = stack.pop() {
        if parent_lb >= tol(best) {
            bound = bound.min(parent_lb);
            continue;
        }
        if nodes >= spec.node_limit {
            exhausted = true;
            bound = bound.min(parent_lb);
            for (_, lb, _) in stack.drain(..) {
                bound = bound.min(lb);
            }
            break;
        }
        nodes += 1;
        let (lb, y, converged) = inst.solve(&signs, &start);
        // an unconverged relaxation proves nothing beyond the parent's bound
        let lb = if converged { lb.max(parent_lb) } else { parent_lb };
        if nodes == 1 {
            let (_, y_root, _) = inst.solve(&signs_of(&y), &y);
            offer(y_root, &mut best, &mut best_y);
        }
        offer(y.clone(), &mut best, &mut best_y);
        if lb >= tol(best) {
            bound = bound.min(lb);
            continue;
        }
        let s: Vec<f64> = y.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect();
        let branch = (0..n - 2)
            .filter(|&j| signs[j] == 0)
            .map(|j| (j, (inst.d - s[j].abs()).max(0.0)))
            .fold(None, |acc: Option<(usize, f64)>, c| match acc {
                Some(a) if a.1 >= c.1 => Some(a),
                _ if c.1 > 0.0 => Some(c),
                other => other,
            });
        let Some((j, _)) = branch else {
            // relaxation exact at this node
            bound = bound.min(lb);
            continue;
        };
        let first: i8 = if s[j] >= 0.0 { 1 } else { -1 };
        for sg in [-first, first] {
            let mut child = signs.clone();
            child[j] = sg;
            stack.push((child, lb, y.clone()));
        }
    }
    if bound == f64::INFINITY {
        bound = best;
    }
    let y = best_y.iter().map(|v| (v * cap).clamp(0.0, cap)).collect();
    Ok(finish(y, &target, spec, bound * cap * cap, nodes, exhausted))
}
