//! Gaussian ARMA base process.
//!
//! Historical errors are mapped through their fitted conditional CDFs and
//! the standard normal quantile to a latent series `ẑ`. A zero-mean ARMA
//! model is selected for `ẑ` by BIC over an order grid, using the exact
//! Gaussian likelihood from a Kalman filter, and its innovation scale is
//! set so the stationary variance is one.
//!
//! Model convention: `Z_t = Σ a_h Z_{t-h} + δ_t + Σ b_h δ_{t-h}`,
//! `δ_t ~ N(0, σ_δ²)`.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::PairedSeries;
use crate::error::{Error, Result};
use crate::fit::FittedModel;
use crate::rng::substream;
use crate::special::norm_quantile;

/// Default upper bound for both orders in the BIC grid.
pub const DEFAULT_MAX_ORDER: usize = 5;

/// Largest partial autocorrelation magnitude accepted at an optimum.
const BOUNDARY_PACF: f64 = 0.9999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaModel {
    pub p: usize,
    pub q: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub sigma_delta: f64,
    /// BIC of the selected order; `None` for models not obtained by fitting.
    pub bic: Option<f64>,
}

impl ArmaModel {
    pub fn new(a: Vec<f64>, b: Vec<f64>, sigma_delta: f64) -> Self {
        Self {
            p: a.len(),
            q: b.len(),
            a,
            b,
            sigma_delta,
            bic: None,
        }
    }

    pub fn white_noise() -> Self {
        Self::new(Vec::new(), Vec::new(), 1.0)
    }

    pub fn is_stationary(&self) -> bool {
        partial_autocorrelations(&self.a).is_some()
    }

    pub fn is_invertible(&self) -> bool {
        let c: Vec<f64> = self.b.iter().map(|v| -v).collect();
        partial_autocorrelations(&c).is_some()
    }
}

/// Latent Gaussian series `ẑ_t = Φ⁻¹(F̂(ε_t | x_t))` in time order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseProcessSeries {
    pub z_hat: Vec<f64>,
}

/// Maps every observed error through its fitted conditional CDF.
///
/// CDF values are clamped to `[1/(2n), 1 - 1/(2n)]`; a point-mass law maps
/// to `ẑ = 0`.
pub fn to_base_process(series: &PairedSeries, model: &FittedModel) -> BaseProcessSeries {
    let n = series.len() as f64;
    let floor = 0.5 / n;
    let z_hat = series
        .x()
        .par_iter()
        .zip(series.errors())
        .map(|(&x, e)| {
            let p = model.params_at(x);
            let u = if p.is_degenerate() { 0.5 } else { p.cdf(e) };
            norm_quantile(u.clamp(floor, 1.0 - floor))
        })
        .collect();
    BaseProcessSeries { z_hat }
}

/// Coefficients of `1 - Σ φ_j L^j` from partial autocorrelations.
fn pacf_to_coefs(kappa: &[f64]) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::with_capacity(kappa.len());
    for (k, &kk) in kappa.iter().enumerate() {
        let prev = phi.clone();
        for j in 0..k {
            phi[j] = prev[j] - kk * prev[k - 1 - j];
        }
        phi.push(kk);
    }
    phi
}

/// Step-down recursion; `None` unless every partial autocorrelation lies in (-1, 1).
pub fn partial_autocorrelations(phi: &[f64]) -> Option<Vec<f64>> {
    let mut cur = phi.to_vec();
    let mut kappa = vec![0.0; phi.len()];
    for k in (0..phi.len()).rev() {
        let kk = cur[k];
        if !(kk.abs() < 1.0) {
            return None;
        }
        kappa[k] = kk;
        let d = 1.0 - kk * kk;
        let prev: Vec<f64> = (0..k).map(|j| (cur[j] + kk * cur[k - 1 - j]) / d).collect();
        cur = prev;
    }
    Some(kappa)
}

/// State-space (Harvey) form with the first state element as the observation.
struct StateSpace {
    r: usize,
    phi: Vec<f64>,
    rvec: Vec<f64>,
}

impl StateSpace {
    fn new(a: &[f64], b: &[f64]) -> Self {
        let r = a.len().max(b.len() + 1);
        let mut phi = vec![0.0; r];
        phi[..a.len()].copy_from_slice(a);
        let mut rvec = vec![0.0; r];
        rvec[0] = 1.0;
        rvec[1..=b.len()].copy_from_slice(b);
        Self { r, phi, rvec }
    }

    fn transition(&self) -> DMatrix<f64> {
        let r = self.r;
        DMatrix::from_fn(r, r, |i, j| {
            if j == 0 {
                self.phi[i]
            } else if j == i + 1 {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Stationary state covariance for unit innovation variance.
    fn stationary_cov(&self) -> Option<DMatrix<f64>> {
        let r = self.r;
        let t = self.transition();
        let m = DMatrix::identity(r * r, r * r) - t.kronecker(&t);
        let rv = DVector::from_column_slice(&self.rvec);
        let q = &rv * rv.transpose();
        let vec_q = DVector::from_column_slice(q.as_slice());
        let sol = m.lu().solve(&vec_q)?;
        let p = DMatrix::from_column_slice(r, r, sol.as_slice());
        let p = (&p + p.transpose()) * 0.5;
        (p[(0, 0)] > 0.0 && p.iter().all(|v| v.is_finite())).then_some(p)
    }
}

/// Exact Gaussian log-likelihood with the innovation variance profiled out.
/// Returns `(log-likelihood, σ̂²)`.
fn concentrated_loglik(z: &[f64], a: &[f64], b: &[f64]) -> Option<(f64, f64)> {
    let n = z.len() as f64;
    if a.is_empty() && b.is_empty() {
        let s2 = z.iter().map(|v| v * v).sum::<f64>() / n;
        return Some((-0.5 * n * ((2.0 * std::f64::consts::PI).ln() + s2.ln() + 1.0), s2));
    }
    let ss = StateSpace::new(a, b);
    let r = ss.r;
    let p0 = ss.stationary_cov()?;
    let mut p: Vec<f64> = (0..r * r).map(|k| p0[(k / r, k % r)]).collect();
    let mut st = vec![0.0; r];
    let mut k = vec![0.0; r];
    let mut w = vec![0.0; r * r];
    let mut next = vec![0.0; r * r];
    let (mut sum_log_f, mut ssq) = (0.0, 0.0);
    let mut steady = false;
    for &zt in z {
        let f = p[0];
        if !(f > 0.0) {
            return None;
        }
        let v = zt - st[0];
        sum_log_f += f.ln();
        ssq += v * v / f;
        for i in 0..r {
            k[i] = p[i * r] / f;
            st[i] += k[i] * v;
        }
        let head = st[0];
        for i in 0..r {
            st[i] = ss.phi[i] * head + if i + 1 < r { st[i + 1] } else { 0.0 };
        }
        if steady {
            continue;
        }
        // measurement update P - P e1 e1' P / f, then predict T P T' + R R'
        for i in 0..r {
            for j in 0..r {
                next[i * r + j] = p[i * r + j] - p[i * r] * p[j] / f;
            }
        }
        for i in 0..r {
            for j in 0..r {
                w[i * r + j] = ss.phi[i] * next[j] + if i + 1 < r { next[(i + 1) * r + j] } else { 0.0 };
            }
        }
        let mut change: f64 = 0.0;
        for i in 0..r {
            for j in 0..r {
                let tpt = w[i * r] * ss.phi[j] + if j + 1 < r { w[i * r + j + 1] } else { 0.0 };
                let val = tpt + ss.rvec[i] * ss.rvec[j];
                change = change.max((val - p[i * r + j]).abs());
                p[i * r + j] = val;
            }
        }
        steady = change < 1e-10 * p[0];
    }
    let s2 = ssq / n;
    if !(s2 > 0.0) {
        return None;
    }
    Some((-0.5 * (n * (2.0 * std::f64::consts::PI).ln() + sum_log_f + n * s2.ln() + n), s2))
}

/// Autocovariances at lags `0..=max_lag` of a stationary model.
pub fn autocovariances(model: &ArmaModel, max_lag: usize) -> Result<Vec<f64>> {
    if !model.is_stationary() {
        return Err(Error::NonStationary);
    }
    let ss = StateSpace::new(&model.a, &model.b);
    let t = ss.transition();
    let mut cur = ss.stationary_cov().ok_or(Error::NonStationary)? * model.sigma_delta.powi(2);
    let mut out = Vec::with_capacity(max_lag + 1);
    for _ in 0..=max_lag {
        out.push(cur[(0, 0)]);
        cur = &t * cur;
    }
    Ok(out)
}

/// Exact stationary variance of a model.
pub fn stationary_variance(model: &ArmaModel) -> Result<f64> {
    Ok(autocovariances(model, 0)?[0])
}

fn burn_in(model: &ArmaModel) -> usize {
    100 + 10 * (model.p + model.q)
}

/// Sample path of length `len` after discarding the burn-in.
pub fn simulate_with<R: Rng + ?Sized>(model: &ArmaModel, len: usize, rng: &mut R) -> Vec<f64> {
    let burn = burn_in(model);
    let total = burn + len;
    let mut z = vec![0.0; total];
    let mut d = vec![0.0; total];
    for t in 0..total {
        let eta: f64 = StandardNormal.sample(rng);
        let delta = model.sigma_delta * eta;
        let mut v = delta;
        for (h, &ah) in model.a.iter().enumerate() {
            if t > h {
                v += ah * z[t - h - 1];
            }
        }
        for (h, &bh) in model.b.iter().enumerate() {
            if t > h {
                v += bh * d[t - h - 1];
            }
        }
        d[t] = delta;
        z[t] = v;
    }
    z.split_off(burn)
}

/// Deterministic sample path keyed by `seed`.
pub fn simulate_base_process(model: &ArmaModel, len: usize, seed: u64) -> Vec<f64> {
    simulate_with(model, len, &mut substream(seed, 0))
}

/// One grid candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaCandidate {
    pub p: usize,
    pub q: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub log_likelihood: f64,
    /// `None` when the fit failed or ended on the stationarity/invertibility boundary.
    pub bic: Option<f64>,
}

/// Selected model plus the whole BIC grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaFit {
    pub model: ArmaModel,
    pub candidates: Vec<ArmaCandidate>,
}

fn sample_autocov(z: &[f64], max_lag: usize) -> Vec<f64> {
    let n = z.len() as f64;
    (0..=max_lag)
        .map(|h| z.iter().zip(&z[h..]).map(|(u, v)| u * v).sum::<f64>() / n)
        .collect()
}

/// Yule-Walker AR coefficients by Levinson-Durbin.
fn yule_walker(gamma: &[f64], order: usize) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::new();
    let mut err = gamma[0];
    for k in 0..order {
        if !(err > 0.0) {
            break;
        }
        let acc: f64 = (0..k).map(|j| phi[j] * gamma[k - j]).sum();
        let kk = ((gamma[k + 1] - acc) / err).clamp(-0.999, 0.999);
        let prev = phi.clone();
        for j in 0..k {
            phi[j] = prev[j] - kk * prev[k - 1 - j];
        }
        phi.push(kk);
        err *= 1.0 - kk * kk;
    }
    phi.resize(order, 0.0);
    phi
}

/// Hannan-Rissanen regression estimates used as starting values.
fn initial_estimates(z: &[f64], p: usize, q: usize) -> (Vec<f64>, Vec<f64>) {
    let n = z.len();
    if q == 0 {
        return (yule_walker(&sample_autocov(z, p), p), Vec::new());
    }
    let m = (2 * (p + q)).max(10).min(n / 4);
    let long = yule_walker(&sample_autocov(z, m), m);
    let resid: Vec<f64> = (0..n)
        .map(|t| {
            if t < m {
                0.0
            } else {
                z[t] - (0..m).map(|j| long[j] * z[t - j - 1]).sum::<f64>()
            }
        })
        .collect();
    let start = m + p.max(q);
    let rows = n.saturating_sub(start);
    let cols = p + q;
    if rows <= cols {
        return (vec![0.0; p], vec![0.0; q]);
    }
    let x = DMatrix::from_fn(rows, cols, |i, j| {
        let t = start + i;
        if j < p {
            z[t - j - 1]
        } else {
            resid[t - (j - p) - 1]
        }
    });
    let y = DVector::from_iterator(rows, (start..n).map(|t| z[t]));
    let xtx = x.transpose() * &x + DMatrix::identity(cols, cols) * 1e-8;
    let beta = xtx
        .cholesky()
        .map(|c| c.solve(&(x.transpose() * y)))
        .map(|b| b.as_slice().to_vec())
        .unwrap_or_else(|| vec![0.0; cols]);
    (beta[..p].to_vec(), beta[p..].to_vec())
}

fn to_unconstrained(coefs: &[f64]) -> Vec<f64> {
    match partial_autocorrelations(coefs) {
        Some(k) => k.iter().map(|v| v.clamp(-0.95, 0.95).atanh()).collect(),
        None => vec![0.0; coefs.len()],
    }
}

fn from_unconstrained(u: &[f64], p: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let kap_a: Vec<f64> = u[..p].iter().map(|v| v.tanh()).collect();
    let kap_b: Vec<f64> = u[p..].iter().map(|v| v.tanh()).collect();
    let worst = kap_a.iter().chain(&kap_b).fold(0.0_f64, |m, v| m.max(v.abs()));
    let a = pacf_to_coefs(&kap_a);
    let b = pacf_to_coefs(&kap_b).into_iter().map(|v| -v).collect();
    (a, b, worst)
}

struct NegLogLik<'a> {
    z: &'a [f64],
    p: usize,
}

impl CostFunction for NegLogLik<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, u: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let (a, b, _) = from_unconstrained(u, self.p);
        Ok(match concentrated_loglik(self.z, &a, &b) {
            Some((ll, _)) if ll.is_finite() => -ll,
            _ => f64::MAX,
        })
    }
}

fn nelder_mead(z: &[f64], p: usize, start: Vec<f64>) -> Option<Vec<f64>> {
    let dim = start.len();
    let mut simplex = vec![start.clone()];
    for i in 0..dim {
        let mut v = start.clone();
        v[i] += 0.2;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-8).ok()?;
    let res = Executor::new(NegLogLik { z, p }, solver)
        .configure(|s| s.max_iters(200 * dim as u64))
        .run()
        .ok()?;
    res.state.best_param
}

/// Maximum-likelihood fit of one `(p, q)` order.
pub fn fit_order(z: &[f64], p: usize, q: usize) -> ArmaCandidate {
    let n = z.len() as f64;
    let failed = || ArmaCandidate {
        p,
        q,
        a: vec![0.0; p],
        b: vec![0.0; q],
        log_likelihood: f64::NAN,
        bic: None,
    };
    let (a, b, worst) = if p + q == 0 {
        (Vec::new(), Vec::new(), 0.0)
    } else {
        let (a0, b0) = initial_estimates(z, p, q);
        let mut u = to_unconstrained(&a0);
        u.extend(to_unconstrained(&b0.iter().map(|v| -v).collect::<Vec<_>>()));
        let Some(u) = nelder_mead(z, p, u) else {
            return failed();
        };
        // one restart around the first optimum
        let u = nelder_mead(z, p, u.clone()).unwrap_or(u);
        from_unconstrained(&u, p)
    };
    let Some((ll, _)) = concentrated_loglik(z, &a, &b) else {
        return failed();
    };
    let k = (p + q + 1) as f64;
    let ok = ll.is_finite() && worst < BOUNDARY_PACF;
    ArmaCandidate {
        p,
        q,
        a,
        b,
        log_likelihood: ll,
        bic: ok.then(|| k * n.ln() - 2.0 * ll),
    }
}

/// BIC grid search over `[0, p_max] x [0, q_max]`, then unit-variance calibration.
pub fn fit_arma(z: &BaseProcessSeries, p_max: usize, q_max: usize) -> Result<ArmaFit> {
    let z = &z.z_hat;
    let need = 10 * (p_max + q_max + 1);
    if z.len() < need {
        return Err(Error::InvalidInput(format!(
            "series of length {} too short for orders up to ({p_max}, {q_max}); need {need}",
            z.len()
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite value in base process series".into()));
    }
    let orders: Vec<(usize, usize)> = (0..=p_max).flat_map(|p| (0..=q_max).map(move |q| (p, q))).collect();
    let candidates: Vec<ArmaCandidate> = orders.par_iter().map(|&(p, q)| fit_order(z, p, q)).collect();
    let best = candidates
        .iter()
        .filter(|c| c.bic.is_some())
        .min_by(|x, y| x.bic.unwrap().total_cmp(&y.bic.unwrap()))
        .ok_or(Error::NoArmaCandidate)?;
    let mut model = ArmaModel::new(best.a.clone(), best.b.clone(), 1.0);
    model.bic = best.bic;
    let unit = stationary_variance(&model)?;
    model.sigma_delta = 1.0 / unit.sqrt();
    Ok(ArmaFit { model, candidates })
}
