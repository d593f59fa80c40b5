#![allow(dead_code)]

use chrono::{NaiveDate, NaiveDateTime, TimeDelta};
use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus};
use mare_forge::dataio::PairedSeries;

pub fn hourly(n: usize) -> Vec<NaiveDateTime> {
    let t0 = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    (0..n).map(|i| t0 + TimeDelta::hours(i as i64)).collect()
}

pub fn series(x: Vec<f64>, y: Vec<f64>, cap: f64) -> PairedSeries {
    PairedSeries::new(hourly(x.len()), x, y, cap).unwrap()
}

/// Double-exponential quadrature of `f` over `[a, b]`.
///
/// `f` receives the node together with its distances to `a` and `b`, which
/// stay accurate next to the endpoints.
pub fn tanh_sinh(f: &dyn Fn(f64, f64, f64) -> f64, a: f64, b: f64) -> f64 {
    use std::f64::consts::FRAC_PI_2;
    let half = 0.5 * (b - a);
    if half <= 0.0 {
        return 0.0;
    }
    let node = |t: f64| {
        let u = FRAC_PI_2 * t.sinh();
        let w = half * FRAC_PI_2 * t.cosh() / u.cosh().powi(2);
        let tail = half * 2.0 / (1.0 + (2.0 * u.abs()).exp());
        let (da, db) = if u >= 0.0 { (2.0 * half - tail, tail) } else { (tail, 2.0 * half - tail) };
        if da <= 0.0 || db <= 0.0 || w == 0.0 {
            return 0.0;
        }
        w * f(a + da, da, db)
    };
    let t_max = 6.5;
    let mut h = 0.5;
    let mut sum = node(0.0);
    let mut k = 1;
    while k as f64 * h <= t_max {
        sum += node(k as f64 * h) + node(-(k as f64) * h);
        k += 1;
    }
    let mut est = sum * h;
    for _ in 0..12 {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= t_max {
            sum += node(k as f64 * h) + node(-(k as f64) * h);
            k += 2;
        }
        let next = sum * h;
        let done = (next - est).abs() <= 1e-15 * next.abs();
        est = next;
        if done {
            break;
        }
    }
    est
}

/// `E|l + s B|` for `B ~ Beta(alpha, beta)` by quadrature, split at the kink.
pub fn nu_quadrature(l: f64, s: f64, alpha: f64, beta: f64) -> f64 {
    let kernel = |da: f64, db: f64| ((alpha - 1.0) * da.ln() + (beta - 1.0) * db.ln()).exp();
    let norm = tanh_sinh(&|_, da, db| kernel(da, db), 0.0, 1.0);
    let abs_part = |lo: f64, hi: f64| {
        tanh_sinh(
            &|_, da, db| {
                let (ta, tb) = (lo + da, 1.0 - hi + db);
                (l + s * ta).abs() * kernel(ta, tb)
            },
            lo,
            hi,
        )
    };
    let t0 = -l / s;
    let num = if t0 > 0.0 && t0 < 1.0 {
        abs_part(0.0, t0) + abs_part(t0, 1.0)
    } else {
        abs_part(0.0, 1.0)
    };
    num / norm
}

fn golden(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if f(c) <= f(d) {
            b = d;
        } else {
            a = c;
        }
        if b - a <= 1e-15 * (a.abs() + b.abs() + 1e-300) {
            break;
        }
    }
    0.5 * (a + b)
}

fn bisect_root(g: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let ga = g(a);
    for _ in 0..300 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (g(m) >= 0.0) == (ga >= 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Roots of a convex `g` on `[a, b]`.
fn convex_roots(g: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Vec<f64> {
    if b <= a {
        return Vec::new();
    }
    let mid = golden(g, a, b);
    if g(mid) > 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    if g(a) >= 0.0 {
        out.push(bisect_root(g, a, mid));
    }
    if g(b) >= 0.0 {
        out.push(bisect_root(g, mid, b));
    }
    out
}

/// Random points `(l, s)` of the box `-x ≤ l ≤ 0`, `0 ≤ s ≤ cap - x - l`
/// with `ν(l, s) = m`, found by fixing one coordinate at random and solving
/// for the other (`ν` is convex along both).
pub fn curve_samples<R: rand::Rng>(
    x: f64,
    cap: f64,
    alpha: f64,
    beta: f64,
    m: f64,
    count: usize,
    rng: &mut R,
) -> Vec<(f64, f64)> {
    use mare_forge::target::nu;
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count && tries < 100 * count {
        tries += 1;
        if tries % 2 == 0 {
            let l = -x * rng.random::<f64>();
            let g = |s: f64| nu(l, s, alpha, beta) - m;
            for s in convex_roots(&g, 0.0, cap - x - l) {
                out.push((l, s));
            }
        } else {
            let s = cap * rng.random::<f64>();
            let g = |l: f64| nu(l, s, alpha, beta) - m;
            for l in convex_roots(&g, -x, (cap - x - s).min(0.0)) {
                out.push((l, s));
            }
        }
    }
    out.truncate(count);
    out
}

/// Pairs at 20 distinct input levels with Beta(2, 3) errors on the
/// `iid-error` fixture support.
pub fn twenty_level_series(n: usize, seed: u64) -> PairedSeries {
    use mare_forge::fixture::{error_support, FixtureKind, FIXTURE_CAP};
    use rand::SeedableRng;
    use rand_distr::Distribution;
    let cap = FIXTURE_CAP;
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let law = rand_distr::Beta::new(2.0, 3.0).unwrap();
    let levels: Vec<f64> = (0..20).map(|k| cap * (k as f64 + 0.5) / 20.0).collect();
    let x: Vec<f64> = (0..n).map(|i| levels[i % 20]).collect();
    let y = x
        .iter()
        .map(|&xi| {
            let (l, s) = error_support(FixtureKind::IidError, xi, cap);
            (xi + l + s * law.sample(&mut rng)).clamp(0.0, cap)
        })
        .collect();
    series(x, y, cap)
}

pub struct Pipeline {
    pub series: PairedSeries,
    pub model: mare_forge::FittedModel,
    pub weights: mare_forge::WeightFunction,
}

pub fn pipeline(series: PairedSeries, a: f64) -> Pipeline {
    let model = mare_forge::fit::fit_all(&series, a).unwrap();
    let weights = mare_forge::target::weight_function(&model, &series).unwrap();
    Pipeline { series, model, weights }
}

pub fn request(sid: mare_forge::SidSelection, r_tilde: f64, m: usize, mode: mare_forge::Mode, seed: u64) -> mare_forge::SimulationRequest {
    mare_forge::SimulationRequest {
        sid,
        r_tilde,
        n_scenarios: m,
        mode,
        seed,
        curvature: None,
    }
}

/// Minimum of `Σ w_s (σ_j s_j - d)² + w_ε Σ (y - t)²` subject to
/// `σ_j s_j ≥ 0` and `0 ≤ y ≤ cap`, in units of `cap`.
fn signed_qp(target: &[f64], sigma: &[f64], d: f64, w_s: f64, w_eps: f64) -> Option<f64> {
    let n = target.len();
    let m = n - 2;
    let coef = |j: usize| [(j, 1.0), (j + 1, -2.0), (j + 2, 1.0)];
    // P = 2 (w_s DᵀD + w_ε I)
    let mut p = vec![vec![0.0; n]; n];
    for j in 0..m {
        for &(a, ca) in &coef(j) {
            for &(b, cb) in &coef(j) {
                p[a][b] += 2.0 * w_s * ca * cb;
            }
        }
    }
    for (i, row) in p.iter_mut().enumerate() {
        row[i] += 2.0 * w_eps;
    }
    let mut q: Vec<f64> = target.iter().map(|t| -2.0 * w_eps * t).collect();
    for j in 0..m {
        for &(a, ca) in &coef(j) {
            q[a] -= 2.0 * w_s * d * sigma[j] * ca;
        }
    }
    let constant = w_s * m as f64 * d * d + w_eps * target.iter().map(|t| t * t).sum::<f64>();

    let mut a = vec![vec![0.0; n]; m + 2 * n];
    let mut b = vec![0.0; m + 2 * n];
    for j in 0..m {
        for &(i, c) in &coef(j) {
            a[j][i] = -sigma[j] * c;
        }
    }
    for i in 0..n {
        a[m + i][i] = 1.0;
        b[m + i] = 1.0;
        a[m + n + i][i] = -1.0;
    }
    let p = CscMatrix::from(&p).to_triu();
    let a = CscMatrix::from(&a);
    let cones = [NonnegativeConeT(m + 2 * n)];
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_gap_abs(1e-12)
        .tol_gap_rel(1e-12)
        .tol_feas(1e-12)
        .max_iter(500)
        .build()
        .unwrap();
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings).ok()?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => Some(solver.solution.obj_val + constant),
        _ => None,
    }
}

/// Exact optimum of the curvature program by enumerating every sign pattern.
pub fn brute_force(target: &[f64], d: f64, w_s: f64, w_eps: f64, cap: f64) -> f64 {
    let m = target.len() - 2;
    let t: Vec<f64> = target.iter().map(|v| v / cap).collect();
    let mut best = f64::INFINITY;
    for mask in 0..(1u32 << m) {
        let sigma: Vec<f64> = (0..m).map(|j| if mask >> j & 1 == 1 { 1.0 } else { -1.0 }).collect();
        if let Some(v) = signed_qp(&t, &sigma, d / cap, w_s, w_eps) {
            best = best.min(v);
        }
    }
    best * cap * cap
}
