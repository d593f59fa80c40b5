//! Convex QP `min ½ vᵀHv + gᵀv  s.t.  A v ≥ b` with a banded Hessian and
//! short constraint rows, solved by a Mehrotra predictor-corrector
//! interior-point method. The normal matrix `H + AᵀDA` keeps the band of
//! `H` as long as each row's columns fit in it, so every Newton step is a
//! banded Cholesky solve.

const MAX_ITERS: usize = 100;
const STEP_FRACTION: f64 = 0.995;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Row {
    cols: [usize; 4],
    vals: [f64; 4],
    nnz: usize,
}

impl Row {
    fn dot(&self, v: &[f64]) -> f64 {
        (0..self.nnz).map(|k| self.vals[k] * v[self.cols[k]]).sum()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BandedQp {
    n: usize,
    bw: usize,
    /// `h[i * (bw + 1) + k] = H[i][i - k]`
    h: Vec<f64>,
    pub g: Vec<f64>,
    rows: Vec<Row>,
    rhs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct QpSolution {
    pub v: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
}

impl BandedQp {
    pub fn new(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            h: vec![0.0; n * (bw + 1)],
            g: vec![0.0; n],
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    /// Adds `val` to `H[i][j]` and, off the diagonal, to `H[j][i]`.
    pub fn add_h(&mut self, i: usize, j: usize, val: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(hi - lo <= self.bw);
        self.h[hi * (self.bw + 1) + hi - lo] += val;
    }

    /// Adds the constraint `Σ val·v[col] ≥ rhs`.
    pub fn push_row(&mut self, entries: &[(usize, f64)], rhs: f64) {
        let mut row = Row {
            cols: [0; 4],
            vals: [0.0; 4],
            nnz: entries.len(),
        };
        for (k, &(c, v)) in entries.iter().enumerate() {
            row.cols[k] = c;
            row.vals[k] = v;
        }
        self.rows.push(row);
        self.rhs.push(rhs);
    }

    fn h_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        let w = self.bw + 1;
        for i in 0..self.n {
            for k in 0..=self.bw.min(i) {
                let hv = self.h[i * w + k];
                if hv != 0.0 {
                    let j = i - k;
                    out[i] += hv * v[j];
                    if k > 0 {
                        out[j] += hv * v[i];
                    }
                }
            }
        }
        out
    }

    pub fn objective(&self, v: &[f64]) -> f64 {
        let hv = self.h_mul(v);
        v.iter().zip(&hv).zip(&self.g).map(|((x, h), g)| 0.5 * x * h + g * x).sum()
    }

    fn at_mul(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (row, &yr) in self.rows.iter().zip(y) {
            for k in 0..row.nnz {
                out[row.cols[k]] += row.vals[k] * yr;
            }
        }
        out
    }

    fn normal_matrix(&self, d: &[f64], reg: f64) -> Vec<f64> {
        let w = self.bw + 1;
        let mut k = self.h.clone();
        for (row, &dr) in self.rows.iter().zip(d) {
            for a in 0..row.nnz {
                for b in 0..row.nnz {
                    let (ca, cb) = (row.cols[a], row.cols[b]);
                    if ca >= cb {
                        k[ca * w + ca - cb] += dr * row.vals[a] * row.vals[b];
                    }
                }
            }
        }
        for i in 0..self.n {
            k[i * w] += reg;
        }
        k
    }

    pub fn solve(&self, start: &[f64]) -> QpSolution {
        let m = self.rows.len();
        let mut v = start.to_vec();
        let mut w: Vec<f64> = self
            .rows
            .iter()
            .zip(&self.rhs)
            .map(|(r, b)| (r.dot(&v) - b).abs().max(1.0))
            .collect();
        let mut lam = vec![1.0; m];
        let g_scale = 1.0 + self.g.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        let mut converged = false;

        for _ in 0..MAX_ITERS {
            let av: Vec<f64> = self.rows.iter().map(|r| r.dot(&v)).collect();
            let r_p: Vec<f64> = (0..m).map(|i| av[i] - w[i] - self.rhs[i]).collect();
            let hv = self.h_mul(&v);
            let atl = self.at_mul(&lam);
            let r_d: Vec<f64> = (0..self.n).map(|i| hv[i] + self.g[i] - atl[i]).collect();
            let mu = w.iter().zip(&lam).map(|(a, b)| a * b).sum::<f64>() / m.max(1) as f64;
            let obj = self.objective(&v).abs();
            let inf_p = r_p.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
            let inf_d = r_d.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
            if inf_p <= 1e-10 && inf_d <= 1e-10 * g_scale && m as f64 * mu <= 1e-12 * (1.0 + obj) {
                converged = true;
                break;
            }

            let d: Vec<f64> = (0..m).map(|i| lam[i] / w[i]).collect();
            let mut reg = 0.0;
            let factor = loop {
                let mut kmat = self.normal_matrix(&d, reg);
                if band_cholesky(&mut kmat, self.n, self.bw) {
                    break kmat;
                }
                reg = if reg == 0.0 { 1e-12 } else { reg * 100.0 };
                if reg > 1.0 {
                    return QpSolution {
                        objective: self.objective(&v),
                        v,
                        converged: false,
                    };
                }
            };

            let direction = |r3: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
                let t: Vec<f64> = (0..m).map(|i| r3[i] / w[i] - d[i] * r_p[i]).collect();
                let at = self.at_mul(&t);
                let mut dv: Vec<f64> = (0..self.n).map(|i| -r_d[i] + at[i]).collect();
                band_solve(&factor, self.n, self.bw, &mut dv);
                let adv: Vec<f64> = self.rows.iter().map(|r| r.dot(&dv)).collect();
                let dw: Vec<f64> = (0..m).map(|i| adv[i] + r_p[i]).collect();
                let dl: Vec<f64> = (0..m).map(|i| r3[i] / w[i] - d[i] * dw[i]).collect();
                (dv, dw, dl)
            };
            let max_step = |dw: &[f64], dl: &[f64]| -> f64 {
                let mut a: f64 = 1.0;
                for i in 0..m {
                    if dw[i] < 0.0 {
                        a = a.min(-w[i] / dw[i]);
                    }
                    if dl[i] < 0.0 {
                        a = a.min(-lam[i] / dl[i]);
                    }
                }
                a
            };

            let r3_aff: Vec<f64> = (0..m).map(|i| -w[i] * lam[i]).collect();
            let (_, dw_a, dl_a) = direction(&r3_aff);
            let a_aff = max_step(&dw_a, &dl_a);
            let mu_aff = (0..m)
                .map(|i| (w[i] + a_aff * dw_a[i]) * (lam[i] + a_aff * dl_a[i]))
                .sum::<f64>()
                / m.max(1) as f64;
            let sigma = if mu > 0.0 { (mu_aff / mu).powi(3).min(1.0) } else { 0.0 };
            let r3: Vec<f64> = (0..m)
                .map(|i| -w[i] * lam[i] + sigma * mu - dw_a[i] * dl_a[i])
                .collect();
            let (dv, dw, dl) = direction(&r3);
            let step = (STEP_FRACTION * max_step(&dw, &dl)).min(1.0);
            for i in 0..self.n {
                v[i] += step * dv[i];
            }
            for i in 0..m {
                w[i] = (w[i] + step * dw[i]).max(1e-300);
                lam[i] = (lam[i] + step * dl[i]).max(1e-300);
            }
        }
        QpSolution {
            objective: self.objective(&v),
            v,
            converged,
        }
    }
}

/// In-place lower banded Cholesky; `false` on a non-positive pivot.
fn band_cholesky(a: &mut [f64], n: usize, bw: usize) -> bool {
    let w = bw + 1;
    for i in 0..n {
        let j0 = i.saturating_sub(bw);
        for k in j0..=i {
            let mut sum = a[i * w + i - k];
            for j in j0.max(k.saturating_sub(bw))..k {
                sum -= a[i * w + i - j] * a[k * w + k - j];
            }
            if k == i {
                if !(sum > 0.0) {
                    return false;
                }
                a[i * w] = sum.sqrt();
            } else {
                a[i * w + i - k] = sum / a[k * w];
            }
        }
    }
    true
}

fn band_solve(l: &[f64], n: usize, bw: usize, x: &mut [f64]) {
    let w = bw + 1;
    for i in 0..n {
        let mut s = x[i];
        for j in i.saturating_sub(bw)..i {
            s -= l[i * w + i - j] * x[j];
        }
        x[i] = s / l[i * w];
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..(i + bw + 1).min(n) {
            s -= l[k * w + k - i] * x[k];
        }
        x[i] = s / l[i * w];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banded_cholesky_solves_tridiagonal() {
        // [[4,1,0],[1,4,1],[0,1,4]] x = [1,2,3]
        let n = 3;
        let mut a = vec![4.0, 0.0, 4.0, 1.0, 4.0, 1.0];
        assert!(band_cholesky(&mut a, n, 1));
        let mut x = vec![1.0, 2.0, 3.0];
        band_solve(&a, n, 1, &mut x);
        let check = [
            4.0 * x[0] + x[1],
            x[0] + 4.0 * x[1] + x[2],
            x[1] + 4.0 * x[2],
        ];
        for (c, b) in check.iter().zip([1.0, 2.0, 3.0]) {
            assert!((c - b).abs() < 1e-12);
        }
    }

    #[test]
    fn box_constrained_projection() {
        // min (v0 - 2)^2 + (v1 + 1)^2 on [0,1]^2 -> (1, 0)
        let mut qp = BandedQp::new(2, 1);
        qp.add_h(0, 0, 2.0);
        qp.add_h(1, 1, 2.0);
        qp.g = vec![-4.0, 2.0];
        for i in 0..2 {
            qp.push_row(&[(i, 1.0)], 0.0);
            qp.push_row(&[(i, -1.0)], -1.0);
        }
        let sol = qp.solve(&[0.5, 0.5]);
        assert!(sol.converged);
        assert!((sol.v[0] - 1.0).abs() < 1e-8);
        assert!(sol.v[1].abs() < 1e-8);
    }

    #[test]
    fn coupled_constraint() {
        // min v0^2 + v1^2 s.t. v0 + v1 >= 2 -> (1, 1), objective 2
        let mut qp = BandedQp::new(2, 1);
        qp.add_h(0, 0, 2.0);
        qp.add_h(1, 1, 2.0);
        qp.push_row(&[(0, 1.0), (1, 1.0)], 2.0);
        let sol = qp.solve(&[0.0, 0.0]);
        assert!(sol.converged);
        assert!((sol.v[0] - 1.0).abs() < 1e-8 && (sol.v[1] - 1.0).abs() < 1e-8);
        assert!((sol.objective - 2.0).abs() < 1e-8);
    }
}
