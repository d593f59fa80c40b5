//! Thin wrappers over `statrs` for the regularized incomplete beta function,
//! its inverse and the standard normal distribution.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta;
use std::sync::OnceLock;

fn std_normal() -> &'static Normal {
    static N: OnceLock<Normal> = OnceLock::new();
    N.get_or_init(Normal::standard)
}

/// Regularized incomplete beta function I_t(a, b), with `t` clamped to [0, 1].
pub fn beta_reg(a: f64, b: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    beta::beta_reg(a, b, t)
}

/// Inverse of `beta_reg` in its last argument, polished with safeguarded
/// Newton steps.
pub fn beta_reg_inv(a: f64, b: f64, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let mut t = beta::inv_beta_reg(a, b, u).clamp(0.0, 1.0);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let ln_b = beta::ln_beta(a, b);
    for _ in 0..50 {
        let f = beta_reg(a, b, t) - u;
        if f.abs() <= 1e-15 {
            break;
        }
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let dens = ((a - 1.0) * t.ln() + (b - 1.0) * (1.0 - t).ln() - ln_b).exp();
        let mut next = if dens.is_finite() && dens > 0.0 {
            t - f / dens
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-17 {
            t = next;
            break;
        }
        t = next;
    }
    t
}

pub fn norm_cdf(z: f64) -> f64 {
    std_normal().cdf(z)
}

pub fn norm_quantile(u: f64) -> f64 {
    std_normal().inverse_cdf(u)
}
