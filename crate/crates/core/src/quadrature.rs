//! Adaptive Gauss-Legendre quadrature on a finite interval.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ORDER: usize = 16;
const MAX_DEPTH: u32 = 40;
const MAX_NODES: usize = 4_000_000;

/// Value of an integral together with what it cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
    pub nodes: usize,
}

fn rule() -> &'static ([f64; ORDER], [f64; ORDER]) {
    static RULE: OnceLock<([f64; ORDER], [f64; ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        let mut x = [0.0; ORDER];
        let mut w = [0.0; ORDER];
        let n = ORDER as f64;
        for i in 0..ORDER {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=ORDER {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            x[i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
        (x, w)
    })
}

fn panel<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> f64 {
    let (x, w) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter()
        .zip(w.iter())
        .map(|(xi, wi)| wi * f(mid + half * xi))
        .sum::<f64>()
        * half
}

/// Integrate `f` over `[a, b]`, starting from `panels` equal sub-intervals and
/// bisecting any panel whose two halves disagree with it by more than its
/// share of `tol`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, panels: usize, tol: f64) -> Result<Integral>
where
    F: FnMut(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::Quadrature {
            lo: a,
            hi: b,
            nodes: 0,
            error: f64::NAN,
        });
    }
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error_estimate: 0.0,
            nodes: 0,
        });
    }
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    let mut err = 0.0;
    let mut nodes = 0usize;
    for i in 0..panels {
        let lo = a + i as f64 * width;
        let hi = if i + 1 == panels { b } else { lo + width };
        let whole = panel(&mut f, lo, hi);
        nodes += ORDER;
        let share = tol * (hi - lo) / (b - a);
        let (v, e) = refine(&mut f, lo, hi, whole, share, 0, &mut nodes);
        total += v;
        err += e;
    }
    if !total.is_finite() {
        return Err(Error::Quadrature {
            lo: a,
            hi: b,
            nodes,
            error: err,
        });
    }
    Ok(Integral {
        value: total,
        error_estimate: err,
        nodes,
    })
}

fn refine<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    nodes: &mut usize,
) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let left = panel(f, a, mid);
    let right = panel(f, mid, b);
    *nodes += 2 * ORDER;
    let both = left + right;
    let diff = (both - whole).abs();
    let roundoff = 64.0 * f64::EPSILON * (left.abs() + right.abs());
    if diff <= tol.max(roundoff) || depth >= MAX_DEPTH || *nodes >= MAX_NODES || !diff.is_finite() {
        return (both, diff);
    }
    let (l, el) = refine(f, a, mid, left, 0.5 * tol, depth + 1, nodes);
    let (r, er) = refine(f, mid, b, right, 0.5 * tol, depth + 1, nodes);
    (l + r, el + er)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn weights_sum_to_two() {
        let (_, w) = rule();
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn integrates_polynomial_exactly() {
        let r = integrate(|x| x.powi(7) - 3.0 * x * x, -1.0, 2.0, 1, 1e-14).unwrap();
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0);
        assert_abs_diff_eq!(r.value, exact, epsilon = 1e-12);
    }

    #[test]
    fn integrates_kink() {
        let r = integrate(|x: f64| x.abs(), -1.0, 3.0, 4, 1e-12).unwrap();
        assert_abs_diff_eq!(r.value, 5.0, epsilon = 1e-12);
        let g = integrate(|x: f64| (-x * x).exp(), -8.0, 8.0, 8, 1e-13).unwrap();
        assert_abs_diff_eq!(g.value, std::f64::consts::PI.sqrt(), epsilon = 1e-12);
    }
}
