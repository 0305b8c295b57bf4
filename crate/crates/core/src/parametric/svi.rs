//! SVI in total variance, calibrated by the quasi-explicit method.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::market::SmileQuoteSet;
use crate::numerics::{lstsq, nelder_mead};
use crate::smile::{SmileSection, VarianceDerivatives};

/// Per-annum SVI parameters:
/// `w(y) = T·(a + b·(ρ(y − m) + √((y − m)² + s²)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SviParams {
    pub a: f64,
    pub b: f64,
    pub rho: f64,
    pub m: f64,
    pub s: f64,
}

impl SviParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.b >= 0.0) {
            return Err(Error::Domain {
                what: "SVI b",
                value: self.b,
            });
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(Error::Domain {
                what: "SVI rho",
                value: self.rho,
            });
        }
        ensure_positive(self.s, "SVI s")?;
        if !(self.a.is_finite() && self.m.is_finite()) {
            return Err(Error::InvalidInput("SVI a and m must be finite".into()));
        }
        Ok(())
    }
}

/// Total variance and its first two derivatives in `y`.
pub fn svi_total_variance(p: &SviParams, y: f64, expiry: f64) -> VarianceDerivatives {
    let x = y - p.m;
    let r = (x * x + p.s * p.s).sqrt();
    VarianceDerivatives {
        w: expiry * (p.a + p.b * (p.rho * x + r)),
        dw: expiry * p.b * (p.rho + x / r),
        d2w: expiry * p.b * p.s * p.s / (r * r * r),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SviSmile {
    name: String,
    params: SviParams,
    forward: f64,
    expiry: f64,
}

impl SviSmile {
    pub fn new(params: SviParams, forward: f64, expiry: f64) -> Result<Self> {
        params.validate()?;
        ensure_positive(forward, "forward")?;
        ensure_positive(expiry, "time to expiry")?;
        Ok(Self {
            name: "svi".into(),
            params,
            forward,
            expiry,
        })
    }

    pub fn params(&self) -> &SviParams {
        &self.params
    }
}

impl SmileSection for SviSmile {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&self) -> f64 {
        self.forward
    }

    fn expiry(&self) -> f64 {
        self.expiry
    }

    fn total_variance(&self, y: f64) -> Result<f64> {
        Ok(svi_total_variance(&self.params, y, self.expiry).w)
    }

    fn variance_derivatives(&self, y: f64) -> Result<VarianceDerivatives> {
        Ok(svi_total_variance(&self.params, y, self.expiry))
    }
}

/// Linear part `w = A + D·z + C·√(z² + 1)` for fixed `(m, s)`.
#[derive(Debug, Clone, Copy)]
struct Inner {
    coef: [f64; 3],
    objective: f64,
}

/// Constraint rows `g·(A, D, C) ≥ 0`: `C ≥ 0`, `C − D ≥ 0`, `C + D ≥ 0` and,
/// optionally, `A ≥ 0`.
fn constraint_rows(a_non_negative: bool) -> Vec<[f64; 3]> {
    let mut g = vec![[0.0, 0.0, 1.0], [0.0, -1.0, 1.0], [0.0, 1.0, 1.0]];
    if a_non_negative {
        g.push([1.0, 0.0, 0.0]);
    }
    g
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Orthonormal basis of the vectors orthogonal to every row in `active`.
fn null_space(active: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let mut row_basis: Vec<[f64; 3]> = Vec::new();
    let orthogonalise = |v: [f64; 3], basis: &[[f64; 3]]| {
        let mut u = v;
        for e in basis {
            let c = dot(&u, e);
            for k in 0..3 {
                u[k] -= c * e[k];
            }
        }
        let n = dot(&u, &u).sqrt();
        (n > 1e-10).then(|| [u[0] / n, u[1] / n, u[2] / n])
    };
    for g in active {
        if let Some(e) = orthogonalise(*g, &row_basis) {
            row_basis.push(e);
        }
    }
    let mut all = row_basis.clone();
    let mut out = Vec::new();
    for unit in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
        if let Some(e) = orthogonalise(unit, &all) {
            all.push(e);
            out.push(e);
        }
    }
    out
}

/// Constrained linear least squares by enumerating active sets.
fn solve_inner(y: &[f64], w: &[f64], m: f64, s: f64, a_non_negative: bool) -> Option<Inner> {
    let rows: Vec<[f64; 3]> = y
        .iter()
        .map(|yi| {
            let z = (yi - m) / s;
            [1.0, z, (z * z + 1.0).sqrt()]
        })
        .collect();
    let g = constraint_rows(a_non_negative);
    let mut best: Option<Inner> = None;
    for mask in 0u32..(1 << g.len()) {
        if mask.count_ones() > 3 {
            continue;
        }
        let active: Vec<[f64; 3]> = (0..g.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| g[i])
            .collect();
        let basis = null_space(&active);
        let coef = if basis.is_empty() {
            [0.0; 3]
        } else {
            let reduced: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| basis.iter().map(|e| dot(r, e)).collect())
                .collect();
            let Ok(q) = lstsq(&reduced, w) else {
                continue;
            };
            let mut c = [0.0; 3];
            for (qi, e) in q.iter().zip(&basis) {
                for k in 0..3 {
                    c[k] += qi * e[k];
                }
            }
            c
        };
        if g.iter().any(|gi| dot(gi, &coef) < -1e-14) {
            continue;
        }
        let objective: f64 = rows
            .iter()
            .zip(w)
            .map(|(r, wi)| (dot(r, &coef) - wi).powi(2))
            .sum();
        if best.is_none_or(|b| objective < b.objective) {
            best = Some(Inner { coef, objective });
        }
    }
    best
}

/// Quasi-explicit SVI fit to the pillar total variances.
///
/// Nelder-Mead over `(m, ln s)` from a 5×5 grid of starts; for each `(m, s)`
/// the remaining three parameters solve a constrained linear least-squares
/// problem exactly.
pub fn calibrate_svi(quotes: &SmileQuoteSet, a_non_negative: bool) -> Result<SviSmile> {
    let y = quotes.log_moneyness();
    let w = quotes.total_variances();
    if y.len() < 5 {
        return Err(Error::InvalidInput(format!(
            "SVI needs at least 5 pillars, got {}",
            y.len()
        )));
    }
    let t = quotes.expiry();
    let (ymin, ymax) = (y[0], y[y.len() - 1]);
    let span = ymax - ymin;
    let objective = |x: &[f64]| {
        solve_inner(&y, &w, x[0], x[1].exp(), a_non_negative).map_or(f64::INFINITY, |i| i.objective)
    };
    let mut best: Option<(f64, f64, f64)> = None;
    for i in 0..5 {
        let m0 = ymin + span * i as f64 / 4.0;
        for j in 0..5 {
            let s0 = span * (0.1 + 1.9 * j as f64 / 4.0);
            let r = nelder_mead(
                objective,
                &[m0, s0.ln()],
                &[0.05 * span, 0.1],
                1e-26,
                1e-12,
                4000,
            );
            if best.is_none_or(|b| r.value < b.0) {
                best = Some((r.value, r.x[0], r.x[1].exp()));
            }
        }
    }
    let (value, m, s) = best.ok_or_else(|| Error::CalibrationFailed {
        objective: f64::NAN,
        reason: "no start produced a value".into(),
    })?;
    let inner = solve_inner(&y, &w, m, s, a_non_negative)
        .filter(|i| i.objective.is_finite())
        .ok_or(Error::CalibrationFailed {
            objective: value,
            reason: "inner problem infeasible".into(),
        })?;
    let [a_tot, d, c] = inner.coef;
    let (b, rho) = if c > 0.0 {
        (c / (t * s), (d / c).clamp(-1.0, 1.0))
    } else {
        (0.0, 0.0)
    };
    let params = SviParams {
        a: a_tot / t,
        b,
        rho,
        m,
        s,
    };
    let mut smile = SviSmile::new(params, quotes.forward(), t)?;
    if a_non_negative {
        smile.name = "svi-a0".into();
    }
    Ok(smile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{DeltaConvention, MarketInputs, PillarKind};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn five() -> Vec<PillarKind> {
        vec![
            PillarKind::put(0.10),
            PillarKind::put(0.25),
            PillarKind::Atm,
            PillarKind::call(0.25),
            PillarKind::call(0.10),
        ]
    }

    #[test]
    fn simple_shapes() {
        let flat = SviParams {
            a: 0.04,
            b: 0.0,
            rho: 0.3,
            m: 0.1,
            s: 0.2,
        };
        for y in [-1.0, 0.0, 2.0] {
            assert_abs_diff_eq!(svi_total_variance(&flat, y, 2.0).w, 0.08, epsilon = 1e-16);
        }
        let p = SviParams { b: 0.1, ..flat };
        assert_abs_diff_eq!(svi_total_variance(&p, 0.1, 2.0).w, 2.0 * (0.04 + 0.1 * 0.2), epsilon = 1e-16);
        let far = svi_total_variance(&p, 1e6, 2.0).dw;
        assert_abs_diff_eq!(far, 2.0 * 0.1 * 1.3, epsilon = 1e-9);
        let far = svi_total_variance(&p, -1e6, 2.0).dw;
        assert_abs_diff_eq!(far, 2.0 * 0.1 * (0.3 - 1.0), epsilon = 1e-9);
    }

    #[test]
    fn recovers_synthetic_parameters() {
        let truth = SviSmile::new(
            SviParams {
                a: 0.01,
                b: 0.1,
                rho: -0.3,
                m: 0.0,
                s: 0.2,
            },
            1.0,
            1.0,
        )
        .unwrap();
        let inputs = MarketInputs::flat(1.0, 1.0, DeltaConvention::FORWARD);
        let q = SmileQuoteSet::from_vol_fn(inputs, &five(), 0.15, |k| truth.vol(k)).unwrap();
        let fit = calibrate_svi(&q, false).unwrap();
        let rmse = (q
            .strikes()
            .iter()
            .zip(q.vols())
            .map(|(k, v)| (fit.vol(*k).unwrap() - v).powi(2))
            .sum::<f64>()
            / 5.0)
            .sqrt();
        assert!(rmse < 1e-8, "rmse {rmse}");
    }

    #[test]
    fn inner_respects_constraints() {
        // a downward-sloping straight line would need |ρ| > 1
        let y = [-0.2, -0.1, 0.0, 0.1, 0.2];
        let w: Vec<f64> = y.iter().map(|v| 0.04 - 0.5 * v).collect();
        let inner = solve_inner(&y, &w, 0.0, 0.1, true).unwrap();
        let [a, d, c] = inner.coef;
        assert!(c >= 0.0 && d.abs() <= c + 1e-14 && a >= -1e-14);
    }

    proptest! {
        #[test]
        fn derivatives_match_differences(a in -0.02f64..0.05, b in 0.0f64..0.5, rho in -0.99f64..0.99,
                                         m in -0.3f64..0.3, s in 0.01f64..0.5, y in -1.0f64..1.0) {
            let p = SviParams { a, b, rho, m, s };
            // step scaled to the curvature radius, Richardson on two steps
            let h = 1e-3 * ((y - m).powi(2) + s * s).sqrt();
            let d = svi_total_variance(&p, y, 0.7);
            let central = |h: f64| {
                let wp = svi_total_variance(&p, y + h, 0.7);
                let wm = svi_total_variance(&p, y - h, 0.7);
                ((wp.w - wm.w) / (2.0 * h), (wp.dw - wm.dw) / (2.0 * h))
            };
            let (a1, a2) = central(h);
            let (b1, b2) = central(0.5 * h);
            let fd1 = (4.0 * b1 - a1) / 3.0;
            let fd2 = (4.0 * b2 - a2) / 3.0;
            prop_assert!((d.dw - fd1).abs() <= 1e-7 * d.dw.abs().max(1e-3));
            prop_assert!((d.d2w - fd2).abs() <= 1e-7 * d.d2w.abs().max(1e-3));
        }
    }
}
