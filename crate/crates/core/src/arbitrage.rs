//! Butterfly-arbitrage diagnostics: the Dupire denominator `g(y)`, the
//! implied density and grid scans of both.

use serde::{Deserialize, Serialize};

use crate::blackscholes::{black_undiscounted, norm_pdf, OptionKind};
use crate::error::{ensure_positive, Error, Result};
use crate::quadrature::{integrate, Integral};
use crate::smile::{SmileSection, VarianceDerivatives};

/// Relative margin by which a local maximum must exceed both neighbours.
pub const MODE_THRESHOLD: f64 = 1e-6;

/// `g` from the total variance and its derivatives at `y`.
pub fn g_from_derivatives(d: &VarianceDerivatives, y: f64) -> f64 {
    let VarianceDerivatives { w, dw, d2w } = *d;
    1.0 - y / w * dw + 0.25 * (-0.25 - 1.0 / w + y * y / (w * w)) * dw * dw + 0.5 * d2w
}

/// Dupire local variance denominator at log-moneyness `y`.
pub fn g_function<S: SmileSection + ?Sized>(smile: &S, y: f64) -> Result<f64> {
    let d = smile.variance_derivatives(y)?;
    if !(d.w > 0.0) {
        return Err(Error::NegativeVariance { y });
    }
    Ok(g_from_derivatives(&d, y))
}

/// Risk-neutral density per unit strike, `g·φ(d₂)/(K√w)`.
pub fn density<S: SmileSection + ?Sized>(smile: &S, strike: f64) -> Result<f64> {
    ensure_positive(strike, "strike")?;
    let y = smile.log_moneyness(strike);
    let d = smile.variance_derivatives(y)?;
    if !(d.w > 0.0) {
        return Err(Error::NegativeVariance { y });
    }
    let s = d.w.sqrt();
    let d2 = -y / s - 0.5 * s;
    Ok(g_from_derivatives(&d, y) * norm_pdf(d2) / (strike * s))
}

/// Undiscounted out-of-the-money option price at the smile vol.
pub fn otm_price<S: SmileSection + ?Sized>(smile: &S, strike: f64) -> Result<f64> {
    let y = smile.log_moneyness(strike);
    let w = smile.total_variance(y)?;
    if !(w > 0.0) {
        return Err(Error::NegativeVariance { y });
    }
    let kind = if strike < smile.forward() {
        OptionKind::Put
    } else {
        OptionKind::Call
    };
    Ok(black_undiscounted(smile.forward(), strike, w.sqrt(), kind))
}

/// A value with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// `∂²C/∂K²` by Ridders' extrapolation of central second differences,
/// starting from `step` and shrinking it until the tableau stops improving.
///
/// Out-of-the-money prices are differenced; put and call share the same
/// second derivative, and the kink of switching at the forward is avoided by
/// using one side for the whole stencil. The error is the tableau's own
/// estimate.
pub fn density_by_differences<S: SmileSection + ?Sized>(
    smile: &S,
    strike: f64,
    step: f64,
) -> Result<Estimate> {
    const TABLE: usize = 10;
    const SHRINK: f64 = 1.4;
    ensure_positive(strike, "strike")?;
    ensure_positive(step, "step")?;
    let f = smile.forward();
    let kind = if strike < f {
        OptionKind::Put
    } else {
        OptionKind::Call
    };
    let price = |k: f64| -> Result<f64> {
        let y = smile.log_moneyness(k);
        let w = smile.total_variance(y)?;
        if !(w > 0.0) {
            return Err(Error::NegativeVariance { y });
        }
        Ok(black_undiscounted(f, k, w.sqrt(), kind))
    };
    let c = price(strike)?;
    let second = |h: f64| -> Result<f64> {
        Ok((price(strike + h)? - 2.0 * c + price(strike - h)?) / (h * h))
    };
    let mut h = step.min(0.5 * strike);
    let mut table = [[0.0; TABLE]; TABLE];
    table[0][0] = second(h)?;
    let mut best = table[0][0];
    let mut err = f64::INFINITY;
    for i in 1..TABLE {
        h /= SHRINK;
        table[0][i] = second(h)?;
        let mut fac = SHRINK * SHRINK;
        for j in 1..=i {
            table[j][i] = (table[j - 1][i] * fac - table[j - 1][i - 1]) / (fac - 1.0);
            fac *= SHRINK * SHRINK;
            let e = (table[j][i] - table[j - 1][i])
                .abs()
                .max((table[j][i] - table[j - 1][i - 1]).abs());
            if e <= err {
                err = e;
                best = table[j][i];
            }
        }
        if (table[i][i] - table[i - 1][i - 1]).abs() >= 2.0 * err {
            break;
        }
    }
    Ok(Estimate {
        value: best,
        error: err,
    })
}

/// Probability mass of the implied density over `[lo, hi]`.
pub fn density_mass<S: SmileSection + ?Sized>(smile: &S, lo: f64, hi: f64) -> Result<Integral> {
    ensure_positive(lo, "lower strike")?;
    let mut failure = None;
    let r = integrate(
        |k| match density(smile, k) {
            Ok(p) => p,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        lo,
        hi,
        64,
        1e-12,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(r),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GCurve {
    pub y: Vec<f64>,
    /// `NaN` where the total variance is not positive.
    pub g: Vec<f64>,
    pub min_value: f64,
    pub negative_intervals: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DensityCurve {
    pub strikes: Vec<f64>,
    /// `NaN` where the total variance is not positive.
    pub density: Vec<f64>,
    /// Trapezoidal mass over the grid, not renormalised.
    pub integrates_to: f64,
    /// Strikes of the local maxima.
    pub modes: Vec<f64>,
    pub negative_intervals: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRange {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl ScanRange {
    pub const DEFAULT_POINTS: usize = 801;
    pub const DEFAULT_WIDTH: f64 = 5.0;

    /// `±5` ATM standard deviations on 801 points.
    pub fn standard<S: SmileSection + ?Sized>(smile: &S) -> Result<Self> {
        Self::around_atm(smile, Self::DEFAULT_WIDTH, Self::DEFAULT_POINTS)
    }

    pub fn around_atm<S: SmileSection + ?Sized>(smile: &S, width: f64, points: usize) -> Result<Self> {
        let w = smile.total_variance(0.0)?;
        if !(w > 0.0) {
            return Err(Error::NegativeVariance { y: 0.0 });
        }
        let half = width * w.sqrt();
        Ok(Self {
            lo: -half,
            hi: half,
            points,
        })
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        if !(self.hi > self.lo) || self.points < 2 {
            return Err(Error::InvalidInput(format!(
                "scan range [{}, {}] with {} points",
                self.lo, self.hi, self.points
            )));
        }
        let n = self.points - 1;
        Ok((0..=n)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / n as f64)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScanReport {
    pub smile: String,
    pub forward: f64,
    pub expiry: f64,
    pub g: GCurve,
    pub density: DensityCurve,
    /// Log-moneyness runs of grid points with non-positive total variance.
    pub negative_variance: Vec<(f64, f64)>,
}

impl ScanReport {
    pub fn mode_count(&self) -> usize {
        self.density.modes.len()
    }

    pub fn min_g(&self) -> f64 {
        self.g.min_value
    }

    pub fn has_negative_density(&self) -> bool {
        !self.density.negative_intervals.is_empty()
    }
}

/// Runs of consecutive grid points satisfying `pred`, as closed intervals of
/// grid coordinates.
fn runs(x: &[f64], values: &[f64], pred: impl Fn(f64) -> bool) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, v) in values.iter().enumerate() {
        match (pred(*v), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((x[s], x[i - 1]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((x[s], x[x.len() - 1]));
    }
    out
}

/// Interior grid points whose value beats both neighbours by
/// [`MODE_THRESHOLD`] relative.
pub fn local_maxima(x: &[f64], values: &[f64]) -> Vec<f64> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| {
            let p = values[i];
            let margin = MODE_THRESHOLD * p.abs();
            p.is_finite()
                && p > 0.0
                && p - values[i - 1] > margin
                && p - values[i + 1] > margin
        })
        .map(|i| x[i])
        .collect()
}

/// Sample `g` and the density on a uniform log-moneyness grid.
pub fn scan_report<S: SmileSection + ?Sized>(smile: &S, range: ScanRange) -> Result<ScanReport> {
    let y = range.grid()?;
    let f = smile.forward();
    let strikes: Vec<f64> = y.iter().map(|v| f * v.exp()).collect();
    let mut g = Vec::with_capacity(y.len());
    let mut p = Vec::with_capacity(y.len());
    let mut w = Vec::with_capacity(y.len());
    for (yi, k) in y.iter().zip(&strikes) {
        let d = smile.variance_derivatives(*yi)?;
        w.push(d.w);
        if d.w > 0.0 {
            let gi = g_from_derivatives(&d, *yi);
            let s = d.w.sqrt();
            let d2 = -yi / s - 0.5 * s;
            g.push(gi);
            p.push(gi * norm_pdf(d2) / (k * s));
        } else {
            g.push(f64::NAN);
            p.push(f64::NAN);
        }
    }
    let min_value = g
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);
    let integrates_to = strikes
        .windows(2)
        .zip(p.windows(2))
        .filter(|(_, v)| v[0].is_finite() && v[1].is_finite())
        .map(|(k, v)| 0.5 * (k[1] - k[0]) * (v[0] + v[1]))
        .sum();
    Ok(ScanReport {
        smile: smile.name().to_string(),
        forward: f,
        expiry: smile.expiry(),
        g: GCurve {
            negative_intervals: runs(&y, &g, |v| v < 0.0),
            y: y.clone(),
            g,
            min_value,
        },
        density: DensityCurve {
            modes: local_maxima(&strikes, &p),
            negative_intervals: runs(&strikes, &p, |v| v < 0.0),
            strikes,
            density: p,
            integrates_to,
        },
        negative_variance: runs(&y, &w, |v| !(v > 0.0)),
    })
}
