//! Lognormal SABR (β = 1) through the Hagan expansion.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::market::SmileQuoteSet;
use crate::numerics::levenberg_marquardt;
use crate::smile::{SmileSection, VarianceDerivatives};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SabrParams {
    pub alpha: f64,
    pub rho: f64,
    pub nu: f64,
}

impl SabrParams {
    pub fn validate(&self) -> Result<()> {
        ensure_positive(self.alpha, "SABR alpha")?;
        if !(self.rho.abs() < 1.0) {
            return Err(Error::Domain {
                what: "SABR rho",
                value: self.rho,
            });
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::Domain {
                what: "SABR nu",
                value: self.nu,
            });
        }
        Ok(())
    }
}

const SERIES_CUTOFF: f64 = 0.02;

/// `z/x(z)` and its first two derivatives.
fn z_over_x(z: f64, rho: f64) -> (f64, f64, f64) {
    if z.abs() < SERIES_CUTOFF {
        z_over_x_series(z, rho)
    } else {
        z_over_x_closed(z, rho)
    }
}

fn z_over_x_series(z: f64, rho: f64) -> (f64, f64, f64) {
    let r2 = rho * rho;
    let r4 = r2 * r2;
    let r6 = r4 * r2;
    let c = [
        1.0,
        -0.5 * rho,
        (2.0 - 3.0 * r2) / 12.0,
        rho * (5.0 - 6.0 * r2) / 24.0,
        -(225.0 * r4 - 240.0 * r2 + 34.0) / 720.0,
        -rho * (210.0 * r4 - 275.0 * r2 + 74.0) / 480.0,
        -(39690.0 * r6 - 61740.0 * r4 + 24381.0 * r2 - 1468.0) / 60480.0,
        -rho * (124740.0 * r6 - 224910.0 * r4 + 117012.0 * r2 - 15467.0) / 120960.0,
        -(6081075.0 * r4 * r4 - 12474000.0 * r6 + 8051400.0 * r4 - 1680240.0 * r2 + 55718.0)
            / 3628800.0,
    ];
    let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for (n, cn) in c.iter().enumerate().rev() {
        let n = n as f64;
        v = v * z + cn;
        if n >= 1.0 {
            d1 = d1 * z + n * cn;
        }
        if n >= 2.0 {
            d2 = d2 * z + n * (n - 1.0) * cn;
        }
    }
    (v, d1, d2)
}

fn z_over_x_closed(z: f64, rho: f64) -> (f64, f64, f64) {
    let d = (1.0 - 2.0 * rho * z + z * z).sqrt();
    // ln((d + z − ρ)/(1 − ρ)) written as ln(1 + ·) to keep small z accurate
    let x = ((z + (z * z - 2.0 * rho * z) / (d + 1.0)) / (1.0 - rho)).ln_1p();
    let x1 = 1.0 / d;
    let x2 = -(z - rho) / (d * d * d);
    let v = z / x;
    let d1 = 1.0 / x - z * x1 / (x * x);
    let d2 = -2.0 * x1 / (x * x) - z * x2 / (x * x) + 2.0 * z * x1 * x1 / (x * x * x);
    (v, d1, d2)
}

/// Hagan's implied vol for `β = 1`.
pub fn sabr_vol(p: &SabrParams, strike: f64, forward: f64, expiry: f64) -> f64 {
    sabr_vol_derivatives(p, (strike / forward).ln(), expiry).0
}

/// `σ`, `dσ/dy` and `d²σ/dy²` at log-moneyness `y`.
fn sabr_vol_derivatives(p: &SabrParams, y: f64, expiry: f64) -> (f64, f64, f64) {
    let level = 1.0
        + (0.25 * p.rho * p.alpha * p.nu + (2.0 - 3.0 * p.rho * p.rho) * p.nu * p.nu / 24.0) * expiry;
    let z = -p.nu / p.alpha * y;
    let (r, r1, r2) = z_over_x(z, p.rho);
    (
        p.alpha * level * r,
        -p.nu * level * r1,
        level * p.nu * p.nu / p.alpha * r2,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SabrSmile {
    params: SabrParams,
    forward: f64,
    expiry: f64,
}

impl SabrSmile {
    pub fn new(params: SabrParams, forward: f64, expiry: f64) -> Result<Self> {
        params.validate()?;
        ensure_positive(forward, "forward")?;
        ensure_positive(expiry, "time to expiry")?;
        Ok(Self {
            params,
            forward,
            expiry,
        })
    }

    pub fn params(&self) -> &SabrParams {
        &self.params
    }
}

impl SmileSection for SabrSmile {
    fn name(&self) -> &str {
        "sabr"
    }

    fn forward(&self) -> f64 {
        self.forward
    }

    fn expiry(&self) -> f64 {
        self.expiry
    }

    fn total_variance(&self, y: f64) -> Result<f64> {
        let v = sabr_vol_derivatives(&self.params, y, self.expiry).0;
        Ok(v * v * self.expiry)
    }

    fn variance_derivatives(&self, y: f64) -> Result<VarianceDerivatives> {
        let (v, v1, v2) = sabr_vol_derivatives(&self.params, y, self.expiry);
        let t = self.expiry;
        Ok(VarianceDerivatives {
            w: v * v * t,
            dw: 2.0 * v * v1 * t,
            d2w: 2.0 * t * (v1 * v1 + v * v2),
        })
    }
}

/// Least squares on vols over `(ln α, atanh ρ, ln ν)`, best of a small
/// fixed grid of starts.
pub fn calibrate_sabr(quotes: &SmileQuoteSet) -> Result<SabrSmile> {
    let n = quotes.pillars().len();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "SABR needs at least 3 pillars, got {n}"
        )));
    }
    let y = quotes.log_moneyness();
    let vols = quotes.vols();
    let t = quotes.expiry();
    let decode = |x: &[f64]| SabrParams {
        alpha: x[0].exp(),
        rho: x[1].tanh(),
        nu: x[2].exp(),
    };
    let residuals = |x: &[f64]| {
        let p = decode(x);
        y.iter()
            .zip(&vols)
            .map(|(yi, v)| sabr_vol_derivatives(&p, *yi, t).0 - v)
            .collect::<Vec<f64>>()
    };
    let keep_finite = |x: &mut [f64]| {
        x[1] = x[1].clamp(-20.0, 20.0);
        x[2] = x[2].clamp(-30.0, 5.0);
    };
    let alpha0 = quotes.atm_vol().ln();
    let mut best = None::<(f64, Vec<f64>)>;
    for rho0 in [-0.5f64, 0.0, 0.5] {
        for nu0 in [0.3f64, 1.0, 3.0] {
            let m = levenberg_marquardt(
                residuals,
                keep_finite,
                &[alpha0, rho0.atanh(), nu0.ln()],
                500,
            );
            if m.value.is_finite() && best.as_ref().is_none_or(|b| m.value < b.0) {
                best = Some((m.value, m.x));
            }
        }
    }
    let (value, x) = best.ok_or(Error::CalibrationFailed {
        objective: f64::NAN,
        reason: "every start diverged".into(),
    })?;
    let params = decode(&x);
    SabrSmile::new(params, quotes.forward(), t).map_err(|e| Error::CalibrationFailed {
        objective: value,
        reason: e.to_string(),
    })
}
