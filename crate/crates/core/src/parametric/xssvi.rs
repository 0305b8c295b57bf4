//! SSVI slice anchored at the ATM quote, with the butterfly no-arbitrage
//! constraints enforced during calibration.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::market::SmileQuoteSet;
use crate::numerics::{brent, levenberg_marquardt};
use crate::smile::{SmileSection, VarianceDerivatives};

/// `w(y) = θ/2·(1 + ρφy + √((φy + ρ)² + 1 − ρ²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XssviParams {
    pub theta: f64,
    pub rho: f64,
    pub phi: f64,
}

impl XssviParams {
    pub fn validate(&self) -> Result<()> {
        ensure_positive(self.theta, "xSSVI theta")?;
        ensure_positive(self.phi, "xSSVI phi")?;
        if !(self.rho.abs() < 1.0) {
            return Err(Error::Domain {
                what: "xSSVI rho",
                value: self.rho,
            });
        }
        Ok(())
    }

    /// `θφ(1 + |ρ|) < 4` and `θφ²(1 + |ρ|) ≤ 4`.
    pub fn is_arbitrage_free(&self) -> bool {
        let psi = self.theta * self.phi;
        let r = 1.0 + self.rho.abs();
        psi * r < 4.0 && psi * psi * r <= 4.0 * self.theta * (1.0 + 1e-12)
    }

    /// Parameters through `(k*, θ*)` for given `ρ` and `ψ = θφ`.
    fn anchored(anchor_y: f64, anchor_w: f64, rho: f64, psi: f64) -> Self {
        let theta = anchor_w
            - rho * psi * anchor_y
            - psi * psi * anchor_y * anchor_y * (1.0 - rho * rho) / (4.0 * anchor_w);
        Self {
            theta,
            rho,
            phi: psi / theta,
        }
    }
}

pub fn xssvi_total_variance(p: &XssviParams, y: f64) -> VarianceDerivatives {
    let u = p.phi * y + p.rho;
    let q = 1.0 - p.rho * p.rho;
    let r = (u * u + q).sqrt();
    VarianceDerivatives {
        w: 0.5 * p.theta * (1.0 + p.rho * p.phi * y + r),
        dw: 0.5 * p.theta * p.phi * (p.rho + u / r),
        d2w: 0.5 * p.theta * p.phi * p.phi * q / (r * r * r),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XssviSmile {
    params: XssviParams,
    forward: f64,
    expiry: f64,
}

impl XssviSmile {
    pub fn new(params: XssviParams, forward: f64, expiry: f64) -> Result<Self> {
        params.validate()?;
        ensure_positive(forward, "forward")?;
        ensure_positive(expiry, "time to expiry")?;
        Ok(Self {
            params,
            forward,
            expiry,
        })
    }

    pub fn params(&self) -> &XssviParams {
        &self.params
    }
}

impl SmileSection for XssviSmile {
    fn name(&self) -> &str {
        "xssvi"
    }

    fn forward(&self) -> f64 {
        self.forward
    }

    fn expiry(&self) -> f64 {
        self.expiry
    }

    fn total_variance(&self, y: f64) -> Result<f64> {
        Ok(xssvi_total_variance(&self.params, y).w)
    }

    fn variance_derivatives(&self, y: f64) -> Result<VarianceDerivatives> {
        Ok(xssvi_total_variance(&self.params, y))
    }
}

/// Fit `(ρ, ψ)` by least squares on vols, the slice being forced through
/// the ATM quote. Every trial point is projected back into the
/// no-arbitrage region by shrinking `ψ`.
pub fn calibrate_xssvi(quotes: &SmileQuoteSet) -> Result<XssviSmile> {
    let n = quotes.pillars().len();
    if n < 4 {
        return Err(Error::InvalidInput(format!(
            "xSSVI needs at least 4 pillars, got {n}"
        )));
    }
    let y = quotes.log_moneyness();
    let vols = quotes.vols();
    let t = quotes.expiry();
    let atm = quotes.atm_index().unwrap_or_else(|| {
        (0..n)
            .min_by(|&a, &b| y[a].abs().total_cmp(&y[b].abs()))
            .unwrap_or(0)
    });
    let (ky, kw) = (y[atm], vols[atm] * vols[atm] * t);

    let decode = |x: &[f64]| XssviParams::anchored(ky, kw, x[0].tanh(), x[1].exp());
    let admissible = |x: &[f64]| {
        let p = decode(x);
        p.theta > 0.0 && p.is_arbitrage_free()
    };
    let project = |x: &mut [f64]| {
        x[0] = x[0].clamp(-15.0, 15.0);
        if admissible(x) {
            return;
        }
        // ψ → 0 is always admissible; find the boundary below the trial ψ
        let rho_x = x[0];
        let inside = |lnpsi: f64| if admissible(&[rho_x, lnpsi]) { 1.0 } else { -1.0 };
        let mut lo = x[1] - 1.0;
        while inside(lo) < 0.0 && lo > -60.0 {
            lo -= 5.0;
        }
        if let Ok(b) = brent(inside, lo, x[1], 1e-13, 200) {
            let mut v = b;
            while !admissible(&[rho_x, v]) {
                v -= 1e-12;
            }
            x[1] = v;
        } else {
            x[1] = lo;
        }
    };
    let residuals = |x: &[f64]| {
        let p = decode(x);
        y.iter()
            .zip(&vols)
            .map(|(yi, v)| {
                let w = xssvi_total_variance(&p, *yi).w;
                (w.max(0.0) / t).sqrt() - v
            })
            .collect::<Vec<f64>>()
    };
    let psi0 = (vols[atm] * t.sqrt()).ln();
    let mut best = None::<(f64, Vec<f64>)>;
    for rho0 in [-0.5f64, 0.0, 0.5] {
        for shift in [-2.0, 0.0] {
            let m = levenberg_marquardt(residuals, project, &[rho0.atanh(), psi0 + shift], 500);
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
    if !params.is_arbitrage_free() {
        return Err(Error::CalibrationFailed {
            objective: value,
            reason: "fit left the no-arbitrage region".into(),
        });
    }
    XssviSmile::new(params, quotes.forward(), t)
}
