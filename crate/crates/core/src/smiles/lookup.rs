//! Solving `σ = f(Δ(K, σ))` for smiles parameterised in delta.

use serde::{Deserialize, Serialize};

use crate::blackscholes::{norm_cdf, norm_pdf};
use crate::error::{Error, Result};
use crate::numerics::brent;
use crate::smile::VarianceDerivatives;

/// Which delta a smile is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaKind {
    /// `Φ(ln(F/K) / (σ_ATM √T))`; does not depend on the candidate vol.
    ReducedAtm,
    /// `Φ(ln(F/K) / (σ √T))` at the candidate vol.
    BarForward,
    /// Forward call delta without premium, `Φ(d1)`.
    ForwardNoPremium,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum StrikeSolverMethod {
    FixedPoint { max_iter: usize },
    Newton { tol: f64, max_iter: usize },
    Brent { tol: f64 },
}

impl StrikeSolverMethod {
    pub const FIXED_POINT: Self = Self::FixedPoint { max_iter: 100 };
    pub const NEWTON: Self = Self::Newton {
        tol: 1e-14,
        max_iter: 100,
    };
    pub const BRENT: Self = Self::Brent { tol: 1e-15 };
}

impl Default for StrikeSolverMethod {
    fn default() -> Self {
        Self::NEWTON
    }
}

/// One fixed-point iteration: the delta at the current vol and the vol it
/// maps to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointStep {
    pub delta: f64,
    pub vol: f64,
}

/// Full record of a fixed-point run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointTrace {
    pub strike: f64,
    pub start_vol: f64,
    pub iterations: usize,
    pub converged: bool,
    pub steps: Vec<FixedPointStep>,
    /// Deltas the iteration settles on when it does not converge: the means
    /// of the last 16 iterates split by parity, ascending.
    pub cycle_points: Option<[f64; 2]>,
}

const CYCLE_WINDOW: usize = 16;

impl FixedPointTrace {
    fn finish(mut self) -> Self {
        self.iterations = self.steps.len();
        if !self.converged && self.steps.len() >= CYCLE_WINDOW {
            let tail = &self.steps[self.steps.len() - CYCLE_WINDOW..];
            let mean = |parity: usize| {
                let v: Vec<f64> = tail
                    .iter()
                    .skip(parity)
                    .step_by(2)
                    .map(|s| s.delta)
                    .collect();
                v.iter().sum::<f64>() / v.len() as f64
            };
            let (a, b) = (mean(0), mean(1));
            self.cycle_points = Some([a.min(b), a.max(b)]);
        }
        self
    }
}

/// Delta definition bound to one maturity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaLookup {
    pub kind: DeltaKind,
    pub forward: f64,
    pub expiry: f64,
    pub atm_vol: f64,
}

const VOL_FLOOR: f64 = 1e-6;

impl DeltaLookup {
    pub fn delta(&self, strike: f64, vol: f64) -> f64 {
        let sq = self.expiry.sqrt();
        let lnfk = (self.forward / strike).ln();
        match self.kind {
            DeltaKind::ReducedAtm => norm_cdf(lnfk / (self.atm_vol * sq)),
            DeltaKind::BarForward => norm_cdf(lnfk / (vol * sq)),
            DeltaKind::ForwardNoPremium => norm_cdf(lnfk / (vol * sq) + 0.5 * vol * sq),
        }
    }

    pub fn d_delta_d_vol(&self, strike: f64, vol: f64) -> f64 {
        let sq = self.expiry.sqrt();
        let lnfk = (self.forward / strike).ln();
        match self.kind {
            DeltaKind::ReducedAtm => 0.0,
            DeltaKind::BarForward => {
                let u = lnfk / (vol * sq);
                -norm_pdf(u) * u / vol
            }
            DeltaKind::ForwardNoPremium => {
                let d1 = lnfk / (vol * sq) + 0.5 * vol * sq;
                let d2 = d1 - vol * sq;
                -norm_pdf(d1) * d2 / vol
            }
        }
    }

    /// Total variance and its log-moneyness derivatives at a solved point
    /// `vol = f(Δ(y, vol))`, given `f′` and `f″` at that delta.
    pub fn variance_derivatives(&self, y: f64, vol: f64, df: f64, d2f: f64) -> VarianceDerivatives {
        let sq = self.expiry.sqrt();
        // u(y, σ) with Δ = Φ(u), and its partials
        let (u, uy, us, uys, uss) = match self.kind {
            DeltaKind::ReducedAtm => (-y / (self.atm_vol * sq), -1.0 / (self.atm_vol * sq), 0.0, 0.0, 0.0),
            DeltaKind::BarForward | DeltaKind::ForwardNoPremium => {
                let shift = if self.kind == DeltaKind::ForwardNoPremium {
                    0.5 * vol * sq
                } else {
                    0.0
                };
                let half = if self.kind == DeltaKind::ForwardNoPremium {
                    0.5 * sq
                } else {
                    0.0
                };
                let vs = vol * sq;
                (
                    -y / vs + shift,
                    -1.0 / vs,
                    y / (vol * vs) + half,
                    1.0 / (vol * vs),
                    -2.0 * y / (vol * vol * vs),
                )
            }
        };
        let phi = norm_pdf(u);
        let dy = phi * uy;
        let ds = phi * us;
        let dyy = -phi * u * uy * uy;
        let dys = phi * (uys - u * uy * us);
        let dss = phi * (uss - u * us * us);
        // G(y, σ) = σ − f(Δ(y, σ)) = 0
        let gy = -df * dy;
        let gs = 1.0 - df * ds;
        let gyy = -(d2f * dy * dy + df * dyy);
        let gys = -(d2f * dy * ds + df * dys);
        let gss = -(d2f * ds * ds + df * dss);
        let v1 = -gy / gs;
        let v2 = -(gyy + 2.0 * gys * v1 + gss * v1 * v1) / gs;
        let t = self.expiry;
        VarianceDerivatives {
            w: vol * vol * t,
            dw: 2.0 * t * vol * v1,
            d2w: 2.0 * t * (v1 * v1 + vol * v2),
        }
    }

    /// Bracket searched by Brent and used to safeguard Newton.
    pub fn vol_bracket(&self) -> (f64, f64) {
        (VOL_FLOOR, 5.0 * self.atm_vol + 1.0)
    }

    /// Iterate `σ ← f(Δ(K, σ))` from the ATM vol.
    pub fn fixed_point<F>(&self, strike: f64, max_iter: usize, f: F) -> FixedPointTrace
    where
        F: Fn(f64) -> (f64, f64),
    {
        let mut trace = FixedPointTrace {
            strike,
            start_vol: self.atm_vol,
            iterations: 0,
            converged: false,
            steps: Vec::with_capacity(max_iter),
            cycle_points: None,
        };
        let mut vol = self.atm_vol;
        for _ in 0..max_iter {
            let delta = self.delta(strike, vol);
            let next = f(delta).0;
            trace.steps.push(FixedPointStep { delta, vol: next });
            if !(next.is_finite() && next > 0.0) {
                break;
            }
            if (next - vol).abs() < 1e-10 {
                trace.converged = true;
                break;
            }
            vol = next;
        }
        trace.finish()
    }

    /// Vol at `strike` for a smile given as `f(Δ) = (σ, dσ/dΔ)`.
    pub fn solve<F>(&self, strike: f64, method: StrikeSolverMethod, f: F) -> Result<f64>
    where
        F: Fn(f64) -> (f64, f64),
    {
        let vol = match method {
            StrikeSolverMethod::FixedPoint { max_iter } => {
                let trace = self.fixed_point(strike, max_iter, &f);
                match (trace.converged, trace.steps.last()) {
                    (true, Some(last)) => last.vol,
                    _ => return Err(Error::FixedPointDiverged(Box::new(trace))),
                }
            }
            StrikeSolverMethod::Newton { tol, max_iter } => self.newton(strike, tol, max_iter, &f)?,
            StrikeSolverMethod::Brent { tol } => {
                let (lo, hi) = self.vol_bracket();
                brent(|s| f(self.delta(strike, s)).0 - s, lo, hi, tol, 300)?
            }
        };
        if !(vol > 0.0) {
            return Err(Error::NegativeVariance {
                y: (strike / self.forward).ln(),
            });
        }
        Ok(vol)
    }

    fn newton<F>(&self, strike: f64, tol: f64, max_iter: usize, f: &F) -> Result<f64>
    where
        F: Fn(f64) -> (f64, f64),
    {
        if self.kind == DeltaKind::ReducedAtm {
            return Ok(f(self.delta(strike, self.atm_vol)).0);
        }
        let g = |s: f64| {
            let d = self.delta(strike, s);
            let (v, dv) = f(d);
            (v - s, dv * self.d_delta_d_vol(strike, s) - 1.0)
        };
        let (mut lo, mut hi) = self.vol_bracket();
        let (glo, ghi) = (g(lo).0, g(hi).0);
        let bracketed = glo.is_finite() && ghi.is_finite() && glo.signum() != ghi.signum();
        let mut s = self.atm_vol;
        for _ in 0..max_iter {
            let (gv, gd) = g(s);
            if gv == 0.0 {
                return Ok(s);
            }
            if bracketed {
                if gv.signum() == glo.signum() {
                    lo = s;
                } else {
                    hi = s;
                }
            }
            let mut next = s - gv / gd;
            if !next.is_finite() || next <= lo || next >= hi {
                next = if bracketed {
                    0.5 * (lo + hi)
                } else {
                    next.clamp(lo, hi)
                };
            }
            if (next - s).abs() < tol * s.max(1.0) {
                return Ok(next);
            }
            s = next;
        }
        Err(Error::NotConverged {
            method: "newton",
            iterations: max_iter,
        })
    }
}
