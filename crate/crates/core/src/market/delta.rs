//! Delta conventions and the strike/delta mapping.

use crate::blackscholes::{norm_cdf, norm_inv_cdf, norm_pdf, OptionKind};
use crate::error::{ensure_positive, Error, Result};
use crate::numerics::brent;

use super::{AtmKind, DeltaConvention, DeltaMeasure};

/// Everything needed to turn a (strike, vol) pair into a quoted delta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaContext {
    pub forward: f64,
    pub expiry: f64,
    pub foreign_discount: f64,
    pub convention: DeltaConvention,
}

impl DeltaContext {
    fn measure_scale(&self) -> f64 {
        match self.convention.measure {
            DeltaMeasure::Spot => self.foreign_discount,
            DeltaMeasure::Forward => 1.0,
        }
    }
}

/// Forward delta. Without premium `±Φ(±d1)`; premium adjusted
/// `±(K/F)·Φ(±d2)`.
pub fn forward_delta(
    strike: f64,
    vol: f64,
    expiry: f64,
    forward: f64,
    kind: OptionKind,
    premium_adjusted: bool,
) -> Result<f64> {
    ensure_positive(strike, "strike")?;
    ensure_positive(vol, "vol")?;
    ensure_positive(expiry, "expiry")?;
    ensure_positive(forward, "forward")?;
    let s = vol * expiry.sqrt();
    let d1 = (forward / strike).ln() / s + 0.5 * s;
    let eta = kind.sign();
    Ok(if premium_adjusted {
        eta * strike / forward * norm_cdf(eta * (d1 - s))
    } else {
        eta * norm_cdf(eta * d1)
    })
}

/// Signed delta under the full quoting convention (spot deltas are forward
/// deltas scaled by the foreign discount factor).
pub fn convention_delta(strike: f64, vol: f64, kind: OptionKind, ctx: &DeltaContext) -> Result<f64> {
    let d = forward_delta(
        strike,
        vol,
        ctx.expiry,
        ctx.forward,
        kind,
        ctx.convention.premium_adjusted,
    )?;
    Ok(d * ctx.measure_scale())
}

/// `Φ(ln(F/K) / (σ_ref √T))`.
///
/// With `σ_ref` the ATM vol this is the simplified delta of polynomial
/// smiles; with the candidate vol it is the driftless forward delta used by
/// exponential-polynomial smiles.
pub fn reduced_delta(strike: f64, ref_vol: f64, expiry: f64, forward: f64) -> Result<f64> {
    ensure_positive(strike, "strike")?;
    ensure_positive(ref_vol, "reference vol")?;
    ensure_positive(expiry, "expiry")?;
    ensure_positive(forward, "forward")?;
    Ok(norm_cdf((forward / strike).ln() / (ref_vol * expiry.sqrt())))
}

/// ATM strike for the convention's ATM definition.
pub fn atm_strike(vol: f64, ctx: &DeltaContext) -> Result<f64> {
    ensure_positive(vol, "vol")?;
    let var = vol * vol * ctx.expiry;
    Ok(match ctx.convention.atm_kind {
        AtmKind::ForwardAtm => ctx.forward,
        AtmKind::DeltaNeutralStraddle if ctx.convention.premium_adjusted => {
            ctx.forward * (-0.5 * var).exp()
        }
        AtmKind::DeltaNeutralStraddle => ctx.forward * (0.5 * var).exp(),
    })
}

/// Strike whose quoted delta is `delta` (unsigned, puts and calls alike).
///
/// Closed form without premium. Premium-adjusted deltas are solved with
/// Brent on `[F e^{-8σ√T}, F e^{8σ√T}]`; the call delta is not monotone in
/// the strike and the root above the delta maximum is returned.
pub fn strike_from_delta(delta: f64, kind: OptionKind, vol: f64, ctx: &DeltaContext) -> Result<f64> {
    ensure_positive(vol, "vol")?;
    ensure_positive(delta, "delta")?;
    let target = delta / ctx.measure_scale();
    let f = ctx.forward;
    let s = vol * ctx.expiry.sqrt();

    if !ctx.convention.premium_adjusted {
        if target >= 1.0 {
            return Err(Error::Domain {
                what: "forward delta",
                value: target,
            });
        }
        let d1 = match kind {
            OptionKind::Call => norm_inv_cdf(target)?,
            OptionKind::Put => -norm_inv_cdf(target)?,
        };
        return Ok(f * (-d1 * s + 0.5 * s * s).exp());
    }

    let lo = f * (-8.0 * s).exp();
    let hi = f * (8.0 * s).exp();
    // work in ln K for a well-scaled bracket
    let g = |x: f64| {
        let k = f * x.exp();
        let d2 = -x / s - 0.5 * s;
        match kind {
            OptionKind::Call => k / f * norm_cdf(d2) - target,
            OptionKind::Put => k / f * norm_cdf(-d2) - target,
        }
    };
    let (a, b) = match kind {
        OptionKind::Put => ((lo / f).ln(), (hi / f).ln()),
        OptionKind::Call => {
            let peak = premium_call_delta_peak(s)?;
            (peak.ln().max((lo / f).ln()), (hi / f).ln())
        }
    };
    if a >= b || g(a).signum() == g(b).signum() {
        return Err(Error::NoSolution { lo, hi });
    }
    let x = brent(g, a, b, 1e-16, 300).map_err(|_| Error::NoSolution { lo, hi })?;
    Ok(f * x.exp())
}

/// Strike (relative to a unit forward) maximising `(K/F)·Φ(d2)`.
fn premium_call_delta_peak(s: f64) -> Result<f64> {
    // stationary point: s·Φ(d2) = φ(d2), unique on (-s, ∞)
    let h = |d2: f64| s * norm_cdf(d2) - norm_pdf(d2);
    let mut hi = 1.0;
    while h(hi) < 0.0 {
        hi *= 2.0;
    }
    let d2 = brent(h, -s, hi, 1e-15, 300)?;
    Ok((-d2 * s - 0.5 * s * s).exp())
}

/// Strike at which a smile `vol_fn` quotes the pillar `(kind, delta)`, i.e.
/// the root of `delta(K, σ(K)) = target`. `None` for the kind means ATM.
pub fn strike_for_vol_fn<V>(
    kind: Option<(OptionKind, f64)>,
    ctx: &DeltaContext,
    scale_vol: f64,
    mut vol_fn: V,
) -> Result<f64>
where
    V: FnMut(f64) -> Result<f64>,
{
    let f = ctx.forward;
    let s = scale_vol * ctx.expiry.sqrt();
    let mut failure = None;
    let mut eval = |x: f64, failure: &mut Option<Error>| -> f64 {
        let k = f * x.exp();
        let vol = match vol_fn(k) {
            Ok(v) => v,
            Err(e) => {
                *failure = Some(e);
                return f64::NAN;
            }
        };
        let value = match kind {
            None => atm_strike(vol, ctx).map(|atm| (atm / f).ln() - x),
            Some((ok, d)) => convention_delta(k, vol, ok, ctx).map(|v| v.abs() - d),
        };
        match value {
            Ok(v) => v,
            Err(e) => {
                *failure = Some(e);
                f64::NAN
            }
        }
    };
    // widen the outer end step by step so far wings are only touched when needed
    let (mut a, mut b) = match kind {
        None => (-s, s),
        Some((OptionKind::Put, _)) => (-2.0 * s, 0.5 * s),
        Some((OptionKind::Call, _)) => (-0.5 * s, 2.0 * s),
    };
    let mut fa = eval(a, &mut failure);
    let mut fb = eval(b, &mut failure);
    while failure.is_none() && fa.signum() == fb.signum() && b - a < 24.0 * s {
        match kind {
            Some((OptionKind::Put, _)) => {
                a -= 2.0 * s;
                fa = eval(a, &mut failure);
            }
            Some((OptionKind::Call, _)) => {
                b += 2.0 * s;
                fb = eval(b, &mut failure);
            }
            None => {
                a -= s;
                b += s;
                fa = eval(a, &mut failure);
                fb = eval(b, &mut failure);
            }
        }
    }
    if let Some(e) = failure.take() {
        return Err(e);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoSolution {
            lo: f * a.exp(),
            hi: f * b.exp(),
        });
    }
    let x = brent(|x| eval(x, &mut failure), a, b, 1e-16, 300)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(f * x.exp())
}
