//! Static replication on top of any smile: digitals, auto-quantos and
//! variance swaps, plus a model-independent variance swap from pillars.

use serde::{Deserialize, Serialize};

use crate::arbitrage::otm_price;
use crate::blackscholes::{black_undiscounted, norm_cdf, norm_pdf, OptionKind};
use crate::error::{ensure_positive, Error, Result};
use crate::market::SmileQuoteSet;
use crate::quadrature::integrate;
use crate::smile::SmileSection;

/// Strips are truncated this many ATM standard deviations from the forward.
pub const TRUNCATION_WIDTH: f64 = 8.0;
/// Width reported as the nominal replication range.
pub const REPORTED_RANGE_WIDTH: f64 = 5.0;
/// Quadrature panels per strip side; each panel has 16 nodes.
const PANELS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QuadratureInfo {
    pub nodes: usize,
    pub lower: f64,
    pub upper: f64,
    pub error_estimate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReplicationResult {
    /// Price for the whole notional, in domestic currency.
    pub price: f64,
    pub notional: f64,
    pub quadrature: QuadratureInfo,
}

/// Variance swap fair value in vol points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VarSwapQuote {
    /// `√(fair variance)`, the forward (undiscounted) strike.
    pub fair_vol: f64,
    /// `√(B_d · fair variance)`, whose square is the present value.
    pub pv_vol: f64,
    pub quadrature: Option<QuadratureInfo>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DigitalMethod {
    /// `B_d·Φ(±d₂)` with `d₂` at the smile vol of the strike.
    BlackAtSmileVol,
    /// Minus the strike derivative of the vanilla, skew term included.
    SmileConsistent,
}

/// Digital price per unit notional.
pub fn digital_price<S: SmileSection + ?Sized>(
    smile: &S,
    discount: f64,
    strike: f64,
    kind: OptionKind,
    method: DigitalMethod,
) -> Result<f64> {
    ensure_positive(strike, "strike")?;
    let f = smile.forward();
    match method {
        DigitalMethod::BlackAtSmileVol => {
            let s = smile.vol(strike)? * smile.expiry().sqrt();
            let d2 = ((f / strike).ln() - 0.5 * s * s) / s;
            Ok(discount * norm_cdf(kind.sign() * d2))
        }
        DigitalMethod::SmileConsistent => {
            let h = f * 1e-5;
            let price = |k: f64| -> Result<f64> {
                let s = smile.vol(k)? * smile.expiry().sqrt();
                Ok(black_undiscounted(f, k, s, kind))
            };
            let slope = (price(strike + h)? - price(strike - h)?) / (2.0 * h);
            Ok(-kind.sign() * discount * slope)
        }
    }
}

/// Truncation bounds `F·e^{±width·√w(0)}`.
pub fn truncation_bounds<S: SmileSection + ?Sized>(smile: &S, width: f64) -> Result<(f64, f64)> {
    let w = smile.total_variance(0.0)?;
    if !(w > 0.0) {
        return Err(Error::NegativeVariance { y: 0.0 });
    }
    let f = smile.forward();
    let s = width * w.sqrt();
    Ok((f * (-s).exp(), f * s.exp()))
}

/// `∫ weight(K)·OTM(K) dK` over `[a, b]`, undiscounted.
fn strip<S, W>(smile: &S, a: f64, b: f64, weight: W) -> Result<(f64, usize, f64)>
where
    S: SmileSection + ?Sized,
    W: Fn(f64) -> f64,
{
    strip_with(smile, a, b, weight, PANELS, 1e-13 * smile.forward())
}

fn strip_with<S, W>(
    smile: &S,
    a: f64,
    b: f64,
    weight: W,
    panels: usize,
    tol: f64,
) -> Result<(f64, usize, f64)>
where
    S: SmileSection + ?Sized,
    W: Fn(f64) -> f64,
{
    if b <= a {
        return Ok((0.0, 0, 0.0));
    }
    let mut failure = None;
    let r = integrate(
        |k| match otm_price(smile, k) {
            Ok(p) => weight(k) * p,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        a,
        b,
        panels,
        tol,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok((r.value, r.nodes, r.error_estimate)),
    }
}

/// Auto-quanto call `2∫_K^∞ C + K·C(K)` or put `−2∫_0^K P + K·P(K)`.
pub fn auto_quanto_price<S: SmileSection + ?Sized>(
    smile: &S,
    discount: f64,
    strike: f64,
    kind: OptionKind,
    notional: f64,
) -> Result<ReplicationResult> {
    ensure_positive(strike, "strike")?;
    let f = smile.forward();
    let (lo, hi) = truncation_bounds(smile, TRUNCATION_WIDTH)?;
    let vanilla = |k: f64| -> Result<f64> {
        let s = smile.vol(k)? * smile.expiry().sqrt();
        Ok(black_undiscounted(f, k, s, kind))
    };
    // the strip is integrated on out-of-the-money prices; parity supplies
    // the forward part on the in-the-money side
    let (integral, nodes, error) = match kind {
        OptionKind::Call => {
            let (a, b) = (strike.max(lo), hi);
            let (otm, n1, e1) = strip(smile, a.max(f), b, |_| 1.0)?;
            let (itm, n2, e2) = strip(smile, a, f.min(b), |_| 1.0)?;
            // ∫_a^F C = ∫_a^F P + ∫_a^F (F − K) dK
            let lo_side = if a < f {
                itm + 0.5 * (f - a) * (f - a)
            } else {
                0.0
            };
            (otm + lo_side, n1 + n2, e1 + e2)
        }
        OptionKind::Put => {
            let (a, b) = (lo, strike.min(hi));
            let (otm, n1, e1) = strip(smile, a, b.min(f), |_| 1.0)?;
            let (itm, n2, e2) = strip(smile, f.max(a), b, |_| 1.0)?;
            let hi_side = if b > f {
                itm + 0.5 * (b - f) * (b - f)
            } else {
                0.0
            };
            (otm + hi_side, n1 + n2, e1 + e2)
        }
    };
    let unit = discount * (kind.sign() * 2.0 * integral + strike * vanilla(strike)?);
    Ok(ReplicationResult {
        price: notional * unit,
        notional,
        quadrature: QuadratureInfo {
            nodes,
            lower: lo,
            upper: hi,
            error_estimate: notional * discount * 2.0 * error,
        },
    })
}

/// Fair strike of a variance swap by the log-contract strip
/// `(2/T)·∫ OTM(K)/K² dK`.
pub fn variance_swap_replication<S: SmileSection + ?Sized>(
    smile: &S,
    discount: f64,
) -> Result<VarSwapQuote> {
    ensure_positive(discount, "discount")?;
    let f = smile.forward();
    let (lo, hi) = truncation_bounds(smile, TRUNCATION_WIDTH)?;
    let inv_sq = |k: f64| 1.0 / (k * k);
    let (puts, n1, e1) = strip(smile, lo, f, inv_sq)?;
    let (calls, n2, e2) = strip(smile, f, hi, inv_sq)?;
    let scale = 2.0 / smile.expiry();
    let variance = scale * (puts + calls);
    Ok(VarSwapQuote {
        fair_vol: 100.0 * variance.sqrt(),
        pv_vol: 100.0 * (discount * variance).sqrt(),
        quadrature: Some(QuadratureInfo {
            nodes: n1 + n2,
            lower: lo,
            upper: hi,
            error_estimate: scale * (e1 + e2),
        }),
    })
}

/// Interpolation used for the model-independent variance swap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelIndependentScheme {
    /// Variance linear in `z = d₂` between pillars, extended linearly by the
    /// end segments and floored at zero, integrated against `φ(z)`.
    NormalLinear,
    /// Variance linear in `p = Φ(−d₂)` between pillars, flat to `p = 0`
    /// and `p = 1`.
    ProbabilityFlat,
}

/// `∫_l^u (a + b·z)·φ(z) dz`.
fn linear_gaussian(a: f64, b: f64, l: f64, u: f64) -> f64 {
    a * (norm_cdf(u) - norm_cdf(l)) + b * (norm_pdf(l) - norm_pdf(u))
}

/// Linear piece through `(z0, q0)` and `(z1, q1)` integrated over `[l, u]`,
/// clipped where it goes negative.
fn clipped_piece(z0: f64, q0: f64, z1: f64, q1: f64, l: f64, u: f64) -> f64 {
    let b = (q1 - q0) / (z1 - z0);
    let a = q0 - b * z0;
    let (mut l, mut u) = (l, u);
    if b != 0.0 {
        let root = -a / b;
        if b > 0.0 {
            l = l.max(root);
        } else {
            u = u.min(root);
        }
    } else if a <= 0.0 {
        return 0.0;
    }
    if u <= l {
        return 0.0;
    }
    linear_gaussian(a, b, l, u)
}

/// Variance swap from the pillar quotes alone, as the expectation of the
/// implied variance under the normal law of `d₂`.
pub fn variance_swap_model_independent(
    quotes: &SmileQuoteSet,
    scheme: ModelIndependentScheme,
) -> Result<VarSwapQuote> {
    let n = quotes.pillars().len();
    if n < 5 {
        return Err(Error::InvalidInput(format!(
            "model-independent variance swap needs at least 5 pillars, got {n}"
        )));
    }
    let f = quotes.forward();
    let sqrt_t = quotes.expiry().sqrt();
    let vols = quotes.vols();
    // pillars come sorted by strike, so d₂ decreases; reverse to increase
    let mut pts: Vec<(f64, f64)> = quotes
        .strikes()
        .iter()
        .zip(&vols)
        .map(|(k, v)| {
            let s = v * sqrt_t;
            (((f / k).ln() - 0.5 * s * s) / s, v * v)
        })
        .collect();
    pts.reverse();
    let variance = match scheme {
        ModelIndependentScheme::NormalLinear => {
            let mut total = 0.0;
            for (i, w) in pts.windows(2).enumerate() {
                let (z0, q0) = w[0];
                let (z1, q1) = w[1];
                let l = if i == 0 { f64::NEG_INFINITY } else { z0 };
                let u = if i + 2 == pts.len() { f64::INFINITY } else { z1 };
                total += clipped_piece(z0, q0, z1, q1, l.max(-40.0), u.min(40.0));
            }
            total
        }
        ModelIndependentScheme::ProbabilityFlat => {
            // p = Φ(−d₂) increases as d₂ decreases, so use the strike order
            let p: Vec<(f64, f64)> = pts.iter().rev().map(|(z, q)| (norm_cdf(-z), *q)).collect();
            let mut total = p[0].1 * p[0].0 + p[p.len() - 1].1 * (1.0 - p[p.len() - 1].0);
            for w in p.windows(2) {
                total += 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0);
            }
            total
        }
    };
    Ok(VarSwapQuote {
        fair_vol: 100.0 * variance.sqrt(),
        pv_vol: 100.0 * (quotes.domestic_discount() * variance).sqrt(),
        quadrature: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{load_fixture, DeltaConvention, MarketInputs, PillarKind, PillarQuote};
    use crate::smile::FlatSmile;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn lognormal_auto_quanto(f: f64, k: f64, vol: f64, t: f64, b: f64, kind: OptionKind) -> f64 {
        let s = vol * t.sqrt();
        let d1 = ((f / k).ln() + 0.5 * s * s) / s;
        let e = kind.sign();
        // E[(±(S − K))⁺ S] for lognormal S with mean F
        b * e * (f * f * (s * s).exp() * norm_cdf(e * (d1 + s)) - k * f * norm_cdf(e * d1))
    }

    #[test]
    fn flat_digitals() {
        let s = FlatSmile::new(1.05, 0.4, 0.13).unwrap();
        let b = 0.97;
        for k in [0.9, 1.05, 1.2] {
            let sd = 0.13 * 0.4f64.sqrt();
            let d2 = ((1.05f64 / k).ln() - 0.5 * sd * sd) / sd;
            let put = digital_price(&s, b, k, OptionKind::Put, DigitalMethod::BlackAtSmileVol).unwrap();
            let call = digital_price(&s, b, k, OptionKind::Call, DigitalMethod::BlackAtSmileVol).unwrap();
            assert_abs_diff_eq!(put, b * norm_cdf(-d2), epsilon = 1e-16);
            assert_abs_diff_eq!(put + call, b, epsilon = 1e-15);
            let consistent = digital_price(&s, b, k, OptionKind::Put, DigitalMethod::SmileConsistent).unwrap();
            assert_abs_diff_eq!(consistent, put, epsilon = 1e-9);
        }
    }

    #[test]
    fn flat_auto_quanto_matches_closed_form() {
        let (f, t, v, b) = (1.2, 1.5, 0.18, 0.95);
        let s = FlatSmile::new(f, t, v).unwrap();
        for k in [0.9, 1.2, 1.6] {
            for kind in [OptionKind::Call, OptionKind::Put] {
                let r = auto_quanto_price(&s, b, k, kind, 1.0).unwrap();
                let exact = lognormal_auto_quanto(f, k, v, t, b, kind);
                assert_abs_diff_eq!(r.price, exact, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn flat_variance_swap() {
        let s = FlatSmile::new(0.98, 1.0, 0.11).unwrap();
        let q = variance_swap_replication(&s, 0.96).unwrap();
        assert!((q.fair_vol / 11.0 - 1.0).abs() < 1e-6, "{}", q.fair_vol);
        assert_abs_diff_eq!(q.pv_vol, q.fair_vol * 0.96f64.sqrt(), epsilon = 1e-12);
        assert!(q.quadrature.unwrap().nodes >= 801);
    }

    #[test]
    fn flat_pillars_model_independent() {
        let kinds = [
            PillarKind::put(0.10),
            PillarKind::put(0.25),
            PillarKind::Atm,
            PillarKind::call(0.25),
            PillarKind::call(0.10),
        ];
        let pillars = kinds.iter().map(|k| PillarQuote::new(*k, 0.093).unwrap()).collect();
        let q = SmileQuoteSet::new(MarketInputs::flat(0.5, 1.0, DeltaConvention::FORWARD), pillars).unwrap();
        for scheme in [ModelIndependentScheme::NormalLinear, ModelIndependentScheme::ProbabilityFlat] {
            let v = variance_swap_model_independent(&q, scheme).unwrap();
            assert_abs_diff_eq!(v.fair_vol, 9.3, epsilon = 1e-12);
        }
    }

    #[test]
    fn clipped_piece_integrates_positive_part() {
        // 1 − z on (−∞, ∞) clipped at z = 1 is E[(1 − Z)⁺]
        let v = clipped_piece(0.0, 1.0, 1.0, 0.0, -40.0, 40.0);
        assert_abs_diff_eq!(v, norm_pdf(1.0) + norm_cdf(1.0), epsilon = 1e-15);
    }

    #[test]
    fn doubling_nodes_leaves_strips_unchanged() {
        let q = load_fixture("eurusd-1y-dense").unwrap().standard_pillars().unwrap();
        for name in ["exp-poly-bar-forward", "svi", "sabr", "spline-logm-var-natural"] {
            let s = crate::calibrate_model(&q, &name.parse().unwrap()).unwrap();
            let f = s.forward();
            let (lo, hi) = truncation_bounds(s.as_ref(), TRUNCATION_WIDTH).unwrap();
            let inv_sq = |k: f64| 1.0 / (k * k);
            for (a, b) in [(lo, f), (f, hi)] {
                let (base, n, _) = strip(s.as_ref(), a, b, inv_sq).unwrap();
                let (fine, m, _) = strip_with(s.as_ref(), a, b, inv_sq, 2 * PANELS, 1e-15 * f).unwrap();
                assert!(m > n, "{name}: {n} then {m} nodes");
                assert!((fine - base).abs() <= 1e-7 * base.abs(), "{name}: {base} vs {fine}");
            }
        }
    }

    proptest! {
        #[test]
        fn auto_quanto_call_dominates_scaled_vanilla(vol in 0.03f64..0.6, k in 0.6f64..1.6, t in 0.05f64..2.0) {
            let s = FlatSmile::new(1.0, t, vol).unwrap();
            let r = auto_quanto_price(&s, 0.9, k, OptionKind::Call, 1.0).unwrap();
            let vanilla = 0.9 * black_undiscounted(1.0, k, vol * t.sqrt(), OptionKind::Call);
            prop_assert!(r.price >= k * vanilla - 1e-14);
        }
    }
}
