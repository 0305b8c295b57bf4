//! Black-76 pricing on the forward, normal distribution helpers and a
//! safeguarded implied volatility solver.
//!
//! All prices here are in domestic currency: the undiscounted Black value
//! times the domestic discount factor `B_d`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function, via `erfc` so that both tails keep
/// full relative precision.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Inverse of the standard normal distribution function.
///
/// Wichura's AS241 rational approximation followed by one Halley step
/// against [`norm_cdf`].
pub fn norm_inv_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain {
            what: "probability",
            value: p,
        });
    }
    let x = as241(p);
    // Halley polish: e = Φ(x) - p, u = e / φ(x)
    let e = if x < 0.0 {
        norm_cdf(x) - p
    } else {
        (1.0 - p) - norm_cdf(-x)
    };
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    Ok(x - u / (1.0 + 0.5 * x * u))
}

#[allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping)]
fn as241(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2509.080_928_730_122_7 * r + 33_430.575_583_588_13) * r
            + 67_265.770_927_008_7)
            * r
            + 45_921.953_931_549_87)
            * r
            + 13_731.693_765_509_46)
            * r
            + 1_971.590_950_306_551_4)
            * r
            + 133.141_667_891_784_38)
            * r)
            + 3.387_132_872_796_366_6;
        let den = (((((((5226.495_278_852_546 * r + 28_729.085_735_721_943) * r
            + 39_307.895_800_092_71)
            * r
            + 21_213.794_301_586_597)
            * r
            + 5_394.196_021_424_751)
            * r
            + 687.187_007_492_057_9)
            * r
            + 42.313_330_701_600_91)
            * r)
            + 1.0;
        return q * num / den;
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = (((((((7.745_450_142_783_414e-4 * r + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r)
            + 1.423_437_110_749_683_5;
        let den = (((((((1.050_750_071_644_416_8e-9 * r + 5.475_938_084_995_345e-4) * r
            + 0.015_198_666_563_616_457)
            * r
            + 0.148_103_976_427_480_07)
            * r
            + 0.689_767_334_985_1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r)
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = (((((((2.010_334_399_292_288e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r)
            + 6.657_904_643_501_103;
        let den = (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 0.014_875_361_290_850_615)
            * r
            + 0.136_929_880_922_735_8)
            * r
            + 0.599_832_206_555_887_9)
            * r)
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

impl OptionKind {
    /// +1 for calls, -1 for puts.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            OptionKind::Call => 1.0,
            OptionKind::Put => -1.0,
        }
    }
}

/// Strike, expiry and payoff direction of a European vanilla.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub strike: f64,
    pub expiry: f64,
    pub kind: OptionKind,
}

impl OptionSpec {
    pub fn new(strike: f64, expiry: f64, kind: OptionKind) -> Result<Self> {
        ensure_positive(strike, "strike")?;
        ensure_positive(expiry, "expiry")?;
        Ok(Self {
            strike,
            expiry,
            kind,
        })
    }

    pub fn call(strike: f64, expiry: f64) -> Result<Self> {
        Self::new(strike, expiry, OptionKind::Call)
    }

    pub fn put(strike: f64, expiry: f64) -> Result<Self> {
        Self::new(strike, expiry, OptionKind::Put)
    }
}

/// Forward to expiry and the domestic discount factor to the payment date.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardContext {
    pub forward: f64,
    pub discount: f64,
}

impl ForwardContext {
    pub fn new(forward: f64, discount: f64) -> Result<Self> {
        ensure_positive(forward, "forward")?;
        if !(discount > 0.0 && discount <= 1.0) {
            return Err(Error::Domain {
                what: "domestic discount factor",
                value: discount,
            });
        }
        Ok(Self { forward, discount })
    }

    /// Undiscounted context, `B_d = 1`.
    pub fn undiscounted(forward: f64) -> Result<Self> {
        Self::new(forward, 1.0)
    }
}

/// Undiscounted Black price as a function of total standard deviation
/// `s = σ√T`.
pub fn black_undiscounted(forward: f64, strike: f64, std_dev: f64, kind: OptionKind) -> f64 {
    let eta = kind.sign();
    if std_dev <= 0.0 {
        return (eta * (forward - strike)).max(0.0);
    }
    let d1 = (forward / strike).ln() / std_dev + 0.5 * std_dev;
    let d2 = d1 - std_dev;
    eta * (forward * norm_cdf(eta * d1) - strike * norm_cdf(eta * d2))
}

/// Black-76 price `B_d·(±(F·Φ(±d1) − K·Φ(±d2)))`.
pub fn black_price(opt: &OptionSpec, vol: f64, ctx: &ForwardContext) -> f64 {
    let s = vol.max(0.0) * opt.expiry.sqrt();
    ctx.discount * black_undiscounted(ctx.forward, opt.strike, s, opt.kind)
}

/// `∂price/∂σ`.
pub fn black_vega(opt: &OptionSpec, vol: f64, ctx: &ForwardContext) -> f64 {
    let sqrt_t = opt.expiry.sqrt();
    let s = vol * sqrt_t;
    if s <= 0.0 {
        return 0.0;
    }
    let d1 = (ctx.forward / opt.strike).ln() / s + 0.5 * s;
    ctx.discount * ctx.forward * norm_pdf(d1) * sqrt_t
}

/// Black implied volatility.
///
/// The out-of-the-money price is inverted in total volatility `σ√T` by
/// Newton steps on the log of the price, kept inside a shrinking bracket; a
/// step that leaves the bracket or is not finite is replaced by bisection.
pub fn implied_vol(price: f64, opt: &OptionSpec, ctx: &ForwardContext) -> Result<f64> {
    let f = ctx.forward;
    let k = opt.strike;
    let eta = opt.kind.sign();
    let target = price / ctx.discount;
    let intrinsic = (eta * (f - k)).max(0.0);
    let upper = match opt.kind {
        OptionKind::Call => f,
        OptionKind::Put => k,
    };
    let tol = 1e-14 * f;
    if !target.is_finite() || target < intrinsic - tol {
        return Err(Error::PriceOutOfBounds {
            price,
            bound: "lower",
            limit: ctx.discount * intrinsic,
        });
    }
    if target >= upper {
        return Err(Error::PriceOutOfBounds {
            price,
            bound: "upper",
            limit: ctx.discount * upper,
        });
    }
    // parity moves an in-the-money price to the other side
    let (kind, otm) = if intrinsic > 0.0 {
        let other = match opt.kind {
            OptionKind::Call => OptionKind::Put,
            OptionKind::Put => OptionKind::Call,
        };
        (other, target - intrinsic)
    } else {
        (opt.kind, target)
    };
    if otm <= 4.0 * f64::EPSILON * target {
        return Ok(0.0);
    }
    let ln_target = otm.ln();
    let h = |s: f64| black_undiscounted(f, k, s, kind).ln() - ln_target;

    let mut lo = 0.0;
    let mut hi = 1.0;
    while h(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::NoBracket { lo, hi });
        }
    }

    // Brenner-Subrahmanyam as a starting point, inside the bracket
    let mut s = (2.0 * PI).sqrt() * otm / f.min(k);
    if !(s > lo && s < hi) {
        s = 0.5 * (lo + hi);
    }
    let log_fk = (f / k).ln();
    for _ in 0..400 {
        let v = h(s);
        if v.abs() <= 4.0 * f64::EPSILON {
            return Ok(s / opt.expiry.sqrt());
        }
        if v > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let d1 = log_fk / s + 0.5 * s;
        let slope = f * norm_pdf(d1) / black_undiscounted(f, k, s, kind);
        let mut next = s - v / slope;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - s).abs() <= 1e-16 * s || hi - lo <= 1e-17 * hi {
            return Ok(next / opt.expiry.sqrt());
        }
        s = next;
    }
    Ok(s / opt.expiry.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn cdf_known_values() {
        assert_eq!(norm_cdf(0.0), 0.5);
        for x in [0.5, 1.0, 3.0] {
            assert_abs_diff_eq!(norm_cdf(x) + norm_cdf(-x), 1.0, epsilon = 1e-16);
        }
        // Φ(0.1) and Φ(1) from a 30-digit reference evaluation
        assert_abs_diff_eq!(norm_cdf(0.1), 0.539_827_837_277_029, epsilon = 1e-16);
        assert_abs_diff_eq!(norm_cdf(1.0), 0.841_344_746_068_542_9, epsilon = 1e-15);
        assert_abs_diff_eq!(norm_cdf(-10.0), 7.619_853_024_160_527e-24, epsilon = 1e-36);
    }

    #[test]
    fn inverse_cdf_reference() {
        assert_abs_diff_eq!(
            norm_inv_cdf(0.25).unwrap(),
            -0.674_489_750_196_081_7,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            norm_inv_cdf(0.1).unwrap(),
            -1.281_551_565_544_600_5,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(norm_inv_cdf(0.5).unwrap(), 0.0, epsilon = 1e-16);
        assert!(norm_inv_cdf(0.0).is_err());
        assert!(norm_inv_cdf(1.0).is_err());
        assert!(norm_inv_cdf(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn inverse_round_trip(p in 1e-12f64..(1.0 - 1e-12)) {
            let x = norm_inv_cdf(p).unwrap();
            prop_assert!((norm_cdf(x) - p).abs() < 1e-14);
        }

        #[test]
        fn put_call_parity(k in 0.5f64..2.0, vol in 0.001f64..1.5, t in 0.01f64..3.0) {
            let ctx = ForwardContext::new(1.1, 0.97).unwrap();
            let c = black_price(&OptionSpec::call(k, t).unwrap(), vol, &ctx);
            let p = black_price(&OptionSpec::put(k, t).unwrap(), vol, &ctx);
            prop_assert!((c - p - 0.97 * (1.1 - k)).abs() < 1e-14);
        }

        #[test]
        fn vega_matches_central_difference(vol in 0.003f64..1.5, k in 0.9f64..1.1) {
            let t = 0.75;
            let ctx = ForwardContext::new(1.0, 0.99).unwrap();
            // out of the money, so the price difference is not swamped by intrinsic
            let opt = if k < 1.0 { OptionSpec::put(k, t) } else { OptionSpec::call(k, t) }.unwrap();
            let h = vol * 1e-5;
            let fd = (black_price(&opt, vol + h, &ctx) - black_price(&opt, vol - h, &ctx)) / (2.0 * h);
            let vega = black_vega(&opt, vol, &ctx);
            // Only meaningful where vega is representable against roundoff.
            prop_assume!(vega > 1e-6);
            prop_assert!(((fd - vega) / vega).abs() < 1e-7, "fd {fd} vega {vega}");
        }
    }

    #[test]
    fn zero_vol_is_intrinsic() {
        let ctx = ForwardContext::undiscounted(1.1).unwrap();
        let p = black_price(&OptionSpec::call(1.0, 1.0).unwrap(), 0.0, &ctx);
        assert_abs_diff_eq!(p, 0.1, epsilon = 1e-15);
    }

    #[test]
    fn atm_closed_form() {
        let ctx = ForwardContext::undiscounted(1.0).unwrap();
        let p = black_price(&OptionSpec::call(1.0, 1.0).unwrap(), 0.2, &ctx);
        assert_abs_diff_eq!(p, 2.0 * norm_cdf(0.1) - 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p, 0.079_655_674_554_057_96, epsilon = 1e-14);
    }

    #[test]
    fn convex_in_strike() {
        let ctx = ForwardContext::new(3.67, 0.98).unwrap();
        let t = 0.75;
        let h = 1e-3;
        for i in 1..200 {
            let k = 3.4 + i as f64 * 0.003;
            let c = |k: f64| black_price(&OptionSpec::call(k, t).unwrap(), 0.05, &ctx);
            assert!(c(k + h) - 2.0 * c(k) + c(k - h) >= -1e-12);
        }
    }

    #[test]
    fn implied_vol_round_trip_across_regimes() {
        let ctx = ForwardContext::new(1.2, 0.97).unwrap();
        for &vol in &[0.003, 0.05, 0.31, 1.2] {
            for &t in &[7.0 / 365.0, 0.75, 1.0] {
                let sd = vol * f64::sqrt(t);
                for &z in &[-1.0, 0.0, 1.0] {
                    let k = 1.2 * f64::exp(z * sd);
                    for kind in [OptionKind::Call, OptionKind::Put] {
                        let opt = OptionSpec::new(k, t, kind).unwrap();
                        let price = black_price(&opt, vol, &ctx);
                        let iv = implied_vol(price, &opt, &ctx).unwrap();
                        assert!((iv - vol).abs() < 1e-10, "vol {vol} t {t} z {z}: {iv}");
                        let back = black_price(&opt, iv, &ctx);
                        assert!((back - price).abs() < 1e-12 * 0.97 * 1.2);
                    }
                }
            }
        }
    }

    #[test]
    fn implied_vol_bounds() {
        let ctx = ForwardContext::new(1.0, 0.9).unwrap();
        let opt = OptionSpec::call(0.8, 1.0).unwrap();
        assert_eq!(implied_vol(0.9 * 0.2, &opt, &ctx).unwrap(), 0.0);
        assert!(matches!(
            implied_vol(0.95, &opt, &ctx),
            Err(Error::PriceOutOfBounds { bound: "upper", .. })
        ));
        assert!(matches!(
            implied_vol(0.1, &opt, &ctx),
            Err(Error::PriceOutOfBounds { bound: "lower", .. })
        ));
    }
}
