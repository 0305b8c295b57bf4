//! The common interface over every smile representation.

use crate::error::{ensure_positive, Error, Result};

/// Total variance and its first two log-moneyness derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceDerivatives {
    pub w: f64,
    pub dw: f64,
    pub d2w: f64,
}

/// Step used by the default finite-difference derivatives.
pub const FD_STEP: f64 = 1e-4;

/// A calibrated smile at one maturity, seen through its total variance
/// `w(y) = σ²(F·e^y)·T` in log-moneyness `y = ln(K/F)`.
///
/// `total_variance` returns whatever the representation produces, including
/// non-positive values in an extrapolated wing. Everything that needs a vol
/// goes through [`SmileSection::vol`], which turns those into
/// [`Error::NegativeVariance`].
pub trait SmileSection: Send + Sync {
    fn name(&self) -> &str;

    fn forward(&self) -> f64;

    fn expiry(&self) -> f64;

    fn total_variance(&self, y: f64) -> Result<f64>;

    /// `w`, `∂w/∂y` and `∂²w/∂y²`. The default is a five-point central
    /// difference with step [`FD_STEP`].
    fn variance_derivatives(&self, y: f64) -> Result<VarianceDerivatives> {
        five_point(|x| self.total_variance(x), y, FD_STEP)
    }

    /// Log-moneyness points where `∂²w/∂y²` may jump. Empty for smooth
    /// representations.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    fn vol_at_log_moneyness(&self, y: f64) -> Result<f64> {
        let w = self.total_variance(y)?;
        if !(w > 0.0) {
            return Err(Error::NegativeVariance { y });
        }
        Ok((w / self.expiry()).sqrt())
    }

    fn vol(&self, strike: f64) -> Result<f64> {
        ensure_positive(strike, "strike")?;
        self.vol_at_log_moneyness((strike / self.forward()).ln())
    }

    fn log_moneyness(&self, strike: f64) -> f64 {
        (strike / self.forward()).ln()
    }
}

/// Five-point central differences of `f` around `y`.
pub fn five_point<F>(mut f: F, y: f64, h: f64) -> Result<VarianceDerivatives>
where
    F: FnMut(f64) -> Result<f64>,
{
    let m2 = f(y - 2.0 * h)?;
    let m1 = f(y - h)?;
    let c = f(y)?;
    let p1 = f(y + h)?;
    let p2 = f(y + 2.0 * h)?;
    Ok(VarianceDerivatives {
        w: c,
        dw: (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h),
        d2w: (-m2 + 16.0 * m1 - 30.0 * c + 16.0 * p1 - p2) / (12.0 * h * h),
    })
}

/// Constant volatility.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatSmile {
    forward: f64,
    expiry: f64,
    vol: f64,
}

impl FlatSmile {
    pub fn new(forward: f64, expiry: f64, vol: f64) -> Result<Self> {
        ensure_positive(forward, "forward")?;
        ensure_positive(expiry, "time to expiry")?;
        ensure_positive(vol, "vol")?;
        Ok(Self {
            forward,
            expiry,
            vol,
        })
    }
}

impl SmileSection for FlatSmile {
    fn name(&self) -> &str {
        "flat"
    }

    fn forward(&self) -> f64 {
        self.forward
    }

    fn expiry(&self) -> f64 {
        self.expiry
    }

    fn total_variance(&self, _y: f64) -> Result<f64> {
        Ok(self.vol * self.vol * self.expiry)
    }

    fn variance_derivatives(&self, _y: f64) -> Result<VarianceDerivatives> {
        Ok(VarianceDerivatives {
            w: self.vol * self.vol * self.expiry,
            dw: 0.0,
            d2w: 0.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    struct Quadratic;

    impl SmileSection for Quadratic {
        fn name(&self) -> &str {
            "quadratic"
        }
        fn forward(&self) -> f64 {
            2.0
        }
        fn expiry(&self) -> f64 {
            0.5
        }
        fn total_variance(&self, y: f64) -> Result<f64> {
            Ok(0.02 + 0.1 * y - 0.3 * y * y)
        }
    }

    #[test]
    fn default_derivatives() {
        let d = Quadratic.variance_derivatives(0.4).unwrap();
        assert_abs_diff_eq!(d.w, 0.02 + 0.04 - 0.048, epsilon = 1e-15);
        assert_abs_diff_eq!(d.dw, 0.1 - 0.24, epsilon = 1e-10);
        assert_abs_diff_eq!(d.d2w, -0.6, epsilon = 1e-6);
    }

    #[test]
    fn vol_reports_negative_variance() {
        let k = 2.0 * 1f64.exp();
        assert!(matches!(Quadratic.vol(k), Err(Error::NegativeVariance { .. })));
        assert_abs_diff_eq!(Quadratic.vol(2.0).unwrap(), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn flat() {
        let s = FlatSmile::new(1.3, 2.0, 0.15).unwrap();
        assert_eq!(s.vol(0.2).unwrap(), 0.15);
        assert!(FlatSmile::new(1.0, 1.0, 0.0).is_err());
    }
}
