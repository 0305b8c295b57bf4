//! One entry point for building any supported smile from a quote set.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::SmileQuoteSet;
use crate::parametric::{calibrate_sabr, calibrate_svi, calibrate_xssvi, SabrSmile, SviSmile, XssviSmile};
use crate::smile::{SmileSection, VarianceDerivatives};
use crate::smiles::{
    fit_delta_polynomial, fit_spline_smile, CubicSplineSmile, DeltaKind, DeltaPolynomial, Extrapolation,
    SplineAxis, SplineBoundary, StrikeSolverMethod, VolTransform,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ModelSpec {
    DeltaPolynomial {
        kind: DeltaKind,
        transform: VolTransform,
        method: StrikeSolverMethod,
    },
    Spline {
        axis: SplineAxis,
        boundary: SplineBoundary,
        extrapolation: Extrapolation,
    },
    Svi {
        a_non_negative: bool,
    },
    Sabr,
    Xssvi,
}

impl ModelSpec {
    /// Exponential quartic in the bar forward delta.
    pub const EXP_QUARTIC_BAR: ModelSpec = ModelSpec::DeltaPolynomial {
        kind: DeltaKind::BarForward,
        transform: VolTransform::ExpLog,
        method: StrikeSolverMethod::NEWTON,
    };
    pub const SVI: ModelSpec = ModelSpec::Svi {
        a_non_negative: false,
    };
    pub const SVI_A_NON_NEGATIVE: ModelSpec = ModelSpec::Svi {
        a_non_negative: true,
    };

    /// Names accepted by [`FromStr`].
    pub const NAMES: [&'static str; 12] = [
        "poly-reduced",
        "poly-forward",
        "exp-poly-bar-forward",
        "exp-poly-forward",
        "spline-logm-var-natural",
        "spline-delta-vol-natural",
        "spline-delta-vol-clamped-flat",
        "spline-logm-var-clamped-flat",
        "svi",
        "svi-a0",
        "sabr",
        "xssvi",
    ];
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let poly = |kind, transform| ModelSpec::DeltaPolynomial {
            kind,
            transform,
            method: StrikeSolverMethod::NEWTON,
        };
        let spline = |axis, boundary, extrapolation| ModelSpec::Spline {
            axis,
            boundary,
            extrapolation,
        };
        Ok(match s {
            "poly-reduced" => poly(DeltaKind::ReducedAtm, VolTransform::Identity),
            "poly-forward" => poly(DeltaKind::ForwardNoPremium, VolTransform::Identity),
            "exp-poly-bar-forward" => poly(DeltaKind::BarForward, VolTransform::ExpLog),
            "exp-poly-forward" => poly(DeltaKind::ForwardNoPremium, VolTransform::ExpLog),
            "spline-logm-var-natural" => spline(
                SplineAxis::LogMoneynessVariance,
                SplineBoundary::Natural,
                Extrapolation::LinearBoundarySlope,
            ),
            "spline-delta-vol-natural" => spline(
                SplineAxis::DeltaVol,
                SplineBoundary::Natural,
                Extrapolation::LinearBoundarySlope,
            ),
            "spline-delta-vol-clamped-flat" => spline(
                SplineAxis::DeltaVol,
                SplineBoundary::ClampedZeroSlope,
                Extrapolation::Flat,
            ),
            "spline-logm-var-clamped-flat" => spline(
                SplineAxis::LogMoneynessVariance,
                SplineBoundary::ClampedZeroSlope,
                Extrapolation::Flat,
            ),
            "svi" => ModelSpec::SVI,
            "svi-a0" => ModelSpec::SVI_A_NON_NEGATIVE,
            "sabr" => ModelSpec::Sabr,
            "xssvi" => ModelSpec::Xssvi,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown model `{other}`; expected one of {}",
                    ModelSpec::NAMES.join(", ")
                )))
            }
        })
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = ModelSpec::NAMES
            .iter()
            .find(|n| n.parse::<ModelSpec>().ok().as_ref() == Some(self));
        if let Some(n) = name {
            return f.write_str(n);
        }
        match *self {
            ModelSpec::DeltaPolynomial { kind, transform, .. } => {
                let prefix = match transform {
                    VolTransform::Identity => "poly",
                    VolTransform::ExpLog => "exp-poly",
                };
                let kind = match kind {
                    DeltaKind::ReducedAtm => "reduced",
                    DeltaKind::BarForward => "bar-forward",
                    DeltaKind::ForwardNoPremium => "forward",
                };
                write!(f, "{prefix}-{kind}")
            }
            ModelSpec::Spline {
                axis,
                boundary,
                extrapolation,
            } => {
                let axis = match axis {
                    SplineAxis::LogMoneynessVariance => "logm-var",
                    SplineAxis::DeltaVol => "delta-vol",
                };
                let (boundary, usual) = match boundary {
                    SplineBoundary::Natural => ("natural", Extrapolation::LinearBoundarySlope),
                    SplineBoundary::ClampedZeroSlope => ("clamped", Extrapolation::Flat),
                };
                write!(f, "spline-{axis}-{boundary}")?;
                match extrapolation {
                    e if e == usual => Ok(()),
                    Extrapolation::Flat => f.write_str("-flat"),
                    Extrapolation::LinearBoundarySlope => f.write_str("-linear"),
                }
            }
            _ => write!(f, "{self:?}"),
        }
    }
}

/// A calibrated smile of any supported family, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "smile", rename_all = "kebab-case")]
pub enum Calibrated {
    DeltaPolynomial(DeltaPolynomial),
    Spline(CubicSplineSmile),
    Svi(SviSmile),
    Sabr(SabrSmile),
    Xssvi(XssviSmile),
}

impl Calibrated {
    fn inner(&self) -> &dyn SmileSection {
        match self {
            Calibrated::DeltaPolynomial(s) => s,
            Calibrated::Spline(s) => s,
            Calibrated::Svi(s) => s,
            Calibrated::Sabr(s) => s,
            Calibrated::Xssvi(s) => s,
        }
    }
}

impl SmileSection for Calibrated {
    fn name(&self) -> &str {
        self.inner().name()
    }

    fn forward(&self) -> f64 {
        self.inner().forward()
    }

    fn expiry(&self) -> f64 {
        self.inner().expiry()
    }

    fn total_variance(&self, y: f64) -> Result<f64> {
        self.inner().total_variance(y)
    }

    fn variance_derivatives(&self, y: f64) -> Result<VarianceDerivatives> {
        self.inner().variance_derivatives(y)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.inner().breakpoints()
    }
}

/// Fit `spec` to the quotes. Delta polynomials interpolate exactly and so
/// take their degree from the pillar count.
pub fn calibrate(quotes: &SmileQuoteSet, spec: &ModelSpec) -> Result<Calibrated> {
    Ok(match *spec {
        ModelSpec::DeltaPolynomial {
            kind,
            transform,
            method,
        } => {
            let degree = quotes.pillars().len().saturating_sub(1);
            Calibrated::DeltaPolynomial(fit_delta_polynomial(quotes, kind, transform, degree)?.with_method(method))
        }
        ModelSpec::Spline {
            axis,
            boundary,
            extrapolation,
        } => Calibrated::Spline(fit_spline_smile(quotes, axis, boundary, extrapolation)?),
        ModelSpec::Svi { a_non_negative } => Calibrated::Svi(calibrate_svi(quotes, a_non_negative)?),
        ModelSpec::Sabr => Calibrated::Sabr(calibrate_sabr(quotes)?),
        ModelSpec::Xssvi => Calibrated::Xssvi(calibrate_xssvi(quotes)?),
    })
}

/// [`calibrate`], boxed.
pub fn calibrate_model(quotes: &SmileQuoteSet, spec: &ModelSpec) -> Result<Box<dyn SmileSection>> {
    Ok(Box::new(calibrate(quotes, spec)?))
}

/// Model vol minus quoted vol at every pillar strike.
pub fn pillar_residuals<S: SmileSection + ?Sized>(smile: &S, quotes: &SmileQuoteSet) -> Result<Vec<f64>> {
    quotes
        .strikes()
        .iter()
        .zip(quotes.vols())
        .map(|(k, v)| Ok(smile.vol(*k)? - v))
        .collect()
}
