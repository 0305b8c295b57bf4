//! The `calibrate` and `price` commands, and the name resolution they share
//! with the scenarios.

use clap::{Args, ValueEnum};
use fxsmile_core::arbitrage::{scan_report, ScanRange};
use fxsmile_core::blackscholes::OptionKind;
use fxsmile_core::models::pillar_residuals;
use fxsmile_core::pricing::{
    auto_quanto_price, digital_price, variance_swap_replication, DigitalMethod,
    REPORTED_RANGE_WIDTH,
};
use fxsmile_core::smiles::{DeltaKind, Extrapolation, SplineAxis, SplineBoundary, StrikeSolverMethod, VolTransform};
use fxsmile_core::{calibrate, load_fixture, ModelSpec, SmileQuoteSet, SmileSection};
use serde_json::{json, Value};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    LogmVar,
    DeltaVol,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundaryArg {
    Natural,
    Clamped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExtrapArg {
    Linear,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DeltaKindArg {
    Reduced,
    BarForward,
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransformArg {
    Identity,
    ExpLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PillarSet {
    /// ATM, 25-delta and 10-delta quotes only.
    Standard,
    /// Every quote in the fixture.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Product {
    Digital,
    Autoquanto,
    Varswap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Put,
    Call,
}

impl From<KindArg> for OptionKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Put => OptionKind::Put,
            KindArg::Call => OptionKind::Call,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DigitalMethodArg {
    Black,
    SmileConsistent,
}

/// Model selection shared by `calibrate` and `price`.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// svi, svi-a0, sabr, xssvi, poly-delta, spline, or a full model name
    #[arg(long)]
    pub model: String,
    /// Fixture name or path to a fixture JSON file
    #[arg(long)]
    pub fixture: String,
    #[arg(long, value_enum)]
    pub axis: Option<AxisArg>,
    #[arg(long, value_enum)]
    pub boundary: Option<BoundaryArg>,
    #[arg(long, value_enum)]
    pub extrap: Option<ExtrapArg>,
    #[arg(long, value_enum)]
    pub delta_kind: Option<DeltaKindArg>,
    #[arg(long, value_enum)]
    pub transform: Option<TransformArg>,
    #[arg(long, value_enum, default_value = "standard")]
    pub pillars: PillarSet,
}

impl ModelArgs {
    pub fn new(model: &str, fixture: &str) -> Self {
        Self {
            model: model.to_string(),
            fixture: fixture.to_string(),
            axis: None,
            boundary: None,
            extrap: None,
            delta_kind: None,
            transform: None,
            pillars: PillarSet::Standard,
        }
    }

    pub fn spec(&self) -> Result<ModelSpec> {
        let spline_flags = self.axis.is_some() || self.boundary.is_some() || self.extrap.is_some();
        let poly_flags = self.delta_kind.is_some() || self.transform.is_some();
        let reject = |flags: &str| {
            Err(CliError::Usage(format!(
                "{flags} options do not apply to model `{}`",
                self.model
            )))
        };
        match self.model.as_str() {
            "poly-delta" => {
                if spline_flags {
                    return reject("spline");
                }
                Ok(ModelSpec::DeltaPolynomial {
                    kind: match self.delta_kind.unwrap_or(DeltaKindArg::BarForward) {
                        DeltaKindArg::Reduced => DeltaKind::ReducedAtm,
                        DeltaKindArg::BarForward => DeltaKind::BarForward,
                        DeltaKindArg::Forward => DeltaKind::ForwardNoPremium,
                    },
                    transform: match self.transform.unwrap_or(TransformArg::ExpLog) {
                        TransformArg::Identity => VolTransform::Identity,
                        TransformArg::ExpLog => VolTransform::ExpLog,
                    },
                    method: StrikeSolverMethod::NEWTON,
                })
            }
            "spline" => {
                if poly_flags {
                    return reject("delta polynomial");
                }
                Ok(ModelSpec::Spline {
                    axis: match self.axis.unwrap_or(AxisArg::LogmVar) {
                        AxisArg::LogmVar => SplineAxis::LogMoneynessVariance,
                        AxisArg::DeltaVol => SplineAxis::DeltaVol,
                    },
                    boundary: match self.boundary.unwrap_or(BoundaryArg::Natural) {
                        BoundaryArg::Natural => SplineBoundary::Natural,
                        BoundaryArg::Clamped => SplineBoundary::ClampedZeroSlope,
                    },
                    extrapolation: match self.extrap.unwrap_or(ExtrapArg::Linear) {
                        ExtrapArg::Linear => Extrapolation::LinearBoundarySlope,
                        ExtrapArg::Flat => Extrapolation::Flat,
                    },
                })
            }
            name => {
                if spline_flags || poly_flags {
                    return reject("spline and delta polynomial");
                }
                name.parse().map_err(|e: fxsmile_core::Error| CliError::Usage(e.to_string()))
            }
        }
    }

    /// The full fixture and the quotes the model is calibrated to.
    pub fn quotes(&self) -> Result<(SmileQuoteSet, SmileQuoteSet)> {
        let full = resolve_fixture(&self.fixture)?;
        let used = match self.pillars {
            PillarSet::Standard => full.standard_pillars()?,
            PillarSet::All => full.clone(),
        };
        Ok((full, used))
    }
}

/// Built-in names may drop a `-dense` suffix.
pub fn resolve_fixture(name: &str) -> Result<SmileQuoteSet> {
    match load_fixture(name) {
        Ok(q) => Ok(q),
        Err(fxsmile_core::Error::UnknownFixture(_)) => load_fixture(&format!("{name}-dense")).map_err(|_| {
            CliError::Usage(format!(
                "unknown fixture `{name}`; built-ins are {}",
                fxsmile_core::market::builtin_fixture_names().collect::<Vec<_>>().join(", ")
            ))
        }),
        Err(e) => Err(e.into()),
    }
}

/// A number, or a pillar label such as `10P`, `ATM`, `1C` looked up in the
/// fixture.
pub fn resolve_strike(quotes: &SmileQuoteSet, text: &str) -> Result<f64> {
    if let Ok(k) = text.parse::<f64>() {
        if k > 0.0 && k.is_finite() {
            return Ok(k);
        }
        return Err(CliError::Usage(format!("strike {text} is not positive")));
    }
    quotes
        .pillars()
        .iter()
        .zip(quotes.strikes())
        .find(|(p, _)| p.kind.label().eq_ignore_ascii_case(text))
        .map(|(_, k)| *k)
        .ok_or_else(|| {
            let labels: Vec<String> = quotes.pillars().iter().map(|p| p.kind.label()).collect();
            CliError::Usage(format!(
                "strike `{text}` is neither a number nor one of {}",
                labels.join(", ")
            ))
        })
}

pub fn pillar_table<S: SmileSection + ?Sized>(smile: &S, quotes: &SmileQuoteSet) -> Result<Value> {
    let residuals = pillar_residuals(smile, quotes)?;
    let rows: Vec<Value> = quotes
        .pillars()
        .iter()
        .zip(quotes.strikes())
        .zip(&residuals)
        .map(|((p, k), r)| {
            json!({
                "pillar": p.kind.label(),
                "strike": k,
                "vol": p.vol,
                "residual": r,
            })
        })
        .collect();
    Ok(Value::Array(rows))
}

pub fn rmse(residuals: &[f64]) -> f64 {
    (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt()
}

pub fn calibrate_command(args: &ModelArgs) -> Result<Value> {
    let spec = args.spec()?;
    let (_, quotes) = args.quotes()?;
    let smile = calibrate(&quotes, &spec)?;
    let residuals = pillar_residuals(&smile, &quotes)?;
    let scan = scan_report(&smile, ScanRange::standard(&smile)?)?;
    Ok(json!({
        "fixture": args.fixture,
        "model": spec.to_string(),
        "spec": spec,
        "forward": quotes.forward(),
        "expiry": quotes.expiry(),
        "calibrated": smile,
        "pillars": pillar_table(&smile, &quotes)?,
        "pillarResiduals": residuals,
        "rmse": rmse(&residuals),
        "minG": scan.min_g(),
        "modeCount": scan.mode_count(),
        "negativeDensityIntervals": scan.density.negative_intervals,
        "negativeVarianceIntervals": scan.negative_variance,
    }))
}

#[derive(Debug, Clone, Args)]
pub struct PriceArgs {
    #[arg(long, value_enum)]
    pub product: Product,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Strike, or a pillar label of the fixture such as 10P or 1C
    #[arg(long)]
    pub strike: Option<String>,
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    #[arg(long, default_value_t = 1.0)]
    pub notional: f64,
    #[arg(long, value_enum, default_value = "black")]
    pub digital_method: DigitalMethodArg,
}

pub fn price_command(args: &PriceArgs) -> Result<Value> {
    let spec = args.model.spec()?;
    let (full, quotes) = args.model.quotes()?;
    let smile = calibrate(&quotes, &spec)?;
    let b = quotes.domestic_discount();
    let sd = smile.total_variance(0.0)?.sqrt();
    let f = smile.forward();
    let reported = json!({
        "lower": f * (-REPORTED_RANGE_WIDTH * sd).exp(),
        "upper": f * (REPORTED_RANGE_WIDTH * sd).exp(),
    });
    let mut out = json!({
        "product": format!("{:?}", args.product).to_lowercase(),
        "fixture": args.model.fixture,
        "model": spec.to_string(),
        "notional": args.notional,
        "reportedRange": reported,
    });
    let strike_and_kind = || -> Result<(f64, OptionKind)> {
        let text = args
            .strike
            .as_deref()
            .ok_or_else(|| CliError::Usage("--strike is required for this product".into()))?;
        let kind = args
            .kind
            .ok_or_else(|| CliError::Usage("--kind is required for this product".into()))?;
        Ok((resolve_strike(&full, text)?, kind.into()))
    };
    match args.product {
        Product::Varswap => {
            if args.strike.is_some() || args.kind.is_some() {
                return Err(CliError::Usage("a variance swap takes no --strike or --kind".into()));
            }
            let v = variance_swap_replication(&smile, b)?;
            out["price"] = json!(v.pv_vol);
            out["fairVol"] = json!(v.fair_vol);
            out["pvVol"] = json!(v.pv_vol);
            out["quadrature"] = json!(v.quadrature);
        }
        Product::Digital => {
            let (k, kind) = strike_and_kind()?;
            let method = match args.digital_method {
                DigitalMethodArg::Black => DigitalMethod::BlackAtSmileVol,
                DigitalMethodArg::SmileConsistent => DigitalMethod::SmileConsistent,
            };
            out["strike"] = json!(k);
            out["kind"] = json!(kind);
            out["method"] = json!(method);
            out["price"] = json!(args.notional * digital_price(&smile, b, k, kind, method)?);
        }
        Product::Autoquanto => {
            let (k, kind) = strike_and_kind()?;
            let r = auto_quanto_price(&smile, b, k, kind, args.notional)?;
            out["strike"] = json!(k);
            out["kind"] = json!(kind);
            out["price"] = json!(r.price);
            out["quadrature"] = json!(r.quadrature);
        }
    }
    Ok(out)
}
