//! Market data for a single FX option maturity: delta conventions, pillar
//! quotes and their resolution to strikes.

mod delta;
mod fixture;
mod mixture;
mod quotes;

pub use delta::{
    atm_strike, convention_delta, forward_delta, reduced_delta, strike_for_vol_fn,
    strike_from_delta, DeltaContext,
};
pub use fixture::{builtin_fixture_names, load_fixture, parse_fixture, FIXTURE_DIR_ENV};
pub use mixture::{mixture_quotes, MixtureParams};
pub use quotes::{convert_simple_rr_bf, RrBfQuotes};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::blackscholes::{ForwardContext, OptionKind};
use crate::error::{ensure_positive, Error, Result};

/// Whether deltas are quoted on the spot or the forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaMeasure {
    Spot,
    Forward,
}

/// Strike convention of the ATM quote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AtmKind {
    /// Strike at which the call and put deltas sum to zero.
    #[serde(rename = "dns")]
    DeltaNeutralStraddle,
    /// Strike equal to the forward.
    #[serde(rename = "forward")]
    ForwardAtm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeltaConvention {
    pub measure: DeltaMeasure,
    #[serde(rename = "premium")]
    pub premium_adjusted: bool,
    #[serde(rename = "atm")]
    pub atm_kind: AtmKind,
}

impl DeltaConvention {
    pub const FORWARD: Self = Self {
        measure: DeltaMeasure::Forward,
        premium_adjusted: false,
        atm_kind: AtmKind::DeltaNeutralStraddle,
    };

    pub const FORWARD_PREMIUM: Self = Self {
        measure: DeltaMeasure::Forward,
        premium_adjusted: true,
        atm_kind: AtmKind::DeltaNeutralStraddle,
    };
}

/// What a pillar quote refers to. Deltas are unsigned, in (0, 0.5).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PillarKind {
    Atm,
    Put { delta: f64 },
    Call { delta: f64 },
}

impl PillarKind {
    pub fn put(delta: f64) -> Self {
        PillarKind::Put { delta }
    }

    pub fn call(delta: f64) -> Self {
        PillarKind::Call { delta }
    }

    pub fn delta(&self) -> Option<f64> {
        match *self {
            PillarKind::Atm => None,
            PillarKind::Put { delta } | PillarKind::Call { delta } => Some(delta),
        }
    }

    pub fn option_kind(&self) -> Option<OptionKind> {
        match self {
            PillarKind::Atm => None,
            PillarKind::Put { .. } => Some(OptionKind::Put),
            PillarKind::Call { .. } => Some(OptionKind::Call),
        }
    }

    /// Short label such as `10P`, `ATM`, `25C`.
    pub fn label(&self) -> String {
        match *self {
            PillarKind::Atm => "ATM".to_string(),
            PillarKind::Put { delta } => format!("{}P", fmt_delta(delta)),
            PillarKind::Call { delta } => format!("{}C", fmt_delta(delta)),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some(d) = self.delta() {
            if !(d > 0.0 && d < 0.5) {
                return Err(Error::Domain {
                    what: "pillar delta",
                    value: d,
                });
            }
        }
        Ok(())
    }
}

fn fmt_delta(delta: f64) -> String {
    let pct = delta * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("{}", pct.round() as i64)
    } else {
        format!("{pct}")
    }
}

/// A single market quote, vol as a decimal (0.0514 for 5.14%).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PillarQuote {
    #[serde(flatten)]
    pub kind: PillarKind,
    pub vol: f64,
}

impl PillarQuote {
    pub fn new(kind: PillarKind, vol: f64) -> Result<Self> {
        kind.validate()?;
        ensure_positive(vol, "pillar vol")?;
        Ok(Self { kind, vol })
    }
}

/// One maturity's market snapshot, with every pillar resolved to a strike.
///
/// Pillars are kept sorted by strike; construction fails if two pillars
/// resolve to the same strike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmileQuoteSet {
    name: Option<String>,
    valuation_date: Option<NaiveDate>,
    expiry_date: Option<NaiveDate>,
    expiry: f64,
    forward: f64,
    spot: f64,
    domestic_discount: f64,
    foreign_discount: f64,
    convention: DeltaConvention,
    pillars: Vec<PillarQuote>,
    strikes: Vec<f64>,
}

/// Scalar market inputs of a quote set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketInputs {
    pub expiry: f64,
    pub forward: f64,
    pub spot: f64,
    pub domestic_discount: f64,
    pub foreign_discount: f64,
    pub convention: DeltaConvention,
}

impl MarketInputs {
    /// Zero rates, spot equal to the forward.
    pub fn flat(expiry: f64, forward: f64, convention: DeltaConvention) -> Self {
        Self {
            expiry,
            forward,
            spot: forward,
            domestic_discount: 1.0,
            foreign_discount: 1.0,
            convention,
        }
    }

    fn validate(&self) -> Result<()> {
        ensure_positive(self.expiry, "time to expiry")?;
        ensure_positive(self.forward, "forward")?;
        ensure_positive(self.spot, "spot")?;
        for (v, what) in [
            (self.domestic_discount, "domestic discount factor"),
            (self.foreign_discount, "foreign discount factor"),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Domain { what, value: v });
            }
        }
        Ok(())
    }

    pub fn delta_context(&self) -> DeltaContext {
        DeltaContext {
            forward: self.forward,
            expiry: self.expiry,
            foreign_discount: self.foreign_discount,
            convention: self.convention,
        }
    }
}

impl SmileQuoteSet {
    /// Resolve every pillar to a strike under the market's delta convention.
    pub fn new(inputs: MarketInputs, pillars: Vec<PillarQuote>) -> Result<Self> {
        inputs.validate()?;
        if pillars.is_empty() {
            return Err(Error::InvalidInput("quote set has no pillars".into()));
        }
        let ctx = inputs.delta_context();
        let mut resolved = Vec::with_capacity(pillars.len());
        for p in pillars {
            p.kind.validate()?;
            ensure_positive(p.vol, "pillar vol")?;
            let k = match p.kind {
                PillarKind::Atm => atm_strike(p.vol, &ctx)?,
                PillarKind::Put { delta } => strike_from_delta(delta, OptionKind::Put, p.vol, &ctx)?,
                PillarKind::Call { delta } => {
                    strike_from_delta(delta, OptionKind::Call, p.vol, &ctx)?
                }
            };
            resolved.push((k, p));
        }
        Self::from_resolved(inputs, resolved)
    }

    /// Quotes read off a smile given as a function of strike: each pillar
    /// sits where the smile's own vol quotes its delta.
    pub fn from_vol_fn<V>(
        inputs: MarketInputs,
        kinds: &[PillarKind],
        scale_vol: f64,
        mut vol_fn: V,
    ) -> Result<Self>
    where
        V: FnMut(f64) -> Result<f64>,
    {
        inputs.validate()?;
        ensure_positive(scale_vol, "scale vol")?;
        let ctx = inputs.delta_context();
        let mut resolved = Vec::with_capacity(kinds.len());
        for kind in kinds {
            kind.validate()?;
            let target = kind.option_kind().zip(kind.delta());
            let k = strike_for_vol_fn(target, &ctx, scale_vol, &mut vol_fn)?;
            resolved.push((k, PillarQuote::new(*kind, vol_fn(k)?)?));
        }
        Self::from_resolved(inputs, resolved)
    }

    /// Build a set from pillars whose strikes are already known.
    pub(crate) fn from_resolved(
        inputs: MarketInputs,
        mut resolved: Vec<(f64, PillarQuote)>,
    ) -> Result<Self> {
        resolved.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in resolved.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidInput(format!(
                    "pillars {} and {} resolve to non-increasing strikes {} and {}",
                    w[0].1.kind.label(),
                    w[1].1.kind.label(),
                    w[0].0,
                    w[1].0
                )));
            }
        }
        Ok(Self {
            name: None,
            valuation_date: None,
            expiry_date: None,
            expiry: inputs.expiry,
            forward: inputs.forward,
            spot: inputs.spot,
            domestic_discount: inputs.domestic_discount,
            foreign_discount: inputs.foreign_discount,
            convention: inputs.convention,
            strikes: resolved.iter().map(|r| r.0).collect(),
            pillars: resolved.into_iter().map(|r| r.1).collect(),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn with_dates(mut self, valuation: NaiveDate, expiry: NaiveDate) -> Self {
        self.valuation_date = Some(valuation);
        self.expiry_date = Some(expiry);
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn valuation_date(&self) -> Option<NaiveDate> {
        self.valuation_date
    }

    pub fn expiry_date(&self) -> Option<NaiveDate> {
        self.expiry_date
    }

    pub fn expiry(&self) -> f64 {
        self.expiry
    }

    pub fn forward(&self) -> f64 {
        self.forward
    }

    pub fn spot(&self) -> f64 {
        self.spot
    }

    pub fn domestic_discount(&self) -> f64 {
        self.domestic_discount
    }

    pub fn foreign_discount(&self) -> f64 {
        self.foreign_discount
    }

    pub fn convention(&self) -> DeltaConvention {
        self.convention
    }

    pub fn pillars(&self) -> &[PillarQuote] {
        &self.pillars
    }

    /// Resolved strikes, strictly increasing, aligned with [`Self::pillars`].
    pub fn strikes(&self) -> &[f64] {
        &self.strikes
    }

    pub fn vols(&self) -> Vec<f64> {
        self.pillars.iter().map(|p| p.vol).collect()
    }

    /// `ln(K_i / F)` for every pillar.
    pub fn log_moneyness(&self) -> Vec<f64> {
        self.strikes.iter().map(|k| (k / self.forward).ln()).collect()
    }

    /// `σ_i² T` for every pillar.
    pub fn total_variances(&self) -> Vec<f64> {
        self.pillars
            .iter()
            .map(|p| p.vol * p.vol * self.expiry)
            .collect()
    }

    pub fn inputs(&self) -> MarketInputs {
        MarketInputs {
            expiry: self.expiry,
            forward: self.forward,
            spot: self.spot,
            domestic_discount: self.domestic_discount,
            foreign_discount: self.foreign_discount,
            convention: self.convention,
        }
    }

    pub fn context(&self) -> ForwardContext {
        ForwardContext {
            forward: self.forward,
            discount: self.domestic_discount,
        }
    }

    pub fn delta_context(&self) -> DeltaContext {
        self.inputs().delta_context()
    }

    pub fn atm_index(&self) -> Option<usize> {
        self.pillars
            .iter()
            .position(|p| matches!(p.kind, PillarKind::Atm))
    }

    /// ATM vol, falling back to the pillar closest to the forward.
    pub fn atm_vol(&self) -> f64 {
        match self.atm_index() {
            Some(i) => self.pillars[i].vol,
            None => {
                let i = (0..self.strikes.len())
                    .min_by(|&a, &b| {
                        let da = (self.strikes[a] / self.forward).ln().abs();
                        let db = (self.strikes[b] / self.forward).ln().abs();
                        da.total_cmp(&db)
                    })
                    .unwrap_or(0);
                self.pillars[i].vol
            }
        }
    }

    /// `σ_ATM √T`, the natural scale of log-moneyness for this maturity.
    pub fn atm_std_dev(&self) -> f64 {
        self.atm_vol() * self.expiry.sqrt()
    }

    pub fn find(&self, kind: PillarKind) -> Option<(f64, PillarQuote)> {
        self.pillars
            .iter()
            .zip(&self.strikes)
            .find(|(p, _)| p.kind == kind)
            .map(|(p, k)| (*k, *p))
    }

    /// Subset of pillars matching `keep`, strikes unchanged.
    pub fn select<F: Fn(&PillarKind) -> bool>(&self, keep: F) -> Result<Self> {
        let resolved: Vec<(f64, PillarQuote)> = self
            .strikes
            .iter()
            .zip(&self.pillars)
            .filter(|(_, p)| keep(&p.kind))
            .map(|(k, p)| (*k, *p))
            .collect();
        if resolved.is_empty() {
            return Err(Error::InvalidInput("selection left no pillars".into()));
        }
        let mut out = Self::from_resolved(self.inputs(), resolved)?;
        out.name = self.name.clone();
        out.valuation_date = self.valuation_date;
        out.expiry_date = self.expiry_date;
        Ok(out)
    }

    /// The usual five quotes: ATM, 25-delta and 10-delta puts and calls.
    /// Sets with exactly five pillars are returned unchanged.
    pub fn standard_pillars(&self) -> Result<Self> {
        if self.pillars.len() == 5 {
            return Ok(self.clone());
        }
        self.select(|k| match k.delta() {
            None => true,
            Some(d) => (d - 0.25).abs() < 1e-12 || (d - 0.10).abs() < 1e-12,
        })
    }
}
