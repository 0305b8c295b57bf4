//! Quotes manufactured from a mixture of two lognormal distributions.

use serde::{Deserialize, Serialize};

use crate::blackscholes::{black_undiscounted, implied_vol, ForwardContext, OptionKind, OptionSpec};
use crate::error::{ensure_positive, Error, Result};

use super::{DeltaConvention, MarketInputs, PillarKind, SmileQuoteSet};

/// Two lognormal components with weights `w` and `1 − w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub weight: f64,
    pub forward1: f64,
    pub forward2: f64,
    pub vol1: f64,
    pub vol2: f64,
}

impl MixtureParams {
    pub fn new(weight: f64, forward1: f64, forward2: f64, vol1: f64, vol2: f64) -> Result<Self> {
        let p = Self {
            weight,
            forward1,
            forward2,
            vol1,
            vol2,
        };
        p.validate()?;
        Ok(p)
    }

    /// Pick the second component's forward so the mixture mean is `forward`.
    pub fn from_mean(weight: f64, forward: f64, forward1: f64, vol1: f64, vol2: f64) -> Result<Self> {
        ensure_positive(forward, "mixture mean")?;
        if weight == 1.0 {
            return Self::new(1.0, forward, forward, vol1, vol2);
        }
        let forward2 = (forward - weight * forward1) / (1.0 - weight);
        Self::new(weight, forward1, forward2, vol1, vol2)
    }

    fn validate(&self) -> Result<()> {
        if !(self.weight > 0.0 && self.weight <= 1.0) {
            return Err(Error::Domain {
                what: "mixture weight",
                value: self.weight,
            });
        }
        ensure_positive(self.forward1, "first component forward")?;
        ensure_positive(self.forward2, "second component forward")?;
        ensure_positive(self.vol1, "first component vol")?;
        ensure_positive(self.vol2, "second component vol")?;
        Ok(())
    }

    /// Mixture mean `w·F1 + (1 − w)·F2`.
    pub fn forward(&self) -> f64 {
        self.weight * self.forward1 + (1.0 - self.weight) * self.forward2
    }

    /// Undiscounted option price under the mixture.
    pub fn price(&self, strike: f64, expiry: f64, kind: OptionKind) -> f64 {
        let sq = expiry.sqrt();
        self.weight * black_undiscounted(self.forward1, strike, self.vol1 * sq, kind)
            + (1.0 - self.weight) * black_undiscounted(self.forward2, strike, self.vol2 * sq, kind)
    }

    /// Black implied vol of the out-of-the-money mixture option at `strike`.
    pub fn implied_vol(&self, strike: f64, expiry: f64) -> Result<f64> {
        let f = self.forward();
        let kind = if strike >= f {
            OptionKind::Call
        } else {
            OptionKind::Put
        };
        let opt = OptionSpec::new(strike, expiry, kind)?;
        implied_vol(
            self.price(strike, expiry, kind),
            &opt,
            &ForwardContext::undiscounted(f)?,
        )
    }

    fn rms_vol(&self) -> f64 {
        (self.weight * self.vol1 * self.vol1 + (1.0 - self.weight) * self.vol2 * self.vol2).sqrt()
    }
}

/// Quote set whose pillar vols are the mixture's implied vols at the strikes
/// where the smile itself quotes the requested deltas. Zero rates, spot equal
/// to the mixture mean.
pub fn mixture_quotes(
    p: &MixtureParams,
    kinds: &[PillarKind],
    expiry: f64,
    convention: DeltaConvention,
) -> Result<SmileQuoteSet> {
    p.validate()?;
    let inputs = MarketInputs::flat(expiry, p.forward(), convention);
    SmileQuoteSet::from_vol_fn(inputs, kinds, p.rms_vol(), |k| p.implied_vol(k, expiry))
}
