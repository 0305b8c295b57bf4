//! FX volatility smile representations, their arbitrage diagnostics and
//! replication pricing.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arbitrage;
pub mod blackscholes;
pub mod error;
pub mod market;
pub mod models;
pub mod numerics;
pub mod parametric;
pub mod pricing;
pub mod quadrature;
pub mod smile;
pub mod smiles;

pub use error::{Error, Result};
pub use market::{load_fixture, DeltaConvention, PillarKind, PillarQuote, SmileQuoteSet};
pub use models::{calibrate, calibrate_model, Calibrated, ModelSpec};
pub use smile::SmileSection;
