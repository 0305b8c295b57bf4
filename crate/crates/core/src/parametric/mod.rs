//! Parametric smiles and their calibration.

mod sabr;
mod svi;
mod xssvi;

pub use sabr::{calibrate_sabr, sabr_vol, SabrParams, SabrSmile};
pub use svi::{calibrate_svi, svi_total_variance, SviParams, SviSmile};
pub use xssvi::{calibrate_xssvi, xssvi_total_variance, XssviParams, XssviSmile};
