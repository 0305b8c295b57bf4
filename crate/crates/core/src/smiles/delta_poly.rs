//! Smiles given as a polynomial in delta: `σ = P(Δ − ½)` or
//! `σ = exp(P(Δ − ½))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::SmileQuoteSet;
use crate::numerics::solve;
use crate::smile::{SmileSection, VarianceDerivatives};

use super::lookup::{DeltaKind, DeltaLookup, FixedPointTrace, StrikeSolverMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VolTransform {
    /// The polynomial is the vol.
    Identity,
    /// The polynomial is the log of the vol.
    ExpLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaPolynomial {
    name: String,
    lookup: DeltaLookup,
    transform: VolTransform,
    /// Coefficients of `(Δ − ½)^i`, lowest order first.
    coefficients: Vec<f64>,
    pillar_deltas: Vec<f64>,
    method: StrikeSolverMethod,
}

/// Interpolate the pillars exactly with a polynomial of degree `degree`.
///
/// Pillar coordinates are the deltas of the resolved strikes at their own
/// vols (at the ATM vol for [`DeltaKind::ReducedAtm`]).
pub fn fit_delta_polynomial(
    quotes: &SmileQuoteSet,
    kind: DeltaKind,
    transform: VolTransform,
    degree: usize,
) -> Result<DeltaPolynomial> {
    let n = quotes.pillars().len();
    if n != degree + 1 {
        return Err(Error::InvalidInput(format!(
            "a degree {degree} polynomial needs {} pillars, got {n}",
            degree + 1
        )));
    }
    let lookup = DeltaLookup {
        kind,
        forward: quotes.forward(),
        expiry: quotes.expiry(),
        atm_vol: quotes.atm_vol(),
    };
    let vols = quotes.vols();
    let deltas: Vec<f64> = quotes
        .strikes()
        .iter()
        .zip(&vols)
        .map(|(k, v)| lookup.delta(*k, *v))
        .collect();
    for i in 0..n {
        for j in 0..i {
            if (deltas[i] - deltas[j]).abs() < 1e-14 {
                return Err(Error::SingularSystem(format!(
                    "pillars {j} and {i} share delta {}",
                    deltas[i]
                )));
            }
        }
    }
    let matrix: Vec<Vec<f64>> = deltas
        .iter()
        .map(|d| (0..n).map(|p| (d - 0.5).powi(p as i32)).collect())
        .collect();
    let rhs: Vec<f64> = vols
        .iter()
        .map(|v| match transform {
            VolTransform::Identity => *v,
            VolTransform::ExpLog => v.ln(),
        })
        .collect();
    let coefficients = solve(matrix, rhs)?;
    let name = format!(
        "{}-{}",
        match transform {
            VolTransform::Identity => "poly",
            VolTransform::ExpLog => "exp-poly",
        },
        match kind {
            DeltaKind::ReducedAtm => "reduced",
            DeltaKind::BarForward => "bar-forward",
            DeltaKind::ForwardNoPremium => "forward",
        }
    );
    Ok(DeltaPolynomial {
        name,
        lookup,
        transform,
        coefficients,
        pillar_deltas: deltas,
        method: StrikeSolverMethod::default(),
    })
}

impl DeltaPolynomial {
    /// Same smile, different strike lookup.
    pub fn with_method(mut self, method: StrikeSolverMethod) -> Self {
        self.method = method;
        self
    }

    pub fn method(&self) -> StrikeSolverMethod {
        self.method
    }

    pub fn delta_kind(&self) -> DeltaKind {
        self.lookup.kind
    }

    pub fn transform(&self) -> VolTransform {
        self.transform
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn pillar_deltas(&self) -> &[f64] {
        &self.pillar_deltas
    }

    pub fn lookup(&self) -> &DeltaLookup {
        &self.lookup
    }

    /// `(σ(Δ), dσ/dΔ)`.
    pub fn vol_at_delta(&self, delta: f64) -> (f64, f64) {
        let (v, dv, _) = self.vol_at_delta_with_curvature(delta);
        (v, dv)
    }

    /// `σ(Δ)` and its first two delta derivatives.
    pub fn vol_at_delta_with_curvature(&self, delta: f64) -> (f64, f64, f64) {
        let x = delta - 0.5;
        let (mut p, mut dp, mut d2p) = (0.0, 0.0, 0.0);
        for c in self.coefficients.iter().rev() {
            d2p = d2p * x + 2.0 * dp;
            dp = dp * x + p;
            p = p * x + c;
        }
        match self.transform {
            VolTransform::Identity => (p, dp, d2p),
            VolTransform::ExpLog => {
                let v = p.exp();
                (v, v * dp, v * (d2p + dp * dp))
            }
        }
    }

    pub fn lookup_vol(&self, strike: f64, method: StrikeSolverMethod) -> Result<f64> {
        self.lookup
            .solve(strike, method, |d| self.vol_at_delta(d))
    }

    pub fn fixed_point_trace(&self, strike: f64, max_iter: usize) -> FixedPointTrace {
        self.lookup
            .fixed_point(strike, max_iter, |d| self.vol_at_delta(d))
    }
}

impl SmileSection for DeltaPolynomial {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&self) -> f64 {
        self.lookup.forward
    }

    fn expiry(&self) -> f64 {
        self.lookup.expiry
    }

    fn total_variance(&self, y: f64) -> Result<f64> {
        let vol = self.lookup_vol(self.lookup.forward * y.exp(), self.method)?;
        Ok(vol * vol * self.lookup.expiry)
    }

    fn variance_derivatives(&self, y: f64) -> Result<VarianceDerivatives> {
        let vol = self.lookup_vol(self.lookup.forward * y.exp(), self.method)?;
        let (_, df, d2f) =
            self.vol_at_delta_with_curvature(self.lookup.delta(self.lookup.forward * y.exp(), vol));
        Ok(self.lookup.variance_derivatives(y, vol, df, d2f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{load_fixture, DeltaConvention, MarketInputs, PillarKind, PillarQuote};
    use approx::assert_abs_diff_eq;

    fn flat_quotes(v: f64) -> SmileQuoteSet {
        let kinds = [
            PillarKind::put(0.10),
            PillarKind::put(0.25),
            PillarKind::Atm,
            PillarKind::call(0.25),
            PillarKind::call(0.10),
        ];
        let pillars = kinds.iter().map(|k| PillarQuote::new(*k, v).unwrap()).collect();
        SmileQuoteSet::new(MarketInputs::flat(0.5, 1.1, DeltaConvention::FORWARD), pillars).unwrap()
    }

    #[test]
    fn flat_pillars_give_constant() {
        let q = flat_quotes(0.12);
        for (t, c0) in [(VolTransform::Identity, 0.12), (VolTransform::ExpLog, 0.12f64.ln())] {
            let p = fit_delta_polynomial(&q, DeltaKind::BarForward, t, 4).unwrap();
            assert_abs_diff_eq!(p.coefficients()[0], c0, epsilon = 1e-12);
            for c in &p.coefficients()[1..] {
                assert_abs_diff_eq!(*c, 0.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn eurczk_reduced_quartic_is_exact() {
        let q = load_fixture("eurczk-32d").unwrap();
        let p = fit_delta_polynomial(&q, DeltaKind::ReducedAtm, VolTransform::Identity, 4).unwrap();
        for (k, v) in q.strikes().iter().zip(q.vols()) {
            assert_abs_diff_eq!(p.vol(*k).unwrap(), v, epsilon = 1e-12);
        }
    }

    #[test]
    fn usdaed_bar_forward_exp_quartic_is_exact() {
        let q = load_fixture("usdaed-9m").unwrap();
        let p = fit_delta_polynomial(&q, DeltaKind::BarForward, VolTransform::ExpLog, 4).unwrap();
        for (k, v) in q.strikes().iter().zip(q.vols()) {
            for m in [StrikeSolverMethod::NEWTON, StrikeSolverMethod::BRENT] {
                assert_abs_diff_eq!(p.lookup_vol(*k, m).unwrap(), v, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn polynomial_derivative() {
        let q = load_fixture("manufactured-1y").unwrap();
        let p = fit_delta_polynomial(&q, DeltaKind::ForwardNoPremium, VolTransform::ExpLog, 4).unwrap();
        for d in [0.05, 0.3, 0.5, 0.77] {
            let h = 1e-6;
            let fd = (p.vol_at_delta(d + h).0 - p.vol_at_delta(d - h).0) / (2.0 * h);
            assert_abs_diff_eq!(p.vol_at_delta(d).1, fd, epsilon = 1e-7);
        }
    }

    #[test]
    fn wrong_pillar_count() {
        let q = flat_quotes(0.1);
        assert!(fit_delta_polynomial(&q, DeltaKind::BarForward, VolTransform::Identity, 2).is_err());
    }

    #[test]
    fn wings_are_flat() {
        let q = load_fixture("usdaed-9m").unwrap();
        let f = q.forward();
        let p = fit_delta_polynomial(&q, DeltaKind::BarForward, VolTransform::ExpLog, 4).unwrap();
        let (a, b) = (p.vol(10.0 * f).unwrap(), p.vol(100.0 * f).unwrap());
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn variance_derivatives_match_differences() {
        let q = load_fixture("eurczk-32d").unwrap();
        let sd = q.atm_vol() * q.expiry().sqrt();
        for kind in [DeltaKind::ReducedAtm, DeltaKind::BarForward, DeltaKind::ForwardNoPremium] {
            for t in [VolTransform::Identity, VolTransform::ExpLog] {
                let p = fit_delta_polynomial(&q, kind, t, 4).unwrap();
                for m in [-2.0, -0.7, 0.0, 0.4, 1.9] {
                    let y = m * sd;
                    let d = p.variance_derivatives(y).unwrap();
                    let h = 2e-3 * sd;
                    let fd1 = crate::smile::five_point(|x| p.total_variance(x), y, h).unwrap();
                    let fd2 =
                        crate::smile::five_point(|x| Ok(p.variance_derivatives(x)?.dw), y, h).unwrap();
                    assert_abs_diff_eq!(d.w, fd1.w, epsilon = 1e-15);
                    assert!((d.dw - fd1.dw).abs() <= 1e-7 * d.dw.abs().max(d.w / sd), "{kind:?} {t:?} {m}");
                    assert!(
                        (d.d2w - fd2.dw).abs() <= 1e-7 * d.d2w.abs().max(d.w / (sd * sd)),
                        "{kind:?} {t:?} {m}: {} vs {}",
                        d.d2w,
                        fd2.dw
                    );
                }
            }
        }
    }
}
