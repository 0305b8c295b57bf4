//! Cubic spline smiles, either total variance against log-moneyness or vol
//! against forward delta.

use serde::{Deserialize, Serialize};

use crate::blackscholes::norm_inv_cdf;
use crate::error::{Error, Result};
use crate::market::SmileQuoteSet;
use crate::numerics::brent;
use crate::smile::{SmileSection, VarianceDerivatives};

use super::lookup::{DeltaKind, DeltaLookup, StrikeSolverMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplineBoundary {
    /// Zero second derivative at both ends.
    Natural,
    /// Zero first derivative at both ends.
    ClampedZeroSlope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extrapolation {
    /// Hold the boundary value.
    Flat,
    /// Continue with the spline's slope at the boundary node.
    LinearBoundarySlope,
}

/// Interpolating C² cubic spline stored by its node second derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
    boundary: SplineBoundary,
    extrapolation: Extrapolation,
}

/// Left and right limits of the second derivative at a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureJump {
    pub x: f64,
    pub left: f64,
    pub right: f64,
}

impl CurvatureJump {
    pub fn size(&self) -> f64 {
        (self.right - self.left).abs()
    }
}

impl CubicSpline {
    pub fn new(
        x: Vec<f64>,
        y: Vec<f64>,
        boundary: SplineBoundary,
        extrapolation: Extrapolation,
    ) -> Result<Self> {
        let n = x.len();
        if n < 3 || y.len() != n {
            return Err(Error::InvalidInput(format!(
                "a cubic spline needs at least 3 nodes with one value each, got {} and {}",
                n,
                y.len()
            )));
        }
        if let Some(index) = (1..n).find(|&i| !(x[i] > x[i - 1])) {
            return Err(Error::NodesNotMonotone { index });
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let slope: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();

        // tridiagonal system sub[i] m[i-1] + diag[i] m[i] + sup[i] m[i+1] = rhs[i]
        let mut sub = vec![0.0; n];
        let mut diag = vec![1.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            sub[i] = h[i - 1];
            diag[i] = 2.0 * (h[i - 1] + h[i]);
            sup[i] = h[i];
            rhs[i] = 6.0 * (slope[i] - slope[i - 1]);
        }
        if boundary == SplineBoundary::ClampedZeroSlope {
            diag[0] = 2.0 * h[0];
            sup[0] = h[0];
            rhs[0] = 6.0 * slope[0];
            sub[n - 1] = h[n - 2];
            diag[n - 1] = 2.0 * h[n - 2];
            rhs[n - 1] = -6.0 * slope[n - 2];
        }
        for i in 1..n {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut m = vec![0.0; n];
        m[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
        }
        Ok(Self {
            x,
            y,
            m,
            boundary,
            extrapolation,
        })
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.y)
    }

    pub fn boundary(&self) -> SplineBoundary {
        self.boundary
    }

    pub fn extrapolation(&self) -> Extrapolation {
        self.extrapolation
    }

    fn segment(&self, i: usize, t: f64) -> (f64, f64, f64) {
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (mi, mj) = (self.m[i], self.m[i + 1]);
        let v = a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * mi + (b * b * b - b) * mj) * h * h / 6.0;
        let d1 = (self.y[i + 1] - self.y[i]) / h - (3.0 * a * a - 1.0) / 6.0 * h * mi
            + (3.0 * b * b - 1.0) / 6.0 * h * mj;
        let d2 = a * mi + b * mj;
        (v, d1, d2)
    }

    /// Value, first and second derivative at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let n = self.x.len();
        let end = |i: usize, seg: usize| {
            let (v, d1, _) = self.segment(seg, self.x[i]);
            match self.extrapolation {
                Extrapolation::Flat => (v, 0.0, 0.0),
                Extrapolation::LinearBoundarySlope => (v + d1 * (t - self.x[i]), d1, 0.0),
            }
        };
        if t < self.x[0] {
            return end(0, 0);
        }
        if t > self.x[n - 1] {
            return end(n - 1, n - 2);
        }
        let i = match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        self.segment(i, t)
    }

    /// Second-derivative limits from either side of every node, including
    /// the extrapolated side of the two end nodes.
    pub fn curvature_jumps(&self) -> Vec<CurvatureJump> {
        let n = self.x.len();
        (0..n)
            .map(|i| {
                let left = if i == 0 {
                    0.0
                } else {
                    self.segment(i - 1, self.x[i]).2
                };
                let right = if i == n - 1 {
                    0.0
                } else {
                    self.segment(i, self.x[i]).2
                };
                CurvatureJump {
                    x: self.x[i],
                    left,
                    right,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplineAxis {
    /// Total variance against `ln(K/F)`.
    LogMoneynessVariance,
    /// Vol against the forward call delta without premium.
    DeltaVol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicSplineSmile {
    name: String,
    axis: SplineAxis,
    spline: CubicSpline,
    forward: f64,
    expiry: f64,
    lookup: DeltaLookup,
}

/// Spline through the pillars on the requested axis.
///
/// On the delta axis every pillar sits at the no-premium forward call delta
/// of its resolved strike and vol, so puts and calls share one monotone axis.
pub fn fit_spline_smile(
    quotes: &SmileQuoteSet,
    axis: SplineAxis,
    boundary: SplineBoundary,
    extrapolation: Extrapolation,
) -> Result<CubicSplineSmile> {
    let lookup = DeltaLookup {
        kind: DeltaKind::ForwardNoPremium,
        forward: quotes.forward(),
        expiry: quotes.expiry(),
        atm_vol: quotes.atm_vol(),
    };
    let (x, y) = match axis {
        SplineAxis::LogMoneynessVariance => (quotes.log_moneyness(), quotes.total_variances()),
        SplineAxis::DeltaVol => {
            let mut pts: Vec<(f64, f64)> = quotes
                .strikes()
                .iter()
                .zip(quotes.vols())
                .map(|(k, v)| (lookup.delta(*k, v), v))
                .collect();
            pts.reverse();
            pts.into_iter().unzip()
        }
    };
    let spline = CubicSpline::new(x, y, boundary, extrapolation)?;
    let name = format!(
        "spline-{}-{}-{}",
        match axis {
            SplineAxis::LogMoneynessVariance => "logm-var",
            SplineAxis::DeltaVol => "delta-vol",
        },
        match boundary {
            SplineBoundary::Natural => "natural",
            SplineBoundary::ClampedZeroSlope => "clamped",
        },
        match extrapolation {
            Extrapolation::Flat => "flat",
            Extrapolation::LinearBoundarySlope => "linear",
        }
    );
    Ok(CubicSplineSmile {
        name,
        axis,
        spline,
        forward: quotes.forward(),
        expiry: quotes.expiry(),
        lookup,
    })
}

impl CubicSplineSmile {
    pub fn axis(&self) -> SplineAxis {
        self.axis
    }

    pub fn spline(&self) -> &CubicSpline {
        &self.spline
    }

    pub fn curvature_jumps(&self) -> Vec<CurvatureJump> {
        self.spline.curvature_jumps()
    }

    /// Maximal log-moneyness intervals inside `[lo, hi]` where the total
    /// variance is not positive, located on an `n`-point grid and refined
    /// by Brent.
    fn delta_vol(&self, strike: f64) -> Result<f64> {
        self.lookup.solve(strike, StrikeSolverMethod::NEWTON, |d| {
            let (v, dv, _) = self.spline.eval(d);
            (v, dv)
        })
    }

    pub fn negative_variance_intervals(&self, lo: f64, hi: f64, n: usize) -> Result<Vec<(f64, f64)>> {
        if self.axis != SplineAxis::LogMoneynessVariance {
            return Err(Error::InvalidInput(
                "negative variance scan needs the log-moneyness/variance axis".into(),
            ));
        }
        negative_intervals(|y| self.spline.eval(y).0, lo, hi, n)
    }
}

/// Maximal sub-intervals of `[lo, hi]` on which `w ≤ 0`.
pub(crate) fn negative_intervals<W: Fn(f64) -> f64>(
    w: W,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<Vec<(f64, f64)>> {
    if !(hi > lo) || n < 2 {
        return Err(Error::InvalidInput(format!(
            "scan range [{lo}, {hi}] with {n} points"
        )));
    }
    let grid: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    let neg: Vec<bool> = grid.iter().map(|y| w(*y) <= 0.0).collect();
    let edge = |a: f64, b: f64| brent(&w, a, b, 1e-14, 200).unwrap_or(0.5 * (a + b));
    let mut out = Vec::new();
    let mut start: Option<f64> = None;
    for i in 0..n {
        match (neg[i], start) {
            (true, None) => {
                start = Some(if i == 0 { lo } else { edge(grid[i - 1], grid[i]) });
            }
            (false, Some(s)) => {
                out.push((s, edge(grid[i - 1], grid[i])));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, hi));
    }
    Ok(out)
}

impl SmileSection for CubicSplineSmile {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&self) -> f64 {
        self.forward
    }

    fn expiry(&self) -> f64 {
        self.expiry
    }

    fn total_variance(&self, y: f64) -> Result<f64> {
        match self.axis {
            SplineAxis::LogMoneynessVariance => Ok(self.spline.eval(y).0),
            SplineAxis::DeltaVol => {
                let vol = self.delta_vol(self.forward * y.exp())?;
                Ok(vol * vol * self.expiry)
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        let (x, v) = self.spline.nodes();
        match self.axis {
            SplineAxis::LogMoneynessVariance => x.to_vec(),
            SplineAxis::DeltaVol => {
                let sqrt_t = self.expiry.sqrt();
                let mut y: Vec<f64> = x
                    .iter()
                    .zip(v)
                    .map(|(d, vol)| {
                        let s = vol * sqrt_t;
                        0.5 * s * s - s * norm_inv_cdf(*d).unwrap_or(f64::NAN)
                    })
                    .filter(|y| y.is_finite())
                    .collect();
                y.sort_by(f64::total_cmp);
                y
            }
        }
    }

    fn variance_derivatives(&self, y: f64) -> Result<VarianceDerivatives> {
        match self.axis {
            SplineAxis::LogMoneynessVariance => {
                let (w, dw, d2w) = self.spline.eval(y);
                Ok(VarianceDerivatives { w, dw, d2w })
            }
            SplineAxis::DeltaVol => {
                let k = self.forward * y.exp();
                let vol = self.delta_vol(k)?;
                let (_, df, d2f) = self.spline.eval(self.lookup.delta(k, vol));
                Ok(self.lookup.variance_derivatives(y, vol, df, d2f))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::load_fixture;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn collinear_nodes_give_a_line() {
        let s = CubicSpline::new(
            vec![0.0, 1.0, 3.0],
            vec![1.0, 3.0, 7.0],
            SplineBoundary::Natural,
            Extrapolation::LinearBoundarySlope,
        )
        .unwrap();
        for t in [-1.0, 0.0, 0.5, 2.0, 3.0, 4.5] {
            let (v, d1, d2) = s.eval(t);
            assert_abs_diff_eq!(v, 1.0 + 2.0 * t, epsilon = 1e-14);
            assert_abs_diff_eq!(d1, 2.0, epsilon = 1e-14);
            assert_abs_diff_eq!(d2, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn clamped_has_zero_end_slopes() {
        let s = CubicSpline::new(
            vec![0.0, 0.4, 1.0, 1.5],
            vec![2.0, 1.0, 1.5, 3.0],
            SplineBoundary::ClampedZeroSlope,
            Extrapolation::Flat,
        )
        .unwrap();
        assert_abs_diff_eq!(s.eval(0.0).1, 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(s.eval(1.5).1, 0.0, epsilon = 1e-13);
        assert_eq!(s.eval(-3.0).0, 2.0);
        assert_eq!(s.eval(9.0).0, 3.0);
    }

    #[test]
    fn rejects_unsorted_nodes() {
        let r = CubicSpline::new(
            vec![0.0, 1.0, 1.0],
            vec![0.0; 3],
            SplineBoundary::Natural,
            Extrapolation::Flat,
        );
        assert!(matches!(r, Err(Error::NodesNotMonotone { index: 2 })));
    }

    #[test]
    fn audnzd_clamped_delta_spline_jumps_at_wing_nodes() {
        let q = load_fixture("audnzd-7d").unwrap();
        let s = fit_spline_smile(
            &q,
            SplineAxis::DeltaVol,
            SplineBoundary::ClampedZeroSlope,
            Extrapolation::Flat,
        )
        .unwrap();
        let j = s.curvature_jumps();
        assert!(j[0].size() > 1e-3 && j[4].size() > 1e-3);
        for k in &j[1..4] {
            assert!(k.size() < 1e-12);
        }
        for (k, v) in q.strikes().iter().zip(q.vols()) {
            assert_abs_diff_eq!(s.vol(*k).unwrap(), v, epsilon = 1e-12);
        }
    }

    #[test]
    fn natural_linear_is_c2_everywhere() {
        let q = load_fixture("audnzd-7d").unwrap();
        let s = fit_spline_smile(
            &q,
            SplineAxis::LogMoneynessVariance,
            SplineBoundary::Natural,
            Extrapolation::LinearBoundarySlope,
        )
        .unwrap();
        assert!(s.curvature_jumps().iter().all(|j| j.size() < 1e-12));
        let sd = q.atm_std_dev();
        assert!(s.negative_variance_intervals(-5.0 * sd, 5.0 * sd, 801).unwrap().is_empty());
    }

    #[test]
    fn eurtry_put_wing_goes_negative() {
        let q = load_fixture("eurtry-1y").unwrap();
        let s = fit_spline_smile(
            &q,
            SplineAxis::LogMoneynessVariance,
            SplineBoundary::Natural,
            Extrapolation::LinearBoundarySlope,
        )
        .unwrap();
        let y0 = q.log_moneyness()[0];
        let iv = s.negative_variance_intervals(-3.0, 1.0, 4001).unwrap();
        assert_eq!(iv.len(), 1);
        assert!(iv[0].1 < y0);
        assert_abs_diff_eq!(s.total_variance(iv[0].1).unwrap(), 0.0, epsilon = 1e-12);
        assert!(s.vol(q.forward() * (iv[0].1 - 0.1).exp()).is_err());
    }

    #[test]
    fn delta_axis_derivatives_match_differences() {
        let q = load_fixture("audnzd-7d").unwrap();
        let s = fit_spline_smile(&q, SplineAxis::DeltaVol, SplineBoundary::Natural, Extrapolation::LinearBoundarySlope)
            .unwrap();
        let sd = q.atm_vol() * q.expiry().sqrt();
        let nodes = s.breakpoints();
        for j in 0..60 {
            let y = -5.0 * sd + 10.0 * sd * j as f64 / 59.0;
            let h = 1e-3 * sd;
            if nodes.iter().any(|b| (b - y).abs() < 3.0 * h) {
                continue;
            }
            let d = s.variance_derivatives(y).unwrap();
            let fd = crate::smile::five_point(|x| Ok(s.variance_derivatives(x)?.dw), y, h).unwrap();
            assert!((d.d2w - fd.dw).abs() <= 1e-6 * d.w / (sd * sd), "{y}: {} vs {}", d.d2w, fd.dw);
        }
    }

    proptest! {
        #[test]
        fn interpolates_and_is_c1(ys in prop::collection::vec(-1.0f64..1.0, 5),
                                  gaps in prop::collection::vec(0.1f64..1.0, 4),
                                  clamped in any::<bool>()) {
            let mut x = vec![0.0];
            for g in &gaps {
                x.push(x.last().unwrap() + g);
            }
            let boundary = if clamped { SplineBoundary::ClampedZeroSlope } else { SplineBoundary::Natural };
            let s = CubicSpline::new(x.clone(), ys.clone(), boundary, Extrapolation::Flat).unwrap();
            for (xi, yi) in x.iter().zip(&ys) {
                prop_assert_eq!(s.eval(*xi).0, *yi);
            }
            for (i, xi) in x.iter().enumerate().take(4).skip(1) {
                let left = s.segment(i - 1, *xi).1;
                let right = s.segment(i, *xi).1;
                prop_assert!((left - right).abs() < 1e-12);
            }
        }
    }
}
