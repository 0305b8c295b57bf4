use fxsmile_core::arbitrage::{density_mass, scan_report, ScanRange};
use fxsmile_core::blackscholes::{black_undiscounted, OptionKind};
use fxsmile_core::market::builtin_fixture_names;
use fxsmile_core::models::pillar_residuals;
use fxsmile_core::pricing::{auto_quanto_price, digital_price, variance_swap_replication, DigitalMethod};
use fxsmile_core::smile::VarianceDerivatives;
use fxsmile_core::smiles::{fit_delta_polynomial, DeltaKind, StrikeSolverMethod, VolTransform};
use fxsmile_core::{calibrate, calibrate_model, load_fixture, ModelSpec, Result, SmileSection};
use proptest::prelude::*;

fn standard(name: &str) -> fxsmile_core::SmileQuoteSet {
    load_fixture(name).unwrap().standard_pillars().unwrap()
}

#[test]
fn exact_models_reproduce_pillars() {
    let exact = [
        "poly-reduced",
        "poly-forward",
        "exp-poly-bar-forward",
        "exp-poly-forward",
        "spline-logm-var-natural",
        "spline-delta-vol-natural",
        "spline-delta-vol-clamped-flat",
        "spline-logm-var-clamped-flat",
    ];
    for fixture in builtin_fixture_names() {
        let q = standard(fixture);
        for model in exact {
            let s = calibrate_model(&q, &model.parse().unwrap()).unwrap();
            for r in pillar_residuals(s.as_ref(), &q).unwrap() {
                assert!(r.abs() < 1e-10, "{fixture}/{model}: residual {r:e}");
            }
        }
    }
}

#[test]
fn constrained_svi_variance_is_positive() {
    for fixture in builtin_fixture_names() {
        let s = calibrate_model(&standard(fixture), &ModelSpec::SVI_A_NON_NEGATIVE).unwrap();
        for i in 0..=2000 {
            let y = -10.0 + 20.0 * i as f64 / 2000.0;
            let w = s.total_variance(y).unwrap();
            assert!(w > 0.0, "{fixture}: w({y}) = {w}");
        }
    }
}

#[test]
fn xssvi_fits_pass_the_g_scan() {
    for fixture in builtin_fixture_names() {
        let s = calibrate_model(&standard(fixture), &ModelSpec::Xssvi).unwrap();
        let r = scan_report(s.as_ref(), ScanRange::standard(s.as_ref()).unwrap()).unwrap();
        assert!(r.min_g() > 0.0, "{fixture}: min g {}", r.min_g());
        assert!(r.negative_variance.is_empty(), "{fixture}");
    }
}

#[test]
fn calibration_is_deterministic() {
    for fixture in ["usdaed-9m", "eurusd-1y-dense"] {
        let q = standard(fixture);
        for model in ModelSpec::NAMES {
            let spec: ModelSpec = model.parse().unwrap();
            let (Ok(a), Ok(b)) = (calibrate(&q, &spec), calibrate(&q, &spec)) else {
                continue;
            };
            assert_eq!(a, b, "{fixture}/{model}");
        }
    }
}

#[test]
fn newton_and_brent_lookups_agree() {
    for fixture in builtin_fixture_names() {
        let q = standard(fixture);
        let sd = q.atm_std_dev();
        let f = q.forward();
        for kind in [DeltaKind::BarForward, DeltaKind::ForwardNoPremium] {
            for transform in [VolTransform::Identity, VolTransform::ExpLog] {
                let p = fit_delta_polynomial(&q, kind, transform, 4).unwrap();
                for j in 0..50 {
                    let k = f * (-4.0 * sd + 8.0 * sd * j as f64 / 49.0).exp();
                    let n = p.lookup_vol(k, StrikeSolverMethod::NEWTON);
                    let b = p.lookup_vol(k, StrikeSolverMethod::BRENT);
                    if let (Ok(n), Ok(b)) = (n, b) {
                        assert!((n - b).abs() < 1e-9, "{fixture} {kind:?} {transform:?} K={k}: {n} vs {b}");
                    }
                }
            }
        }
    }
}

/// Fits whose wing vols reach several times the ATM vol within eight ATM
/// standard deviations, leaving 1% to 1.6% of the mass outside that window.
/// The mass they miss is accounted for by the tail digitals.
const FAT_TAILED: &[&str] = &["usdaed-9m/sabr", "usdaed-1y/sabr", "usdaed-9m/svi", "usdaed-1y/svi"];

#[test]
fn density_integrates_to_one_for_arbitrage_free_fits() {
    let mut cases: Vec<(&str, ModelSpec)> = builtin_fixture_names()
        .map(|f| (f, ModelSpec::Sabr))
        .collect();
    cases.extend(["usdaed-1m", "usdaed-9m", "usdaed-1y"].map(|f| (f, ModelSpec::SVI)));
    for (fixture, spec) in cases {
        let label = format!("{fixture}/{spec}");
        let s = calibrate_model(&standard(fixture), &spec).unwrap();
        let sd = s.total_variance(0.0).unwrap().sqrt();
        let f = s.forward();
        let (lo, hi) = (f * (-8.0 * sd).exp(), f * (8.0 * sd).exp());
        let mass = density_mass(s.as_ref(), lo, hi).unwrap().value;
        let tails = digital_price(s.as_ref(), 1.0, lo, OptionKind::Put, DigitalMethod::SmileConsistent).unwrap()
            + digital_price(s.as_ref(), 1.0, hi, OptionKind::Call, DigitalMethod::SmileConsistent).unwrap();
        assert!((mass + tails - 1.0).abs() < 1e-6, "{label}: {mass} + {tails}");
        let inside = (0.995..=1.005).contains(&mass);
        assert_eq!(inside, !FAT_TAILED.contains(&label.as_str()), "{label}: mass {mass}");
    }
}

#[test]
fn negative_g_and_negative_density_coincide() {
    for fixture in builtin_fixture_names() {
        let q = standard(fixture);
        for model in ModelSpec::NAMES {
            let Ok(s) = calibrate_model(&q, &model.parse().unwrap()) else {
                continue;
            };
            let r = scan_report(s.as_ref(), ScanRange::standard(s.as_ref()).unwrap()).unwrap();
            for (g, p) in r.g.g.iter().zip(&r.density.density) {
                if g.is_finite() && p.is_finite() {
                    assert_eq!(*g < 0.0, *p < 0.0, "{fixture}/{model}: g {g} p {p}");
                }
            }
            assert_eq!(r.g.negative_intervals.len(), r.density.negative_intervals.len());
        }
    }
}

#[test]
fn auto_quanto_call_dominates_scaled_vanilla() {
    for fixture in builtin_fixture_names() {
        let q = standard(fixture);
        let b = q.domestic_discount();
        for model in ["exp-poly-bar-forward", "svi", "sabr", "xssvi", "spline-logm-var-natural"] {
            let s = calibrate_model(&q, &model.parse().unwrap()).unwrap();
            for k in q.strikes() {
                let Ok(aq) = auto_quanto_price(s.as_ref(), b, *k, OptionKind::Call, 1.0) else {
                    continue;
                };
                let vanilla =
                    b * black_undiscounted(q.forward(), *k, s.vol(*k).unwrap() * q.expiry().sqrt(), OptionKind::Call);
                assert!(
                    aq.price >= k * vanilla - 1e-12 * q.forward(),
                    "{fixture}/{model} K={k}: {} < {}",
                    aq.price,
                    k * vanilla
                );
            }
        }
    }
}

/// A smile with extra variance added outside `[lo, hi]` in log-moneyness.
struct FattenedWings<'a> {
    base: &'a dyn SmileSection,
    lo: f64,
    hi: f64,
    bump: f64,
}

impl SmileSection for FattenedWings<'_> {
    fn name(&self) -> &str {
        "fattened"
    }

    fn forward(&self) -> f64 {
        self.base.forward()
    }

    fn expiry(&self) -> f64 {
        self.base.expiry()
    }

    fn total_variance(&self, y: f64) -> Result<f64> {
        let out = (self.lo - y).max(0.0) + (y - self.hi).max(0.0);
        Ok(self.base.total_variance(y)? + self.bump * out * out)
    }

    fn variance_derivatives(&self, y: f64) -> Result<VarianceDerivatives> {
        let d = self.base.variance_derivatives(y)?;
        let (w, dw, d2w) = if y < self.lo {
            let e = self.lo - y;
            (e * e, -2.0 * e, 2.0)
        } else if y > self.hi {
            let e = y - self.hi;
            (e * e, 2.0 * e, 2.0)
        } else {
            (0.0, 0.0, 0.0)
        };
        Ok(VarianceDerivatives {
            w: d.w + self.bump * w,
            dw: d.dw + self.bump * dw,
            d2w: d.d2w + self.bump * d2w,
        })
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fatter_wings_never_lower_the_variance_swap(
        model in prop::sample::select(vec!["svi", "sabr", "exp-poly-bar-forward", "spline-logm-var-natural"]),
        small in 0.0f64..0.5,
        extra in 1e-3f64..2.0,
    ) {
        let q = standard("eurusd-1m-dense");
        let s = calibrate_model(&q, &model.parse().unwrap()).unwrap();
        let y = q.log_moneyness();
        let (lo, hi) = (y[0], y[y.len() - 1]);
        let b = q.domestic_discount();
        let fat = |bump| FattenedWings { base: s.as_ref(), lo, hi, bump };
        let thin = variance_swap_replication(&fat(small), b).unwrap().fair_vol;
        let thick = variance_swap_replication(&fat(small + extra), b).unwrap().fair_vol;
        prop_assert!(thick >= thin - 1e-9, "{} then {}", thin, thick);
    }
}
