//! Named reproductions. Each writes `<scenario>-<panel>.csv` files and a
//! `<scenario>.json` summary into the output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fxsmile_core::arbitrage::{scan_report, ScanRange, ScanReport};
use fxsmile_core::blackscholes::OptionKind;
use fxsmile_core::models::pillar_residuals;
use fxsmile_core::pricing::{
    auto_quanto_price, digital_price, variance_swap_model_independent, variance_swap_replication,
    DigitalMethod, ModelIndependentScheme,
};
use fxsmile_core::smiles::{
    fit_delta_polynomial, fit_spline_smile, DeltaKind, Extrapolation, SplineAxis, SplineBoundary,
    StrikeSolverMethod, VolTransform,
};
use fxsmile_core::{calibrate, Calibrated, ModelSpec, PillarKind, SmileQuoteSet, SmileSection};
use serde_json::{json, Map, Value};

use crate::commands::{resolve_fixture, rmse};
use crate::csv::{CurveCsv, XKind};
use crate::error::{CliError, Result};

pub const SCENARIOS: [&str; 11] = [
    "fig1-audnzd-svi-g",
    "fig2-audnzd-spline-density",
    "fig3-eurczk-poly-density",
    "fig4-usdaed-fixedpoint",
    "fig5-usdaed-g",
    "fig6-eurtry-density",
    "fig7-manufactured-density",
    "fig8a-eurusd-1m-wings",
    "fig8b-eurusd-1y-wings",
    "table8-prices",
    "varswap-model-independent",
];

/// Result of one scenario: the files written and the JSON summary.
#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub name: String,
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

struct Writer<'a> {
    dir: &'a Path,
    scenario: &'a str,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn text(&mut self, file: String, body: &str) -> Result<()> {
        let path = self.dir.join(file);
        fs::write(&path, body)?;
        self.files.push(path);
        Ok(())
    }

    fn panel(&mut self, panel: &str, csv: &CurveCsv) -> Result<()> {
        self.text(format!("{}-{panel}.csv", self.scenario), &csv.to_csv_string())
    }

    fn finish(mut self, summary: Value) -> Result<ScenarioOutput> {
        let mut body = serde_json::to_string_pretty(&summary)?;
        body.push('\n');
        self.text(format!("{}.json", self.scenario), &body)?;
        Ok(ScenarioOutput {
            name: self.scenario.to_string(),
            files: self.files,
            summary,
        })
    }
}

pub fn run_scenario(name: &str, out_dir: &Path) -> Result<ScenarioOutput> {
    if !SCENARIOS.contains(&name) {
        return Err(CliError::Usage(format!(
            "unknown scenario `{name}`; expected one of {}",
            SCENARIOS.join(", ")
        )));
    }
    fs::create_dir_all(out_dir)?;
    let mut w = Writer {
        dir: out_dir,
        scenario: name,
        files: Vec::new(),
    };
    let summary = match name {
        "fig1-audnzd-svi-g" => curves(&mut w, "audnzd-7d", &named(&["svi-a0"])?, Panels::G)?,
        "fig2-audnzd-spline-density" => spline_density(&mut w)?,
        "fig3-eurczk-poly-density" => curves(&mut w, "eurczk-32d", &named(&["poly-reduced"])?, Panels::Density)?,
        "fig4-usdaed-fixedpoint" => fixed_point(&mut w)?,
        "fig5-usdaed-g" => curves(&mut w, "usdaed-9m", &named(&["svi-a0", "svi", "xssvi", "sabr"])?, Panels::G)?,
        "fig6-eurtry-density" => curves(
            &mut w,
            "eurtry-1y",
            &named(&["exp-poly-bar-forward", "spline-logm-var-natural", "svi", "sabr", "xssvi"])?,
            Panels::Density,
        )?,
        "fig7-manufactured-density" => curves(
            &mut w,
            "manufactured-1y",
            &named(&["exp-poly-forward", "svi", "sabr", "xssvi"])?,
            Panels::Density,
        )?,
        "fig8a-eurusd-1m-wings" => wings(&mut w, "eurusd-1m-dense")?,
        "fig8b-eurusd-1y-wings" => wings(&mut w, "eurusd-1y-dense")?,
        "table8-prices" => table8(&mut w)?,
        _ => model_independent(&mut w)?,
    };
    w.finish(summary)
}

/// Runs the scenarios in order, or on one thread each when `parallel` is set.
/// Outputs come back in input order either way.
pub fn run_all(names: &[&str], out_dir: &Path, parallel: bool) -> Vec<Result<ScenarioOutput>> {
    if !parallel {
        return names.iter().map(|n| run_scenario(n, out_dir)).collect();
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = names
            .iter()
            .map(|n| s.spawn(move || run_scenario(n, out_dir)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(CliError::Usage("scenario thread panicked".into()))))
            .collect()
    })
}

fn named(models: &[&str]) -> Result<Vec<(String, ModelSpec)>> {
    models
        .iter()
        .map(|m| Ok((m.to_string(), m.parse::<ModelSpec>()?)))
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Panels {
    G,
    Density,
}

fn vols_on(smile: &dyn SmileSection, y: &[f64]) -> Result<Vec<f64>> {
    let t = smile.expiry();
    y.iter()
        .map(|y| {
            let w = smile.total_variance(*y)?;
            Ok(if w > 0.0 { (w / t).sqrt() } else { f64::NAN })
        })
        .collect()
}

fn finite_min(values: &[f64]) -> f64 {
    values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min)
}

fn series_summary(
    label: &str,
    smile: &dyn SmileSection,
    quotes: &SmileQuoteSet,
    r: &ScanReport,
) -> Result<Value> {
    let residuals = pillar_residuals(smile, quotes)?;
    Ok(json!({
        "series": label,
        "minG": r.min_g(),
        "minDensity": finite_min(&r.density.density),
        "negativeIntervals": r.density.negative_intervals,
        "negativeGIntervals": r.g.negative_intervals,
        "negativeVarianceIntervals": r.negative_variance,
        "modeCount": r.mode_count(),
        "modes": r.density.modes,
        "gridMass": r.density.integrates_to,
        "pillarResiduals": residuals,
        "rmse": rmse(&residuals),
    }))
}

fn market_series(smile: &mut CurveCsv, quotes: &SmileQuoteSet) -> Result<()> {
    let vols: Vec<f64> = quotes.pillars().iter().map(|p| p.vol).collect();
    smile.push_series("market", XKind::Strike, quotes.strikes(), &vols)
}

/// Collects the per-series summaries under `series` and the headline
/// quantities across them at the top level.
fn aggregate(scenario: &str, fixture: &str, series: Vec<Value>) -> Value {
    let min_g = series
        .iter()
        .filter_map(|s| s["minG"].as_f64())
        .fold(f64::INFINITY, f64::min);
    let mode_count = series
        .iter()
        .filter_map(|s| s["modeCount"].as_u64())
        .max()
        .unwrap_or(0);
    let mut negative = Map::new();
    let mut residuals = Map::new();
    for s in &series {
        let label = s["series"].as_str().unwrap_or_default().to_string();
        negative.insert(label.clone(), s["negativeIntervals"].clone());
        residuals.insert(label, s["pillarResiduals"].clone());
    }
    json!({
        "scenario": scenario,
        "fixture": fixture,
        "minG": min_g,
        "modeCount": mode_count,
        "negativeIntervals": negative,
        "pillarResiduals": residuals,
        "series": series,
    })
}

fn curves(w: &mut Writer, fixture: &str, models: &[(String, ModelSpec)], panels: Panels) -> Result<Value> {
    let quotes = resolve_fixture(fixture)?.standard_pillars()?;
    let fitted = models
        .iter()
        .map(|(label, spec)| Ok((label.clone(), Box::new(calibrate(&quotes, spec)?) as Box<dyn SmileSection>)))
        .collect::<Result<Vec<_>>>()?;
    curves_for(w, fixture, &quotes, &fitted, panels)
}

fn curves_for(
    w: &mut Writer,
    fixture: &str,
    quotes: &SmileQuoteSet,
    fitted: &[(String, Box<dyn SmileSection>)],
    panels: Panels,
) -> Result<Value> {
    let mut smile_csv = CurveCsv::new();
    market_series(&mut smile_csv, quotes)?;
    let mut right = CurveCsv::new();
    let mut series = Vec::new();
    for (label, s) in fitted {
        let r = scan_report(s.as_ref(), ScanRange::standard(s.as_ref())?)?;
        smile_csv.push_series(label, XKind::Strike, &r.density.strikes, &vols_on(s.as_ref(), &r.g.y)?)?;
        match panels {
            Panels::G => right.push_series(label, XKind::LogMoneyness, &r.g.y, &r.g.g)?,
            Panels::Density => right.push_series(label, XKind::Strike, &r.density.strikes, &r.density.density)?,
        }
        series.push(series_summary(label, s.as_ref(), quotes, &r)?);
    }
    w.panel("smile", &smile_csv)?;
    w.panel(if panels == Panels::G { "g" } else { "density" }, &right)?;
    Ok(aggregate(w.scenario, fixture, series))
}

fn spline_density(w: &mut Writer) -> Result<Value> {
    let fixture = "audnzd-7d";
    let quotes = resolve_fixture(fixture)?.standard_pillars()?;
    let mut fitted: Vec<(String, Box<dyn SmileSection>)> = Vec::new();
    let mut jumps = Map::new();
    for (axis, axis_label) in [(SplineAxis::DeltaVol, "delta-vol"), (SplineAxis::LogMoneynessVariance, "logm-var")] {
        for (boundary, extrap, label) in [
            (SplineBoundary::Natural, Extrapolation::LinearBoundarySlope, "natural-linear"),
            (SplineBoundary::ClampedZeroSlope, Extrapolation::Flat, "clamped-flat"),
        ] {
            let s = fit_spline_smile(&quotes, axis, boundary, extrap)?;
            let name = format!("spline-{axis_label}-{label}");
            let sizes: Vec<Value> = s
                .curvature_jumps()
                .iter()
                .map(|j| json!({ "node": j.x, "size": j.size() }))
                .collect();
            jumps.insert(name.clone(), Value::Array(sizes));
            fitted.push((name, Box::new(s)));
        }
    }
    let mut summary = curves_for(w, fixture, &quotes, &fitted, Panels::Density)?;
    summary["curvatureJumps"] = Value::Object(jumps);
    Ok(summary)
}

fn fixed_point(w: &mut Writer) -> Result<Value> {
    let fixture = "usdaed-9m";
    let strike = 3.7;
    let quotes = resolve_fixture(fixture)?.standard_pillars()?;
    let p = fit_delta_polynomial(&quotes, DeltaKind::BarForward, VolTransform::ExpLog, 4)?;
    let trace = p.fixed_point_trace(strike, 100);

    let mut trace_csv = CurveCsv::new();
    let first = trace.iterations - trace.steps.len() + 1;
    let iters: Vec<f64> = (0..trace.steps.len()).map(|i| (first + i) as f64).collect();
    let deltas: Vec<f64> = trace.steps.iter().map(|s| s.delta).collect();
    let vols: Vec<f64> = trace.steps.iter().map(|s| s.vol).collect();
    trace_csv.push_series("delta", XKind::Iteration, &iters, &deltas)?;
    trace_csv.push_series("vol", XKind::Iteration, &iters, &vols)?;
    w.panel("trace", &trace_csv)?;

    let mut smile_csv = CurveCsv::new();
    let grid: Vec<f64> = (1..=99).map(|i| i as f64 / 100.0).collect();
    let curve: Vec<f64> = grid.iter().map(|d| p.vol_at_delta(*d).0).collect();
    smile_csv.push_series("exp-poly-bar-forward", XKind::Delta, &grid, &curve)?;
    let pillar_vols: Vec<f64> = quotes.pillars().iter().map(|q| q.vol).collect();
    smile_csv.push_series("market", XKind::Delta, p.pillar_deltas(), &pillar_vols)?;
    w.panel("smile", &smile_csv)?;

    let mut solvers = Map::new();
    for (label, method) in [("newton", StrikeSolverMethod::NEWTON), ("brent", StrikeSolverMethod::BRENT)] {
        let v = p.lookup_vol(strike, method)?;
        let residual = (v - p.vol_at_delta(p.lookup().delta(strike, v)).0).abs();
        solvers.insert(label.into(), json!({ "vol": v, "residual": residual }));
    }
    let gap = (solvers["newton"]["vol"].as_f64().unwrap_or(f64::NAN)
        - solvers["brent"]["vol"].as_f64().unwrap_or(f64::NAN))
    .abs();
    Ok(json!({
        "scenario": w.scenario,
        "fixture": fixture,
        "model": "exp-poly-bar-forward",
        "strike": strike,
        "startVol": trace.start_vol,
        "iterations": trace.iterations,
        "converged": trace.converged,
        "cyclePoints": trace.cycle_points,
        "solvers": solvers,
        "solverGap": gap,
        "pillarResiduals": pillar_residuals(&p, &quotes)?,
    }))
}

const WING_MODELS: [&str; 4] = ["exp-poly-bar-forward", "svi", "xssvi", "sabr"];

fn wings(w: &mut Writer, fixture: &str) -> Result<Value> {
    let dense = resolve_fixture(fixture)?;
    let quotes = dense.standard_pillars()?;
    let y = dense.log_moneyness();
    let (lo, hi) = (1.15 * y[0], 1.15 * y[y.len() - 1]);
    let grid: Vec<f64> = (0..=400).map(|i| lo + (hi - lo) * i as f64 / 400.0).collect();
    let strikes: Vec<f64> = grid.iter().map(|v| quotes.forward() * v.exp()).collect();
    let mut csv = CurveCsv::new();
    market_series(&mut csv, &dense)?;
    let mut series = Vec::new();
    for model in WING_MODELS {
        let s = calibrate(&quotes, &model.parse()?)?;
        csv.push_series(model, XKind::Strike, &strikes, &vols_on(&s, &grid)?)?;
        let dense_residuals = pillar_residuals(&s, &dense)?;
        let labelled: Map<String, Value> = dense
            .pillars()
            .iter()
            .zip(&dense_residuals)
            .map(|(p, r)| (p.kind.label(), json!(r)))
            .collect();
        series.push(json!({
            "series": model,
            "pillarResiduals": pillar_residuals(&s, &quotes)?,
            "densePillarResiduals": labelled,
            "denseRmse": rmse(&dense_residuals),
        }));
    }
    w.panel("smile", &csv)?;
    Ok(json!({ "scenario": w.scenario, "fixture": fixture, "series": series }))
}

const TABLE8_MODELS: [(&str, &str); 4] = [
    ("poly", "exp-poly-bar-forward"),
    ("svi", "svi"),
    ("xssvi", "xssvi"),
    ("sabr", "sabr"),
];
const NOTIONAL: f64 = 10_000.0;

fn table8(w: &mut Writer) -> Result<Value> {
    let mut table = String::from("maturity,product,strike");
    for (label, _) in TABLE8_MODELS {
        write!(table, ",{label}").ok();
    }
    table.push('\n');
    let mut prices = Map::new();
    for (maturity, fixture) in [("1m", "eurusd-1m-dense"), ("1y", "eurusd-1y-dense")] {
        let dense = resolve_fixture(fixture)?;
        let q = dense.standard_pillars()?;
        let b = q.domestic_discount();
        let strike = |set: &SmileQuoteSet, kind: PillarKind| {
            set.find(kind)
                .map(|(k, _)| k)
                .ok_or_else(|| CliError::Usage(format!("{fixture} has no {} pillar", kind.label())))
        };
        let k10p = strike(&q, PillarKind::put(0.10))?;
        let k10c = strike(&q, PillarKind::call(0.10))?;
        let k1p = strike(&dense, PillarKind::put(0.01))?;
        let k1c = strike(&dense, PillarKind::call(0.01))?;
        let smiles = TABLE8_MODELS
            .iter()
            .map(|(_, m)| Ok(calibrate(&q, &m.parse()?)?))
            .collect::<Result<Vec<Calibrated>>>()?;
        type Pricer<'a> = Box<dyn Fn(&Calibrated) -> fxsmile_core::Result<f64> + 'a>;
        let aq = |k: f64, kind| -> Pricer {
            Box::new(move |s| Ok(auto_quanto_price(s, b, k, kind, NOTIONAL)?.price))
        };
        let rows: Vec<(&str, f64, Pricer)> = vec![
            ("variance swap", f64::NAN, Box::new(|s| Ok(variance_swap_replication(s, b)?.pv_vol))),
            (
                "digital put",
                k10p,
                Box::new(|s| Ok(NOTIONAL * digital_price(s, b, k10p, OptionKind::Put, DigitalMethod::BlackAtSmileVol)?)),
            ),
            ("auto-quanto call", k10c, aq(k10c, OptionKind::Call)),
            ("auto-quanto call", k1c, aq(k1c, OptionKind::Call)),
            ("auto-quanto put", k10p, aq(k10p, OptionKind::Put)),
            ("auto-quanto put", k1p, aq(k1p, OptionKind::Put)),
        ];
        let mut rows_json = Vec::new();
        for (product, k, price) in rows {
            let values = smiles.iter().map(price).collect::<fxsmile_core::Result<Vec<f64>>>()?;
            if k.is_nan() {
                write!(table, "{maturity},{product},").ok();
            } else {
                write!(table, "{maturity},{product},{k:.6}").ok();
            }
            let mut row = Map::new();
            row.insert("product".into(), json!(product));
            row.insert("strike".into(), if k.is_nan() { Value::Null } else { json!(k) });
            for ((label, _), v) in TABLE8_MODELS.iter().zip(&values) {
                write!(table, ",{v:.2}").ok();
                row.insert((*label).into(), json!(v));
            }
            table.push('\n');
            rows_json.push(Value::Object(row));
        }
        prices.insert(maturity.into(), Value::Array(rows_json));
    }
    w.text(format!("{}-table.csv", w.scenario), &table)?;
    Ok(json!({
        "scenario": w.scenario,
        "notional": NOTIONAL,
        "digitalMethod": DigitalMethod::BlackAtSmileVol,
        "models": TABLE8_MODELS.iter().map(|(l, m)| json!({ "column": l, "model": m })).collect::<Vec<_>>(),
        "prices": prices,
    }))
}

fn model_independent(w: &mut Writer) -> Result<Value> {
    let mut table = String::from("fixture,scheme,fair_vol\n");
    let mut prices = Vec::new();
    for fixture in ["eurusd-1m-dense", "eurusd-1y-dense"] {
        let q = resolve_fixture(fixture)?.standard_pillars()?;
        for (label, scheme) in [
            ("normal-linear", ModelIndependentScheme::NormalLinear),
            ("probability-flat", ModelIndependentScheme::ProbabilityFlat),
        ] {
            let v = variance_swap_model_independent(&q, scheme)?.fair_vol;
            writeln!(table, "{fixture},{label},{v:.6}").ok();
            prices.push(json!({ "fixture": fixture, "scheme": label, "fairVol": v }));
        }
    }
    w.text(format!("{}-table.csv", w.scenario), &table)?;
    Ok(json!({ "scenario": w.scenario, "prices": prices }))
}
