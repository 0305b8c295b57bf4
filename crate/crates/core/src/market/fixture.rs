//! JSON fixture files: one maturity per file, vols in percent.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;

use crate::error::{Error, Result};

use super::{DeltaConvention, MarketInputs, PillarKind, PillarQuote, SmileQuoteSet};

/// Environment variable naming a directory searched before the built-ins.
pub const FIXTURE_DIR_ENV: &str = "FXSMILE_FIXTURE_DIR";

const BUILTIN: &[(&str, &str)] = &[
    ("audnzd-7d", include_str!("../../fixtures/audnzd-7d.json")),
    ("eurczk-32d", include_str!("../../fixtures/eurczk-32d.json")),
    ("usdaed-1m", include_str!("../../fixtures/usdaed-1m.json")),
    ("usdaed-9m", include_str!("../../fixtures/usdaed-9m.json")),
    ("usdaed-1y", include_str!("../../fixtures/usdaed-1y.json")),
    ("eurtry-6m", include_str!("../../fixtures/eurtry-6m.json")),
    ("eurtry-1y", include_str!("../../fixtures/eurtry-1y.json")),
    ("manufactured-1y", include_str!("../../fixtures/manufactured-1y.json")),
    ("eurusd-1m-dense", include_str!("../../fixtures/eurusd-1m-dense.json")),
    ("eurusd-1y-dense", include_str!("../../fixtures/eurusd-1y-dense.json")),
];

pub fn builtin_fixture_names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(n, _)| *n)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFixture {
    name: Option<String>,
    #[allow(dead_code)]
    description: Option<String>,
    valuation: Option<NaiveDate>,
    expiry: Option<NaiveDate>,
    #[serde(rename = "T")]
    time_to_expiry: Option<f64>,
    forward: f64,
    spot: f64,
    #[serde(rename = "discountDomestic")]
    discount_domestic: f64,
    #[serde(rename = "discountForeign")]
    discount_foreign: f64,
    convention: DeltaConvention,
    pillars: Vec<RawPillar>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPillar {
    kind: String,
    delta: Option<f64>,
    vol: f64,
}

/// Load a fixture by built-in name, by name inside `$FXSMILE_FIXTURE_DIR`,
/// or by path.
pub fn load_fixture(name_or_path: &str) -> Result<SmileQuoteSet> {
    if let Ok(dir) = std::env::var(FIXTURE_DIR_ENV) {
        let candidate = PathBuf::from(dir).join(format!("{name_or_path}.json"));
        if candidate.is_file() {
            return load_path(&candidate);
        }
    }
    if let Some((_, text)) = BUILTIN.iter().find(|(n, _)| *n == name_or_path) {
        return parse_fixture(text);
    }
    let path = Path::new(name_or_path);
    if path.is_file() {
        return load_path(path);
    }
    Err(Error::UnknownFixture(name_or_path.to_string()))
}

fn load_path(path: &Path) -> Result<SmileQuoteSet> {
    let text = std::fs::read_to_string(path)?;
    parse_fixture(&text)
}

/// Parse fixture JSON text.
pub fn parse_fixture(text: &str) -> Result<SmileQuoteSet> {
    let raw: RawFixture = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        field: field_from_message(&e.to_string()),
        message: e.to_string(),
    })?;

    let expiry = match (raw.time_to_expiry, raw.valuation, raw.expiry) {
        (Some(t), _, _) => t,
        (None, Some(v), Some(e)) => (e - v).num_days() as f64 / 365.0,
        _ => {
            return Err(Error::Parse {
                line: 1,
                field: "T".into(),
                message: "either `T` or both `valuation` and `expiry` are required".into(),
            })
        }
    };
    let inputs = MarketInputs {
        expiry,
        forward: raw.forward,
        spot: raw.spot,
        domestic_discount: raw.discount_domestic,
        foreign_discount: raw.discount_foreign,
        convention: raw.convention,
    };

    let mut pillars = Vec::with_capacity(raw.pillars.len());
    for (i, p) in raw.pillars.iter().enumerate() {
        let line = nth_line_of(text, "\"vol\"", i);
        let kind = match (p.kind.as_str(), p.delta) {
            ("atm", _) => PillarKind::Atm,
            ("put", Some(d)) => PillarKind::put(d),
            ("call", Some(d)) => PillarKind::call(d),
            ("put" | "call", None) => {
                return Err(Error::Parse {
                    line,
                    field: format!("pillars[{i}].delta"),
                    message: "delta pillar without a delta".into(),
                })
            }
            (other, _) => {
                return Err(Error::Parse {
                    line,
                    field: format!("pillars[{i}].kind"),
                    message: format!("unknown pillar kind `{other}`"),
                })
            }
        };
        let quote = PillarQuote::new(kind, p.vol / 100.0).map_err(|e| Error::Parse {
            line,
            field: format!("pillars[{i}]"),
            message: e.to_string(),
        })?;
        pillars.push(quote);
    }

    let mut set = SmileQuoteSet::new(inputs, pillars).map_err(|e| match e {
        Error::Domain { what, value } => Error::Parse {
            line: 1,
            field: what.to_string(),
            message: format!("invalid value {value}"),
        },
        other => other,
    })?;
    if let Some(name) = raw.name {
        set = set.with_name(name);
    }
    if let (Some(v), Some(e)) = (raw.valuation, raw.expiry) {
        set = set.with_dates(v, e);
    }
    Ok(set)
}

fn field_from_message(msg: &str) -> String {
    msg.split('`').nth(1).unwrap_or("").to_string()
}

fn nth_line_of(text: &str, needle: &str, n: usize) -> usize {
    text.lines()
        .enumerate()
        .filter(|(_, l)| l.contains(needle))
        .nth(n)
        .map_or(1, |(i, _)| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn audnzd() {
        let q = load_fixture("audnzd-7d").unwrap();
        assert_abs_diff_eq!(q.forward(), 1.07845, epsilon = 0.0);
        assert_abs_diff_eq!(q.expiry(), 7.0 / 365.0, epsilon = 1e-16);
        let v: Vec<f64> = q.vols().iter().map(|v| v * 100.0).collect();
        for (a, b) in v.iter().zip([6.14, 5.19, 5.14, 5.59, 6.49]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn manufactured() {
        let q = load_fixture("manufactured-1y").unwrap();
        assert_eq!(q.spot(), 1.0);
        assert_eq!(q.domestic_discount(), 1.0);
        assert_eq!(q.foreign_discount(), 1.0);
        let v: Vec<f64> = q.vols().iter().map(|v| v * 100.0).collect();
        for (a, b) in v.iter().zip([26.0, 26.0, 19.5, 12.7, 12.7]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn eurusd_dense() {
        let q = load_fixture("eurusd-1m-dense").unwrap();
        assert_eq!(q.pillars().len(), 19);
        assert_abs_diff_eq!(q.vols()[0], 0.1404, epsilon = 1e-15);
        assert_abs_diff_eq!(q.vols()[18], 0.1111, epsilon = 1e-15);
        assert_eq!(q.pillars()[0].kind, PillarKind::put(0.01));
        assert_eq!(q.pillars()[18].kind, PillarKind::call(0.01));
        let five = q.standard_pillars().unwrap();
        assert_eq!(five.pillars().len(), 5);
    }

    #[test]
    fn all_builtins_have_increasing_strikes_in_quote_order() {
        for name in builtin_fixture_names() {
            let q = load_fixture(name).unwrap();
            let text = BUILTIN.iter().find(|(n, _)| *n == name).unwrap().1;
            let raw: RawFixture = serde_json::from_str(text).unwrap();
            // put wing first, call wing last, nothing reordered
            let kinds: Vec<&str> = raw.pillars.iter().map(|p| p.kind.as_str()).collect();
            assert_eq!(kinds.first(), Some(&"put"), "{name}");
            assert_eq!(kinds.last(), Some(&"call"), "{name}");
            for (i, p) in raw.pillars.iter().enumerate() {
                assert_abs_diff_eq!(q.vols()[i], p.vol / 100.0, epsilon = 1e-15);
            }
            assert!(q.strikes().windows(2).all(|w| w[1] > w[0]), "{name}");
        }
    }

    #[test]
    fn parse_errors_carry_location() {
        let text = "{\n  \"forward\": 1.0,\n  \"spot\": \"x\"\n}";
        match parse_fixture(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = include_str!("../../fixtures/audnzd-7d.json").replacen("6.14", "-6.14", 1);
        match parse_fixture(&text) {
            Err(Error::Parse { line, field, .. }) => {
                assert_eq!(field, "pillars[0]");
                assert!(text.lines().nth(line - 1).unwrap().contains("-6.14"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            load_fixture("no-such-fixture"),
            Err(Error::UnknownFixture(_))
        ));
    }
}
