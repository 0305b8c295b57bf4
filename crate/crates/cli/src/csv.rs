//! Long-format curve tables: one `(x_kind, x, series, value)` row per point.
//!
//! Values are finite or the token `NaN`, which marks points where the smile
//! has no positive variance and plots should leave a gap.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{CliError, Result};

pub const HEADER: &str = "x_kind,x,series,value";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XKind {
    Strike,
    LogMoneyness,
    Delta,
    Iteration,
}

impl XKind {
    pub fn as_str(self) -> &'static str {
        match self {
            XKind::Strike => "strike",
            XKind::LogMoneyness => "log-moneyness",
            XKind::Delta => "delta",
            XKind::Iteration => "iteration",
        }
    }
}

impl FromStr for XKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "strike" => XKind::Strike,
            "log-moneyness" => XKind::LogMoneyness,
            "delta" => XKind::Delta,
            "iteration" => XKind::Iteration,
            other => return Err(format!("unknown x_kind `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub x_kind: XKind,
    pub x: f64,
    pub series: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CurveCsv {
    pub rows: Vec<CurvePoint>,
}

fn check_series(name: &str) -> Result<()> {
    if name.is_empty() || name.contains([',', '\n', '\r', '"']) {
        return Err(CliError::Usage(format!("series name `{name}` is not a plain CSV field")));
    }
    Ok(())
}

impl CurveCsv {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a series. Non-finite values are stored as `NaN`.
    pub fn push_series(&mut self, series: &str, x_kind: XKind, xs: &[f64], values: &[f64]) -> Result<()> {
        check_series(series)?;
        if xs.len() != values.len() {
            return Err(CliError::Usage(format!(
                "series `{series}` has {} abscissae and {} values",
                xs.len(),
                values.len()
            )));
        }
        for (x, v) in xs.iter().zip(values) {
            if !x.is_finite() {
                return Err(CliError::Usage(format!("series `{series}` has abscissa {x}")));
            }
            self.rows.push(CurvePoint {
                x_kind,
                x: *x,
                series: series.to_string(),
                value: if v.is_finite() { *v } else { f64::NAN },
            });
        }
        Ok(())
    }

    pub fn series_names(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.series.as_str()) {
                out.push(&r.series);
            }
        }
        out
    }

    pub fn series(&self, name: &str) -> Vec<&CurvePoint> {
        self.rows.iter().filter(|r| r.series == name).collect()
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::with_capacity(32 * (self.rows.len() + 1));
        s.push_str(HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.x_kind.as_str(), r.x, r.series, r.value);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim_end() == HEADER => {}
            _ => {
                return Err(CliError::Csv {
                    line: 1,
                    message: format!("expected header `{HEADER}`"),
                })
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            let err = |message: String| CliError::Csv {
                line: line_no,
                message,
            };
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(err(format!("expected 4 fields, got {}", fields.len())));
            }
            let x_kind = fields[0].parse::<XKind>().map_err(err)?;
            let number = |f: &str, what: &str| -> Result<f64> {
                let v: f64 = f
                    .parse()
                    .map_err(|_| err(format!("{what} `{f}` is not a number")))?;
                if v.is_infinite() {
                    return Err(err(format!("{what} is infinite")));
                }
                Ok(v)
            };
            let x = number(fields[1], "x")?;
            if x.is_nan() {
                return Err(err("x is NaN".to_string()));
            }
            let value = number(fields[3], "value")?;
            check_series(fields[2]).map_err(|e| err(e.to_string()))?;
            rows.push(CurvePoint {
                x_kind,
                x,
                series: fields[2].to_string(),
                value,
            });
        }
        Ok(Self { rows })
    }
}
