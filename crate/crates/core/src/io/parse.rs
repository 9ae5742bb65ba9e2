use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::error::{GmcError, Result};
use crate::regression::{Hierarchy, RegressionDataset, Source};
use crate::survival::SurvivalDataset;

const REGRESSION_BASE: [&str; 3] = ["y", "t", "source"];
const REGRESSION_HIER: [&str; 6] = ["y", "t", "source", "individual", "region", "tissue"];
const SURVIVAL_BASE: [&str; 3] = ["time_days", "event", "source"];
const SURVIVAL_ARMS: [&str; 5] = ["time_days", "event", "source", "z_F", "z_I"];

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn header<R: Read>(rdr: &mut csv::Reader<R>) -> Result<Vec<String>> {
    let h = rdr.headers().map_err(|e| csv_error(e, 1))?;
    Ok(h.iter().map(str::to_string).collect())
}

fn csv_error(e: csv::Error, fallback_line: usize) -> GmcError {
    let line = e
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(fallback_line);
    GmcError::ParseError {
        line,
        column: String::new(),
        reason: e.to_string(),
    }
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, name: &str, line: usize) -> Result<T> {
    let raw = rec.get(idx).unwrap_or("");
    raw.parse().map_err(|_| GmcError::ParseError {
        line,
        column: name.into(),
        reason: format!("cannot parse `{raw}`"),
    })
}

fn finite(v: f64, name: &str, line: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(GmcError::ParseError {
            line,
            column: name.into(),
            reason: format!("non-finite value {v}"),
        })
    }
}

fn source(rec: &csv::StringRecord, idx: usize, line: usize) -> Result<Source> {
    let raw = rec.get(idx).unwrap_or("");
    raw.parse().map_err(|_| GmcError::ParseError {
        line,
        column: "source".into(),
        reason: format!("expected primary or supplemental, got `{raw}`"),
    })
}

fn header_error(found: &[String], wanted: &str) -> GmcError {
    GmcError::ParseError {
        line: 1,
        column: String::new(),
        reason: format!("header must be {wanted}, found `{}`", found.join(",")),
    }
}

/// Reads `y,t,source[,individual,region,tissue]`. With `rescale`, raw `t`
/// values are mapped linearly onto `[0, 1]`; otherwise any `t` outside
/// `[0, 1]` is a range error.
pub fn parse_regression_reader<R: Read>(input: R, rescale: bool) -> Result<RegressionDataset> {
    let mut rdr = reader(input);
    let cols = header(&mut rdr)?;
    let hier = if cols == REGRESSION_BASE {
        false
    } else if cols == REGRESSION_HIER {
        true
    } else {
        return Err(header_error(&cols, "y,t,source[,individual,region,tissue]"));
    };
    let (mut y, mut t, mut src) = (Vec::new(), Vec::new(), Vec::new());
    let (mut ind, mut reg, mut tis) = (Vec::new(), Vec::new(), Vec::new());
    let mut lines = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(e, row + 2))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(row + 2);
        y.push(finite(field(&rec, 0, "y", line)?, "y", line)?);
        let tv = finite(field(&rec, 1, "t", line)?, "t", line)?;
        if !rescale && !(0.0..=1.0).contains(&tv) {
            return Err(GmcError::RangeError {
                line,
                reason: format!("t = {tv} outside [0, 1]; pass --rescale for raw times"),
            });
        }
        t.push(tv);
        src.push(source(&rec, 2, line)?);
        if hier {
            ind.push(field(&rec, 3, "individual", line)?);
            reg.push(field(&rec, 4, "region", line)?);
            let raw = rec.get(5).unwrap_or("");
            tis.push(raw.parse().map_err(|_| GmcError::ParseError {
                line,
                column: "tissue".into(),
                reason: format!("expected cancerous or noncancerous, got `{raw}`"),
            })?);
        }
        lines.push(line);
    }
    if y.is_empty() {
        return Err(GmcError::InvalidData("no data rows".into()));
    }
    if rescale {
        let lo = t.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return Err(GmcError::RangeError {
                line: lines[0],
                reason: "cannot rescale t: all values are equal".into(),
            });
        }
        for v in &mut t {
            *v = ((*v - lo) / (hi - lo)).clamp(0.0, 1.0);
        }
    }
    let hierarchy = hier.then(|| Hierarchy {
        individual: ind,
        region: reg,
        tissue: tis,
    });
    RegressionDataset::new(y, t, src, hierarchy)
}

pub fn parse_regression_csv(path: &Path, rescale: bool) -> Result<RegressionDataset> {
    parse_regression_reader(File::open(path)?, rescale)
}

/// Reads `time_days,event,source[,z_F,z_I]`, censors administratively at
/// `horizon` days and rescales time onto `(0, 1]`.
pub fn parse_survival_reader<R: Read>(input: R, horizon: f64) -> Result<SurvivalDataset> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(GmcError::InvalidConfig(format!("horizon must be positive, got {horizon}")));
    }
    let mut rdr = reader(input);
    let cols = header(&mut rdr)?;
    let arms = if cols == SURVIVAL_BASE {
        false
    } else if cols == SURVIVAL_ARMS {
        true
    } else {
        return Err(header_error(&cols, "time_days,event,source[,z_F,z_I]"));
    };
    let (mut time, mut event, mut z, mut src) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(e, row + 2))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(row + 2);
        let days = finite(field(&rec, 0, "time_days", line)?, "time_days", line)?;
        if !(days > 0.0) {
            return Err(GmcError::NegativeTime { line, time: days });
        }
        let ev = match rec.get(1).unwrap_or("") {
            "0" => false,
            "1" => true,
            raw => {
                return Err(GmcError::ParseError {
                    line,
                    column: "event".into(),
                    reason: format!("expected 0 or 1, got `{raw}`"),
                })
            }
        };
        let s = source(&rec, 2, line)?;
        let mut zi = Vec::new();
        if arms {
            for (idx, name) in [(3, "z_F"), (4, "z_I")] {
                let v = match rec.get(idx).unwrap_or("") {
                    "0" => false,
                    "1" => true,
                    raw => {
                        return Err(GmcError::ParseError {
                            line,
                            column: name.into(),
                            reason: format!("expected 0 or 1, got `{raw}`"),
                        })
                    }
                };
                zi.push(v);
            }
            if s == Source::Supplemental && zi.iter().any(|&v| v) {
                return Err(GmcError::ParseError {
                    line,
                    column: "z_F".into(),
                    reason: "supplemental rows must have zero treatment indicators".into(),
                });
            }
        }
        let (t, e) = if days > horizon { (1.0, false) } else { (days / horizon, ev) };
        time.push(t);
        event.push(e);
        z.push(zi);
        src.push(s);
    }
    if time.is_empty() {
        return Err(GmcError::InvalidData("no data rows".into()));
    }
    let treatments = if arms {
        vec!["z_F".to_string(), "z_I".to_string()]
    } else {
        Vec::new()
    };
    SurvivalDataset::new(time, event, treatments, z, src)
}

pub fn parse_survival_csv(path: &Path, horizon: f64) -> Result<SurvivalDataset> {
    parse_survival_reader(File::open(path)?, horizon)
}
