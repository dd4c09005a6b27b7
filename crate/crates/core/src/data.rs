//! Longitudinal panel data: ingestion, validation and the empirical summaries
//! that the default priors are built from.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PgmmError, Result};

/// Measurement times and outcomes for one subject, sorted by time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectSeries {
    pub id: String,
    pub times: Vec<f64>,
    pub outcomes: Vec<f64>,
}

impl SubjectSeries {
    pub fn new(id: impl Into<String>, times: Vec<f64>, outcomes: Vec<f64>) -> Result<Self> {
        let s = SubjectSeries {
            id: id.into(),
            times,
            outcomes,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.times.len() != self.outcomes.len() {
            return Err(PgmmError::validation(format!(
                "subject {}: {} times but {} outcomes",
                self.id,
                self.times.len(),
                self.outcomes.len()
            )));
        }
        if self.times.is_empty() {
            return Err(PgmmError::validation(format!(
                "subject {} has no observations",
                self.id
            )));
        }
        if let Some(v) = self
            .times
            .iter()
            .chain(self.outcomes.iter())
            .find(|v| !v.is_finite())
        {
            return Err(PgmmError::validation(format!(
                "subject {}: non-finite value {v}",
                self.id
            )));
        }
        for w in self.times.windows(2) {
            if w[1] == w[0] {
                return Err(PgmmError::validation(format!(
                    "subject {}: duplicate time {}",
                    self.id, w[0]
                )));
            }
            if w[1] < w[0] {
                return Err(PgmmError::validation(format!(
                    "subject {}: times not increasing",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// A ragged longitudinal panel.
///
/// `time_shift` records how much has been subtracted from the original time
/// axis by [`shift_time_origin`], so reported changepoint locations can be
/// mapped back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub subjects: Vec<SubjectSeries>,
    #[serde(default)]
    pub time_shift: f64,
}

impl Dataset {
    pub fn new(subjects: Vec<SubjectSeries>) -> Result<Self> {
        if subjects.is_empty() {
            return Err(PgmmError::validation("dataset has no subjects"));
        }
        for s in &subjects {
            s.validate()?;
        }
        Ok(Dataset {
            subjects,
            time_shift: 0.0,
        })
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn n_observations(&self) -> usize {
        self.subjects.iter().map(|s| s.len()).sum()
    }

    pub fn min_time(&self) -> f64 {
        self.subjects
            .iter()
            .flat_map(|s| s.times.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_time(&self) -> f64 {
        self.subjects
            .iter()
            .flat_map(|s| s.times.iter().copied())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Keep only the subjects at the given positions (in the given order).
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let subjects = indices
            .iter()
            .map(|&i| {
                self.subjects.get(i).cloned().ok_or_else(|| {
                    PgmmError::validation(format!("subject index {i} out of range"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut d = Dataset::new(subjects)?;
        d.time_shift = self.time_shift;
        Ok(d)
    }
}

/// Empirical hyperparameter inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalStats {
    pub mean_y_first: f64,
    pub var_y_first: f64,
    pub sd_y_first: f64,
    pub sd_x: f64,
    pub sd_y: f64,
    pub slope_scale: f64,
    pub cp_lower: f64,
    pub cp_upper: f64,
    pub cp_sd_bound: f64,
    pub min_x: f64,
    pub max_x: f64,
}

/// Read a long-format CSV with header `subject,time,value`.
///
/// Rows with an empty `value` are treated as missing and dropped.
pub fn load_long_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let mut text = String::new();
    File::open(path.as_ref())?.read_to_string(&mut text)?;
    parse_long_csv(&text)
}

pub fn parse_long_csv(text: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers = reader.headers()?.clone();
    let expected = ["subject", "time", "value"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
            return Err(PgmmError::validation("empty file"));
        }
        return Err(PgmmError::Parse {
            line: 1,
            message: format!("expected header `subject,time,value`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(f64, f64)>> = HashMap::new();
    let mut n_rows = 0usize;
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| PgmmError::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.len() != 3 {
            return Err(PgmmError::Parse {
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        n_rows += 1;
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(PgmmError::Parse {
                line,
                message: "empty subject id".into(),
            });
        }
        let time: f64 = record[1].parse().map_err(|_| PgmmError::Parse {
            line,
            message: format!("invalid time `{}`", &record[1]),
        })?;
        if record[2].is_empty() {
            continue;
        }
        let value: f64 = record[2].parse().map_err(|_| PgmmError::Parse {
            line,
            message: format!("invalid value `{}`", &record[2]),
        })?;
        if !time.is_finite() || !value.is_finite() {
            return Err(PgmmError::Parse {
                line,
                message: "non-finite time or value".into(),
            });
        }
        rows.entry(id.clone())
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push((time, value));
    }
    if n_rows == 0 || order.is_empty() {
        return Err(PgmmError::validation("no observations in file"));
    }

    let subjects = order
        .into_iter()
        .map(|id| {
            let mut pts = rows.remove(&id).unwrap_or_default();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (times, outcomes): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            SubjectSeries::new(id, times, outcomes)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(subjects)
}

/// Write the dataset in the same long format it is read from.
pub fn write_long_csv(d: &Dataset, mut out: impl Write) -> Result<()> {
    writeln!(out, "subject,time,value")?;
    for s in &d.subjects {
        for (t, y) in s.times.iter().zip(&s.outcomes) {
            writeln!(out, "{},{},{}", s.id, t, y)?;
        }
    }
    Ok(())
}

pub fn save_long_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_long_csv(d, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Shift the time axis so the earliest measured time is zero.
pub fn shift_time_origin(d: &Dataset) -> Dataset {
    let min = d.min_time();
    let mut out = d.clone();
    if min != 0.0 {
        for s in &mut out.subjects {
            for t in &mut s.times {
                *t -= min;
            }
        }
        out.time_shift += min;
    }
    out
}

fn sample_mean_var(values: &mut [f64]) -> (f64, f64) {
    // sorted summation keeps the result independent of input order
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    dev.sort_by(|a, b| a.total_cmp(b));
    let var = if values.len() > 1 {
        dev.iter().sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

pub fn empirical_stats(d: &Dataset) -> Result<EmpiricalStats> {
    if d.n_subjects() < 2 {
        return Err(PgmmError::validation(
            "at least two subjects are required for empirical variances",
        ));
    }
    let mut first: Vec<f64> = d.subjects.iter().map(|s| s.outcomes[0]).collect();
    let (mean_y_first, var_y_first) = sample_mean_var(&mut first);

    let mut xs: Vec<f64> = d.subjects.iter().flat_map(|s| s.times.iter().copied()).collect();
    let mut ys: Vec<f64> = d
        .subjects
        .iter()
        .flat_map(|s| s.outcomes.iter().copied())
        .collect();
    let (_, var_x) = sample_mean_var(&mut xs);
    let (_, var_y) = sample_mean_var(&mut ys);

    let mut distinct = xs.clone();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(PgmmError::validation(
            "fewer than 3 distinct time points; changepoint bounds undefined",
        ));
    }
    let sd_x = var_x.sqrt();
    if sd_x <= 0.0 {
        return Err(PgmmError::validation("time points have zero spread"));
    }
    let sd_y = var_y.sqrt();
    let min_x = distinct[0];
    let max_x = distinct[distinct.len() - 1];
    Ok(EmpiricalStats {
        mean_y_first,
        var_y_first,
        sd_y_first: var_y_first.sqrt(),
        sd_x,
        sd_y,
        slope_scale: sd_y / sd_x,
        cp_lower: distinct[1],
        cp_upper: distinct[distinct.len() - 2],
        cp_sd_bound: (max_x - min_x) / 4.0,
        min_x,
        max_x,
    })
}
