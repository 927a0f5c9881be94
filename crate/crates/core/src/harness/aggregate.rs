use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Aggregation;
use super::runner::RunRecord;
use crate::{Error, Result};

/// Two-sided 99% standard-normal quantile.
const Z99: f64 = 2.575_829_303_548_901;

/// Per-step statistic across runs with a normal-approximation 99% half-width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateCurve {
    pub label: String,
    pub mode: Aggregation,
    pub steps: Vec<u64>,
    pub stat: Vec<f64>,
    pub half_width: Vec<f64>,
    pub runs: usize,
    pub ci_method: String,
}

impl AggregateCurve {
    /// First step whose statistic is at or below `level`.
    pub fn first_step_below(&self, level: f64) -> Option<u64> {
        self.steps
            .iter()
            .zip(&self.stat)
            .find(|&(_, &v)| v <= level)
            .map(|(&s, _)| s)
    }

    /// Trapezoid area under the statistic.
    pub fn area(&self) -> f64 {
        self.steps
            .windows(2)
            .zip(self.stat.windows(2))
            .map(|(s, v)| (s[1] - s[0]) as f64 * (v[0] + v[1]) / 2.0)
            .sum()
    }

    /// `step,value,half_width,runs`
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["step", "value", "half_width", "runs"])
            .map_err(err)?;
        for ((s, v), h) in self.steps.iter().zip(&self.stat).zip(&self.half_width) {
            w.write_record([
                s.to_string(),
                v.to_string(),
                h.to_string(),
                self.runs.to_string(),
            ])
            .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("ascii output"))
    }

    /// Reads an aggregate CSV; a plain `step,value` run file is accepted as a one-run curve.
    pub fn from_csv(label: &str, text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let err = |e: csv::Error| Error::Parse(e.to_string());
        let wide = r.headers().map_err(err)?.len() >= 4;
        let mut c = Self {
            label: label.to_string(),
            mode: Aggregation::Mean,
            steps: Vec::new(),
            stat: Vec::new(),
            half_width: Vec::new(),
            runs: 1,
            ci_method: ci_method(),
        };
        for row in r.records() {
            let row = row.map_err(err)?;
            let num = |i: usize| {
                row[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{:?}: {e}", &row[i])))
            };
            c.steps.push(
                row[0]
                    .trim()
                    .parse::<u64>()
                    .map_err(|e| Error::Parse(format!("{:?}: {e}", &row[0])))?,
            );
            c.stat.push(num(1)?);
            if wide {
                c.half_width.push(num(2)?);
                c.runs = num(3)? as usize;
            } else {
                c.half_width.push(0.0);
            }
        }
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let label = path.file_name().map_or_else(String::new, |s| {
            s.to_string_lossy()
                .split('.')
                .next()
                .unwrap_or_default()
                .to_string()
        });
        Self::from_csv(&label, &std::fs::read_to_string(path)?)
    }
}

fn ci_method() -> String {
    "normal approximation, 99%".to_string()
}

fn half_width(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    Z99 * (var / n as f64).sqrt()
}

/// Statistic and half-width of one step's values (sorted internally).
pub fn summarize(values: &[f64], mode: Aggregation) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("no values to aggregate".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(match mode {
        Aggregation::Mean => (v.iter().sum::<f64>() / n as f64, half_width(&v)),
        Aggregation::Median => {
            let med = if n % 2 == 1 {
                v[n / 2]
            } else {
                (v[n / 2 - 1] + v[n / 2]) / 2.0
            };
            (med, half_width(&v))
        }
        Aggregation::Topfrac { fraction } => {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "top fraction {fraction} outside (0,1]"
                )));
            }
            let keep = ((fraction * n as f64).ceil() as usize).clamp(1, n);
            let top = &v[n - keep..];
            (top.iter().sum::<f64>() / keep as f64, half_width(top))
        }
    })
}

/// Folds runs with identical step grids into one curve.
pub fn aggregate_series(
    label: &str,
    series: &[&[(u64, f64)]],
    mode: Aggregation,
) -> Result<AggregateCurve> {
    let first = series
        .first()
        .ok_or_else(|| Error::InvalidParameter("no runs to aggregate".into()))?;
    for s in series {
        if s.len() != first.len() || s.iter().zip(first.iter()).any(|(a, b)| a.0 != b.0) {
            return Err(Error::InvalidParameter(
                "runs are logged at different steps".into(),
            ));
        }
    }
    let mut curve = AggregateCurve {
        label: label.to_string(),
        mode,
        steps: first.iter().map(|p| p.0).collect(),
        stat: Vec::with_capacity(first.len()),
        half_width: Vec::with_capacity(first.len()),
        runs: series.len(),
        ci_method: ci_method(),
    };
    let mut column = Vec::with_capacity(series.len());
    for i in 0..first.len() {
        column.clear();
        column.extend(series.iter().map(|s| s[i].1));
        let (stat, hw) = summarize(&column, mode)?;
        curve.stat.push(stat);
        curve.half_width.push(hw);
    }
    Ok(curve)
}

pub fn aggregate(records: &[RunRecord], mode: Aggregation) -> Result<AggregateCurve> {
    let label = records
        .first()
        .map_or_else(String::new, |r| r.config_hash.clone());
    let series: Vec<&[(u64, f64)]> = records.iter().map(|r| r.series.as_slice()).collect();
    aggregate_series(&label, &series, mode)
}
