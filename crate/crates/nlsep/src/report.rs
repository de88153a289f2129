//! Experiment reports and their on-disk forms.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::experiment::ExperimentKind;

/// A named time series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub metric: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(metric: impl Into<String>) -> Self {
        Self {
            metric: metric.into(),
            times: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, v: f64) {
        self.times.push(t);
        self.values.push(v);
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .fold(0.0, |m, v| if v.is_nan() { f64::NAN } else { m.max(*v) })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "relation", rename_all = "snake_case")]
pub enum Bound {
    AtMost { limit: f64 },
    AtLeast { limit: f64 },
    Within { low: f64, high: f64 },
}

impl Bound {
    pub fn holds(&self, value: f64) -> bool {
        match *self {
            Bound::AtMost { limit } => value <= limit,
            Bound::AtLeast { limit } => value >= limit,
            Bound::Within { low, high } => (low..=high).contains(&value),
        }
    }
}

/// One PASS/FAIL decision. `threshold` names the configuration key the bound
/// was derived from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub threshold: String,
    pub passed: bool,
}

impl Verdict {
    pub fn new(
        name: impl Into<String>,
        value: f64,
        bound: Bound,
        threshold: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            value,
            passed: bound.holds(value),
            bound,
            threshold: threshold.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuntimeInfo {
    pub version: String,
    pub started_unix: u64,
    pub wall_seconds: f64,
    pub threads: usize,
    pub runs: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub kind: ExperimentKind,
    pub passed: bool,
    pub verdicts: Vec<Verdict>,
    /// Derived numbers quoted by the verdicts, e.g. the error scale.
    pub scalars: BTreeMap<String, f64>,
    /// Residual and comparison series.
    pub series: Vec<Series>,
    /// Conservation monitors of every run, prefixed by the run label.
    pub monitors: Vec<Series>,
    pub runtime: RuntimeInfo,
    /// TOML of a one-experiment run configuration reproducing this report.
    pub config: String,
}

impl Report {
    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.passed)
    }

    pub fn series(&self, metric: &str) -> Option<&Series> {
        self.series
            .iter()
            .chain(&self.monitors)
            .find(|s| s.metric == metric)
    }
}

/// Writes `t,metric,value` rows; numbers carry 17 significant digits.
pub fn write_series<W: Write>(out: W, series: &[Series]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "metric", "value"])?;
    for s in series {
        for (t, v) in s.times.iter().zip(&s.values) {
            w.write_record([format!("{t:.16e}"), s.metric.clone(), format!("{v:.16e}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_series`], metrics in order of first appearance.
pub fn read_series<R: Read>(input: R) -> csv::Result<Vec<Series>> {
    #[derive(Deserialize)]
    struct Row {
        t: f64,
        metric: String,
        value: f64,
    }
    let mut out: Vec<Series> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for row in csv::Reader::from_reader(input).into_deserialize() {
        let row: Row = row?;
        let k = *index.entry(row.metric.clone()).or_insert_with(|| {
            out.push(Series::new(row.metric.clone()));
            out.len() - 1
        });
        out[k].push(row.t, row.value);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds() {
        assert!(Bound::AtMost { limit: 1.0 }.holds(1.0));
        assert!(!Bound::AtMost { limit: 1.0 }.holds(f64::NAN));
        assert!(Bound::AtLeast { limit: 2.0 }.holds(3.0));
        assert!(Bound::Within {
            low: 12.0,
            high: 20.0
        }
        .holds(16.0));
        assert!(!Bound::Within {
            low: 12.0,
            high: 20.0
        }
        .holds(21.9));
    }

    #[test]
    fn series_round_trip_exactly() {
        let mut a = Series::new("residual");
        for (t, v) in [
            (0.0, 0.0),
            (0.1, 1.0 / 3.0),
            (0.2, -2.5e-300),
            (0.30000000000000004, f64::MAX),
        ] {
            a.push(t, v);
        }
        let mut b = Series::new("odd, \"name\"");
        b.push(1e-3, std::f64::consts::PI);
        let mut buf = Vec::new();
        write_series(&mut buf, &[a.clone(), b.clone()]).unwrap();
        assert!(buf.starts_with(b"t,metric,value\n"));
        assert_eq!(read_series(buf.as_slice()).unwrap(), vec![a, b]);
    }

    #[test]
    fn nan_poisons_max() {
        let mut s = Series::new("x");
        s.push(0.0, 1.0);
        s.push(1.0, f64::NAN);
        assert!(s.max().is_nan());
    }
}
