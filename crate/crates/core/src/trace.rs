//! Time-stamped vector signals produced by simulation and read by the STL monitor.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace has no samples")]
    Empty,
    #[error("row {row}: expected {expected} values, found {found}")]
    Width { row: usize, expected: usize, found: usize },
    #[error("times must be nondecreasing (row {0})")]
    Unordered(usize),
    #[error("non-finite value for `{name}` at t = {time}")]
    NonFinite { name: String, time: f64 },
    #[error("no signal named `{0}`")]
    NoSignal(String),
    #[error("first column must be `time`")]
    Header,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: f64,
    pub label: String,
}

/// Samples of named signals; `values[k]` holds every signal at `times[k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub names: Vec<String>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    #[serde(default)]
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new(names: Vec<String>) -> Trace {
        Trace {
            names,
            times: Vec::new(),
            values: Vec::new(),
            events: Vec::new(),
        }
    }

    /// Builds a trace and checks its shape.
    pub fn from_rows(names: Vec<String>, times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Trace, TraceError> {
        let t = Trace {
            names,
            times,
            values,
            events: Vec::new(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        if self.times.is_empty() {
            return Err(TraceError::Empty);
        }
        for (k, row) in self.values.iter().enumerate() {
            if row.len() != self.names.len() {
                return Err(TraceError::Width {
                    row: k,
                    expected: self.names.len(),
                    found: row.len(),
                });
            }
            if k > 0 && self.times[k] < self.times[k - 1] {
                return Err(TraceError::Unordered(k));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(TraceError::NonFinite {
                    name: self.names[j].clone(),
                    time: self.times[k],
                });
            }
        }
        if self.values.len() != self.times.len() {
            return Err(TraceError::Width {
                row: self.values.len(),
                expected: self.times.len(),
                found: self.values.len(),
            });
        }
        Ok(())
    }

    pub fn push(&mut self, t: f64, row: Vec<f64>) {
        self.times.push(t);
        self.values.push(row);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("empty trace")
    }

    pub fn signal_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// One signal as a column.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[j]).collect()
    }

    pub fn last(&self) -> &[f64] {
        self.values.last().expect("empty trace")
    }

    /// Linear interpolation of signal `j` at time `t` (clamped to the trace span).
    pub fn interpolate(&self, j: usize, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return self.values[0][j];
        }
        if k == self.times.len() {
            return self.values[k - 1][j];
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let (v0, v1) = (self.values[k - 1][j], self.values[k][j]);
        if t1 == t0 {
            v1
        } else {
            v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        }
    }

    /// Drops samples whose time equals the previous one, keeping the later value.
    pub fn dedup(&mut self) {
        let mut times = Vec::with_capacity(self.times.len());
        let mut values: Vec<Vec<f64>> = Vec::with_capacity(self.values.len());
        for (t, row) in self.times.drain(..).zip(self.values.drain(..)) {
            if times.last() == Some(&t) {
                *values.last_mut().unwrap() = row;
            } else {
                times.push(t);
                values.push(row);
            }
        }
        self.times = times;
        self.values = values;
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), TraceError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["time".to_string()];
        header.extend(self.names.iter().cloned());
        out.write_record(&header)?;
        for (t, row) in self.times.iter().zip(&self.values) {
            let mut rec = vec![format!("{t:e}")];
            rec.extend(row.iter().map(|v| format!("{v:e}")));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Trace, TraceError> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header = rd.headers()?.clone();
        let mut cols = header.iter();
        if cols.next() != Some("time") {
            return Err(TraceError::Header);
        }
        let names: Vec<String> = cols.map(str::to_string).collect();
        let mut trace = Trace::new(names);
        for rec in rd.deserialize::<Vec<f64>>() {
            let mut rec = rec?;
            if rec.len() != trace.names.len() + 1 {
                return Err(TraceError::Width {
                    row: trace.len(),
                    expected: trace.names.len() + 1,
                    found: rec.len(),
                });
            }
            let t = rec.remove(0);
            trace.push(t, rec);
        }
        trace.validate()?;
        Ok(trace)
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<(), TraceError> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Trace, TraceError> {
        let t: Trace = serde_json::from_reader(r)?;
        t.validate()?;
        Ok(t)
    }
}
