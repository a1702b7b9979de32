//! Discrete-time multi-signal traces.
//!
//! A [`Trace`] is a strictly increasing sequence of time stamps together with
//! any number of named real-valued signals sampled at exactly those stamps.
//! Traces are immutable once built; all semantics in this crate evaluate over
//! them without interpolation.

use std::io::{Read, Write};
use std::ops::Range;

use indexmap::IndexMap;
use thiserror::Error;

/// Relative slack used when comparing a window bound against a time stamp.
///
/// Window bounds are computed as `times[k] + a`, which for decimal step sizes
/// rarely lands exactly on a stored stamp.
const WINDOW_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace must contain at least one time stamp")]
    Empty,
    #[error("time stamps must be strictly increasing (index {index}: {prev} -> {next})")]
    NotIncreasing { index: usize, prev: f64, next: f64 },
    #[error("time stamp at index {0} is not finite")]
    NonFiniteTime(usize),
    #[error("signal `{name}` has {got} samples, expected {expected}")]
    LengthMismatch {
        name: String,
        got: usize,
        expected: usize,
    },
    #[error("duplicate signal `{0}`")]
    DuplicateSignal(String),
    #[error("unknown signal `{0}`")]
    UnknownSignal(String),
    #[error("sample index {index} out of range for trace of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("CSV header must start with `time`")]
    MissingTimeColumn,
    #[error("CSV row {row}: {message}")]
    Row { row: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Time-stamped record of named signals.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    times: Vec<f64>,
    signals: IndexMap<String, Vec<f64>>,
}

/// Per-sample step durations of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct StepWidths(Vec<f64>);

impl StepWidths {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Trace {
    /// Creates a trace with the given time stamps and no signals.
    pub fn new(times: Vec<f64>) -> Result<Self, TraceError> {
        if times.is_empty() {
            return Err(TraceError::Empty);
        }
        for (i, t) in times.iter().enumerate() {
            if !t.is_finite() {
                return Err(TraceError::NonFiniteTime(i));
            }
        }
        for i in 1..times.len() {
            if times[i] <= times[i - 1] {
                return Err(TraceError::NotIncreasing {
                    index: i,
                    prev: times[i - 1],
                    next: times[i],
                });
            }
        }
        Ok(Self {
            times,
            signals: IndexMap::new(),
        })
    }

    /// Uniform grid `0, dt, 2dt, ...` with `len` samples.
    pub fn uniform(len: usize, dt: f64) -> Result<Self, TraceError> {
        Self::new((0..len).map(|i| i as f64 * dt).collect())
    }

    pub fn with_signal(
        mut self,
        name: impl Into<String>,
        values: Vec<f64>,
    ) -> Result<Self, TraceError> {
        self.insert_signal(name, values)?;
        Ok(self)
    }

    pub fn insert_signal(
        &mut self,
        name: impl Into<String>,
        values: Vec<f64>,
    ) -> Result<(), TraceError> {
        let name = name.into();
        if values.len() != self.times.len() {
            return Err(TraceError::LengthMismatch {
                name,
                got: values.len(),
                expected: self.times.len(),
            });
        }
        if self.signals.contains_key(&name) {
            return Err(TraceError::DuplicateSignal(name));
        }
        self.signals.insert(name, values);
        Ok(())
    }

    /// Overwrites the samples of an existing signal.
    pub fn replace_signal(&mut self, name: &str, values: Vec<f64>) -> Result<(), TraceError> {
        if values.len() != self.times.len() {
            return Err(TraceError::LengthMismatch {
                name: name.to_string(),
                got: values.len(),
                expected: self.times.len(),
            });
        }
        match self.signals.get_mut(name) {
            Some(slot) => {
                *slot = values;
                Ok(())
            }
            None => Err(TraceError::UnknownSignal(name.to_string())),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// Always false: traces hold at least one sample.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Elapsed time between the first and last stamp.
    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    pub fn signal_names(&self) -> impl Iterator<Item = &str> {
        self.signals.keys().map(String::as_str)
    }

    pub fn has_signal(&self, name: &str) -> bool {
        self.signals.contains_key(name)
    }

    pub fn signal(&self, name: &str) -> Result<&[f64], TraceError> {
        self.signals
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| TraceError::UnknownSignal(name.to_string()))
    }

    /// Stored value of `name` at sample `k`.
    pub fn sample_at(&self, name: &str, k: usize) -> Result<f64, TraceError> {
        let values = self.signal(name)?;
        values.get(k).copied().ok_or(TraceError::IndexOutOfRange {
            index: k,
            len: values.len(),
        })
    }

    /// Left step widths; the final sample reuses the previous width and a
    /// single-sample trace gets width 1.
    pub fn step_widths(&self) -> StepWidths {
        let n = self.times.len();
        if n == 1 {
            return StepWidths(vec![1.0]);
        }
        let mut widths: Vec<f64> = self.times.windows(2).map(|w| w[1] - w[0]).collect();
        widths.push(widths[n - 2]);
        StepWidths(widths)
    }

    /// Indices `j` with `times[k] + a <= times[j] <= times[k] + b`.
    ///
    /// The range is empty when the window lies past the end of the trace.
    pub fn window_indices(&self, k: usize, a: f64, b: f64) -> Range<usize> {
        let t = self.times[k];
        let slack = WINDOW_EPS * (1.0 + t.abs().max(b.abs()));
        let lo = t + a - slack;
        let hi = t + b + slack;
        let start = self.times.partition_point(|&x| x < lo);
        let end = self.times.partition_point(|&x| x <= hi);
        start..end.max(start)
    }

    /// Index of the first sample at or after `times[k] + offset`, clamped to
    /// the last sample.
    pub fn index_after(&self, k: usize, offset: f64) -> usize {
        let t = self.times[k] + offset;
        let slack = WINDOW_EPS * (1.0 + t.abs());
        let j = self.times.partition_point(|&x| x < t - slack);
        j.min(self.times.len() - 1)
    }

    /// Subdivides every step into `factor` equal sub-steps holding the left
    /// sample value. The final sample's implicit step (see [`step_widths`])
    /// is subdivided as well, so both traces describe the same step function
    /// and the result ends `(factor - 1) / factor` of a step later.
    ///
    /// [`step_widths`]: Trace::step_widths
    pub fn resample_piecewise_constant(&self, factor: usize) -> Trace {
        assert!(factor >= 1, "resampling factor must be at least 1");
        if factor == 1 {
            return self.clone();
        }
        let n = self.times.len();
        let widths = self.step_widths();
        let mut times = Vec::with_capacity(n * factor);
        let mut source = Vec::with_capacity(times.capacity());
        for k in 0..n {
            let (t0, w) = (self.times[k], widths.get(k));
            for s in 0..factor {
                times.push(t0 + w * s as f64 / factor as f64);
                source.push(k);
            }
        }
        let signals = self
            .signals
            .iter()
            .map(|(name, values)| (name.clone(), source.iter().map(|&k| values[k]).collect()))
            .collect();
        Trace { times, signals }
    }

    /// Reads `time,<sig1>,<sig2>,...` CSV.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, TraceError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("time") {
            return Err(TraceError::MissingTimeColumn);
        }
        let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut times = Vec::new();
        let mut columns = vec![Vec::new(); names.len()];
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let row = i + 1;
            if record.len() != names.len() + 1 {
                return Err(TraceError::Row {
                    row,
                    message: format!("expected {} fields, got {}", names.len() + 1, record.len()),
                });
            }
            for (c, field) in record.iter().enumerate() {
                let value: f64 = field.parse().map_err(|_| TraceError::Row {
                    row,
                    message: format!("cannot parse `{field}` as a number"),
                })?;
                if c == 0 {
                    times.push(value);
                } else {
                    columns[c - 1].push(value);
                }
            }
        }
        let mut trace = Trace::new(times)?;
        for (name, values) in names.into_iter().zip(columns) {
            trace.insert_signal(name, values)?;
        }
        Ok(trace)
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<(), TraceError> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string()];
        header.extend(self.signals.keys().cloned());
        wtr.write_record(&header)?;
        for k in 0..self.times.len() {
            let mut row = vec![self.times[k].to_string()];
            row.extend(self.signals.values().map(|v| v[k].to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Copy of this trace with the signals of `other` appended.
    ///
    /// Both traces must share time stamps; signals already present are kept.
    pub fn merged(&self, other: &Trace) -> Result<Trace, TraceError> {
        if other.len() != self.len() {
            return Err(TraceError::LengthMismatch {
                name: "<time>".into(),
                got: other.len(),
                expected: self.len(),
            });
        }
        let mut out = self.clone();
        for (name, values) in &other.signals {
            if !out.signals.contains_key(name) {
                out.signals.insert(name.clone(), values.clone());
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tv() -> Trace {
        Trace::new(vec![0.0, 1.0])
            .unwrap()
            .with_signal("v", vec![4.0, 7.0])
            .unwrap()
    }

    #[test]
    fn sample_lookup() {
        let t = tv();
        assert_eq!(t.sample_at("v", 1).unwrap(), 7.0);
        assert_eq!(t.sample_at("v", 0).unwrap(), 4.0);
        assert!(matches!(t.sample_at("w", 0), Err(TraceError::UnknownSignal(_))));
        assert!(matches!(
            t.sample_at("v", 2),
            Err(TraceError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(Trace::new(vec![]), Err(TraceError::Empty)));
        assert!(matches!(
            Trace::new(vec![0.0, 0.0]),
            Err(TraceError::NotIncreasing { .. })
        ));
        let t = Trace::new(vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            t.clone().with_signal("x", vec![1.0]),
            Err(TraceError::LengthMismatch { .. })
        ));
        let t = t.with_signal("x", vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            t.with_signal("x", vec![1.0, 2.0]),
            Err(TraceError::DuplicateSignal(_))
        ));
    }

    #[test]
    fn widths() {
        let w = Trace::new(vec![0.0, 0.5, 1.0]).unwrap().step_widths();
        assert_eq!(w.as_slice(), &[0.5, 0.5, 0.5]);
        let w = Trace::new(vec![0.0, 1.0, 4.0]).unwrap().step_widths();
        assert_eq!(w.as_slice(), &[1.0, 3.0, 3.0]);
        let w = Trace::new(vec![0.0]).unwrap().step_widths();
        assert_eq!(w.as_slice(), &[1.0]);
    }

    #[test]
    fn windows() {
        let t = Trace::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t.window_indices(0, 1.0, 2.0), 1..3);
        assert_eq!(t.window_indices(2, 0.0, 0.0), 2..3);
        let t = Trace::new(vec![0.0, 1.0]).unwrap();
        assert!(t.window_indices(1, 5.0, 6.0).is_empty());
    }

    #[test]
    fn window_tolerates_decimal_steps() {
        let t = Trace::uniform(11, 0.1).unwrap();
        assert_eq!(t.window_indices(3, 0.3, 0.3), 6..7);
        assert_eq!(t.window_indices(0, 0.0, 1.0), 0..11);
    }

    #[test]
    fn resample() {
        let r = tv().resample_piecewise_constant(2);
        assert_eq!(r.times(), &[0.0, 0.5, 1.0, 1.5]);
        assert_eq!(r.signal("v").unwrap(), &[4.0, 4.0, 7.0, 7.0]);

        let t = Trace::new(vec![0.0, 2.0])
            .unwrap()
            .with_signal("v", vec![1.0, 9.0])
            .unwrap();
        let r = t.resample_piecewise_constant(4);
        assert_eq!(r.times(), &[0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5]);
        assert_eq!(r.signal("v").unwrap(), &[1.0, 1.0, 1.0, 1.0, 9.0, 9.0, 9.0, 9.0]);
        assert_eq!(tv().resample_piecewise_constant(1), tv());
    }

    #[test]
    fn csv_round_trip() {
        let t = Trace::new(vec![0.0, 0.25, 1.5])
            .unwrap()
            .with_signal("a", vec![1.0, -2.5, 3.0])
            .unwrap()
            .with_signal("b", vec![0.0, 0.1, 1e-7])
            .unwrap();
        let mut buf = Vec::new();
        t.to_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time,a,b\n"));
        assert_eq!(Trace::from_csv(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(matches!(
            Trace::from_csv("t,x\n0,1\n".as_bytes()),
            Err(TraceError::MissingTimeColumn)
        ));
        assert!(matches!(
            Trace::from_csv("time,x\n0,abc\n".as_bytes()),
            Err(TraceError::Row { .. })
        ));
        assert!(matches!(
            Trace::from_csv("time,x\n1,1\n0,2\n".as_bytes()),
            Err(TraceError::NotIncreasing { .. })
        ));
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn arb_trace() -> impl Strategy<Value = Trace> {
            prop::collection::vec((0.01f64..3.0, -10.0f64..10.0), 1..12).prop_map(|steps| {
                let mut t = 0.0;
                let mut times = Vec::new();
                let mut values = Vec::new();
                for (dt, v) in steps {
                    times.push(t);
                    values.push(v);
                    t += dt;
                }
                Trace::new(times).unwrap().with_signal("x", values).unwrap()
            })
        }

        proptest! {
            #[test]
            fn resample_keeps_original_samples(trace in arb_trace(), factor in 1usize..8) {
                let r = trace.resample_piecewise_constant(factor);
                for (k, &t) in trace.times().iter().enumerate() {
                    let j = r.times().iter().position(|&s| s == t).expect("original stamp kept");
                    prop_assert_eq!(r.signal("x").unwrap()[j], trace.signal("x").unwrap()[k]);
                }
            }

            #[test]
            fn window_monotone_in_upper_bound(trace in arb_trace(), a in 0.0f64..3.0, d1 in 0.0f64..3.0, d2 in 0.0f64..3.0) {
                let k = 0;
                let small = trace.window_indices(k, a, a + d1);
                let big = trace.window_indices(k, a, a + d1 + d2);
                for j in small {
                    prop_assert!(big.contains(&j));
                }
            }

            #[test]
            fn widths_sum(trace in arb_trace()) {
                let w = trace.step_widths();
                let total: f64 = w.as_slice().iter().sum();
                let expected = trace.duration() + w.get(w.len() - 1);
                prop_assert!((total - expected).abs() < 1e-9);
            }
        }
    }
}
