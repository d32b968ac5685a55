//! Shared per-bin detection output and its CSV form.
//!
//! Every detector in this crate (the spectral detector, the dynamical-model
//! residual, and the four baselines) emits the same structure: one
//! non-negative score per bin, a scalar threshold, and the induced alarms.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult<T> {
    pub detector_name: String,
    pub scores: Vec<T>,
    pub threshold: T,
    pub alarms: Vec<bool>,
    pub start_time: i64,
    pub bin_seconds: u64,
}

impl<T: Scalar> DetectionResult<T> {
    /// Builds a result; alarms are derived as `score > threshold`, which is
    /// the invariant every consumer relies on.
    pub fn new(
        detector_name: impl Into<String>,
        scores: Vec<T>,
        threshold: T,
        start_time: i64,
        bin_seconds: u64,
    ) -> Self {
        let alarms = scores.iter().map(|&s| s > threshold).collect();
        DetectionResult {
            detector_name: detector_name.into(),
            scores,
            threshold,
            alarms,
            start_time,
            bin_seconds,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.scores.len()
    }

    pub fn alarm_count(&self) -> usize {
        self.alarms.iter().filter(|&&a| a).count()
    }

    pub fn bin_start(&self, i: usize) -> i64 {
        self.start_time + (i as u64 * self.bin_seconds) as i64
    }

    /// Re-derives alarms for a different threshold without rescoring.
    pub fn with_threshold(&self, threshold: T) -> Self {
        DetectionResult::new(
            self.detector_name.clone(),
            self.scores.clone(),
            threshold,
            self.start_time,
            self.bin_seconds,
        )
    }
}

/// Writes the detection CSV: `bin_start,score,threshold,alarm`.
pub fn write_detection<T: Scalar, W: Write>(res: &DetectionResult<T>, out: &mut W) -> Result<()> {
    writeln!(out, "# flowspect detection v1 {}", res.detector_name)?;
    writeln!(out, "bin_start,score,threshold,alarm")?;
    for i in 0..res.n_bins() {
        writeln!(
            out,
            "{},{},{},{}",
            res.bin_start(i),
            res.scores[i].as_f64(),
            res.threshold.as_f64(),
            u8::from(res.alarms[i])
        )?;
    }
    Ok(())
}

/// Reads a detection CSV written by [`write_detection`].
pub fn read_detection<T: Scalar, R: BufRead>(reader: R) -> Result<DetectionResult<T>> {
    let mut name = String::from("unknown");
    let mut saw_header = false;
    let mut starts: Vec<i64> = Vec::new();
    let mut scores: Vec<T> = Vec::new();
    let mut threshold = T::zero();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            if let Some(n) = rest.trim().strip_prefix("flowspect detection v1") {
                let n = n.trim();
                if !n.is_empty() {
                    name = n.to_string();
                }
            }
            continue;
        }
        if !saw_header {
            if !trimmed.starts_with("bin_start") {
                return Err(Error::parse(line_no, "expected detection header"));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::parse(line_no, "expected 4 fields"));
        }
        let start: i64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| Error::parse(line_no, "bad bin_start"))?;
        let score: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(line_no, "bad score"))?;
        let thr: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(line_no, "bad threshold"))?;
        starts.push(start);
        scores.push(T::of(score));
        threshold = T::of(thr);
    }
    if scores.len() < 2 {
        return Err(Error::parse(0, "detection file needs at least 2 bins"));
    }
    let step = starts[1] - starts[0];
    if step <= 0 || starts.windows(2).any(|w| w[1] - w[0] != step) {
        return Err(Error::parse(0, "bin starts must be uniformly spaced"));
    }
    Ok(DetectionResult::new(
        name,
        scores,
        threshold,
        starts[0],
        step as u64,
    ))
}
