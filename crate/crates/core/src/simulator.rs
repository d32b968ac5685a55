//! Labeled anomaly injection for evaluation.
//!
//! Event timing, duration, and magnitude are drawn from empirical histogram
//! distributions; each event type maps to a small additive or multiplicative
//! shape on the five flow features. The shipped default histograms are
//! synthetic stand-ins (heavy-tailed magnitudes, short durations), since
//! real traces are not distributable, and are labeled as such.

use std::io::{BufRead, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::timeseries::{FlowSeries, FLOW_FEATURES};

/// A histogram-backed distribution. Edges are non-decreasing with one more
/// entry than the probabilities; a zero-width bin is a point mass.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution<T> {
    bin_edges: Vec<T>,
    bin_probabilities: Vec<T>,
}

impl<T: Scalar> EmpiricalDistribution<T> {
    pub fn new(bin_edges: Vec<T>, bin_probabilities: Vec<T>) -> Result<Self> {
        if bin_probabilities.is_empty() || bin_edges.len() != bin_probabilities.len() + 1 {
            return Err(Error::parameter(
                "bin_edges",
                "need one more edge than probabilities",
            ));
        }
        if bin_edges.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::parameter(
                "bin_edges",
                "edges must be non-decreasing",
            ));
        }
        if bin_probabilities.iter().any(|&p| p < T::zero()) {
            return Err(Error::parameter(
                "bin_probabilities",
                "probabilities must be non-negative",
            ));
        }
        let total: T = bin_probabilities.iter().fold(T::zero(), |a, &p| a + p);
        if (total - T::one()).abs() > T::of(1e-9) {
            return Err(Error::parameter(
                "bin_probabilities",
                format!("probabilities sum to {total}, expected 1"),
            ));
        }
        Ok(EmpiricalDistribution {
            bin_edges,
            bin_probabilities,
        })
    }

    /// A distribution concentrated on a single value.
    pub fn point_mass(value: T) -> Self {
        EmpiricalDistribution {
            bin_edges: vec![value, value],
            bin_probabilities: vec![T::one()],
        }
    }

    /// Builds from unnormalized weights.
    pub fn from_weights(bin_edges: Vec<T>, weights: Vec<T>) -> Result<Self> {
        let total: T = weights.iter().fold(T::zero(), |a, &w| a + w);
        if total <= T::zero() {
            return Err(Error::parameter("weights", "need positive total weight"));
        }
        let probs = weights.iter().map(|&w| w / total).collect();
        Self::new(bin_edges, probs)
    }

    pub fn bin_edges(&self) -> &[T] {
        &self.bin_edges
    }

    pub fn bin_probabilities(&self) -> &[T] {
        &self.bin_probabilities
    }

    /// Draws one value: a bin by probability, then uniform within the bin.
    /// Consumes exactly two uniforms per call so streams stay aligned.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> T {
        let u1 = T::of(rng.random::<f64>());
        let u2 = T::of(rng.random::<f64>());
        let mut acc = T::zero();
        let mut idx = self.bin_probabilities.len() - 1;
        for (i, &p) in self.bin_probabilities.iter().enumerate() {
            acc += p;
            if u1 < acc {
                idx = i;
                break;
            }
        }
        let lo = self.bin_edges[idx];
        let hi = self.bin_edges[idx + 1];
        lo + u2 * (hi - lo)
    }

    /// Expectation under the histogram (bin midpoints).
    pub fn mean(&self) -> T {
        let half = T::of(0.5);
        self.bin_probabilities
            .iter()
            .enumerate()
            .map(|(i, &p)| p * (self.bin_edges[i] + self.bin_edges[i + 1]) * half)
            .fold(T::zero(), |a, x| a + x)
    }
}

/// Equal-width histogram over `[min, max]` of the samples. All-equal
/// samples degenerate to a point mass.
pub fn fit_empirical<T: Scalar>(samples: &[T], n_bins: usize) -> Result<EmpiricalDistribution<T>> {
    if samples.is_empty() {
        return Err(Error::parameter("samples", "need at least one sample"));
    }
    if n_bins == 0 {
        return Err(Error::parameter("n_bins", "need at least one bin"));
    }
    let lo = samples.iter().copied().fold(T::infinity(), T::min);
    let hi = samples.iter().copied().fold(T::neg_infinity(), T::max);
    if lo == hi {
        return Ok(EmpiricalDistribution::point_mass(lo));
    }
    let width = (hi - lo) / T::of_usize(n_bins);
    let mut counts = vec![0usize; n_bins];
    for &s in samples {
        let mut idx = ((s - lo) / width).to_f64().unwrap_or(0.0).floor() as usize;
        if idx >= n_bins {
            idx = n_bins - 1; // the max lands in the last bin
        }
        counts[idx] += 1;
    }
    let total = T::of_usize(samples.len());
    let probs = counts.iter().map(|&c| T::of_usize(c) / total).collect();
    let edges = (0..=n_bins).map(|i| lo + width * T::of_usize(i)).collect();
    EmpiricalDistribution::new(edges, probs)
}

/// The event taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AnomalyType {
    Dos,
    PortScan,
    LargeFileTransfer,
    PrefixOutage,
    LinkOutage,
}

impl AnomalyType {
    pub const ALL: [AnomalyType; 5] = [
        AnomalyType::Dos,
        AnomalyType::PortScan,
        AnomalyType::LargeFileTransfer,
        AnomalyType::PrefixOutage,
        AnomalyType::LinkOutage,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AnomalyType::Dos => "dos",
            AnomalyType::PortScan => "port_scan",
            AnomalyType::LargeFileTransfer => "large_file_transfer",
            AnomalyType::PrefixOutage => "prefix_outage",
            AnomalyType::LinkOutage => "link_outage",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dos" => Ok(AnomalyType::Dos),
            "port_scan" => Ok(AnomalyType::PortScan),
            "large_file_transfer" => Ok(AnomalyType::LargeFileTransfer),
            "prefix_outage" => Ok(AnomalyType::PrefixOutage),
            "link_outage" => Ok(AnomalyType::LinkOutage),
            other => Err(Error::parameter(
                "anomaly_type",
                format!("unknown type `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for AnomalyType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Timing/size model for one event type.
#[derive(Debug, Clone)]
pub struct AnomalyProfile<T> {
    pub anomaly_type: AnomalyType,
    /// Gap in bins from the previous event start.
    pub interarrival: EmpiricalDistribution<T>,
    /// Event length in bins.
    pub duration: EmpiricalDistribution<T>,
    /// Packets for volume events, flow count for scans, drop share for
    /// prefix outages.
    pub magnitude: EmpiricalDistribution<T>,
    pub type_probability: T,
}

/// One injected event with its ground-truth coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyEvent<T> {
    pub anomaly_type: AnomalyType,
    pub start_bin: usize,
    pub duration_bins: usize,
    pub magnitude: T,
}

impl<T> AnomalyEvent<T> {
    pub fn end_bin(&self) -> usize {
        self.start_bin + self.duration_bins - 1
    }
}

/// A synthetic trace with its labels, sorted and non-overlapping.
#[derive(Debug, Clone)]
pub struct InjectedTrace<T> {
    pub series: FlowSeries<T>,
    pub truth: Vec<AnomalyEvent<T>>,
}

/// Per-feature additive direction of a scan event with unit flow count:
/// mostly distinct-count features plus a couple of packets per new flow.
/// The synthetic base's churn factor moves along the same direction, which
/// is what makes scans spatially unremarkable and temporally abrupt.
pub fn scan_shape<T: Scalar>(m: usize) -> Vec<T> {
    let pattern = [2.0, 0.5, 0.5, 1.0, 1.0];
    (0..m)
        .map(|q| T::of(pattern[q.min(pattern.len() - 1)]))
        .collect()
}

fn apply_event<T: Scalar>(values: &mut Matrix<T>, event: &AnomalyEvent<T>, m: usize) {
    let span = event.start_bin..=event.end_bin();
    match event.anomaly_type {
        AnomalyType::Dos => {
            // A few flows carrying a large packet volume.
            let few = [3.0, 1.0, 2.0, 1.0];
            for t in span {
                values[(t, 0)] += event.magnitude;
                for q in 1..m {
                    values[(t, q)] += T::of(few[(q - 1) % few.len()]);
                }
            }
        }
        AnomalyType::PortScan => {
            let shape = scan_shape::<T>(m);
            for t in span {
                for (q, &s) in shape.iter().enumerate() {
                    values[(t, q)] += event.magnitude * s;
                }
            }
        }
        AnomalyType::LargeFileTransfer => {
            // One flow moving a packet bulk.
            for t in span {
                values[(t, 0)] += event.magnitude;
                for q in 1..m {
                    values[(t, q)] += T::one();
                }
            }
        }
        AnomalyType::PrefixOutage => {
            // A share of the flows disappears; packets drop with them.
            let share = event.magnitude.min(T::one()).max(T::zero());
            let keep_counts = T::one() - share;
            let keep_packets = T::one() - T::of(0.5) * share;
            for t in span {
                values[(t, 0)] = (values[(t, 0)] * keep_packets).max(T::zero());
                for q in 1..m {
                    values[(t, q)] = (values[(t, q)] * keep_counts).max(T::zero());
                }
            }
        }
        AnomalyType::LinkOutage => {
            for t in span {
                for q in 0..m {
                    values[(t, q)] = T::zero();
                }
            }
        }
    }
}

/// Walks time from bin 0, placing typed events drawn from the profiles.
///
/// Per event: pick the type by `type_probability`, draw the gap from the
/// previous event start, then duration and magnitude, and apply the type's
/// shape. Placements that overlap an existing event or overrun the series
/// are re-drawn up to 100 times, after which the event is skipped and the
/// walk resumes from the end of the last placed event. Deterministic for a
/// fixed seed.
pub fn inject_anomalies<T: Scalar>(
    base: &FlowSeries<T>,
    profiles: &[AnomalyProfile<T>],
    seed: u64,
) -> Result<InjectedTrace<T>> {
    if profiles.is_empty() {
        return Err(Error::parameter("profiles", "need at least one profile"));
    }
    let total_p: T = profiles
        .iter()
        .map(|p| p.type_probability)
        .fold(T::zero(), |a, x| a + x);
    if (total_p - T::one()).abs() > T::of(1e-6) {
        return Err(Error::parameter(
            "profiles",
            format!("type probabilities sum to {total_p}, expected 1"),
        ));
    }

    let n = base.n_bins();
    let m = base.n_features();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = base.values().clone();
    let mut truth: Vec<AnomalyEvent<T>> = Vec::new();
    let mut cursor: usize = 0;

    'walk: loop {
        let mut placed = false;
        for _attempt in 0..100 {
            let pick = T::of(rng.random::<f64>());
            let mut acc = T::zero();
            let mut profile = &profiles[profiles.len() - 1];
            for p in profiles {
                acc += p.type_probability;
                if pick < acc {
                    profile = p;
                    break;
                }
            }
            let gap = profile
                .interarrival
                .sample(&mut rng)
                .round()
                .to_f64()
                .unwrap_or(1.0)
                .max(1.0) as usize;
            let duration = profile
                .duration
                .sample(&mut rng)
                .round()
                .to_f64()
                .unwrap_or(1.0)
                .max(1.0) as usize;
            let magnitude = profile.magnitude.sample(&mut rng);
            let start = cursor + gap;
            if start >= n || start + duration > n {
                continue;
            }
            if let Some(last) = truth.last() {
                if start <= last.end_bin() {
                    continue;
                }
            }
            let magnitude = match profile.anomaly_type {
                AnomalyType::PrefixOutage => magnitude.min(T::one()).max(T::of(1e-6)),
                _ => magnitude.max(T::of(f64::MIN_POSITIVE)),
            };
            let event = AnomalyEvent {
                anomaly_type: profile.anomaly_type,
                start_bin: start,
                duration_bins: duration,
                magnitude,
            };
            apply_event(&mut values, &event, m);
            cursor = start;
            truth.push(event);
            placed = true;
            break;
        }
        if !placed {
            // Either every draw overran the series or the neighborhood is
            // saturated; skip the event, resume past the last placement, and
            // give up once that stops making progress.
            let next = truth.last().map(|e| e.end_bin() + 1).unwrap_or(n);
            if next > cursor && next < n {
                cursor = next;
                continue 'walk;
            }
            break 'walk;
        }
        if cursor >= n {
            break;
        }
    }

    let series = base.with_values(values)?;
    Ok(InjectedTrace { series, truth })
}

/// Injects only into the suffix after `warmup_bins`, leaving a clean prefix
/// for detectors that fit on leading bins. Truth coordinates refer to the
/// full series.
pub fn inject_with_warmup<T: Scalar>(
    base: &FlowSeries<T>,
    profiles: &[AnomalyProfile<T>],
    seed: u64,
    warmup_bins: usize,
) -> Result<InjectedTrace<T>> {
    if warmup_bins == 0 {
        return inject_anomalies(base, profiles, seed);
    }
    let n = base.n_bins();
    if warmup_bins + 2 > n {
        return Err(Error::parameter(
            "warmup_bins",
            "warmup leaves fewer than 2 bins to inject into",
        ));
    }
    let suffix = base.slice_bins(warmup_bins, n)?;
    let injected = inject_anomalies(&suffix, profiles, seed)?;
    let m = base.n_features();
    let mut values = base.values().clone();
    for t in warmup_bins..n {
        for q in 0..m {
            values[(t, q)] = injected.series.value(t - warmup_bins, q);
        }
    }
    let truth = injected
        .truth
        .into_iter()
        .map(|mut e| {
            e.start_bin += warmup_bins;
            e
        })
        .collect();
    Ok(InjectedTrace {
        series: base.with_values(values)?,
        truth,
    })
}

/// Default synthetic profile for a type, with heavy-tailed magnitudes and
/// short-biased durations. The histograms are stand-ins, not fits to any
/// real trace.
pub fn synthetic_profile<T: Scalar>(
    anomaly_type: AnomalyType,
    type_probability: T,
) -> AnomalyProfile<T> {
    let of = |v: f64| T::of(v);
    let edges = |e: &[f64]| e.iter().map(|&v| of(v)).collect::<Vec<T>>();
    let weights = |w: &[f64]| w.iter().map(|&v| of(v)).collect::<Vec<T>>();
    let interarrival = EmpiricalDistribution::from_weights(
        edges(&[60.0, 120.0, 240.0, 480.0]),
        weights(&[0.5, 0.3, 0.2]),
    )
    .expect("static histogram");
    let duration = match anomaly_type {
        // Scans and outages run longer; volume spikes are short bursts.
        AnomalyType::PortScan | AnomalyType::PrefixOutage => EmpiricalDistribution::from_weights(
            edges(&[1.0, 2.0, 4.0, 8.0]),
            weights(&[0.4, 0.35, 0.25]),
        ),
        _ => EmpiricalDistribution::from_weights(
            edges(&[1.0, 2.0, 4.0, 8.0]),
            weights(&[0.5, 0.3, 0.2]),
        ),
    }
    .expect("static histogram");
    let magnitude = match anomaly_type {
        AnomalyType::Dos => EmpiricalDistribution::from_weights(
            edges(&[1500.0, 3000.0, 6000.0, 12000.0]),
            weights(&[0.45, 0.35, 0.2]),
        ),
        AnomalyType::PortScan => EmpiricalDistribution::from_weights(
            edges(&[15.0, 30.0, 60.0, 120.0, 200.0]),
            weights(&[0.35, 0.25, 0.2, 0.2]),
        ),
        AnomalyType::LargeFileTransfer => EmpiricalDistribution::from_weights(
            edges(&[300.0, 600.0, 1200.0, 2400.0]),
            weights(&[0.5, 0.3, 0.2]),
        ),
        AnomalyType::PrefixOutage => {
            EmpiricalDistribution::from_weights(edges(&[0.2, 0.4, 0.7]), weights(&[0.6, 0.4]))
        }
        AnomalyType::LinkOutage => Ok(EmpiricalDistribution::point_mass(T::one())),
    }
    .expect("static histogram");
    AnomalyProfile {
        anomaly_type,
        interarrival,
        duration,
        magnitude,
        type_probability,
    }
}

/// The full five-type synthetic mix.
pub fn synthetic_profiles<T: Scalar>() -> Vec<AnomalyProfile<T>> {
    let probs = [0.3, 0.3, 0.15, 0.15, 0.1];
    AnomalyType::ALL
        .iter()
        .zip(probs)
        .map(|(&ty, p)| synthetic_profile(ty, T::of(p)))
        .collect()
}

/// Synthetic normal traffic: a daily volume factor, a flow-churn factor,
/// and a quasi-hourly stochastic modulation of the volume, plus per-feature
/// noise. The churn factor moves the count features along [`scan_shape`],
/// giving the base the spatial direction that scans later hide in. The
/// modulation is a resonant AR(2) around a 9-bin period (45 minutes at
/// 5-minute bins): narrowband enough for a lag subspace to learn, but above
/// a 2-hour frequency cutoff and aperiodic, so fixed-split detectors carry
/// it in their residual.
pub fn synthetic_base<T: Scalar>(
    n_bins: usize,
    bin_seconds: u64,
    seed: u64,
) -> Result<FlowSeries<T>> {
    use rand_distr::{Distribution, StandardNormal};
    if n_bins < 2 {
        return Err(Error::parameter("n_bins", "need at least 2 bins"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5f0c_3a11);
    let m = 5usize;
    let alpha = [2000.0, 120.0, 100.0, 240.0, 200.0];
    let noise_sigma = [57.0, 4.5, 4.2, 9.0, 8.2];
    let churn_amp = 60.0;
    let shape = scan_shape::<T>(m);

    // Resonant AR(2): poles at radius 0.9, period 9 bins; innovation scaled
    // so the stationary modulation std is ~0.12 of the volume level.
    let ar1 = 2.0 * 0.9 * (2.0 * std::f64::consts::PI / 9.0).cos();
    let ar2 = -0.81;
    let ar_sigma = 0.08 / 2.64;
    let mut h1 = 0.0f64;
    let mut h2 = 0.0f64;
    // Burn in so the start of the trace is stationary.
    for _ in 0..200 {
        let e: f64 = StandardNormal.sample(&mut rng);
        let h = ar1 * h1 + ar2 * h2 + ar_sigma * e;
        h2 = h1;
        h1 = h;
    }

    let mut values = Matrix::zeros(n_bins, m);
    for t in 0..n_bins {
        let tt = t as f64;
        let volume = 1.0 + 0.25 * (2.0 * std::f64::consts::PI * tt / 288.0 + 0.7).sin();
        let churn = (2.0 * std::f64::consts::PI * tt / 192.0 + 2.1).sin();
        let e: f64 = StandardNormal.sample(&mut rng);
        let h = ar1 * h1 + ar2 * h2 + ar_sigma * e;
        h2 = h1;
        h1 = h;
        for q in 0..m {
            let z: f64 = StandardNormal.sample(&mut rng);
            let v = alpha[q] * (volume + h)
                + churn_amp * shape[q].as_f64() * churn
                + noise_sigma[q] * z;
            values[(t, q)] = T::of(v.max(0.0));
        }
    }
    FlowSeries::new(
        values,
        bin_seconds,
        FLOW_FEATURES.iter().map(|s| s.to_string()).collect(),
        0,
    )
}

/// Writes the truth CSV: `type,start_bin,duration_bins,magnitude`.
pub fn write_truth<T: Scalar, W: Write>(truth: &[AnomalyEvent<T>], out: &mut W) -> Result<()> {
    writeln!(out, "# flowspect truth v1")?;
    writeln!(out, "type,start_bin,duration_bins,magnitude")?;
    for e in truth {
        writeln!(
            out,
            "{},{},{},{}",
            e.anomaly_type,
            e.start_bin,
            e.duration_bins,
            e.magnitude.as_f64()
        )?;
    }
    Ok(())
}

/// Reads the truth CSV written by [`write_truth`].
pub fn read_truth<T: Scalar, R: BufRead>(reader: R) -> Result<Vec<AnomalyEvent<T>>> {
    let mut out = Vec::new();
    let mut saw_header = false;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !saw_header {
            if !trimmed.starts_with("type,") {
                return Err(Error::parse(line_no, "expected truth header"));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::parse(line_no, "expected 4 fields"));
        }
        let anomaly_type = AnomalyType::parse(fields[0].trim())
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
        let start_bin: usize = fields[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(line_no, "bad start_bin"))?;
        let duration_bins: usize = fields[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(line_no, "bad duration_bins"))?;
        let magnitude: f64 = fields[3]
            .trim()
            .parse()
            .map_err(|_| Error::parse(line_no, "bad magnitude"))?;
        if duration_bins == 0 {
            return Err(Error::parse(line_no, "duration must be at least 1 bin"));
        }
        out.push(AnomalyEvent {
            anomaly_type,
            start_bin,
            duration_bins,
            magnitude: T::of(magnitude),
        });
    }
    Ok(out)
}

/// Writes one profile as CSV: metadata rows then one row per histogram bin,
/// `field,lo,hi,value`.
pub fn write_profile<T: Scalar, W: Write>(profile: &AnomalyProfile<T>, out: &mut W) -> Result<()> {
    writeln!(out, "# flowspect profile v1")?;
    writeln!(out, "field,lo,hi,value")?;
    writeln!(out, "type,,,{}", profile.anomaly_type)?;
    writeln!(
        out,
        "type_probability,,,{}",
        profile.type_probability.as_f64()
    )?;
    for (name, dist) in [
        ("interarrival", &profile.interarrival),
        ("duration", &profile.duration),
        ("magnitude", &profile.magnitude),
    ] {
        for (i, &p) in dist.bin_probabilities().iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{}",
                name,
                dist.bin_edges()[i].as_f64(),
                dist.bin_edges()[i + 1].as_f64(),
                p.as_f64()
            )?;
        }
    }
    Ok(())
}

/// Reads a profile CSV written by [`write_profile`].
pub fn read_profile<T: Scalar, R: BufRead>(reader: R) -> Result<AnomalyProfile<T>> {
    let mut anomaly_type: Option<AnomalyType> = None;
    let mut type_probability: Option<T> = None;
    let mut hists: [(Vec<T>, Vec<T>); 3] = [
        (Vec::new(), Vec::new()),
        (Vec::new(), Vec::new()),
        (Vec::new(), Vec::new()),
    ];
    let mut saw_header = false;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !saw_header {
            if !trimmed.starts_with("field,") {
                return Err(Error::parse(line_no, "expected profile header"));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::parse(line_no, "expected 4 fields"));
        }
        match fields[0].trim() {
            "type" => {
                anomaly_type = Some(
                    AnomalyType::parse(fields[3].trim())
                        .map_err(|e| Error::parse(line_no, e.to_string()))?,
                );
            }
            "type_probability" => {
                let p: f64 = fields[3]
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(line_no, "bad type_probability"))?;
                type_probability = Some(T::of(p));
            }
            dist @ ("interarrival" | "duration" | "magnitude") => {
                let slot = match dist {
                    "interarrival" => 0,
                    "duration" => 1,
                    _ => 2,
                };
                let lo: f64 = fields[1]
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(line_no, "bad lo edge"))?;
                let hi: f64 = fields[2]
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(line_no, "bad hi edge"))?;
                let p: f64 = fields[3]
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(line_no, "bad probability"))?;
                let (edges, probs) = &mut hists[slot];
                if edges.is_empty() {
                    edges.push(T::of(lo));
                } else if (edges.last().copied().unwrap().as_f64() - lo).abs() > 1e-9 {
                    return Err(Error::parse(line_no, "histogram bins are not contiguous"));
                }
                edges.push(T::of(hi));
                probs.push(T::of(p));
            }
            other => {
                return Err(Error::parse(line_no, format!("unknown field `{other}`")));
            }
        }
    }
    let anomaly_type =
        anomaly_type.ok_or_else(|| Error::parse(0, "profile is missing a `type` row"))?;
    let type_probability = type_probability
        .ok_or_else(|| Error::parse(0, "profile is missing a `type_probability` row"))?;
    let [ia, du, mag] = hists;
    Ok(AnomalyProfile {
        anomaly_type,
        interarrival: EmpiricalDistribution::new(ia.0, ia.1)?,
        duration: EmpiricalDistribution::new(du.0, du.1)?,
        magnitude: EmpiricalDistribution::new(mag.0, mag.1)?,
        type_probability,
    })
}
