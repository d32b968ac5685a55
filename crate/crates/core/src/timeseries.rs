//! Flow-record ingestion and the binned multivariate series model.
//!
//! A trace of raw flow records (5-tuple plus packet count) is aggregated into
//! uniform time bins; each bin yields five features: total packets and the
//! distinct counts of source/destination addresses and ports. Distinctness
//! is exact (hash sets), which keeps the aggregation easy to cross-check at
//! desk scale.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Feature names produced by [`aggregate_bins`], in column order.
pub const FLOW_FEATURES: [&str; 5] = ["packets", "src_ips", "dst_ips", "src_ports", "dst_ports"];

/// One raw flow record: the 5-tuple identifies the flow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowRecord {
    pub timestamp: i64,
    pub src_ip: String,
    pub dst_ip: String,
    pub src_port: u16,
    pub dst_port: u16,
    pub protocol: u8,
    pub packet_count: u64,
}

/// Uniformly binned multivariate time series of flow features.
///
/// Invariants: at least two bins and one feature, all entries finite, bins
/// contiguous at `start_time + i·bin_seconds`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSeries<T> {
    values: Matrix<T>,
    bin_seconds: u64,
    feature_names: Vec<String>,
    start_time: i64,
}

impl<T: Scalar> FlowSeries<T> {
    pub fn new(
        values: Matrix<T>,
        bin_seconds: u64,
        feature_names: Vec<String>,
        start_time: i64,
    ) -> Result<Self> {
        if values.rows() < 2 {
            return Err(Error::parameter("values", "a series needs at least 2 bins"));
        }
        if values.cols() < 1 {
            return Err(Error::parameter(
                "values",
                "a series needs at least 1 feature",
            ));
        }
        if bin_seconds == 0 {
            return Err(Error::parameter("bin_seconds", "must be positive"));
        }
        if feature_names.len() != values.cols() {
            return Err(Error::Shape(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                values.cols()
            )));
        }
        if values.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::parameter("values", "non-finite entry in series"));
        }
        Ok(FlowSeries {
            values,
            bin_seconds,
            feature_names,
            start_time,
        })
    }

    /// Builds a series from per-feature columns; mostly a test and generator
    /// convenience.
    pub fn from_columns(
        columns: &[Vec<T>],
        bin_seconds: u64,
        feature_names: Vec<String>,
        start_time: i64,
    ) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::parameter("columns", "no feature columns"));
        }
        let n = columns[0].len();
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Shape("ragged feature columns".to_string()));
        }
        let values = Matrix::from_fn(n, columns.len(), |r, c| columns[c][r]);
        FlowSeries::new(values, bin_seconds, feature_names, start_time)
    }

    /// Single-feature series with one-second bins starting at epoch zero.
    pub fn univariate(values: Vec<T>) -> Result<Self> {
        FlowSeries::from_columns(&[values], 1, vec!["y".to_string()], 0)
    }

    pub fn n_bins(&self) -> usize {
        self.values.rows()
    }

    pub fn n_features(&self) -> usize {
        self.values.cols()
    }

    pub fn bin_seconds(&self) -> u64 {
        self.bin_seconds
    }

    pub fn start_time(&self) -> i64 {
        self.start_time
    }

    pub fn bin_start(&self, i: usize) -> i64 {
        self.start_time + (i as u64 * self.bin_seconds) as i64
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn value(&self, bin: usize, feature: usize) -> T {
        self.values[(bin, feature)]
    }

    pub fn row(&self, bin: usize) -> &[T] {
        self.values.row(bin)
    }

    pub fn column(&self, feature: usize) -> Vec<T> {
        self.values.col(feature)
    }

    /// Replaces the value matrix, keeping the time base and names.
    pub fn with_values(&self, values: Matrix<T>) -> Result<Self> {
        FlowSeries::new(
            values,
            self.bin_seconds,
            self.feature_names.clone(),
            self.start_time,
        )
    }

    /// Keeps bins `lo..hi` (half-open). The slice must hold at least 2 bins.
    pub fn slice_bins(&self, lo: usize, hi: usize) -> Result<Self> {
        if lo >= hi || hi > self.n_bins() {
            return Err(Error::parameter("range", "invalid bin range"));
        }
        let values = Matrix::from_fn(hi - lo, self.n_features(), |r, c| self.values[(lo + r, c)]);
        FlowSeries::new(
            values,
            self.bin_seconds,
            self.feature_names.clone(),
            self.bin_start(lo),
        )
    }
}

/// Reads flow records from line-oriented CSV with the header
/// `timestamp,src_ip,dst_ip,src_port,dst_port,protocol,packets`.
///
/// Lines starting with `#` are skipped. Empty input yields an empty list.
pub fn ingest_flow_records<R: BufRead>(reader: R) -> Result<Vec<FlowRecord>> {
    let mut records = Vec::new();
    let mut saw_header = false;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !saw_header {
            saw_header = true;
            if trimmed.starts_with("timestamp") {
                continue;
            }
            // Headerless input is accepted; fall through and parse.
        }
        records.push(parse_record_line(trimmed, line_no)?);
    }
    Ok(records)
}

fn parse_record_line(line: &str, line_no: usize) -> Result<FlowRecord> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 7 {
        return Err(Error::parse(
            line_no,
            format!("expected 7 comma-separated fields, got {}", fields.len()),
        ));
    }
    let timestamp: i64 = fields[0]
        .parse()
        .map_err(|_| Error::parse(line_no, format!("bad timestamp `{}`", fields[0])))?;
    let parse_port = |s: &str, which: &str| -> Result<u16> {
        let raw: i64 = s
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad {which} `{s}`")))?;
        if !(0..=65535).contains(&raw) {
            return Err(Error::parse(
                line_no,
                format!("{which} {raw} outside 0..=65535"),
            ));
        }
        Ok(raw as u16)
    };
    let src_port = parse_port(fields[3], "src_port")?;
    let dst_port = parse_port(fields[4], "dst_port")?;
    let protocol: u8 = fields[5]
        .parse()
        .map_err(|_| Error::parse(line_no, format!("bad protocol `{}`", fields[5])))?;
    let packet_count: u64 = fields[6]
        .parse()
        .map_err(|_| Error::parse(line_no, format!("bad packet count `{}`", fields[6])))?;
    Ok(FlowRecord {
        timestamp,
        src_ip: fields[1].to_string(),
        dst_ip: fields[2].to_string(),
        src_port,
        dst_port,
        protocol,
        packet_count,
    })
}

/// Aggregates flow records into uniform bins of `bin_seconds`, producing the
/// five [`FLOW_FEATURES`] per bin. Bins are aligned to multiples of
/// `bin_seconds` and span the full record range; empty bins are zero. A
/// trace that lands in a single bin is padded with one zero bin so the
/// series invariant holds.
pub fn aggregate_bins<T: Scalar>(
    records: &[FlowRecord],
    bin_seconds: u64,
) -> Result<FlowSeries<T>> {
    if records.is_empty() {
        return Err(Error::parameter("records", "no records to aggregate"));
    }
    if bin_seconds == 0 {
        return Err(Error::parameter("bin_seconds", "must be positive"));
    }
    let bs = bin_seconds as i64;
    let floor_div = |t: i64| -> i64 { t.div_euclid(bs) };
    let min_bin = records
        .iter()
        .map(|r| floor_div(r.timestamp))
        .min()
        .unwrap();
    let max_bin = records
        .iter()
        .map(|r| floor_div(r.timestamp))
        .max()
        .unwrap();
    let mut n_bins = (max_bin - min_bin) as usize + 1;
    if n_bins < 2 {
        n_bins = 2; // zero-pad a degenerate single-bin trace
    }

    #[derive(Default)]
    struct BinAcc<'a> {
        packets: u64,
        src_ips: HashSet<&'a str>,
        dst_ips: HashSet<&'a str>,
        src_ports: HashSet<u16>,
        dst_ports: HashSet<u16>,
    }

    let mut bins: Vec<BinAcc> = (0..n_bins).map(|_| BinAcc::default()).collect();
    for r in records {
        let b = (floor_div(r.timestamp) - min_bin) as usize;
        let acc = &mut bins[b];
        acc.packets += r.packet_count;
        acc.src_ips.insert(&r.src_ip);
        acc.dst_ips.insert(&r.dst_ip);
        acc.src_ports.insert(r.src_port);
        acc.dst_ports.insert(r.dst_port);
    }

    let values = Matrix::from_fn(n_bins, 5, |r, c| {
        let acc = &bins[r];
        let v = match c {
            0 => acc.packets as f64,
            1 => acc.src_ips.len() as f64,
            2 => acc.dst_ips.len() as f64,
            3 => acc.src_ports.len() as f64,
            _ => acc.dst_ports.len() as f64,
        };
        T::of(v)
    });
    FlowSeries::new(
        values,
        bin_seconds,
        FLOW_FEATURES.iter().map(|s| s.to_string()).collect(),
        min_bin * bs,
    )
}

/// Removes the per-feature mean; returns the centered series and the means
/// needed to undo it.
pub fn center<T: Scalar>(series: &FlowSeries<T>) -> (FlowSeries<T>, Vec<T>) {
    let n = series.n_bins();
    let m = series.n_features();
    let mut means = vec![T::zero(); m];
    for b in 0..n {
        for (f, mv) in means.iter_mut().enumerate() {
            *mv += series.value(b, f);
        }
    }
    let inv = T::one() / T::of_usize(n);
    for mv in means.iter_mut() {
        *mv *= inv;
    }
    let values = Matrix::from_fn(n, m, |r, c| series.value(r, c) - means[c]);
    let centered = series.with_values(values).expect("shape preserved");
    (centered, means)
}

/// Adds the per-feature means back; inverse of [`center`].
pub fn de_center<T: Scalar>(series: &FlowSeries<T>, means: &[T]) -> Result<FlowSeries<T>> {
    if means.len() != series.n_features() {
        return Err(Error::Shape("means length != feature count".to_string()));
    }
    let values = Matrix::from_fn(series.n_bins(), series.n_features(), |r, c| {
        series.value(r, c) + means[c]
    });
    series.with_values(values)
}

/// Centers and scales each feature to unit sample standard deviation.
/// Constant features are centered but left unscaled. Returns the transformed
/// series, the means, and the scale factors applied (1 for constants).
pub fn standardize<T: Scalar>(series: &FlowSeries<T>) -> (FlowSeries<T>, Vec<T>, Vec<T>) {
    let (centered, means) = center(series);
    let m = series.n_features();
    let mut scales = vec![T::one(); m];
    for (f, sc) in scales.iter_mut().enumerate() {
        let col = centered.column(f);
        let sd = crate::stats::sample_std(&col);
        if sd > T::zero() {
            *sc = sd;
        }
    }
    let values = Matrix::from_fn(series.n_bins(), m, |r, c| centered.value(r, c) / scales[c]);
    let out = series.with_values(values).expect("shape preserved");
    (out, means, scales)
}

/// Writes the binned-series CSV: a schema comment, the header
/// `bin_start,<feature...>`, one row per bin.
pub fn write_series<T: Scalar, W: Write>(series: &FlowSeries<T>, out: &mut W) -> Result<()> {
    writeln!(out, "# flowspect series v1")?;
    write!(out, "bin_start")?;
    for name in series.feature_names() {
        write!(out, ",{name}")?;
    }
    writeln!(out)?;
    for b in 0..series.n_bins() {
        write!(out, "{}", series.bin_start(b))?;
        for f in 0..series.n_features() {
            write!(out, ",{}", series.value(b, f).as_f64())?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads the binned-series CSV written by [`write_series`]. Bin spacing is
/// inferred from the first two rows and every row is checked against it.
pub fn read_series<T: Scalar, R: BufRead>(reader: R) -> Result<FlowSeries<T>> {
    let mut names: Option<Vec<String>> = None;
    let mut starts: Vec<i64> = Vec::new();
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if names.is_none() {
            let mut fields = trimmed.split(',');
            let first = fields.next().unwrap_or_default();
            if first != "bin_start" {
                return Err(Error::parse(line_no, "expected `bin_start,...` header"));
            }
            names = Some(fields.map(|s| s.trim().to_string()).collect());
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        let expected = names.as_ref().unwrap().len() + 1;
        if fields.len() != expected {
            return Err(Error::parse(
                line_no,
                format!("expected {expected} fields, got {}", fields.len()),
            ));
        }
        let start: i64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad bin_start `{}`", fields[0])))?;
        starts.push(start);
        let mut row = Vec::with_capacity(expected - 1);
        for f in &fields[1..] {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad value `{f}`")))?;
            row.push(T::of(v));
        }
        rows.push(row);
    }
    let names = names.ok_or_else(|| Error::parse(0, "missing header"))?;
    if rows.len() < 2 {
        return Err(Error::parse(0, "series file needs at least 2 bins"));
    }
    let step = starts[1] - starts[0];
    if step <= 0 {
        return Err(Error::parse(0, "bin starts must strictly increase"));
    }
    for (i, w) in starts.windows(2).enumerate() {
        if w[1] - w[0] != step {
            return Err(Error::parse(i + 3, "bins are not uniformly spaced"));
        }
    }
    let values = Matrix::from_fn(rows.len(), names.len(), |r, c| rows[r][c]);
    FlowSeries::new(values, step as u64, names, starts[0])
}
