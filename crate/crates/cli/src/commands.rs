//! The four subcommands: detect, simulate, evaluate, sweep.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use flowspect_core::baselines::{astute_detect, fourier_detect, kalman_detect, wavelet_detect};
use flowspect_core::detection::{read_detection, write_detection, DetectionResult};
use flowspect_core::eval::{
    auc, feature_map, per_type_counts, roc_curve, tpr_at_fpr, write_counts, write_feature_map,
    write_roc,
};
use flowspect_core::mssa::{detect, KSelection};
use flowspect_core::simulator::{
    inject_with_warmup, read_profile, read_truth, synthetic_base, synthetic_profiles, AnomalyEvent,
    AnomalyProfile, AnomalyType, InjectedTrace,
};
use flowspect_core::timeseries::{
    aggregate_bins, ingest_flow_records, read_series, write_series, FlowSeries,
};
use flowspect_core::{Error, Result};

use crate::config::RunConfig;

fn open_reader(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn create_writer(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    File::create(path).map(BufWriter::new).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

/// Loads the input as a binned series. Raw flow-record files (recognized by
/// their `timestamp,...` header) are aggregated into bins first.
fn load_series(config: &RunConfig) -> Result<FlowSeries<f64>> {
    let path = config
        .input
        .as_ref()
        .ok_or_else(|| Error::parameter("input", "no input series configured"))?;
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    let header = text
        .lines()
        .find(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .unwrap_or_default();
    if header.starts_with("timestamp") {
        let records = ingest_flow_records(text.as_bytes())?;
        if records.is_empty() {
            return Err(Error::parameter("input", "no flow records to aggregate"));
        }
        aggregate_bins(&records, config.bin_seconds)
    } else {
        read_series(text.as_bytes())
    }
}

fn run_detector(
    name: &str,
    series: &FlowSeries<f64>,
    config: &RunConfig,
) -> Result<DetectionResult<f64>> {
    match name {
        "mssa" => detect(series, &config.detector_config()),
        "fourier" => fourier_detect(series, &config.fourier_config()),
        "wavelet" => wavelet_detect(series, &config.wavelet_config()),
        "kalman" => kalman_detect(series, &config.kalman_config()),
        "astute" => astute_detect(series, &config.astute_config()),
        other => Err(Error::parameter(
            "detectors",
            format!("unknown detector `{other}` (expected mssa, fourier, wavelet, kalman, astute)"),
        )),
    }
}

/// Runs the configured detectors and writes one detection CSV each.
pub fn cmd_detect(config: &RunConfig) -> Result<()> {
    let series = load_series(config)?;
    if config.detectors.is_empty() {
        return Err(Error::parameter("detectors", "no detectors selected"));
    }
    for name in &config.detectors {
        let result = run_detector(name, &series, config)?;
        let path = config.out.join(format!("detection_{name}.csv"));
        let mut out = create_writer(&path)?;
        write_detection(&result, &mut out)?;
        out.flush()?;
        println!(
            "{name}: {} alarms -> {}",
            result.alarm_count(),
            path.display()
        );
    }
    Ok(())
}

fn load_profiles(config: &RunConfig) -> Result<Vec<AnomalyProfile<f64>>> {
    if config.profiles.len() == 1 && config.profiles[0] == "synthetic" {
        return Ok(synthetic_profiles());
    }
    config
        .profiles
        .iter()
        .map(|p| read_profile(open_reader(Path::new(p))?))
        .collect()
}

/// Generates (or loads) a base trace, injects labeled anomalies, and writes
/// the series and truth files. Byte-identical for a fixed seed.
pub fn cmd_simulate(config: &RunConfig) -> Result<()> {
    let base = match &config.input {
        Some(path) => read_series(open_reader(path)?)?,
        None => synthetic_base(config.bins, config.bin_seconds, config.seed)?,
    };
    let profiles = load_profiles(config)?;
    let InjectedTrace { series, truth } =
        inject_with_warmup(&base, &profiles, config.seed, config.warmup_bins)?;

    let series_path = config.out.join("series.csv");
    let mut out = create_writer(&series_path)?;
    write_series(&series, &mut out)?;
    out.flush()?;
    let truth_path = config.out.join("truth.csv");
    let mut out = create_writer(&truth_path)?;
    flowspect_core::simulator::write_truth(&truth, &mut out)?;
    out.flush()?;
    println!(
        "simulated {} bins with {} events -> {}, {}",
        series.n_bins(),
        truth.len(),
        series_path.display(),
        truth_path.display()
    );
    Ok(())
}

fn check_alignment(series: &FlowSeries<f64>, result: &DetectionResult<f64>) -> Result<()> {
    if result.n_bins() != series.n_bins()
        || result.start_time != series.start_time()
        || result.bin_seconds != series.bin_seconds()
    {
        return Err(Error::Alignment(format!(
            "detection ({} bins from {} at {}s) does not match series ({} bins from {} at {}s)",
            result.n_bins(),
            result.start_time,
            result.bin_seconds,
            series.n_bins(),
            series.start_time(),
            series.bin_seconds()
        )));
    }
    Ok(())
}

/// Evaluates detection files against ground truth: ROC curves, AUC summary,
/// per-type counts, and the feature map.
pub fn cmd_evaluate(config: &RunConfig) -> Result<()> {
    let series = load_series(config)?;
    let truth_path = config
        .truth
        .as_ref()
        .ok_or_else(|| Error::parameter("truth", "no truth file configured"))?;
    let truth: Vec<AnomalyEvent<f64>> = read_truth(open_reader(truth_path)?)?;
    if config.results.is_empty() {
        return Err(Error::parameter("results", "no detection files configured"));
    }

    let mut loaded = Vec::new();
    for path in &config.results {
        let result: DetectionResult<f64> = read_detection(open_reader(path)?)?;
        check_alignment(&series, &result)?;
        loaded.push(result);
    }

    for result in &loaded {
        let curve = roc_curve(result, &truth, config.slack_bins)?;
        let area = auc(&curve);
        let tpr = tpr_at_fpr(&curve, config.tpr_fpr);
        let path = config.out.join(format!("roc_{}.csv", result.detector_name));
        let mut out = create_writer(&path)?;
        write_roc(&curve, &mut out)?;
        out.flush()?;
        println!(
            "{}: AUC={:.4} TPR@{:.0e}={:.3} -> {}",
            result.detector_name,
            area,
            config.tpr_fpr,
            tpr,
            path.display()
        );
    }

    let named: Vec<(&str, &DetectionResult<f64>)> = loaded
        .iter()
        .map(|r| (r.detector_name.as_str(), r))
        .collect();
    let table = per_type_counts(&named, &truth, config.slack_bins);
    let counts_path = config.out.join("counts.csv");
    let mut out = create_writer(&counts_path)?;
    write_counts(&table, &mut out)?;
    out.flush()?;

    let points = feature_map(&series, &truth)?;
    let map_path = config.out.join("feature_map.csv");
    let mut out = create_writer(&map_path)?;
    write_feature_map(&points, &mut out)?;
    out.flush()?;
    println!("wrote {} and {}", counts_path.display(), map_path.display());
    Ok(())
}

/// One sweep evaluation: a detector output against a truth subset.
#[derive(Debug, Clone)]
struct SweepRow {
    ell: usize,
    k: String,
    beta: f64,
    detector: String,
    subset: &'static str,
    auc: f64,
    tpr: f64,
}

/// Scores restricted to a truth subset: events of other types are removed
/// from the truth, and alarms inside their spans (plus slack) are silenced
/// so cross-type detections do not count as false positives.
fn subset_result(
    result: &DetectionResult<f64>,
    truth: &[AnomalyEvent<f64>],
    keep: Option<AnomalyType>,
    slack: usize,
) -> (DetectionResult<f64>, Vec<AnomalyEvent<f64>>) {
    let kept: Vec<AnomalyEvent<f64>> = truth
        .iter()
        .filter(|e| keep.is_none_or(|ty| e.anomaly_type == ty))
        .cloned()
        .collect();
    let mut scores = result.scores.clone();
    for e in truth {
        if keep.is_some_and(|ty| e.anomaly_type != ty) {
            let lo = e.start_bin.saturating_sub(slack);
            let hi = (e.end_bin() + slack).min(scores.len() - 1);
            for s in scores.iter_mut().take(hi + 1).skip(lo) {
                *s = 0.0;
            }
        }
    }
    (
        DetectionResult::new(
            result.detector_name.clone(),
            scores,
            result.threshold,
            result.start_time,
            result.bin_seconds,
        ),
        kept,
    )
}

fn k_label(k: &KSelection<f64>) -> String {
    match k {
        KSelection::Fixed(v) => v.to_string(),
        KSelection::Auto { cutoff } => format!("auto:{cutoff}"),
    }
}

/// Grid sweep over (ell, k, beta): each point runs the configured detectors
/// and evaluates against the full truth and the per-type subsets, emitting a
/// long-format CSV.
pub fn cmd_sweep(config: &RunConfig) -> Result<()> {
    let series = load_series(config)?;
    let truth_path = config
        .truth
        .as_ref()
        .ok_or_else(|| Error::parameter("truth", "no truth file configured"))?;
    let truth: Vec<AnomalyEvent<f64>> = read_truth(open_reader(truth_path)?)?;
    if config.grid_ell.is_empty() {
        return Err(Error::parameter("grid_ell", "sweep grid must not be empty"));
    }
    let grid_k = if config.grid_k.is_empty() {
        vec![config.k]
    } else {
        config.grid_k.clone()
    };
    let grid_beta = if config.grid_beta.is_empty() {
        vec![config.beta]
    } else {
        config.grid_beta.clone()
    };

    let mut points = Vec::new();
    for &ell in &config.grid_ell {
        for &k in &grid_k {
            for &beta in &grid_beta {
                // A fixed rank swept across window lengths caps at the
                // embedding dimension of each point.
                let k = match k {
                    KSelection::Fixed(v) => {
                        KSelection::Fixed(v.min(ell * series.n_features()).max(1))
                    }
                    auto => auto,
                };
                points.push((ell, k, beta));
            }
        }
    }

    let subsets: [(&'static str, Option<AnomalyType>); 3] = [
        ("all", None),
        ("dos", Some(AnomalyType::Dos)),
        ("port_scan", Some(AnomalyType::PortScan)),
    ];

    let evaluate_point =
        |&(ell, k, beta): &(usize, KSelection<f64>, f64)| -> Result<Vec<SweepRow>> {
            let mut rows = Vec::new();
            for name in &config.detectors {
                let mut point_config = config.clone();
                point_config.ell = ell;
                point_config.k = k;
                point_config.beta = beta;
                let result = run_detector(name, &series, &point_config)?;
                for (label, keep) in subsets {
                    let (restricted, kept) =
                        subset_result(&result, &truth, keep, config.slack_bins);
                    if kept.is_empty() {
                        continue;
                    }
                    let curve = roc_curve(&restricted, &kept, config.slack_bins)?;
                    rows.push(SweepRow {
                        ell,
                        k: k_label(&k),
                        beta,
                        detector: name.clone(),
                        subset: label,
                        auc: auc(&curve),
                        tpr: tpr_at_fpr(&curve, config.tpr_fpr),
                    });
                }
            }
            Ok(rows)
        };

    // Grid points are independent; spread them over a bounded worker pool
    // and reassemble in grid order so the output is deterministic.
    let workers = config.workers.min(points.len()).max(1);
    let mut all_rows: Vec<Vec<SweepRow>> = Vec::new();
    let results: Vec<Result<Vec<SweepRow>>> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for chunk in points.chunks(points.len().div_ceil(workers)) {
            handles.push(scope.spawn(move || {
                chunk
                    .iter()
                    .map(evaluate_point)
                    .collect::<Vec<Result<Vec<SweepRow>>>>()
            }));
        }
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    for r in results {
        all_rows.push(r?);
    }

    let path = config.out.join("sweep.csv");
    let mut out = create_writer(&path)?;
    writeln!(out, "# flowspect sweep v1")?;
    writeln!(out, "ell,k,beta,detector,subset,auc,tpr_at_fpr")?;
    let mut count = 0usize;
    for rows in &all_rows {
        for row in rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                row.ell, row.k, row.beta, row.detector, row.subset, row.auc, row.tpr
            )?;
            count += 1;
        }
    }
    out.flush()?;
    println!("sweep wrote {count} rows -> {}", path.display());
    Ok(())
}
