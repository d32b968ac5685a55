//! End-to-end tests of the binary: file formats, exit codes, determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flowspect"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn write_constant_series(path: &Path, n: usize) {
    let mut text = String::from("bin_start,packets,src_ips\n");
    for i in 0..n {
        text.push_str(&format!("{},100,7\n", i as u64 * 300));
    }
    fs::write(path, text).unwrap();
}

/// A short trace with one obvious spike plus its truth file.
fn write_spike_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let series = dir.join("series.csv");
    let truth = dir.join("truth.csv");
    let mut text = String::from("bin_start,packets,src_ips\n");
    for i in 0..200usize {
        let v = if (120..122).contains(&i) {
            900.0
        } else {
            100.0
        };
        text.push_str(&format!("{},{},7\n", i * 300, v + (i % 3) as f64));
    }
    fs::write(&series, text).unwrap();
    fs::write(
        &truth,
        "type,start_bin,duration_bins,magnitude\ndos,120,2,800\n",
    )
    .unwrap();
    (series, truth)
}

#[test]
fn detect_constant_series_reports_zero_alarms() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("series.csv");
    write_constant_series(&input, 120);
    let conf = dir.path().join("det.conf");
    fs::write(&conf, "train_bins = 60\n").unwrap();
    let out = run(&[
        "detect",
        "--config",
        conf.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--ell",
        "4",
        "--k",
        "2",
    ]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("mssa: 0 alarms"));
    assert!(dir.path().join("detection_mssa.csv").exists());
}

#[test]
fn detect_fans_out_all_five_detectors() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("series.csv");
    // Needs >= 12 bins for the wavelet filter and >= 2 features for astute.
    write_constant_series(&input, 64);
    let conf = dir.path().join("det.conf");
    fs::write(&conf, "train_bins = 32\n").unwrap();
    let out = run(&[
        "detect",
        "--config",
        conf.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--ell",
        "4",
        "--k",
        "2",
        "--detectors",
        "mssa,fourier,wavelet,kalman,astute",
    ]);
    assert!(out.status.success(), "{out:?}");
    for name in ["mssa", "fourier", "wavelet", "kalman", "astute"] {
        assert!(
            dir.path().join(format!("detection_{name}.csv")).exists(),
            "missing {name}"
        );
    }
}

#[test]
fn simulate_is_byte_deterministic() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [&dir_a, &dir_b] {
        let config = dir.path().join("sim.conf");
        fs::write(&config, "bins = 800\nwarmup_bins = 100\n").unwrap();
        let out = run(&[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--seed",
            "42",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{out:?}");
    }
    let series_a = fs::read(dir_a.path().join("series.csv")).unwrap();
    let series_b = fs::read(dir_b.path().join("series.csv")).unwrap();
    assert_eq!(series_a, series_b, "same seed must be byte-identical");
    let truth_a = fs::read(dir_a.path().join("truth.csv")).unwrap();
    let truth_b = fs::read(dir_b.path().join("truth.csv")).unwrap();
    assert_eq!(truth_a, truth_b);

    let out = run(&[
        "simulate",
        "--seed",
        "43",
        "--out",
        dir_b.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let series_c = fs::read(dir_b.path().join("series.csv")).unwrap();
    assert_ne!(series_a, series_c, "different seed must differ");
}

#[test]
fn simulate_unreachable_interarrival_gives_empty_truth() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("never.csv");
    fs::write(
        &profile,
        "field,lo,hi,value\n\
         type,,,dos\n\
         type_probability,,,1.0\n\
         interarrival,100000,100001,1.0\n\
         duration,1,2,1.0\n\
         magnitude,100,200,1.0\n",
    )
    .unwrap();
    let config = dir.path().join("sim.conf");
    fs::write(
        &config,
        format!("bins = 300\nprofiles = {}\n", profile.display()),
    )
    .unwrap();
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let truth = fs::read_to_string(dir.path().join("truth.csv")).unwrap();
    let data_lines = truth
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("type,") && !l.is_empty())
        .count();
    assert_eq!(data_lines, 0, "truth should hold only the header");
}

#[test]
fn evaluate_perfect_detector_scores_auc_one() {
    let dir = tempfile::tempdir().unwrap();
    let (series, truth) = write_spike_fixture(dir.path());
    // Hand-build a perfect detection file: score is the event indicator.
    let detection = dir.path().join("detection_perfect.csv");
    let mut text =
        String::from("# flowspect detection v1 perfect\nbin_start,score,threshold,alarm\n");
    for i in 0..200usize {
        let score = if (120..122).contains(&i) { 1.0 } else { 0.0 };
        let alarm = u8::from(score > 0.5);
        text.push_str(&format!("{},{},0.5,{}\n", i * 300, score, alarm));
    }
    fs::write(&detection, text).unwrap();
    let config = dir.path().join("eval.conf");
    fs::write(
        &config,
        format!(
            "input = {}\ntruth = {}\nresults = {}\n",
            series.display(),
            truth.display(),
            detection.display()
        ),
    )
    .unwrap();
    let out = run(&[
        "evaluate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("AUC=1.0000"), "{}", stdout(&out));
    assert!(dir.path().join("roc_perfect.csv").exists());
    assert!(dir.path().join("counts.csv").exists());
    assert!(dir.path().join("feature_map.csv").exists());
    let counts = fs::read_to_string(dir.path().join("counts.csv")).unwrap();
    assert!(counts.contains("dos,1,1"), "{counts}");
}

#[test]
fn evaluate_empty_truth_is_a_parameter_error() {
    let dir = tempfile::tempdir().unwrap();
    let (series, _) = write_spike_fixture(dir.path());
    let truth = dir.path().join("empty_truth.csv");
    fs::write(&truth, "type,start_bin,duration_bins,magnitude\n").unwrap();
    let detection = dir.path().join("d.csv");
    let mut text = String::from("bin_start,score,threshold,alarm\n");
    for i in 0..200usize {
        text.push_str(&format!("{},0,1,0\n", i * 300));
    }
    fs::write(&detection, text).unwrap();
    let config = dir.path().join("eval.conf");
    fs::write(
        &config,
        format!(
            "input = {}\ntruth = {}\nresults = {}\n",
            series.display(),
            truth.display(),
            detection.display()
        ),
    )
    .unwrap();
    let out = run(&[
        "evaluate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{out:?}");
}

#[test]
fn evaluate_misaligned_result_is_an_alignment_error() {
    let dir = tempfile::tempdir().unwrap();
    let (series, truth) = write_spike_fixture(dir.path());
    let detection = dir.path().join("short.csv");
    let mut text = String::from("bin_start,score,threshold,alarm\n");
    for i in 0..50usize {
        text.push_str(&format!("{},0,1,0\n", i * 300));
    }
    fs::write(&detection, text).unwrap();
    let config = dir.path().join("eval.conf");
    fs::write(
        &config,
        format!(
            "input = {}\ntruth = {}\nresults = {}\n",
            series.display(),
            truth.display(),
            detection.display()
        ),
    )
    .unwrap();
    let out = run(&[
        "evaluate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(5), "{out:?}");
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "detect",
        "--input",
        dir.path().join("nope.csv").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4), "{out:?}");
}

#[test]
fn malformed_series_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "bin_start,a\n0,1\n300,notanumber\n").unwrap();
    let out = run(&[
        "detect",
        "--input",
        input.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn unknown_config_key_is_a_parameter_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    fs::write(&config, "no_such_key = 5\n").unwrap();
    let out = run(&["detect", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{out:?}");
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("no_such_key"),
        "error should name the bad key"
    );
}

#[test]
fn sweep_single_point_emits_three_subset_rows() {
    let dir = tempfile::tempdir().unwrap();
    // Simulate a mixed trace first.
    let sim_conf = dir.path().join("sim.conf");
    fs::write(&sim_conf, "bins = 1500\nwarmup_bins = 300\n").unwrap();
    let out = run(&[
        "simulate",
        "--config",
        sim_conf.to_str().unwrap(),
        "--seed",
        "7",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");

    let sweep_conf = dir.path().join("sweep.conf");
    fs::write(
        &sweep_conf,
        format!(
            "input = {}\ntruth = {}\ngrid_ell = 4\ntrain_bins = 300\nworkers = 2\n",
            dir.path().join("series.csv").display(),
            dir.path().join("truth.csv").display()
        ),
    )
    .unwrap();
    let out = run(&[
        "sweep",
        "--config",
        sweep_conf.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--k",
        "4",
    ]);
    assert!(out.status.success(), "{out:?}");
    let sweep = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<&str> = sweep
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("ell,"))
        .collect();
    // One grid point, one detector, up to three subsets (all/dos/port_scan);
    // the synthetic default mix contains all five types so every subset has
    // events.
    assert_eq!(rows.len(), 3, "{sweep}");
    assert!(rows.iter().all(|r| r.starts_with("4,4,")), "{sweep}");
}

#[test]
fn sweep_empty_grid_is_a_parameter_error() {
    let dir = tempfile::tempdir().unwrap();
    let (series, truth) = write_spike_fixture(dir.path());
    let conf = dir.path().join("sweep.conf");
    fs::write(
        &conf,
        format!(
            "input = {}\ntruth = {}\n",
            series.display(),
            truth.display()
        ),
    )
    .unwrap();
    let out = run(&["sweep", "--config", conf.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{out:?}");
}

/// Full pipeline: simulate, detect with two detectors, evaluate.
#[test]
fn pipeline_simulate_detect_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let sim_conf = dir.path().join("sim.conf");
    fs::write(&sim_conf, "bins = 2000\nwarmup_bins = 400\n").unwrap();
    let out = run(&[
        "simulate",
        "--config",
        sim_conf.to_str().unwrap(),
        "--seed",
        "11",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");

    let series = dir.path().join("series.csv");
    let det_conf = dir.path().join("det.conf");
    fs::write(&det_conf, "train_bins = 400\nslack_bins = 8\n").unwrap();
    let out = run(&[
        "detect",
        "--config",
        det_conf.to_str().unwrap(),
        "--input",
        series.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--detectors",
        "mssa,astute",
        "--ell",
        "8",
        "--k",
        "8",
    ]);
    assert!(out.status.success(), "{out:?}");

    let eval_conf = dir.path().join("eval.conf");
    fs::write(
        &eval_conf,
        format!(
            "input = {}\ntruth = {}\nresults = {},{}\nslack_bins = 8\n",
            series.display(),
            dir.path().join("truth.csv").display(),
            dir.path().join("detection_mssa.csv").display(),
            dir.path().join("detection_astute.csv").display()
        ),
    )
    .unwrap();
    let out = run(&[
        "evaluate",
        "--config",
        eval_conf.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    assert!(text.contains("mssa: AUC="), "{text}");
    assert!(text.contains("astute: AUC="), "{text}");
    assert!(dir.path().join("roc_mssa.csv").exists());
    assert!(dir.path().join("roc_astute.csv").exists());
}

#[test]
fn detect_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("series.csv");
    write_spike_fixture(dir.path());
    let conf = dir.path().join("det.conf");
    fs::write(&conf, "train_bins = 100\n").unwrap();
    let args = [
        "detect",
        "--config",
        conf.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--ell",
        "6",
        "--k",
        "3",
    ];
    assert!(run(&args).status.success());
    let first = fs::read(dir.path().join("detection_mssa.csv")).unwrap();
    assert!(run(&args).status.success());
    let second = fs::read(dir.path().join("detection_mssa.csv")).unwrap();
    assert_eq!(first, second, "detect must be idempotent");
}

/// A frequency change in the middle of a noisy sinusoid concentrates the
/// alarms inside the changed region.
#[test]
fn detect_flags_frequency_change_region() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("example.csv");
    // sin(0.2 t) switching to sin(0.3 t) for t in 176..=375, unit noise.
    let mut text = String::from("bin_start,y\n");
    let mut state = 0x12345678u64;
    let mut gauss = || {
        // Two-uniform Box-Muller from a tiny xorshift; fixture-only.
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        let u1 = (state >> 11) as f64 / (1u64 << 53) as f64;
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        let u2 = (state >> 11) as f64 / (1u64 << 53) as f64;
        (-2.0 * u1.max(1e-12).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    for t in 1..=560usize {
        let tt = t as f64;
        let clean = if (176..=375).contains(&t) {
            (0.3 * tt).sin()
        } else {
            (0.2 * tt).sin()
        };
        text.push_str(&format!("{},{}\n", (t - 1) * 300, clean + gauss()));
    }
    fs::write(&input, text).unwrap();
    let conf = dir.path().join("det.conf");
    fs::write(
        &conf,
        "train_bins = 175\nbeta = 0.001\nstandardize = false\n",
    )
    .unwrap();
    let out = run(&[
        "detect",
        "--config",
        conf.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--ell",
        "50",
        "--k",
        "4",
    ]);
    assert!(out.status.success(), "{out:?}");
    let detection = fs::read_to_string(dir.path().join("detection_mssa.csv")).unwrap();
    let mut inside = 0usize;
    let mut outside = 0usize;
    for (row, line) in detection
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("bin_start"))
        .enumerate()
    {
        let alarm = line.ends_with(",1");
        if alarm {
            let t = row + 1;
            // Changed region plus the window-attribution tail.
            if (176..=375 + 49).contains(&t) {
                inside += 1;
            } else {
                outside += 1;
            }
        }
    }
    assert!(
        inside >= 3,
        "expected several alarms in the changed region, got {inside}"
    );
    assert!(
        inside >= 4 * outside.max(1) || outside == 0,
        "alarms not concentrated: {inside} inside vs {outside} outside"
    );
}

/// The number of injected events tracks the interarrival expectation.
#[test]
fn simulate_event_count_matches_expectation() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("sim.conf");
    fs::write(&conf, "bins = 10000\n").unwrap();
    let out = run(&[
        "simulate",
        "--config",
        conf.to_str().unwrap(),
        "--seed",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let truth = fs::read_to_string(dir.path().join("truth.csv")).unwrap();
    let events = truth
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("type,") && !l.is_empty())
        .count() as f64;
    // Interarrival histogram: mean 171, variance 11919; renewal count over
    // n bins has mean n/mu and variance n*var/mu^3.
    let n = 10_000.0f64;
    let mu = 171.0f64;
    let expected = n / mu;
    let sigma = (n * 11919.0 / mu.powi(3)).sqrt();
    assert!(
        (events - expected).abs() <= 3.0 * sigma + 2.0,
        "{events} events vs expectation {expected:.1} (sigma {sigma:.1})"
    );
}

/// Raw flow-record input is aggregated into bins before detection.
#[test]
fn detect_accepts_flow_record_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("records.csv");
    let mut text = String::from("timestamp,src_ip,dst_ip,src_port,dst_port,protocol,packets\n");
    for i in 0..24_000u64 {
        let ts = i * 5; // 2000 seconds span -> 400 bins at 300 s... keep 120000 s
        text.push_str(&format!(
            "{},10.0.0.{},10.1.0.{},{},{},6,{}\n",
            ts,
            i % 20,
            i % 11,
            1000 + (i % 50),
            80 + (i % 3),
            3 + (i % 7)
        ));
    }
    fs::write(&input, text).unwrap();
    let conf = dir.path().join("det.conf");
    fs::write(&conf, "bin_seconds = 300\ntrain_bins = 200\n").unwrap();
    let out = run(&[
        "detect",
        "--config",
        conf.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--ell",
        "4",
        "--k",
        "3",
    ]);
    assert!(out.status.success(), "{out:?}");
    let detection = fs::read_to_string(dir.path().join("detection_mssa.csv")).unwrap();
    // 24000 records at 5 s spacing = 120000 s = 400 bins of 300 s.
    let rows = detection
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("bin_start"))
        .count();
    assert_eq!(rows, 400);
}
