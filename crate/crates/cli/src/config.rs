//! Flat key-value run configuration with flag overrides.
//!
//! The config file holds one `key = value` pair per line (`#` comments);
//! command-line flags win over file values. Unknown keys are rejected so
//! sweep manifests stay trustworthy.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use flowspect_core::baselines::{AstuteConfig, FourierConfig, KalmanConfig, WaveletConfig};
use flowspect_core::mssa::{DetectorConfig, KSelection, QBetaVariant, ThresholdMode};
use flowspect_core::{Error, Result};

pub const KNOWN_KEYS: [&str; 27] = [
    "input",
    "out",
    "seed",
    "detectors",
    "slack_bins",
    "ell",
    "k",
    "beta",
    "train_bins",
    "standardize",
    "fit_on_all",
    "threshold",
    "q_compat",
    "target_fpr",
    "fourier_cutoff_seconds",
    "wavelet_levels",
    "wavelet_cutoff",
    "kalman_process_var",
    "kalman_obs_var",
    "bins",
    "bin_seconds",
    "warmup_bins",
    "profiles",
    "results",
    "truth",
    "grid_ell",
    "workers",
];
// grid_k, grid_beta and tpr_fpr are also accepted; see `is_known`.

fn is_known(key: &str) -> bool {
    KNOWN_KEYS.contains(&key) || matches!(key, "grid_k" | "grid_beta" | "tpr_fpr")
}

/// Everything a command might need, with defaults filled in.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub detectors: Vec<String>,
    pub slack_bins: usize,

    pub ell: usize,
    pub k: KSelection<f64>,
    pub beta: f64,
    pub train_bins: usize,
    pub standardize: bool,
    pub fit_on_all: bool,
    pub threshold: ThresholdMode<f64>,
    pub q_compat: bool,

    pub target_fpr: f64,
    pub fourier_cutoff_seconds: f64,
    pub wavelet_levels: usize,
    pub wavelet_cutoff: usize,
    pub kalman_process_var: Option<f64>,
    pub kalman_obs_var: Option<f64>,

    pub bins: usize,
    pub bin_seconds: u64,
    pub warmup_bins: usize,
    pub profiles: Vec<String>,

    pub results: Vec<PathBuf>,
    pub truth: Option<PathBuf>,

    pub grid_ell: Vec<usize>,
    pub grid_k: Vec<KSelection<f64>>,
    pub grid_beta: Vec<f64>,
    pub workers: usize,
    pub tpr_fpr: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            out: PathBuf::from("."),
            seed: 0,
            detectors: vec!["mssa".to_string()],
            slack_bins: 1,
            ell: 8,
            k: KSelection::Fixed(8),
            beta: 1e-3,
            train_bins: 256,
            standardize: true,
            fit_on_all: false,
            threshold: ThresholdMode::QBeta,
            q_compat: false,
            target_fpr: 2e-5,
            fourier_cutoff_seconds: 7200.0,
            wavelet_levels: 3,
            wavelet_cutoff: 3,
            kalman_process_var: None,
            kalman_obs_var: None,
            bins: 2000,
            bin_seconds: 300,
            warmup_bins: 0,
            profiles: vec!["synthetic".to_string()],
            results: Vec::new(),
            truth: None,
            grid_ell: Vec::new(),
            grid_k: Vec::new(),
            grid_beta: Vec::new(),
            workers: 4,
            tpr_fpr: 1e-4,
        }
    }
}

fn parse_bool(key: &'static str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::parameter(
            key,
            format!("expected a boolean, got `{other}`"),
        )),
    }
}

fn parse_num<T: std::str::FromStr>(key: &'static str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::parameter(key, format!("could not parse `{v}`")))
}

fn parse_k(v: &str) -> Result<KSelection<f64>> {
    if v == "auto" {
        return Ok(KSelection::Auto { cutoff: 0.3 });
    }
    if let Some(rest) = v.strip_prefix("auto:") {
        return Ok(KSelection::Auto {
            cutoff: parse_num::<f64>("k", rest)?,
        });
    }
    Ok(KSelection::Fixed(parse_num::<usize>("k", v)?))
}

fn parse_threshold(v: &str) -> Result<ThresholdMode<f64>> {
    if v == "qbeta" {
        return Ok(ThresholdMode::QBeta);
    }
    if let Some(rest) = v.strip_prefix("fixed:") {
        return Ok(ThresholdMode::Fixed(parse_num::<f64>("threshold", rest)?));
    }
    Err(Error::parameter(
        "threshold",
        format!("expected `qbeta` or `fixed:<value>`, got `{v}`"),
    ))
}

fn split_list(v: &str) -> Vec<String> {
    v.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

impl RunConfig {
    /// Reads a config file into a key map; later lines win.
    pub fn read_file(path: &Path) -> Result<BTreeMap<String, String>> {
        let text = std::fs::read_to_string(path)?;
        let mut map = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(line_no, format!("expected `key = value`, got `{line}`"))
            })?;
            let key = key.trim().to_string();
            if !is_known(&key) {
                return Err(Error::parameter(
                    "config",
                    format!("unknown key `{key}` at line {line_no}"),
                ));
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(map)
    }

    /// Applies one key, validating the value.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "seed" => self.seed = parse_num("seed", value)?,
            "detectors" => self.detectors = split_list(value),
            "slack_bins" => self.slack_bins = parse_num("slack_bins", value)?,
            "ell" => self.ell = parse_num("ell", value)?,
            "k" => self.k = parse_k(value)?,
            "beta" => self.beta = parse_num("beta", value)?,
            "train_bins" => self.train_bins = parse_num("train_bins", value)?,
            "standardize" => self.standardize = parse_bool("standardize", value)?,
            "fit_on_all" => self.fit_on_all = parse_bool("fit_on_all", value)?,
            "threshold" => self.threshold = parse_threshold(value)?,
            "q_compat" => self.q_compat = parse_bool("q_compat", value)?,
            "target_fpr" => self.target_fpr = parse_num("target_fpr", value)?,
            "fourier_cutoff_seconds" => {
                self.fourier_cutoff_seconds = parse_num("fourier_cutoff_seconds", value)?
            }
            "wavelet_levels" => self.wavelet_levels = parse_num("wavelet_levels", value)?,
            "wavelet_cutoff" => self.wavelet_cutoff = parse_num("wavelet_cutoff", value)?,
            "kalman_process_var" => {
                self.kalman_process_var = Some(parse_num("kalman_process_var", value)?)
            }
            "kalman_obs_var" => self.kalman_obs_var = Some(parse_num("kalman_obs_var", value)?),
            "bins" => self.bins = parse_num("bins", value)?,
            "bin_seconds" => self.bin_seconds = parse_num("bin_seconds", value)?,
            "warmup_bins" => self.warmup_bins = parse_num("warmup_bins", value)?,
            "profiles" => self.profiles = split_list(value),
            "results" => self.results = split_list(value).into_iter().map(PathBuf::from).collect(),
            "truth" => self.truth = Some(PathBuf::from(value)),
            "grid_ell" => {
                self.grid_ell = split_list(value)
                    .iter()
                    .map(|v| parse_num::<usize>("grid_ell", v))
                    .collect::<Result<_>>()?
            }
            "grid_k" => {
                self.grid_k = split_list(value)
                    .iter()
                    .map(|v| parse_k(v))
                    .collect::<Result<_>>()?
            }
            "grid_beta" => {
                self.grid_beta = split_list(value)
                    .iter()
                    .map(|v| parse_num::<f64>("grid_beta", v))
                    .collect::<Result<_>>()?
            }
            "workers" => self.workers = parse_num::<usize>("workers", value)?.max(1),
            "tpr_fpr" => self.tpr_fpr = parse_num("tpr_fpr", value)?,
            other => return Err(Error::parameter("config", format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn detector_config(&self) -> DetectorConfig<f64> {
        DetectorConfig {
            ell: self.ell,
            k: self.k,
            beta: self.beta,
            train_bins: self.train_bins,
            threshold_mode: self.threshold,
            standardize: self.standardize,
            fit_on_all: self.fit_on_all,
            q_variant: if self.q_compat {
                QBetaVariant::OneMinusBeta
            } else {
                QBetaVariant::NormalQuantile
            },
        }
    }

    pub fn fourier_config(&self) -> FourierConfig {
        FourierConfig {
            cutoff_period_seconds: self.fourier_cutoff_seconds,
            target_fpr: self.target_fpr,
            train_bins: self.train_bins,
            standardize: self.standardize,
        }
    }

    pub fn wavelet_config(&self) -> WaveletConfig {
        WaveletConfig {
            levels: self.wavelet_levels,
            cutoff_level: self.wavelet_cutoff,
            target_fpr: self.target_fpr,
            train_bins: self.train_bins,
            standardize: self.standardize,
        }
    }

    pub fn kalman_config(&self) -> KalmanConfig {
        KalmanConfig {
            target_fpr: self.target_fpr,
            process_var: self.kalman_process_var,
            obs_var: self.kalman_obs_var,
            train_bins: self.train_bins,
        }
    }

    pub fn astute_config(&self) -> AstuteConfig {
        AstuteConfig {
            target_fpr: self.target_fpr,
            train_bins: self.train_bins,
            standardize: self.standardize,
        }
    }
}
