//! Estimation error metric, repeated cross-validation and percentile
//! reports.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimators::{
    train_global_pca, train_local_pca, train_ls, Dataset, Model, DEFAULT_KR, DEFAULT_KS_GLOBAL, DEFAULT_KS_LOCAL, DEFAULT_MU,
};
use crate::features::{FeatureKind, DEFAULT_TAIL_PROB};
use crate::num::Real;
use crate::roomsim::DatasetRecord;
use crate::spectra::{bin_hz, LogPowerSpectrum};

pub const BAND_LOW_HZ: f64 = 100.0;
pub const BAND_HIGH_HZ: f64 = 7000.0;
pub const REPORT_PERCENTILES: [f64; 2] = [50.0, 95.0];

/// `|r - r_hat|` per bin.
pub fn error_spectrum<T: Real>(r: &LogPowerSpectrum<T>, r_hat: &LogPowerSpectrum<T>) -> Result<Vec<T>> {
    if r.len() != r_hat.len() {
        return Err(invalid(format!("spectra have {} and {} bins", r.len(), r_hat.len())));
    }
    Ok(r.bins().iter().zip(r_hat.bins()).map(|(&a, &b)| (a - b).abs()).collect())
}

/// Estimator under test, with its hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EstimatorSpec {
    /// Training-split mean of the room curves.
    Average,
    /// Returns the true room curve; a test double.
    Oracle,
    Ls { mu: f64 },
    GlobalPca { ks: usize, kr: usize },
    LocalPca { feature: FeatureKind, q: f64, ks: usize, kr: usize },
}

impl EstimatorSpec {
    /// Short name used for report files.
    pub fn id(&self) -> String {
        match self {
            EstimatorSpec::Average => "average".into(),
            EstimatorSpec::Oracle => "oracle".into(),
            EstimatorSpec::Ls { .. } => "ls".into(),
            EstimatorSpec::GlobalPca { .. } => "gpca".into(),
            EstimatorSpec::LocalPca { feature: FeatureKind::Rt30, .. } => "lpca-rt".into(),
            EstimatorSpec::LocalPca { feature: FeatureKind::LowFreqRolloff, .. } => "lpca-rolloff".into(),
        }
    }

    pub fn train<T: Real>(&self, train: &Dataset<T>) -> Result<Trained<T>> {
        Ok(match *self {
            EstimatorSpec::Average => Trained::Average(train.room_mean()),
            EstimatorSpec::Oracle => Trained::Oracle,
            EstimatorSpec::Ls { mu } => Trained::Model(Model::Ls(train_ls(train, T::lit(mu))?)),
            EstimatorSpec::GlobalPca { ks, kr } => Trained::Model(Model::GlobalPca(train_global_pca(train, ks, kr)?)),
            EstimatorSpec::LocalPca { feature, q, ks, kr } => {
                Trained::Model(Model::LocalPca(train_local_pca(train, feature, q, ks, kr)?))
            }
        })
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorSpec::Average | EstimatorSpec::Oracle => write!(f, "{}", self.id()),
            EstimatorSpec::Ls { mu } => write!(f, "ls:mu={mu}"),
            EstimatorSpec::GlobalPca { ks, kr } => write!(f, "gpca:ks={ks},kr={kr}"),
            EstimatorSpec::LocalPca { q, ks, kr, .. } => write!(f, "{}:ks={ks},kr={kr},q={q}", self.id()),
        }
    }
}

/// Parses `name[:key=value,...]`, e.g. `ls:mu=0.001`, `gpca:ks=240,kr=32`
/// or `lpca-rt:ks=80,kr=32,q=0.22`. Omitted keys take their defaults.
impl FromStr for EstimatorSpec {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = s.split_once(':').unwrap_or((s, ""));
        let mut kv = Vec::new();
        for item in params.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| invalid(format!("estimator parameter `{item}` is not key=value")))?;
            kv.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
        }
        let name = name.trim().to_ascii_lowercase();
        let allowed: &[&str] = match name.as_str() {
            "average" | "avg" | "oracle" => &[],
            "ls" => &["mu"],
            "gpca" => &["ks", "kr"],
            "lpca-rt" | "lpca-rolloff" | "lpca" => &["ks", "kr", "q", "feature"],
            other => return Err(invalid(format!("unknown estimator `{other}`"))),
        };
        if let Some((k, _)) = kv.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(invalid(format!("estimator `{name}` has no parameter `{k}`")));
        }
        let get = |key: &str| kv.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        fn num<N: FromStr>(key: &str, v: Option<&str>, default: N) -> Result<N> {
            v.map_or(Ok(default), |v| v.parse().map_err(|_| invalid(format!("estimator parameter {key}: cannot parse `{v}`"))))
        }
        Ok(match name.as_str() {
            "average" | "avg" => EstimatorSpec::Average,
            "oracle" => EstimatorSpec::Oracle,
            "ls" => EstimatorSpec::Ls { mu: num("mu", get("mu"), DEFAULT_MU)? },
            "gpca" => EstimatorSpec::GlobalPca {
                ks: num("ks", get("ks"), DEFAULT_KS_GLOBAL)?,
                kr: num("kr", get("kr"), DEFAULT_KR)?,
            },
            _ => {
                let default_feature = if name == "lpca-rolloff" { FeatureKind::LowFreqRolloff } else { FeatureKind::Rt30 };
                EstimatorSpec::LocalPca {
                    feature: num("feature", get("feature"), default_feature)?,
                    q: num("q", get("q"), DEFAULT_TAIL_PROB)?,
                    ks: num("ks", get("ks"), DEFAULT_KS_LOCAL)?,
                    kr: num("kr", get("kr"), DEFAULT_KR)?,
                }
            }
        })
    }
}

/// Estimator fitted on one training split.
#[derive(Debug, Clone)]
pub enum Trained<T> {
    Average(Vec<T>),
    Oracle,
    Model(Model<T>),
}

impl<T: Real> Trained<T> {
    pub fn predict(&self, record: &DatasetRecord<T>) -> Result<LogPowerSpectrum<T>> {
        match self {
            Trained::Average(mean) => record.echo_spectrum.with_bins(mean.clone()),
            Trained::Oracle => Ok(record.room_avg_spectrum.clone()),
            Trained::Model(m) => Ok(m.predict_record(record)?.spectrum),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Worker threads; 0 uses the global pool.
    pub jobs: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { n_train: 300, n_val: 100, repeats: 50, seed: 0, jobs: 0 }
    }
}

/// Train/validation indices for `repeat`. The split depends only on
/// `(seed, repeat)` and the dataset size, so every estimator sees the
/// same splits.
pub fn cv_split(records: usize, n_train: usize, n_val: usize, seed: u64, repeat: usize) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(repeat as u64);
    let mut idx: Vec<usize> = (0..records).collect();
    idx.shuffle(&mut rng);
    let val = idx[n_train..n_train + n_val].to_vec();
    idx.truncate(n_train);
    (idx, val)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatErrors<T> {
    pub repeat: usize,
    /// Validation dataset indices, in evaluation order.
    pub records: Vec<usize>,
    /// One error curve per validation record.
    pub curves: Vec<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatFailure {
    pub repeat: usize,
    pub message: String,
}

/// Error curves indexed by (repeat, record, bin).
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSurface<T> {
    pub estimator: EstimatorSpec,
    pub config: CvConfig,
    pub bin_hz: Vec<f64>,
    pub repeats: Vec<RepeatErrors<T>>,
    pub failures: Vec<RepeatFailure>,
}

impl<T: Real> ErrorSurface<T> {
    pub fn bins(&self) -> usize {
        self.bin_hz.len()
    }

    pub fn sample_count(&self) -> usize {
        self.repeats.iter().map(|r| r.curves.len()).sum()
    }

    /// All samples at bin `k`, pooled over repeats and records.
    pub fn samples_at(&self, k: usize) -> Vec<T> {
        self.repeats.iter().flat_map(|r| r.curves.iter().map(move |c| c[k])).collect()
    }
}

fn run_repeat<T: Real>(dataset: &Dataset<T>, spec: &EstimatorSpec, cfg: &CvConfig, repeat: usize) -> Result<RepeatErrors<T>> {
    let (train_idx, val_idx) = cv_split(dataset.len(), cfg.n_train, cfg.n_val, cfg.seed, repeat);
    let trained = spec.train(&dataset.subset(&train_idx)?)?;
    let curves = val_idx
        .iter()
        .map(|&i| {
            let rec = &dataset.records()[i];
            error_spectrum(&rec.room_avg_spectrum, &trained.predict(rec)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RepeatErrors { repeat, records: val_idx, curves })
}

/// Repeated random-split cross-validation. Repeats that fail to train are
/// recorded in `failures` and left out of the surface.
pub fn cross_validate<T: Real>(dataset: &Dataset<T>, spec: &EstimatorSpec, cfg: &CvConfig) -> Result<ErrorSurface<T>> {
    if cfg.repeats == 0 {
        return Err(invalid("repeats must be at least 1"));
    }
    if cfg.n_train == 0 || cfg.n_val == 0 {
        return Err(invalid("n_train and n_val must be at least 1"));
    }
    if cfg.n_train + cfg.n_val > dataset.len() {
        return Err(invalid(format!(
            "n_train + n_val = {} exceeds the {} records available",
            cfg.n_train + cfg.n_val,
            dataset.len()
        )));
    }
    let work = || -> Vec<Result<RepeatErrors<T>>> {
        (0..cfg.repeats).into_par_iter().map(|r| run_repeat(dataset, spec, cfg, r)).collect()
    };
    let results = if cfg.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| invalid(format!("cannot start {} worker threads: {e}", cfg.jobs)))?
            .install(work)
    } else {
        work()
    };
    let mut repeats = Vec::new();
    let mut failures = Vec::new();
    for (repeat, r) in results.into_iter().enumerate() {
        match r {
            Ok(e) => repeats.push(e),
            Err(e) => {
                log::warn!("{spec}: repeat {repeat} failed: {e}");
                failures.push(RepeatFailure { repeat, message: e.to_string() });
            }
        }
    }
    let (nfft, fs) = (dataset.nfft(), dataset.sample_rate());
    Ok(ErrorSurface {
        estimator: *spec,
        config: *cfg,
        bin_hz: (0..dataset.bins()).map(|k| bin_hz(k, fs, nfft)).collect(),
        repeats,
        failures,
    })
}

/// Nearest-rank percentile: the `ceil(p/100 n)`-th smallest sample.
pub fn nearest_rank<T: Real>(sorted: &[T], p: f64) -> T {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Per-bin nearest-rank percentile over every (repeat, record) sample.
pub fn percentile_curve<T: Real>(surface: &ErrorSurface<T>, p: f64) -> Result<Vec<T>> {
    if !(p > 0.0 && p <= 100.0) {
        return Err(invalid(format!("percentile {p} must lie in (0, 100]")));
    }
    if surface.sample_count() == 0 {
        return Err(invalid("error surface is empty"));
    }
    Ok((0..surface.bins())
        .map(|k| {
            let mut v = surface.samples_at(k);
            v.sort_by(|a, b| a.partial_cmp(b).expect("errors are finite"));
            nearest_rank(&v, p)
        })
        .collect())
}

/// Per-bin statistics of an error surface.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub bin_hz: Vec<f64>,
    pub mean_db: Vec<f64>,
    /// Population standard deviation.
    pub std_db: Vec<f64>,
    pub percentiles: Vec<(f64, Vec<f64>)>,
}

pub fn summarize<T: Real>(surface: &ErrorSurface<T>, percentiles: &[f64]) -> Result<Report> {
    let n = surface.sample_count();
    if n == 0 {
        return Err(invalid("error surface is empty"));
    }
    let mut mean_db = Vec::with_capacity(surface.bins());
    let mut std_db = Vec::with_capacity(surface.bins());
    for k in 0..surface.bins() {
        let v: Vec<f64> = surface.samples_at(k).into_iter().map(Real::as_f64).collect();
        let m = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
        mean_db.push(m);
        std_db.push(var.sqrt());
    }
    let percentiles = percentiles
        .iter()
        .map(|&p| Ok((p, percentile_curve(surface, p)?.into_iter().map(Real::as_f64).collect())))
        .collect::<Result<_>>()?;
    Ok(Report { bin_hz: surface.bin_hz.clone(), mean_db, std_db, percentiles })
}

/// `%g`-style formatting with 6 significant digits.
pub fn format_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{x:.*}", (5 - exp) as usize)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

impl Report {
    pub fn header(&self) -> String {
        let mut h = String::from("bin_hz,mean_db,std_db");
        for (p, _) in &self.percentiles {
            h.push_str(&format!(",p{}_db", format_g6(*p)));
        }
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header();
        out.push('\n');
        for k in 0..self.bin_hz.len() {
            let mut row = vec![format_g6(self.bin_hz[k]), format_g6(self.mean_db[k]), format_g6(self.std_db[k])];
            row.extend(self.percentiles.iter().map(|(_, c)| format_g6(c[k])));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn percentile(&self, p: f64) -> Option<&[f64]> {
        self.percentiles.iter().find(|(q, _)| *q == p).map(|(_, c)| c.as_slice())
    }
}

/// Bins whose centre frequency lies in `[lo_hz, hi_hz]`.
pub fn band_mask(bin_hz: &[f64], lo_hz: f64, hi_hz: f64) -> Vec<bool> {
    bin_hz.iter().map(|&f| f >= lo_hz && f <= hi_hz).collect()
}

/// Mean of `curve` over the masked bins.
pub fn band_mean(curve: &[f64], mask: &[bool]) -> f64 {
    let (sum, n) = curve.iter().zip(mask).filter(|(_, &m)| m).fold((0.0, 0usize), |(s, n), (&x, _)| (s + x, n + 1));
    sum / n.max(1) as f64
}

/// Fraction of masked bins at which `a <= b`.
pub fn fraction_le(a: &[f64], b: &[f64], mask: &[bool]) -> f64 {
    let (hit, n) = a
        .iter()
        .zip(b)
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((0usize, 0usize), |(h, n), ((x, y), _)| (h + usize::from(x <= y), n + 1));
    hit as f64 / n.max(1) as f64
}
