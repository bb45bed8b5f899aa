//! Subcommand implementations on fully resolved settings.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use echoroom::equalizer::{design_eq_filter, design_eq_magnitude, flat_target};
use echoroom::estimators::{Dataset, Model};
use echoroom::eval::{
    band_mask, band_mean, cross_validate, format_g6, summarize, CvConfig, EstimatorSpec, Trained, BAND_HIGH_HZ, BAND_LOW_HZ,
    REPORT_PERCENTILES,
};
use echoroom::features::FeatureKind;
use echoroom::io::{
    load_dataset, load_model, load_record, parse_samples, save_dataset, save_model, taps_to_text, write_json, write_text, EqFile,
    Manifest, FORMAT_VERSION,
};
use echoroom::roomsim::{generate_dataset, GeneratorConfig};
use echoroom::spectra::log_power_spectrum;
use echoroom::{Impulse, Spectrum};
use serde::Serialize;
use serde_json::json;

/// Error that maps to the invalid-input exit status.
pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(echoroom::Error::InvalidInput(msg.into()))
}

pub(crate) fn with_pool<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .with_context(|| format!("starting {jobs} worker threads"))?;
    Ok(pool.install(f))
}

fn run_echo_path(out: &Path) -> PathBuf {
    out.with_extension("run.json")
}

fn load_training_set(dir: &Path) -> Result<(Manifest, Dataset<f64>)> {
    let (manifest, records) = load_dataset::<f64>(dir).with_context(|| format!("loading dataset {}", dir.display()))?;
    Ok((manifest, Dataset::new(records)?))
}

// ---------------------------------------------------------------- gen-data

#[derive(Debug, Clone, Serialize)]
pub struct GenDataSettings {
    pub rooms: usize,
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub out: PathBuf,
    #[serde(skip)]
    pub jobs: usize,
}

pub fn cmd_gen_data(s: &GenDataSettings) -> Result<Manifest> {
    let records = with_pool(s.jobs, || generate_dataset(&s.generator, s.rooms, s.seed))??;
    let manifest = save_dataset(&s.out, &records, s.seed, &s.generator)?;
    log::info!("wrote {} records to {}", records.len(), s.out.display());
    Ok(manifest)
}

// ---------------------------------------------------------------- features

#[derive(Debug, Clone, Serialize)]
pub struct FeaturesSettings {
    pub dataset: PathBuf,
    pub out: PathBuf,
}

pub fn cmd_features(s: &FeaturesSettings) -> Result<usize> {
    let (_, ds) = load_training_set(&s.dataset)?;
    let mut csv = String::from("record_id,rt30_ms,rolloff_db\n");
    let cell = |r: echoroom::Result<f64>| match r {
        Ok(v) => format_g6(v),
        Err(e) => {
            log::warn!("{e}");
            String::new()
        }
    };
    for (i, rec) in ds.records().iter().enumerate() {
        let rt = cell(FeatureKind::Rt30.evaluate(Some(&rec.echo_ir), &rec.echo_spectrum));
        let ro = cell(FeatureKind::LowFreqRolloff.evaluate(None, &rec.echo_spectrum));
        csv.push_str(&format!("{i},{rt},{ro}\n"));
    }
    write_text(&s.out, &csv)?;
    write_json(&run_echo_path(&s.out), &json!({ "version": FORMAT_VERSION, "command": "features", "settings": s }))?;
    Ok(ds.len())
}

// ------------------------------------------------------------------- train

#[derive(Debug, Clone, Serialize)]
pub struct TrainSettings {
    pub dataset: PathBuf,
    pub estimator: EstimatorSpec,
    pub out: PathBuf,
}

pub fn cmd_train(s: &TrainSettings) -> Result<Model<f64>> {
    if matches!(s.estimator, EstimatorSpec::Average | EstimatorSpec::Oracle) {
        return Err(usage(format!("est: `{}` cannot be trained into a model file; use ls, gpca or lpca", s.estimator.id())));
    }
    let (manifest, ds) = load_training_set(&s.dataset)?;
    let Trained::Model(model) = s.estimator.train(&ds)? else {
        unreachable!("parametric estimators train into models")
    };
    let training = json!({
        "estimator": s.estimator,
        "dataset": s.dataset,
        "dataset_seed": manifest.seed,
        "records": ds.len(),
    });
    save_model(&s.out, &model, training)?;
    log::info!("wrote {} model to {}", model.kind(), s.out.display());
    Ok(model)
}

// ----------------------------------------------------------------- predict

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EchoInput {
    Record(PathBuf),
    Ir { path: PathBuf, sample_rate: u32 },
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictSettings {
    pub model: PathBuf,
    pub input: EchoInput,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictOutcome {
    pub group: Option<String>,
    pub fallback: bool,
    #[serde(skip)]
    pub spectrum: Option<Spectrum>,
}

fn read_echo(input: &EchoInput, nfft: usize) -> Result<(Impulse, Spectrum)> {
    match input {
        EchoInput::Record(p) => {
            let rec = load_record::<f64>(p)?;
            if rec.nfft() != nfft {
                bail!(usage(format!("record: nfft {} does not match the model's {nfft}", rec.nfft())));
            }
            Ok((rec.echo_ir, rec.echo_spectrum))
        }
        EchoInput::Ir { path, sample_rate } => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let ir = Impulse::new(parse_samples(&text).map_err(|e| usage(format!("ir: {e}")))?, *sample_rate)?;
            let s = log_power_spectrum(&ir, nfft)?;
            Ok((ir, s))
        }
    }
}

fn predict_room(model_path: &Path, input: &EchoInput) -> Result<PredictOutcome> {
    let model = load_model::<f64>(model_path).with_context(|| format!("loading model {}", model_path.display()))?;
    let (ir, s) = read_echo(input, model.nfft())?;
    let p = model.predict(Some(&ir), &s)?;
    Ok(PredictOutcome { group: p.group.map(|g| g.to_string()), fallback: p.fallback, spectrum: Some(p.spectrum) })
}

pub fn cmd_predict(s: &PredictSettings) -> Result<PredictOutcome> {
    let outcome = predict_room(&s.model, &s.input)?;
    let r = outcome.spectrum.as_ref().expect("prediction present");
    let mut csv = String::from("bin_hz,r_hat_db\n");
    for (k, v) in r.bins().iter().enumerate() {
        csv.push_str(&format!("{},{}\n", format_g6(r.bin_hz(k)), format_g6(*v)));
    }
    write_text(&s.out, &csv)?;
    write_json(
        &run_echo_path(&s.out),
        &json!({ "version": FORMAT_VERSION, "command": "predict", "settings": s, "result": outcome }),
    )?;
    Ok(outcome)
}

/// Reads a `bin_hz,r_hat_db` CSV back into a spectrum.
pub fn read_room_curve(path: &Path) -> Result<Spectrum> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut hz = Vec::new();
    let mut db = Vec::new();
    for row in reader.deserialize::<(f64, f64)>() {
        let (f, v) = row.with_context(|| format!("parsing {}", path.display()))?;
        hz.push(f);
        db.push(v);
    }
    if hz.len() < 2 {
        bail!(usage(format!("r-hat: {} has fewer than two bins", path.display())));
    }
    let nfft = 2 * (hz.len() - 1);
    let sample_rate = (hz[1] * nfft as f64).round() as u32;
    Ok(Spectrum::new(db, sample_rate, nfft).map_err(|e| usage(format!("r-hat: {e}")))?)
}

// ------------------------------------------------------------------ design

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RoomInput {
    RHat(PathBuf),
    Model { model: PathBuf, input: EchoInput },
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignSettings {
    pub room: RoomInput,
    pub shelf_db: f64,
    pub corner_hz: f64,
    pub clamp_db: (f64, f64),
    pub fir_length: usize,
    pub smooth_octave: Option<f64>,
    pub out: PathBuf,
}

pub fn cmd_design(s: &DesignSettings) -> Result<EqFile> {
    let r_hat = match &s.room {
        RoomInput::RHat(p) => read_room_curve(p)?,
        RoomInput::Model { model, input } => predict_room(model, input)?.spectrum.expect("prediction present"),
    };
    let target = flat_target(r_hat.nfft(), r_hat.sample_rate(), s.shelf_db, s.corner_hz)?;
    let mut magnitude = design_eq_magnitude(&r_hat, &target, s.clamp_db)?;
    if let Some(n) = s.smooth_octave {
        magnitude = magnitude.smoothed(n)?;
    }
    let filter = design_eq_filter(&magnitude, s.fir_length)?;
    let file = EqFile::new(&filter, &target, serde_json::to_value(s)?);
    std::fs::create_dir_all(&s.out).with_context(|| format!("creating {}", s.out.display()))?;
    write_json(&s.out.join("eq.json"), &file)?;
    write_text(&s.out.join("taps.txt"), &taps_to_text(filter.taps.samples()))?;
    let clamped = magnitude.clamped.iter().filter(|&&c| c).count();
    if clamped > 0 {
        log::info!("{clamped} bins hit the clamp");
    }
    Ok(file)
}

// ---------------------------------------------------------------- evaluate

#[derive(Debug, Clone, Serialize)]
pub struct EvaluateSettings {
    pub dataset: PathBuf,
    pub estimators: Vec<EstimatorSpec>,
    pub n_train: usize,
    pub n_val: usize,
    pub repeats: usize,
    pub seed: u64,
    pub out: PathBuf,
    #[serde(skip)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimatorResult {
    pub estimator: String,
    pub report: PathBuf,
    pub repeats_ok: usize,
    pub failures: Vec<echoroom::eval::RepeatFailure>,
    /// Band 100 Hz to 7 kHz.
    pub band_mean_db: f64,
    pub band_p95_db: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluateOutcome {
    pub results: Vec<EstimatorResult>,
}

impl EvaluateOutcome {
    pub fn failed_repeats(&self) -> usize {
        self.results.iter().map(|r| r.failures.len()).sum()
    }
}

fn report_name(id: &str, taken: &mut Vec<String>) -> String {
    let mut name = format!("report_{id}.csv");
    let mut n = 2;
    while taken.contains(&name) {
        name = format!("report_{id}_{n}.csv");
        n += 1;
    }
    taken.push(name.clone());
    name
}

pub fn cmd_evaluate(s: &EvaluateSettings) -> Result<EvaluateOutcome> {
    if s.estimators.is_empty() {
        return Err(usage("est: at least one estimator is required"));
    }
    let (_, ds) = load_training_set(&s.dataset)?;
    let cfg = CvConfig { n_train: s.n_train, n_val: s.n_val, repeats: s.repeats, seed: s.seed, jobs: s.jobs };
    std::fs::create_dir_all(&s.out).with_context(|| format!("creating {}", s.out.display()))?;
    let mut taken = Vec::new();
    let mut results = Vec::new();
    for spec in &s.estimators {
        log::info!("evaluating {spec}");
        let surface = cross_validate(&ds, spec, &cfg)?;
        let name = report_name(&spec.id(), &mut taken);
        let (band_mean_db, band_p95_db) = if surface.sample_count() > 0 {
            let report = summarize(&surface, &REPORT_PERCENTILES)?;
            write_text(&s.out.join(&name), &report.to_csv())?;
            let mask = band_mask(&report.bin_hz, BAND_LOW_HZ, BAND_HIGH_HZ);
            (band_mean(&report.mean_db, &mask), band_mean(report.percentile(95.0).expect("p95 requested"), &mask))
        } else {
            log::error!("{spec}: every repeat failed; no report written");
            (f64::NAN, f64::NAN)
        };
        results.push(EstimatorResult {
            estimator: spec.to_string(),
            report: PathBuf::from(name),
            repeats_ok: surface.repeats.len(),
            failures: surface.failures,
            band_mean_db,
            band_p95_db,
        });
    }
    let outcome = EvaluateOutcome { results };
    write_json(
        &s.out.join("run.json"),
        &json!({ "version": FORMAT_VERSION, "command": "evaluate", "settings": s, "results": outcome.results }),
    )?;
    Ok(outcome)
}
