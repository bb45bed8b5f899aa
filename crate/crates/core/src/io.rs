//! On-disk formats: datasets, models and equalizer filters.
//!
//! Floats are written with 17 significant digits, which reproduces every
//! `f64` exactly on reload.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

use crate::equalizer::{EqFilter, TargetCurve};
use crate::error::{invalid, Error, Result};
use crate::estimators::{GlobalPcaModel, LocalPcaModel, LsModel, Model, PcaBasis};
use crate::features::{FeatureKind, GroupThresholds};
use crate::linalg::Matrix;
use crate::num::Real;
use crate::roomsim::{DatasetRecord, GeneratorConfig, RecordMeta};
use crate::spectra::{ImpulseResponse, LogPowerSpectrum};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Pretty JSON with full-precision floats.
struct PreciseFormatter(PrettyFormatter<'static>);

impl Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(w, value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes `value` as pretty JSON with 17-digit floats.
pub fn to_json_string<S: Serialize>(value: &S) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PreciseFormatter(PrettyFormatter::with_indent(b" ")));
    value.serialize(&mut ser).expect("in-memory serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn json_err(path: &Path, source: serde_json::Error) -> Error {
    Error::Json { path: path.display().to_string(), source }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    write_text(path, &to_json_string(value))
}

/// Reads a versioned JSON file, rejecting versions newer than this build.
pub fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| json_err(path, e))?;
    let version = value
        .get("version")
        .and_then(Value::as_u64)
        .ok_or_else(|| invalid(format!("{}: missing integer `version` field", path.display())))?;
    if version > FORMAT_VERSION as u64 {
        return Err(Error::UnsupportedVersion { found: version.min(u32::MAX as u64) as u32, supported: FORMAT_VERSION });
    }
    serde_json::from_value(value).map_err(|e| json_err(path, e))
}

fn to_f64<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn from_f64<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

// ---------------------------------------------------------------- datasets

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub record_count: usize,
    pub nfft: usize,
    pub sample_rate: u32,
    pub config: GeneratorConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RecordFile {
    version: u32,
    index: usize,
    sample_rate: u32,
    nfft: usize,
    echo_ir: Vec<f64>,
    echo_spectrum: Vec<f64>,
    room_avg_spectrum: Vec<f64>,
    #[serde(default)]
    meta: Option<RecordMeta>,
}

pub fn record_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("rec_{index}.json"))
}

pub fn save_record<T: Real>(path: &Path, index: usize, record: &DatasetRecord<T>) -> Result<()> {
    write_json(
        path,
        &RecordFile {
            version: FORMAT_VERSION,
            index,
            sample_rate: record.sample_rate(),
            nfft: record.nfft(),
            echo_ir: to_f64(record.echo_ir.samples()),
            echo_spectrum: to_f64(record.echo_spectrum.bins()),
            room_avg_spectrum: to_f64(record.room_avg_spectrum.bins()),
            meta: record.meta.clone(),
        },
    )
}

pub fn load_record<T: Real>(path: &Path) -> Result<DatasetRecord<T>> {
    let f: RecordFile = read_json(path)?;
    let ctx = |e: Error| match e {
        Error::InvalidInput(m) => invalid(format!("{}: {m}", path.display())),
        other => other,
    };
    let ir = ImpulseResponse::new(from_f64(&f.echo_ir), f.sample_rate).map_err(ctx)?;
    let s = LogPowerSpectrum::new(from_f64(&f.echo_spectrum), f.sample_rate, f.nfft).map_err(ctx)?;
    let r = LogPowerSpectrum::new(from_f64(&f.room_avg_spectrum), f.sample_rate, f.nfft).map_err(ctx)?;
    DatasetRecord::new(ir, s, r, f.meta).map_err(ctx)
}

/// Writes `manifest.json` plus `rec_<idx>.json` for each record.
pub fn save_dataset<T: Real>(dir: &Path, records: &[DatasetRecord<T>], seed: u64, config: &GeneratorConfig) -> Result<Manifest> {
    let first = records.first().ok_or_else(|| invalid("cannot save an empty dataset"))?;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for (i, rec) in records.iter().enumerate() {
        save_record(&record_path(dir, i), i, rec)?;
    }
    let manifest = Manifest {
        version: FORMAT_VERSION,
        seed,
        record_count: records.len(),
        nfft: first.nfft(),
        sample_rate: first.sample_rate(),
        config: config.clone(),
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn load_dataset<T: Real>(dir: &Path) -> Result<(Manifest, Vec<DatasetRecord<T>>)> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST_FILE))?;
    let records = (0..manifest.record_count)
        .map(|i| load_record(&record_path(dir, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, records))
}

// ------------------------------------------------------------------ models

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MatrixBody {
    rows: usize,
    cols: usize,
    /// Column-major.
    data: Vec<f64>,
}

impl MatrixBody {
    fn from_matrix<T: Real>(m: &Matrix<T>) -> Self {
        Self { rows: m.rows(), cols: m.cols(), data: to_f64(&m.to_col_major()) }
    }

    fn to_matrix<T: Real>(&self) -> Result<Matrix<T>> {
        Matrix::from_col_major(self.rows, self.cols, &from_f64::<T>(&self.data))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PcaBody {
    mean: Vec<f64>,
    components: MatrixBody,
    singular_values: Vec<f64>,
    requested_order: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GpcaBody {
    basis_s: PcaBody,
    basis_r: PcaBody,
    map: MatrixBody,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LsBody {
    mu: f64,
    gain: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ThresholdBody {
    low: f64,
    high: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LpcaBody {
    feature: FeatureKind,
    thresholds: ThresholdBody,
    groups: Vec<GpcaBody>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    kind: String,
    nfft: usize,
    sample_rate: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ls: Option<LsBody>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gpca: Option<GpcaBody>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lpca: Option<LpcaBody>,
    /// Free-form record of how the model was trained.
    #[serde(default, skip_serializing_if = "Value::is_null")]
    training: Value,
}

fn pca_body<T: Real>(b: &PcaBasis<T>) -> PcaBody {
    PcaBody {
        mean: to_f64(b.mean()),
        components: MatrixBody::from_matrix(b.components()),
        singular_values: to_f64(b.singular_values()),
        requested_order: b.requested_order(),
    }
}

fn pca_from<T: Real>(b: &PcaBody) -> Result<PcaBasis<T>> {
    PcaBasis::from_parts(from_f64(&b.mean), b.components.to_matrix()?, from_f64(&b.singular_values), b.requested_order)
}

fn gpca_body<T: Real>(m: &GlobalPcaModel<T>) -> GpcaBody {
    GpcaBody { basis_s: pca_body(m.basis_s()), basis_r: pca_body(m.basis_r()), map: MatrixBody::from_matrix(m.map()) }
}

fn gpca_from<T: Real>(b: &GpcaBody, nfft: usize, sample_rate: u32) -> Result<GlobalPcaModel<T>> {
    GlobalPcaModel::from_parts(pca_from(&b.basis_s)?, pca_from(&b.basis_r)?, b.map.to_matrix()?, nfft, sample_rate)
}

/// Writes `model` with an optional echo of its training parameters.
pub fn save_model<T: Real>(path: &Path, model: &Model<T>, training: Value) -> Result<()> {
    let mut file = ModelFile {
        version: FORMAT_VERSION,
        kind: model.kind().to_string(),
        nfft: model.nfft(),
        sample_rate: model.sample_rate(),
        ls: None,
        gpca: None,
        lpca: None,
        training,
    };
    match model {
        Model::Ls(m) => file.ls = Some(LsBody { mu: m.mu().as_f64(), gain: to_f64(m.gain()) }),
        Model::GlobalPca(m) => file.gpca = Some(gpca_body(m)),
        Model::LocalPca(m) => {
            let th = m.thresholds();
            file.lpca = Some(LpcaBody {
                feature: m.feature_kind(),
                thresholds: ThresholdBody { low: th.low.as_f64(), high: th.high.as_f64() },
                groups: m.groups().iter().map(gpca_body).collect(),
            })
        }
    }
    write_json(path, &file)
}

pub fn load_model<T: Real>(path: &Path) -> Result<Model<T>> {
    let f: ModelFile = read_json(path)?;
    let missing = |section: &str| invalid(format!("{}: kind `{}` requires a `{section}` section", path.display(), f.kind));
    let (nfft, fs) = (f.nfft, f.sample_rate);
    match f.kind.as_str() {
        "ls" => {
            let b = f.ls.as_ref().ok_or_else(|| missing("ls"))?;
            Ok(Model::Ls(LsModel::from_parts(from_f64(&b.gain), T::lit(b.mu), nfft, fs)?))
        }
        "gpca" => Ok(Model::GlobalPca(gpca_from(f.gpca.as_ref().ok_or_else(|| missing("gpca"))?, nfft, fs)?)),
        "lpca" => {
            let b = f.lpca.as_ref().ok_or_else(|| missing("lpca"))?;
            let groups = b.groups.iter().map(|g| gpca_from(g, nfft, fs)).collect::<Result<Vec<_>>>()?;
            let groups: [GlobalPcaModel<T>; 3] = groups
                .try_into()
                .map_err(|g: Vec<_>| invalid(format!("{}: expected 3 local groups, found {}", path.display(), g.len())))?;
            let th = GroupThresholds::new(b.feature, T::lit(b.thresholds.low), T::lit(b.thresholds.high))?;
            Ok(Model::LocalPca(LocalPcaModel::from_parts(th, groups)?))
        }
        other => Err(invalid(format!("{}: unknown model kind `{other}`", path.display()))),
    }
}

// -------------------------------------------------------------- equalizers

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqFile {
    pub version: u32,
    pub sample_rate: u32,
    pub nfft: usize,
    pub fir_length: usize,
    pub clamp_db: [f64; 2],
    pub target: String,
    pub taps: Vec<f64>,
    pub magnitude_db: Vec<f64>,
    pub unclamped_db: Vec<f64>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub config: Value,
}

impl EqFile {
    pub fn new<T: Real>(filter: &EqFilter<T>, target: &TargetCurve<T>, config: Value) -> Self {
        Self {
            version: FORMAT_VERSION,
            sample_rate: filter.sample_rate(),
            nfft: filter.nfft,
            fir_length: filter.taps.len(),
            clamp_db: [filter.clamp.0.as_f64(), filter.clamp.1.as_f64()],
            target: target.description.clone(),
            taps: to_f64(filter.taps.samples()),
            magnitude_db: to_f64(&filter.magnitude_db),
            unclamped_db: to_f64(&filter.unclamped_db),
            config,
        }
    }
}

/// One coefficient per line, 15 significant digits.
pub fn taps_to_text<T: Real>(taps: &[T]) -> String {
    taps.iter().map(|t| format!("{:.14e}\n", t.as_f64())).collect()
}

/// Reads whitespace-separated samples, ignoring blank lines and `#` comments.
pub fn parse_samples(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .flat_map(|(n, l)| l.split_whitespace().map(move |tok| (n, tok)))
        .map(|(n, tok)| tok.parse::<f64>().map_err(|_| invalid(format!("line {}: `{tok}` is not a number", n + 1))))
        .collect()
}
