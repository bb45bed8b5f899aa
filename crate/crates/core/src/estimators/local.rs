use crate::error::{invalid, Error, Result};
use crate::features::{fit_normal_thresholds, FeatureKind, Group, GroupThresholds};
use crate::num::Real;
use crate::spectra::{ImpulseResponse, LogPowerSpectrum};

use super::{check_grid, predict_global_pca, train_global_pca, Dataset, GlobalPcaModel};

pub const DEFAULT_KS_LOCAL: usize = 80;

/// Three global PCA models selected by a scalar feature of the echo path.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPcaModel<T> {
    thresholds: GroupThresholds<T>,
    groups: [GlobalPcaModel<T>; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalPrediction<T> {
    pub spectrum: LogPowerSpectrum<T>,
    pub group: Group,
    /// The feature could not be computed and the middle group was used.
    pub fallback: bool,
}

impl<T: Real> LocalPcaModel<T> {
    pub fn from_parts(thresholds: GroupThresholds<T>, groups: [GlobalPcaModel<T>; 3]) -> Result<Self> {
        GroupThresholds::new(thresholds.kind, thresholds.low, thresholds.high)?;
        let (nfft, fs) = (groups[0].nfft(), groups[0].sample_rate());
        if groups.iter().any(|g| g.nfft() != nfft || g.sample_rate() != fs) {
            return Err(invalid("local models must share one spectral grid"));
        }
        Ok(Self { thresholds, groups })
    }

    pub fn feature_kind(&self) -> FeatureKind {
        self.thresholds.kind
    }

    pub fn thresholds(&self) -> &GroupThresholds<T> {
        &self.thresholds
    }

    pub fn groups(&self) -> &[GlobalPcaModel<T>; 3] {
        &self.groups
    }

    pub fn group(&self, g: Group) -> &GlobalPcaModel<T> {
        &self.groups[g.index()]
    }

    pub fn nfft(&self) -> usize {
        self.groups[0].nfft()
    }

    pub fn sample_rate(&self) -> u32 {
        self.groups[0].sample_rate()
    }
}

pub fn train_local_pca<T: Real>(dataset: &Dataset<T>, kind: FeatureKind, q: f64, ks: usize, kr: usize) -> Result<LocalPcaModel<T>> {
    if ks < kr {
        return Err(invalid(format!("K_s ({ks}) must be at least K_r ({kr})")));
    }
    let features: Vec<Option<T>> = dataset
        .records()
        .iter()
        .map(|rec| match kind.evaluate(Some(&rec.echo_ir), &rec.echo_spectrum) {
            Ok(v) => Ok(Some(v)),
            Err(Error::InsufficientDecay { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let valid: Vec<T> = features.iter().flatten().copied().collect();
    let skipped = features.len() - valid.len();
    if skipped > 0 {
        log::warn!("{skipped} training records have no {kind} value; assigning them to the middle group");
    }
    let thresholds = fit_normal_thresholds(&valid, kind, q)?;

    let mut members: [Vec<usize>; 3] = Default::default();
    for (i, f) in features.iter().enumerate() {
        let g = f.map_or(Group::Mid, |v| thresholds.group_of(v));
        members[g.index()].push(i);
    }
    let mut models = Vec::with_capacity(3);
    for g in Group::ALL {
        let idx = &members[g.index()];
        if idx.is_empty() {
            return Err(Error::EmptyGroup(g));
        }
        let ks_g = ks.min(idx.len() - 1);
        if ks_g == 0 {
            return Err(invalid(format!("{g} has a single record; at least 2 are needed")));
        }
        let kr_g = kr.min(ks_g);
        if ks_g < ks {
            log::warn!("{g} has {} records; reducing K_s to {ks_g} and K_r to {kr_g}", idx.len());
        }
        models.push(train_global_pca(&dataset.subset(idx)?, ks_g, kr_g)?);
    }
    let groups: [GlobalPcaModel<T>; 3] = models.try_into().map_err(|_| invalid("expected three groups"))?;
    LocalPcaModel::from_parts(thresholds, groups)
}

pub fn predict_local_pca<T: Real>(
    model: &LocalPcaModel<T>,
    echo_ir: Option<&ImpulseResponse<T>>,
    s: &LogPowerSpectrum<T>,
) -> Result<LocalPrediction<T>> {
    check_grid(s, model.nfft(), model.sample_rate())?;
    let (group, fallback) = match model.feature_kind().evaluate(echo_ir, s) {
        Ok(v) => (model.thresholds.group_of(v), false),
        Err(Error::InsufficientDecay { range_db, .. }) => {
            log::warn!("echo path decays only {range_db:.1} dB; using the middle group");
            (Group::Mid, true)
        }
        Err(e) => return Err(e),
    };
    let spectrum = predict_global_pca(model.group(group), s)?;
    Ok(LocalPrediction { spectrum, group, fallback })
}
