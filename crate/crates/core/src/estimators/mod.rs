//! Room average power response estimators: per-bin regularized least
//! squares, global PCA regression and RT30/roll-off grouped local PCA.

mod global;
mod local;
mod ls;
mod pca;

pub use global::{predict_global_pca, train_global_pca, train_linear_map, GlobalPcaModel, DEFAULT_KR, DEFAULT_KS_GLOBAL};
pub use local::{predict_local_pca, train_local_pca, LocalPcaModel, LocalPrediction, DEFAULT_KS_LOCAL};
pub use ls::{predict_ls, train_ls, LsModel, DEFAULT_MU};
pub use pca::{pca, PcaBasis};

use crate::error::{invalid, Result};
use crate::linalg::Matrix;
use crate::num::Real;
use crate::roomsim::DatasetRecord;
use crate::spectra::{ImpulseResponse, LogPowerSpectrum};

/// Training pairs sharing one spectral grid.
#[derive(Debug, Clone)]
pub struct Dataset<T> {
    records: Vec<DatasetRecord<T>>,
}

impl<T: Real> Dataset<T> {
    pub fn new(records: Vec<DatasetRecord<T>>) -> Result<Self> {
        let first = records.first().ok_or_else(|| invalid("dataset is empty"))?;
        let (nfft, fs) = (first.nfft(), first.sample_rate());
        if let Some(j) = records.iter().position(|r| r.nfft() != nfft || r.sample_rate() != fs) {
            return Err(invalid(format!(
                "record {j} does not share nfft {nfft} / sample rate {fs} with record 0"
            )));
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[DatasetRecord<T>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn nfft(&self) -> usize {
        self.records[0].nfft()
    }

    pub fn sample_rate(&self) -> u32 {
        self.records[0].sample_rate()
    }

    pub fn bins(&self) -> usize {
        self.nfft() / 2 + 1
    }

    /// Records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let records = indices
            .iter()
            .map(|&i| {
                self.records
                    .get(i)
                    .cloned()
                    .ok_or_else(|| invalid(format!("record index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(records)
    }

    /// `J x bins` matrix of echo-path log spectra.
    pub fn echo_matrix(&self) -> Matrix<T> {
        let rows: Vec<Vec<T>> = self.records.iter().map(|r| r.echo_spectrum.bins().to_vec()).collect();
        Matrix::from_rows(&rows).expect("records share a grid")
    }

    /// `J x bins` matrix of room average log spectra.
    pub fn room_matrix(&self) -> Matrix<T> {
        let rows: Vec<Vec<T>> = self.records.iter().map(|r| r.room_avg_spectrum.bins().to_vec()).collect();
        Matrix::from_rows(&rows).expect("records share a grid")
    }

    /// Per-bin ensemble average of the room spectra.
    pub fn room_mean(&self) -> Vec<T> {
        column_mean(&self.room_matrix())
    }
}

pub(crate) fn column_mean<T: Real>(m: &Matrix<T>) -> Vec<T> {
    let mut mean = vec![T::zero(); m.cols()];
    for i in 0..m.rows() {
        for (a, &x) in mean.iter_mut().zip(m.row(i)) {
            *a = *a + x;
        }
    }
    let n = T::from_usize_lossy(m.rows().max(1));
    mean.into_iter().map(|a| a / n).collect()
}

pub(crate) fn check_grid<T: Real>(s: &LogPowerSpectrum<T>, nfft: usize, sample_rate: u32) -> Result<()> {
    if s.nfft() != nfft || s.sample_rate() != sample_rate {
        return Err(invalid(format!(
            "spectrum grid (nfft {}, {} Hz) does not match the model (nfft {nfft}, {sample_rate} Hz)",
            s.nfft(),
            s.sample_rate()
        )));
    }
    Ok(())
}

/// Any trained estimator.
#[derive(Debug, Clone, PartialEq)]
pub enum Model<T> {
    Ls(LsModel<T>),
    GlobalPca(GlobalPcaModel<T>),
    LocalPca(LocalPcaModel<T>),
}

/// Estimated room curve plus how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub spectrum: LogPowerSpectrum<T>,
    /// Local group used, for local PCA models.
    pub group: Option<crate::features::Group>,
    /// Set when the grouping feature could not be computed and the middle
    /// group was used instead.
    pub fallback: bool,
}

impl<T: Real> Model<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Ls(_) => "ls",
            Model::GlobalPca(_) => "gpca",
            Model::LocalPca(_) => "lpca",
        }
    }

    pub fn nfft(&self) -> usize {
        match self {
            Model::Ls(m) => m.nfft(),
            Model::GlobalPca(m) => m.nfft(),
            Model::LocalPca(m) => m.nfft(),
        }
    }

    pub fn sample_rate(&self) -> u32 {
        match self {
            Model::Ls(m) => m.sample_rate(),
            Model::GlobalPca(m) => m.sample_rate(),
            Model::LocalPca(m) => m.sample_rate(),
        }
    }

    pub fn predict(&self, echo_ir: Option<&ImpulseResponse<T>>, echo_spectrum: &LogPowerSpectrum<T>) -> Result<Prediction<T>> {
        match self {
            Model::Ls(m) => Ok(Prediction { spectrum: predict_ls(m, echo_spectrum)?, group: None, fallback: false }),
            Model::GlobalPca(m) => Ok(Prediction {
                spectrum: predict_global_pca(m, echo_spectrum)?,
                group: None,
                fallback: false,
            }),
            Model::LocalPca(m) => {
                let p = predict_local_pca(m, echo_ir, echo_spectrum)?;
                Ok(Prediction { spectrum: p.spectrum, group: Some(p.group), fallback: p.fallback })
            }
        }
    }

    pub fn predict_record(&self, record: &DatasetRecord<T>) -> Result<Prediction<T>> {
        self.predict(Some(&record.echo_ir), &record.echo_spectrum)
    }
}
