use crate::error::{invalid, Error, Result};
use crate::linalg::{solve_spd, Matrix};
use crate::num::Real;
use crate::spectra::LogPowerSpectrum;

use super::{check_grid, pca, Dataset, PcaBasis};

pub const DEFAULT_KS_GLOBAL: usize = 240;
pub const DEFAULT_KR: usize = 32;

/// Echo-path PCA basis, room-curve PCA basis and the linear map between
/// their gain vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalPcaModel<T> {
    basis_s: PcaBasis<T>,
    basis_r: PcaBasis<T>,
    /// `K_r x K_s`.
    map: Matrix<T>,
    nfft: usize,
    sample_rate: u32,
}

impl<T: Real> GlobalPcaModel<T> {
    pub fn from_parts(basis_s: PcaBasis<T>, basis_r: PcaBasis<T>, map: Matrix<T>, nfft: usize, sample_rate: u32) -> Result<Self> {
        let bins = nfft / 2 + 1;
        if basis_s.dim() != bins || basis_r.dim() != bins {
            return Err(invalid(format!("bases must have {bins} bins")));
        }
        if map.rows() != basis_r.order() || map.cols() != basis_s.order() {
            return Err(invalid(format!(
                "map is {}x{}, bases require {}x{}",
                map.rows(),
                map.cols(),
                basis_r.order(),
                basis_s.order()
            )));
        }
        Ok(Self { basis_s, basis_r, map, nfft, sample_rate })
    }

    pub fn basis_s(&self) -> &PcaBasis<T> {
        &self.basis_s
    }

    pub fn basis_r(&self) -> &PcaBasis<T> {
        &self.basis_r
    }

    pub fn map(&self) -> &Matrix<T> {
        &self.map
    }

    pub fn nfft(&self) -> usize {
        self.nfft
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }
}

/// `A = (G_r G_s^T)(G_s G_s^T + ridge I)^-1`. With `ridge = None` the
/// weight is `1e-8 trace(G_s G_s^T) / K_s`.
pub fn train_linear_map<T: Real>(gs: &Matrix<T>, gr: &Matrix<T>, ridge: Option<T>) -> Result<Matrix<T>> {
    if gs.cols() != gr.cols() {
        return Err(invalid(format!(
            "gain matrices disagree on record count: {} vs {}",
            gs.cols(),
            gr.cols()
        )));
    }
    let (ks, kr) = (gs.rows(), gr.rows());
    if ks == 0 || kr == 0 {
        return Ok(Matrix::zeros(kr, ks));
    }
    let mut gram = gs.gram_rows();
    let ridge = match ridge {
        Some(r) if !(r >= T::zero()) => return Err(invalid(format!("ridge must be non-negative, got {r}"))),
        Some(r) => r,
        None => T::lit(1e-8) * gram.trace() / T::from_usize_lossy(ks),
    };
    for i in 0..ks {
        gram[(i, i)] = gram[(i, i)] + ridge;
    }
    // cross = G_s G_r^T, so A^T = gram^-1 cross
    let cross = gs.matmul(&gr.transpose())?;
    let at = solve_spd(&gram, &cross).map_err(|e| match e {
        Error::SingularSystem(m) => Error::SingularSystem(format!("echo gain Gram matrix: {m}")),
        other => other,
    })?;
    Ok(at.transpose())
}

/// `K x J` matrix of gains, one column per row of `data`.
fn gains<T: Real>(basis: &PcaBasis<T>, data: &Matrix<T>) -> Result<Matrix<T>> {
    let cols = (0..data.rows()).map(|i| basis.project(data.row(i))).collect::<Result<Vec<_>>>()?;
    let flat: Vec<T> = cols.into_iter().flatten().collect();
    Matrix::from_col_major(basis.order(), data.rows(), &flat)
}

pub fn train_global_pca<T: Real>(dataset: &Dataset<T>, ks: usize, kr: usize) -> Result<GlobalPcaModel<T>> {
    if ks < kr {
        return Err(invalid(format!("K_s ({ks}) must be at least K_r ({kr})")));
    }
    let s = dataset.echo_matrix();
    let r = dataset.room_matrix();
    let basis_s = pca(&s, ks)?;
    let basis_r = pca(&r, kr)?;
    let map = train_linear_map(&gains(&basis_s, &s)?, &gains(&basis_r, &r)?, None)?;
    GlobalPcaModel::from_parts(basis_s, basis_r, map, dataset.nfft(), dataset.sample_rate())
}

pub fn predict_global_pca<T: Real>(model: &GlobalPcaModel<T>, s: &LogPowerSpectrum<T>) -> Result<LogPowerSpectrum<T>> {
    check_grid(s, model.nfft, model.sample_rate)?;
    let gs = model.basis_s.project(s.bins())?;
    let gr = model.map.matvec(&gs)?;
    s.with_bins(model.basis_r.reconstruct(&gr)?)
}
