use crate::error::{invalid, Error, Result};
use crate::num::Real;
use crate::spectra::LogPowerSpectrum;

use super::{check_grid, Dataset};

/// Tikhonov weight used for the least-squares estimator.
pub const DEFAULT_MU: f64 = 1e-3;

/// Per-bin multiplicative gain on log-energy coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct LsModel<T> {
    gain: Vec<T>,
    mu: T,
    nfft: usize,
    sample_rate: u32,
}

impl<T: Real> LsModel<T> {
    pub fn from_parts(gain: Vec<T>, mu: T, nfft: usize, sample_rate: u32) -> Result<Self> {
        if gain.len() != nfft / 2 + 1 {
            return Err(invalid(format!("gain has {} bins, expected {}", gain.len(), nfft / 2 + 1)));
        }
        if gain.iter().any(|g| !g.is_finite()) {
            return Err(invalid("gain must be finite"));
        }
        Ok(Self { gain, mu, nfft, sample_rate })
    }

    pub fn gain(&self) -> &[T] {
        &self.gain
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn nfft(&self) -> usize {
        self.nfft
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }
}

/// Minimizes `||D_s g - d_r||^2 + mu ||g||^2`. `D_s` stacks one diagonal
/// block per record, so the normal equations are diagonal and each bin is
/// solved independently: `g[k] = sum_j s_j[k] r_j[k] / (sum_j s_j[k]^2 + mu)`.
pub fn train_ls<T: Real>(dataset: &Dataset<T>, mu: T) -> Result<LsModel<T>> {
    if !(mu >= T::zero()) {
        return Err(invalid(format!("mu must be non-negative, got {mu}")));
    }
    let bins = dataset.bins();
    let mut num = vec![T::zero(); bins];
    let mut den = vec![T::zero(); bins];
    for rec in dataset.records() {
        let s = rec.echo_spectrum.bins();
        let r = rec.room_avg_spectrum.bins();
        for k in 0..bins {
            num[k] = num[k] + s[k] * r[k];
            den[k] = den[k] + s[k] * s[k];
        }
    }
    let gain = num
        .into_iter()
        .zip(den)
        .enumerate()
        .map(|(k, (n, d))| {
            let d = d + mu;
            if d == T::zero() {
                Err(Error::SingularSystem(format!("bin {k} has zero echo energy and mu = 0")))
            } else {
                Ok(n / d)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    LsModel::from_parts(gain, mu, dataset.nfft(), dataset.sample_rate())
}

/// `r_hat = s * g` element-wise.
pub fn predict_ls<T: Real>(model: &LsModel<T>, s: &LogPowerSpectrum<T>) -> Result<LogPowerSpectrum<T>> {
    check_grid(s, model.nfft, model.sample_rate)?;
    s.with_bins(s.bins().iter().zip(&model.gain).map(|(&x, &g)| x * g).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roomsim::DatasetRecord;
    use crate::spectra::ImpulseResponse;
    use approx::assert_abs_diff_eq;

    fn spectrum(bins: Vec<f64>) -> LogPowerSpectrum<f64> {
        let nfft = (bins.len() - 1) * 2;
        LogPowerSpectrum::new(bins, 16_000, nfft).unwrap()
    }

    fn record(s: Vec<f64>, r: Vec<f64>) -> DatasetRecord<f64> {
        let ir = ImpulseResponse::new(vec![1.0], 16_000).unwrap();
        DatasetRecord::new(ir, spectrum(s), spectrum(r), None).unwrap()
    }

    #[test]
    fn single_record_interpolates() {
        let s = vec![1.0, -2.0, 4.0, 0.5, 3.0];
        let r = vec![2.0, 1.0, -1.0, 0.25, 9.0];
        let ds = Dataset::new(vec![record(s.clone(), r.clone())]).unwrap();
        let m = train_ls(&ds, 0.0).unwrap();
        for k in 0..5 {
            assert_abs_diff_eq!(m.gain()[k], r[k] / s[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn doubled_targets_give_gain_two() {
        let recs = (0..4)
            .map(|j| {
                let s: Vec<f64> = (0..5).map(|k| (j * 5 + k) as f64 * 0.7 - 3.1).collect();
                let r = s.iter().map(|x| 2.0 * x).collect();
                record(s, r)
            })
            .collect();
        let m = train_ls(&Dataset::new(recs).unwrap(), 0.0).unwrap();
        for &g in m.gain() {
            assert_abs_diff_eq!(g, 2.0, epsilon = 1e-12);
        }
        let probe = spectrum(vec![1.0, 2.0, 3.0, -4.0, 0.0]);
        let rhat = predict_ls(&m, &probe).unwrap();
        for (a, b) in rhat.bins().iter().zip(probe.bins()) {
            assert_abs_diff_eq!(*a, 2.0 * b, epsilon = 1e-12);
        }
    }

    #[test]
    fn heavy_regularization_shrinks_to_zero() {
        let ds = Dataset::new(vec![record(vec![3.0; 5], vec![5.0; 5])]).unwrap();
        let m = train_ls(&ds, 1e12).unwrap();
        for &g in m.gain() {
            assert!(g.abs() < 1e-10);
        }
    }

    #[test]
    fn identity_and_zero_gain() {
        let probe = spectrum(vec![1.0, -2.0, 3.0, 4.0, 5.0]);
        let ones = LsModel::from_parts(vec![1.0; 5], 0.0, 8, 16_000).unwrap();
        assert_eq!(predict_ls(&ones, &probe).unwrap(), probe);
        let zeros = LsModel::from_parts(vec![0.0; 5], 0.0, 8, 16_000).unwrap();
        assert!(predict_ls(&zeros, &probe).unwrap().bins().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn errors() {
        let ds = Dataset::new(vec![record(vec![0.0, 1.0, 1.0, 1.0, 1.0], vec![1.0; 5])]).unwrap();
        assert!(matches!(train_ls(&ds, 0.0), Err(Error::SingularSystem(_))));
        assert!(train_ls(&ds, 1e-3).is_ok());
        assert!(train_ls(&ds, -1.0).is_err());
        let m = train_ls(&ds, 1e-3).unwrap();
        let wrong = LogPowerSpectrum::new(vec![0.0; 9], 16_000, 16).unwrap();
        assert!(predict_ls(&m, &wrong).is_err());
    }
}
