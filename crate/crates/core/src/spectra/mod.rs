//! Spectral primitives: impulse responses, log-power spectra and
//! minimum-phase FIR synthesis through the folded real cepstrum.

pub mod fft;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::num::Real;

pub use fft::{fft_in_place, is_power_of_two, real_dft};

/// Linear power floor added before taking logarithms (-120 dB).
pub const POWER_FLOOR: f64 = 1e-12;

/// Cepstrum grid oversampling used by [`min_phase_fir`].
pub const CEPSTRUM_OVERSAMPLING: usize = 4;

/// Time-domain acoustic response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseResponse<T> {
    samples: Vec<T>,
    sample_rate: u32,
}

impl<T: Real> ImpulseResponse<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("impulse response is empty"));
        }
        if sample_rate == 0 {
            return Err(invalid("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(invalid(format!("impulse response sample {i} is not finite")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> T {
        self.samples.iter().map(|&x| x * x).sum()
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn cast<U: Real>(&self) -> ImpulseResponse<U> {
        ImpulseResponse {
            samples: self.samples.iter().map(|x| U::lit(x.as_f64())).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Log-energy magnitude coefficients `10 log10(|H[k]|^2 + floor)` over the
/// `nfft / 2 + 1` non-negative frequency bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogPowerSpectrum<T> {
    bins: Vec<T>,
    sample_rate: u32,
    nfft: usize,
}

impl<T: Real> LogPowerSpectrum<T> {
    pub fn new(bins: Vec<T>, sample_rate: u32, nfft: usize) -> Result<Self> {
        if !is_power_of_two(nfft) || nfft < 2 {
            return Err(invalid(format!("nfft {nfft} must be a power of two >= 2")));
        }
        if bins.len() != nfft / 2 + 1 {
            return Err(invalid(format!(
                "spectrum has {} bins, expected nfft/2+1 = {}",
                bins.len(),
                nfft / 2 + 1
            )));
        }
        if sample_rate == 0 {
            return Err(invalid("sample rate must be positive"));
        }
        if let Some(k) = bins.iter().position(|x| !x.is_finite()) {
            return Err(invalid(format!("spectrum bin {k} is not finite")));
        }
        Ok(Self { bins, sample_rate, nfft })
    }

    pub fn bins(&self) -> &[T] {
        &self.bins
    }

    pub fn into_bins(self) -> Vec<T> {
        self.bins
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn nfft(&self) -> usize {
        self.nfft
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Center frequency of bin `k` in Hz.
    pub fn bin_hz(&self, k: usize) -> f64 {
        bin_hz(k, self.sample_rate, self.nfft)
    }

    /// A spectrum on the same grid with different values.
    pub fn with_bins(&self, bins: Vec<T>) -> Result<Self> {
        Self::new(bins, self.sample_rate, self.nfft)
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.nfft == other.nfft && self.sample_rate == other.sample_rate
    }

    pub fn cast<U: Real>(&self) -> LogPowerSpectrum<U> {
        LogPowerSpectrum {
            bins: self.bins.iter().map(|x| U::lit(x.as_f64())).collect(),
            sample_rate: self.sample_rate,
            nfft: self.nfft,
        }
    }
}

pub fn bin_hz(k: usize, sample_rate: u32, nfft: usize) -> f64 {
    k as f64 * sample_rate as f64 / nfft as f64
}

pub(crate) fn power_to_db<T: Real>(power: T) -> T {
    T::lit(10.0) * (power + T::lit(POWER_FLOOR)).log10()
}

/// Log-power spectrum of `ir` on an `nfft`-point grid.
///
/// Responses shorter than `nfft` are zero padded; longer ones are truncated
/// to their first `nfft` samples.
pub fn log_power_spectrum<T: Real>(ir: &ImpulseResponse<T>, nfft: usize) -> Result<LogPowerSpectrum<T>> {
    if ir.is_empty() {
        return Err(invalid("impulse response is empty"));
    }
    if ir.len() > nfft {
        log::warn!(
            "impulse response of {} samples truncated to nfft = {nfft}",
            ir.len()
        );
    }
    let spectrum = real_dft(ir.samples(), nfft)?;
    let bins = spectrum[..=nfft / 2]
        .iter()
        .map(|z| power_to_db(z.norm_sqr()))
        .collect();
    LogPowerSpectrum::new(bins, ir.sample_rate(), nfft)
}

/// Minimum-phase FIR whose power response follows `target`.
///
/// The target log-magnitude is linearly interpolated onto a grid
/// [`CEPSTRUM_OVERSAMPLING`] times finer than `target.nfft()`, its real
/// cepstrum is folded onto positive quefrencies, and the folded cepstrum is
/// exponentiated back into the frequency domain. The first `fir_length`
/// taps of the resulting impulse response are returned.
pub fn min_phase_fir<T: Real>(target: &LogPowerSpectrum<T>, fir_length: usize) -> Result<ImpulseResponse<T>> {
    let nfft = target.nfft();
    if fir_length == 0 || fir_length > nfft {
        return Err(invalid(format!(
            "fir length {fir_length} must be in 1..={nfft}"
        )));
    }
    let fine = nfft * CEPSTRUM_OVERSAMPLING;
    let half = fine / 2;

    // natural log of linear magnitude: ln|H| = dB * ln(10) / 20
    let to_ln = T::LN_10() / T::lit(20.0);
    let coarse: Vec<T> = target.bins().iter().map(|&db| db * to_ln).collect();
    let step = T::one() / T::from_usize_lossy(CEPSTRUM_OVERSAMPLING);

    let mut buf = vec![Complex::new(T::zero(), T::zero()); fine];
    for k in 0..=half {
        let lo = k / CEPSTRUM_OVERSAMPLING;
        let frac = T::from_usize_lossy(k % CEPSTRUM_OVERSAMPLING) * step;
        let value = if lo + 1 < coarse.len() {
            coarse[lo] + frac * (coarse[lo + 1] - coarse[lo])
        } else {
            coarse[lo]
        };
        buf[k].re = value;
        if k > 0 && k < half {
            buf[fine - k].re = value;
        }
    }

    // real cepstrum
    fft_in_place(&mut buf, true)?;

    // fold onto causal quefrencies
    let two = T::lit(2.0);
    for n in 0..fine {
        let c = buf[n].re;
        buf[n] = Complex::new(
            match n {
                0 => c,
                n if n < half => two * c,
                n if n == half => c,
                _ => T::zero(),
            },
            T::zero(),
        );
    }

    fft_in_place(&mut buf, false)?;
    for z in buf.iter_mut() {
        *z = z.exp();
    }
    fft_in_place(&mut buf, true)?;

    let taps = buf[..fir_length].iter().map(|z| z.re).collect();
    ImpulseResponse::new(taps, target.sample_rate())
}
