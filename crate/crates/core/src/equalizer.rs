//! Room-compensation filter design from an estimated room curve and a
//! target curve.
//!
//! Levels follow [`LogPowerSpectrum`]: `10 log10` of power. The filter
//! magnitude `|G|_dB` is `10 log10 |G|`, so an equalized room reads
//! `r + 2 |G|_dB`.

use crate::error::{invalid, Result};
use crate::num::Real;
use crate::spectra::{bin_hz, log_power_spectrum, min_phase_fir, ImpulseResponse, LogPowerSpectrum};

pub const DEFAULT_CLAMP_DB: (f64, f64) = (-12.0, 12.0);
pub const DEFAULT_FIR_LENGTH: usize = 512;

/// Desired equalized room curve in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetCurve<T> {
    pub bins: Vec<T>,
    pub description: String,
}

impl<T: Real> TargetCurve<T> {
    pub fn new(bins: Vec<T>, description: impl Into<String>) -> Result<Self> {
        if bins.iter().any(|b| !b.is_finite()) {
            return Err(invalid("target curve bins must be finite"));
        }
        Ok(Self { bins, description: description.into() })
    }
}

/// Flat curve with a first-order low shelf of `shelf_db` below
/// `corner_hz`. Cuts mirror boosts.
pub fn flat_target<T: Real>(nfft: usize, sample_rate: u32, shelf_db: f64, corner_hz: f64) -> Result<TargetCurve<T>> {
    if nfft < 2 || !nfft.is_power_of_two() {
        return Err(invalid(format!("nfft must be a power of two >= 2, got {nfft}")));
    }
    let nyquist = sample_rate as f64 / 2.0;
    if !(corner_hz > 0.0 && corner_hz < nyquist) {
        return Err(invalid(format!("shelf corner {corner_hz} Hz must lie in (0, {nyquist}) Hz")));
    }
    if !shelf_db.is_finite() {
        return Err(invalid("shelf gain must be finite"));
    }
    let g2 = 10f64.powf(shelf_db.abs() / 10.0);
    let wc2 = corner_hz * corner_hz;
    let bins = (0..=nfft / 2)
        .map(|k| {
            if shelf_db == 0.0 {
                return T::zero();
            }
            let w2 = bin_hz(k, sample_rate, nfft).powi(2);
            let boost = 10.0 * ((w2 + g2 * wc2) / (w2 + wc2)).log10();
            T::lit(boost.copysign(shelf_db))
        })
        .collect();
    TargetCurve::new(bins, format!("flat, {shelf_db} dB low shelf at {corner_hz} Hz"))
}

/// Designed filter magnitude before FIR realization.
#[derive(Debug, Clone, PartialEq)]
pub struct EqMagnitude<T> {
    /// Clamped `|G|_dB` per bin.
    pub magnitude_db: Vec<T>,
    /// `(t - r_hat) / 2` before clamping.
    pub unclamped_db: Vec<T>,
    pub clamped: Vec<bool>,
    pub clamp: (T, T),
    pub sample_rate: u32,
    pub nfft: usize,
}

fn check_clamp<T: Real>(clamp: (T, T)) -> Result<()> {
    if !(clamp.0 < T::zero() && T::zero() < clamp.1) {
        return Err(invalid(format!("clamp ({}, {}) must satisfy min < 0 < max", clamp.0, clamp.1)));
    }
    Ok(())
}

/// `|G|_dB = (t - r_hat) / 2`, clamped to `clamp`.
pub fn design_eq_magnitude<T: Real>(r_hat: &LogPowerSpectrum<T>, target: &TargetCurve<T>, clamp: (T, T)) -> Result<EqMagnitude<T>> {
    check_clamp(clamp)?;
    if target.bins.len() != r_hat.len() {
        return Err(invalid(format!(
            "target has {} bins, room curve has {}",
            target.bins.len(),
            r_hat.len()
        )));
    }
    let half = T::lit(0.5);
    let unclamped_db: Vec<T> = target.bins.iter().zip(r_hat.bins()).map(|(&t, &r)| (t - r) * half).collect();
    let magnitude_db: Vec<T> = unclamped_db.iter().map(|&g| g.max(clamp.0).min(clamp.1)).collect();
    let clamped = unclamped_db.iter().zip(&magnitude_db).map(|(a, b)| a != b).collect();
    Ok(EqMagnitude {
        magnitude_db,
        unclamped_db,
        clamped,
        clamp,
        sample_rate: r_hat.sample_rate(),
        nfft: r_hat.nfft(),
    })
}

/// Averages each bin over a `1/fraction` octave window centred on it.
/// DC is left untouched.
pub fn smooth_fractional_octave<T: Real>(bins: &[T], sample_rate: u32, nfft: usize, fraction: f64) -> Result<Vec<T>> {
    if bins.len() != nfft / 2 + 1 {
        return Err(invalid(format!("expected {} bins, got {}", nfft / 2 + 1, bins.len())));
    }
    if !(fraction > 0.0) {
        return Err(invalid(format!("octave fraction must be positive, got {fraction}")));
    }
    let ratio = 2f64.powf(0.5 / fraction);
    let df = sample_rate as f64 / nfft as f64;
    let last = bins.len() - 1;
    Ok((0..bins.len())
        .map(|k| {
            if k == 0 {
                return bins[0];
            }
            let f = k as f64 * df;
            let lo = ((f / ratio / df).ceil() as usize).max(1);
            let hi = ((f * ratio / df).floor() as usize).min(last);
            let (lo, hi) = (lo.min(k), hi.max(k));
            let sum: T = bins[lo..=hi].iter().copied().sum();
            sum / T::from_usize_lossy(hi - lo + 1)
        })
        .collect())
}

impl<T: Real> EqMagnitude<T> {
    /// 1/6-octave smoothed copy, re-clamped.
    pub fn smoothed(&self, fraction: f64) -> Result<Self> {
        let unclamped_db = smooth_fractional_octave(&self.unclamped_db, self.sample_rate, self.nfft, fraction)?;
        let magnitude_db: Vec<T> = unclamped_db.iter().map(|&g| g.max(self.clamp.0).min(self.clamp.1)).collect();
        let clamped = unclamped_db.iter().zip(&magnitude_db).map(|(a, b)| a != b).collect();
        Ok(Self { magnitude_db, unclamped_db, clamped, ..self.clone() })
    }
}

/// Realized room-compensation filter.
#[derive(Debug, Clone, PartialEq)]
pub struct EqFilter<T> {
    pub taps: ImpulseResponse<T>,
    pub magnitude_db: Vec<T>,
    pub unclamped_db: Vec<T>,
    pub clamp: (T, T),
    pub nfft: usize,
}

impl<T: Real> EqFilter<T> {
    pub fn sample_rate(&self) -> u32 {
        self.taps.sample_rate()
    }

    /// `|G|_dB` of the taps, recomputed on the design grid.
    pub fn realized_magnitude_db(&self) -> Result<Vec<T>> {
        let p = log_power_spectrum(&self.taps, self.nfft)?;
        Ok(p.bins().iter().map(|&x| x * T::lit(0.5)).collect())
    }
}

/// Minimum-phase FIR of `fir_length` taps realizing `design.magnitude_db`.
pub fn design_eq_filter<T: Real>(design: &EqMagnitude<T>, fir_length: usize) -> Result<EqFilter<T>> {
    check_clamp(design.clamp)?;
    let power: Vec<T> = design.magnitude_db.iter().map(|&g| g * T::lit(2.0)).collect();
    let target = LogPowerSpectrum::new(power, design.sample_rate, design.nfft)?;
    let taps = min_phase_fir(&target, fir_length)?;
    Ok(EqFilter {
        taps,
        magnitude_db: design.magnitude_db.clone(),
        unclamped_db: design.unclamped_db.clone(),
        clamp: design.clamp,
        nfft: design.nfft,
    })
}
