//! Echo-path features used to split training data into local groups:
//! the Schroeder RT30 and the 60-120 Hz roll-off gain, plus the
//! normal-fit rule that turns a feature sample into two cut points.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::num::Real;
use crate::spectra::{ImpulseResponse, LogPowerSpectrum};

/// Tail probability that reproduces the reported 22/56/22 % group split.
pub const DEFAULT_TAIL_PROB: f64 = 0.22;

/// Upper and lower ends of the Schroeder regression window, dB re. total energy.
pub const RT30_FIT_START_DB: f64 = -5.0;
pub const RT30_FIT_END_DB: f64 = -35.0;

pub const ROLLOFF_LOW_HZ: f64 = 60.0;
pub const ROLLOFF_HIGH_HZ: f64 = 120.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    #[serde(rename = "rt30")]
    Rt30,
    #[serde(rename = "rolloff")]
    LowFreqRolloff,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Rt30 => "rt30",
            FeatureKind::LowFreqRolloff => "rolloff",
        }
    }

    /// Evaluates this feature on an echo-path measurement.
    pub fn evaluate<T: Real>(self, ir: Option<&ImpulseResponse<T>>, spectrum: &LogPowerSpectrum<T>) -> Result<T> {
        match self {
            FeatureKind::Rt30 => {
                let ir = ir.ok_or_else(|| invalid("RT30 grouping needs the echo impulse response"))?;
                rt30(ir)
            }
            FeatureKind::LowFreqRolloff => lf_rolloff(spectrum),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rt30" | "rt" => Ok(FeatureKind::Rt30),
            "rolloff" | "roff" | "lf-rolloff" => Ok(FeatureKind::LowFreqRolloff),
            other => Err(invalid(format!("unknown feature '{other}' (expected rt30 or rolloff)"))),
        }
    }
}

/// One of the three local groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    Low,
    Mid,
    High,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Low, Group::Mid, Group::High];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Group::Low => f.write_str("group 1 (low)"),
            Group::Mid => f.write_str("group 2 (mid)"),
            Group::High => f.write_str("group 3 (high)"),
        }
    }
}

/// Cut points splitting a feature axis into `(-inf, low)`, `[low, high]`
/// and `(high, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupThresholds<T> {
    pub kind: FeatureKind,
    pub low: T,
    pub high: T,
}

impl<T: Real> GroupThresholds<T> {
    pub fn new(kind: FeatureKind, low: T, high: T) -> Result<Self> {
        if !(low < high) || !low.is_finite() || !high.is_finite() {
            return Err(invalid(format!("thresholds must satisfy low < high, got {low} and {high}")));
        }
        Ok(Self { kind, low, high })
    }

    /// Both cut values belong to the middle group.
    pub fn group_of(&self, value: T) -> Group {
        if value < self.low {
            Group::Low
        } else if value > self.high {
            Group::High
        } else {
            Group::Mid
        }
    }
}

/// Schroeder energy decay curve in dB re. total energy. Entries past the
/// last non-zero sample are `-inf`.
pub fn schroeder_edc<T: Real>(samples: &[T]) -> Vec<T> {
    let mut tail = vec![T::zero(); samples.len()];
    let mut acc = T::zero();
    for (t, &x) in tail.iter_mut().zip(samples).rev() {
        acc = acc + x * x;
        *t = acc;
    }
    let total = acc;
    tail.into_iter()
        .map(|e| {
            if total > T::zero() && e > T::zero() {
                T::lit(10.0) * (e / total).log10()
            } else {
                T::neg_infinity()
            }
        })
        .collect()
}

/// Time in ms for the least-squares line through the -5..-35 dB part of the
/// energy decay curve to fall by 30 dB.
pub fn rt30<T: Real>(ir: &ImpulseResponse<T>) -> Result<T> {
    let edc = schroeder_edc(ir.samples());
    let floor = edc
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(T::zero(), T::min);
    let required = -RT30_FIT_END_DB;
    if floor > T::lit(RT30_FIT_END_DB) {
        return Err(Error::InsufficientDecay { range_db: -floor.as_f64(), required_db: required });
    }

    let (start, end) = (T::lit(RT30_FIT_START_DB), T::lit(RT30_FIT_END_DB));
    let points: Vec<(T, T)> = edc
        .iter()
        .enumerate()
        .filter(|(_, &v)| v <= start && v >= end)
        .map(|(n, &v)| (T::from_usize_lossy(n), v))
        .collect();
    if points.len() < 2 {
        return Err(Error::InsufficientDecay { range_db: -floor.as_f64(), required_db: required });
    }

    let count = T::from_usize_lossy(points.len());
    let mean_x = points.iter().map(|p| p.0).sum::<T>() / count;
    let mean_y = points.iter().map(|p| p.1).sum::<T>() / count;
    let (sxy, sxx) = points.iter().fold((T::zero(), T::zero()), |(sxy, sxx), &(x, y)| {
        let dx = x - mean_x;
        (sxy + dx * (y - mean_y), sxx + dx * dx)
    });
    let slope = sxy / sxx;
    if !(slope < T::zero()) {
        return Err(Error::InsufficientDecay { range_db: -floor.as_f64(), required_db: required });
    }
    let samples_per_30db = T::lit(-30.0) / slope;
    Ok(samples_per_30db * T::lit(1000.0) / T::lit(f64::from(ir.sample_rate())))
}

/// Level in dB at `hz`, linearly interpolated between the two adjacent bins.
pub fn level_at<T: Real>(spectrum: &LogPowerSpectrum<T>, hz: f64) -> Result<T> {
    let nyquist = f64::from(spectrum.sample_rate()) / 2.0;
    if !(0.0..=nyquist).contains(&hz) {
        return Err(invalid(format!("{hz} Hz is outside 0..={nyquist} Hz")));
    }
    let pos = hz * spectrum.nfft() as f64 / f64::from(spectrum.sample_rate());
    let k = pos.floor() as usize;
    let bins = spectrum.bins();
    if k + 1 >= bins.len() {
        return Ok(bins[bins.len() - 1]);
    }
    let frac = T::lit(pos - k as f64);
    Ok(bins[k] + frac * (bins[k + 1] - bins[k]))
}

/// Roll-off gain `L(120 Hz) - L(60 Hz)` in dB.
pub fn lf_rolloff<T: Real>(spectrum: &LogPowerSpectrum<T>) -> Result<T> {
    let fs = f64::from(spectrum.sample_rate());
    if fs < 2.0 * 2.0 * ROLLOFF_HIGH_HZ {
        return Err(invalid(format!("sample rate {fs} Hz is too low for a 120 Hz level")));
    }
    let pos_low = ROLLOFF_LOW_HZ * spectrum.nfft() as f64 / fs;
    if pos_low.ceil() < 2.0 {
        return Err(invalid(format!(
            "nfft {} resolves fewer than 2 bins below {ROLLOFF_LOW_HZ} Hz",
            spectrum.nfft()
        )));
    }
    Ok(level_at(spectrum, ROLLOFF_HIGH_HZ)? - level_at(spectrum, ROLLOFF_LOW_HZ)?)
}

/// Standard normal quantile (rational approximation, relative error below
/// 1.2e-9 over the open unit interval).
pub fn standard_normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -standard_normal_quantile(1.0 - p)
    }
}

/// Fits a normal distribution to `values` and places the cut points at its
/// `q` and `1 - q` quantiles.
pub fn fit_normal_thresholds<T: Real>(values: &[T], kind: FeatureKind, q: f64) -> Result<GroupThresholds<T>> {
    if values.len() < 10 {
        return Err(invalid(format!("need at least 10 feature values, got {}", values.len())));
    }
    if !(q > 0.0 && q < 0.5) {
        return Err(invalid(format!("tail probability {q} must lie in (0, 0.5)")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("feature values must be finite"));
    }
    let n = T::from_usize_lossy(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / (n - T::one());
    let sd = var.sqrt();
    if !(sd > T::zero()) {
        return Err(Error::DegenerateDistribution);
    }
    let low = mean + T::lit(standard_normal_quantile(q)) * sd;
    let high = mean + T::lit(standard_normal_quantile(1.0 - q)) * sd;
    GroupThresholds::new(kind, low, high)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use statrs::distribution::{ContinuousCDF, Normal};

    const FS: u32 = 16_000;

    /// Envelope whose energy falls exactly 30 dB every `t_ms`.
    fn exponential_ir(t_ms: f64, decay_db: f64) -> ImpulseResponse<f64> {
        let per_30db = f64::from(FS) * t_ms / 1000.0;
        let len = (per_30db * decay_db / 30.0).ceil() as usize;
        let samples = (0..len).map(|n| 10f64.powf(-1.5 * n as f64 / per_30db)).collect();
        ImpulseResponse::new(samples, FS).unwrap()
    }

    #[test]
    fn rt30_of_exponential_envelopes() {
        for t in [100.0, 200.0] {
            let v = rt30(&exponential_ir(t, 90.0)).unwrap();
            assert!((v - t).abs() <= 0.05 * t, "T={t}: {v}");
        }
    }

    #[test]
    fn rt30_scales_linearly() {
        let a = rt30(&exponential_ir(100.0, 90.0)).unwrap();
        let b = rt30(&exponential_ir(200.0, 90.0)).unwrap();
        assert_abs_diff_eq!(b / a, 2.0, epsilon = 0.02);
    }

    #[test]
    fn rt30_rejects_impulse() {
        let ir = ImpulseResponse::new(vec![1.0f64, 0.0, 0.0, 0.0], FS).unwrap();
        assert!(matches!(rt30(&ir), Err(Error::InsufficientDecay { .. })));
        let flat = ImpulseResponse::new(vec![1.0f64, 0.0, 0.0, 1.0], FS).unwrap();
        assert!(matches!(rt30(&flat), Err(Error::InsufficientDecay { .. })));
    }

    #[test]
    fn rt30_ignores_gain() {
        let ir = exponential_ir(150.0, 80.0);
        let scaled = ImpulseResponse::new(ir.samples().iter().map(|x| x * 37.5).collect(), FS).unwrap();
        assert_abs_diff_eq!(rt30(&ir).unwrap(), rt30(&scaled).unwrap(), epsilon = 1e-9);
    }

    fn spectrum(f: impl Fn(f64) -> f64) -> LogPowerSpectrum<f64> {
        let nfft = 2048;
        let bins = (0..=nfft / 2).map(|k| f(k as f64 * f64::from(FS) / nfft as f64)).collect();
        LogPowerSpectrum::new(bins, FS, nfft).unwrap()
    }

    #[test]
    fn rolloff_flat_linear_and_step() {
        assert_abs_diff_eq!(lf_rolloff(&spectrum(|_| -3.0)).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lf_rolloff(&spectrum(|f| 0.1 * f)).unwrap(), 6.0, epsilon = 1e-9);
        let step = spectrum(|f| if f < 90.0 { 0.0 } else { 18.0 });
        assert_abs_diff_eq!(lf_rolloff(&step).unwrap(), 18.0, epsilon = 1e-9);
    }

    #[test]
    fn rolloff_ignores_offset() {
        let a = spectrum(|f| (f / 37.0).sin() * 4.0);
        let b = spectrum(|f| (f / 37.0).sin() * 4.0 + 11.0);
        assert_abs_diff_eq!(lf_rolloff(&a).unwrap(), lf_rolloff(&b).unwrap(), epsilon = 1e-9);
    }

    #[test]
    fn rolloff_needs_resolution() {
        let coarse = LogPowerSpectrum::new(vec![0.0f64; 33], FS, 64).unwrap();
        assert!(lf_rolloff(&coarse).is_err());
        let slow = LogPowerSpectrum::new(vec![0.0f64; 1025], 400, 2048).unwrap();
        assert!(lf_rolloff(&slow).is_err());
    }

    #[test]
    fn quantile_matches_reference() {
        let reference = Normal::new(0.0, 1.0).unwrap();
        for p in [1e-6, 0.01, 0.02425, 0.1, 0.22, 0.5, 0.78, 0.975, 0.999_999] {
            let z = standard_normal_quantile(p);
            assert!((z - reference.inverse_cdf(p)).abs() < 1e-6, "p={p}");
        }
        assert_abs_diff_eq!(standard_normal_quantile(0.22), -0.772_193, epsilon = 1e-6);
    }

    #[test]
    fn thresholds_on_standard_normal_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let values: Vec<f64> = (0..20_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let th = fit_normal_thresholds(&values, FeatureKind::Rt30, 0.22).unwrap();
        assert_abs_diff_eq!(th.low, -0.7722, epsilon = 0.03);
        assert_abs_diff_eq!(th.high, 0.7722, epsilon = 0.03);
    }

    #[test]
    fn thresholds_collapse_near_median() {
        let values: Vec<f64> = (0..20).map(|i| 100.0 + (i as f64 - 9.5)).collect();
        let th = fit_normal_thresholds(&values, FeatureKind::Rt30, 0.5 - 1e-9).unwrap();
        assert_abs_diff_eq!(th.low, 100.0, epsilon = 1e-6);
        assert_abs_diff_eq!(th.high, 100.0, epsilon = 1e-6);
        assert!(th.low < th.high);
    }

    #[test]
    fn threshold_errors() {
        assert!(matches!(
            fit_normal_thresholds(&[5.0f64; 12], FeatureKind::Rt30, 0.22),
            Err(Error::DegenerateDistribution)
        ));
        assert!(fit_normal_thresholds(&[1.0f64, 2.0, 3.0], FeatureKind::Rt30, 0.22).is_err());
        let v: Vec<f64> = (0..12).map(f64::from).collect();
        assert!(fit_normal_thresholds(&v, FeatureKind::Rt30, 0.5).is_err());
        assert!(fit_normal_thresholds(&v, FeatureKind::Rt30, 0.0).is_err());
    }

    #[test]
    fn boundaries_belong_to_middle_group() {
        let th = GroupThresholds::new(FeatureKind::Rt30, 87.0, 151.0).unwrap();
        assert_eq!(th.group_of(86.999), Group::Low);
        assert_eq!(th.group_of(87.0), Group::Mid);
        assert_eq!(th.group_of(151.0), Group::Mid);
        assert_eq!(th.group_of(151.001), Group::High);
        assert!(GroupThresholds::new(FeatureKind::Rt30, 2.0, 2.0).is_err());
    }

    #[test]
    fn tail_fraction_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f64> = (0..10_000).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); 120.0 + 40.0 * z }).collect();
        let th = fit_normal_thresholds(&values, FeatureKind::Rt30, 0.22).unwrap();
        let below = values.iter().filter(|&&v| v < th.low).count() as f64 / values.len() as f64;
        assert!((below - 0.22).abs() <= 0.02, "{below}");
    }
}
