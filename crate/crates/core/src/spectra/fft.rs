//! Iterative radix-2 FFT on power-of-two grids.

use num_complex::Complex;

use crate::error::{invalid, Result};
use crate::num::Real;

pub fn is_power_of_two(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}

/// In-place complex DFT. `inverse` applies the `1/n` scaling, so
/// `fft(fft(x, false), true) == x`.
pub fn fft_in_place<T: Real>(buf: &mut [Complex<T>], inverse: bool) -> Result<()> {
    let n = buf.len();
    if !is_power_of_two(n) {
        return Err(invalid(format!("DFT length {n} is not a power of two")));
    }
    if n == 1 {
        return Ok(());
    }

    // bit reversal
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }

    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        // twiddles are evaluated in f64 and rounded once
        let twiddles: Vec<Complex<T>> = (0..half)
            .map(|k| {
                let angle = sign * 2.0 * std::f64::consts::PI * k as f64 / len as f64;
                Complex::new(T::lit(angle.cos()), T::lit(angle.sin()))
            })
            .collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = buf[start + k];
                let b = buf[start + k + half] * twiddles[k];
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }

    if inverse {
        let scale = T::one() / T::from_usize_lossy(n);
        for z in buf.iter_mut() {
            *z = z.scale(scale);
        }
    }
    Ok(())
}

/// Full-grid DFT of a real sequence zero-padded (or truncated) to `nfft`.
pub fn real_dft<T: Real>(samples: &[T], nfft: usize) -> Result<Vec<Complex<T>>> {
    if !is_power_of_two(nfft) {
        return Err(invalid(format!("nfft {nfft} is not a power of two")));
    }
    let mut buf = vec![Complex::new(T::zero(), T::zero()); nfft];
    for (z, &x) in buf.iter_mut().zip(samples) {
        z.re = x;
    }
    fft_in_place(&mut buf, false)?;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[f64]) -> Vec<Complex<f64>> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold(Complex::new(0.0, 0.0), |acc, (t, &v)| {
                    let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                    acc + Complex::new(ang.cos(), ang.sin()) * v
                })
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        let x: Vec<f64> = (0..32).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let fast = real_dft(&x, 32).unwrap();
        let slow = naive_dft(&x);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn inverse_round_trip() {
        let x: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut buf = real_dft(&x, 64).unwrap();
        fft_in_place(&mut buf, true).unwrap();
        for (z, &v) in buf.iter().zip(&x) {
            assert!((z.re - v).abs() < 1e-13 && z.im.abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(real_dft(&[1.0f64, 2.0], 12).is_err());
        let mut buf = vec![Complex::new(0.0f64, 0.0); 6];
        assert!(fft_in_place(&mut buf, false).is_err());
    }

    #[test]
    fn parseval_holds() {
        let x: Vec<f64> = (0..100).map(|i| ((i * 31 % 17) as f64).cos() * 0.1).collect();
        let spec = real_dft(&x, 128).unwrap();
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = spec.iter().map(|z| z.norm_sqr()).sum::<f64>() / 128.0;
        assert!((time - freq).abs() <= 1e-9 * time);
    }
}
