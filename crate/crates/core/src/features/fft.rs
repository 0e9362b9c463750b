//! Iterative radix-2 decimation-in-time FFT.

use num_complex::Complex64;
use std::f64::consts::PI;

use super::FeatureError;

/// Precomputed bit-reversal table and twiddles for one transform length.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    bitrev: Vec<usize>,
    // e^{-2πik/n} for k in 0..n/2
    twiddles: Vec<Complex64>,
}

impl FftPlan {
    pub fn new(n: usize) -> Result<Self, FeatureError> {
        if n == 0 || !n.is_power_of_two() {
            return Err(FeatureError::NonPowerOfTwoLength(n));
        }
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (usize::BITS - bits)
                }
            })
            .collect();
        let twiddles = (0..n / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        Ok(Self { n, bitrev, twiddles })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place transform. The inverse is scaled by `1/n`.
    pub fn process(&self, buf: &mut [Complex64], inverse: bool) {
        assert_eq!(buf.len(), self.n, "buffer length does not match plan");
        let n = self.n;
        for i in 0..n {
            let j = self.bitrev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut half = 1;
        while half < n {
            let stride = n / (2 * half);
            for start in (0..n).step_by(2 * half) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            half *= 2;
        }
        if inverse {
            let scale = 1.0 / n as f64;
            for v in buf.iter_mut() {
                *v *= scale;
            }
        }
    }
}

/// One-shot transform of `frame`; see [`FftPlan`] for repeated use.
pub fn fft(frame: &[Complex64], inverse: bool) -> Result<Vec<Complex64>, FeatureError> {
    let plan = FftPlan::new(frame.len())?;
    let mut buf = frame.to_vec();
    plan.process(&mut buf, inverse);
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::SplitMix64;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, &v)| v * Complex64::from_polar(1.0, -2.0 * PI * (k * t) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    fn random_signal(rng: &mut SplitMix64, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.next_f64() * 2.0 - 1.0, rng.next_f64() * 2.0 - 1.0))
            .collect()
    }

    #[test]
    fn impulse_and_constant() {
        let mut impulse = vec![Complex64::new(0.0, 0.0); 8];
        impulse[0] = Complex64::new(1.0, 0.0);
        for v in fft(&impulse, false).unwrap() {
            assert_eq!(v, Complex64::new(1.0, 0.0));
        }
        let ones = vec![Complex64::new(1.0, 0.0); 8];
        let out = fft(&ones, false).unwrap();
        assert!((out[0] - Complex64::new(8.0, 0.0)).norm() < 1e-12);
        for v in &out[1..] {
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert_eq!(
            fft(&[Complex64::new(0.0, 0.0); 6], false).unwrap_err(),
            FeatureError::NonPowerOfTwoLength(6)
        );
        assert!(FftPlan::new(0).is_err());
        assert_eq!(
            fft(&[Complex64::new(3.0, 1.0)], false).unwrap(),
            vec![Complex64::new(3.0, 1.0)]
        );
    }

    #[test]
    fn matches_naive_dft_at_512() {
        let mut rng = SplitMix64::new(7);
        let x = random_signal(&mut rng, 512);
        let fast = fft(&x, false).unwrap();
        let slow = naive_dft(&x);
        let err = fast.iter().zip(&slow).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-4, "max abs error {err}");
    }

    #[test]
    fn parseval_on_windowed_frames() {
        let mut rng = SplitMix64::new(11);
        let window = super::super::hann_window(256);
        for _ in 0..20 {
            let x: Vec<Complex64> = random_signal(&mut rng, 256)
                .into_iter()
                .zip(&window)
                .map(|(v, &w)| Complex64::new(v.re * w, 0.0))
                .collect();
            let spec = fft(&x, false).unwrap();
            let time: f64 = x.iter().map(|v| v.norm_sqr()).sum();
            let freq: f64 = spec.iter().map(|v| v.norm_sqr()).sum::<f64>() / 256.0;
            assert!(((time - freq) / time).abs() < 1e-5);
        }
    }

    #[test]
    fn inverse_round_trip_up_to_4096() {
        let mut rng = SplitMix64::new(3);
        for n in [1, 2, 64, 1024, 4096] {
            let x = random_signal(&mut rng, n);
            let back = fft(&fft(&x, false).unwrap(), true).unwrap();
            let err = x.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-5, "n={n} err={err}");
        }
    }
}
