//! Fourier representation of plate quantities on the horizontal torus.
//! The stiffness `Delta^2` and damping `Delta` act diagonally on modes,
//! which the plate integrator exploits mode by mode.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// FFT plans plus wavenumber bookkeeping for one plate grid.
pub struct PlateSpectral {
    n: usize,
    period: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl PlateSpectral {
    pub fn new(n: usize, period: f64) -> PlateSpectral {
        let mut planner = FftPlanner::new();
        PlateSpectral {
            n,
            period,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn period(&self) -> f64 {
        self.period
    }

    /// Signed wavenumber of mode index `m` (standard FFT ordering).
    #[inline]
    pub fn wavenumber(&self, m: usize) -> f64 {
        let half = self.n / 2;
        let k = if m <= half { m as f64 } else { m as f64 - self.n as f64 };
        std::f64::consts::TAU * k / self.period
    }

    /// Fourier coefficients such that `w(x) = sum_m c_m exp(i k_m x)`.
    pub fn forward(&self, samples: &[f64]) -> Vec<Complex64> {
        assert_eq!(samples.len(), self.n, "sample count must match the plan");
        let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        for c in &mut buf {
            *c *= scale;
        }
        buf
    }

    /// Inverse transform back to samples (real parts; the imaginary parts of
    /// Hermitian spectra are round-off).
    pub fn inverse(&self, modes: &[Complex64]) -> Vec<f64> {
        assert_eq!(modes.len(), self.n, "mode count must match the plan");
        let mut buf = modes.to_vec();
        self.inv.process(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    /// Spectral derivative of given even order `p` (`p = 2` gives `Delta`,
    /// `p = 4` gives `Delta^2`).
    pub fn even_derivative(&self, samples: &[f64], p: u32) -> Vec<f64> {
        let mut modes = self.forward(samples);
        for (m, c) in modes.iter_mut().enumerate() {
            let k = self.wavenumber(m);
            let factor = match p {
                2 => -k * k,
                4 => k * k * k * k,
                _ => panic!("only second and fourth derivatives are wired up"),
            };
            *c *= factor;
        }
        self.inverse(&modes)
    }

    pub fn laplacian(&self, samples: &[f64]) -> Vec<f64> {
        self.even_derivative(samples, 2)
    }

    pub fn bilaplacian(&self, samples: &[f64]) -> Vec<f64> {
        self.even_derivative(samples, 4)
    }

    /// `integral |f|^2 dx` over the torus via Parseval.
    pub fn norm_sq(&self, samples: &[f64]) -> f64 {
        let modes = self.forward(samples);
        self.period * modes.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// `integral |f'|^2 dx` via Parseval.
    pub fn grad_norm_sq(&self, samples: &[f64]) -> f64 {
        let modes = self.forward(samples);
        self.period
            * modes
                .iter()
                .enumerate()
                .map(|(m, c)| {
                    let k = self.wavenumber(m);
                    k * k * c.norm_sqr()
                })
                .sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn constant_has_only_mean_mode() {
        let sp = PlateSpectral::new(16, std::f64::consts::TAU);
        let modes = sp.forward(&vec![2.5; 16]);
        assert!((modes[0].re - 2.5).abs() < 1e-13);
        for c in &modes[1..] {
            assert!(c.norm() < 1e-13);
        }
    }

    #[test]
    fn round_trip_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let sp = PlateSpectral::new(24, std::f64::consts::TAU);
        let w: Vec<f64> = (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let back = sp.inverse(&sp.forward(&w));
        let err = w
            .iter()
            .zip(&back)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let scale = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err / scale < 1e-12, "relative round-trip error {}", err / scale);
    }

    #[test]
    fn bilaplacian_eigenfunction() {
        let sp = PlateSpectral::new(32, std::f64::consts::TAU);
        let k = 3.0;
        let w: Vec<f64> = (0..32)
            .map(|i| (k * i as f64 * std::f64::consts::TAU / 32.0).sin())
            .collect();
        let d4 = sp.bilaplacian(&w);
        for (a, b) in d4.iter().zip(&w) {
            assert!((a - k.powi(4) * b).abs() < 1e-9, "{a} vs {}", k.powi(4) * b);
        }
    }

    #[test]
    fn parseval_matches_trapezoid() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 20;
        let sp = PlateSpectral::new(n, std::f64::consts::TAU);
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let spectral = sp.norm_sq(&w);
        let hx = std::f64::consts::TAU / n as f64;
        let physical: f64 = w.iter().map(|v| v * v).sum::<f64>() * hx;
        assert!((spectral - physical).abs() < 1e-10 * physical.max(1.0));
    }
}
