use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Waveform;

/// Probe noise model applied to captured waveforms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Gaussian standard deviation as a fraction of the waveform RMS.
    pub relative_sigma: f64,
    /// Quantization step; 0 disables rounding.
    pub quantization_lsb: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { relative_sigma: 0.05, quantization_lsb: 0.0 }
    }
}

impl NoiseConfig {
    pub fn none() -> Self {
        NoiseConfig { relative_sigma: 0.0, quantization_lsb: 0.0 }
    }
}

/// Adds zero-mean Gaussian noise with standard deviation
/// `relative_sigma * rms(w)` and rounds to the quantization grid.
/// Degenerate settings (zero or negative) pass the signal through.
pub fn inject_noise(w: &Waveform, relative_sigma: f64, quantization_lsb: f64, seed: u64) -> Waveform {
    let mut out = w.clone();
    let sigma = relative_sigma * w.rms();
    if sigma > 0.0 && sigma.is_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).expect("positive finite sigma");
        for v in &mut out.samples {
            *v += normal.sample(&mut rng);
        }
    }
    if quantization_lsb > 0.0 && quantization_lsb.is_finite() {
        for v in &mut out.samples {
            *v = (*v / quantization_lsb).round_ties_even() * quantization_lsb;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Units;
    use std::f64::consts::PI;

    fn unit_rms_sine(n: usize) -> Waveform {
        let samples = (0..n)
            .map(|i| 2f64.sqrt() * (2.0 * PI * 64.0 * i as f64 / n as f64).sin())
            .collect();
        Waveform::new("s", 1.0 / n as f64, samples, Units::Ampere).unwrap()
    }

    #[test]
    fn identity_when_disabled() {
        let w = unit_rms_sine(256);
        assert_eq!(inject_noise(&w, 0.0, 0.0, 3), w);
    }

    #[test]
    fn deterministic_per_seed() {
        let w = unit_rms_sine(1024);
        let a = inject_noise(&w, 0.1, 1e-3, 42);
        let b = inject_noise(&w, 0.1, 1e-3, 42);
        assert_eq!(a, b);
        assert_ne!(a, inject_noise(&w, 0.1, 1e-3, 43));
    }

    #[test]
    fn quantizes_to_grid() {
        let w = unit_rms_sine(512);
        let q = inject_noise(&w, 0.0, 0.25, 0);
        for v in &q.samples {
            assert_eq!((v / 0.25).fract(), 0.0);
        }
    }

    #[test]
    fn rms_growth_matches_variance_sum() {
        // Monte-Carlo oracle over 100 seeds: E[rms^2] = 1 + sigma^2.
        let w = unit_rms_sine(1 << 16);
        let sigma = 0.05;
        let rms: Vec<f64> = (0..100).map(|s| inject_noise(&w, sigma, 0.0, s).rms()).collect();
        let mean_sq = rms.iter().map(|r| r * r).sum::<f64>() / rms.len() as f64;
        assert!((mean_sq - (1.0 + sigma * sigma)).abs() < 2e-4, "mean rms^2 = {mean_sq}");
        let inside = rms.iter().filter(|r| (1.0008..=1.0017).contains(*r)).count();
        assert!(inside >= 95, "{inside}/100 seeds inside [1.0008, 1.0017]");
        let fixed = inject_noise(&w, sigma, 0.0, 7).rms();
        assert!((1.0008..=1.0017).contains(&fixed), "seed 7 rms = {fixed}");
    }
}
