//! RMS and line-harmonic magnitudes over coherent windows.

mod fft;

pub use fft::fft_complex;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numfmt::csv_num;
use crate::sim::Waveform;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarmonicsError {
    #[error("window of {needed} samples from {from} exceeds waveform of {len} samples")]
    OutOfRange { from: usize, needed: usize, len: usize },
    #[error("incoherent window: {cycles} cycles at {f0} Hz span {samples:.6} samples, not an integer")]
    IncoherentWindow { f0: f64, cycles: usize, samples: f64 },
    #[error("FFT and Goertzel disagree at {freq} Hz: {fft} vs {goertzel}")]
    CrossCheck { freq: f64, fft: f64, goertzel: f64 },
}

/// Largest distance from an integer sample count a window may have.
pub const COHERENCE_TOLERANCE: f64 = 1e-3;

/// Relative agreement required between FFT bins and Goertzel evaluation.
pub const CROSS_CHECK_TOLERANCE: f64 = 1e-9;

/// One-sided amplitude spectrum of a real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub df: f64,
    /// `bins[0]` is the mean, interior bins are peak amplitudes, and the
    /// Nyquist bin (even N) carries `X_{N/2} / N`.
    pub bins: Vec<Complex64>,
    pub n_samples: usize,
}

impl Spectrum {
    pub fn magnitude(&self, k: usize) -> f64 {
        self.bins[k].norm()
    }

    /// Mean-square value implied by the one-sided bins.
    pub fn power(&self) -> f64 {
        let n = self.n_samples;
        self.bins
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let p = b.norm_sqr();
                if k == 0 || (n % 2 == 0 && k == n / 2) {
                    p
                } else {
                    p / 2.0
                }
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSummary {
    pub f0: f64,
    pub rms: f64,
    /// Peak amplitude at `2 f0`.
    pub h2: f64,
    /// Peak amplitude at `4 f0`.
    pub h4: f64,
    pub window_cycles: usize,
}

impl HarmonicSummary {
    pub const CSV_HEADER: &'static str = "x_kind,x_value,rms,h2,h4,f0,window_cycles";

    pub fn csv_row(&self, x_kind: &str, x_value: f64) -> String {
        format!(
            "{x_kind},{},{},{},{},{},{}",
            csv_num(x_value),
            csv_num(self.rms),
            csv_num(self.h2),
            csv_num(self.h4),
            csv_num(self.f0),
            self.window_cycles
        )
    }
}

pub fn rms(w: &Waveform) -> f64 {
    (w.samples.iter().map(|v| v * v).sum::<f64>() / w.samples.len() as f64).sqrt()
}

/// Exactly `n_cycles` line cycles starting at sample `from`.
pub fn window_integer_cycles(
    w: &Waveform,
    f0: f64,
    n_cycles: usize,
    from: usize,
) -> Result<Waveform, HarmonicsError> {
    let samples = n_cycles as f64 / (f0 * w.dt);
    let needed = samples.round();
    if n_cycles == 0 || !samples.is_finite() || (samples - needed).abs() > COHERENCE_TOLERANCE {
        return Err(HarmonicsError::IncoherentWindow { f0, cycles: n_cycles, samples });
    }
    let needed = needed as usize;
    if from + needed > w.len() {
        return Err(HarmonicsError::OutOfRange { from, needed, len: w.len() });
    }
    Ok(w.slice(from, from + needed))
}

pub fn fft(w: &Waveform) -> Spectrum {
    let n = w.len();
    let x: Vec<Complex64> = w.samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let full = fft_complex(&x);
    let scale = 1.0 / n as f64;
    let bins = (0..=n / 2)
        .map(|k| {
            let interior = k > 0 && !(n % 2 == 0 && k == n / 2);
            full[k] * if interior { 2.0 * scale } else { scale }
        })
        .collect();
    Spectrum { df: 1.0 / (n as f64 * w.dt), bins, n_samples: n }
}

/// One-sided peak amplitude at bin `k` by a single-frequency recurrence.
///
/// Uses the difference form of the Goertzel recurrence (Reinsch), which keeps
/// rounding error linear in the window length for low bins.
pub fn goertzel(samples: &[f64], k: usize) -> f64 {
    let n = samples.len();
    let omega = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
    let (u, d) = if omega.cos() >= 0.0 {
        let kk = -4.0 * (omega / 2.0).sin().powi(2);
        let (mut u, mut d) = (0.0f64, 0.0f64);
        for &x in samples {
            d += kk * u + x;
            u += d;
        }
        (u, d)
    } else {
        let kk = 4.0 * (omega / 2.0).cos().powi(2);
        let (mut u, mut d) = (0.0f64, 0.0f64);
        for &x in samples {
            d = kk * u - d + x;
            u = d - u;
        }
        (u, d)
    };
    // u = s_{N-1}; d is the running difference (cos >= 0) or sum (cos < 0)
    // of consecutive states.
    let (s1, s2) = if omega.cos() >= 0.0 { (u, u - d) } else { (u, d - u) };
    let re = s1 - omega.cos() * s2;
    let im = omega.sin() * s2;
    let mag = (re * re + im * im).sqrt() / n as f64;
    if k == 0 || (n % 2 == 0 && k == n / 2) {
        mag
    } else {
        2.0 * mag
    }
}

/// RMS, 2nd and 4th line harmonics over `n_cycles` cycles ending at the last
/// sample of `w`, cross-checked against Goertzel evaluation.
pub fn extract(w: &Waveform, f0: f64, n_cycles: usize) -> Result<HarmonicSummary, HarmonicsError> {
    let span = n_cycles as f64 / (f0 * w.dt);
    let needed = span.round() as usize;
    if needed > w.len() {
        return Err(HarmonicsError::OutOfRange { from: 0, needed, len: w.len() });
    }
    let win = window_integer_cycles(w, f0, n_cycles, w.len() - needed)?;
    extract_window(&win, f0, n_cycles)
}

/// Same as [`extract`] on a window that is already coherent.
pub fn extract_window(win: &Waveform, f0: f64, n_cycles: usize) -> Result<HarmonicSummary, HarmonicsError> {
    let spec = fft(win);
    let rms = rms(win);
    let mut mags = [0.0; 2];
    for (slot, order) in mags.iter_mut().zip([2usize, 4]) {
        let k = order * n_cycles;
        let from_fft = if k < spec.bins.len() { spec.magnitude(k) } else { 0.0 };
        let from_goertzel = if k < spec.bins.len() { goertzel(&win.samples, k) } else { 0.0 };
        let scale = from_fft.max(from_goertzel).max(rms);
        if (from_fft - from_goertzel).abs() > CROSS_CHECK_TOLERANCE * scale {
            return Err(HarmonicsError::CrossCheck {
                freq: order as f64 * f0,
                fft: from_fft,
                goertzel: from_goertzel,
            });
        }
        *slot = from_fft;
    }
    Ok(HarmonicSummary { f0, rms, h2: mags[0], h4: mags[1], window_cycles: n_cycles })
}
