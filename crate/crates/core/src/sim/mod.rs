//! Time-domain simulation of the two rectifier front ends.
//!
//! Both simulators are fixed-step and semi-implicit: the capacitor state is
//! advanced with backward Euler while switching states (diode conduction,
//! switching ripple phase) are resolved explicitly per step. The load is a
//! constant-power sink linearized once per step around the previous output
//! voltage.

mod bridge;
mod noise;
mod pfc;
mod waveform;

pub use bridge::{simulate_bridge, BridgeParams};
pub use noise::{inject_noise, NoiseConfig};
pub use pfc::{simulate_pfc, PfcParams};
pub use waveform::{Units, Waveform};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("simulation did not settle: {0}")]
    NotSettled(String),
    #[error("infeasible operating point: {0}")]
    Infeasible(String),
    #[error("boost infeasible: output setpoint {vout_ref} V must exceed input peak {vin_peak:.3} V")]
    BoostInfeasible { vout_ref: f64, vin_peak: f64 },
    #[error("non-finite value in {signal} at sample {index}")]
    NonFinite { signal: &'static str, index: usize },
}

/// Steady-state-annotated waveforms of one run. All waveforms share `dt` and
/// length; `settled_from` is the first sample of the steady-state region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub v_out: Waveform,
    pub i_cap: Waveform,
    pub i_in: Waveform,
    pub i_diode: Waveform,
    pub settled_from: usize,
    /// Line fundamental the run was driven at.
    pub f_line: f64,
}

impl SimResult {
    pub fn dt(&self) -> f64 {
        self.i_cap.dt
    }

    pub fn signals(&self) -> [&Waveform; 4] {
        [&self.v_out, &self.i_cap, &self.i_in, &self.i_diode]
    }

    /// Sample index where the final `n_cycles` whole line cycles start.
    pub fn last_cycles_start(&self, n_cycles: usize) -> usize {
        let len = self.i_cap.len();
        let span = (n_cycles as f64 / (self.f_line * self.dt())).round() as usize;
        len.saturating_sub(span)
    }
}

/// Samples per line cycle, which must be (close to) an integer so cycle
/// boundaries fall on samples.
pub(crate) fn samples_per_cycle(f_line: f64, dt: f64) -> Result<usize, SimError> {
    let spc = 1.0 / (f_line * dt);
    let rounded = spc.round();
    if rounded < 2.0 || (spc - rounded).abs() > 1e-6 * rounded {
        return Err(SimError::InvalidParams(format!(
            "dt = {dt:e} s gives {spc:.6} samples per {f_line} Hz cycle; an integer is required"
        )));
    }
    Ok(rounded as usize)
}

/// Per-cycle steady-state detection on the output voltage.
///
/// Settled once the per-cycle RMS changes by less than 0.1% for three
/// consecutive cycle pairs; the region starts at the following cycle and must
/// leave at least `min_cycles` whole cycles. Peak drift between the last two
/// cycles above 0.5% is reported as not settled as well.
pub(crate) fn detect_settled(
    v_out: &[f64],
    spc: usize,
    min_cycles: usize,
) -> Result<usize, SimError> {
    let n_cycles = v_out.len() / spc;
    let cycle = |c: usize| &v_out[c * spc..(c + 1) * spc];
    let rms: Vec<f64> = (0..n_cycles)
        .map(|c| (cycle(c).iter().map(|v| v * v).sum::<f64>() / spc as f64).sqrt())
        .collect();
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);

    let mut run = 0;
    let mut settled_cycle = None;
    for c in 1..n_cycles {
        if rel(rms[c], rms[c - 1]) < 1e-3 {
            run += 1;
            if run >= 3 {
                settled_cycle = Some(c + 1);
                break;
            }
        } else {
            run = 0;
        }
    }
    let Some(start) = settled_cycle else {
        return Err(SimError::NotSettled(format!(
            "per-cycle output RMS never stabilized within {n_cycles} cycles"
        )));
    };
    if n_cycles < start + min_cycles {
        return Err(SimError::NotSettled(format!(
            "settled at cycle {start}, leaving fewer than {min_cycles} steady-state cycles"
        )));
    }
    let peak = |c: usize| cycle(c).iter().fold(f64::MIN, |m, v| m.max(*v));
    let (a, b) = (peak(n_cycles - 2), peak(n_cycles - 1));
    if rel(a, b) > 5e-3 {
        return Err(SimError::NotSettled(format!(
            "output peak drifted {:.3}% between the last two cycles",
            100.0 * rel(a, b)
        )));
    }
    Ok(start * spc)
}

pub(crate) fn check_finite(signal: &'static str, samples: &[f64]) -> Result<(), SimError> {
    match samples.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(SimError::NonFinite { signal, index }),
        None => Ok(()),
    }
}

/// Backward-Euler capacitor node with ESR and a constant-power load
/// linearized around `v_lin`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CapNode {
    pub cap: f64,
    pub esr: f64,
    pub power: f64,
}

/// Linearized load `i = j0 - g v` around `v_lin`: one Newton step of `P / v`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LinearLoad {
    pub j0: f64,
    pub g: f64,
}

impl LinearLoad {
    pub fn around(power: f64, v_lin: f64) -> Self {
        LinearLoad {
            j0: 2.0 * power / v_lin,
            g: power / (v_lin * v_lin),
        }
    }

    pub fn current(&self, v: f64) -> f64 {
        self.j0 - self.g * v
    }
}

impl CapNode {
    /// Terminal voltage for internal voltage `v_c` and injected current
    /// `i_src`, consistent with the linearized load.
    pub fn terminal(&self, load: &LinearLoad, v_c: f64, i_src: f64) -> f64 {
        (v_c + self.esr * (i_src - load.j0)) / (1.0 - self.esr * load.g)
    }

    /// Advances the internal voltage one step with a known injected current.
    pub fn step(&self, load: &LinearLoad, v_c: f64, i_src: f64, dt: f64) -> f64 {
        let d = 1.0 / (1.0 - self.esr * load.g);
        let c_dt = self.cap / dt;
        (c_dt * v_c + (i_src - load.j0) * (1.0 + load.g * d * self.esr)) / (c_dt - load.g * d)
    }
}
