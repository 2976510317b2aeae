use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use super::{
    check_finite, detect_settled, samples_per_cycle, CapNode, LinearLoad, SimError, SimResult,
    Units, Waveform,
};

/// Single-phase diode bridge feeding a DC-link capacitor and a
/// constant-power load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeParams {
    pub vin_rms: f64,
    pub f_line: f64,
    pub cap: f64,
    pub cap_esr: f64,
    /// Forward drop per diode; two diodes conduct at a time.
    pub diode_drop: f64,
    pub source_resistance: f64,
    pub source_inductance: f64,
    pub load_power: f64,
}

impl Default for BridgeParams {
    fn default() -> Self {
        BridgeParams {
            vin_rms: 120.0,
            f_line: 60.0,
            cap: 2200e-6,
            cap_esr: 0.12,
            diode_drop: 0.7,
            source_resistance: 0.5,
            source_inductance: 50e-6,
            load_power: 626.0,
        }
    }
}

impl BridgeParams {
    /// Declared simulable load range in watts.
    pub const LOAD_RANGE: (f64, f64) = (1e-6, 5000.0);

    pub fn vin_peak(&self) -> f64 {
        SQRT_2 * self.vin_rms
    }

    /// Open-circuit DC-link voltage.
    pub fn v_nominal(&self) -> f64 {
        self.vin_peak() - 2.0 * self.diode_drop
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("vin_rms", self.vin_rms),
            ("f_line", self.f_line),
            ("cap", self.cap),
            ("cap_esr", self.cap_esr),
            ("source_resistance", self.source_resistance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("diode_drop", self.diode_drop), ("source_inductance", self.source_inductance)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SimError::InvalidParams(format!("{name} must be non-negative, got {v}")));
            }
        }
        let (lo, hi) = Self::LOAD_RANGE;
        if !(self.load_power >= lo && self.load_power <= hi) {
            return Err(SimError::InvalidParams(format!(
                "load_power {} W outside simulable range [{lo}, {hi}] W",
                self.load_power
            )));
        }
        if self.v_nominal() <= 0.0 {
            return Err(SimError::InvalidParams("diode drops exceed the source peak".into()));
        }
        Ok(())
    }
}

/// Simulates `cycles` line cycles at fixed step `dt`.
///
/// The capacitor starts precharged to the open-circuit voltage. The line
/// inductor current is tracked on the rectified side and the bridge is
/// modeled as an ideal switch with constant drop: it conducts while that
/// current is positive or the rectified source exceeds the output voltage.
pub fn simulate_bridge(params: &BridgeParams, cycles: usize, dt: f64) -> Result<SimResult, SimError> {
    params.validate()?;
    if !(dt > 0.0 && dt <= 1.0 / (200.0 * params.f_line) * (1.0 + 1e-12)) {
        return Err(SimError::InvalidParams(format!(
            "dt = {dt:e} s exceeds 1/(200 f_line) = {:e} s",
            1.0 / (200.0 * params.f_line)
        )));
    }
    if cycles < 30 {
        return Err(SimError::InvalidParams(format!("need at least 30 cycles, got {cycles}")));
    }
    let spc = samples_per_cycle(params.f_line, dt)?;
    let n = cycles * spc;

    let omega = 2.0 * PI * params.f_line;
    let vpk = params.vin_peak();
    let v_nom = params.v_nominal();
    let two_drops = 2.0 * params.diode_drop;
    let node = CapNode { cap: params.cap, esr: params.cap_esr, power: params.load_power };
    let l_dt = params.source_inductance / dt;
    let a = l_dt + params.source_resistance;
    let c_dt = params.cap / dt;
    let v_floor = 0.1 * v_nom;

    let mut v_out = Vec::with_capacity(n);
    let mut i_cap = Vec::with_capacity(n);
    let mut i_in = Vec::with_capacity(n);
    let mut i_diode = Vec::with_capacity(n);

    let mut v_c = v_nom;
    let mut i = 0.0f64;
    let mut v = v_nom;
    let mut i_load = node.power / v_nom;

    for step in 0..n {
        let t = step as f64 * dt;
        let s = (omega * t).sin();
        if step > 0 {
            let e = vpk * s.abs() - two_drops;
            let load = LinearLoad::around(node.power, v.max(v_floor));

            let v_c_off = node.step(&load, v_c, 0.0, dt);
            let v_off = node.terminal(&load, v_c_off, 0.0);
            let mut next = (0.0, v_c_off);
            if i > 0.0 || e > v_off {
                let d = 1.0 / (1.0 - node.esr * load.g);
                let m11 = a + d * node.esr;
                let m12 = d;
                let r1 = e + l_dt * i + d * node.esr * load.j0;
                let m21 = -(1.0 + load.g * d * node.esr);
                let m22 = c_dt - load.g * d;
                let r2 = c_dt * v_c - load.j0 * (1.0 + load.g * d * node.esr);
                let det = m11 * m22 - m12 * m21;
                let i_on = (r1 * m22 - m12 * r2) / det;
                if i_on > 0.0 {
                    next = (i_on, (m11 * r2 - m21 * r1) / det);
                }
            }
            (i, v_c) = next;
            v = node.terminal(&load, v_c, i);
            i_load = load.current(v);
            if !(v > 0.0) {
                return Err(SimError::Infeasible(format!(
                    "output voltage reached {v:.3} V at {:.1} W",
                    params.load_power
                )));
            }
        }
        v_out.push(v);
        i_cap.push(i - i_load);
        i_in.push(if s < 0.0 { -i } else { i });
        i_diode.push(i);
    }

    check_finite("v_out", &v_out)?;
    check_finite("i_cap", &i_cap)?;
    let settled_from = detect_settled(&v_out, spc, 10)?;
    let v_min = v_out[settled_from..].iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if v_min < 0.5 * v_nom {
        return Err(SimError::Infeasible(format!(
            "steady-state output dips to {v_min:.2} V at {:.1} W; the source cannot deliver this load",
            params.load_power
        )));
    }
    Ok(SimResult {
        v_out: Waveform::new("v_out", dt, v_out, Units::Volt)?,
        i_cap: Waveform::new("i_cap", dt, i_cap, Units::Ampere)?,
        i_in: Waveform::new("i_in", dt, i_in, Units::Ampere)?,
        i_diode: Waveform::new("i_diode", dt, i_diode, Units::Ampere)?,
        settled_from,
        f_line: params.f_line,
    })
}
