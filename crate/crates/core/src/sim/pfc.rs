use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use super::{
    check_finite, detect_settled, samples_per_cycle, CapNode, LinearLoad, SimError, SimResult,
    Units, Waveform,
};

/// Outer voltage-loop crossover.
const VOLTAGE_LOOP_HZ: f64 = 5.0;
/// Low-pass on the sensed output voltage ahead of the voltage loop.
const VOLTAGE_SENSE_HZ: f64 = 20.0;

/// Boost power-factor-correction stage with average current-mode control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PfcParams {
    pub vin_rms: f64,
    pub f_line: f64,
    pub inductor: f64,
    pub cap: f64,
    pub cap_esr: f64,
    pub vout_ref: f64,
    pub f_switch: f64,
    pub load_power: f64,
    pub current_loop_bandwidth: f64,
}

impl Default for PfcParams {
    fn default() -> Self {
        PfcParams {
            vin_rms: 120.0,
            f_line: 60.0,
            inductor: 1e-3,
            cap: 220e-6,
            cap_esr: 0.15,
            vout_ref: 250.0,
            f_switch: 65e3,
            load_power: 90.0,
            current_loop_bandwidth: 5e3,
        }
    }
}

impl PfcParams {
    pub fn vin_peak(&self) -> f64 {
        SQRT_2 * self.vin_rms
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("vin_rms", self.vin_rms),
            ("f_line", self.f_line),
            ("inductor", self.inductor),
            ("cap", self.cap),
            ("cap_esr", self.cap_esr),
            ("vout_ref", self.vout_ref),
            ("f_switch", self.f_switch),
            ("load_power", self.load_power),
            ("current_loop_bandwidth", self.current_loop_bandwidth),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if self.f_switch < 100.0 * self.f_line {
            return Err(SimError::InvalidParams(format!(
                "f_switch {} Hz must be at least 100 x f_line",
                self.f_switch
            )));
        }
        if self.vout_ref <= self.vin_peak() {
            return Err(SimError::BoostInfeasible { vout_ref: self.vout_ref, vin_peak: self.vin_peak() });
        }
        Ok(())
    }
}

/// Zero-mean unit triangle at phase `x` (in cycles).
fn triangle(x: f64) -> f64 {
    4.0 * (x.fract() - 0.5).abs() - 1.0
}

/// Cycle-averaged boost model.
///
/// The inner current loop is a first-order lag at `current_loop_bandwidth`
/// tracking `A |sin(wt)|`; the amplitude `A` is the lossless power-balance
/// feedforward `2P / Vpk` trimmed by a slow PI loop on the filtered output
/// voltage. The inductor ripple of an ideal CCM boost is superimposed as a
/// triangle at `f_switch` on both the line and diode currents.
pub fn simulate_pfc(params: &PfcParams, cycles: usize, dt: f64) -> Result<SimResult, SimError> {
    params.validate()?;
    if !(dt > 0.0 && dt <= 1.0 / (20.0 * params.f_switch) * (1.0 + 1e-12)) {
        return Err(SimError::InvalidParams(format!(
            "dt = {dt:e} s exceeds 1/(20 f_switch) = {:e} s",
            1.0 / (20.0 * params.f_switch)
        )));
    }
    if cycles < 30 {
        return Err(SimError::InvalidParams(format!("need at least 30 cycles, got {cycles}")));
    }
    let spc = samples_per_cycle(params.f_line, dt)?;
    let n = cycles * spc;

    let omega = 2.0 * PI * params.f_line;
    let vpk = params.vin_peak();
    let vref = params.vout_ref;
    let node = CapNode { cap: params.cap, esr: params.cap_esr, power: params.load_power };
    let w_i = 2.0 * PI * params.current_loop_bandwidth;
    let w_f = 2.0 * PI * VOLTAGE_SENSE_HZ;
    let w_v = 2.0 * PI * VOLTAGE_LOOP_HZ;
    let kp = 2.0 * params.cap * vref * w_v / vpk;
    let ki = kp * w_v / 4.0;
    let a_ff = 2.0 * params.load_power / vpk;
    let v_floor = 0.1 * vref;

    let mut v_out = Vec::with_capacity(n);
    let mut i_cap = Vec::with_capacity(n);
    let mut i_in = Vec::with_capacity(n);
    let mut i_diode = Vec::with_capacity(n);

    let mut v_c = vref;
    let mut v = vref;
    let mut v_sense = vref;
    let mut integ = 0.0;
    let mut i_l = 0.0;

    for step in 0..n {
        let t = step as f64 * dt;
        let s = (omega * t).sin();
        let v_rect = vpk * s.abs();
        let v_div = v.max(v_floor);

        if step > 0 {
            v_sense += dt * w_f * (v - v_sense) / (1.0 + dt * w_f);
            let err = vref - v_sense;
            integ += ki * err * dt;
            let amp = (a_ff + kp * err + integ).max(0.0);
            let i_ref = amp * s.abs();
            i_l = (i_l + dt * w_i * i_ref) / (1.0 + dt * w_i);
        }
        let ripple_pp = (v_rect * (1.0 - v_rect / v_div) / (params.inductor * params.f_switch)).max(0.0);
        let tri = 0.5 * ripple_pp * triangle(t * params.f_switch);
        let i_d = i_l * v_rect / v_div + tri;

        let load = LinearLoad::around(node.power, v_div);
        if step > 0 {
            v_c = node.step(&load, v_c, i_d, dt);
            v = node.terminal(&load, v_c, i_d);
            if !v.is_finite() || v < v_floor || v > 4.0 * vref {
                return Err(SimError::NotSettled(format!(
                    "output voltage left the operating region ({v:.2} V) at t = {t:.4} s"
                )));
            }
        }
        let i_load = if step > 0 { load.current(v) } else { node.power / v };
        let i_line = i_l + tri;
        v_out.push(v);
        i_cap.push(i_d - i_load);
        i_in.push(if s < 0.0 { -i_line } else { i_line });
        i_diode.push(i_d);
    }

    check_finite("v_out", &v_out)?;
    check_finite("i_cap", &i_cap)?;
    let settled_from = detect_settled(&v_out, spc, 10)?;
    Ok(SimResult {
        v_out: Waveform::new("v_out", dt, v_out, Units::Volt)?,
        i_cap: Waveform::new("i_cap", dt, i_cap, Units::Ampere)?,
        i_in: Waveform::new("i_in", dt, i_in, Units::Ampere)?,
        i_diode: Waveform::new("i_diode", dt, i_diode, Units::Ampere)?,
        settled_from,
        f_line: params.f_line,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: f64 = 1.0 / (60.0 * 32768.0);

    #[test]
    fn triangle_is_zero_mean() {
        let m: f64 = (0..1000).map(|i| triangle(i as f64 / 1000.0)).sum::<f64>() / 1000.0;
        assert!(m.abs() < 1e-12);
        assert_eq!(triangle(0.0), 1.0);
        assert_eq!(triangle(0.5), -1.0);
    }

    #[test]
    fn rejects_infeasible_boost() {
        let p = PfcParams { vin_rms: 200.0, ..Default::default() };
        assert!(matches!(simulate_pfc(&p, 30, DT), Err(SimError::BoostInfeasible { .. })));
        let p = PfcParams { f_switch: 5e3, ..Default::default() };
        assert!(matches!(simulate_pfc(&p, 30, DT), Err(SimError::InvalidParams(_))));
    }

    #[test]
    fn energy_balance() {
        let p = PfcParams::default();
        let r = simulate_pfc(&p, 30, DT).unwrap();
        let s = r.last_cycles_start(10);
        let n = r.v_out.len() - s;
        let p_in: f64 = (s..r.v_out.len())
            .map(|k| {
                let t = k as f64 * DT;
                p.vin_peak() * (2.0 * PI * p.f_line * t).sin() * r.i_in.samples[k]
            })
            .sum::<f64>()
            / n as f64;
        let p_out: f64 = (s..r.v_out.len())
            .map(|k| r.v_out.samples[k] * (r.i_diode.samples[k] - r.i_cap.samples[k]))
            .sum::<f64>()
            / n as f64;
        assert!((p_out - p.load_power).abs() < 0.01 * p.load_power, "p_out {p_out}");
        assert!((p_in - p.load_power).abs() < 0.01 * p.load_power, "p_in {p_in}");
    }
}
