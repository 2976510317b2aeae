use serde::{Deserialize, Serialize};

use super::SimError;
use crate::numfmt::csv_num;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Ampere,
    Volt,
}

/// Uniformly sampled signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub name: String,
    pub dt: f64,
    pub samples: Vec<f64>,
    pub units: Units,
}

impl Waveform {
    pub fn new(
        name: impl Into<String>,
        dt: f64,
        samples: Vec<f64>,
        units: Units,
    ) -> Result<Self, SimError> {
        let name = name.into();
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SimError::InvalidWaveform(format!("{name}: dt must be positive, got {dt}")));
        }
        if samples.len() < 2 {
            return Err(SimError::InvalidWaveform(format!(
                "{name}: need at least 2 samples, got {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(SimError::InvalidWaveform(format!("{name}: sample {i} is not finite")));
        }
        Ok(Waveform { name, dt, samples, units })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.samples.len() as f64
    }

    pub fn rms(&self) -> f64 {
        crate::harmonics::rms(self)
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Copy of samples `[from, to)` with the same metadata.
    pub fn slice(&self, from: usize, to: usize) -> Waveform {
        Waveform {
            name: self.name.clone(),
            dt: self.dt,
            samples: self.samples[from..to].to_vec(),
            units: self.units,
        }
    }

    /// `t_seconds,value` CSV, 12 significant digits, LF endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 32 + 16);
        out.push_str("t_seconds,value\n");
        for (i, v) in self.samples.iter().enumerate() {
            out.push_str(&csv_num(i as f64 * self.dt));
            out.push(',');
            out.push_str(&csv_num(*v));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate() {
        assert!(Waveform::new("a", 0.0, vec![1.0, 2.0], Units::Volt).is_err());
        assert!(Waveform::new("a", 1.0, vec![1.0], Units::Volt).is_err());
        assert!(Waveform::new("a", 1.0, vec![1.0, f64::NAN], Units::Volt).is_err());
    }

    #[test]
    fn csv_layout() {
        let w = Waveform::new("i", 0.5, vec![1.0, -2.25, 1.0 / 3.0], Units::Ampere).unwrap();
        assert_eq!(w.to_csv(), "t_seconds,value\n0,1\n0.5,-2.25\n1,0.333333333333\n");
    }
}
