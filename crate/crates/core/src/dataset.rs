//! Sweeps of the independent variable and the train/test split.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harmonics::{self, HarmonicsError};
use crate::numfmt::{csv_num, round_sig};
use crate::sim::{self, BridgeParams, NoiseConfig, PfcParams, SimError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("simulation failed at x = {x}: {source}")]
    Simulation { x: f64, source: SimError },
    #[error("harmonic extraction failed at x = {x}: {source}")]
    Extraction { x: f64, source: HarmonicsError },
    #[error("duplicate x value {0}")]
    DuplicateX(f64),
    #[error("cannot hold out {n_test} of {size} points: training needs at least {min_train}")]
    SplitInfeasible { n_test: usize, size: usize, min_train: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid sample point: {0}")]
    InvalidPoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Circuit {
    Bridge,
    Pfc,
}

impl Circuit {
    pub fn x_kind(self) -> XKind {
        match self {
            Circuit::Bridge => XKind::LoadPowerW,
            Circuit::Pfc => XKind::InputVoltageV,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Circuit::Bridge => "bridge",
            Circuit::Pfc => "pfc",
        }
    }
}

impl std::str::FromStr for Circuit {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bridge" => Ok(Circuit::Bridge),
            "pfc" => Ok(Circuit::Pfc),
            other => Err(format!("unknown circuit '{other}' (expected bridge or pfc)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum XKind {
    #[serde(rename = "load_power_W")]
    LoadPowerW,
    #[serde(rename = "input_voltage_V")]
    InputVoltageV,
}

impl XKind {
    pub fn as_str(self) -> &'static str {
        match self {
            XKind::LoadPowerW => "load_power_W",
            XKind::InputVoltageV => "input_voltage_V",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "load_power_W" => Some(XKind::LoadPowerW),
            "input_voltage_V" => Some(XKind::InputVoltageV),
            _ => None,
        }
    }

    pub fn circuit(self) -> Circuit {
        match self {
            XKind::LoadPowerW => Circuit::Bridge,
            XKind::InputVoltageV => Circuit::Pfc,
        }
    }
}

/// The three regression targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub rms: f64,
    pub h2: f64,
    pub h4: f64,
}

impl Targets {
    pub const NAMES: [&'static str; 3] = ["rms", "h2", "h4"];

    pub fn as_array(&self) -> [f64; 3] {
        [self.rms, self.h2, self.h4]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Targets { rms: a[0], h2: a[1], h4: a[2] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub x_kind: XKind,
    pub x: f64,
    pub y_rms: f64,
    pub y_h2: f64,
    pub y_h4: f64,
}

impl SamplePoint {
    pub fn targets(&self) -> Targets {
        Targets { rms: self.y_rms, h2: self.y_h2, h4: self.y_h4 }
    }

    fn validate(&self) -> Result<(), DatasetError> {
        if !self.x.is_finite() {
            return Err(DatasetError::InvalidPoint(format!("x = {}", self.x)));
        }
        for (name, v) in Targets::NAMES.iter().zip(self.targets().as_array()) {
            if !(v.is_finite() && v >= 0.0) {
                return Err(DatasetError::InvalidPoint(format!("{name} = {v} at x = {}", self.x)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub circuit: Circuit,
    pub points: Vec<SamplePoint>,
    pub seed: u64,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
}

/// Fewest training points that still allow ten-example prefixes plus a query.
pub const MIN_TRAIN: usize = 11;

/// Simulation settings shared by every point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub bridge: BridgeParams,
    pub pfc: PfcParams,
    pub cycles: usize,
    pub bridge_dt: f64,
    pub pfc_dt: f64,
    pub window_cycles: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            bridge: BridgeParams::default(),
            pfc: PfcParams::default(),
            cycles: 30,
            bridge_dt: 1.0 / (60.0 * 1024.0),
            pfc_dt: 1.0 / (60.0 * 32768.0),
            window_cycles: 10,
        }
    }
}

impl SimConfig {
    pub fn with_line_frequency(mut self, f_line: f64) -> Self {
        let bridge_spc = (1.0 / (self.bridge.f_line * self.bridge_dt)).round();
        let pfc_spc = (1.0 / (self.pfc.f_line * self.pfc_dt)).round();
        self.bridge.f_line = f_line;
        self.pfc.f_line = f_line;
        self.bridge_dt = 1.0 / (f_line * bridge_spc);
        self.pfc_dt = 1.0 / (f_line * pfc_spc);
        self
    }

    /// Runs one point: simulate, add probe noise to the capacitor current,
    /// extract harmonics over the final `window_cycles` cycles.
    pub fn measure(
        &self,
        circuit: Circuit,
        x: f64,
        noise: &NoiseConfig,
        seed: u64,
    ) -> Result<SamplePoint, DatasetError> {
        let result = match circuit {
            Circuit::Bridge => {
                let p = BridgeParams { load_power: x, ..self.bridge };
                sim::simulate_bridge(&p, self.cycles, self.bridge_dt)
            }
            Circuit::Pfc => {
                let p = PfcParams { vin_rms: x, ..self.pfc };
                sim::simulate_pfc(&p, self.cycles, self.pfc_dt)
            }
        }
        .map_err(|source| DatasetError::Simulation { x, source })?;
        let noisy = sim::inject_noise(&result.i_cap, noise.relative_sigma, noise.quantization_lsb, seed);
        let h = harmonics::extract(&noisy, result.f_line, self.window_cycles)
            .map_err(|source| DatasetError::Extraction { x, source })?;
        let point = SamplePoint {
            x_kind: circuit.x_kind(),
            x: round_sig(x, 12),
            y_rms: round_sig(h.rms, 12),
            y_h2: round_sig(h.h2, 12),
            y_h4: round_sig(h.h4, 12),
        };
        point.validate()?;
        Ok(point)
    }
}

/// `n` equally spaced values over `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub fn default_sweep(circuit: Circuit) -> Vec<f64> {
    match circuit {
        Circuit::Bridge => linspace(500.0, 950.0, 50),
        Circuit::Pfc => linspace(100.0, 152.0, 50),
    }
}

/// Stable 64-bit FNV-1a digest used to tag datasets with their settings.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf29ce484222325u64, |h, b| (h ^ *b as u64).wrapping_mul(0x100000001b3))
}

/// One point per x; point `i` draws its noise from `seed ^ i`, so results do
/// not depend on evaluation order.
pub fn sweep(
    circuit: Circuit,
    x_values: &[f64],
    sim_config: &SimConfig,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<Dataset, DatasetError> {
    check_unique(x_values)?;
    let points = x_values
        .par_iter()
        .enumerate()
        .map(|(i, &x)| sim_config.measure(circuit, x, noise, seed ^ i as u64))
        .collect::<Result<Vec<_>, _>>()?;
    let settings = serde_json::json!({ "sim": sim_config, "noise": noise });
    let provenance = format!(
        "{}-sweep n={} settings-fnv1a={:016x}",
        circuit.name(),
        points.len(),
        fnv1a(settings.to_string().as_bytes())
    );
    Ok(Dataset { circuit, points, seed, provenance })
}

fn check_unique(xs: &[f64]) -> Result<(), DatasetError> {
    let mut sorted: Vec<f64> = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    match sorted.windows(2).find(|w| w[0] == w[1]) {
        Some(w) => Err(DatasetError::DuplicateX(w[0])),
        None => Ok(()),
    }
}

/// Uniformly random hold-out of `n_test` points; both halves keep the
/// original ordering.
pub fn split(d: &Dataset, n_test: usize, seed: u64) -> Result<Split, DatasetError> {
    let size = d.points.len();
    if n_test + MIN_TRAIN > size {
        return Err(DatasetError::SplitInfeasible { n_test, size, min_train: MIN_TRAIN });
    }
    let mut idx: Vec<usize> = (0..size).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_test = vec![false; size];
    for &i in &idx[..n_test] {
        is_test[i] = true;
    }
    let pick = |want: bool, tag: &str| Dataset {
        circuit: d.circuit,
        points: d.points.iter().zip(&is_test).filter(|(_, t)| **t == want).map(|(p, _)| *p).collect(),
        seed: d.seed,
        provenance: format!("{} | {tag} split seed={seed} n_test={n_test}", d.provenance),
    };
    Ok(Split { train: pick(false, "train"), test: pick(true, "test") })
}

impl Dataset {
    pub const CSV_HEADER: &'static str = "x_kind,x,y_rms,y_h2,y_h4";

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn x_range(&self) -> Option<(f64, f64)> {
        let xs = self.xs();
        let lo = xs.iter().copied().reduce(f64::min)?;
        let hi = xs.iter().copied().reduce(f64::max)?;
        Some((lo, hi))
    }

    /// Header plus one LF-terminated row per point.
    pub fn export_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.x_kind.as_str(),
                csv_num(p.x),
                csv_num(p.y_rms),
                csv_num(p.y_h2),
                csv_num(p.y_h4)
            ));
        }
        out
    }

    /// JSON sidecar carrying what the CSV cannot.
    pub fn sidecar_json(&self) -> String {
        let v = serde_json::json!({
            "circuit": self.circuit,
            "seed": self.seed,
            "provenance": self.provenance,
            "n_points": self.points.len(),
        });
        serde_json::to_string_pretty(&v).expect("sidecar serializes") + "\n"
    }

    /// Parses a dataset CSV. The circuit follows from `x_kind`; seed and
    /// provenance come from [`Dataset::apply_sidecar`] when available.
    pub fn import_csv(text: &str) -> Result<Dataset, DatasetError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim_end_matches('\r') == Self::CSV_HEADER => {}
            Some((_, h)) => {
                return Err(DatasetError::Parse {
                    line: 1,
                    message: format!("expected header '{}', found '{h}'", Self::CSV_HEADER),
                })
            }
            None => return Err(DatasetError::Parse { line: 1, message: "empty input".into() }),
        }
        let mut points = Vec::new();
        let mut kind = None;
        for (i, line) in lines {
            let line_no = i + 1;
            if line.is_empty() {
                continue;
            }
            let err = |message: String| DatasetError::Parse { line: line_no, message };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(err(format!("expected 5 fields, found {}", fields.len())));
            }
            let x_kind = XKind::parse(fields[0]).ok_or_else(|| err(format!("unknown x_kind '{}'", fields[0])))?;
            if *kind.get_or_insert(x_kind) != x_kind {
                return Err(err("mixed x_kind values".into()));
            }
            let num = |j: usize| {
                fields[j].parse::<f64>().map_err(|e| err(format!("field {} '{}': {e}", j + 1, fields[j])))
            };
            let p = SamplePoint { x_kind, x: num(1)?, y_rms: num(2)?, y_h2: num(3)?, y_h4: num(4)? };
            p.validate().map_err(|e| err(e.to_string()))?;
            points.push(p);
        }
        check_unique(&points.iter().map(|p| p.x).collect::<Vec<_>>())?;
        Ok(Dataset {
            circuit: kind.map(XKind::circuit).unwrap_or(Circuit::Bridge),
            points,
            seed: 0,
            provenance: String::new(),
        })
    }

    pub fn apply_sidecar(&mut self, json: &str) -> Result<(), DatasetError> {
        #[derive(Deserialize)]
        struct Sidecar {
            circuit: Circuit,
            seed: u64,
            provenance: String,
        }
        let s: Sidecar = serde_json::from_str(json)
            .map_err(|e| DatasetError::Parse { line: e.line(), message: format!("sidecar: {e}") })?;
        if !self.points.is_empty() && s.circuit != self.circuit {
            return Err(DatasetError::Parse { line: 1, message: "sidecar circuit disagrees with x_kind".into() });
        }
        self.circuit = s.circuit;
        self.seed = s.seed;
        self.provenance = s.provenance;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(n: usize) -> Dataset {
        let points = linspace(500.0, 950.0, n)
            .into_iter()
            .map(|x| SamplePoint {
                x_kind: XKind::LoadPowerW,
                x: round_sig(x, 12),
                y_rms: round_sig(x.powf(0.7) / 30.0, 12),
                y_h2: round_sig(x / 150.0, 12),
                y_h4: round_sig(x.sqrt() / 20.0, 12),
            })
            .collect();
        Dataset { circuit: Circuit::Bridge, points, seed: 9, provenance: "synthetic".into() }
    }

    #[test]
    fn split_sizes() {
        let d = synthetic(50);
        let s = split(&d, 8, 1).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (42, 8));
        let train_x = s.train.xs();
        assert!(s.test.xs().iter().all(|x| !train_x.contains(x)));
        let s0 = split(&d, 0, 1).unwrap();
        assert_eq!(s0.train.points, d.points);
        assert!(s0.test.is_empty());
        assert!(matches!(split(&d, 45, 1), Err(DatasetError::SplitInfeasible { .. })));
        assert_eq!(split(&d, 8, 1).unwrap(), s);
    }

    #[test]
    fn csv_round_trip() {
        let d = synthetic(50);
        let csv = d.export_csv();
        assert_eq!(csv.lines().count(), 51);
        let mut back = Dataset::import_csv(&csv).unwrap();
        assert_eq!(back.points, d.points);
        back.apply_sidecar(&d.sidecar_json()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(
            Dataset::import_csv("x,y\n"),
            Err(DatasetError::Parse { line: 1, .. })
        ));
        let bad = format!("{}\nload_power_W,1,2,3,4\nload_power_W,2,abc,3,4\n", Dataset::CSV_HEADER);
        assert!(matches!(Dataset::import_csv(&bad), Err(DatasetError::Parse { line: 3, .. })));
        let dup = format!("{}\nload_power_W,1,2,3,4\nload_power_W,1,2,3,4\n", Dataset::CSV_HEADER);
        assert!(matches!(Dataset::import_csv(&dup), Err(DatasetError::DuplicateX(_))));
    }

    #[test]
    fn sweep_rejects_duplicates() {
        let r = sweep(Circuit::Bridge, &[600.0, 600.0], &SimConfig::default(), &NoiseConfig::none(), 0);
        assert!(matches!(r, Err(DatasetError::DuplicateX(_))));
    }

    #[test]
    fn sweep_reports_failing_x() {
        let cfg = SimConfig::default();
        let r = sweep(Circuit::Pfc, &[120.0, 190.0], &cfg, &NoiseConfig::none(), 0);
        match r {
            Err(DatasetError::Simulation { x, .. }) => assert_eq!(x, 190.0),
            other => panic!("{other:?}"),
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn split_arithmetic(n in 11usize..80, frac in 0.0f64..1.0, seed in any::<u64>()) {
                let d = synthetic(n);
                let n_test = ((n - MIN_TRAIN) as f64 * frac) as usize;
                let s = split(&d, n_test, seed).unwrap();
                prop_assert_eq!(s.test.len(), n_test);
                prop_assert_eq!(s.train.len() + s.test.len(), n);
                let tx = s.test.xs();
                prop_assert!(s.train.xs().iter().all(|x| !tx.contains(x)));
            }
        }
    }
}
