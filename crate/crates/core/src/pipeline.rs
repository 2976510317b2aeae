//! End-to-end experiment orchestration: configuration, stage functions and
//! artifact writing with a content-digest manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::baselines::{fit_gbt, fit_poly, select_poly_degree, GbtModel, GbtParams, PolyCv, PolyModel, Regressor};
use crate::dataset::{self, Circuit, Dataset, SimConfig, Split, Targets, MIN_TRAIN};
use crate::eval::{self, EvalReport, IclSweepReport, MethodPredictions};
use crate::harmonics;
use crate::model::{self, Model, ModelConfig, Prediction, TrainConfig, TrainReport};
use crate::numfmt::csv_num;
use crate::plot::{Chart, Series, Style};
use crate::prompting::{self, SerializedPrompt, Tokenizer};
use crate::sim::{self, NoiseConfig};
use crate::{Error, Result};

/// Column names of the comparison report, in order.
pub const METHOD_LLM: &str = "llm";
pub const METHOD_POLY_CV: &str = "poly_cv";
pub const METHOD_POLY1: &str = "poly_deg1";
pub const METHOD_GBT: &str = "gbt";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl SweepSpec {
    pub fn values(&self) -> Vec<f64> {
        dataset::linspace(self.lo, self.hi, self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptSpec {
    pub k: usize,
    pub n_instances: usize,
    pub digits: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub layers: usize,
    pub heads: usize,
    pub embed_dim: usize,
    pub max_context: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSpec {
    pub base_learning_rate: f64,
    pub lr_multiplier: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSpec {
    pub n_runs: usize,
    pub temperature: f64,
    pub k_values: Vec<usize>,
    pub icl_trials: usize,
    pub icl_runs: usize,
    pub poly_max_degree: usize,
    pub gbt: GbtParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub circuit: Circuit,
    pub sweep: SweepSpec,
    pub noise: NoiseConfig,
    pub sim: SimConfig,
    pub n_test: usize,
    pub prompt: PromptSpec,
    pub model: ModelSpec,
    pub train: TrainSpec,
    pub eval: EvalSpec,
    pub seed: u64,
    pub out: PathBuf,
}

/// Base step size of the optimizer before the per-circuit multiplier.
pub const DEFAULT_BASE_LR: f64 = 1e-3;

impl RunConfig {
    pub fn for_circuit(circuit: Circuit) -> Self {
        let (sweep, lr_multiplier, epochs) = match circuit {
            Circuit::Bridge => (SweepSpec { lo: 500.0, hi: 950.0, n: 50 }, 1.5, 5),
            Circuit::Pfc => (SweepSpec { lo: 100.0, hi: 152.0, n: 50 }, 1.0, 4),
        };
        let m = ModelConfig::default();
        RunConfig {
            circuit,
            sweep,
            noise: NoiseConfig::default(),
            sim: SimConfig::default(),
            n_test: 8,
            prompt: PromptSpec { k: 10, n_instances: 150, digits: prompting::DEFAULT_DIGITS },
            model: ModelSpec { layers: m.layers, heads: m.heads, embed_dim: m.embed_dim, max_context: m.max_context },
            train: TrainSpec { base_learning_rate: DEFAULT_BASE_LR, lr_multiplier, batch_size: 5, epochs },
            eval: EvalSpec {
                n_runs: model::DEFAULT_RUNS,
                temperature: model::DEFAULT_TEMPERATURE,
                k_values: vec![2, 4, 6, 8, 10],
                icl_trials: 3,
                icl_runs: model::DEFAULT_RUNS,
                poly_max_degree: 6,
                gbt: GbtParams::default(),
            },
            seed: 0,
            out: PathBuf::from("out"),
        }
    }

    /// Defaults for the circuit named by `circuit` (or in `file`, or bridge),
    /// overlaid with the keys present in `file`.
    pub fn resolve(circuit: Option<Circuit>, file: Option<&Value>) -> Result<Self> {
        let from_file = file
            .and_then(|v| v.get("circuit"))
            .map(|c| serde_json::from_value::<Circuit>(c.clone()))
            .transpose()
            .map_err(|e| Error::Config(format!("circuit: {e}")))?;
        let circuit = circuit.or(from_file).unwrap_or(Circuit::Bridge);
        let mut base = serde_json::to_value(Self::for_circuit(circuit)).expect("serializable");
        if let Some(f) = file {
            if !f.is_object() {
                return Err(Error::Config("config file must hold a JSON object".into()));
            }
            merge(&mut base, f);
        }
        base["circuit"] = serde_json::to_value(circuit).expect("serializable");
        serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn n_train(&self) -> usize {
        self.sweep.n.saturating_sub(self.n_test)
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            layers: self.model.layers,
            heads: self.model.heads,
            embed_dim: self.model.embed_dim,
            max_context: self.model.max_context,
            vocab_size: Tokenizer::default().vocab_size(),
            seed: derive_seed(self.seed, SeedTag::Init),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            base_learning_rate: self.train.base_learning_rate,
            lr_multiplier: self.train.lr_multiplier,
            batch_size: self.train.batch_size,
            epochs: self.train.epochs,
            seed: derive_seed(self.seed, SeedTag::Train),
        }
    }

    /// Checks everything that can be checked without simulating.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let s = &self.sweep;
        if !(s.lo.is_finite() && s.hi.is_finite() && s.lo < s.hi && s.lo > 0.0) || s.n < 2 {
            return bad(format!("sweep needs 0 < lo < hi and n >= 2, got {s:?}"));
        }
        if self.n_test == 0 || self.n_train() < MIN_TRAIN {
            return bad(format!(
                "split of {} points into {} test leaves {} for training, need at least {MIN_TRAIN}",
                s.n,
                self.n_test,
                self.n_train()
            ));
        }
        let n = &self.noise;
        if !(n.relative_sigma >= 0.0 && n.quantization_lsb >= 0.0) {
            return bad(format!("noise parameters must be non-negative, got {n:?}"));
        }
        let p = &self.prompt;
        if p.k == 0 || p.k + 1 > self.n_train() {
            return bad(format!("k = {} needs k + 1 <= {} training points", p.k, self.n_train()));
        }
        if !(3..=12).contains(&p.digits) {
            return bad(format!("digits must be in [3, 12], got {}", p.digits));
        }
        let available = prompting::binomial(self.n_train(), p.k + 1);
        if p.n_instances == 0 || p.n_instances as u128 > available {
            return bad(format!(
                "n_instances = {} but only {available} distinct {}-subsets exist",
                p.n_instances,
                p.k + 1
            ));
        }
        self.model_config().validate()?;
        self.train_config().validate()?;
        let e = &self.eval;
        if e.n_runs == 0 || e.icl_runs == 0 || e.icl_trials == 0 {
            return bad("n_runs, icl_runs and icl_trials must be at least 1".into());
        }
        if !(e.temperature.is_finite() && e.temperature >= 0.0) {
            return bad(format!("temperature must be non-negative, got {}", e.temperature));
        }
        if e.k_values.is_empty() || e.k_values.windows(2).any(|w| w[0] >= w[1]) || e.k_values[0] == 0 {
            return bad(format!("k_values {:?} must be positive and strictly increasing", e.k_values));
        }
        if *e.k_values.last().expect("non-empty") > self.n_train() {
            return bad(format!("largest k exceeds the {} training points", self.n_train()));
        }
        if e.poly_max_degree == 0 {
            return bad("poly_max_degree must be at least 1".into());
        }
        if !(e.gbt.shrinkage > 0.0 && e.gbt.shrinkage <= 1.0) {
            return bad(format!("gbt shrinkage {} outside (0, 1]", e.gbt.shrinkage));
        }
        Ok(())
    }
}

fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

#[derive(Debug, Clone, Copy)]
pub enum SeedTag {
    Noise = 1,
    Split = 2,
    Prompts = 3,
    Init = 4,
    Train = 5,
    Predict = 6,
    Icl = 7,
    RandomInit = 8,
}

/// Independent stream seed for one pipeline stage.
pub fn derive_seed(seed: u64, tag: SeedTag) -> u64 {
    model::run_seed(seed, tag as usize)
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects the files written by one command and emits the manifest.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    files: BTreeMap<String, (String, usize)>,
}

impl Artifacts {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Artifacts { dir, files: BTreeMap::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let bytes = bytes.as_ref();
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.insert(name.to_string(), (sha256_hex(bytes), bytes.len()));
        Ok(path)
    }

    pub fn paths(&self) -> Vec<PathBuf> {
        self.files.keys().map(|k| self.dir.join(k)).collect()
    }

    /// Writes `manifest.<command>.json` with every file and its digest, plus
    /// the resolved configuration.
    pub fn finish(self, command: &str, config: &Value) -> Result<PathBuf> {
        let files: Vec<Value> = self
            .files
            .iter()
            .map(|(name, (digest, bytes))| json!({"path": name, "sha256": digest, "bytes": bytes}))
            .collect();
        let manifest = json!({"command": command, "config": config, "files": files});
        let path = self.dir.join(format!("manifest.{command}.json"));
        let text = serde_json::to_string_pretty(&manifest).expect("serializable") + "\n";
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Reads `<stem>.csv` and, when present, its `<stem>.json` sidecar.
pub fn load_dataset(csv_path: &Path) -> Result<Dataset> {
    let mut d = Dataset::import_csv(&read_text(csv_path)?)?;
    let sidecar = csv_path.with_extension("json");
    if sidecar.exists() {
        d.apply_sidecar(&read_text(&sidecar)?)?;
    }
    Ok(d)
}

pub fn save_dataset(a: &mut Artifacts, stem: &str, d: &Dataset) -> Result<()> {
    a.write(&format!("{stem}.csv"), d.export_csv())?;
    a.write(&format!("{stem}.json"), d.sidecar_json())?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(Model::load(&mut std::io::BufReader::new(f))?)
}

pub fn model_bytes(m: &Model) -> Vec<u8> {
    let mut buf = Vec::new();
    m.save(&mut buf).expect("writing to memory");
    buf
}

/// Simulates one operating point and writes each signal as CSV, plus a noisy
/// copy of the capacitor current and a JSON sidecar.
pub fn simulate_point(cfg: &RunConfig, x: f64, a: &mut Artifacts) -> Result<()> {
    let (result, params) = match cfg.circuit {
        Circuit::Bridge => {
            let p = sim::BridgeParams { load_power: x, ..cfg.sim.bridge };
            (sim::simulate_bridge(&p, cfg.sim.cycles, cfg.sim.bridge_dt)?, serde_json::to_value(p).expect("ser"))
        }
        Circuit::Pfc => {
            let p = sim::PfcParams { vin_rms: x, ..cfg.sim.pfc };
            (sim::simulate_pfc(&p, cfg.sim.cycles, cfg.sim.pfc_dt)?, serde_json::to_value(p).expect("ser"))
        }
    };
    for w in result.signals() {
        a.write(&format!("{}.csv", w.name), w.to_csv())?;
    }
    let seed = derive_seed(cfg.seed, SeedTag::Noise);
    let noisy = sim::inject_noise(&result.i_cap, cfg.noise.relative_sigma, cfg.noise.quantization_lsb, seed);
    a.write("i_cap_noisy.csv", noisy.to_csv())?;
    let clean = harmonics::extract(&result.i_cap, result.f_line, cfg.sim.window_cycles)?;
    let measured = harmonics::extract(&noisy, result.f_line, cfg.sim.window_cycles)?;
    let side = json!({
        "circuit": cfg.circuit,
        "x_kind": cfg.circuit.x_kind(),
        "x": x,
        "params": params,
        "cycles": cfg.sim.cycles,
        "dt": result.dt(),
        "settled_from_sample": result.settled_from,
        "seed": cfg.seed,
        "noise": cfg.noise,
        "harmonics_clean": clean,
        "harmonics_noisy": measured,
    });
    a.write("simulation.json", serde_json::to_string_pretty(&side).expect("ser") + "\n")?;
    Ok(())
}

/// Sweeps the configured range and holds out `n_test` points.
pub fn build_dataset(cfg: &RunConfig) -> Result<(Dataset, Split)> {
    let d = dataset::sweep(cfg.circuit, &cfg.sweep.values(), &cfg.sim, &cfg.noise, derive_seed(cfg.seed, SeedTag::Noise))?;
    let s = dataset::split(&d, cfg.n_test, derive_seed(cfg.seed, SeedTag::Split))?;
    Ok((d, s))
}

/// Samples and serializes the training prompts, checking they fit the context.
pub fn build_prompts(cfg: &RunConfig, train: &Dataset) -> Result<Vec<SerializedPrompt>> {
    let inst = prompting::sample_instances(train, cfg.prompt.k, cfg.prompt.n_instances, derive_seed(cfg.seed, SeedTag::Prompts))?;
    let ser = inst.iter().map(|p| prompting::serialize(p, cfg.prompt.digits)).collect::<Result<Vec<_>, _>>()?;
    if let Some((i, p)) = ser.iter().enumerate().find(|(_, p)| p.full_text().chars().count() > cfg.model.max_context) {
        return Err(Error::Config(format!(
            "prompt {i} needs {} tokens but max_context is {}",
            p.full_text().chars().count(),
            cfg.model.max_context
        )));
    }
    Ok(ser)
}

pub fn train_model(
    cfg: &RunConfig,
    prompts: &[SerializedPrompt],
    on_step: impl FnMut(usize, usize, f64),
) -> Result<(Model, TrainReport)> {
    let mut m = Model::new(cfg.model_config(), Tokenizer::default())?;
    let report = m.fit(prompts, &cfg.train_config(), on_step)?;
    Ok((m, report))
}

pub fn untrained_model(cfg: &RunConfig) -> Result<Model> {
    let mc = ModelConfig { seed: derive_seed(cfg.seed, SeedTag::RandomInit), ..cfg.model_config() };
    Ok(Model::new(mc, Tokenizer::default())?)
}

/// Mean of `n_runs` sampled completions at `x`, prefixed by `k` equally
/// spaced training examples.
pub fn predict_at(cfg: &RunConfig, m: &Model, train: &Dataset, x: f64) -> Result<Prediction> {
    let inst = prompting::build_eval_instance(train, x, cfg.prompt.k)?;
    let seed = model::run_seed(derive_seed(cfg.seed, SeedTag::Predict), x.to_bits() as usize);
    Ok(m.predict_mean(&inst, cfg.prompt.digits, cfg.eval.n_runs, cfg.eval.temperature, seed)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPrediction {
    pub x: f64,
    pub prediction: Prediction,
}

pub fn predict_test(cfg: &RunConfig, m: &Model, split: &Split) -> Result<Vec<PointPrediction>> {
    split
        .test
        .points
        .iter()
        .map(|p| Ok(PointPrediction { x: p.x, prediction: predict_at(cfg, m, &split.train, p.x)? }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub poly_cv: PolyModel,
    pub cv_table: Vec<PolyCv>,
    pub poly_deg1: PolyModel,
    pub gbt: GbtModel,
}

pub fn fit_baselines(cfg: &RunConfig, train: &Dataset) -> Result<Baselines> {
    let (poly_cv, cv_table) = select_poly_degree(train, 1..=cfg.eval.poly_max_degree)?;
    Ok(Baselines { poly_cv, cv_table, poly_deg1: fit_poly(train, 1)?, gbt: fit_gbt(train, cfg.eval.gbt)? })
}

fn baseline_predictions(name: &str, r: &dyn Regressor, test: &Dataset) -> MethodPredictions {
    MethodPredictions { name: name.into(), predictions: test.points.iter().map(|p| (p.x, r.predict(p.x))).collect() }
}

/// Model first, so ties in the winner flags go to it.
pub fn evaluate(split: &Split, llm: &[PointPrediction], b: &Baselines) -> Result<EvalReport> {
    let methods = vec![
        MethodPredictions { name: METHOD_LLM.into(), predictions: llm.iter().map(|p| (p.x, p.prediction.mean)).collect() },
        baseline_predictions(METHOD_POLY_CV, &b.poly_cv, &split.test),
        baseline_predictions(METHOD_POLY1, &b.poly_deg1, &split.test),
        baseline_predictions(METHOD_GBT, &b.gbt, &split.test),
    ];
    Ok(eval::build_report(&split.test, &methods, split.train.x_range())?)
}

pub fn icl_sweep(cfg: &RunConfig, m: &Model, split: &Split) -> Result<IclSweepReport> {
    let e = &cfg.eval;
    let predict = |inst: &prompting::PromptInstance, seed: u64| {
        m.predict_mean(inst, cfg.prompt.digits, e.icl_runs, e.temperature, seed).map(|p| p.mean)
    };
    Ok(eval::icl_sweep(predict, &split.train, &split.test, &e.k_values, e.icl_trials, derive_seed(cfg.seed, SeedTag::Icl))?)
}

/// Tables I/II-style text: one row per test point, APE per method and
/// target, `*` marking the best method in each target column.
pub fn render_table(r: &EvalReport, circuit: Circuit) -> String {
    let mut s = format!(
        "{} comparison, {} test points (APE %, * = best per target)\n",
        circuit.name(),
        r.n_points
    );
    let x_head = circuit.x_kind().as_str();
    let mut header = format!("{x_head:>16}");
    for t in Targets::NAMES {
        for m in &r.methods {
            header.push_str(&format!(" {:>14}", format!("{m}:{t}")));
        }
    }
    s.push_str(&header);
    s.push('\n');
    for row in &r.rows {
        let mut line = format!("{:>16}", format!("{}{}", csv_num(row.x), if row.extrapolated { " (ext)" } else { "" }));
        for t in 0..3 {
            for m in 0..r.methods.len() {
                let star = if row.winner[t] == m { "*" } else { " " };
                line.push_str(&format!(" {:>13.4}{star}", row.ape[m][t]));
            }
        }
        s.push_str(&line);
        s.push('\n');
    }
    let mut line = format!("{:>16}", "MAPE");
    for t in 0..3 {
        let best = (1..r.methods.len()).fold(0, |b, m| if r.mape[m][t] < r.mape[b][t] { m } else { b });
        for m in 0..r.methods.len() {
            let star = if best == m { "*" } else { " " };
            line.push_str(&format!(" {:>13.4}{star}", r.mape[m][t]));
        }
    }
    s.push_str(&line);
    s.push('\n');
    s
}

pub fn loss_chart(r: &TrainReport) -> String {
    let raw: Vec<(f64, f64)> = r.loss_per_step.iter().map(|&(s, l)| (s as f64, l)).collect();
    let smooth: Vec<(f64, f64)> =
        raw.iter().zip(r.smoothed(eval::LOSS_SMOOTHING)).map(|(&(s, _), l)| (s, l)).collect();
    Chart::new("Training loss", "optimizer step", "cross-entropy (nats/token)")
        .with(Series::new("loss", raw, Style::Line))
        .with(Series::new("smoothed", smooth, Style::Line))
        .to_svg()
}

/// Actual (first series) against model prediction for target `t`.
pub fn scatter_chart(r: &EvalReport, circuit: Circuit, t: usize) -> String {
    let actual = r.rows.iter().map(|row| (row.x, row.actual.as_array()[t])).collect();
    let mut chart = Chart::new(
        format!("{} {} ripple current: actual vs predicted", circuit.name(), Targets::NAMES[t]),
        circuit.x_kind().as_str(),
        "current (A)",
    )
    .with(Series::new("actual", actual, Style::Dots));
    for (m, name) in r.methods.iter().enumerate() {
        let pts = r.rows.iter().map(|row| (row.x, row.predicted[m].as_array()[t])).collect();
        chart = chart.with(Series::new(name.clone(), pts, Style::Dots));
    }
    chart.to_svg()
}

pub fn icl_chart(sweeps: &[(&str, &IclSweepReport)]) -> String {
    let mut chart = Chart::new("In-context example count", "k (prefix examples)", "mean APE (%)");
    for (label, r) in sweeps {
        for t in 0..3 {
            let pts = r
                .k_values
                .iter()
                .filter_map(|&k| r.cell(k, t).and_then(|c| c.mean_ape).map(|v| (k as f64, v)))
                .collect();
            chart = chart.with(Series::new(format!("{label} {}", Targets::NAMES[t]), pts, Style::Line));
        }
    }
    chart.to_svg()
}

pub fn write_dataset_stage(a: &mut Artifacts, d: &Dataset, s: &Split) -> Result<()> {
    save_dataset(a, "dataset", d)?;
    save_dataset(a, "train", &s.train)?;
    save_dataset(a, "test", &s.test)?;
    Ok(())
}

pub fn write_train_stage(a: &mut Artifacts, m: &Model, r: &TrainReport) -> Result<()> {
    a.write("model.ckpt", model_bytes(m))?;
    a.write("loss.csv", r.to_csv())?;
    a.write("loss_report.csv", eval::loss_report(r)?)?;
    a.write("loss.svg", loss_chart(r))?;
    Ok(())
}

pub fn write_eval_stage(a: &mut Artifacts, circuit: Circuit, preds: &[PointPrediction], b: &Baselines, r: &EvalReport) -> Result<()> {
    a.write("predictions.json", serde_json::to_string_pretty(preds).expect("ser") + "\n")?;
    a.write("baselines.json", serde_json::to_string_pretty(b).expect("ser") + "\n")?;
    a.write("eval_report.csv", r.to_csv())?;
    a.write("eval_report.json", serde_json::to_string_pretty(r).expect("ser") + "\n")?;
    a.write("eval_summary.json", r.summary_json() + "\n")?;
    for (t, name) in Targets::NAMES.iter().enumerate() {
        a.write(&format!("eval_scatter_{name}.svg"), scatter_chart(r, circuit, t))?;
    }
    a.write("report.txt", render_table(r, circuit))?;
    Ok(())
}

pub fn write_icl_stage(a: &mut Artifacts, trained: &IclSweepReport, random: &IclSweepReport) -> Result<()> {
    a.write("icl_sweep.csv", trained.to_csv())?;
    a.write("icl_sweep_random.csv", random.to_csv())?;
    a.write("icl_sweep.json", serde_json::to_string_pretty(&json!({"trained": trained, "random": random})).expect("ser") + "\n")?;
    a.write("icl_sweep.svg", icl_chart(&[("trained", trained), ("random", random)]))?;
    Ok(())
}

/// Everything one full run produces, kept in memory for callers that want
/// to inspect results.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dataset: Dataset,
    pub split: Split,
    pub prompts: Vec<SerializedPrompt>,
    pub model: Model,
    pub train_report: TrainReport,
    pub predictions: Vec<PointPrediction>,
    pub baselines: Baselines,
    pub report: EvalReport,
    pub icl_trained: IclSweepReport,
    pub icl_random: IclSweepReport,
    pub manifest: PathBuf,
}

/// The full chain: dataset, prompts, training, evaluation against the
/// baselines, in-context sweep, then the manifest.
pub fn run_all(cfg: &RunConfig, mut progress: impl FnMut(&str)) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut a = Artifacts::new(&cfg.out)?;
    a.write("config.json", serde_json::to_string_pretty(cfg).expect("ser") + "\n")?;
    progress("simulating sweep");
    let (dataset, split) = build_dataset(cfg)?;
    write_dataset_stage(&mut a, &dataset, &split)?;
    let prompts = build_prompts(cfg, &split.train)?;
    a.write("prompts.jsonl", prompting::to_jsonl(&prompts))?;
    progress("training");
    let (model, train_report) = train_model(cfg, &prompts, |s, n, l| {
        if s == 1 || s % 10 == 0 || s == n {
            progress(&format!("step {s}/{n} loss {l:.4}"));
        }
    })?;
    write_train_stage(&mut a, &model, &train_report)?;
    progress("predicting held-out points");
    let predictions = predict_test(cfg, &model, &split)?;
    let baselines = fit_baselines(cfg, &split.train)?;
    let report = evaluate(&split, &predictions, &baselines)?;
    write_eval_stage(&mut a, cfg.circuit, &predictions, &baselines, &report)?;
    progress("in-context sweep");
    let icl_trained = icl_sweep(cfg, &model, &split)?;
    let icl_random = icl_sweep(cfg, &untrained_model(cfg)?, &split)?;
    write_icl_stage(&mut a, &icl_trained, &icl_random)?;
    let manifest = a.finish("run", &serde_json::to_value(cfg).expect("ser"))?;
    Ok(RunOutcome {
        dataset,
        split,
        prompts,
        model,
        train_report,
        predictions,
        baselines,
        report,
        icl_trained,
        icl_random,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::for_circuit(Circuit::Bridge).validate().unwrap();
        RunConfig::for_circuit(Circuit::Pfc).validate().unwrap();
    }

    #[test]
    fn file_overrides_defaults() {
        let file = json!({"circuit": "pfc", "prompt": {"k": 4}, "train": {"epochs": 2}, "seed": 9});
        let c = RunConfig::resolve(None, Some(&file)).unwrap();
        assert_eq!(c.circuit, Circuit::Pfc);
        assert_eq!(c.prompt.k, 4);
        assert_eq!(c.prompt.digits, 6);
        assert_eq!(c.train.epochs, 2);
        assert_eq!(c.train.lr_multiplier, 1.0);
        assert_eq!(c.sweep.lo, 100.0);
        let c = RunConfig::resolve(Some(Circuit::Bridge), Some(&file)).unwrap();
        assert_eq!((c.circuit, c.sweep.lo, c.seed), (Circuit::Bridge, 500.0, 9));
        assert!(RunConfig::resolve(None, Some(&json!({"promt": {}}))).is_err());
        assert!(RunConfig::resolve(None, Some(&json!({"prompt": {"kk": 1}}))).is_err());
    }

    #[test]
    fn validation_catches_inconsistency() {
        let mut c = RunConfig::for_circuit(Circuit::Bridge);
        c.prompt.k = 42;
        assert!(c.validate().is_err());
        let mut c = RunConfig::for_circuit(Circuit::Bridge);
        c.eval.k_values = vec![4, 2];
        assert!(c.validate().is_err());
        let mut c = RunConfig::for_circuit(Circuit::Bridge);
        c.model.heads = 3;
        assert!(c.validate().is_err());
        let mut c = RunConfig::for_circuit(Circuit::Bridge);
        c.n_test = 45;
        assert!(c.validate().is_err());
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn stage_seeds_differ() {
        let tags = [SeedTag::Noise, SeedTag::Split, SeedTag::Prompts, SeedTag::Init, SeedTag::Train];
        let seeds: std::collections::HashSet<u64> = tags.iter().map(|t| derive_seed(0, *t)).collect();
        assert_eq!(seeds.len(), tags.len());
    }

    #[test]
    fn table_marks_winners() {
        let test = Dataset {
            circuit: Circuit::Bridge,
            points: vec![crate::dataset::SamplePoint {
                x_kind: crate::dataset::XKind::LoadPowerW,
                x: 600.0,
                y_rms: 2.0,
                y_h2: 1.0,
                y_h4: 0.5,
            }],
            seed: 0,
            provenance: String::new(),
        };
        let m = |name: &str, f: f64| MethodPredictions {
            name: name.into(),
            predictions: vec![(600.0, Targets { rms: 2.0 * f, h2: 1.0, h4: 0.5 * f })],
        };
        let r = eval::build_report(&test, &[m("a", 1.1), m("b", 1.05)], None).unwrap();
        let t = render_table(&r, Circuit::Bridge);
        assert!(t.contains("a:rms"));
        let row = t.lines().nth(2).unwrap();
        assert_eq!(row.matches('*').count(), 3);
        assert!(row.contains("5.0000*"));
    }
}
