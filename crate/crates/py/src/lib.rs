//! Python bindings: simulation, harmonic extraction, datasets, prompts, the
//! sequence model, baselines and the full pipeline.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ripple_core::baselines::{self, Regressor};
use ripple_core::dataset::{self, Circuit, SimConfig, Targets};
use ripple_core::model::{self as core_model, ModelConfig, TrainConfig};
use ripple_core::pipeline::{self, RunConfig};
use ripple_core::prompting::{self, Example, PromptInstance, SerializedPrompt, Tokenizer};
use ripple_core::sim::{self, NoiseConfig, Units, Waveform};
use ripple_core::{eval, harmonics};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn circuit(name: &str) -> PyResult<Circuit> {
    name.parse().map_err(PyValueError::new_err)
}

fn triple(t: Targets) -> (f64, f64, f64) {
    (t.rms, t.h2, t.h4)
}

/// Simulates one operating point of `circuit` ("bridge" or "pfc"); `x` is the
/// load in watts or the input RMS voltage. Returns a dict with `dt`,
/// `settled_from` and the `v_out`, `i_cap`, `i_in`, `i_diode` sample lists.
#[pyfunction]
#[pyo3(signature = (circuit_name, x, cycles = 30))]
fn simulate<'py>(py: Python<'py>, circuit_name: &str, x: f64, cycles: usize) -> PyResult<Bound<'py, PyDict>> {
    let c = SimConfig::default();
    let r = match circuit(circuit_name)? {
        Circuit::Bridge => sim::simulate_bridge(&sim::BridgeParams { load_power: x, ..c.bridge }, cycles, c.bridge_dt),
        Circuit::Pfc => sim::simulate_pfc(&sim::PfcParams { vin_rms: x, ..c.pfc }, cycles, c.pfc_dt),
    }
    .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("dt", r.dt())?;
    d.set_item("f_line", r.f_line)?;
    d.set_item("settled_from", r.settled_from)?;
    for w in r.signals() {
        d.set_item(&w.name, w.samples.clone())?;
    }
    Ok(d)
}

/// `(rms, h2, h4)` of the last `n_cycles` fundamental cycles of a signal.
#[pyfunction]
#[pyo3(signature = (samples, dt, f0, n_cycles = 10))]
fn extract_harmonics(samples: Vec<f64>, dt: f64, f0: f64, n_cycles: usize) -> PyResult<(f64, f64, f64)> {
    let w = Waveform::new("signal", dt, samples, Units::Ampere).map_err(err)?;
    let h = harmonics::extract(&w, f0, n_cycles).map_err(err)?;
    Ok((h.rms, h.h2, h.h4))
}

/// Adds Gaussian noise scaled to the signal RMS, then quantizes.
#[pyfunction]
#[pyo3(signature = (samples, dt, relative_sigma, quantization_lsb = 0.0, seed = 0))]
fn inject_noise(samples: Vec<f64>, dt: f64, relative_sigma: f64, quantization_lsb: f64, seed: u64) -> PyResult<Vec<f64>> {
    let w = Waveform::new("signal", dt, samples, Units::Ampere).map_err(err)?;
    Ok(sim::inject_noise(&w, relative_sigma, quantization_lsb, seed).samples)
}

/// Mean absolute percentage error in percent.
#[pyfunction]
fn mape(actual: Vec<f64>, predicted: Vec<f64>) -> PyResult<f64> {
    eval::mape(&actual, &predicted).map_err(err)
}

#[pyclass(name = "Dataset", module = "ripple", from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: dataset::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Sweeps `xs` (default: the circuit's standard 50-point range).
    #[staticmethod]
    #[pyo3(signature = (circuit_name, xs = None, noise_sigma = 0.05, seed = 0))]
    fn sweep(circuit_name: &str, xs: Option<Vec<f64>>, noise_sigma: f64, seed: u64) -> PyResult<Self> {
        let c = circuit(circuit_name)?;
        let xs = xs.unwrap_or_else(|| dataset::default_sweep(c));
        let noise = NoiseConfig { relative_sigma: noise_sigma, ..NoiseConfig::default() };
        let inner = dataset::sweep(c, &xs, &SimConfig::default(), &noise, seed).map_err(err)?;
        Ok(PyDataset { inner })
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(PyDataset { inner: dataset::Dataset::import_csv(text).map_err(err)? })
    }

    fn to_csv(&self) -> String {
        self.inner.export_csv()
    }

    #[getter]
    fn circuit(&self) -> &'static str {
        self.inner.circuit.name()
    }

    #[getter]
    fn xs(&self) -> Vec<f64> {
        self.inner.xs()
    }

    #[getter]
    fn targets(&self) -> Vec<(f64, f64, f64)> {
        self.inner.points.iter().map(|p| triple(p.targets())).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// `(train, test)` with `n_test` held-out points.
    fn split(&self, n_test: usize, seed: u64) -> PyResult<(PyDataset, PyDataset)> {
        let s = dataset::split(&self.inner, n_test, seed).map_err(err)?;
        Ok((PyDataset { inner: s.train }, PyDataset { inner: s.test }))
    }

    /// `n` training prompts, each `(prompt_text, completion_text)`.
    #[pyo3(signature = (k, n, seed = 0, digits = prompting::DEFAULT_DIGITS))]
    fn prompts(&self, k: usize, n: usize, seed: u64, digits: usize) -> PyResult<Vec<(String, String)>> {
        let inst = prompting::sample_instances(&self.inner, k, n, seed).map_err(err)?;
        inst.iter()
            .map(|p| prompting::serialize(p, digits).map(|s| (s.prompt_text, s.completion_text)).map_err(err))
            .collect()
    }

    /// Inference prompt at `query_x` with `k` equally spaced examples.
    #[pyo3(signature = (query_x, k = 10, digits = prompting::DEFAULT_DIGITS))]
    fn eval_prompt(&self, query_x: f64, k: usize, digits: usize) -> PyResult<String> {
        let inst = prompting::build_eval_instance(&self.inner, query_x, k).map_err(err)?;
        Ok(prompting::serialize(&inst, digits).map_err(err)?.prompt_text)
    }
}

/// Renders a prompt from `(x, rms, h2, h4)` examples and a query.
#[pyfunction]
#[pyo3(signature = (examples, query_x, digits = prompting::DEFAULT_DIGITS))]
fn serialize_prompt(examples: Vec<(f64, f64, f64, f64)>, query_x: f64, digits: usize) -> PyResult<String> {
    let inst = PromptInstance {
        prefix: examples
            .into_iter()
            .map(|(x, rms, h2, h4)| Example { x, targets: Targets { rms, h2, h4 } })
            .collect(),
        query_x,
        target: None,
    };
    Ok(prompting::serialize(&inst, digits).map_err(err)?.prompt_text)
}

/// Parses `rms=<v>, h2=<v>, h4=<v>;`.
#[pyfunction]
fn parse_completion(text: &str) -> PyResult<(f64, f64, f64)> {
    Ok(triple(prompting::parse_completion(text).map_err(err)?))
}

#[pyclass(name = "Model", module = "ripple")]
struct PyModel {
    inner: core_model::Model,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (layers = 4, heads = 4, embed_dim = 128, max_context = 1024, seed = 0))]
    fn new(layers: usize, heads: usize, embed_dim: usize, max_context: usize, seed: u64) -> PyResult<Self> {
        let tok = Tokenizer::default();
        let cfg = ModelConfig { layers, heads, embed_dim, max_context, vocab_size: tok.vocab_size(), seed };
        Ok(PyModel { inner: core_model::Model::new(cfg, tok).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel { inner: pipeline::load_model(&path).map_err(err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        std::fs::write(&path, pipeline::model_bytes(&self.inner)).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    #[getter]
    fn n_params(&self) -> usize {
        self.inner.n_params()
    }

    /// Trains on `(prompt, completion)` pairs; returns the loss per step.
    #[pyo3(signature = (pairs, epochs = 5, batch_size = 5, base_learning_rate = pipeline::DEFAULT_BASE_LR, lr_multiplier = 1.5, seed = 0))]
    fn train(
        &mut self,
        pairs: Vec<(String, String)>,
        epochs: usize,
        batch_size: usize,
        base_learning_rate: f64,
        lr_multiplier: f64,
        seed: u64,
    ) -> PyResult<Vec<f64>> {
        let prompts: Vec<SerializedPrompt> = pairs
            .into_iter()
            .map(|(prompt_text, completion_text)| SerializedPrompt { prompt_text, completion_text })
            .collect();
        let tc = TrainConfig { base_learning_rate, lr_multiplier, batch_size, epochs, seed };
        let r = self.inner.fit(&prompts, &tc, |_, _, _| {}).map_err(err)?;
        Ok(r.loss_per_step.into_iter().map(|(_, l)| l).collect())
    }

    /// Mean completion cross-entropy in nats/token.
    fn loss(&self, pairs: Vec<(String, String)>) -> PyResult<f64> {
        let prompts: Vec<SerializedPrompt> = pairs
            .into_iter()
            .map(|(prompt_text, completion_text)| SerializedPrompt { prompt_text, completion_text })
            .collect();
        self.inner.loss(&prompts).map_err(err)
    }

    #[pyo3(signature = (prompt, temperature = 0.0, max_tokens = core_model::DEFAULT_MAX_TOKENS, seed = 0))]
    fn generate(&self, prompt: &str, temperature: f64, max_tokens: usize, seed: u64) -> PyResult<String> {
        self.inner.generate(prompt, temperature, max_tokens, seed).map_err(err)
    }

    /// Averages `n_runs` sampled completions of an inference prompt.
    /// Returns `(mean_triple, n_valid)`.
    #[pyo3(signature = (prompt, n_runs = core_model::DEFAULT_RUNS, temperature = core_model::DEFAULT_TEMPERATURE, seed = 0))]
    fn predict_mean(&self, prompt: &str, n_runs: usize, temperature: f64, seed: u64) -> PyResult<((f64, f64, f64), usize)> {
        let inst = prompting::parse_prompt(prompt).map_err(err)?;
        let digits = prompt.split("x=").nth(1).map(count_sig_digits).unwrap_or(prompting::DEFAULT_DIGITS);
        let p = self.inner.predict_mean(&inst, digits, n_runs, temperature, seed).map_err(err)?;
        Ok((triple(p.mean), p.n_valid))
    }
}

/// Significant digits of the first number in `s`.
fn count_sig_digits(s: &str) -> usize {
    let num: String = s.chars().take_while(|c| c.is_ascii_digit() || *c == '.' || *c == '-').collect();
    num.chars().filter(char::is_ascii_digit).skip_while(|c| *c == '0').count().clamp(3, 12)
}

#[pyclass(name = "PolyModel", module = "ripple")]
struct PyPolyModel {
    inner: baselines::PolyModel,
}

#[pymethods]
impl PyPolyModel {
    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree
    }

    fn predict(&self, x: f64) -> (f64, f64, f64) {
        triple(self.inner.predict(x))
    }
}

/// Polynomial least squares; `degree=None` picks it by leave-one-out CV.
#[pyfunction]
#[pyo3(signature = (data, degree = None))]
fn fit_poly(data: &PyDataset, degree: Option<usize>) -> PyResult<PyPolyModel> {
    let inner = match degree {
        Some(d) => baselines::fit_poly(&data.inner, d).map_err(err)?,
        None => baselines::select_poly_degree(&data.inner, 1..=6).map_err(err)?.0,
    };
    Ok(PyPolyModel { inner })
}

#[pyclass(name = "GbtModel", module = "ripple")]
struct PyGbtModel {
    inner: baselines::GbtModel,
}

#[pymethods]
impl PyGbtModel {
    fn predict(&self, x: f64) -> (f64, f64, f64) {
        triple(self.inner.predict(x))
    }
}

#[pyfunction]
#[pyo3(signature = (data, n_trees = 100, max_depth = Some(3), shrinkage = 0.1))]
fn fit_gbt(data: &PyDataset, n_trees: usize, max_depth: Option<usize>, shrinkage: f64) -> PyResult<PyGbtModel> {
    let params = baselines::GbtParams { n_trees, max_depth, shrinkage };
    Ok(PyGbtModel { inner: baselines::fit_gbt(&data.inner, params).map_err(err)? })
}

/// Runs the full pipeline. `config_json` overrides the circuit defaults the
/// same way a `--config` file does. Returns the manifest path.
#[pyfunction]
#[pyo3(signature = (config_json = "{}"))]
fn run_pipeline(config_json: &str) -> PyResult<String> {
    let v: serde_json::Value = serde_json::from_str(config_json).map_err(err)?;
    let cfg = RunConfig::resolve(None, Some(&v)).map_err(err)?;
    let out = pipeline::run_all(&cfg, |_| {}).map_err(err)?;
    Ok(out.manifest.display().to_string())
}

#[pymodule]
fn ripple(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(extract_harmonics, m)?)?;
    m.add_function(wrap_pyfunction!(inject_noise, m)?)?;
    m.add_function(wrap_pyfunction!(mape, m)?)?;
    m.add_function(wrap_pyfunction!(serialize_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(parse_completion, m)?)?;
    m.add_function(wrap_pyfunction!(fit_poly, m)?)?;
    m.add_function(wrap_pyfunction!(fit_gbt, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyPolyModel>()?;
    m.add_class::<PyGbtModel>()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_significant_digits() {
        assert_eq!(count_sig_digits("626.000 -> rms"), 6);
        assert_eq!(count_sig_digits("0.0123457 -> "), 6);
        assert_eq!(count_sig_digits("5.0 ->"), 3);
    }
}
