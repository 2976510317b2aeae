//! Percentage-error metrics, comparison reports, the in-context example-count
//! sweep and training-loss reporting.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::dataset::{Dataset, Targets};
use crate::model::{run_seed, TrainReport};
use crate::numfmt::csv_num;
use crate::prompting::{Example, PromptInstance};

/// Window of the trailing mean in loss reports.
pub const LOSS_SMOOTHING: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("actual has {actual} values but predicted has {predicted}")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("no values to score")]
    Empty,
    #[error("actual value at index {index} is zero, so its percentage error is undefined")]
    ZeroActual { index: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("method {method:?} has no prediction for x = {x}")]
    MissingPrediction { method: String, x: f64 },
    #[error("report needs at least one method")]
    NoMethods,
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}

/// Absolute percentage error of one prediction.
pub fn ape(actual: f64, predicted: f64) -> f64 {
    100.0 * (actual - predicted).abs() / actual.abs()
}

/// Mean absolute percentage error, in percent.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    if actual.len() != predicted.len() {
        return Err(EvalError::LengthMismatch { actual: actual.len(), predicted: predicted.len() });
    }
    if actual.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut sum = 0.0;
    for (index, (&a, &f)) in actual.iter().zip(predicted).enumerate() {
        if !a.is_finite() || !f.is_finite() {
            return Err(EvalError::NonFinite { index });
        }
        if a == 0.0 {
            return Err(EvalError::ZeroActual { index });
        }
        sum += ape(a, f);
    }
    Ok(sum / actual.len() as f64)
}

/// Predictions of one method at the test inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodPredictions {
    pub name: String,
    pub predictions: Vec<(f64, Targets)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub x: f64,
    pub actual: Targets,
    /// One per method, in report order.
    pub predicted: Vec<Targets>,
    pub ape: Vec<[f64; 3]>,
    /// Index of the best method per target; ties go to the earlier method.
    pub winner: [usize; 3],
    /// `x` lies outside the training range.
    pub extrapolated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub methods: Vec<String>,
    pub rows: Vec<ReportRow>,
    /// Per method, per target MAPE in percent.
    pub mape: Vec<[f64; 3]>,
    pub n_points: usize,
}

/// Scores every method on `test`. Rows come out sorted by x.
pub fn build_report(
    test: &Dataset,
    methods: &[MethodPredictions],
    train_range: Option<(f64, f64)>,
) -> Result<EvalReport, EvalError> {
    if methods.is_empty() {
        return Err(EvalError::NoMethods);
    }
    if test.points.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut points = test.points.clone();
    points.sort_by(|a, b| a.x.total_cmp(&b.x));
    let mut rows = Vec::with_capacity(points.len());
    for (index, p) in points.iter().enumerate() {
        let actual = p.targets();
        let mut predicted = Vec::with_capacity(methods.len());
        let mut apes = Vec::with_capacity(methods.len());
        for m in methods {
            let pred = m
                .predictions
                .iter()
                .find(|(x, _)| *x == p.x)
                .map(|(_, t)| *t)
                .ok_or_else(|| EvalError::MissingPrediction { method: m.name.clone(), x: p.x })?;
            let (a, f) = (actual.as_array(), pred.as_array());
            let mut cell = [0.0; 3];
            for t in 0..3 {
                if !a[t].is_finite() || !f[t].is_finite() {
                    return Err(EvalError::NonFinite { index });
                }
                if a[t] == 0.0 {
                    return Err(EvalError::ZeroActual { index });
                }
                cell[t] = ape(a[t], f[t]);
            }
            predicted.push(pred);
            apes.push(cell);
        }
        let winner = std::array::from_fn(|t| {
            (1..apes.len()).fold(0, |best, m| if apes[m][t] < apes[best][t] { m } else { best })
        });
        let extrapolated = train_range.is_some_and(|(lo, hi)| p.x < lo || p.x > hi);
        rows.push(ReportRow { x: p.x, actual, predicted, ape: apes, winner, extrapolated });
    }
    let n = rows.len() as f64;
    let mape = (0..methods.len())
        .map(|m| std::array::from_fn(|t| rows.iter().map(|r| r.ape[m][t]).sum::<f64>() / n))
        .collect();
    Ok(EvalReport {
        methods: methods.iter().map(|m| m.name.clone()).collect(),
        n_points: rows.len(),
        rows,
        mape,
    })
}

impl EvalReport {
    /// MAPE of `method` for target index `t`.
    pub fn mape_of(&self, method: &str, t: usize) -> Option<f64> {
        self.methods.iter().position(|m| m == method).map(|i| self.mape[i][t])
    }

    /// One row per test point.
    pub fn to_csv(&self) -> String {
        let mut head = vec!["x".to_string(), "extrapolated".into()];
        head.extend(Targets::NAMES.iter().map(|t| format!("actual_{t}")));
        for m in &self.methods {
            head.extend(Targets::NAMES.iter().map(|t| format!("{m}_{t}")));
            head.extend(Targets::NAMES.iter().map(|t| format!("{m}_ape_{t}")));
        }
        head.extend(Targets::NAMES.iter().map(|t| format!("best_{t}")));
        let mut s = head.join(",");
        s.push('\n');
        for r in &self.rows {
            let mut cells = vec![csv_num(r.x), r.extrapolated.to_string()];
            cells.extend(r.actual.as_array().map(csv_num));
            for (p, a) in r.predicted.iter().zip(&r.ape) {
                cells.extend(p.as_array().map(csv_num));
                cells.extend(a.map(csv_num));
            }
            cells.extend(r.winner.map(|w| self.methods[w].clone()));
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    /// Per-method MAPE and win counts.
    pub fn summary_json(&self) -> String {
        let methods: serde_json::Map<String, serde_json::Value> = self
            .methods
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let wins: Vec<usize> =
                    (0..3).map(|t| self.rows.iter().filter(|r| r.winner[t] == i).count()).collect();
                (
                    m.clone(),
                    json!({
                        "mape_percent": {"rms": self.mape[i][0], "h2": self.mape[i][1], "h4": self.mape[i][2]},
                        "rows_won": {"rms": wins[0], "h2": wins[1], "h4": wins[2]},
                    }),
                )
            })
            .collect();
        let extrapolated: Vec<f64> = self.rows.iter().filter(|r| r.extrapolated).map(|r| r.x).collect();
        serde_json::to_string_pretty(&json!({
            "n_points": self.n_points,
            "methods": methods,
            "extrapolated_x": extrapolated,
        }))
        .expect("serializable")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IclCell {
    pub k: usize,
    pub target: usize,
    /// Mean APE over the successful predictions; `None` if all failed.
    pub mean_ape: Option<f64>,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IclSweepReport {
    pub k_values: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub cells: Vec<IclCell>,
    /// Messages of failed predictions, `k=<k> x=<x> trial=<i>: <error>`.
    pub failures: Vec<String>,
}

impl IclSweepReport {
    pub fn cell(&self, k: usize, target: usize) -> Option<&IclCell> {
        self.cells.iter().find(|c| c.k == k && c.target == target)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,target,mean_ape,trials\n");
        for c in &self.cells {
            let v = c.mean_ape.map(csv_num).unwrap_or_else(|| "nan".into());
            s.push_str(&format!("{},{},{v},{}\n", c.k, Targets::NAMES[c.target], self.trials));
        }
        s
    }
}

/// The `trial`-th prefix for a query: `k` training points other than the
/// query, drawn uniformly and listed by ascending x.
pub fn trial_instance(train: &Dataset, query_x: f64, k: usize, seed: u64) -> Result<PromptInstance, EvalError> {
    let pool: Vec<&crate::dataset::SamplePoint> = train.points.iter().filter(|p| p.x != query_x).collect();
    if k == 0 || k > pool.len() {
        return Err(EvalError::InvalidSweep(format!("k = {k} but {} usable training points", pool.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, pool.len(), k).into_vec();
    idx.sort_by(|&a, &b| pool[a].x.total_cmp(&pool[b].x));
    Ok(PromptInstance {
        prefix: idx.iter().map(|&i| Example { x: pool[i].x, targets: pool[i].targets() }).collect(),
        query_x,
        target: None,
    })
}

/// Mean APE per target as a function of the number of in-context examples.
/// `predict` maps an instance and a seed to a triple; its failures are
/// counted per cell rather than aborting the sweep.
pub fn icl_sweep<E: std::fmt::Display>(
    predict: impl Fn(&PromptInstance, u64) -> Result<Targets, E> + Sync,
    train: &Dataset,
    test: &Dataset,
    k_values: &[usize],
    trials: usize,
    seed: u64,
) -> Result<IclSweepReport, EvalError> {
    if trials == 0 {
        return Err(EvalError::InvalidSweep("trials must be at least 1".into()));
    }
    if k_values.is_empty() || k_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::InvalidSweep(format!("k values {k_values:?} must be non-empty and strictly increasing")));
    }
    if test.points.is_empty() {
        return Err(EvalError::Empty);
    }
    let max_k = *k_values.last().expect("non-empty");
    if max_k > train.points.len() {
        return Err(EvalError::InvalidSweep(format!("k = {max_k} exceeds {} training points", train.points.len())));
    }
    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for (ki, &k) in k_values.iter().enumerate() {
        let mut sums = [0.0; 3];
        let (mut ok, mut failed) = (0usize, 0usize);
        for (pi, p) in test.points.iter().enumerate() {
            for trial in 0..trials {
                let cell_seed = run_seed(seed, (ki * test.points.len() + pi) * trials + trial);
                let inst = trial_instance(train, p.x, k.min(train.points.iter().filter(|q| q.x != p.x).count()), cell_seed)?;
                match predict(&inst, cell_seed) {
                    Ok(pred) => {
                        let (a, f) = (p.targets().as_array(), pred.as_array());
                        if (0..3).any(|t| a[t] == 0.0 || !f[t].is_finite()) {
                            failed += 1;
                            failures.push(format!("k={k} x={} trial={trial}: non-finite or undefined APE", p.x));
                            continue;
                        }
                        for t in 0..3 {
                            sums[t] += ape(a[t], f[t]);
                        }
                        ok += 1;
                    }
                    Err(e) => {
                        failed += 1;
                        failures.push(format!("k={k} x={} trial={trial}: {e}", p.x));
                    }
                }
            }
        }
        for (t, s) in sums.iter().enumerate() {
            cells.push(IclCell {
                k,
                target: t,
                mean_ape: (ok > 0).then(|| s / ok as f64),
                n_ok: ok,
                n_failed: failed,
            });
        }
    }
    Ok(IclSweepReport { k_values: k_values.to_vec(), trials, seed, cells, failures })
}

/// `step,loss,smoothed_loss` with a trailing mean over [`LOSS_SMOOTHING`] steps.
pub fn loss_report(report: &TrainReport) -> Result<String, EvalError> {
    if report.loss_per_step.is_empty() {
        return Err(EvalError::Empty);
    }
    let smooth = report.smoothed(LOSS_SMOOTHING);
    let mut s = String::from("step,loss,smoothed_loss\n");
    for ((step, loss), sm) in report.loss_per_step.iter().zip(smooth) {
        s.push_str(&format!("{step},{},{}\n", csv_num(*loss), csv_num(sm)));
    }
    Ok(s)
}
