//! `ripple`: command-line driver for the ripple-current prediction pipeline.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use ripple_core::dataset::Circuit;
use ripple_core::model::remote::{self, RemoteConfig, RemoteHyperparams};
use ripple_core::pipeline::{self, Artifacts, RunConfig};
use ripple_core::prompting;
use ripple_core::{Error, Result};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "ripple", version, about = "DC-link capacitor ripple-current prediction pipeline")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Circuit under study.
    #[arg(long, global = true, value_parser = parse_circuit)]
    circuit: Option<Circuit>,
    /// JSON run configuration; keys override defaults, flags override keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; every stage derives its own stream from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (also the default location of stage inputs).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress progress messages on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
}

fn parse_circuit(s: &str) -> std::result::Result<Circuit, String> {
    s.parse()
}

fn parse_k_values(s: &str) -> std::result::Result<Vec<usize>, String> {
    s.split(',').map(|v| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"))).collect()
}

#[derive(Args, Debug, Default)]
struct SweepFlags {
    /// Lowest swept value (load watts for bridge, input volts for PFC).
    #[arg(long)]
    lo: Option<f64>,
    #[arg(long)]
    hi: Option<f64>,
    /// Number of sweep points.
    #[arg(long)]
    n_points: Option<usize>,
    /// Points held out for testing.
    #[arg(long)]
    n_test: Option<usize>,
    /// Probe noise standard deviation relative to the waveform RMS.
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Probe quantization step in amperes.
    #[arg(long)]
    noise_lsb: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct PromptFlags {
    /// Examples per prompt prefix.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n_instances: Option<usize>,
    /// Significant digits of rendered numbers.
    #[arg(long)]
    digits: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct TrainFlags {
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    max_context: Option<usize>,
    #[arg(long)]
    base_lr: Option<f64>,
    #[arg(long)]
    lr_multiplier: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct EvalFlags {
    /// Completions averaged per prediction.
    #[arg(long)]
    n_runs: Option<usize>,
    /// Sampling temperature; 0 is greedy.
    #[arg(long)]
    temperature: Option<f64>,
    /// Comma-separated prefix sizes for the in-context sweep.
    #[arg(long, value_parser = parse_k_values)]
    k_values: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
    /// Completions averaged per sweep cell.
    #[arg(long)]
    icl_runs: Option<usize>,
}

#[derive(Args, Debug)]
struct Inputs {
    /// Training split CSV (default: <out>/train.csv).
    #[arg(long)]
    train: Option<PathBuf>,
    /// Test split CSV (default: <out>/test.csv).
    #[arg(long)]
    test: Option<PathBuf>,
    /// Model checkpoint (default: <out>/model.ckpt).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one operating point and write its waveforms.
    Simulate {
        /// Operating point: load watts (bridge) or input volts RMS (PFC).
        #[arg(long, visible_alias = "load-w", visible_alias = "vin-v")]
        x: f64,
        /// Line cycles to simulate.
        #[arg(long)]
        cycles: Option<usize>,
        #[command(flatten)]
        sweep: SweepFlags,
    },
    /// Sweep the operating range and write the dataset and its split.
    Dataset {
        #[command(flatten)]
        sweep: SweepFlags,
    },
    /// Train the sequence model on sampled prompts.
    Train {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        prompt: PromptFlags,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Predict the ripple triple at one operating point.
    Predict {
        #[arg(long)]
        x: f64,
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        prompt: PromptFlags,
        #[command(flatten)]
        eval: EvalFlags,
    },
    /// Compare the model with the regression baselines on the test split.
    Evaluate {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        prompt: PromptFlags,
        #[command(flatten)]
        eval: EvalFlags,
    },
    /// Sweep the number of in-context examples.
    IclSweep {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        prompt: PromptFlags,
        #[command(flatten)]
        eval: EvalFlags,
    },
    /// Print the comparison table of an evaluation.
    Report {
        /// Evaluation report JSON (default: <out>/eval_report.json).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run every stage end to end.
    Run {
        #[command(flatten)]
        sweep: SweepFlags,
        #[command(flatten)]
        prompt: PromptFlags,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        eval: EvalFlags,
    },
    /// Fine-tune on a remote provider configured through RIPPLE_PROVIDER_URL
    /// and RIPPLE_PROVIDER_KEY, then predict the test split.
    Remote {
        /// Prompt file (default: <out>/prompts.jsonl).
        #[arg(long)]
        prompts: Option<PathBuf>,
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = 10)]
        poll_seconds: u64,
        #[arg(long, default_value_t = 360)]
        max_polls: usize,
    },
}

impl SweepFlags {
    fn apply(&self, c: &mut RunConfig) {
        set(&mut c.sweep.lo, self.lo);
        set(&mut c.sweep.hi, self.hi);
        set(&mut c.sweep.n, self.n_points);
        set(&mut c.n_test, self.n_test);
        set(&mut c.noise.relative_sigma, self.noise_sigma);
        set(&mut c.noise.quantization_lsb, self.noise_lsb);
    }
}

impl PromptFlags {
    fn apply(&self, c: &mut RunConfig) {
        set(&mut c.prompt.k, self.k);
        set(&mut c.prompt.n_instances, self.n_instances);
        set(&mut c.prompt.digits, self.digits);
    }
}

impl TrainFlags {
    fn apply(&self, c: &mut RunConfig) {
        set(&mut c.model.layers, self.layers);
        set(&mut c.model.heads, self.heads);
        set(&mut c.model.embed_dim, self.embed_dim);
        set(&mut c.model.max_context, self.max_context);
        set(&mut c.train.base_learning_rate, self.base_lr);
        set(&mut c.train.lr_multiplier, self.lr_multiplier);
        set(&mut c.train.batch_size, self.batch_size);
        set(&mut c.train.epochs, self.epochs);
    }
}

impl EvalFlags {
    fn apply(&self, c: &mut RunConfig) {
        set(&mut c.eval.n_runs, self.n_runs);
        set(&mut c.eval.temperature, self.temperature);
        set(&mut c.eval.k_values, self.k_values.clone());
        set(&mut c.eval.icl_trials, self.trials);
        set(&mut c.eval.icl_runs, self.icl_runs);
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl Inputs {
    fn train(&self, c: &RunConfig) -> PathBuf {
        self.train.clone().unwrap_or_else(|| c.out.join("train.csv"))
    }
    fn test(&self, c: &RunConfig) -> PathBuf {
        self.test.clone().unwrap_or_else(|| c.out.join("test.csv"))
    }
    fn checkpoint(&self, c: &RunConfig) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| c.out.join("model.ckpt"))
    }
}

struct Ctx {
    cfg: RunConfig,
    quiet: bool,
}

impl Ctx {
    fn say(&self, msg: &str) {
        if !self.quiet {
            eprintln!("ripple: {msg}");
        }
    }

    fn config_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.cfg).expect("serializable")
    }
}

fn resolve(g: &Global) -> Result<RunConfig> {
    let file = match &g.config {
        Some(p) => {
            let text = pipeline::read_text(p)?;
            Some(serde_json::from_str::<serde_json::Value>(&text).map_err(|e| Error::json(p, e))?)
        }
        None => None,
    };
    let mut cfg = RunConfig::resolve(g.circuit, file.as_ref())?;
    set(&mut cfg.seed, g.seed);
    set(&mut cfg.out, g.out.clone());
    Ok(cfg)
}

/// Loads a split and checks it belongs to the configured circuit.
fn load_split(ctx: &Ctx, inputs: &Inputs) -> Result<ripple_core::dataset::Split> {
    let train = pipeline::load_dataset(&inputs.train(&ctx.cfg))?;
    let test = pipeline::load_dataset(&inputs.test(&ctx.cfg))?;
    for (name, d) in [("train", &train), ("test", &test)] {
        if d.circuit != ctx.cfg.circuit {
            return Err(Error::Config(format!(
                "{name} split is {} data but --circuit is {}",
                d.circuit.name(),
                ctx.cfg.circuit.name()
            )));
        }
    }
    Ok(ripple_core::dataset::Split { train, test })
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = resolve(&cli.global)?;
    match &cli.command {
        Command::Simulate { sweep, cycles, .. } => {
            sweep.apply(&mut cfg);
            set(&mut cfg.sim.cycles, *cycles);
        }
        Command::Dataset { sweep } => sweep.apply(&mut cfg),
        Command::Train { prompt, train, .. } => {
            prompt.apply(&mut cfg);
            train.apply(&mut cfg);
        }
        Command::Predict { prompt, eval, .. }
        | Command::Evaluate { prompt, eval, .. }
        | Command::IclSweep { prompt, eval, .. } => {
            prompt.apply(&mut cfg);
            eval.apply(&mut cfg);
        }
        Command::Run { sweep, prompt, train, eval } => {
            sweep.apply(&mut cfg);
            prompt.apply(&mut cfg);
            train.apply(&mut cfg);
            eval.apply(&mut cfg);
        }
        Command::Report { .. } | Command::Remote { .. } => {}
    }
    cfg.validate()?;
    let ctx = Ctx { cfg, quiet: cli.global.quiet };
    let cfg = &ctx.cfg;
    match &cli.command {
        Command::Simulate { x, .. } => {
            let mut a = Artifacts::new(&cfg.out)?;
            pipeline::simulate_point(cfg, *x, &mut a)?;
            finish(&ctx, a, "simulate")
        }
        Command::Dataset { .. } => {
            ctx.say(&format!("simulating {} points", cfg.sweep.n));
            let (d, s) = pipeline::build_dataset(cfg)?;
            let mut a = Artifacts::new(&cfg.out)?;
            pipeline::write_dataset_stage(&mut a, &d, &s)?;
            finish(&ctx, a, "dataset")
        }
        Command::Train { inputs, .. } => {
            let train = pipeline::load_dataset(&inputs.train(cfg))?;
            let prompts = pipeline::build_prompts(cfg, &train)?;
            let mut a = Artifacts::new(&cfg.out)?;
            a.write("prompts.jsonl", prompting::to_jsonl(&prompts))?;
            let (m, r) = pipeline::train_model(cfg, &prompts, |s, n, l| {
                if s == 1 || s % 10 == 0 || s == n {
                    ctx.say(&format!("step {s}/{n} loss {l:.4}"));
                }
            })?;
            pipeline::write_train_stage(&mut a, &m, &r)?;
            finish(&ctx, a, "train")
        }
        Command::Predict { x, inputs, .. } => {
            let m = pipeline::load_model(&inputs.checkpoint(cfg))?;
            let train = pipeline::load_dataset(&inputs.train(cfg))?;
            let p = pipeline::predict_at(cfg, &m, &train, *x)?;
            let text = serde_json::to_string_pretty(&json!({"x": x, "prediction": p})).expect("ser") + "\n";
            print!("{text}");
            let mut a = Artifacts::new(&cfg.out)?;
            a.write("prediction.json", text)?;
            finish(&ctx, a, "predict")
        }
        Command::Evaluate { inputs, .. } => {
            let m = pipeline::load_model(&inputs.checkpoint(cfg))?;
            let split = load_split(&ctx, inputs)?;
            ctx.say(&format!("predicting {} test points", split.test.len()));
            let preds = pipeline::predict_test(cfg, &m, &split)?;
            let b = pipeline::fit_baselines(cfg, &split.train)?;
            let r = pipeline::evaluate(&split, &preds, &b)?;
            let mut a = Artifacts::new(&cfg.out)?;
            pipeline::write_eval_stage(&mut a, cfg.circuit, &preds, &b, &r)?;
            print!("{}", pipeline::render_table(&r, cfg.circuit));
            finish(&ctx, a, "evaluate")
        }
        Command::IclSweep { inputs, .. } => {
            let m = pipeline::load_model(&inputs.checkpoint(cfg))?;
            let split = load_split(&ctx, inputs)?;
            ctx.say("sweeping the trained model");
            let trained = pipeline::icl_sweep(cfg, &m, &split)?;
            ctx.say("sweeping a random-weight model");
            let random = pipeline::icl_sweep(cfg, &pipeline::untrained_model(cfg)?, &split)?;
            let mut a = Artifacts::new(&cfg.out)?;
            pipeline::write_icl_stage(&mut a, &trained, &random)?;
            print!("{}", trained.to_csv());
            finish(&ctx, a, "icl-sweep")
        }
        Command::Report { report } => {
            let path = report.clone().unwrap_or_else(|| cfg.out.join("eval_report.json"));
            let text = pipeline::read_text(&path)?;
            let r: ripple_core::eval::EvalReport = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
            print!("{}", pipeline::render_table(&r, cfg.circuit));
            Ok(())
        }
        Command::Run { .. } => {
            let outcome = pipeline::run_all(cfg, |m| ctx.say(m))?;
            print!("{}", pipeline::render_table(&outcome.report, cfg.circuit));
            ctx.say(&format!("wrote {}", outcome.manifest.display()));
            Ok(())
        }
        Command::Remote { prompts, inputs, poll_seconds, max_polls } => remote_run(&ctx, prompts.as_deref(), inputs, *poll_seconds, *max_polls),
    }
}

fn remote_run(ctx: &Ctx, prompts: Option<&Path>, inputs: &Inputs, poll_seconds: u64, max_polls: usize) -> Result<()> {
    let cfg = &ctx.cfg;
    let rc = RemoteConfig::from_env()?;
    let path = prompts.map(Path::to_path_buf).unwrap_or_else(|| cfg.out.join("prompts.jsonl"));
    let jsonl = pipeline::read_text(&path)?;
    let split = load_split(ctx, inputs)?;
    let hp = RemoteHyperparams { lr_multiplier: cfg.train.lr_multiplier, batch_size: cfg.train.batch_size, epochs: cfg.train.epochs };
    let mut job = remote::remote_finetune(&rc, &jsonl, &hp)?;
    ctx.say(&format!("job {} created", job.job_id));
    remote::remote_wait(&mut job, Duration::from_secs(poll_seconds), max_polls)?;
    let mut preds = Vec::new();
    for p in &split.test.points {
        let inst = prompting::build_eval_instance(&split.train, p.x, cfg.prompt.k)?;
        let prediction = remote::remote_predict_mean(&job, &inst, cfg.prompt.digits, cfg.eval.n_runs, cfg.eval.temperature)?;
        preds.push(pipeline::PointPrediction { x: p.x, prediction });
    }
    let b = pipeline::fit_baselines(cfg, &split.train)?;
    let r = pipeline::evaluate(&split, &preds, &b)?;
    let mut a = Artifacts::new(cfg.out.join("remote"))?;
    pipeline::write_eval_stage(&mut a, cfg.circuit, &preds, &b, &r)?;
    print!("{}", pipeline::render_table(&r, cfg.circuit));
    finish(ctx, a, "remote")
}

fn finish(ctx: &Ctx, a: Artifacts, command: &str) -> Result<()> {
    let paths = a.paths();
    let manifest = a.finish(command, &ctx.config_json())?;
    for p in paths {
        ctx.say(&format!("wrote {}", p.display()));
    }
    ctx.say(&format!("wrote {}", manifest.display()));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("ripple: usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("ripple: error: {e}");
            ExitCode::from(1)
        }
    }
}
