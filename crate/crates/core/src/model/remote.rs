//! Client for an HTTP fine-tuning service.
//!
//! The provider is expected to expose JSON endpoints:
//!
//! - `POST /v1/files` with `{"purpose", "filename", "content"}` returning `{"id"}`
//! - `POST /v1/fine_tuning/jobs` returning `{"id", "status"}`
//! - `GET /v1/fine_tuning/jobs/{id}` returning `{"status", "fine_tuned_model", "error"}`
//! - `POST /v1/completions` returning `{"choices": [{"text"}]}`
//!
//! Credentials come from `RIPPLE_PROVIDER_URL`, `RIPPLE_PROVIDER_KEY` and
//! optionally `RIPPLE_PROVIDER_MODEL`.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ModelError, Prediction};
use crate::prompting::{self, PromptInstance, END_MARKER};

pub const ENV_URL: &str = "RIPPLE_PROVIDER_URL";
pub const ENV_KEY: &str = "RIPPLE_PROVIDER_KEY";
pub const ENV_MODEL: &str = "RIPPLE_PROVIDER_MODEL";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub api_key: String,
    pub base_model: String,
}

impl RemoteConfig {
    pub fn from_env() -> Result<Self, ModelError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    /// Reads the three settings through `get`; useful for tests.
    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ModelError> {
        let need = |k: &str| {
            get(k)
                .filter(|v| !v.trim().is_empty())
                .ok_or_else(|| ModelError::RemoteConfig(format!("{k} is not set")))
        };
        let endpoint = need(ENV_URL)?.trim_end_matches('/').to_string();
        let api_key = need(ENV_KEY)?;
        let base_model = get(ENV_MODEL).filter(|v| !v.is_empty()).unwrap_or_else(|| "base".into());
        Ok(RemoteConfig { endpoint, api_key, base_model })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemoteHyperparams {
    pub lr_multiplier: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JobStatus {
    Queued,
    Running,
    Succeeded { model: String },
    Failed { message: String },
}

impl JobStatus {
    pub fn is_terminal(&self) -> bool {
        matches!(self, JobStatus::Succeeded { .. } | JobStatus::Failed { .. })
    }
}

#[derive(Debug, Clone)]
pub struct JobHandle {
    pub config: RemoteConfig,
    pub job_id: String,
    pub file_id: String,
    pub status: JobStatus,
    /// Network polls issued so far.
    pub polls: usize,
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(60)))
        .build()
        .into()
}

fn check(mut resp: ureq::http::Response<ureq::Body>) -> Result<Value, ModelError> {
    let status = resp.status();
    let body: Value = resp
        .body_mut()
        .read_json()
        .map_err(|e| ModelError::Remote(format!("HTTP {status}: unreadable body: {e}")))?;
    if !status.is_success() {
        let msg = body
            .pointer("/error/message")
            .and_then(Value::as_str)
            .map(str::to_string)
            .unwrap_or_else(|| body.to_string());
        return Err(ModelError::Remote(format!("HTTP {status}: {msg}")));
    }
    Ok(body)
}

fn post(cfg: &RemoteConfig, path: &str, body: &Value) -> Result<Value, ModelError> {
    let resp = agent()
        .post(format!("{}{path}", cfg.endpoint))
        .header("Authorization", format!("Bearer {}", cfg.api_key))
        .send_json(body)
        .map_err(|e| ModelError::Remote(e.to_string()))?;
    check(resp)
}

fn get(cfg: &RemoteConfig, path: &str) -> Result<Value, ModelError> {
    let resp = agent()
        .get(format!("{}{path}", cfg.endpoint))
        .header("Authorization", format!("Bearer {}", cfg.api_key))
        .call()
        .map_err(|e| ModelError::Remote(e.to_string()))?;
    check(resp)
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a str, ModelError> {
    v.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| ModelError::Remote(format!("response lacks string field {key:?}: {v}")))
}

fn parse_status(v: &Value) -> Result<JobStatus, ModelError> {
    Ok(match field(v, "status")? {
        "queued" | "validating_files" | "pending" => JobStatus::Queued,
        "running" => JobStatus::Running,
        "succeeded" => JobStatus::Succeeded { model: field(v, "fine_tuned_model")?.to_string() },
        "failed" | "cancelled" => JobStatus::Failed {
            message: v
                .pointer("/error/message")
                .and_then(Value::as_str)
                .unwrap_or("job failed without a message")
                .to_string(),
        },
        other => return Err(ModelError::Remote(format!("unknown job status {other:?}"))),
    })
}

/// Uploads the JSON-Lines training file and starts a fine-tuning job.
pub fn remote_finetune(cfg: &RemoteConfig, jsonl: &str, hp: &RemoteHyperparams) -> Result<JobHandle, ModelError> {
    let file = post(
        cfg,
        "/v1/files",
        &json!({"purpose": "fine-tune", "filename": "train.jsonl", "content": jsonl}),
    )?;
    let file_id = field(&file, "id")?.to_string();
    let job = post(
        cfg,
        "/v1/fine_tuning/jobs",
        &json!({
            "training_file": file_id,
            "model": cfg.base_model,
            "hyperparameters": {
                "learning_rate_multiplier": hp.lr_multiplier,
                "batch_size": hp.batch_size,
                "n_epochs": hp.epochs,
            },
        }),
    )?;
    Ok(JobHandle {
        config: cfg.clone(),
        job_id: field(&job, "id")?.to_string(),
        file_id,
        status: parse_status(&job)?,
        polls: 0,
    })
}

/// Refreshes the job status. A terminal status is returned as is, without
/// contacting the provider.
pub fn remote_poll(handle: &mut JobHandle) -> Result<&JobStatus, ModelError> {
    if !handle.status.is_terminal() {
        let v = get(&handle.config, &format!("/v1/fine_tuning/jobs/{}", handle.job_id))?;
        handle.polls += 1;
        handle.status = parse_status(&v)?;
    }
    Ok(&handle.status)
}

/// Polls until the job is terminal or `max_polls` is spent.
pub fn remote_wait(handle: &mut JobHandle, interval: Duration, max_polls: usize) -> Result<&JobStatus, ModelError> {
    for i in 0..max_polls {
        if remote_poll(handle)?.is_terminal() {
            break;
        }
        if i + 1 < max_polls {
            std::thread::sleep(interval);
        }
    }
    match &handle.status {
        JobStatus::Failed { message } => Err(ModelError::Remote(format!("job {} failed: {message}", handle.job_id))),
        s if !s.is_terminal() => {
            Err(ModelError::Remote(format!("job {} not finished after {max_polls} polls", handle.job_id)))
        }
        s => Ok(s),
    }
}

/// One completion from the fine-tuned model.
pub fn remote_predict(handle: &JobHandle, prompt: &str, temperature: f64, max_tokens: usize) -> Result<String, ModelError> {
    let JobStatus::Succeeded { model } = &handle.status else {
        return Err(ModelError::Remote(format!("job {} has not succeeded", handle.job_id)));
    };
    let v = post(
        &handle.config,
        "/v1/completions",
        &json!({
            "model": model,
            "prompt": prompt,
            "temperature": temperature,
            "max_tokens": max_tokens,
            "stop": [END_MARKER.to_string()],
        }),
    )?;
    let text = v
        .pointer("/choices/0/text")
        .and_then(Value::as_str)
        .ok_or_else(|| ModelError::Remote(format!("completion response lacks choices[0].text: {v}")))?;
    let mut text = text.to_string();
    if !text.ends_with(END_MARKER) {
        text.push(END_MARKER);
    }
    Ok(text)
}

/// The remote counterpart of [`super::Model::predict_mean`].
pub fn remote_predict_mean(
    handle: &JobHandle,
    instance: &PromptInstance,
    digits: usize,
    n_runs: usize,
    temperature: f64,
) -> Result<Prediction, ModelError> {
    if n_runs == 0 {
        return Err(ModelError::NoRuns);
    }
    let mut query = instance.clone();
    query.target = None;
    let prompt = prompting::serialize(&query, digits)?;
    let raw = (0..n_runs)
        .map(|_| remote_predict(handle, &prompt.prompt_text, temperature, super::DEFAULT_MAX_TOKENS))
        .collect::<Result<Vec<_>, _>>()?;
    Prediction::from_outputs(raw)
}
