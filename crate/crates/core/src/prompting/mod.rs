//! Function-mapping prompt protocol.
//!
//! A prompt lists `k` solved examples, one per line, followed by a query:
//!
//! ```text
//! x=626.000 -> rms=1.23000, h2=1.10000, h4=0.450000;
//! x=700.000 -> 
//! ```
//!
//! and the completion carries all three targets, terminated by `;`:
//! `rms=1.31000, h2=1.18000, h4=0.470000;`

mod sample;
mod template;
mod tokenizer;

pub use sample::{binomial, build_eval_instance, sample_instances};
pub use template::{parse_completion, parse_prompt, parse_serialized, serialize, to_jsonl, JsonlRecord};
pub use tokenizer::Tokenizer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Targets;

/// Terminates every completion.
pub const END_MARKER: char = ';';

/// Default significant digits for rendered numbers.
pub const DEFAULT_DIGITS: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PromptError {
    #[error("need {needed} training points for k = {k}, have {have}")]
    NotEnoughPoints { k: usize, needed: usize, have: usize },
    #[error("requested {requested} instances but only {available} distinct {size}-subsets exist")]
    InsufficientCombinations { requested: usize, available: u128, size: usize },
    #[error("cannot pick {k} distinct prefix points: {reason}")]
    DegeneratePrefix { k: usize, reason: String },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("digits must be in [3, 12], got {0}")]
    Digits(usize),
    #[error("cannot serialize non-finite value {0}")]
    NonFinite(f64),
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("character {ch:?} at offset {offset} is not in the vocabulary")]
    UnknownCharacter { ch: char, offset: usize },
    #[error("token id {0} is outside the vocabulary")]
    UnknownToken(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub x: f64,
    pub targets: Targets,
}

/// `k` solved examples plus one query; `target` is absent at inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptInstance {
    pub prefix: Vec<Example>,
    pub query_x: f64,
    pub target: Option<Targets>,
}

impl PromptInstance {
    pub fn k(&self) -> usize {
        self.prefix.len()
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        if self.prefix.is_empty() {
            return Err(PromptError::InvalidInstance("prefix is empty".into()));
        }
        let mut xs: Vec<f64> = self.prefix.iter().map(|e| e.x).collect();
        if xs.contains(&self.query_x) {
            return Err(PromptError::InvalidInstance(format!("query x {} appears in the prefix", self.query_x)));
        }
        xs.sort_by(f64::total_cmp);
        if let Some(w) = xs.windows(2).find(|w| w[0] == w[1]) {
            return Err(PromptError::InvalidInstance(format!("prefix repeats x = {}", w[0])));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SerializedPrompt {
    pub prompt_text: String,
    /// Empty in inference mode.
    pub completion_text: String,
}

impl SerializedPrompt {
    pub fn full_text(&self) -> String {
        format!("{}{}", self.prompt_text, self.completion_text)
    }
}
