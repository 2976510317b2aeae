use serde::{Deserialize, Serialize};

use super::PromptError;

/// Character-level vocabulary: every symbol the template can emit.
pub const DEFAULT_VOCABULARY: &str = "\n ,-.0123456789;=>hmrsx";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    pub vocabulary: Vec<char>,
    pub max_context: usize,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer::new(DEFAULT_VOCABULARY.chars().collect(), 1024)
    }
}

impl Tokenizer {
    pub fn new(vocabulary: Vec<char>, max_context: usize) -> Self {
        Tokenizer { vocabulary, max_context }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn id_of(&self, ch: char) -> Option<u32> {
        self.vocabulary.iter().position(|&c| c == ch).map(|i| i as u32)
    }

    pub fn tokenize(&self, text: &str) -> Result<Vec<u32>, PromptError> {
        text.char_indices()
            .map(|(offset, ch)| self.id_of(ch).ok_or(PromptError::UnknownCharacter { ch, offset }))
            .collect()
    }

    pub fn detokenize(&self, ids: &[u32]) -> Result<String, PromptError> {
        ids.iter()
            .map(|&id| self.vocabulary.get(id as usize).copied().ok_or(PromptError::UnknownToken(id)))
            .collect()
    }
}
