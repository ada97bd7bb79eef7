//! Constrained generation of dual-stream scores inside Chain-of-Score
//! documents: sampling stack, guidance, and a count-based reference model.

mod engine;
mod ngram;
mod params;
pub mod sampling;

use thiserror::Error;

use crate::cos::CosError;
use crate::tokenizer::TokenId;

pub use engine::{
    generate, next_pair, DecodeMode, DecodeState, Generation, GenerationMeta, PairStep, Phase,
    SegmentMeta, RNG_ID,
};
pub use ngram::NGramModel;
pub use params::SamplingParams;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("invalid sampling parameters: {0}")]
    InvalidParams(String),
    #[error("guidance logits differ in length: {cond} vs {uncond}")]
    LengthMismatch { cond: usize, uncond: usize },
    #[error("no admissible token at the {position} position")]
    EmptySupport { position: &'static str },
    #[error("no admissible accompaniment token after vocal token {0}")]
    NoAccompaniment(TokenId),
    #[error("prompt has no segments")]
    ZeroSegments,
    #[error("invalid prompt: {0}")]
    InvalidPrompt(String),
    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),
    #[error("model order must be at least 1, got {0}")]
    InvalidOrder(usize),
    #[error("corpus has no tokens")]
    EmptyCorpus,
    #[error("model error: {0}")]
    Model(String),
    #[error("model file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Cos(#[from] CosError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Autoregressive next-token model over a flat token context. The engine
/// asks for `v_t` logits given the context, then for `a_t` logits given the
/// context extended by `v_t`.
pub trait NextPairModel {
    /// Length of the logit vectors; ids at or above it are impossible.
    fn vocab_size(&self) -> usize;

    /// Fingerprint of the vocabulary prefix the model was fitted on.
    fn vocab_fingerprint(&self) -> Option<u64> {
        None
    }

    /// Logits of the next token; `-inf` marks impossible tokens.
    fn logits(&self, context: &[TokenId]) -> Result<Vec<f64>, DecodeError>;
}
