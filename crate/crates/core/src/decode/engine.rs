use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::sampling::{
    apply_repetition_penalty, apply_temperature, argmax, cfg_combine, filter_top_k_top_p, sample,
    softmax,
};
use super::{DecodeError, NextPairModel, SamplingParams};
use crate::cos::{encode_prelude, encode_segment_head, CosDocument, Marker};
use crate::dual::DualSequence;
use crate::tokenizer::{TokenId, Vocabulary, PAD};

pub const RNG_ID: &str = "ChaCha8Rng/rand_chacha-0.9/seed_from_u64";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Sample,
    /// Highest-probability token at each position, vocal before
    /// accompaniment.
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Text,
    Audio,
    Done,
}

/// Running state of one generation.
#[derive(Debug, Clone)]
pub struct DecodeState {
    pub context: Vec<TokenId>,
    /// Context of the guidance branch (no tags, no lyrics).
    pub uncond_context: Vec<TokenId>,
    pub phase: Phase,
    /// Pairs emitted in the current score region.
    pub pairs: usize,
    /// Emission counts per token id, for the repetition penalty.
    pub counts: Vec<u32>,
}

impl DecodeState {
    pub fn new(context: Vec<TokenId>, uncond_context: Vec<TokenId>, vocab_len: usize) -> Self {
        DecodeState {
            context,
            uncond_context,
            phase: Phase::Text,
            pairs: 0,
            counts: vec![0; vocab_len],
        }
    }

    fn push(&mut self, toks: &[TokenId]) {
        self.context.extend_from_slice(toks);
        self.uncond_context.extend_from_slice(toks);
    }

    fn emit(&mut self, tok: TokenId) {
        self.push(&[tok]);
        if let Some(c) = self.counts.get_mut(tok as usize) {
            *c += 1;
        }
    }

    /// Enters a score region after `<SOA>` has been pushed.
    pub fn open_region(&mut self) {
        self.phase = Phase::Audio;
        self.pairs = 0;
    }
}

/// Outcome of one dual-stream step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairStep {
    Pair(TokenId, TokenId),
    /// The model closed the score region instead of emitting a pair.
    EndOfScore,
}

fn padded(mut logits: Vec<f64>, len: usize) -> Vec<f64> {
    logits.resize(len, f64::NEG_INFINITY);
    logits.truncate(len);
    logits
}

/// Token distribution after the full sampling stack.
fn distribution(
    model: &dyn NextPairModel,
    state: &DecodeState,
    params: &SamplingParams,
    allowed: &dyn Fn(TokenId) -> bool,
) -> Result<Option<Vec<f64>>, DecodeError> {
    let n = state.counts.len();
    let adjust = |ctx: &[TokenId]| -> Result<Vec<f64>, DecodeError> {
        let mut l = padded(model.logits(ctx)?, n);
        apply_temperature(&mut l, params.temperature);
        apply_repetition_penalty(&mut l, &state.counts, params.repetition_penalty);
        Ok(l)
    };
    let cond = adjust(&state.context)?;
    let mut logits = if params.cfg_scale == 1.0 {
        cond
    } else {
        cfg_combine(&cond, &adjust(&state.uncond_context)?, params.cfg_scale)?
    };
    for (i, l) in logits.iter_mut().enumerate() {
        if !allowed(i as TokenId) {
            *l = f64::NEG_INFINITY;
        }
    }
    let Some(probs) = softmax(&logits) else {
        return Ok(None);
    };
    Ok(Some(filter_top_k_top_p(&probs, params.top_k, params.top_p)))
}

fn pick(probs: &[f64], mode: DecodeMode, rng: &mut ChaCha8Rng) -> TokenId {
    match mode {
        DecodeMode::Sample => sample(probs, rng),
        DecodeMode::Greedy => argmax(probs),
    }
}

/// Draws `v_t`, then `a_t` given `v_t`. The vocal position may close the
/// region with `<EOA>`; otherwise both tokens are content or `<PAD>`.
/// `NoAccompaniment(v)` leaves `v` emitted and the accompaniment open.
pub fn next_pair(
    model: &dyn NextPairModel,
    state: &mut DecodeState,
    vocab: &Vocabulary,
    params: &SamplingParams,
    mode: DecodeMode,
    rng: &mut ChaCha8Rng,
) -> Result<PairStep, DecodeError> {
    if state.phase != Phase::Audio {
        return Err(DecodeError::InvalidPrompt("next_pair outside a score region".into()));
    }
    let eoa = Marker::Eoa.id();
    let v_allowed = |t: TokenId| t == PAD || t == eoa || vocab.is_content(t);
    let v = match distribution(model, state, params, &v_allowed)? {
        Some(p) => pick(&p, mode, rng),
        None => return Err(DecodeError::EmptySupport { position: "vocal" }),
    };
    if v == eoa {
        state.push(&[eoa]);
        state.phase = Phase::Text;
        return Ok(PairStep::EndOfScore);
    }
    state.emit(v);
    let a_allowed = |t: TokenId| t == PAD || vocab.is_content(t);
    let a = match distribution(model, state, params, &a_allowed)? {
        Some(p) => pick(&p, mode, rng),
        None => return Err(DecodeError::NoAccompaniment(v)),
    };
    state.emit(a);
    state.pairs += 1;
    Ok(PairStep::Pair(v, a))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentMeta {
    pub label: String,
    pub pairs: usize,
    pub tokens: usize,
    /// Region closed by the token budget rather than the model.
    pub forced_end: bool,
    /// Positions where the model left no admissible token and a fallback
    /// was used.
    pub fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationMeta {
    pub params: SamplingParams,
    pub mode: String,
    pub rng: String,
    pub vocab_fingerprint: String,
    pub model_vocab_fingerprint: Option<String>,
    pub prompt_tokens: usize,
    pub generated_tokens: usize,
    pub total_tokens: usize,
    pub segments: Vec<SegmentMeta>,
}

#[derive(Debug, Clone)]
pub struct Generation {
    pub document: CosDocument,
    pub tokens: Vec<TokenId>,
    pub meta: GenerationMeta,
}

/// Fills the score region of every segment of `prompt`. Unseen prompt text
/// is added to `vocab`.
pub fn generate(
    model: &dyn NextPairModel,
    prompt: &CosDocument,
    params: &SamplingParams,
    mode: DecodeMode,
    vocab: &mut Vocabulary,
) -> Result<Generation, DecodeError> {
    params.validate()?;
    if prompt.segments.is_empty() {
        return Err(DecodeError::ZeroSegments);
    }
    if prompt.segments.iter().any(|s| !s.score.is_empty()) {
        return Err(DecodeError::InvalidPrompt("prompt segments must have empty scores".into()));
    }
    let size = model.vocab_size();
    if size > vocab.len() {
        return Err(DecodeError::VocabularyMismatch(format!(
            "model expects {size} entries, vocabulary has {}",
            vocab.len()
        )));
    }
    if let Some(fp) = model.vocab_fingerprint() {
        if fp != vocab.fingerprint_prefix(size) {
            return Err(DecodeError::VocabularyMismatch(
                "model was fitted on a different vocabulary".into(),
            ));
        }
    }

    let prelude = encode_prelude(prompt, vocab)?;
    let uncond = encode_prelude(&prompt.unconditional(), vocab)?;
    let heads = prompt
        .segments
        .iter()
        .map(|s| encode_segment_head(s, vocab))
        .collect::<Result<Vec<_>, _>>()?;
    let prompt_tokens = prelude.len() + heads.iter().map(Vec::len).sum::<usize>() + 2 * heads.len() + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut state = DecodeState::new(prelude, uncond, vocab.len());
    let mut document = prompt.clone();
    let mut seg_meta = Vec::new();
    let eoa = Marker::Eoa.id();

    for (seg, head) in document.segments.iter_mut().zip(heads) {
        state.push(&head);
        state.open_region();
        let mut score = DualSequence::new();
        let mut forced_end = false;
        let mut fallbacks = 0;
        loop {
            if score.flat().len() + 2 > params.max_new_tokens {
                forced_end = true;
                state.push(&[eoa]);
                break;
            }
            match next_pair(model, &mut state, vocab, params, mode, &mut rng) {
                Ok(PairStep::Pair(v, a)) => score.push(v, a),
                Ok(PairStep::EndOfScore) => break,
                Err(DecodeError::EmptySupport { .. }) => {
                    fallbacks += 1;
                    state.push(&[eoa]);
                    break;
                }
                Err(DecodeError::NoAccompaniment(v)) => {
                    fallbacks += 1;
                    state.emit(PAD);
                    state.pairs += 1;
                    score.push(v, PAD);
                }
                Err(e) => return Err(e),
            }
        }
        state.push(&[Marker::End.id()]);
        state.phase = Phase::Text;
        seg_meta.push(SegmentMeta {
            label: seg.label.name().to_string(),
            pairs: score.len(),
            tokens: score.flat().len(),
            forced_end,
            fallbacks,
        });
        seg.score = score;
    }
    state.push(&[Marker::Eod.id()]);
    state.phase = Phase::Done;

    let tokens = crate::cos::serialize_frozen(&document, vocab)?;
    debug_assert_eq!(tokens, state.context);
    let generated_tokens = seg_meta.iter().map(|s| s.tokens).sum();
    let meta = GenerationMeta {
        params: params.clone(),
        mode: match mode {
            DecodeMode::Sample => "sample",
            DecodeMode::Greedy => "greedy",
        }
        .into(),
        rng: RNG_ID.into(),
        vocab_fingerprint: format!("{:016x}", vocab.fingerprint()),
        model_vocab_fingerprint: model.vocab_fingerprint().map(|f| format!("{f:016x}")),
        prompt_tokens,
        generated_tokens,
        total_tokens: tokens.len(),
        segments: seg_meta,
    };
    Ok(Generation { document, tokens, meta })
}
