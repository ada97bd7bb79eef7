//! Dual-stream layout: a vocal and an accompaniment token stream paired
//! step by step and flattened as `[v1, a1, v2, a2, ...]`.

use std::io::{BufRead, Read, Write};
use std::ops::{Mul, Range};

use num_traits::One;
use thiserror::Error;

use crate::abc::Score;
use crate::tokenizer::{
    encode_units, encode_units_frozen, PatchSequence, TokenId, TokenizerError, Unit, UnitTag,
    Vocabulary, BOS, EOS, PAD,
};

pub type TokenStream = Vec<TokenId>;

const BINARY_MAGIC: &[u8; 5] = b"DNTP1";

#[derive(Debug, Error)]
pub enum DualError {
    #[error("odd length {0}: a dual sequence holds (v, a) pairs")]
    OddLength(usize),
    #[error("score has no voices")]
    EmptyScore,
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One time step: `t` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DualStep {
    pub t: usize,
    pub v: TokenId,
    pub a: TokenId,
}

/// A sequence of (vocal, accompaniment) pairs, stored in its flat form.
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct DualSequence {
    flat: Vec<TokenId>,
}

impl DualSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_flat(flat: Vec<TokenId>) -> Result<Self, DualError> {
        if !flat.len().is_multiple_of(2) {
            return Err(DualError::OddLength(flat.len()));
        }
        Ok(DualSequence { flat })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (TokenId, TokenId)>) -> Self {
        let mut s = Self::new();
        for (v, a) in pairs {
            s.push(v, a);
        }
        s
    }

    pub fn push(&mut self, v: TokenId, a: TokenId) {
        self.flat.push(v);
        self.flat.push(a);
    }

    pub fn flat(&self) -> &[TokenId] {
        &self.flat
    }

    pub fn into_flat(self) -> Vec<TokenId> {
        self.flat
    }

    /// Number of steps `T`.
    pub fn len(&self) -> usize {
        self.flat.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn steps(&self) -> impl Iterator<Item = DualStep> + '_ {
        self.flat.chunks_exact(2).enumerate().map(|(i, p)| DualStep {
            t: i + 1,
            v: p[0],
            a: p[1],
        })
    }
}

/// Pairs two streams step by step, padding the shorter one with `PAD`.
pub fn interleave(v: &[TokenId], a: &[TokenId]) -> DualSequence {
    let t = v.len().max(a.len());
    let mut flat = Vec::with_capacity(2 * t);
    for i in 0..t {
        flat.push(v.get(i).copied().unwrap_or(PAD));
        flat.push(a.get(i).copied().unwrap_or(PAD));
    }
    DualSequence { flat }
}

/// Splits a sequence back into its streams, dropping trailing `PAD`s.
pub fn deinterleave(seq: &DualSequence) -> (TokenStream, TokenStream) {
    let mut v: Vec<_> = seq.flat.iter().step_by(2).copied().collect();
    let mut a: Vec<_> = seq.flat.iter().skip(1).step_by(2).copied().collect();
    for s in [&mut v, &mut a] {
        while s.last() == Some(&PAD) {
            s.pop();
        }
    }
    (v, a)
}

pub fn deinterleave_flat(flat: &[TokenId]) -> Result<(TokenStream, TokenStream), DualError> {
    if !flat.len().is_multiple_of(2) {
        return Err(DualError::OddLength(flat.len()));
    }
    Ok(deinterleave(&DualSequence {
        flat: flat.to_vec(),
    }))
}

/// The two encoded streams of a score.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tracks {
    /// Index of the voice used as the vocal stream.
    pub vocal_voice: usize,
    pub vocal: PatchSequence,
    pub accomp: PatchSequence,
}

impl Tracks {
    pub fn interleave(&self) -> DualSequence {
        interleave(&self.vocal.ids, &self.accomp.ids)
    }
}

/// Bar units of one voice. A bar that closes its source line, or the last
/// bar of the range, carries a trailing newline so the stream decodes to
/// line-structured ABC.
fn voice_units(score: &Score, vi: usize, bars: &Range<usize>) -> Vec<Unit> {
    let voice = &score.voices[vi];
    let finals = voice.line_final_bars();
    let end = bars.end.min(voice.bars.len());
    let start = bars.start.min(end);
    let mut line = 1;
    let mut line_of = Vec::with_capacity(voice.bars.len());
    for f in &finals {
        line_of.push(line);
        if *f {
            line += 1;
        }
    }
    (start..end)
        .map(|i| {
            let mut text = voice.bars[i].source_text.clone();
            if finals[i] || i + 1 == end {
                text.push('\n');
            }
            Unit {
                text,
                line: line_of[i],
                tag: UnitTag::Bar { voice: vi, index: i },
            }
        })
        .collect()
}

fn track_units(score: &Score, bars: &Range<usize>) -> Result<(usize, Vec<Unit>, Vec<Unit>), DualError> {
    if score.voices.is_empty() {
        return Err(DualError::EmptyScore);
    }
    let vocal = score.vocal_voice_index();
    let vu = voice_units(score, vocal, bars);
    let au = (0..score.voices.len())
        .filter(|&i| i != vocal)
        .flat_map(|i| voice_units(score, i, bars))
        .collect();
    Ok((vocal, vu, au))
}

fn strip_specials(mut s: PatchSequence) -> PatchSequence {
    if s.ids.first() == Some(&BOS) && s.ids.last() == Some(&EOS) {
        s.ids.remove(0);
        s.ids.pop();
        if let Some(o) = s.origins.as_mut() {
            o.remove(0);
            o.pop();
        }
    }
    s
}

/// Vocal stream = first voice with lyric lines (else the first voice);
/// accompaniment = the other voices in declaration order.
pub fn split_tracks(score: &Score, vocab: &mut Vocabulary) -> Result<Tracks, DualError> {
    split_tracks_range(score, 0..usize::MAX, vocab)
}

/// [`split_tracks`] restricted to the bar indices in `bars` of every voice.
pub fn split_tracks_range(
    score: &Score,
    bars: Range<usize>,
    vocab: &mut Vocabulary,
) -> Result<Tracks, DualError> {
    let (vocal_voice, vu, au) = track_units(score, &bars)?;
    Ok(Tracks {
        vocal_voice,
        vocal: strip_specials(encode_units(&vu, vocab)?),
        accomp: strip_specials(encode_units(&au, vocab)?),
    })
}

pub fn split_tracks_frozen(score: &Score, vocab: &Vocabulary) -> Result<Tracks, DualError> {
    let (vocal_voice, vu, au) = track_units(score, &(0..usize::MAX))?;
    Ok(Tracks {
        vocal_voice,
        vocal: strip_specials(encode_units_frozen(&vu, vocab)?),
        accomp: strip_specials(encode_units_frozen(&au, vocab)?),
    })
}

/// Writes `step<TAB>v<TAB>a` lines, steps counted from 1.
pub fn write_text(mut w: impl Write, seq: &DualSequence) -> std::io::Result<()> {
    for s in seq.steps() {
        writeln!(w, "{}\t{}\t{}", s.t, s.v, s.a)?;
    }
    Ok(())
}

pub fn read_text(r: impl BufRead) -> Result<DualSequence, DualError> {
    let mut seq = DualSequence::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let err = |message: String| DualError::Format {
            line: n + 1,
            message,
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(err("expected step<TAB>v<TAB>a".into()));
        }
        let num = |s: &str| s.parse::<u32>().map_err(|_| err(format!("bad number '{s}'")));
        let t = num(f[0])? as usize;
        if t != seq.len() + 1 {
            return Err(err(format!("step {t} out of order")));
        }
        seq.push(num(f[1])?, num(f[2])?);
    }
    Ok(seq)
}

/// `DNTP1` followed by the flat ids as little-endian u32.
pub fn write_binary(mut w: impl Write, seq: &DualSequence) -> std::io::Result<()> {
    w.write_all(BINARY_MAGIC)?;
    for id in &seq.flat {
        w.write_all(&id.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary(mut r: impl Read) -> Result<DualSequence, DualError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let body = bytes.strip_prefix(BINARY_MAGIC.as_slice()).ok_or(DualError::Format {
        line: 0,
        message: "missing DNTP1 magic".into(),
    })?;
    if body.len() % 4 != 0 {
        return Err(DualError::Format {
            line: 0,
            message: "truncated id".into(),
        });
    }
    let flat = body
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DualSequence::from_flat(flat)
}

/// Probability of a sequence as a product of per-step pair probabilities,
/// `p_pair(context, v, a)` with the flat context before the step.
pub fn product_stepwise<T, F>(seq: &DualSequence, mut p_pair: F) -> T
where
    T: One + Mul<Output = T>,
    F: FnMut(&[TokenId], TokenId, TokenId) -> T,
{
    let mut acc = T::one();
    for (i, s) in seq.steps().enumerate() {
        acc = acc * p_pair(&seq.flat[..2 * i], s.v, s.a);
    }
    acc
}

/// Probability of a flat token list by the plain chain rule,
/// `p_token(context, token)`.
pub fn product_flat<T, F>(flat: &[TokenId], mut p_token: F) -> T
where
    T: One + Mul<Output = T>,
    F: FnMut(&[TokenId], TokenId) -> T,
{
    let mut acc = T::one();
    for i in 0..flat.len() {
        acc = acc * p_token(&flat[..i], flat[i]);
    }
    acc
}
