use thiserror::Error;

use super::pitch::BarPitchState;
use super::{Rational, Score, Voice};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("voice '{0}' not found")]
    VoiceNotFound(String),
    #[error("voice '{0}' has no notes")]
    NoNotes(String),
}

/// Bar indices in playing order with simple repeats unrolled.
///
/// A repeat section starts after the last `|:` (or the previous repeat end,
/// or the start of the voice) and is played twice when `:|` is reached.
pub fn performance_order(voice: &Voice) -> Vec<usize> {
    let mut order = Vec::with_capacity(voice.bars.len());
    let mut section_start = 0;
    for (i, bar) in voice.bars.iter().enumerate() {
        order.push(i);
        if bar.barline.closes_repeat() {
            order.extend(section_start..=i);
            section_start = i + 1;
        }
        if bar.barline.opens_repeat() {
            section_start = i + 1;
        }
    }
    order
}

/// Semitone span between the lowest and highest sounding pitch of a voice.
pub fn vocal_range(score: &Score, voice_id: &str) -> Result<i32, MetricsError> {
    let voice = score
        .voice(voice_id)
        .ok_or_else(|| MetricsError::VoiceNotFound(voice_id.to_string()))?;
    let mut state = BarPitchState::new(score.key());
    let mut lo = i32::MAX;
    let mut hi = i32::MIN;
    for bar in &voice.bars {
        state.reset();
        for ev in bar.events() {
            for p in &ev.pitches {
                let m = state.resolve(p);
                lo = lo.min(m);
                hi = hi.max(m);
            }
        }
    }
    if lo > hi {
        return Err(MetricsError::NoNotes(voice_id.to_string()));
    }
    Ok(hi - lo)
}

/// Playing time of one voice in seconds, repeats unrolled.
pub fn voice_duration(score: &Score, voice: &Voice) -> Rational {
    let unit = score.unit_length();
    let whole_notes: Rational = performance_order(voice)
        .into_iter()
        .map(|i| voice.bars[i].content() * unit)
        .sum();
    score.tempo().seconds(whole_notes)
}

/// Song duration in seconds: the playing time of the longest voice.
pub fn estimate_duration(score: &Score) -> Rational {
    score
        .voices
        .iter()
        .map(|v| voice_duration(score, v))
        .max()
        .unwrap_or_else(|| Rational::from_integer(0))
}
