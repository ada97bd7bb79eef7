use std::ops::Range;

use super::{CosDocument, CosError};
use crate::abc::{align_lyrics, Rational, Score};
use crate::dual::deinterleave;
use crate::tokenizer::{decode_patches, Vocabulary};

/// Aim for reference excerpts of about this length.
pub const REFERENCE_TARGET_SECS: i64 = 30;
pub const REFERENCE_MIN_SECS: i64 = 15;
pub const REFERENCE_MAX_SECS: i64 = 60;

/// Playing time of bars `range` of the vocal voice, repeats not unrolled.
pub(crate) fn excerpt_seconds(score: &Score, range: Range<usize>) -> Rational {
    let Some(voice) = score.voices.get(score.vocal_voice_index()) else {
        return Rational::from_integer(0);
    };
    let end = range.end.min(voice.bars.len());
    let start = range.start.min(end);
    let whole: Rational = voice.bars[start..end]
        .iter()
        .map(|b| b.content() * score.unit_length())
        .sum();
    score.tempo().seconds(whole)
}

/// Bars of the vocal voice starting at `start` whose playing time first
/// reaches `target_secs` (or the rest of the song if it is shorter).
pub fn reference_excerpt(score: &Score, start: usize, target_secs: i64) -> Range<usize> {
    let bars = score
        .voices
        .get(score.vocal_voice_index())
        .map_or(0, |v| v.bars.len());
    let target = Rational::from_integer(target_secs);
    let start = start.min(bars);
    let mut end = start;
    while end < bars && excerpt_seconds(score, start..end) < target {
        end += 1;
    }
    start..end
}

/// Sung text over `bars` of voice `voice`, one line: syllables of a word
/// joined by `-`, words by spaces.
pub fn segment_lyric(score: &Score, voice: usize, bars: Range<usize>) -> String {
    let Some(v) = score.voices.get(voice) else {
        return String::new();
    };
    let mut out = String::new();
    for pair in align_lyrics(v).pairs {
        if !bars.contains(&pair.event.bar) {
            continue;
        }
        out.push_str(&pair.syllable.text);
        out.push(if pair.syllable.continuation { '-' } else { ' ' });
    }
    while out.ends_with(' ') {
        out.pop();
    }
    out
}

/// Header used for rendered documents; `overrides` replace fields by tag.
fn header(overrides: &[String]) -> Vec<String> {
    let mut fields: Vec<String> = ["X:1", "T:Generated song", "M:4/4", "L:1/8", "Q:1/4=120", "K:C"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for o in overrides {
        let Some(tag) = o.split(':').next().filter(|t| t.len() == 1) else {
            continue;
        };
        if !"XTMLQK".contains(tag) {
            continue;
        }
        match fields.iter_mut().find(|f| f.starts_with(&format!("{tag}:"))) {
            Some(f) => *f = o.clone(),
            None => fields.push(o.clone()),
        }
    }
    fields
}

fn push_block(out: &mut String, text: &str) {
    for line in text.lines() {
        if !line.trim().is_empty() {
            out.push_str(line);
            out.push('\n');
        }
    }
}

/// Renders a document as a two-voice ABC tune: `V:1` holds the vocal
/// stream of every segment (preceded by a `% label` comment and followed by
/// its lyric as a `w:` line), `V:2` the accompaniment.
pub fn render_abc(doc: &CosDocument, vocab: &Vocabulary, header_overrides: &[String]) -> Result<String, CosError> {
    let mut out = String::new();
    for f in header(header_overrides) {
        out.push_str(&f);
        out.push('\n');
    }
    let mut accomp = String::new();
    out.push_str("V:1\n");
    for seg in &doc.segments {
        let (v, a) = deinterleave(&seg.score);
        out.push_str("% ");
        out.push_str(seg.label.name());
        out.push('\n');
        let vocal = decode_patches(&v, vocab)?;
        push_block(&mut out, &vocal);
        let lyric = seg.lyric.replace('\n', " ");
        if !lyric.trim().is_empty() && !vocal.trim().is_empty() {
            out.push_str("w: ");
            out.push_str(lyric.trim());
            out.push('\n');
        }
        push_block(&mut accomp, &decode_patches(&a, vocab)?);
    }
    if !accomp.is_empty() {
        out.push_str("V:2\n");
        out.push_str(&accomp);
    }
    Ok(out)
}
