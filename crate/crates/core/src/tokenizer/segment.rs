use crate::abc::{parse_score, LineEntry, ParseError, Score};

/// What a unit was cut from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum UnitTag {
    Header(char),
    /// A `V:` line, by voice id.
    Voice(String),
    Bar { voice: usize, index: usize },
    Lyrics { voice: usize },
    Passthrough,
    /// A line of text that was not parsed as ABC.
    Raw,
    /// Free text of a document field.
    Text,
}

/// A segmentation unit and the canonical line it sits on (1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unit {
    pub text: String,
    pub line: usize,
    pub tag: UnitTag,
}

/// Cuts a parsed score into units following its canonical printed layout:
/// one unit per header line, `V:` line, lyric line and passthrough line,
/// and one unit per bar. Units on the same `line` are consecutive bars of
/// one music line.
pub fn score_units(score: &Score) -> Vec<Unit> {
    let mut out = Vec::new();
    let mut line = 0;
    let push = |out: &mut Vec<Unit>, line: usize, text: String, tag: UnitTag| {
        out.push(Unit { text, line, tag });
    };
    for f in &score.headers.fields {
        line += 1;
        push(&mut out, line, format!("{}:{}", f.tag, f.value), UnitTag::Header(f.tag));
    }
    for (vi, voice) in score.voices.iter().enumerate() {
        if voice.explicit {
            line += 1;
            push(
                &mut out,
                line,
                format!("V:{}{}", voice.id, voice.properties),
                UnitTag::Voice(voice.id.clone()),
            );
        }
        let mut next_bar = 0;
        for entry in &voice.layout {
            line += 1;
            match entry {
                LineEntry::Music { bars } => {
                    for index in next_bar..next_bar + bars {
                        push(
                            &mut out,
                            line,
                            voice.bars[index].source_text.clone(),
                            UnitTag::Bar { voice: vi, index },
                        );
                    }
                    next_bar += bars;
                }
                LineEntry::Lyrics(i) => push(
                    &mut out,
                    line,
                    format!("w:{}", voice.lyric_lines[*i].source),
                    UnitTag::Lyrics { voice: vi },
                ),
                LineEntry::Passthrough(text) => {
                    push(&mut out, line, text.clone(), UnitTag::Passthrough)
                }
            }
        }
    }
    out
}

/// Parses `text` and segments its canonical form. Blank text has no units.
pub fn segment_units(text: &str) -> Result<Vec<Unit>, ParseError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    Ok(score_units(&parse_score(text)?.score))
}

/// Segmentation for text that is not parsed: every line is one unit.
pub fn segment_raw(text: &str) -> Vec<Unit> {
    text.lines()
        .enumerate()
        .map(|(i, l)| Unit {
            text: l.to_string(),
            line: i + 1,
            tag: UnitTag::Raw,
        })
        .collect()
}
