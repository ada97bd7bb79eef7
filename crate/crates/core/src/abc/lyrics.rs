use super::{Diagnostic, EventKind, EventRef, Location, Syllable, Voice};

/// Splits a `w:` line into syllables.
///
/// Spaces separate words, `-` separates syllables of one word, `_` holds the
/// previous syllable over one more note, `*` skips a note, `~` joins words
/// under one note and `\-` is a literal hyphen. `|` is accepted as a
/// separator.
pub fn parse_syllables(line: &str) -> Vec<Syllable> {
    let mut out = Vec::new();
    let mut buf = String::new();
    let mut have = false;
    let mut chars = line.chars().peekable();
    let flush = |out: &mut Vec<Syllable>, buf: &mut String, have: &mut bool, cont: bool| {
        if *have {
            out.push(Syllable {
                text: std::mem::take(buf),
                continuation: cont,
                melisma: false,
            });
            *have = false;
        }
    };
    while let Some(c) = chars.next() {
        match c {
            ' ' | '\t' | '|' => flush(&mut out, &mut buf, &mut have, false),
            '-' => {
                if have {
                    flush(&mut out, &mut buf, &mut have, true);
                } else if matches!(out.last(), Some(s) if s.continuation) {
                    // "--": an extra note inside the word.
                    out.push(Syllable {
                        text: String::new(),
                        continuation: true,
                        melisma: false,
                    });
                }
            }
            '_' => {
                flush(&mut out, &mut buf, &mut have, false);
                out.push(Syllable {
                    text: String::new(),
                    continuation: false,
                    melisma: true,
                });
            }
            '*' => {
                flush(&mut out, &mut buf, &mut have, false);
                out.push(Syllable {
                    text: String::new(),
                    continuation: false,
                    melisma: false,
                });
            }
            '~' => {
                buf.push(' ');
                have = true;
            }
            '\\' if chars.peek() == Some(&'-') => {
                chars.next();
                buf.push('-');
                have = true;
            }
            _ => {
                buf.push(c);
                have = true;
            }
        }
    }
    flush(&mut out, &mut buf, &mut have, false);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LyricPair {
    pub event: EventRef,
    pub syllable: Syllable,
}

/// Result of [`align_lyrics`]: note/syllable pairs plus mismatch reports.
#[derive(Debug, Clone, Default)]
pub struct LyricAlignment {
    pub pairs: Vec<LyricPair>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Pairs singable notes with syllables, one `w:` line at a time over the
/// bars that line covers.
///
/// A note is singable when it is a note or chord that is not the tied
/// continuation of the previous note. Syllables consume notes in order;
/// `_` and `*` consume a note without producing a pair. Extra notes stay
/// unpaired; extra syllables are reported. When several `w:` lines cover the
/// same bars (further verses) only the first is aligned.
pub fn align_lyrics(voice: &Voice) -> LyricAlignment {
    let mut out = LyricAlignment::default();

    let mut singable = Vec::new();
    let mut tied = false;
    for (r, ev) in voice.events() {
        match ev.kind {
            EventKind::Rest => tied = false,
            _ => {
                if !tied {
                    singable.push(r);
                }
                tied = ev.tie;
            }
        }
    }

    let mut seen_ranges = Vec::new();
    for line in &voice.lyric_lines {
        if seen_ranges.contains(&line.bars) {
            continue;
        }
        seen_ranges.push(line.bars.clone());
        let mut notes = singable.iter().filter(|r| line.bars.contains(&r.bar));
        let mut surplus = 0usize;
        for syl in &line.syllables {
            match notes.next() {
                Some(r) => {
                    if !syl.text.is_empty() {
                        out.pairs.push(LyricPair {
                            event: *r,
                            syllable: syl.clone(),
                        });
                    }
                }
                None => surplus += 1,
            }
        }
        if surplus > 0 {
            out.diagnostics.push(Diagnostic::warning(
                Location::new(line.line, 1),
                format!("{surplus} surplus syllable(s) without a note"),
            ));
        }
    }
    out
}
