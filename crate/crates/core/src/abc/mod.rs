//! Multi-voice ABC lead sheets: data model, parser, printer and the symbolic
//! metrics computed over parsed scores.
//!
//! The supported subset covers the `X T M L Q K V` header fields, `w:` lyric
//! lines, notes, rests, chords, ties, tuplets, broken rhythm and repeats.
//! Anything else in a music line (decorations, grace notes, annotations,
//! inline fields) is kept verbatim inside [`Bar::source_text`] so that
//! printing a parsed score reproduces every bar byte-for-byte.

mod diag;
mod header;
mod lexer;
mod lyrics;
mod metrics;
mod parse;
mod pitch;
mod print;

use std::ops::Range;

pub use diag::{Diagnostic, Location, Severity};
pub use header::{Field, Headers, Meter, Tempo};
pub use lyrics::{align_lyrics, parse_syllables, LyricAlignment, LyricPair};
pub use metrics::{
    estimate_duration, performance_order, vocal_range, voice_duration, MetricsError,
};
pub use parse::{parse_score, ParseError, Parsed};
pub use pitch::{Accidental, Key, Mode, Pitch};
pub use print::print_score;
pub(crate) use pitch::BarPitchState;

/// Exact rational used for every duration and time value.
pub type Rational = num_rational::Ratio<i64>;

/// A parsed tune.
#[derive(Debug, Clone, PartialEq)]
pub struct Score {
    pub headers: Headers,
    pub voices: Vec<Voice>,
}

impl Score {
    pub fn voice(&self, id: &str) -> Option<&Voice> {
        self.voices.iter().find(|v| v.id == id)
    }

    /// Index of the sung voice: the first voice carrying `w:` lines, else the
    /// first voice.
    pub fn vocal_voice_index(&self) -> usize {
        self.voices
            .iter()
            .position(|v| !v.lyric_lines.is_empty())
            .unwrap_or(0)
    }

    pub fn meter(&self) -> Meter {
        self.headers.meter.clone().unwrap_or_default()
    }

    /// Effective `L:` unit, following the ABC default rule when absent.
    pub fn unit_length(&self) -> Rational {
        self.headers.unit.unwrap_or_else(|| {
            if self.meter().capacity() < Rational::new(3, 4) {
                Rational::new(1, 16)
            } else {
                Rational::new(1, 8)
            }
        })
    }

    /// Effective tempo; `Q:1/4=120` when the header is absent.
    pub fn tempo(&self) -> Tempo {
        self.headers.tempo.clone().unwrap_or_default()
    }

    pub fn key(&self) -> &Key {
        &self.headers.key
    }
}

/// One voice (`V:` block) of a score.
#[derive(Debug, Clone, PartialEq)]
pub struct Voice {
    pub id: String,
    /// Remainder of the `V:` line after the identifier, verbatim.
    pub properties: String,
    /// False for the implicit voice of a tune without any `V:` field.
    pub explicit: bool,
    pub bars: Vec<Bar>,
    pub lyric_lines: Vec<LyricLine>,
    /// Line structure of the voice body, used by the printer.
    pub layout: Vec<LineEntry>,
}

impl Voice {
    pub fn new(id: impl Into<String>) -> Self {
        Voice {
            id: id.into(),
            properties: String::new(),
            explicit: true,
            bars: Vec::new(),
            lyric_lines: Vec::new(),
            layout: Vec::new(),
        }
    }

    /// All events in order, tagged with their position.
    pub fn events(&self) -> impl Iterator<Item = (EventRef, &Event)> {
        self.bars.iter().enumerate().flat_map(|(b, bar)| {
            bar.events()
                .enumerate()
                .map(move |(e, ev)| (EventRef { bar: b, event: e }, ev))
        })
    }

    /// Indices of bars that close a music line.
    pub fn line_final_bars(&self) -> Vec<bool> {
        let mut flags = vec![false; self.bars.len()];
        let mut next = 0usize;
        for entry in &self.layout {
            if let LineEntry::Music { bars } = entry {
                next += bars;
                if *bars > 0 {
                    flags[next - 1] = true;
                }
            }
        }
        flags
    }
}

/// One physical line of a voice body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LineEntry {
    /// A music line made of the next `bars` bars.
    Music { bars: usize },
    /// A `w:` line, by index into [`Voice::lyric_lines`].
    Lyrics(usize),
    /// Any other body line (inline fields, comments, directives), verbatim.
    Passthrough(String),
}

/// Position of an event inside a voice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventRef {
    pub bar: usize,
    pub event: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarlineKind {
    Plain,
    RepeatOpen,
    RepeatClose,
    /// `::`, closing one repeat and opening the next.
    DoubleRepeat,
    Final,
    /// Line-final fragment with no delimiter.
    Open,
}

impl BarlineKind {
    pub(crate) fn classify(text: &str) -> Self {
        let t = text.trim_end_matches(|c: char| c.is_ascii_digit());
        if t.is_empty() {
            BarlineKind::Open
        } else if t.starts_with(':') && t.ends_with(':') {
            BarlineKind::DoubleRepeat
        } else if t.starts_with(':') || t.contains(":|") {
            BarlineKind::RepeatClose
        } else if t.ends_with(':') {
            BarlineKind::RepeatOpen
        } else if t.ends_with("|]") {
            BarlineKind::Final
        } else {
            BarlineKind::Plain
        }
    }

    pub fn opens_repeat(self) -> bool {
        matches!(self, BarlineKind::RepeatOpen | BarlineKind::DoubleRepeat)
    }

    pub fn closes_repeat(self) -> bool {
        matches!(self, BarlineKind::RepeatClose | BarlineKind::DoubleRepeat)
    }
}

/// A bar: the text between two delimiters, delimiter included on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct Bar {
    pub source_text: String,
    pub items: Vec<BarItem>,
    pub barline: BarlineKind,
}

impl Bar {
    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.items.iter().filter_map(|i| match i {
            BarItem::Event(e) => Some(e),
            _ => None,
        })
    }

    /// Concatenation of the item texts; equal to `source_text` for parsed bars.
    pub fn reprint(&self) -> String {
        self.items.iter().map(BarItem::text).collect()
    }

    /// Musical content of the bar in multiples of the `L:` unit.
    pub fn content(&self) -> Rational {
        self.events().map(|e| e.duration).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BarItem {
    Event(Event),
    /// Whitespace and syntax that is kept but not modelled.
    Text(String),
    Barline(String),
}

impl BarItem {
    pub fn text(&self) -> &str {
        match self {
            BarItem::Event(e) => &e.text,
            BarItem::Text(t) | BarItem::Barline(t) => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Note,
    Rest,
    Chord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    pub pitches: Vec<Pitch>,
    /// Sounding duration as a multiple of the `L:` unit, after tuplet and
    /// broken-rhythm adjustment.
    pub duration: Rational,
    /// Tied into the next event (`-`).
    pub tie: bool,
    pub slur_start: bool,
    pub slur_end: bool,
    /// Exact source text of the event.
    pub text: String,
}

impl Event {
    pub fn is_sounding(&self) -> bool {
        self.kind != EventKind::Rest
    }
}

/// A `w:` line.
#[derive(Debug, Clone)]
pub struct LyricLine {
    /// Text after `w:`, verbatim.
    pub source: String,
    pub syllables: Vec<Syllable>,
    /// Bars of the voice this line is sung over.
    pub bars: Range<usize>,
    /// 1-based line in the parsed text; not part of structural equality.
    pub line: usize,
}

impl PartialEq for LyricLine {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source && self.syllables == other.syllables && self.bars == other.bars
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Syllable {
    pub text: String,
    /// Followed by `-`: the word continues on the next note.
    pub continuation: bool,
    /// `_`: the previous syllable is held over this note.
    pub melisma: bool,
}
