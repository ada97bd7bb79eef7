use thiserror::Error;

use super::header::parse_fraction;
use super::lexer::{lex_music_line, LineContext};
use super::lyrics::parse_syllables;
use super::{
    Diagnostic, Field, Headers, Key, LineEntry, Location, LyricLine, Meter, Rational, Score,
    Tempo, Voice,
};

/// A successfully parsed score and the warnings collected on the way.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub score: Score,
    pub diagnostics: Vec<Diagnostic>,
}

/// Parsing failed; `diagnostics` holds every message, errors and warnings.
#[derive(Debug, Clone, Error)]
#[error("{}", summarize(.diagnostics))]
pub struct ParseError {
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseError {
    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.is_error())
    }
}

fn summarize(diags: &[Diagnostic]) -> String {
    match diags.iter().find(|d| d.is_error()) {
        Some(d) => d.to_string(),
        None => "invalid ABC".into(),
    }
}

fn field_of(line: &str) -> Option<(char, &str)> {
    let b = line.as_bytes();
    if b.len() >= 2 && b[0].is_ascii_alphabetic() && b[1] == b':' {
        Some((b[0] as char, &line[2..]))
    } else if b.len() >= 2 && b[0] == b'+' && b[1] == b':' {
        Some(('+', &line[2..]))
    } else {
        None
    }
}

fn strip_comment(line: &str) -> &str {
    let b = line.as_bytes();
    let mut quoted = false;
    for (i, &c) in b.iter().enumerate() {
        match c {
            b'"' => quoted = !quoted,
            b'%' if !quoted && (i == 0 || b[i - 1] != b'\\') => return line[..i].trim_end(),
            _ => {}
        }
    }
    line
}

#[derive(Default)]
struct VoiceState {
    lyric_anchor: usize,
    declared_in_header: bool,
}

struct Parser {
    diags: Vec<Diagnostic>,
    headers: Headers,
    tempo_raw: Option<(String, usize)>,
    key_seen: bool,
    key_error_reported: bool,
    voices: Vec<Voice>,
    states: Vec<VoiceState>,
    current: Option<usize>,
    pending: Vec<String>,
    ctx_bar_units: Option<Rational>,
}

/// Parses one ABC tune. Only the first tune of a multi-tune file is read.
pub fn parse_score(text: &str) -> Result<Parsed, ParseError> {
    let mut p = Parser {
        diags: Vec::new(),
        headers: Headers::default(),
        tempo_raw: None,
        key_seen: false,
        key_error_reported: false,
        voices: Vec::new(),
        states: Vec::new(),
        current: None,
        pending: Vec::new(),
        ctx_bar_units: None,
    };
    let mut in_header = true;
    let mut last_line = 1;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        last_line = line_no;
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        if in_header {
            if line.starts_with('%') {
                continue;
            }
            match field_of(line) {
                Some((tag, value)) => {
                    if p.header_field(tag, value, line_no) {
                        in_header = false;
                    }
                    continue;
                }
                None => {
                    p.diags
                        .push(Diagnostic::error(Location::new(line_no, 1), "missing key header"));
                    p.key_error_reported = true;
                    in_header = false;
                    if !p.voices.is_empty() {
                        p.current = Some(p.voices.len() - 1);
                    }
                }
            }
        }
        if !p.body_line(line, line_no) {
            break;
        }
    }
    p.finish(last_line)
}

impl Parser {
    fn check_ascii(&mut self, s: &str, line: usize, lenient: bool) {
        if let Some(pos) = s.find(|c: char| !c.is_ascii()) {
            let loc = Location::new(line, s[..pos].chars().count() + 1);
            let ch = s[pos..].chars().next().unwrap();
            if lenient {
                self.diags
                    .push(Diagnostic::warning(loc, format!("non-ASCII character '{ch}'")));
            } else {
                self.diags.push(Diagnostic::error(
                    loc,
                    format!("non-ASCII character '{ch}' outside title or lyrics"),
                ));
            }
        }
    }

    /// Handles a header line; returns true when it was the closing `K:`.
    fn header_field(&mut self, tag: char, value: &str, line: usize) -> bool {
        let loc = Location::new(line, 3);
        self.check_ascii(value, line, matches!(tag, 'T' | 'W' | 'w'));
        let v = value.trim();
        match tag {
            'X' => match v.parse::<u32>() {
                Ok(i) => self.headers.index = Some(i),
                Err(_) => self
                    .diags
                    .push(Diagnostic::warning(loc, format!("malformed tune index '{v}'"))),
            },
            'T' => self.headers.titles.push(v.to_string()),
            'M' => match Meter::parse(v) {
                Ok(m) => self.headers.meter = Some(m),
                Err(e) => self.diags.push(Diagnostic::error(loc, e)),
            },
            'L' => match parse_fraction(v) {
                Some(l) if v.contains('/') => self.headers.unit = Some(l),
                _ => self
                    .diags
                    .push(Diagnostic::error(loc, format!("malformed unit length '{v}'"))),
            },
            'Q' => self.tempo_raw = Some((v.to_string(), line)),
            'K' => match Key::parse(v) {
                Ok(k) => self.headers.key = k,
                Err(e) => self.diags.push(Diagnostic::error(loc, e)),
            },
            'V' => {
                self.declare_voice(value, line, true);
                return false;
            }
            'w' => {
                self.diags
                    .push(Diagnostic::warning(loc, "lyrics before the tune body are ignored"));
                return false;
            }
            _ => {}
        }
        self.headers.fields.push(Field::new(tag, value.trim_end()));
        if tag == 'K' {
            self.key_seen = true;
            return true;
        }
        false
    }

    fn bar_units(&mut self) -> Rational {
        if let Some(u) = self.ctx_bar_units {
            return u;
        }
        let score = Score {
            headers: self.headers.clone(),
            voices: Vec::new(),
        };
        let u = score.meter().capacity() / score.unit_length();
        self.ctx_bar_units = Some(u);
        u
    }

    fn declare_voice(&mut self, value: &str, line: usize, in_header: bool) -> Option<usize> {
        let value = value.trim_end();
        let trimmed = value.trim_start();
        let id: String = trimmed.split_whitespace().next().unwrap_or("").to_string();
        if id.is_empty() {
            self.diags.push(Diagnostic::error(
                Location::new(line, 3),
                "unbalanced voice declaration: V: field without an identifier",
            ));
            return None;
        }
        let props = trimmed[id.len()..].to_string();
        self.check_ascii(value, line, false);
        let idx = match self.voices.iter().position(|v| v.id == id) {
            Some(i) => i,
            None => {
                self.voices.push(Voice::new(id));
                self.states.push(VoiceState::default());
                self.voices.len() - 1
            }
        };
        if !props.is_empty() {
            self.voices[idx].properties = props;
        }
        if in_header {
            self.states[idx].declared_in_header = true;
        }
        Some(idx)
    }

    fn ensure_voice(&mut self, line: usize) -> usize {
        if let Some(c) = self.current {
            return c;
        }
        if !self.voices.is_empty() {
            self.diags.push(Diagnostic::error(
                Location::new(line, 1),
                "unbalanced voice declaration: music before the first V: field",
            ));
            self.current = Some(0);
            return 0;
        }
        let mut v = Voice::new("1");
        v.explicit = false;
        self.voices.push(v);
        self.states.push(VoiceState::default());
        self.current = Some(0);
        0
    }

    /// Returns false when the parser should stop (start of a second tune).
    fn body_line(&mut self, line: &str, line_no: usize) -> bool {
        if line.starts_with('%') {
            self.check_ascii(line, line_no, false);
            self.passthrough(line.to_string());
            return true;
        }
        if let Some((tag, value)) = field_of(line) {
            match tag {
                'V' => {
                    if let Some(idx) = self.declare_voice(value, line_no, false) {
                        if let Some(c) = self.current {
                            if !self.voices[c].explicit {
                                self.diags.push(Diagnostic::error(
                                    Location::new(line_no, 1),
                                    "unbalanced voice declaration: music before the first V: field",
                                ));
                            }
                        }
                        self.current = Some(idx);
                        for p in std::mem::take(&mut self.pending) {
                            self.voices[idx].layout.push(LineEntry::Passthrough(p));
                        }
                    }
                }
                'w' => self.lyrics(value, line_no),
                'X' => {
                    self.diags.push(Diagnostic::warning(
                        Location::new(line_no, 1),
                        "only the first tune in a file is read",
                    ));
                    return false;
                }
                _ => {
                    self.check_ascii(value, line_no, matches!(tag, 'T' | 'W'));
                    self.passthrough(line.to_string());
                }
            }
            return true;
        }
        let music = strip_comment(line);
        if music.trim().is_empty() {
            return true;
        }
        let idx = self.ensure_voice(line_no);
        let ctx = LineContext {
            line: line_no,
            bar_units: self.bar_units(),
        };
        let bars = lex_music_line(music, &ctx, &mut self.diags);
        if bars.is_empty() {
            return true;
        }
        for bar in &bars {
            if bar.content() > ctx.bar_units {
                self.diags.push(Diagnostic::warning(
                    Location::new(line_no, 1),
                    format!("bar '{}' is longer than the meter allows", bar.source_text.trim()),
                ));
            }
        }
        let voice = &mut self.voices[idx];
        voice.layout.push(LineEntry::Music { bars: bars.len() });
        voice.bars.extend(bars);
        true
    }

    fn passthrough(&mut self, line: String) {
        match self.current {
            Some(c) => self.voices[c].layout.push(LineEntry::Passthrough(line)),
            None => self.pending.push(line),
        }
    }

    fn lyrics(&mut self, value: &str, line_no: usize) {
        self.check_ascii(value, line_no, true);
        let idx = self.ensure_voice(line_no);
        let voice = &mut self.voices[idx];
        let state = &mut self.states[idx];
        let bars = match voice.layout.last() {
            // A second w: line directly under the first is another verse
            // over the same bars.
            Some(LineEntry::Lyrics(j)) => voice.lyric_lines[*j].bars.clone(),
            _ => {
                let r = state.lyric_anchor..voice.bars.len();
                state.lyric_anchor = voice.bars.len();
                r
            }
        };
        let syllables = parse_syllables(value);
        voice.lyric_lines.push(LyricLine {
            source: value.to_string(),
            syllables,
            bars,
            line: line_no,
        });
        voice.layout.push(LineEntry::Lyrics(voice.lyric_lines.len() - 1));
    }

    fn finish(mut self, last_line: usize) -> Result<Parsed, ParseError> {
        if !self.key_seen && !self.key_error_reported {
            self.diags
                .push(Diagnostic::error(Location::new(last_line, 1), "missing key header"));
        }
        let unit = Score {
            headers: self.headers.clone(),
            voices: Vec::new(),
        }
        .unit_length();
        match self.tempo_raw.take() {
            Some((raw, line)) => match Tempo::parse(&raw, unit) {
                Ok(t) => self.headers.tempo = Some(t),
                Err(e) => self.diags.push(Diagnostic::error(Location::new(line, 3), e)),
            },
            None => self.diags.push(Diagnostic::warning(
                Location::new(1, 1),
                "missing tempo header, assuming Q:1/4=120",
            )),
        }
        if self.voices.is_empty() {
            let mut v = Voice::new("1");
            v.explicit = false;
            self.voices.push(v);
            self.states.push(VoiceState::default());
        }
        if !self.pending.is_empty() {
            let pending = std::mem::take(&mut self.pending);
            let first = &mut self.voices[0];
            let mut layout: Vec<LineEntry> = pending.into_iter().map(LineEntry::Passthrough).collect();
            layout.append(&mut first.layout);
            first.layout = layout;
        }
        for (v, st) in self.voices.iter().zip(&self.states) {
            if st.declared_in_header && v.layout.is_empty() {
                self.diags.push(Diagnostic::error(
                    Location::new(1, 1),
                    format!("unbalanced voice declaration: V:{} is declared but has no music", v.id),
                ));
            }
        }
        self.diags.sort_by_key(|d| d.location);
        if self.diags.iter().any(Diagnostic::is_error) {
            return Err(ParseError {
                diagnostics: self.diags,
            });
        }
        Ok(Parsed {
            score: Score {
                headers: self.headers,
                voices: self.voices,
            },
            diagnostics: self.diags,
        })
    }
}
