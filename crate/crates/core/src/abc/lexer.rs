//! Splits one music line into bars and events.

use super::pitch::{letter_index, Accidental};
use super::{Bar, BarItem, BarlineKind, Diagnostic, Event, EventKind, Location, Pitch, Rational};

pub(crate) struct LineContext {
    pub line: usize,
    /// Length of a full bar in `L:` units, used by `Z` rests.
    pub bar_units: Rational,
}

struct Lexer<'a, 'd> {
    src: &'a str,
    b: &'a [u8],
    i: usize,
    ctx: &'a LineContext,
    diags: &'d mut Vec<Diagnostic>,
    bars: Vec<Bar>,
    items: Vec<BarItem>,
    bar_start: usize,
    slur_pending: bool,
    tuplet: Option<(Rational, u32)>,
    broken_next: Option<Rational>,
}

pub(crate) fn lex_music_line(line: &str, ctx: &LineContext, diags: &mut Vec<Diagnostic>) -> Vec<Bar> {
    let mut lx = Lexer {
        src: line,
        b: line.as_bytes(),
        i: 0,
        ctx,
        diags,
        bars: Vec::new(),
        items: Vec::new(),
        bar_start: 0,
        slur_pending: false,
        tuplet: None,
        broken_next: None,
    };
    lx.run();
    lx.bars
}

fn is_note_letter(c: u8) -> bool {
    matches!(c, b'A'..=b'G' | b'a'..=b'g')
}

/// Parses an ABC length suffix at `i`: `2`, `/`, `//`, `3/2`, `/4`.
/// Returns the multiplier and the index after it.
pub(crate) fn lex_length(b: &[u8], mut i: usize) -> Result<(Rational, usize), ()> {
    let digits = |i: &mut usize| -> Option<Result<i64, ()>> {
        let start = *i;
        while *i < b.len() && b[*i].is_ascii_digit() {
            *i += 1;
        }
        if *i == start {
            None
        } else {
            Some(
                std::str::from_utf8(&b[start..*i])
                    .unwrap()
                    .parse::<i64>()
                    .map_err(|_| ())
                    .and_then(|v| if v > 1 << 20 { Err(()) } else { Ok(v) }),
            )
        }
    };
    let num = match digits(&mut i) {
        Some(n) => n?,
        None => 1,
    };
    let mut den = 1i64;
    if i < b.len() && b[i] == b'/' {
        let mut slashes = 0u32;
        while i < b.len() && b[i] == b'/' {
            slashes += 1;
            i += 1;
        }
        match digits(&mut i) {
            Some(d) => {
                if slashes > 1 {
                    return Err(());
                }
                den = d?;
            }
            None => {
                if slashes > 8 {
                    return Err(());
                }
                den = 1 << slashes;
            }
        }
    }
    if num == 0 || den == 0 {
        return Err(());
    }
    Ok((Rational::new(num, den), i))
}

impl Lexer<'_, '_> {
    fn peek(&self, off: usize) -> Option<u8> {
        self.b.get(self.i + off).copied()
    }

    fn loc(&self, at: usize) -> Location {
        Location::new(self.ctx.line, at + 1)
    }

    fn push_text(&mut self, start: usize, end: usize) {
        let s = &self.src[start..end];
        if let Some(BarItem::Text(prev)) = self.items.last_mut() {
            prev.push_str(s);
        } else {
            self.items.push(BarItem::Text(s.to_string()));
        }
    }

    fn warn(&mut self, at: usize, msg: impl Into<String>) {
        let loc = self.loc(at);
        self.diags.push(Diagnostic::warning(loc, msg));
    }

    fn last_event_mut(&mut self) -> Option<&mut Event> {
        self.items.iter_mut().rev().find_map(|it| match it {
            BarItem::Event(e) => Some(e),
            _ => None,
        })
    }

    fn finish_bar(&mut self, end: usize, barline: BarlineKind) {
        let items = std::mem::take(&mut self.items);
        self.bars.push(Bar {
            source_text: self.src[self.bar_start..end].to_string(),
            items,
            barline,
        });
        self.bar_start = end;
    }

    fn run(&mut self) {
        while self.i < self.b.len() {
            let c = self.b[self.i];
            let next = self.peek(1);
            match c {
                b'|' => self.barline(),
                b':' if matches!(next, Some(b'|') | Some(b':')) => self.barline(),
                b'[' if next == Some(b'|') => self.barline(),
                b'[' => self.bracket(),
                b'"' => self.delimited(b'"', true),
                b'!' => self.delimited(b'!', false),
                b'+' => self.delimited(b'+', false),
                b'{' => self.delimited(b'}', true),
                b'(' => self.paren(),
                b')' => {
                    if let Some(e) = self.last_event_mut() {
                        e.slur_end = true;
                    }
                    self.push_text(self.i, self.i + 1);
                    self.i += 1;
                }
                b'>' | b'<' => self.broken_rhythm(c),
                b'^' | b'_' | b'=' => self.note(),
                _ if is_note_letter(c) => self.note(),
                b'z' | b'x' => self.rest(),
                b'Z' | b'X' => self.bar_rest(),
                b' ' | b'\t' | b'.' | b'~' | b'H' | b'L' | b'M' | b'O' | b'P' | b'S' | b'T'
                | b'u' | b'v' | b'y' | b'`' | b'$' | b'&' | b'\\' | b'-' | b':' => {
                    self.push_text(self.i, self.i + 1);
                    self.i += 1;
                }
                _ if !c.is_ascii() => {
                    let ch = self.src[self.i..].chars().next().unwrap();
                    let end = self.i + ch.len_utf8();
                    let loc = self.loc(self.i);
                    self.diags
                        .push(Diagnostic::error(loc, format!("non-ASCII character '{ch}' in music line")));
                    self.push_text(self.i, end);
                    self.i = end;
                }
                _ => {
                    let what = if c.is_ascii_digit() {
                        "stray number".to_string()
                    } else {
                        format!("unrecognized character '{}'", c as char)
                    };
                    self.warn(self.i, what);
                    self.push_text(self.i, self.i + 1);
                    self.i += 1;
                }
            }
        }
        let pending = self.items.iter().any(|it| !it.text().trim().is_empty());
        if pending {
            self.finish_bar(self.b.len(), BarlineKind::Open);
        } else if !self.items.is_empty() {
            // Trailing whitespace only; lines are trimmed so this is rare.
            if let Some(last) = self.bars.last_mut() {
                for it in std::mem::take(&mut self.items) {
                    last.source_text.push_str(it.text());
                    last.items.push(it);
                }
            }
        }
    }

    fn barline(&mut self) {
        let start = self.i;
        let mut j = self.i;
        if self.b[j] == b'[' {
            j += 1;
        }
        while j < self.b.len() && matches!(self.b[j], b'|' | b':') {
            j += 1;
        }
        if j < self.b.len() && self.b[j] == b']' && self.b[j - 1] == b'|' {
            j += 1;
        }
        while j < self.b.len() && self.b[j].is_ascii_digit() {
            j += 1;
        }
        let text = &self.src[start..j];
        let kind = BarlineKind::classify(text);
        self.items.push(BarItem::Barline(text.to_string()));
        self.i = j;
        self.finish_bar(j, kind);
    }

    /// Quoted strings, decorations and grace groups, kept as text.
    fn delimited(&mut self, close: u8, warn_unclosed: bool) {
        let start = self.i;
        match self.b[start + 1..].iter().position(|&c| c == close) {
            Some(off) => {
                let end = start + 1 + off + 1;
                self.push_text(start, end);
                self.i = end;
            }
            None => {
                if warn_unclosed {
                    self.warn(start, format!("unclosed '{}'", self.b[start] as char));
                }
                self.push_text(start, start + 1);
                self.i += 1;
            }
        }
    }

    fn paren(&mut self) {
        let start = self.i;
        if !matches!(self.peek(1), Some(c) if c.is_ascii_digit()) {
            self.slur_pending = true;
            self.push_text(start, start + 1);
            self.i += 1;
            return;
        }
        // Tuplet (p:q:r
        let mut j = start + 1;
        let mut nums: Vec<Option<u32>> = Vec::new();
        loop {
            let s = j;
            while j < self.b.len() && self.b[j].is_ascii_digit() {
                j += 1;
            }
            nums.push(self.src[s..j].parse::<u32>().ok());
            if nums.len() < 3 && j < self.b.len() && self.b[j] == b':' {
                j += 1;
            } else {
                break;
            }
        }
        self.push_text(start, j);
        self.i = j;
        let p = nums[0].unwrap_or(0);
        if p < 2 {
            self.warn(start, "malformed tuplet");
            return;
        }
        let q = nums.get(1).copied().flatten().unwrap_or(match p {
            3 | 6 => 2,
            2 | 4 | 8 => 3,
            _ => 2,
        });
        let r = nums.get(2).copied().flatten().unwrap_or(p);
        if q == 0 || r == 0 {
            self.warn(start, "malformed tuplet");
            return;
        }
        self.tuplet = Some((Rational::new(i64::from(q), i64::from(p)), r));
    }

    fn broken_rhythm(&mut self, c: u8) {
        let start = self.i;
        let mut j = start;
        while j < self.b.len() && self.b[j] == c && j - start < 3 {
            j += 1;
        }
        let n = (j - start) as i64;
        let short = Rational::new(1, 1 << n);
        let long = Rational::from_integer(2) - short;
        let (prev, next) = if c == b'>' { (long, short) } else { (short, long) };
        self.push_text(start, j);
        self.i = j;
        match self.last_event_mut() {
            Some(e) => {
                e.duration *= prev;
                self.broken_next = Some(next);
            }
            None => self.warn(start, "broken rhythm without a preceding note"),
        }
    }

    fn scale(&mut self, base: Rational) -> Rational {
        let mut d = base;
        if let Some((factor, left)) = self.tuplet {
            d *= factor;
            self.tuplet = if left > 1 { Some((factor, left - 1)) } else { None };
        }
        if let Some(f) = self.broken_next.take() {
            d *= f;
        }
        d
    }

    fn length_at(&mut self, j: usize) -> (Rational, usize) {
        match lex_length(self.b, j) {
            Ok(v) => v,
            Err(()) => {
                let mut end = j;
                while end < self.b.len() && (self.b[end].is_ascii_digit() || self.b[end] == b'/') {
                    end += 1;
                }
                let loc = self.loc(j);
                let tok = &self.src[j..end];
                self.diags
                    .push(Diagnostic::error(loc, format!("malformed duration token '{tok}'")));
                (Rational::from_integer(1), end)
            }
        }
    }

    /// Parses a single pitch with its length at `j`; no side effects besides
    /// diagnostics for a malformed length.
    fn pitch_at(&mut self, mut j: usize) -> Option<(Pitch, Rational, bool, usize)> {
        let mut accidental = None;
        if let Some((acc, n)) = Accidental::lex(&self.b[j..]) {
            accidental = Some(acc);
            j += n;
        }
        let c = *self.b.get(j)?;
        if !is_note_letter(c) {
            return None;
        }
        let mut octave: i8 = if c.is_ascii_lowercase() { 1 } else { 0 };
        j += 1;
        while j < self.b.len() {
            match self.b[j] {
                b'\'' => octave += 1,
                b',' => octave -= 1,
                _ => break,
            }
            j += 1;
        }
        let (len, mut j) = self.length_at(j);
        let tie = j < self.b.len() && self.b[j] == b'-';
        if tie {
            j += 1;
        }
        debug_assert!(letter_index(c as char).is_some());
        Some((Pitch::new(c as char, accidental, octave), len, tie, j))
    }

    fn push_event(&mut self, kind: EventKind, pitches: Vec<Pitch>, base: Rational, tie: bool, start: usize, end: usize) {
        let duration = self.scale(base);
        let slur_start = std::mem::take(&mut self.slur_pending);
        self.items.push(BarItem::Event(Event {
            kind,
            pitches,
            duration,
            tie,
            slur_start,
            slur_end: false,
            text: self.src[start..end].to_string(),
        }));
        self.i = end;
    }

    fn note(&mut self) {
        let start = self.i;
        match self.pitch_at(start) {
            Some((pitch, len, tie, end)) => {
                self.push_event(EventKind::Note, vec![pitch], len, tie, start, end)
            }
            None => {
                // Accidental not followed by a letter.
                self.warn(start, "accidental without a note");
                self.push_text(start, start + 1);
                self.i += 1;
            }
        }
    }

    fn rest(&mut self) {
        let start = self.i;
        let (len, end) = self.length_at(start + 1);
        self.push_event(EventKind::Rest, Vec::new(), len, false, start, end);
    }

    fn bar_rest(&mut self) {
        let start = self.i;
        let mut j = start + 1;
        while j < self.b.len() && self.b[j].is_ascii_digit() {
            j += 1;
        }
        let count = if j == start + 1 {
            Ok(1)
        } else {
            self.src[start + 1..j].parse::<i64>().map_err(|_| ())
        };
        let count = match count {
            Ok(n) if n > 0 && n < 10_000 => n,
            _ => {
                let loc = self.loc(start + 1);
                self.diags.push(Diagnostic::error(
                    loc,
                    format!("malformed duration token '{}'", &self.src[start + 1..j]),
                ));
                1
            }
        };
        let len = self.ctx.bar_units * Rational::from_integer(count);
        self.push_event(EventKind::Rest, Vec::new(), len, false, start, j);
    }

    fn bracket(&mut self) {
        let start = self.i;
        match self.peek(1) {
            Some(c) if c.is_ascii_alphabetic() && self.peek(2) == Some(b':') => {
                // Inline field such as [K:G].
                return self.delimited(b']', true);
            }
            Some(c) if c.is_ascii_digit() => {
                let mut j = start + 1;
                while j < self.b.len() && self.b[j].is_ascii_digit() {
                    j += 1;
                }
                self.push_text(start, j);
                self.i = j;
                return;
            }
            _ => {}
        }
        let saved = self.diags.len();
        let mut j = start + 1;
        let mut pitches = Vec::new();
        let mut first_len = None;
        let mut tie = false;
        let closed = loop {
            match self.b.get(j) {
                Some(b']') => break true,
                Some(_) => match self.pitch_at(j) {
                    Some((p, len, t, end)) => {
                        pitches.push(p);
                        first_len.get_or_insert(len);
                        tie |= t;
                        j = end;
                    }
                    None => break false,
                },
                None => break false,
            }
        };
        if !closed || pitches.is_empty() {
            self.diags.truncate(saved);
            self.warn(start, if closed { "empty chord" } else { "unclosed chord" });
            self.push_text(start, start + 1);
            self.i += 1;
            return;
        }
        let (outer, mut end) = self.length_at(j + 1);
        if end < self.b.len() && self.b[end] == b'-' {
            tie = true;
            end += 1;
        }
        let kind = if pitches.len() == 1 { EventKind::Note } else { EventKind::Chord };
        let base = first_len.unwrap() * outer;
        self.push_event(kind, pitches, base, tie, start, end);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex(line: &str) -> (Vec<Bar>, Vec<Diagnostic>) {
        let ctx = LineContext {
            line: 1,
            bar_units: Rational::from_integer(8),
        };
        let mut d = Vec::new();
        let bars = lex_music_line(line, &ctx, &mut d);
        (bars, d)
    }

    #[test]
    fn lengths() {
        let r = |s: &str| lex_length(s.as_bytes(), 0).map(|(l, _)| l);
        assert_eq!(r(""), Ok(Rational::from_integer(1)));
        assert_eq!(r("2"), Ok(Rational::from_integer(2)));
        assert_eq!(r("/"), Ok(Rational::new(1, 2)));
        assert_eq!(r("//"), Ok(Rational::new(1, 4)));
        assert_eq!(r("3/2"), Ok(Rational::new(3, 2)));
        assert_eq!(r("/3"), Ok(Rational::new(1, 3)));
        assert_eq!(r("0"), Err(()));
        assert_eq!(r("3/0"), Err(()));
        assert_eq!(r("//4"), Err(()));
    }

    #[test]
    fn four_note_bar() {
        let (bars, d) = lex("C2 E2 G2 c2 |");
        assert!(d.is_empty());
        assert_eq!(bars.len(), 1);
        assert_eq!(bars[0].source_text, "C2 E2 G2 c2 |");
        assert_eq!(bars[0].events().count(), 4);
        assert_eq!(bars[0].content(), Rational::from_integer(8));
        assert_eq!(bars[0].barline, BarlineKind::Plain);
    }

    #[test]
    fn bars_reprint_exactly() {
        let line = r#"|: "G"!trill!G>A {g}B2 (3cde [CEG]2- [CEG] | z4 x/ ^f=f_b :|2 [K:D] d'c,B, |]"#;
        let (bars, _) = lex(line);
        let joined: String = bars.iter().map(|b| b.source_text.clone()).collect();
        assert_eq!(joined, line);
        for b in &bars {
            assert_eq!(b.reprint(), b.source_text);
        }
        assert_eq!(bars[0].barline, BarlineKind::RepeatOpen);
        assert_eq!(bars.last().unwrap().barline, BarlineKind::Final);
    }

    #[test]
    fn chords_ties_and_tuplets() {
        let (bars, d) = lex("[CEG]2- [CEG] (3CDE |");
        assert!(d.is_empty(), "{d:?}");
        let ev: Vec<_> = bars[0].events().collect();
        assert_eq!(ev[0].kind, EventKind::Chord);
        assert_eq!(ev[0].pitches.len(), 3);
        assert!(ev[0].tie);
        assert_eq!(ev[0].duration, Rational::from_integer(2));
        assert_eq!(ev[2].duration, Rational::new(2, 3));
        assert_eq!(bars[0].content(), Rational::from_integer(5));
    }

    #[test]
    fn broken_rhythm_keeps_pair_length() {
        let (bars, _) = lex("A>B C<D|");
        let d: Vec<_> = bars[0].events().map(|e| e.duration).collect();
        assert_eq!(d, vec![Rational::new(3, 2), Rational::new(1, 2), Rational::new(1, 2), Rational::new(3, 2)]);
    }

    #[test]
    fn malformed_duration_is_an_error() {
        let (_, d) = lex("C0 D2 |");
        assert_eq!(d.len(), 1);
        assert!(d[0].is_error());
        assert_eq!(d[0].location.column, 2);
    }

    #[test]
    fn open_fragment_without_barline() {
        let (bars, _) = lex("C2 D2 | E4");
        assert_eq!(bars.len(), 2);
        assert_eq!(bars[1].barline, BarlineKind::Open);
        assert_eq!(bars[1].source_text, " E4");
    }

    #[test]
    fn multi_bar_rest_fills_bars() {
        let (bars, _) = lex("Z2 |");
        assert_eq!(bars[0].content(), Rational::from_integer(16));
    }

    #[test]
    fn unclosed_chord_is_kept_as_text() {
        let (bars, d) = lex("[CE G2 |");
        assert_eq!(bars[0].source_text, "[CE G2 |");
        assert!(d.iter().all(|d| !d.is_error()));
        assert_eq!(bars[0].events().count(), 3);
    }
}
