use std::collections::HashMap;

const LETTERS: [char; 7] = ['C', 'D', 'E', 'F', 'G', 'A', 'B'];
const SEMITONES: [i32; 7] = [0, 2, 4, 5, 7, 9, 11];
/// Position of each letter on the circle of fifths relative to C.
const TONIC_FIFTHS: [i8; 7] = [0, 2, 4, -1, 1, 3, 5];
const SHARP_ORDER: [usize; 7] = [3, 0, 4, 1, 5, 2, 6];
const FLAT_ORDER: [usize; 7] = [6, 2, 5, 1, 4, 0, 3];

pub(crate) fn letter_index(letter: char) -> Option<usize> {
    LETTERS.iter().position(|&l| l == letter.to_ascii_uppercase())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Accidental {
    DoubleSharp,
    Sharp,
    Natural,
    Flat,
    DoubleFlat,
}

impl Accidental {
    pub fn alter(self) -> i8 {
        match self {
            Accidental::DoubleSharp => 2,
            Accidental::Sharp => 1,
            Accidental::Natural => 0,
            Accidental::Flat => -1,
            Accidental::DoubleFlat => -2,
        }
    }

    /// Parses the accidental prefix at the start of `s`, returning it and its
    /// byte length.
    pub(crate) fn lex(s: &[u8]) -> Option<(Accidental, usize)> {
        match s {
            [b'^', b'^', ..] => Some((Accidental::DoubleSharp, 2)),
            [b'^', ..] => Some((Accidental::Sharp, 1)),
            [b'_', b'_', ..] => Some((Accidental::DoubleFlat, 2)),
            [b'_', ..] => Some((Accidental::Flat, 1)),
            [b'=', ..] => Some((Accidental::Natural, 1)),
            _ => None,
        }
    }
}

/// A written pitch: diatonic letter, optional accidental and octave shift
/// relative to the uppercase octave (`C` = middle C, `c` = +1, `C,` = -1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pitch {
    /// Uppercase letter `A`..`G`.
    pub letter: char,
    pub accidental: Option<Accidental>,
    pub octave: i8,
}

impl Pitch {
    pub fn new(letter: char, accidental: Option<Accidental>, octave: i8) -> Self {
        Pitch {
            letter: letter.to_ascii_uppercase(),
            accidental,
            octave,
        }
    }

    /// MIDI number given the alteration currently in force for this letter.
    pub fn midi_with_alter(&self, alter: i8) -> i32 {
        let idx = letter_index(self.letter).expect("pitch letter is A-G");
        60 + 12 * i32::from(self.octave) + SEMITONES[idx] + i32::from(alter)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Mode {
    #[default]
    Major,
    Minor,
    Mixolydian,
    Dorian,
    Phrygian,
    Lydian,
    Locrian,
}

impl Mode {
    fn fifths_offset(self) -> i8 {
        match self {
            Mode::Major => 0,
            Mode::Mixolydian => -1,
            Mode::Dorian => -2,
            Mode::Minor => -3,
            Mode::Phrygian => -4,
            Mode::Locrian => -5,
            Mode::Lydian => 1,
        }
    }

    fn parse(token: &str) -> Option<Mode> {
        let t = token.to_ascii_lowercase();
        if t == "m" {
            return Some(Mode::Minor);
        }
        if t.len() < 3 || t.contains('=') {
            return None;
        }
        Some(match &t[..3] {
            "maj" | "ion" => Mode::Major,
            "min" | "aeo" => Mode::Minor,
            "mix" => Mode::Mixolydian,
            "dor" => Mode::Dorian,
            "phr" => Mode::Phrygian,
            "lyd" => Mode::Lydian,
            "loc" => Mode::Locrian,
            _ => return None,
        })
    }
}

/// A `K:` field: key signature plus any explicit extra accidentals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Key {
    /// Field value, verbatim.
    pub text: String,
    /// Sharps (positive) or flats (negative) in the signature, -7..=7.
    pub fifths: i8,
    pub mode: Mode,
    /// Explicit accidentals listed after the key (`K:D ^g`), per letter index.
    pub extra: Vec<(usize, i8)>,
}

impl Default for Key {
    fn default() -> Self {
        Key {
            text: "C".into(),
            fifths: 0,
            mode: Mode::Major,
            extra: Vec::new(),
        }
    }
}

impl Key {
    pub fn parse(value: &str) -> Result<Key, String> {
        let text = value.trim().to_string();
        let mut key = Key {
            text: text.clone(),
            ..Key::default()
        };
        let lower = text.to_ascii_lowercase();
        if text.is_empty() || lower.starts_with("none") || lower.starts_with("hp") {
            return Ok(key);
        }
        let bytes = text.as_bytes();
        let tonic = letter_index(bytes[0] as char)
            .filter(|_| bytes[0].is_ascii_uppercase())
            .ok_or_else(|| format!("malformed key '{text}'"))?;
        let mut fifths = TONIC_FIFTHS[tonic];
        let mut rest = &text[1..];
        if let Some(r) = rest.strip_prefix('#') {
            fifths += 7;
            rest = r;
        } else if let Some(r) = rest.strip_prefix('b') {
            fifths -= 7;
            rest = r;
        }
        let mut tokens = rest.split_whitespace().peekable();
        if let Some(mode) = tokens.peek().and_then(|t| Mode::parse(t)) {
            key.mode = mode;
            tokens.next();
        }
        for tok in tokens {
            let b = tok.as_bytes();
            if let Some((acc, n)) = Accidental::lex(b) {
                if b.len() == n + 1 {
                    if let Some(idx) = letter_index(b[n] as char) {
                        key.extra.push((idx, acc.alter()));
                    }
                }
            }
        }
        fifths += key.mode.fifths_offset();
        if !(-7..=7).contains(&fifths) {
            return Err(format!("key '{text}' needs more than seven accidentals"));
        }
        key.fifths = fifths;
        Ok(key)
    }

    /// Alteration per letter index (C D E F G A B).
    pub fn signature(&self) -> [i8; 7] {
        let mut sig = [0i8; 7];
        let n = self.fifths.unsigned_abs() as usize;
        if self.fifths > 0 {
            for &i in &SHARP_ORDER[..n] {
                sig[i] = 1;
            }
        } else {
            for &i in &FLAT_ORDER[..n] {
                sig[i] = -1;
            }
        }
        for &(i, alter) in &self.extra {
            sig[i] = alter;
        }
        sig
    }
}

/// Resolves written pitches to MIDI numbers inside one bar: key signature
/// alterations apply unless an explicit accidental on the same letter and
/// octave appeared earlier in the bar.
#[derive(Debug)]
pub(crate) struct BarPitchState {
    signature: [i8; 7],
    explicit: HashMap<(char, i8), i8>,
}

impl BarPitchState {
    pub fn new(key: &Key) -> Self {
        BarPitchState {
            signature: key.signature(),
            explicit: HashMap::new(),
        }
    }

    pub fn reset(&mut self) {
        self.explicit.clear();
    }

    pub fn resolve(&mut self, pitch: &Pitch) -> i32 {
        let slot = (pitch.letter, pitch.octave);
        let alter = match pitch.accidental {
            Some(acc) => {
                self.explicit.insert(slot, acc.alter());
                acc.alter()
            }
            None => match self.explicit.get(&slot) {
                Some(&a) => a,
                None => self.signature[letter_index(pitch.letter).unwrap()],
            },
        };
        pitch.midi_with_alter(alter)
    }
}
