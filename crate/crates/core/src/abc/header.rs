use super::{Key, Rational};

/// A raw header line, `tag:value`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    pub tag: char,
    /// Everything after the colon, with trailing whitespace removed.
    pub value: String,
}

impl Field {
    pub fn new(tag: char, value: impl Into<String>) -> Self {
        Field {
            tag,
            value: value.into(),
        }
    }
}

/// Tune header. `fields` keeps every header line in source order (this is
/// what gets printed); the typed members are decoded from it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Headers {
    pub fields: Vec<Field>,
    pub index: Option<u32>,
    pub titles: Vec<String>,
    pub meter: Option<Meter>,
    pub unit: Option<Rational>,
    pub tempo: Option<Tempo>,
    pub key: Key,
}

/// `M:` field. The capacity of a bar is `numerator / denominator` whole notes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Meter {
    pub numerator: u32,
    pub denominator: u32,
    pub text: String,
}

impl Default for Meter {
    fn default() -> Self {
        Meter {
            numerator: 4,
            denominator: 4,
            text: "4/4".into(),
        }
    }
}

impl Meter {
    pub fn new(numerator: u32, denominator: u32) -> Self {
        Meter {
            numerator,
            denominator,
            text: format!("{numerator}/{denominator}"),
        }
    }

    pub fn parse(value: &str) -> Result<Meter, String> {
        let text = value.trim();
        let (num, den) = match text {
            "C" => (4, 4),
            "C|" => (2, 2),
            _ => {
                let (n, d) = text
                    .split_once('/')
                    .ok_or_else(|| format!("malformed meter '{text}'"))?;
                let n = n.trim().trim_start_matches('(').trim_end_matches(')');
                let mut num = 0u32;
                for part in n.split('+') {
                    num += part
                        .trim()
                        .parse::<u32>()
                        .map_err(|_| format!("malformed meter '{text}'"))?;
                }
                let den = d
                    .trim()
                    .parse::<u32>()
                    .map_err(|_| format!("malformed meter '{text}'"))?;
                (num, den)
            }
        };
        if num == 0 || den == 0 {
            return Err(format!("meter '{text}' must be positive"));
        }
        Ok(Meter {
            numerator: num,
            denominator: den,
            text: text.to_string(),
        })
    }

    pub fn capacity(&self) -> Rational {
        Rational::new(i64::from(self.numerator), i64::from(self.denominator))
    }
}

/// `Q:` field: `beat` (as a fraction of a whole note) played `bpm` times a minute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tempo {
    pub beat: Rational,
    pub bpm: u32,
    pub text: String,
}

impl Default for Tempo {
    fn default() -> Self {
        Tempo {
            beat: Rational::new(1, 4),
            bpm: 120,
            text: "1/4=120".into(),
        }
    }
}

impl Tempo {
    /// Parses a `Q:` value. A bare number uses `unit` as the beat.
    pub fn parse(value: &str, unit: Rational) -> Result<Tempo, String> {
        let text = value.trim();
        // Drop quoted tempo words such as "Allegro".
        let mut stripped = String::new();
        let mut quoted = false;
        for c in text.chars() {
            if c == '"' {
                quoted = !quoted;
            } else if !quoted {
                stripped.push(c);
            }
        }
        let bad = || format!("malformed tempo '{text}'");
        let (beat, bpm) = match stripped.split_once('=') {
            Some((lhs, rhs)) => {
                let mut beat = Rational::from_integer(0);
                for frac in lhs.split_whitespace() {
                    beat += parse_fraction(frac).ok_or_else(bad)?;
                }
                if beat == Rational::from_integer(0) {
                    return Err(bad());
                }
                (beat, rhs.trim().parse::<u32>().map_err(|_| bad())?)
            }
            None => (unit, stripped.trim().parse::<u32>().map_err(|_| bad())?),
        };
        if bpm == 0 {
            return Err(format!("tempo '{text}' must be positive"));
        }
        Ok(Tempo {
            beat,
            bpm,
            text: text.to_string(),
        })
    }

    /// Seconds taken by `whole_notes` whole notes at this tempo.
    pub fn seconds(&self, whole_notes: Rational) -> Rational {
        whole_notes / self.beat * Rational::from_integer(60) / Rational::from_integer(i64::from(self.bpm))
    }

    /// Microseconds per quarter note, rounded to the nearest integer.
    pub fn micros_per_quarter(&self) -> u32 {
        let quarters_per_minute = self.beat * Rational::from_integer(4 * i64::from(self.bpm));
        let us = Rational::from_integer(60_000_000) / quarters_per_minute;
        us.round().to_integer() as u32
    }
}

/// Parses `n/d`, `n` or `/d` into a positive rational.
pub(crate) fn parse_fraction(s: &str) -> Option<Rational> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (
            if n.is_empty() { 1 } else { n.parse::<i64>().ok()? },
            d.parse::<i64>().ok()?,
        ),
        None => (s.parse::<i64>().ok()?, 1),
    };
    if n <= 0 || d <= 0 {
        return None;
    }
    Some(Rational::new(n, d))
}
