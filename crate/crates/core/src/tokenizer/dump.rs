//! Plain-text token dumps.
//!
//! ```text
//! # songbar tokens v1
//! # count=<N>
//! # abc:<header line>          (optional, repeated)
//! <id>                         (token without origin)
//! <id>\t<line>\t<chunk>\t<last>\t<tag>
//! ```
//!
//! Tags: `H:<field>` header, `V:<id>` voice line, `B:<voice>:<bar>` bar,
//! `W:<voice>` lyrics, `P` passthrough, `R` raw line, `T` document text.

use std::io::{BufRead, Write};

use super::{Origin, PatchSequence, TokenId, TokenizerError, UnitTag};

const MAGIC: &str = "# songbar tokens v1";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenDump {
    pub seq: PatchSequence,
    /// ABC header lines carried along with a generated document.
    pub abc_header: Vec<String>,
}

fn tag_str(tag: &UnitTag) -> String {
    match tag {
        UnitTag::Header(c) => format!("H:{c}"),
        UnitTag::Voice(id) => format!("V:{id}"),
        UnitTag::Bar { voice, index } => format!("B:{voice}:{index}"),
        UnitTag::Lyrics { voice } => format!("W:{voice}"),
        UnitTag::Passthrough => "P".into(),
        UnitTag::Raw => "R".into(),
        UnitTag::Text => "T".into(),
    }
}

fn parse_tag(s: &str) -> Option<UnitTag> {
    Some(match s.split_once(':') {
        None => match s {
            "P" => UnitTag::Passthrough,
            "R" => UnitTag::Raw,
            "T" => UnitTag::Text,
            _ => return None,
        },
        Some(("H", f)) => {
            let mut c = f.chars();
            let tag = c.next()?;
            if c.next().is_some() {
                return None;
            }
            UnitTag::Header(tag)
        }
        Some(("V", id)) if !id.is_empty() => UnitTag::Voice(id.to_string()),
        Some(("B", rest)) => {
            let (v, i) = rest.split_once(':')?;
            UnitTag::Bar {
                voice: v.parse().ok()?,
                index: i.parse().ok()?,
            }
        }
        Some(("W", v)) => UnitTag::Lyrics {
            voice: v.parse().ok()?,
        },
        _ => return None,
    })
}

pub fn write_dump(mut w: impl Write, dump: &TokenDump) -> std::io::Result<()> {
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "# count={}", dump.seq.ids.len())?;
    for h in &dump.abc_header {
        writeln!(w, "# abc:{h}")?;
    }
    for (i, id) in dump.seq.ids.iter().enumerate() {
        let origin = dump.seq.origins.as_ref().and_then(|o| o.get(i)).and_then(Option::as_ref);
        match origin {
            Some(o) => writeln!(
                w,
                "{id}\t{}\t{}\t{}\t{}",
                o.line,
                o.chunk,
                u8::from(o.last_in_unit),
                tag_str(&o.tag)
            )?,
            None => writeln!(w, "{id}")?,
        }
    }
    Ok(())
}

pub fn read_dump(r: impl BufRead) -> Result<TokenDump, TokenizerError> {
    let mut ids = Vec::new();
    let mut origins = Vec::new();
    let mut any_origin = false;
    let mut count = None;
    let mut abc_header = Vec::new();
    let mut saw_magic = false;
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let err = |message: String| TokenizerError::DumpFormat {
            line: n + 1,
            message,
        };
        if n == 0 {
            if line != MAGIC {
                return Err(err(format!("expected '{MAGIC}'")));
            }
            saw_magic = true;
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim_start();
            if let Some(c) = rest.strip_prefix("count=") {
                count = Some(c.parse::<usize>().map_err(|_| err(format!("bad count '{c}'")))?);
            } else if let Some(h) = rest.strip_prefix("abc:") {
                abc_header.push(h.to_string());
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let id: TokenId = fields[0]
            .parse()
            .map_err(|_| err(format!("bad token id '{}'", fields[0])))?;
        ids.push(id);
        match fields.len() {
            1 => origins.push(None),
            5 => {
                let num = |s: &str| s.parse::<usize>().map_err(|_| err(format!("bad number '{s}'")));
                let last = match fields[3] {
                    "0" => false,
                    "1" => true,
                    other => return Err(err(format!("bad flag '{other}'"))),
                };
                let tag = parse_tag(fields[4]).ok_or_else(|| err(format!("bad tag '{}'", fields[4])))?;
                any_origin = true;
                origins.push(Some(Origin {
                    line: num(fields[1])?,
                    tag,
                    chunk: num(fields[2])?,
                    last_in_unit: last,
                }));
            }
            k => return Err(err(format!("expected 1 or 5 fields, found {k}"))),
        }
    }
    if !saw_magic {
        return Err(TokenizerError::DumpFormat {
            line: 1,
            message: "empty dump".into(),
        });
    }
    if let Some(c) = count {
        if c != ids.len() {
            return Err(TokenizerError::DumpFormat {
                line: 2,
                message: format!("count={c} but {} tokens listed", ids.len()),
            });
        }
    }
    Ok(TokenDump {
        seq: PatchSequence {
            ids,
            origins: any_origin.then_some(origins),
        },
        abc_header,
    })
}
