use super::{CosDocument, CosError, SectionLabel, Segment, DEFAULT_INSTRUCT};
use crate::dual::DualSequence;

/// A generation request: the document to complete plus ABC header lines
/// for rendering the result.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Prompt {
    pub document: CosDocument,
    pub header: Vec<String>,
}

/// Parses a prompt:
///
/// ```text
/// instruct: <text>
/// tags: <tag>, <tag>
/// header: K:G          (repeatable)
/// lyrics: <line>       (repeatable; default is the section lyrics)
/// [verse]
/// <lyric line>
/// [chorus]
/// <lyric line>
/// ```
///
/// Keys are read only before the first section. Blank lines and lines
/// starting with `#` are ignored.
pub fn parse_prompt(text: &str, file: &str) -> Result<Prompt, CosError> {
    let mut doc = CosDocument {
        instruct: DEFAULT_INSTRUCT.to_string(),
        ..CosDocument::default()
    };
    let mut header = Vec::new();
    let mut lyrics: Vec<&str> = Vec::new();
    let mut sections: Vec<(SectionLabel, Vec<&str>)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let err = |message: String| CosError::Sidecar {
            file: file.to_string(),
            line: n + 1,
            message,
        };
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let label = SectionLabel::from_name(name.trim()).map_err(|e| err(e.to_string()))?;
            sections.push((label, Vec::new()));
        } else if let Some((_, body)) = sections.last_mut() {
            body.push(line);
        } else if let Some(v) = line.strip_prefix("instruct:") {
            doc.instruct = v.trim().to_string();
        } else if let Some(v) = line.strip_prefix("tags:") {
            doc.tags = v
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(str::to_string)
                .collect();
        } else if let Some(v) = line.strip_prefix("header:") {
            let v = v.trim();
            if v.len() < 2 || !v.as_bytes()[0].is_ascii_uppercase() || v.as_bytes()[1] != b':' {
                return Err(err(format!("bad header field '{v}'")));
            }
            header.push(v.to_string());
        } else if let Some(v) = line.strip_prefix("lyrics:") {
            lyrics.push(v.trim());
        } else {
            return Err(err(format!("unexpected line before the first section: '{line}'")));
        }
    }
    if sections.is_empty() {
        return Err(CosError::Sidecar {
            file: file.to_string(),
            line: text.lines().count().max(1),
            message: "prompt has no [section]".into(),
        });
    }
    doc.lyrics = if lyrics.is_empty() {
        sections
            .iter()
            .flat_map(|(_, b)| b.iter().copied())
            .collect::<Vec<_>>()
            .join("\n")
    } else {
        lyrics.join("\n")
    };
    doc.segments = sections
        .into_iter()
        .map(|(label, body)| Segment {
            label,
            lyric: body.join("\n"),
            score: DualSequence::new(),
        })
        .collect();
    Ok(Prompt { document: doc, header })
}
