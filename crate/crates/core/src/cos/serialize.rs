use super::{CosDocument, CosError, Marker, SectionLabel, Segment};
use crate::dual::DualSequence;
use crate::tokenizer::{
    encode_unit, encode_unit_frozen, TokenId, TokenizerError, Vocabulary, PAD, PAD_CHAR,
};

/// Separator between tags on the tag line.
pub const TAG_SEPARATOR: &str = ", ";

type Lookup<'a> = dyn FnMut(&str) -> Result<Vec<TokenId>, TokenizerError> + 'a;

fn single_line(name: &str, s: &str) -> Result<(), CosError> {
    if s.contains('\n') {
        return Err(CosError::InvalidField(format!("{name} must be a single line")));
    }
    Ok(())
}

fn tag_line(tags: &[String]) -> Result<String, CosError> {
    for t in tags {
        if t.is_empty() || t.contains(TAG_SEPARATOR) || t.contains('\n') {
            return Err(CosError::InvalidField(format!("bad tag {t:?}")));
        }
    }
    Ok(tags.join(TAG_SEPARATOR))
}

fn split_tags(line: &str) -> Vec<String> {
    if line.is_empty() {
        Vec::new()
    } else {
        line.split(TAG_SEPARATOR).map(str::to_string).collect()
    }
}

/// Every line of `text` becomes one unit terminated by `\n`.
fn push_lines(out: &mut Vec<TokenId>, text: &str, lookup: &mut Lookup) -> Result<(), CosError> {
    for line in text.split('\n') {
        out.extend(lookup(&format!("{line}\n"))?);
    }
    Ok(())
}

fn push_score(out: &mut Vec<TokenId>, score: &DualSequence) {
    out.push(Marker::Soa.id());
    out.extend_from_slice(score.flat());
    out.push(Marker::Eoa.id());
}

/// Score regions may hold only `PAD` and content ids of `vocab`.
fn check_score(score: &DualSequence, vocab: &Vocabulary) -> Result<(), CosError> {
    match score
        .flat()
        .iter()
        .find(|&&id| id != PAD && !vocab.is_content(id))
    {
        Some(&id) => Err(CosError::VocabularyMismatch(id)),
        None => Ok(()),
    }
}

fn check_scores(doc: &CosDocument, vocab: &Vocabulary) -> Result<(), CosError> {
    for s in doc.icl_ref.iter().chain(doc.segments.iter().map(|s| &s.score)) {
        check_score(s, vocab)?;
    }
    Ok(())
}

fn prelude(doc: &CosDocument, lookup: &mut Lookup) -> Result<Vec<TokenId>, CosError> {
    single_line("instruct", &doc.instruct)?;
    let tags = tag_line(&doc.tags)?;
    let mut out = Vec::new();
    if let Some(r) = &doc.icl_ref {
        push_score(&mut out, r);
    }
    push_lines(&mut out, &doc.instruct, lookup)?;
    push_lines(&mut out, &tags, lookup)?;
    push_lines(&mut out, &doc.lyrics, lookup)?;
    Ok(out)
}

fn segment_head(seg: &Segment, lookup: &mut Lookup) -> Result<Vec<TokenId>, CosError> {
    seg.label.validate()?;
    let mut out = vec![Marker::Start.id()];
    push_lines(&mut out, seg.label.name(), lookup)?;
    push_lines(&mut out, &seg.lyric, lookup)?;
    out.push(Marker::Soa.id());
    Ok(out)
}

fn serialize_with(doc: &CosDocument, lookup: &mut Lookup) -> Result<Vec<TokenId>, CosError> {
    let mut out = prelude(doc, lookup)?;
    for seg in &doc.segments {
        out.extend(segment_head(seg, lookup)?);
        out.extend_from_slice(seg.score.flat());
        out.push(Marker::Eoa.id());
        out.push(Marker::End.id());
    }
    out.push(Marker::Eod.id());
    Ok(out)
}

/// Serializes a document, interning unseen text patches.
pub fn serialize(doc: &CosDocument, vocab: &mut Vocabulary) -> Result<Vec<TokenId>, CosError> {
    check_scores(doc, vocab)?;
    serialize_with(doc, &mut |u: &str| encode_unit(u, vocab))
}

/// Serializes against a fixed vocabulary; unseen text is an error.
pub fn serialize_frozen(doc: &CosDocument, vocab: &Vocabulary) -> Result<Vec<TokenId>, CosError> {
    check_scores(doc, vocab)?;
    serialize_with(doc, &mut |u: &str| encode_unit_frozen(u, vocab))
}

/// Tokens before the first segment: reference region, instruct, tags, lyrics.
pub fn encode_prelude(doc: &CosDocument, vocab: &mut Vocabulary) -> Result<Vec<TokenId>, CosError> {
    if let Some(r) = &doc.icl_ref {
        check_score(r, vocab)?;
    }
    prelude(doc, &mut |u: &str| encode_unit(u, vocab))
}

/// `[START] label lyric <SOA>` of one segment.
pub fn encode_segment_head(seg: &Segment, vocab: &mut Vocabulary) -> Result<Vec<TokenId>, CosError> {
    segment_head(seg, &mut |u: &str| encode_unit(u, vocab))
}

struct Cursor<'a> {
    t: &'a [TokenId],
    i: usize,
    vocab: &'a Vocabulary,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<TokenId> {
        self.t.get(self.i).copied()
    }

    fn is_content(&self, id: TokenId) -> bool {
        self.vocab.is_content(id)
    }

    /// Content patches up to and including the one holding the line's `\n`.
    fn text_line(&mut self) -> Result<String, CosError> {
        let mut bytes = Vec::new();
        loop {
            let Some(id) = self.peek() else {
                return Err(CosError::MissingEod);
            };
            let Some(p) = self.vocab.patch(id) else {
                return Err(CosError::UnexpectedToken {
                    pos: self.i,
                    id,
                    expected: "text",
                });
            };
            let pos = self.i;
            self.i += 1;
            match p.iter().position(|&c| c == b'\n') {
                Some(nl) => {
                    if p[nl + 1..].iter().any(|&c| c != PAD_CHAR) {
                        return Err(CosError::MalformedText(pos));
                    }
                    bytes.extend_from_slice(&p[..nl]);
                    return Ok(String::from_utf8(bytes).expect("patches are ASCII"));
                }
                None => bytes.extend_from_slice(p),
            }
        }
    }

    /// One or more text lines, joined with `\n`.
    fn text_block(&mut self) -> Result<String, CosError> {
        let mut s = self.text_line()?;
        while self.peek().is_some_and(|id| self.is_content(id)) {
            s.push('\n');
            s.push_str(&self.text_line()?);
        }
        Ok(s)
    }

    fn score_region(&mut self) -> Result<DualSequence, CosError> {
        let open = self.i;
        debug_assert_eq!(self.peek(), Some(Marker::Soa.id()));
        self.i += 1;
        let start = self.i;
        while let Some(id) = self.peek() {
            if id == PAD || self.is_content(id) {
                self.i += 1;
            } else {
                break;
            }
        }
        let body = &self.t[start..self.i];
        match self.peek() {
            Some(id) if id == Marker::Eoa.id() => {}
            Some(id) if Marker::from_id(id).is_none() && self.vocab.kind(id).is_some() => {
                return Err(CosError::UnexpectedToken {
                    pos: self.i,
                    id,
                    expected: "score token or <EOA>",
                })
            }
            Some(id) if self.vocab.kind(id).is_none() => return Err(CosError::UnknownId(id)),
            _ => return Err(CosError::UnclosedScore(open)),
        }
        self.i += 1;
        if !body.len().is_multiple_of(2) {
            return Err(CosError::OddScoreRegion {
                pos: start,
                len: body.len(),
            });
        }
        Ok(DualSequence::from_flat(body.to_vec())?)
    }

    fn expect_marker(&mut self, m: Marker, message: &str) -> Result<(), CosError> {
        match self.peek() {
            Some(id) if id == m.id() => {
                self.i += 1;
                Ok(())
            }
            None if m != Marker::Eod => Err(CosError::MissingEod),
            _ => Err(CosError::Unbalanced {
                pos: self.i,
                message: message.to_string(),
            }),
        }
    }
}

/// Parses a token stream back into a document.
pub fn parse(tokens: &[TokenId], vocab: &Vocabulary) -> Result<CosDocument, CosError> {
    if let Some(&bad) = tokens.iter().find(|&&id| vocab.kind(id).is_none()) {
        return Err(CosError::UnknownId(bad));
    }
    let mut c = Cursor {
        t: tokens,
        i: 0,
        vocab,
    };
    let icl_ref = if c.peek() == Some(Marker::Soa.id()) {
        Some(c.score_region()?)
    } else {
        None
    };
    let instruct = c.text_line()?;
    let tags = split_tags(&c.text_line()?);
    let lyrics = c.text_block()?;
    let mut segments = Vec::new();
    loop {
        match c.peek() {
            None => return Err(CosError::MissingEod),
            Some(id) if id == Marker::Eod.id() => {
                c.i += 1;
                break;
            }
            Some(id) if id == Marker::Start.id() => {
                c.i += 1;
                let label = SectionLabel::from_name(&c.text_line()?)?;
                let lyric = c.text_block()?;
                if c.peek() != Some(Marker::Soa.id()) {
                    return match c.peek() {
                        None => Err(CosError::MissingEod),
                        Some(_) => Err(CosError::Unbalanced {
                            pos: c.i,
                            message: "segment text not followed by <SOA>".into(),
                        }),
                    };
                }
                let score = c.score_region()?;
                c.expect_marker(Marker::End, "segment not closed by [END]")?;
                segments.push(Segment {
                    label,
                    lyric,
                    score,
                });
            }
            Some(id) => {
                return Err(CosError::Unbalanced {
                    pos: c.i,
                    message: format!("token {id} outside a segment"),
                })
            }
        }
    }
    if c.i < tokens.len() {
        return Err(CosError::TrailingTokens(c.i));
    }
    Ok(CosDocument {
        instruct,
        tags,
        lyrics,
        segments,
        icl_ref,
    })
}
