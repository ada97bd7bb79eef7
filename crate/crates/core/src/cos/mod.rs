//! Chain-of-Score documents: instruction, tags and lyrics followed by
//! framed song segments, each carrying a dual-stream score region.
//!
//! Token layout:
//!
//! ```text
//! (<SOA> ref <EOA>)? Instruct Tag Lyrics ([START] label lyric <SOA> score <EOA> [END])* <EOD>
//! ```
//!
//! Text fields are patch-encoded line by line; every line is a unit ending
//! in `\n`, so field boundaries are recoverable from the patches alone.

mod corpus;
mod prompt;
mod render;
mod serialize;

use std::fmt;

use thiserror::Error;

use crate::dual::{DualError, DualSequence};
use crate::tokenizer::{TokenId, TokenizerError};

pub use crate::tokenizer::Marker;
pub use corpus::{
    build_corpus, load_corpus_docs, parse_sidecar, read_corpus, song_document, CorpusDoc,
    CorpusStats, CorpusWriter, SectionSpan, Sidecar, DEFAULT_INSTRUCT,
};
pub use prompt::{parse_prompt, Prompt};
pub use render::{
    reference_excerpt, render_abc, segment_lyric, REFERENCE_MAX_SECS,
    REFERENCE_MIN_SECS, REFERENCE_TARGET_SECS,
};
pub use serialize::{
    encode_prelude, encode_segment_head, parse, serialize, serialize_frozen, TAG_SEPARATOR,
};

#[derive(Debug, Error)]
pub enum CosError {
    #[error("unclosed score region at token {0}")]
    UnclosedScore(usize),
    #[error("trailing tokens after end of document at token {0}")]
    TrailingTokens(usize),
    #[error("unbalanced frame at token {pos}: {message}")]
    Unbalanced { pos: usize, message: String },
    #[error("score region of odd length {len} at token {pos}")]
    OddScoreRegion { pos: usize, len: usize },
    #[error("missing end-of-document marker")]
    MissingEod,
    #[error("unexpected token {id} at {pos}, expected {expected}")]
    UnexpectedToken {
        pos: usize,
        id: TokenId,
        expected: &'static str,
    },
    #[error("malformed text patch at token {0}")]
    MalformedText(usize),
    #[error("vocabulary mismatch: token {0} is not a score token of this vocabulary")]
    VocabularyMismatch(TokenId),
    #[error("unknown token id {0}")]
    UnknownId(TokenId),
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("{file}: section '{label}' spans bars {start}..={end} but the song has {bars} bars")]
    SpanOutOfRange {
        file: String,
        label: String,
        start: usize,
        end: usize,
        bars: usize,
    },
    #[error("{file}:{line}: {message}")]
    Sidecar {
        file: String,
        line: usize,
        message: String,
    },
    #[error("corpus format: {0}")]
    CorpusFormat(String),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error(transparent)]
    Dual(#[from] DualError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Song section label.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SectionLabel {
    Intro,
    Verse,
    Chorus,
    Bridge,
    Outro,
    /// Any other non-empty name that is not one of the above.
    Other(String),
}

impl SectionLabel {
    const KNOWN: [(&'static str, SectionLabel); 5] = [
        ("intro", SectionLabel::Intro),
        ("verse", SectionLabel::Verse),
        ("chorus", SectionLabel::Chorus),
        ("bridge", SectionLabel::Bridge),
        ("outro", SectionLabel::Outro),
    ];

    /// Known names match case-insensitively; anything else becomes `Other`.
    pub fn from_name(name: &str) -> Result<SectionLabel, CosError> {
        if name.is_empty() || name.contains('\n') {
            return Err(CosError::InvalidField(format!("bad section label {name:?}")));
        }
        let lower = name.to_ascii_lowercase();
        Ok(Self::KNOWN
            .iter()
            .find(|(k, _)| *k == lower)
            .map(|(_, l)| l.clone())
            .unwrap_or_else(|| SectionLabel::Other(name.to_string())))
    }

    pub fn name(&self) -> &str {
        match self {
            SectionLabel::Intro => "intro",
            SectionLabel::Verse => "verse",
            SectionLabel::Chorus => "chorus",
            SectionLabel::Bridge => "bridge",
            SectionLabel::Outro => "outro",
            SectionLabel::Other(s) => s,
        }
    }

    fn validate(&self) -> Result<(), CosError> {
        if let SectionLabel::Other(s) = self {
            if SectionLabel::from_name(s)? != *self {
                return Err(CosError::InvalidField(format!(
                    "label '{s}' must use the named variant"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for SectionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One framed section of a song.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub label: SectionLabel,
    pub lyric: String,
    pub score: DualSequence,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CosDocument {
    pub instruct: String,
    pub tags: Vec<String>,
    /// Full lyrics as given, before segmentation.
    pub lyrics: String,
    pub segments: Vec<Segment>,
    /// Reference excerpt for in-context prompting.
    pub icl_ref: Option<DualSequence>,
}

impl CosDocument {
    /// The same document with tags and lyrics removed, used as the
    /// unconditional branch of guidance.
    pub fn unconditional(&self) -> CosDocument {
        CosDocument {
            tags: Vec::new(),
            lyrics: String::new(),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        assert_eq!(SectionLabel::from_name("Chorus").unwrap(), SectionLabel::Chorus);
        assert_eq!(SectionLabel::from_name("VERSE").unwrap().name(), "verse");
        assert_eq!(
            SectionLabel::from_name("pre-chorus").unwrap(),
            SectionLabel::Other("pre-chorus".into())
        );
        assert!(SectionLabel::from_name("").is_err());
        assert!(SectionLabel::Other("Intro".into()).validate().is_err());
        assert!(SectionLabel::Other("solo".into()).validate().is_ok());
    }
}
