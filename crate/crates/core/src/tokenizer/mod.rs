//! Bar-stream patching: a score is cut into units (header lines, bars,
//! lyric lines) and every unit into fixed-width 16-character patches.
//! Patches are interned into a [`Vocabulary`] whose first ids are reserved
//! for the padding/sequence specials and the document markers.

mod codec;
pub mod dump;
mod segment;
mod vocab;

use thiserror::Error;

pub use codec::{
    decode, decode_patches, encode_score, encode_score_frozen, encode_unit, encode_unit_frozen,
    encode_units, encode_units_frozen, patch_count, patches_of, Origin, PatchSequence,
};
pub use segment::{segment_raw, segment_units, Unit, UnitTag};
pub use vocab::{
    EntryKind, Marker, PatchText, TokenId, Vocabulary, BOS, EOS, FIRST_CONTENT, PAD,
};

/// Characters per patch.
pub const PATCH_WIDTH: usize = 16;
/// Right padding of the last patch of a unit.
pub const PAD_CHAR: u8 = b' ';

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("non-ASCII character at byte {offset} of unit {unit:?}")]
    NonAscii { unit: String, offset: usize },
    #[error("out-of-vocabulary patch {0:?}")]
    OutOfVocabulary(String),
    #[error("unknown token id {0}")]
    UnknownId(TokenId),
    #[error("vocabulary file line {line}: {message}")]
    VocabFormat { line: usize, message: String },
    #[error("token dump line {line}: {message}")]
    DumpFormat { line: usize, message: String },
    #[error(transparent)]
    Parse(#[from] crate::abc::ParseError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
