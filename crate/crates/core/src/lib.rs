//! Bar-level symbolic song pipeline: ABC lead sheets, 16-character bar-stream
//! patches, dual vocal/accompaniment streams, Chain-of-Score documents,
//! constrained decoding and Standard MIDI File output.

pub mod abc;
pub mod cos;
pub mod decode;
pub mod dual;
pub mod midi;
pub mod tokenizer;

pub use abc::{estimate_duration, parse_score, print_score, vocal_range, Rational, Score};
pub use cos::{CosDocument, SectionLabel, Segment};
pub use decode::{generate, NGramModel, NextPairModel, SamplingParams};
pub use dual::{DualSequence, TokenStream};
pub use midi::{score_to_midi, write_smf, MidiDocument};
pub use tokenizer::{Marker, PatchSequence, TokenId, Vocabulary};
