use super::segment::{segment_units, Unit, UnitTag};
use super::vocab::{PatchText, TokenId, Vocabulary, BOS, EOS};
use super::{TokenizerError, PAD_CHAR, PATCH_WIDTH};

/// Where a patch came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Origin {
    /// Canonical line of the unit (1-based).
    pub line: usize,
    pub tag: UnitTag,
    /// Index of this patch within its unit.
    pub chunk: usize,
    /// True for the last (possibly padded) patch of the unit.
    pub last_in_unit: bool,
}

/// Token ids plus, for encoded scores, one origin per id (`None` for the
/// sequence specials). Generated sequences carry no origins.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PatchSequence {
    pub ids: Vec<TokenId>,
    pub origins: Option<Vec<Option<Origin>>>,
}

impl PatchSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Number of patches for a unit of `len` characters.
pub fn patch_count(len: usize) -> usize {
    len.div_ceil(PATCH_WIDTH)
}

/// Slices a unit into 16-character patches, padding the last with spaces.
pub fn patches_of(unit: &str) -> Result<Vec<PatchText>, TokenizerError> {
    if let Some(offset) = unit.bytes().position(|b| !b.is_ascii()) {
        return Err(TokenizerError::NonAscii {
            unit: unit.to_string(),
            offset,
        });
    }
    Ok(unit
        .as_bytes()
        .chunks(PATCH_WIDTH)
        .map(|c| {
            let mut p = [PAD_CHAR; PATCH_WIDTH];
            p[..c.len()].copy_from_slice(c);
            p
        })
        .collect())
}

fn oov(p: &PatchText) -> TokenizerError {
    TokenizerError::OutOfVocabulary(String::from_utf8_lossy(p).into_owned())
}

/// Encodes one unit, interning unseen patches.
pub fn encode_unit(unit: &str, vocab: &mut Vocabulary) -> Result<Vec<TokenId>, TokenizerError> {
    Ok(patches_of(unit)?.iter().map(|p| vocab.intern(p)).collect())
}

/// Encodes one unit against a fixed vocabulary; unseen patches are errors.
pub fn encode_unit_frozen(unit: &str, vocab: &Vocabulary) -> Result<Vec<TokenId>, TokenizerError> {
    patches_of(unit)?
        .iter()
        .map(|p| vocab.get(p).ok_or_else(|| oov(p)))
        .collect()
}

fn encode_with(
    units: &[Unit],
    mut lookup: impl FnMut(&PatchText) -> Result<TokenId, TokenizerError>,
) -> Result<PatchSequence, TokenizerError> {
    let mut ids = vec![BOS];
    let mut origins = vec![None];
    for u in units {
        let patches = patches_of(&u.text)?;
        let n = patches.len();
        for (chunk, p) in patches.iter().enumerate() {
            ids.push(lookup(p)?);
            origins.push(Some(Origin {
                line: u.line,
                tag: u.tag.clone(),
                chunk,
                last_in_unit: chunk + 1 == n,
            }));
        }
    }
    ids.push(EOS);
    origins.push(None);
    Ok(PatchSequence {
        ids,
        origins: Some(origins),
    })
}

/// `BOS`, the patches of every unit in order, `EOS`.
pub fn encode_units(units: &[Unit], vocab: &mut Vocabulary) -> Result<PatchSequence, TokenizerError> {
    encode_with(units, |p| Ok(vocab.intern(p)))
}

pub fn encode_units_frozen(units: &[Unit], vocab: &Vocabulary) -> Result<PatchSequence, TokenizerError> {
    encode_with(units, |p| vocab.get(p).ok_or_else(|| oov(p)))
}

/// Parses, segments and encodes an ABC text.
pub fn encode_score(text: &str, vocab: &mut Vocabulary) -> Result<PatchSequence, TokenizerError> {
    encode_units(&segment_units(text)?, vocab)
}

pub fn encode_score_frozen(text: &str, vocab: &Vocabulary) -> Result<PatchSequence, TokenizerError> {
    encode_units_frozen(&segment_units(text)?, vocab)
}

fn trim_pad(p: &[u8]) -> &[u8] {
    let end = p.iter().rposition(|&c| c != PAD_CHAR).map_or(0, |i| i + 1);
    &p[..end]
}

/// Turns a sequence back into text. Specials and markers are dropped.
///
/// With origin records, padding is removed from the last patch of each unit
/// and line breaks are restored wherever the origin line changes. Without
/// them, trailing spaces are removed from every patch and line breaks come
/// from the patch contents.
pub fn decode(seq: &PatchSequence, vocab: &Vocabulary) -> Result<String, TokenizerError> {
    let Some(origins) = &seq.origins else {
        return decode_patches(&seq.ids, vocab);
    };
    let mut out: Vec<u8> = Vec::new();
    let mut line = None;
    for (i, &id) in seq.ids.iter().enumerate() {
        if vocab.kind(id).is_none() {
            return Err(TokenizerError::UnknownId(id));
        }
        let Some(p) = vocab.patch(id) else { continue };
        let origin = origins.get(i).and_then(Option::as_ref);
        if let Some(o) = origin {
            if line.is_some_and(|l| l != o.line) && out.last() != Some(&b'\n') {
                out.push(b'\n');
            }
            line = Some(o.line);
        }
        match origin {
            Some(o) if !o.last_in_unit => out.extend_from_slice(p),
            _ => out.extend_from_slice(trim_pad(p)),
        }
    }
    if !out.is_empty() && out.last() != Some(&b'\n') {
        out.push(b'\n');
    }
    Ok(String::from_utf8(out).expect("patches are ASCII"))
}

/// Origin-free decoding: un-pad every content patch and concatenate.
pub fn decode_patches(ids: &[TokenId], vocab: &Vocabulary) -> Result<String, TokenizerError> {
    let mut out = Vec::new();
    for &id in ids {
        if vocab.kind(id).is_none() {
            return Err(TokenizerError::UnknownId(id));
        }
        if let Some(p) = vocab.patch(id) {
            out.extend_from_slice(trim_pad(p));
        }
    }
    Ok(String::from_utf8(out).expect("patches are ASCII"))
}
