use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{TokenizerError, PATCH_WIDTH};

pub type TokenId = u32;
/// The 16 bytes of one patch, padding included.
pub type PatchText = [u8; PATCH_WIDTH];

pub const PAD: TokenId = 0;
pub const BOS: TokenId = 1;
pub const EOS: TokenId = 2;
/// First id available to content patches.
pub const FIRST_CONTENT: TokenId = 8;

const SPECIAL_NAMES: [&str; 3] = ["<pad>", "<bos>", "<eos>"];

/// Document framing markers. Each owns a reserved id above the specials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Marker {
    Start,
    End,
    Soa,
    Eoa,
    Eod,
}

impl Marker {
    pub const ALL: [Marker; 5] = [Marker::Start, Marker::End, Marker::Soa, Marker::Eoa, Marker::Eod];

    pub const fn id(self) -> TokenId {
        match self {
            Marker::Start => 3,
            Marker::End => 4,
            Marker::Soa => 5,
            Marker::Eoa => 6,
            Marker::Eod => 7,
        }
    }

    pub fn from_id(id: TokenId) -> Option<Marker> {
        Marker::ALL.into_iter().find(|m| m.id() == id)
    }

    pub fn name(self) -> &'static str {
        match self {
            Marker::Start => "[START]",
            Marker::End => "[END]",
            Marker::Soa => "<SOA>",
            Marker::Eoa => "<EOA>",
            Marker::Eod => "<EOD>",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntryKind {
    Special,
    Marker,
    Content,
}

impl EntryKind {
    fn as_str(self) -> &'static str {
        match self {
            EntryKind::Special => "special",
            EntryKind::Marker => "marker",
            EntryKind::Content => "content",
        }
    }
}

/// Bidirectional patch/id table. Ids are dense; `0..8` are reserved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    content: Vec<PatchText>,
    index: HashMap<PatchText, TokenId>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        Vocabulary {
            content: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Total number of ids, reserved ones included.
    pub fn len(&self) -> usize {
        FIRST_CONTENT as usize + self.content.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn content_len(&self) -> usize {
        self.content.len()
    }

    pub fn kind(&self, id: TokenId) -> Option<EntryKind> {
        match id {
            0..=2 => Some(EntryKind::Special),
            3..=7 => Some(EntryKind::Marker),
            _ if (id as usize) < self.len() => Some(EntryKind::Content),
            _ => None,
        }
    }

    pub fn is_content(&self, id: TokenId) -> bool {
        self.kind(id) == Some(EntryKind::Content)
    }

    pub fn get(&self, patch: &PatchText) -> Option<TokenId> {
        self.index.get(patch).copied()
    }

    /// Returns the id of `patch`, assigning the next free id on first sight.
    pub fn intern(&mut self, patch: &PatchText) -> TokenId {
        if let Some(id) = self.index.get(patch) {
            return *id;
        }
        let id = self.len() as TokenId;
        self.content.push(*patch);
        self.index.insert(*patch, id);
        id
    }

    pub fn patch(&self, id: TokenId) -> Option<&PatchText> {
        id.checked_sub(FIRST_CONTENT)
            .and_then(|i| self.content.get(i as usize))
    }

    /// Content ids in ascending order.
    pub fn content_ids(&self) -> impl Iterator<Item = TokenId> {
        FIRST_CONTENT..self.len() as TokenId
    }

    /// Human-readable form of any id.
    pub fn display(&self, id: TokenId) -> Option<String> {
        match self.kind(id)? {
            EntryKind::Special => Some(SPECIAL_NAMES[id as usize].to_string()),
            EntryKind::Marker => Marker::from_id(id).map(|m| m.name().to_string()),
            EntryKind::Content => self.patch(id).map(escape_patch),
        }
    }

    /// Hash of the first `n` entries, so a model fitted on a vocabulary can
    /// check any extension of it.
    pub fn fingerprint_prefix(&self, n: usize) -> u64 {
        let mut h = Sha256::new();
        h.update(b"songbar-vocab");
        for p in self.content.iter().take(n.saturating_sub(FIRST_CONTENT as usize)) {
            h.update(p);
        }
        h.update((n as u64).to_le_bytes());
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().unwrap())
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint_prefix(self.len())
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        for id in 0..self.len() as TokenId {
            let kind = self.kind(id).unwrap();
            writeln!(w, "{id}\t{}\t{}", kind.as_str(), self.display(id).unwrap())?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Vocabulary, TokenizerError> {
        let mut vocab = Vocabulary::new();
        let mut expected: TokenId = 0;
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let err = |message: String| TokenizerError::VocabFormat {
                line: n + 1,
                message,
            };
            let mut parts = line.splitn(3, '\t');
            let (Some(id), Some(kind), Some(text)) = (parts.next(), parts.next(), parts.next())
            else {
                return Err(err("expected id<TAB>kind<TAB>text".into()));
            };
            let id: TokenId = id.parse().map_err(|_| err(format!("bad id '{id}'")))?;
            if id != expected {
                return Err(err(format!("id {id} out of order, expected {expected}")));
            }
            if id < FIRST_CONTENT {
                let want = vocab.kind(id).unwrap();
                if kind != want.as_str() || Some(text.to_string()) != vocab.display(id) {
                    return Err(err(format!("reserved id {id} does not match")));
                }
            } else {
                if kind != "content" {
                    return Err(err(format!("id {id} must be content, found '{kind}'")));
                }
                let patch = unescape_patch(text).map_err(err)?;
                if vocab.get(&patch).is_some() {
                    return Err(err(format!("duplicate patch '{text}'")));
                }
                vocab.intern(&patch);
            }
            expected += 1;
        }
        if expected < FIRST_CONTENT {
            return Err(TokenizerError::VocabFormat {
                line: expected as usize + 1,
                message: "missing reserved entries".into(),
            });
        }
        Ok(vocab)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()
    }

    pub fn load(path: &Path) -> Result<Vocabulary, TokenizerError> {
        let f = std::fs::File::open(path)?;
        Vocabulary::read_from(std::io::BufReader::new(f))
    }
}

/// Escapes a patch for the vocabulary file. Trailing spaces become `\sN`.
pub(crate) fn escape_patch(p: &PatchText) -> String {
    let body_len = p.iter().rposition(|&c| c != b' ').map_or(0, |i| i + 1);
    let mut out = String::new();
    for &c in &p[..body_len] {
        match c {
            b'\\' => out.push_str("\\\\"),
            b'\t' => out.push_str("\\t"),
            b'\n' => out.push_str("\\n"),
            0x20..=0x7e => out.push(c as char),
            _ => {
                let _ = write!(out, "\\x{c:02X}");
            }
        }
    }
    let trailing = PATCH_WIDTH - body_len;
    if trailing > 0 {
        let _ = write!(out, "\\s{trailing}");
    }
    out
}

pub(crate) fn unescape_patch(s: &str) -> Result<PatchText, String> {
    let bad = || format!("malformed patch text '{s}'");
    let b = s.as_bytes();
    let mut out = Vec::with_capacity(PATCH_WIDTH);
    let mut i = 0;
    while i < b.len() {
        if b[i] != b'\\' {
            out.push(b[i]);
            i += 1;
            continue;
        }
        match b.get(i + 1) {
            Some(b'\\') => out.push(b'\\'),
            Some(b't') => out.push(b'\t'),
            Some(b'n') => out.push(b'\n'),
            Some(b'x') => {
                let hex = s.get(i + 2..i + 4).ok_or_else(bad)?;
                out.push(u8::from_str_radix(hex, 16).map_err(|_| bad())?);
                i += 2;
            }
            Some(b's') => {
                let n: usize = s[i + 2..].parse().map_err(|_| bad())?;
                out.extend(std::iter::repeat_n(b' ', n));
                i = b.len();
                continue;
            }
            _ => return Err(bad()),
        }
        i += 2;
    }
    if out.len() != PATCH_WIDTH || !out.is_ascii() {
        return Err(format!("patch '{s}' is not 16 ASCII characters"));
    }
    Ok(out.try_into().unwrap())
}
