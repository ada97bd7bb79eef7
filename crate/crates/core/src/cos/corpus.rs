use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::render::{excerpt_seconds, segment_lyric, REFERENCE_MAX_SECS, REFERENCE_MIN_SECS};
use super::{serialize, CosDocument, CosError, SectionLabel, Segment};
use crate::abc::{parse_score, Rational, Score};
use crate::dual::split_tracks_range;
use crate::tokenizer::{TokenId, Vocabulary};

const MAGIC: &[u8; 4] = b"COS1";
const DELAYED_FLAG: u64 = 1 << 63;

pub const DEFAULT_INSTRUCT: &str = "Generate a song from the given lyrics and tags.";

/// One corpus entry: a serialized document and its delayed-activation flag
/// (set for documents that carry a reference excerpt).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusDoc {
    pub tokens: Vec<TokenId>,
    pub delayed_activation: bool,
}

/// Appends documents to a `COS1` stream: the magic, then per document a
/// little-endian u64 token count (bit 63 = delayed activation) followed by
/// the ids as little-endian u32.
pub struct CorpusWriter<W: Write> {
    w: W,
    docs: usize,
}

impl<W: Write> CorpusWriter<W> {
    pub fn new(mut w: W) -> std::io::Result<Self> {
        w.write_all(MAGIC)?;
        Ok(CorpusWriter { w, docs: 0 })
    }

    pub fn append(&mut self, doc: &CorpusDoc) -> std::io::Result<()> {
        let mut head = doc.tokens.len() as u64;
        if doc.delayed_activation {
            head |= DELAYED_FLAG;
        }
        let mut buf = Vec::with_capacity(8 + 4 * doc.tokens.len());
        buf.extend_from_slice(&head.to_le_bytes());
        for id in &doc.tokens {
            buf.extend_from_slice(&id.to_le_bytes());
        }
        self.w.write_all(&buf)?;
        self.docs += 1;
        Ok(())
    }

    pub fn documents(&self) -> usize {
        self.docs
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.w.flush()?;
        Ok(self.w)
    }
}

pub fn read_corpus(mut r: impl Read) -> Result<Vec<CorpusDoc>, CosError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut rest = bytes
        .strip_prefix(MAGIC.as_slice())
        .ok_or_else(|| CosError::CorpusFormat("missing COS1 magic".into()))?;
    let mut docs = Vec::new();
    while !rest.is_empty() {
        if rest.len() < 8 {
            return Err(CosError::CorpusFormat("truncated document header".into()));
        }
        let head = u64::from_le_bytes(rest[..8].try_into().unwrap());
        let n = (head & !DELAYED_FLAG) as usize;
        rest = &rest[8..];
        let need = n
            .checked_mul(4)
            .filter(|&b| b <= rest.len())
            .ok_or_else(|| CosError::CorpusFormat(format!("document {} truncated", docs.len())))?;
        let tokens = rest[..need]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        rest = &rest[need..];
        docs.push(CorpusDoc {
            tokens,
            delayed_activation: head & DELAYED_FLAG != 0,
        });
    }
    Ok(docs)
}

pub fn load_corpus_docs(path: &Path) -> Result<Vec<CorpusDoc>, CosError> {
    read_corpus(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// A labelled bar span, 1-based and inclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionSpan {
    pub label: SectionLabel,
    pub start: usize,
    pub end: usize,
}

/// Song metadata read from a `.sections` file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Sidecar {
    pub instruct: Option<String>,
    pub tags: Vec<String>,
    pub lyrics: Option<String>,
    /// Bars used as the in-context reference excerpt, 1-based inclusive.
    pub reference: Option<(usize, usize)>,
    pub sections: Vec<SectionSpan>,
}

/// Parses a sidecar:
///
/// ```text
/// instruct: <text>
/// tags: <tag>, <tag>
/// lyrics: <line>            (repeatable, one line each)
/// reference: <start> <end>  (optional)
/// <label>\t<start>\t<end>
/// ```
///
/// Blank lines and lines starting with `#` are ignored.
pub fn parse_sidecar(text: &str, file: &str) -> Result<Sidecar, CosError> {
    let mut sc = Sidecar::default();
    let mut lyrics: Vec<&str> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let err = |message: String| CosError::Sidecar {
            file: file.to_string(),
            line: n + 1,
            message,
        };
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(v) = line.strip_prefix("instruct:") {
            sc.instruct = Some(v.trim().to_string());
        } else if let Some(v) = line.strip_prefix("tags:") {
            sc.tags = v
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(str::to_string)
                .collect();
        } else if let Some(v) = line.strip_prefix("lyrics:") {
            lyrics.push(v.trim());
        } else if let Some(v) = line.strip_prefix("reference:") {
            let nums: Vec<usize> = v
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| err(format!("bad bar number '{x}'"))))
                .collect::<Result<_, _>>()?;
            match nums[..] {
                [s, e] if s >= 1 && s <= e => sc.reference = Some((s, e)),
                _ => return Err(err("reference needs <start> <end> bars".into())),
            }
        } else {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(err("expected label<TAB>start<TAB>end".into()));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| err(format!("bad bar number '{s}'")))
            };
            let label = SectionLabel::from_name(f[0].trim()).map_err(|e| err(e.to_string()))?;
            sc.sections.push(SectionSpan {
                label,
                start: num(f[1])?,
                end: num(f[2])?,
            });
        }
    }
    if !lyrics.is_empty() {
        sc.lyrics = Some(lyrics.join("\n"));
    }
    Ok(sc)
}

/// Builds the document of one song. Without a sidecar the whole song is a
/// single segment labelled `full`. Returns warnings for soft problems.
pub fn song_document(
    score: &Score,
    sidecar: Option<&Sidecar>,
    file: &str,
    vocab: &mut Vocabulary,
) -> Result<(CosDocument, Vec<String>), CosError> {
    let mut warnings = Vec::new();
    let vocal = score.vocal_voice_index();
    let bars = score.voices.get(vocal).map_or(0, |v| v.bars.len());
    let default = Sidecar::default();
    let sc = sidecar.unwrap_or(&default);
    let spans = if sc.sections.is_empty() {
        if bars == 0 {
            Vec::new()
        } else {
            vec![SectionSpan {
                label: SectionLabel::Other("full".into()),
                start: 1,
                end: bars,
            }]
        }
    } else {
        sc.sections.clone()
    };
    let check = |label: &str, start: usize, end: usize| {
        if start == 0 || start > end || end > bars {
            Err(CosError::SpanOutOfRange {
                file: file.to_string(),
                label: label.to_string(),
                start,
                end,
                bars,
            })
        } else {
            Ok(())
        }
    };
    let mut segments = Vec::new();
    for s in &spans {
        check(s.label.name(), s.start, s.end)?;
        let range = s.start - 1..s.end;
        let tracks = split_tracks_range(score, range.clone(), vocab)?;
        segments.push(Segment {
            label: s.label.clone(),
            lyric: segment_lyric(score, tracks.vocal_voice, range),
            score: tracks.interleave(),
        });
    }
    let icl_ref = match sc.reference {
        Some((start, end)) => {
            check("reference", start, end)?;
            let range = start - 1..end;
            let secs = excerpt_seconds(score, range.clone());
            let (lo, hi) = (
                Rational::from_integer(REFERENCE_MIN_SECS),
                Rational::from_integer(REFERENCE_MAX_SECS),
            );
            if secs < lo || secs > hi {
                warnings.push(format!(
                    "{file}: reference excerpt lasts {:.1} s, outside {REFERENCE_MIN_SECS}-{REFERENCE_MAX_SECS} s",
                    *secs.numer() as f64 / *secs.denom() as f64
                ));
            }
            Some(split_tracks_range(score, range, vocab)?.interleave())
        }
        None => None,
    };
    let lyrics = match &sc.lyrics {
        Some(l) => l.clone(),
        None => segments
            .iter()
            .map(|s| s.lyric.as_str())
            .filter(|l| !l.is_empty())
            .collect::<Vec<_>>()
            .join("\n"),
    };
    let doc = CosDocument {
        instruct: sc.instruct.clone().unwrap_or_else(|| DEFAULT_INSTRUCT.to_string()),
        tags: sc.tags.clone(),
        lyrics,
        segments,
        icl_ref,
    };
    Ok((doc, warnings))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusStats {
    pub documents: usize,
    pub tokens: usize,
    pub segments: usize,
    /// Files skipped and other soft problems, one line each.
    pub warnings: Vec<String>,
}

impl CorpusStats {
    pub fn mean_segments(&self) -> f64 {
        if self.documents == 0 {
            0.0
        } else {
            self.segments as f64 / self.documents as f64
        }
    }
}

fn abc_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "abc") && p.is_file())
        .collect();
    files.sort();
    Ok(files)
}

type Loaded = (String, Score, Option<Sidecar>);

/// Serializes every `.abc` file of `abc_dir` (sorted by name) into a `COS1`
/// corpus at `out`. Sidecars are `<stem>.sections` in `sidecar_dir`
/// (default: `abc_dir`). Files that cannot be read or parsed are skipped
/// with a warning; a section span outside the song is an error.
pub fn build_corpus(
    abc_dir: &Path,
    sidecar_dir: Option<&Path>,
    out: &Path,
    vocab: &mut Vocabulary,
) -> Result<CorpusStats, CosError> {
    let files = abc_files(abc_dir)?;
    let side_dir = sidecar_dir.unwrap_or(abc_dir);
    let loaded: Vec<Result<Loaded, String>> = files
        .par_iter()
        .map(|path| {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            let text = std::fs::read_to_string(path).map_err(|e| format!("{name}: skipped: {e}"))?;
            let score = parse_score(&text)
                .map_err(|e| format!("{name}: skipped: {e}"))?
                .score;
            let side_path = side_dir.join(path.with_extension("sections").file_name().unwrap());
            let sidecar = match std::fs::read_to_string(&side_path) {
                Ok(s) => Some(parse_sidecar(&s, &side_path.display().to_string()).map_err(|e| format!("{name}: skipped: {e}"))?),
                Err(_) => None,
            };
            Ok((name, score, sidecar))
        })
        .collect();

    let mut stats = CorpusStats::default();
    let file = std::io::BufWriter::new(std::fs::File::create(out)?);
    let mut writer = CorpusWriter::new(file)?;
    for item in loaded {
        let (name, score, sidecar) = match item {
            Ok(x) => x,
            Err(w) => {
                stats.warnings.push(w);
                continue;
            }
        };
        let mut trial = vocab.clone();
        let built = song_document(&score, sidecar.as_ref(), &name, &mut trial)
            .and_then(|(doc, w)| Ok((serialize(&doc, &mut trial)?, doc, w)));
        let (tokens, doc, warnings) = match built {
            Ok(x) => x,
            Err(e @ CosError::SpanOutOfRange { .. }) => return Err(e),
            Err(e) => {
                stats.warnings.push(format!("{name}: skipped: {e}"));
                continue;
            }
        };
        *vocab = trial;
        stats.warnings.extend(warnings);
        stats.documents += 1;
        stats.tokens += tokens.len();
        stats.segments += doc.segments.len();
        writer.append(&CorpusDoc {
            tokens,
            delayed_activation: doc.icl_ref.is_some(),
        })?;
    }
    writer.finish()?;
    Ok(stats)
}
