use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{DecodeError, NextPairModel};
use crate::tokenizer::{TokenId, Vocabulary};

const MAGIC: &str = "NGRM1";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
struct Dist {
    total: u64,
    /// Successor counts sorted by id.
    next: Vec<(TokenId, u64)>,
}

impl Dist {
    fn count(&self, tok: TokenId) -> u64 {
        self.next
            .binary_search_by_key(&tok, |&(t, _)| t)
            .map_or(0, |i| self.next[i].1)
    }
}

/// Count-based token model. Each prediction uses the maximum-likelihood
/// successor distribution of the longest context suffix (at most
/// `order - 1` tokens) seen in training, down to the unigram table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramModel {
    order: usize,
    vocab_size: usize,
    vocab_fingerprint: u64,
    /// `tables[k]` maps contexts of length `k` to successor counts.
    tables: Vec<HashMap<Vec<TokenId>, Dist>>,
}

impl NGramModel {
    /// Counts every window inside each document; windows never cross
    /// document boundaries.
    pub fn fit<'a>(
        docs: impl IntoIterator<Item = &'a [TokenId]>,
        order: usize,
        vocab: &Vocabulary,
    ) -> Result<NGramModel, DecodeError> {
        if order < 1 {
            return Err(DecodeError::InvalidOrder(order));
        }
        let mut raw: Vec<HashMap<Vec<TokenId>, BTreeMap<TokenId, u64>>> = vec![HashMap::new(); order];
        let mut any = false;
        for doc in docs {
            for (i, &tok) in doc.iter().enumerate() {
                if tok as usize >= vocab.len() {
                    return Err(DecodeError::VocabularyMismatch(format!(
                        "corpus token {tok} outside vocabulary of {}",
                        vocab.len()
                    )));
                }
                any = true;
                for (k, table) in raw.iter_mut().enumerate().take(i.min(order - 1) + 1) {
                    *table
                        .entry(doc[i - k..i].to_vec())
                        .or_default()
                        .entry(tok)
                        .or_default() += 1;
                }
            }
        }
        if !any {
            return Err(DecodeError::EmptyCorpus);
        }
        let tables = raw
            .into_iter()
            .map(|t| {
                t.into_iter()
                    .map(|(ctx, next)| {
                        let total = next.values().sum();
                        (ctx, Dist { total, next: next.into_iter().collect() })
                    })
                    .collect()
            })
            .collect();
        Ok(NGramModel {
            order,
            vocab_size: vocab.len(),
            vocab_fingerprint: vocab.fingerprint(),
            tables,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn dist(&self, context: &[TokenId]) -> &Dist {
        let max = (self.order - 1).min(context.len());
        for k in (0..=max).rev() {
            if let Some(d) = self.tables[k].get(&context[context.len() - k..]) {
                return d;
            }
        }
        unreachable!("unigram table always has the empty context")
    }

    /// Exact probability of `tok` after `context` as `(numerator, denominator)`.
    pub fn prob_exact(&self, context: &[TokenId], tok: TokenId) -> (u64, u64) {
        let d = self.dist(context);
        (d.count(tok), d.total)
    }

    pub fn prob(&self, context: &[TokenId], tok: TokenId) -> f64 {
        let (n, d) = self.prob_exact(context, tok);
        n as f64 / d as f64
    }

    /// Number of stored contexts over all orders.
    pub fn contexts(&self) -> usize {
        self.tables.iter().map(HashMap::len).sum()
    }

    /// Text format: `NGRM1 order vocab_size fingerprint`, then one row per
    /// context, `ctx ids (comma separated, '-' if empty) \t id:count ...`,
    /// sorted by context length then ids.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{MAGIC} {} {} {:016x}", self.order, self.vocab_size, self.vocab_fingerprint)?;
        for table in &self.tables {
            let mut rows: Vec<_> = table.iter().collect();
            rows.sort_by(|a, b| a.0.cmp(b.0));
            for (ctx, d) in rows {
                let ctx = if ctx.is_empty() {
                    "-".to_string()
                } else {
                    ctx.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",")
                };
                let next: Vec<String> = d.next.iter().map(|(t, c)| format!("{t}:{c}")).collect();
                writeln!(w, "{ctx}\t{}", next.join(" "))?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: impl Read) -> Result<NGramModel, DecodeError> {
        let mut lines = BufReader::new(r).lines();
        let fmt = |line: usize, m: &str| DecodeError::Format { line, message: m.to_string() };
        let head = lines.next().ok_or_else(|| fmt(1, "empty model file"))??;
        let parts: Vec<&str> = head.split_whitespace().collect();
        let [magic, order, vocab_size, fp] = parts[..] else {
            return Err(fmt(1, "bad header"));
        };
        if magic != MAGIC {
            return Err(fmt(1, "not an n-gram model file"));
        }
        let order: usize = order.parse().map_err(|_| fmt(1, "bad order"))?;
        if order < 1 {
            return Err(DecodeError::InvalidOrder(order));
        }
        let vocab_size = vocab_size.parse().map_err(|_| fmt(1, "bad vocabulary size"))?;
        let vocab_fingerprint = u64::from_str_radix(fp, 16).map_err(|_| fmt(1, "bad fingerprint"))?;
        let mut tables = vec![HashMap::new(); order];
        for (i, line) in lines.enumerate() {
            let n = i + 2;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (ctx, next) = line.split_once('\t').ok_or_else(|| fmt(n, "missing tab"))?;
            let ctx: Vec<TokenId> = if ctx == "-" {
                Vec::new()
            } else {
                ctx.split(',')
                    .map(|t| t.parse().map_err(|_| fmt(n, "bad context id")))
                    .collect::<Result<_, _>>()?
            };
            let next: Vec<(TokenId, u64)> = next
                .split_whitespace()
                .map(|e| {
                    let (t, c) = e.split_once(':').ok_or_else(|| fmt(n, "bad successor"))?;
                    Ok((
                        t.parse().map_err(|_| fmt(n, "bad successor id"))?,
                        c.parse().map_err(|_| fmt(n, "bad count"))?,
                    ))
                })
                .collect::<Result<_, DecodeError>>()?;
            if next.is_empty() || next.windows(2).any(|w| w[0].0 >= w[1].0) || next.iter().any(|e| e.1 == 0) {
                return Err(fmt(n, "successors must be non-empty, sorted and positive"));
            }
            if next.iter().any(|e| e.0 as usize >= vocab_size) {
                return Err(fmt(n, "successor outside vocabulary"));
            }
            let table: &mut HashMap<_, _> = tables.get_mut(ctx.len()).ok_or_else(|| fmt(n, "context longer than order"))?;
            let total = next.iter().map(|e| e.1).sum();
            if table.insert(ctx, Dist { total, next }).is_some() {
                return Err(fmt(n, "duplicate context"));
            }
        }
        if !tables[0].contains_key(&Vec::new()) {
            return Err(fmt(1, "missing unigram row"));
        }
        Ok(NGramModel { order, vocab_size, vocab_fingerprint, tables })
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()
    }

    pub fn load(path: &Path) -> Result<NGramModel, DecodeError> {
        NGramModel::read_from(std::fs::File::open(path)?)
    }

    /// Digest of the model contents.
    pub fn fingerprint(&self) -> u64 {
        use sha2::{Digest, Sha256};
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        let h = Sha256::digest(&buf);
        u64::from_le_bytes(h[..8].try_into().unwrap())
    }
}

impl NextPairModel for NGramModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn vocab_fingerprint(&self) -> Option<u64> {
        Some(self.vocab_fingerprint)
    }

    fn logits(&self, context: &[TokenId]) -> Result<Vec<f64>, DecodeError> {
        let d = self.dist(context);
        let mut out = vec![f64::NEG_INFINITY; self.vocab_size];
        let z = d.total as f64;
        for &(t, c) in &d.next {
            out[t as usize] = (c as f64 / z).ln();
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab_with(n: usize) -> Vocabulary {
        let mut v = Vocabulary::new();
        for i in 0..n {
            let mut p = [b' '; 16];
            p[0] = b'a' + i as u8;
            v.intern(&p);
        }
        v
    }

    #[test]
    fn repeated_pair_is_certain() {
        let v = vocab_with(2);
        let doc: Vec<TokenId> = [8, 9].repeat(5);
        let m = NGramModel::fit([doc.as_slice()], 2, &v).unwrap();
        assert_eq!(m.prob_exact(&[8], 9), (5, 5));
        assert_eq!(m.prob(&[9], 8), 1.0);
        // Unseen context backs off to unigram counts.
        assert_eq!(m.prob_exact(&[3], 8), (5, 10));
    }

    #[test]
    fn backoff_chooses_longest_seen() {
        let v = vocab_with(3);
        let doc: Vec<TokenId> = vec![8, 9, 10, 9, 8, 9, 9];
        let m = NGramModel::fit([doc.as_slice()], 3, &v).unwrap();
        assert_eq!(m.prob_exact(&[8, 9], 10), (1, 2));
        assert_eq!(m.prob_exact(&[10, 9], 8), (1, 1));
        // [9, 9] unseen as a context; falls to [9].
        assert_eq!(m.prob_exact(&[9, 9], 10), (1, 3));
    }

    #[test]
    fn logits_are_normalized() {
        let v = vocab_with(3);
        let doc: Vec<TokenId> = vec![8, 9, 10, 9, 8, 9, 9, 1, 2];
        let m = NGramModel::fit([doc.as_slice()], 2, &v).unwrap();
        for ctx in [&[][..], &[9], &[8], &[2], &[5]] {
            let l = m.logits(ctx).unwrap();
            assert_eq!(l.len(), v.len());
            let s: f64 = l.iter().map(|x| x.exp()).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip() {
        let v = vocab_with(3);
        let a: Vec<TokenId> = vec![1, 8, 9, 10, 2];
        let b: Vec<TokenId> = vec![1, 10, 10, 2];
        let m = NGramModel::fit([a.as_slice(), b.as_slice()], 3, &v).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let back = NGramModel::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.fingerprint(), m.fingerprint());
    }

    #[test]
    fn rejects_bad_input() {
        let v = vocab_with(1);
        assert!(matches!(NGramModel::fit([&[8u32][..]], 0, &v), Err(DecodeError::InvalidOrder(0))));
        assert!(matches!(NGramModel::fit(Vec::<&[TokenId]>::new(), 2, &v), Err(DecodeError::EmptyCorpus)));
        assert!(NGramModel::fit([&[99u32][..]], 2, &v).is_err());
        assert!(NGramModel::read_from("NGRM1 2 9 0\n".as_bytes()).is_err());
        assert!(NGramModel::read_from("NGRM1 2 9 0\n-\t8:1 8:2\n".as_bytes()).is_err());
        assert!(NGramModel::read_from("XX 2 9 0\n".as_bytes()).is_err());
    }
}
