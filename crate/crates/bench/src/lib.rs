//! Inputs shared by the benchmarks.

use std::path::{Path, PathBuf};

use songbar_core::cos::{self, parse_sidecar, song_document};
use songbar_core::{parse_score, NGramModel, TokenId, Vocabulary};

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Every `.abc` file under `data/<dir>`, sorted by name.
pub fn songs(dir: &str) -> Vec<String> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(data_dir().join(dir))
        .expect("data directory")
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "abc"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| std::fs::read_to_string(p).expect("readable song"))
        .collect()
}

/// The bundled songs as serialized documents, plus their vocabulary.
pub fn corpus(dir: &str) -> (Vec<Vec<TokenId>>, Vocabulary) {
    let mut vocab = Vocabulary::new();
    let root = data_dir().join(dir);
    let mut docs = Vec::new();
    let mut names: Vec<PathBuf> = std::fs::read_dir(&root)
        .expect("data directory")
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "abc"))
        .collect();
    names.sort();
    for path in names {
        let score = parse_score(&std::fs::read_to_string(&path).unwrap()).unwrap().score;
        let sidecar = std::fs::read_to_string(path.with_extension("sections"))
            .ok()
            .map(|s| parse_sidecar(&s, "bench").unwrap());
        let (doc, _) = song_document(&score, sidecar.as_ref(), "bench", &mut vocab).unwrap();
        docs.push(cos::serialize(&doc, &mut vocab).unwrap());
    }
    (docs, vocab)
}

pub fn model(docs: &[Vec<TokenId>], vocab: &Vocabulary, order: usize) -> NGramModel {
    NGramModel::fit(docs.iter().map(Vec::as_slice), order, vocab).unwrap()
}
