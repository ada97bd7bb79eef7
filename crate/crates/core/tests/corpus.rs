//! Laws checked over the bundled songs.

use std::path::{Path, PathBuf};

use songbar_core::abc::{align_lyrics, parse_score, print_score, voice_duration};
use songbar_core::cos::{self, parse_sidecar, render_abc, song_document};
use songbar_core::midi::{rendered_voices, score_to_midi, MidiEventKind};
use songbar_core::tokenizer::{decode, encode_score, encode_score_frozen};
use songbar_core::{estimate_duration, Rational, Vocabulary};

fn songs(dir: &str) -> Vec<(PathBuf, String)> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(dir);
    let mut v: Vec<PathBuf> = std::fs::read_dir(&root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "abc"))
        .collect();
    v.sort();
    v.into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect()
}

fn all_songs() -> Vec<(PathBuf, String)> {
    let mut v = songs("abc");
    v.extend(songs("toy"));
    v.extend(songs("fixtures"));
    v
}

#[test]
fn corpus_is_large_enough() {
    assert!(songs("abc").len() >= 20);
}

#[test]
fn parse_print_round_trip() {
    for (path, text) in all_songs() {
        let parsed = parse_score(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let printed = print_score(&parsed.score);
        let again = parse_score(&printed).unwrap().score;
        assert_eq!(again, parsed.score, "{}", path.display());
        assert_eq!(print_score(&again), printed, "{}", path.display());
    }
}

#[test]
fn bar_text_survives_printing() {
    for (path, text) in all_songs() {
        let score = parse_score(&text).unwrap().score;
        let printed = print_score(&score);
        for v in &score.voices {
            for bar in &v.bars {
                assert!(printed.contains(&bar.source_text), "{}: {:?}", path.display(), bar.source_text);
                assert_eq!(bar.reprint(), bar.source_text);
            }
        }
    }
}

#[test]
fn tokenizer_inverts_on_canonical_text() {
    let mut vocab = Vocabulary::new();
    for (path, text) in all_songs() {
        let seq = encode_score(&text, &mut vocab).unwrap();
        let canonical = print_score(&parse_score(&text).unwrap().score);
        assert_eq!(decode(&seq, &vocab).unwrap(), canonical, "{}", path.display());
        assert_eq!(encode_score_frozen(&text, &vocab).unwrap(), seq);
    }
}

#[test]
fn lyric_pairs_bounded() {
    for (path, text) in all_songs() {
        let score = parse_score(&text).unwrap().score;
        for v in &score.voices {
            let notes = v.events().filter(|(_, e)| e.is_sounding()).count();
            let syllables: usize = v.lyric_lines.iter().map(|l| l.syllables.len()).sum();
            let pairs = align_lyrics(v).pairs.len();
            assert!(pairs <= notes.min(syllables), "{}", path.display());
        }
    }
}

#[test]
fn midi_matches_score() {
    for (path, text) in all_songs() {
        let score = parse_score(&text).unwrap().score;
        let doc = score_to_midi(&score).unwrap();
        let mpq = Rational::from_integer(score.tempo().micros_per_quarter() as i64);
        for (vi, track) in rendered_voices(&score).into_iter().zip(&doc.tracks[1..]) {
            let voice = &score.voices[vi];
            let want = voice_duration(&score, voice) * Rational::from_integer(480_000_000) / mpq;
            let diff = Rational::from_integer(track.length() as i64) - want;
            assert!(diff <= Rational::from_integer(1) && -diff <= Rational::from_integer(1), "{}", path.display());

            let mut active = std::collections::HashMap::<(u8, u8), i32>::new();
            let mut last = 0;
            for e in &track.events {
                assert!(e.tick >= last);
                last = e.tick;
                match e.kind {
                    MidiEventKind::NoteOn { channel, key, .. } => *active.entry((channel, key)).or_default() += 1,
                    MidiEventKind::NoteOff { channel, key } => *active.entry((channel, key)).or_default() -= 1,
                    _ => {}
                }
            }
            assert!(active.values().all(|&n| n == 0), "{}", path.display());

            let lyrics = track.lyrics().count();
            let pairs = if voice.lyric_lines.is_empty() { 0 } else { align_lyrics(voice).pairs.len() };
            assert_eq!(lyrics, pairs, "{} voice {}", path.display(), voice.id);
        }
    }
}

#[test]
fn documents_render_back_to_the_same_music() {
    let mut vocab = Vocabulary::new();
    for (path, text) in songs("toy").into_iter().chain(songs("abc")) {
        let score = parse_score(&text).unwrap().score;
        let side = std::fs::read_to_string(path.with_extension("sections")).ok();
        let sc = side.map(|s| parse_sidecar(&s, "x").unwrap());
        let (doc, _) = song_document(&score, sc.as_ref(), "x", &mut vocab).unwrap();
        let toks = cos::serialize(&doc, &mut vocab).unwrap();
        assert_eq!(cos::parse(&toks, &vocab).unwrap(), doc);
        let header: Vec<String> = score
            .headers
            .fields
            .iter()
            .map(|f| format!("{}:{}", f.tag, f.value))
            .collect();
        let abc = render_abc(&doc, &vocab, &header).unwrap();
        let back = parse_score(&abc).unwrap_or_else(|e| panic!("{}: {e}\n{abc}", path.display())).score;
        if sc.as_ref().is_none_or(|s| s.sections.is_empty()) {
            assert_eq!(estimate_duration(&back), estimate_duration(&score), "{}", path.display());
        }
    }
}
