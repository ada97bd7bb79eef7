use proptest::collection::vec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use songbar_core::abc::{align_lyrics, parse_score, print_score, vocal_range};
use songbar_core::cos::{self, SectionLabel, Segment};
use songbar_core::decode::sampling::{cfg_combine, filter_top_k_top_p, sample, softmax};
use songbar_core::decode::{generate, DecodeMode};
use songbar_core::dual::{deinterleave, interleave};
use songbar_core::midi::{score_to_midi, write_smf, write_vlq};
use songbar_core::tokenizer::{decode_patches, encode_unit, Marker, TokenId, FIRST_CONTENT, PAD};
use songbar_core::{
    estimate_duration, CosDocument, DualSequence, NGramModel, SamplingParams, Vocabulary,
};

const HEADER: &str = "X:1\nT:Prop\nM:4/4\nL:1/8\nQ:1/4=120\nK:D\n";

fn note() -> impl Strategy<Value = String> {
    let pitch = (
        prop::sample::select(vec!["", "^", "_", "="]),
        prop::sample::select(vec!["C", "D", "E", "F", "G", "A", "B", "c", "d", "e", "f", "g", "a", "b"]),
        prop::sample::select(vec!["", ",", "'"]),
    )
        .prop_map(|(a, l, o)| format!("{a}{l}{o}"));
    let head = prop_oneof![4 => pitch, 1 => Just("z".to_string())];
    (head, prop::sample::select(vec!["", "2", "3", "4", "/2", "3/2"])).prop_map(|(h, d)| format!("{h}{d}"))
}

fn bar() -> impl Strategy<Value = String> {
    vec(note(), 1..6).prop_map(|notes| format!("{} |", notes.join(" ")))
}

fn body(bars: &[String]) -> String {
    let mut s = String::from(HEADER);
    s.push_str("V:1\n");
    for line in bars.chunks(4) {
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

fn labels() -> impl Strategy<Value = SectionLabel> {
    prop::sample::select(vec!["intro", "verse", "chorus", "bridge", "outro", "solo"])
        .prop_map(|l| SectionLabel::from_name(l).unwrap())
}

fn line() -> impl Strategy<Value = String> {
    "[ -~]{0,40}"
}

fn text() -> impl Strategy<Value = String> {
    vec(line(), 1..4).prop_map(|l| l.join("\n"))
}

fn score(ids: Vec<TokenId>) -> impl Strategy<Value = DualSequence> {
    let tok = prop_oneof![1 => Just(PAD), 4 => prop::sample::select(ids)];
    vec((tok.clone(), tok), 0..10).prop_map(DualSequence::from_pairs)
}

fn document(ids: Vec<TokenId>) -> impl Strategy<Value = CosDocument> {
    (
        "[ -~]{0,60}",
        vec("[a-z]{1,10}", 0..4),
        text(),
        vec((labels(), text(), score(ids.clone())), 0..4),
        prop::option::of(score(ids)),
    )
        .prop_map(|(instruct, tags, lyrics, segs, icl_ref)| CosDocument {
            instruct,
            tags,
            lyrics,
            segments: segs
                .into_iter()
                .map(|(label, lyric, score)| Segment { label, lyric, score })
                .collect(),
            icl_ref,
        })
}

fn bar_vocab() -> (Vocabulary, Vec<TokenId>) {
    let mut v = Vocabulary::new();
    let ids = (0..12).map(|i| encode_unit(&format!("C{i}D|\n"), &mut v).unwrap()[0]).collect();
    (v, ids)
}

fn probs() -> impl Strategy<Value = Vec<f64>> {
    vec(0u32..100, 1..12).prop_filter("mass", |w| w.iter().any(|&x| x > 0)).prop_map(|w| {
        let z: u32 = w.iter().sum();
        w.iter().map(|&x| x as f64 / z as f64).collect()
    })
}

fn logits() -> impl Strategy<Value = Vec<f64>> {
    vec(prop_oneof![9 => -30.0..30.0f64, 1 => Just(f64::NEG_INFINITY)], 1..16)
}

proptest! {
    #[test]
    fn abc_round_trip(bars in vec(bar(), 0..12)) {
        let text = body(&bars);
        let s = parse_score(&text).unwrap().score;
        let printed = print_score(&s);
        prop_assert_eq!(parse_score(&printed).unwrap().score, s.clone());
        let joined: String = s.voices[0].bars.iter().map(|b| b.source_text.as_str()).collect();
        let lines: String = bars.chunks(4).map(|l| l.join(" ")).collect();
        prop_assert_eq!(joined, lines);
    }

    #[test]
    fn range_ignores_bar_order(bars in vec(bar(), 1..10), seed in any::<u64>()) {
        let a = parse_score(&body(&bars)).unwrap().score;
        let mut shuffled = bars.clone();
        let n = shuffled.len();
        shuffled.rotate_left(seed as usize % n);
        let b = parse_score(&body(&shuffled)).unwrap().score;
        prop_assert_eq!(vocal_range(&a, "1").ok(), vocal_range(&b, "1").ok());
    }

    #[test]
    fn duration_adds_over_concatenation(x in vec(bar(), 0..8), y in vec(bar(), 0..8)) {
        let dx = estimate_duration(&parse_score(&body(&x)).unwrap().score);
        let dy = estimate_duration(&parse_score(&body(&y)).unwrap().score);
        let xy: Vec<String> = x.iter().chain(&y).cloned().collect();
        let dxy = estimate_duration(&parse_score(&body(&xy)).unwrap().score);
        prop_assert_eq!(dxy, dx + dy);
    }

    #[test]
    fn lyric_pairs_at_most_min(bars in vec(bar(), 1..6), words in vec("[a-z]{1,5}", 0..30)) {
        let mut text = body(&bars);
        text.push_str(&format!("w: {}\n", words.join(" ")));
        let s = parse_score(&text).unwrap().score;
        let v = &s.voices[0];
        let notes = v.events().filter(|(_, e)| e.is_sounding()).count();
        prop_assert!(align_lyrics(v).pairs.len() <= notes.min(words.len()));
    }

    #[test]
    fn midi_notes_pair_up(bars in vec(bar(), 0..10)) {
        let s = parse_score(&body(&bars)).unwrap().score;
        let doc = score_to_midi(&s).unwrap();
        for t in &doc.tracks {
            let mut depth = std::collections::HashMap::<u8, i32>::new();
            for e in &t.events {
                match e.kind {
                    songbar_core::midi::MidiEventKind::NoteOn { key, .. } => *depth.entry(key).or_default() += 1,
                    songbar_core::midi::MidiEventKind::NoteOff { key, .. } => *depth.entry(key).or_default() -= 1,
                    _ => {}
                }
                prop_assert!(depth.values().all(|&d| d >= 0));
            }
            prop_assert!(depth.values().all(|&d| d == 0));
        }
        prop_assert_eq!(write_smf(&doc).unwrap(), write_smf(&doc).unwrap());
    }

    #[test]
    fn vlq_decodes(value in 0u64..=0x0FFF_FFFF) {
        let mut out = Vec::new();
        write_vlq(&mut out, value).unwrap();
        prop_assert!(!out.is_empty() && out.len() <= 4);
        let mut back = 0u64;
        for (i, b) in out.iter().enumerate() {
            prop_assert_eq!(b & 0x80 != 0, i + 1 < out.len());
            back = (back << 7) | u64::from(b & 0x7F);
        }
        prop_assert_eq!(back, value);
    }

    #[test]
    fn patches_cover_units(unit in "[ -~]{0,200}") {
        let mut v = Vocabulary::new();
        let ids = encode_unit(&unit, &mut v).unwrap();
        prop_assert_eq!(ids.len(), unit.len().div_ceil(16));
        let bytes: Vec<u8> = ids.iter().flat_map(|&i| *v.patch(i).unwrap()).collect();
        prop_assert_eq!(bytes.len(), 16 * ids.len());
        prop_assert_eq!(&bytes[..unit.len()], unit.as_bytes());
        prop_assert!(bytes[unit.len()..].iter().all(|&b| b == b' '));
        let trimmed = decode_patches(&ids, &v).unwrap();
        prop_assert_eq!(trimmed.replace(' ', ""), unit.replace(' ', ""));
    }

    #[test]
    fn dual_inverse(pairs in vec((FIRST_CONTENT..500u32, FIRST_CONTENT..500u32), 0..50),
                    extra in vec(FIRST_CONTENT..500u32, 0..20)) {
        let (v, a): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        prop_assert_eq!(deinterleave(&interleave(&v, &a)), (v.clone(), a.clone()));
        let mut longer = a.clone();
        longer.extend(&extra);
        let seq = interleave(&v, &longer);
        prop_assert_eq!(seq.flat().len(), 2 * v.len().max(longer.len()));
        prop_assert_eq!(deinterleave(&seq), (v, longer));
    }

    #[test]
    fn cos_round_trip(doc in document(bar_vocab().1)) {
        let (mut v, _) = bar_vocab();
        let toks = cos::serialize(&doc, &mut v).unwrap();
        prop_assert_eq!(cos::parse(&toks, &v).unwrap(), doc.clone());
        prop_assert_eq!(cos::serialize_frozen(&doc, &v).unwrap(), toks.clone());
        let count = |m: Marker| toks.iter().filter(|&&t| t == m.id()).count();
        prop_assert_eq!(count(Marker::Start), doc.segments.len());
        prop_assert_eq!(count(Marker::End), doc.segments.len());
        prop_assert_eq!(count(Marker::Soa), count(Marker::Eoa));
        prop_assert_eq!(count(Marker::Eod), 1);
    }

    #[test]
    fn cos_rejects_marker_mutations(doc in document(bar_vocab().1), pos in any::<prop::sample::Index>(),
                                    m in prop::sample::select(vec![Marker::Start, Marker::End, Marker::Soa, Marker::Eoa, Marker::Eod])) {
        let (mut v, _) = bar_vocab();
        let toks = cos::serialize(&doc, &mut v).unwrap();
        let i = pos.index(toks.len() + 1);
        let mut ins = toks.clone();
        ins.insert(i, m.id());
        prop_assert!(cos::parse(&ins, &v).is_err());
        if i < toks.len() && toks[i] != m.id() {
            let mut sub = toks.clone();
            sub[i] = m.id();
            prop_assert!(cos::parse(&sub, &v).is_err());
        }
    }

    #[test]
    fn filter_keeps_a_ranked_prefix(p in probs(), k in 1usize..14, top_p in 0.01f64..=1.0) {
        let out = filter_top_k_top_p(&p, k, top_p);
        let kept: Vec<usize> = (0..p.len()).filter(|&i| out[i] > 0.0).collect();
        prop_assert!(!kept.is_empty() && kept.len() <= k);
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for &i in &kept {
            for j in 0..p.len() {
                if p[j] > p[i] {
                    prop_assert!(out[j] > 0.0);
                }
            }
            prop_assert!((out[i] / out[kept[0]] - p[i] / p[kept[0]]).abs() < 1e-9);
        }
    }

    #[test]
    fn guidance_identities(c in logits(), u in logits(), s in 0.0f64..4.0) {
        let n = c.len().min(u.len());
        let (c, u) = (&c[..n], &u[..n]);
        let same = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same(&cfg_combine(c, u, 1.0).unwrap(), c));
        prop_assert!(same(&cfg_combine(c, c, s).unwrap(), c));
        let g = cfg_combine(c, u, s).unwrap();
        for i in 0..n {
            if c[i] == f64::NEG_INFINITY {
                prop_assert_eq!(g[i], f64::NEG_INFINITY);
            }
        }
    }

    #[test]
    fn sampling_stays_in_support(l in logits(), seed in any::<u64>()) {
        if let Some(p) = softmax(&l) {
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..20 {
                prop_assert!(p[sample(&p, &mut rng) as usize] > 0.0);
            }
        }
    }

    #[test]
    fn ngram_distributions_normalize(docs in vec(vec(FIRST_CONTENT..20u32, 1..30), 1..5),
                                     order in 1usize..5, probe in vec(0u32..20, 0..5)) {
        let mut v = Vocabulary::new();
        for i in 0..12 {
            encode_unit(&format!("t{i}"), &mut v).unwrap();
        }
        let m = NGramModel::fit(docs.iter().map(Vec::as_slice), order, &v).unwrap();
        for ctx in docs.iter().flat_map(|d| (0..=d.len()).map(move |i| &d[..i])).chain([probe.as_slice()]) {
            let sum: f64 = (0..v.len() as u32).map(|t| m.prob(ctx, t)).sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }
        let mut bytes = Vec::new();
        m.write_to(&mut bytes).unwrap();
        let back = NGramModel::read_from(bytes.as_slice()).unwrap();
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        prop_assert_eq!(bytes, again);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generation_respects_framing(seed in any::<u64>(), budget in 2usize..40, cfg in 0.5f64..2.5) {
        let (v0, ids) = bar_vocab();
        let mut v = v0.clone();
        let docs: Vec<Vec<TokenId>> = (0..3)
            .map(|i| {
                let d = CosDocument {
                    instruct: "sing".into(),
                    tags: vec!["folk".into()],
                    lyrics: "la la".into(),
                    segments: vec![Segment {
                        label: SectionLabel::Verse,
                        lyric: "la la".into(),
                        score: DualSequence::from_pairs(ids.iter().skip(i).zip(ids.iter().rev()).map(|(&a, &b)| (a, b))),
                    }],
                    icl_ref: None,
                };
                cos::serialize(&d, &mut v).unwrap()
            })
            .collect();
        let model = NGramModel::fit(docs.iter().map(Vec::as_slice), 3, &v).unwrap();
        let prompt = CosDocument {
            instruct: "sing".into(),
            tags: vec!["folk".into()],
            lyrics: "la la".into(),
            segments: vec![
                Segment { label: SectionLabel::Verse, lyric: "la la".into(), score: DualSequence::new() },
                Segment { label: SectionLabel::Chorus, lyric: "la".into(), score: DualSequence::new() },
            ],
            icl_ref: None,
        };
        let params = SamplingParams { seed, max_new_tokens: budget, cfg_scale: cfg, ..SamplingParams::default() };
        let mut va = v.clone();
        let g = generate(&model, &prompt, &params, DecodeMode::Sample, &mut va).unwrap();
        let mut vb = v.clone();
        let h = generate(&model, &prompt, &params, DecodeMode::Sample, &mut vb).unwrap();
        prop_assert_eq!(&g.tokens, &h.tokens);
        let doc = cos::parse(&g.tokens, &va).unwrap();
        for seg in &doc.segments {
            prop_assert!(seg.score.flat().len() <= budget);
            prop_assert!(seg.score.flat().iter().all(|&t| t == PAD || va.is_content(t)));
        }
    }
}
