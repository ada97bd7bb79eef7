use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use songbar_bench::{corpus, data_dir, model, songs};
use songbar_core::cos::parse_prompt;
use songbar_core::decode::sampling::{filter_top_k_top_p, sample, softmax};
use songbar_core::decode::DecodeMode;
use songbar_core::dual::{deinterleave, interleave};
use songbar_core::tokenizer::encode_score;
use songbar_core::{generate, parse_score, print_score, score_to_midi, write_smf, SamplingParams, Vocabulary};

fn abc(c: &mut Criterion) {
    let texts = songs("abc");
    c.bench_function("parse_print_corpus", |b| {
        b.iter(|| {
            for t in &texts {
                black_box(print_score(&parse_score(t).unwrap().score));
            }
        })
    });
    c.bench_function("tokenize_corpus", |b| {
        b.iter_batched(
            Vocabulary::new,
            |mut v| {
                for t in &texts {
                    black_box(encode_score(t, &mut v).unwrap());
                }
            },
            BatchSize::SmallInput,
        )
    });
}

fn dual(c: &mut Criterion) {
    let v: Vec<u32> = (8..4008).collect();
    let a: Vec<u32> = (8..3008).rev().collect();
    c.bench_function("interleave_4k", |b| {
        b.iter(|| black_box(deinterleave(&interleave(black_box(&v), black_box(&a)))))
    });
}

fn sampler(c: &mut Criterion) {
    let logits: Vec<f64> = (0..4096).map(|i| ((i * 7919) % 1000) as f64 / 100.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    c.bench_function("sample_4k_vocab", |b| {
        b.iter(|| {
            let p = softmax(black_box(&logits)).unwrap();
            let p = filter_top_k_top_p(&p, 50, 0.93);
            black_box(sample(&p, &mut rng))
        })
    });
}

fn ngram(c: &mut Criterion) {
    let (docs, vocab) = corpus("abc");
    c.bench_function("ngram_fit_order4", |b| b.iter(|| black_box(model(&docs, &vocab, 4))));

    let m = model(&docs, &vocab, 4);
    let text = std::fs::read_to_string(data_dir().join("prompts/ballad.prompt")).unwrap();
    let prompt = parse_prompt(&text, "ballad").unwrap();
    c.bench_function("generate_ballad", |b| {
        let mut seed = 0;
        b.iter_batched(
            || vocab.clone(),
            |mut v| {
                seed += 1;
                let params = SamplingParams { seed, ..SamplingParams::default() };
                black_box(generate(&m, &prompt.document, &params, DecodeMode::Sample, &mut v).unwrap())
            },
            BatchSize::SmallInput,
        )
    });
}

fn midi(c: &mut Criterion) {
    let scores: Vec<_> = songs("abc").iter().map(|t| parse_score(t).unwrap().score).collect();
    c.bench_function("render_corpus_smf", |b| {
        b.iter(|| {
            for s in &scores {
                black_box(write_smf(&score_to_midi(s).unwrap()).unwrap());
            }
        })
    });
}

criterion_group!(benches, abc, dual, sampler, ngram, midi);
criterion_main!(benches);
