use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn songbar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_songbar"))
        .args(args)
        .env_remove("SONGBAR_CONFIG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_ok_and_missing_key() {
    let ok = songbar(&["validate", s(&data("fixtures/eight_bars.abc"))]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.abc");
    std::fs::write(&bad, "X:1\nM:4/4\nQ:1/4=120\nV:1\nC4|\n").unwrap();
    let out = songbar(&["validate", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    let errors: Vec<String> = stderr(&out).lines().filter(|l| l.starts_with("error:")).map(String::from).collect();
    assert_eq!(errors.len(), 1, "{errors:?}");
    assert!(errors[0].contains("missing key header"), "{}", errors[0]);
    assert_eq!(errors[0].split(':').count(), 4);
}

#[test]
fn validate_directory_fails_if_any_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(data("fixtures/eight_bars.abc"), dir.path().join("a.abc")).unwrap();
    assert_eq!(songbar(&["validate", s(dir.path())]).status.code(), Some(0));
    std::fs::write(dir.path().join("b.abc"), "X:1\nV:1\nC4|\n").unwrap();
    assert_eq!(songbar(&["validate", s(dir.path())]).status.code(), Some(1));
    assert_eq!(songbar(&["validate", s(&data("abc")), s(&data("toy"))]).status.code(), Some(0));
}

#[test]
fn tokenize_round_trip_over_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let vocab = dir.path().join("vocab.txt");
    for entry in std::fs::read_dir(data("abc")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "abc") {
            continue;
        }
        let tok = dir.path().join("x.tok");
        let back = dir.path().join("x.abc");
        let out = songbar(&["tokenize", s(&path), "--vocab", s(&vocab), "-o", s(&tok)]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let count: usize = stderr(&out)
            .split_whitespace()
            .find_map(|w| w.strip_prefix("tokens="))
            .unwrap()
            .parse()
            .unwrap();
        let ids = std::fs::read_to_string(&tok)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .count();
        assert_eq!(count, ids, "{}", path.display());
        let out = songbar(&["detokenize", s(&tok), "--vocab", s(&vocab), "-o", s(&back)]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let text = std::fs::read_to_string(&path).unwrap();
        let canonical = songbar_core::print_score(&songbar_core::parse_score(&text).unwrap().score);
        assert_eq!(std::fs::read_to_string(&back).unwrap(), canonical, "{}", path.display());
    }
}

#[test]
fn frozen_vocabulary_rejects_new_bars() {
    let dir = tempfile::tempdir().unwrap();
    let vocab = dir.path().join("vocab.txt");
    let tok = dir.path().join("x.tok");
    let seed = songbar(&["tokenize", s(&data("fixtures/eight_bars.abc")), "--vocab", s(&vocab), "-o", s(&tok)]);
    assert_eq!(seed.status.code(), Some(0));
    let again = songbar(&["tokenize", s(&data("fixtures/eight_bars.abc")), "--vocab", s(&vocab), "--freeze", "-o", s(&tok)]);
    assert_eq!(again.status.code(), Some(0), "{}", stderr(&again));
    let new = dir.path().join("new.abc");
    std::fs::write(&new, "X:1\nT:Eight bars\nM:4/4\nL:1/8\nQ:1/4=120\nK:C\nV:1\nB,2 ^F2 _B2 c'2 |]\n").unwrap();
    let out = songbar(&["tokenize", s(&new), "--vocab", s(&vocab), "--freeze", "-o", s(&tok)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("out-of-vocabulary"), "{}", stderr(&out));
}

#[test]
fn stats_reports_duration_and_range() {
    let out = songbar(&["stats", s(&data("fixtures/eight_bars.abc"))]);
    assert_eq!(out.status.code(), Some(0));
    let line = stdout(&out);
    assert!(line.contains("duration=16.0"), "{line}");
    assert!(line.contains("bars=8"), "{line}");
    let out = songbar(&["stats", s(&data("fixtures/range_c4_g4.abc"))]);
    assert!(stdout(&out).contains("vocal_range=7"), "{}", stdout(&out));
}

fn fitted(dir: &Path) -> (PathBuf, PathBuf) {
    let vocab = dir.join("vocab.txt");
    let corpus = dir.join("corpus.cos");
    let model = dir.join("model.ngrm");
    let out = songbar(&["build-corpus", s(&data("toy")), "--vocab", s(&vocab), "-o", s(&corpus)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let out = songbar(&["fit", s(&corpus), "--vocab", s(&vocab), "-o", s(&model)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    (vocab, model)
}

fn generate(dir: &Path, vocab: &Path, model: &Path, name: &str, extra: &[&str]) -> Output {
    let prompt = data("prompts/toy.prompt");
    let out = dir.join(format!("{name}.tok"));
    let abc = dir.join(format!("{name}.abc"));
    let mut args = vec![
        "generate", "--prompt", s(&prompt), "--model", s(model), "--vocab", s(vocab),
        "-o", s(&out), "--abc", s(&abc),
    ];
    args.extend_from_slice(extra);
    songbar(&args)
}

#[test]
fn generate_records_default_params() {
    let dir = tempfile::tempdir().unwrap();
    let (vocab, model) = fitted(dir.path());
    let out = generate(dir.path(), &vocab, &model, "g", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("g.tok.json")).unwrap()).unwrap();
    let p = &meta["params"];
    assert_eq!(p["top_k"], 50);
    assert_eq!(p["top_p"], 0.93);
    assert_eq!(p["temperature"], 1.0);
    assert_eq!(p["repetition_penalty"], 1.1);
    assert_eq!(p["cfg_scale"], 1.5);
    assert_eq!(p["max_new_tokens"], 3000);
    assert_eq!(meta["seed"], 0);
    assert!(meta["vocab_fingerprint"].is_string());
    assert!(meta["model_fingerprint"].is_string());
}

#[test]
fn seeded_generation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (vocab, model) = fitted(dir.path());
    for name in ["a", "b"] {
        let out = generate(dir.path(), &vocab, &model, name, &["--seed", "7"]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    let a = std::fs::read(dir.path().join("a.abc")).unwrap();
    let b = std::fs::read(dir.path().join("b.abc")).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        std::fs::read(dir.path().join("a.tok")).unwrap(),
        std::fs::read(dir.path().join("b.tok")).unwrap()
    );
}

#[test]
fn invalid_override_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let (vocab, model) = fitted(dir.path());
    let out = generate(dir.path(), &vocab, &model, "g", &["--top-p", "1.5"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let (vocab, model) = fitted(dir.path());
    let cfg = dir.path().join("songbar.toml");
    std::fs::write(&cfg, "vocab = \"vocab.txt\"\nmodel = \"model.ngrm\"\n[sampling]\nseed = 11\ntop_k = 5\n").unwrap();
    let tok = dir.path().join("c.tok");
    let out = Command::new(env!("CARGO_BIN_EXE_songbar"))
        .args(["generate", "--prompt", s(&data("prompts/toy.prompt")), "-o", s(&tok)])
        .env("SONGBAR_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("c.tok.json")).unwrap()).unwrap();
    assert_eq!(meta["params"]["seed"], 11);
    assert_eq!(meta["params"]["top_k"], 5);
    assert!(vocab.exists() && model.exists());
}

#[test]
fn pipeline_renders_loadable_midi() {
    let start = std::time::Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (vocab, model) = fitted(d);
    let out = generate(d, &vocab, &model, "song", &["--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let back = d.join("back.abc");
    let out = songbar(&["detokenize", s(&d.join("song.tok")), "--vocab", s(&d.join("song.tok.vocab")), "-o", s(&back)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(std::fs::read(&back).unwrap(), std::fs::read(d.join("song.abc")).unwrap());
    assert_eq!(songbar(&["validate", s(&back)]).status.code(), Some(0));
    let mid = d.join("song.mid");
    let out = songbar(&["render", s(&back), "-o", s(&mid), "--stems"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let bytes = std::fs::read(&mid).unwrap();
    let smf = midly::Smf::parse(&bytes).unwrap();
    assert_eq!(smf.header.format, midly::Format::Parallel);
    assert_eq!(smf.tracks.len(), 3);
    assert!(d.join("song.1.mid").exists());
    assert!(d.join("song.2.mid").exists());
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn missing_input_exits_one() {
    let out = songbar(&["stats", "/nonexistent/x.abc"]);
    assert_eq!(out.status.code(), Some(1));
    let out = songbar(&["render", "/nonexistent/x.abc", "-o", "/tmp/never.mid"]);
    assert_eq!(out.status.code(), Some(1));
}
