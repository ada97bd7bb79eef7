use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde_json::json;

use songbar_core::abc::{
    align_lyrics, estimate_duration, parse_score, performance_order, vocal_range, Rational, Score,
    Severity,
};
use songbar_core::cos::{self, parse_prompt, reference_excerpt, render_abc, REFERENCE_TARGET_SECS};
use songbar_core::decode::{generate, DecodeMode, NGramModel};
use songbar_core::dual::split_tracks_range;
use songbar_core::midi::{score_to_midi, score_to_stems, write_smf};
use songbar_core::tokenizer::dump::{read_dump, write_dump, TokenDump};
use songbar_core::tokenizer::{decode, encode_score, encode_score_frozen, Marker, PatchSequence, Vocabulary};

use crate::config::FileConfig;
use crate::{Cli, Command};

/// A failed command: exit 1 for bad input, 2 for internal failures.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

trait Classify<T> {
    fn input(self) -> Result<T, Failure>;
    fn internal(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: 1, error: e.into() })
    }
    fn internal(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: 2, error: e.into() })
    }
}

fn input_error(msg: String) -> Failure {
    Failure { code: 1, error: anyhow!(msg) }
}

struct Ctx {
    cfg: FileConfig,
    verbose: u8,
}

impl Ctx {
    fn info(&self, msg: impl AsRef<str>) {
        if self.verbose > 0 {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn vocab_path(&self, flag: Option<PathBuf>) -> Result<PathBuf, Failure> {
        flag.or_else(|| self.cfg.vocab.clone())
            .ok_or_else(|| input_error("no vocabulary given (--vocab or config `vocab`)".into()))
    }

    fn model_path(&self, flag: Option<PathBuf>) -> Result<PathBuf, Failure> {
        flag.or_else(|| self.cfg.model.clone())
            .ok_or_else(|| input_error("no model given (--model or config `model`)".into()))
    }
}

pub fn run(cli: Cli) -> Result<u8, Failure> {
    let cfg = match &cli.config {
        Some(p) => FileConfig::load(p).input()?,
        None => FileConfig::default(),
    };
    let ctx = Ctx { cfg, verbose: cli.verbose };
    match cli.command {
        Command::Validate { paths } => validate(&paths),
        Command::Tokenize { input, vocab, freeze, output } => {
            tokenize(&ctx, &input, ctx.vocab_path(vocab)?, freeze, output.as_deref())
        }
        Command::Detokenize { input, vocab, output } => {
            detokenize(&input, &ctx.vocab_path(vocab)?, output.as_deref())
        }
        Command::BuildCorpus { abc_dir, sections, vocab, output } => {
            build_corpus(&ctx, &abc_dir, sections.as_deref(), &ctx.vocab_path(vocab)?, &output)
        }
        Command::Fit { corpus, vocab, order, output } => {
            fit(&ctx, &corpus, &ctx.vocab_path(vocab)?, order, &output)
        }
        Command::Generate { prompt, model, vocab, reference, greedy, sampling, output, abc } => {
            let params = sampling.resolve(&ctx.cfg);
            params.validate().input()?;
            let job = GenerateJob {
                prompt,
                model: ctx.model_path(model)?,
                vocab: ctx.vocab_path(vocab)?,
                reference,
                mode: if greedy { DecodeMode::Greedy } else { DecodeMode::Sample },
                params,
                output,
                abc,
            };
            generate_cmd(&ctx, job)
        }
        Command::Render { input, output, stems } => render(&input, &output, stems),
        Command::Stats { paths } => stats(&paths),
    }
}

/// Files named on the command line; directories contribute their `.abc`
/// files in name order.
fn abc_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("reading {}", p.display()))
                .input()?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x == "abc"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .input()
}

fn read_score(path: &Path) -> Result<Score, Failure> {
    let text = read_text(path)?;
    parse_score(&text)
        .map(|p| p.score)
        .map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .internal()
}

/// `<path>.<ext>`, keeping the original extension.
fn beside(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn write_meta(output: &Path, value: &serde_json::Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).internal()?;
    text.push('\n');
    write_bytes(&beside(output, "json"), text.as_bytes())
}

fn load_vocab(path: &Path) -> Result<Vocabulary, Failure> {
    Vocabulary::load(path)
        .with_context(|| format!("loading vocabulary {}", path.display()))
        .input()
}

fn load_or_new_vocab(path: &Path) -> Result<Vocabulary, Failure> {
    if path.exists() {
        load_vocab(path)
    } else {
        Ok(Vocabulary::new())
    }
}

fn save_vocab(vocab: &Vocabulary, path: &Path) -> Result<(), Failure> {
    vocab
        .save(path)
        .with_context(|| format!("writing {}", path.display()))
        .internal()
}

fn validate(paths: &[PathBuf]) -> Result<u8, Failure> {
    let files = abc_inputs(paths)?;
    let prefix = files.len() > 1;
    let reports: Vec<(Vec<String>, bool)> = files
        .par_iter()
        .map(|f| {
            let text = match std::fs::read_to_string(f) {
                Ok(t) => t,
                Err(e) => return (vec![format!("error:0:0:cannot read file: {e}")], false),
            };
            let (diags, ok) = match parse_score(&text) {
                Ok(p) => {
                    let mut d = p.diagnostics;
                    for v in &p.score.voices {
                        d.extend(align_lyrics(v).diagnostics);
                    }
                    let ok = d.iter().all(|x| x.severity != Severity::Error);
                    (d, ok)
                }
                Err(e) => (e.diagnostics, false),
            };
            (diags.iter().map(ToString::to_string).collect(), ok)
        })
        .collect();
    let mut out = std::io::stderr().lock();
    let mut failed = false;
    for (f, (lines, ok)) in files.iter().zip(reports) {
        failed |= !ok;
        for l in lines {
            let r = if prefix {
                writeln!(out, "{}: {l}", f.display())
            } else {
                writeln!(out, "{l}")
            };
            r.internal()?;
        }
    }
    Ok(u8::from(failed))
}

fn tokenize(ctx: &Ctx, input: &Path, vocab_path: PathBuf, freeze: bool, output: Option<&Path>) -> Result<u8, Failure> {
    let text = read_text(input)?;
    let seq = if freeze {
        let vocab = load_vocab(&vocab_path)?;
        encode_score_frozen(&text, &vocab)
            .with_context(|| format!("tokenizing {}", input.display()))
            .input()?
    } else {
        let mut vocab = load_or_new_vocab(&vocab_path)?;
        let before = vocab.len();
        let seq = encode_score(&text, &mut vocab)
            .with_context(|| format!("tokenizing {}", input.display()))
            .input()?;
        if vocab.len() != before || !vocab_path.exists() {
            save_vocab(&vocab, &vocab_path)?;
            ctx.info(format!("vocabulary {} now has {} entries", vocab_path.display(), vocab.len()));
        }
        seq
    };
    let dump = TokenDump { seq, abc_header: Vec::new() };
    let mut buf = Vec::new();
    write_dump(&mut buf, &dump).internal()?;
    match output {
        Some(p) => write_bytes(p, &buf)?,
        None => std::io::stdout().write_all(&buf).internal()?,
    }
    eprintln!("tokens={}", dump.seq.len());
    Ok(0)
}

fn detokenize(input: &Path, vocab_path: &Path, output: Option<&Path>) -> Result<u8, Failure> {
    let vocab = load_vocab(vocab_path)?;
    let file = std::fs::File::open(input)
        .with_context(|| format!("reading {}", input.display()))
        .input()?;
    let dump = read_dump(std::io::BufReader::new(file))
        .with_context(|| format!("reading {}", input.display()))
        .input()?;
    let text = if dump.seq.ids.contains(&Marker::Eod.id()) {
        let doc = cos::parse(&dump.seq.ids, &vocab).input()?;
        render_abc(&doc, &vocab, &dump.abc_header).input()?
    } else {
        decode(&dump.seq, &vocab).input()?
    };
    match output {
        Some(p) => write_bytes(p, text.as_bytes())?,
        None => std::io::stdout().write_all(text.as_bytes()).internal()?,
    }
    Ok(0)
}

fn build_corpus(ctx: &Ctx, dir: &Path, sections: Option<&Path>, vocab_path: &Path, output: &Path) -> Result<u8, Failure> {
    let mut vocab = load_or_new_vocab(vocab_path)?;
    let stats = cos::build_corpus(dir, sections, output, &mut vocab).input()?;
    save_vocab(&vocab, vocab_path)?;
    for w in &stats.warnings {
        eprintln!("warning: {w}");
    }
    write_meta(
        output,
        &json!({
            "command": "build-corpus",
            "documents": stats.documents,
            "tokens": stats.tokens,
            "segments": stats.segments,
            "vocab_size": vocab.len(),
            "vocab_fingerprint": format!("{:016x}", vocab.fingerprint()),
        }),
    )?;
    ctx.info(format!("wrote {}", output.display()));
    println!(
        "documents={} tokens={} segments={} mean_segments={:.2} vocab={}",
        stats.documents,
        stats.tokens,
        stats.segments,
        stats.mean_segments(),
        vocab.len()
    );
    Ok(0)
}

fn fit(ctx: &Ctx, corpus: &Path, vocab_path: &Path, order: usize, output: &Path) -> Result<u8, Failure> {
    let vocab = load_vocab(vocab_path)?;
    let docs = cos::load_corpus_docs(corpus)
        .with_context(|| format!("reading corpus {}", corpus.display()))
        .input()?;
    let model = NGramModel::fit(docs.iter().map(|d| d.tokens.as_slice()), order, &vocab).input()?;
    model
        .save(output)
        .with_context(|| format!("writing {}", output.display()))
        .internal()?;
    write_meta(
        output,
        &json!({
            "command": "fit",
            "order": order,
            "documents": docs.len(),
            "contexts": model.contexts(),
            "vocab_size": vocab.len(),
            "vocab_fingerprint": format!("{:016x}", vocab.fingerprint()),
            "model_fingerprint": format!("{:016x}", model.fingerprint()),
        }),
    )?;
    ctx.info(format!("wrote {}", output.display()));
    println!(
        "order={order} documents={} contexts={} vocab={} model={:016x}",
        docs.len(),
        model.contexts(),
        vocab.len(),
        model.fingerprint()
    );
    Ok(0)
}

struct GenerateJob {
    prompt: PathBuf,
    model: PathBuf,
    vocab: PathBuf,
    reference: Option<PathBuf>,
    mode: DecodeMode,
    params: songbar_core::SamplingParams,
    output: PathBuf,
    abc: Option<PathBuf>,
}

fn generate_cmd(ctx: &Ctx, job: GenerateJob) -> Result<u8, Failure> {
    let prompt_text = read_text(&job.prompt)?;
    let prompt = parse_prompt(&prompt_text, &job.prompt.display().to_string()).input()?;
    let model = NGramModel::load(&job.model)
        .with_context(|| format!("loading model {}", job.model.display()))
        .input()?;
    let mut vocab = load_vocab(&job.vocab)?;
    let mut doc = prompt.document.clone();
    if let Some(r) = &job.reference {
        let score = read_score(r)?;
        let bars = reference_excerpt(&score, 0, REFERENCE_TARGET_SECS);
        let tracks = split_tracks_range(&score, bars, &mut vocab).input()?;
        doc.icl_ref = Some(tracks.interleave());
    }
    let g = generate(&model, &doc, &job.params, job.mode, &mut vocab).input()?;

    let dump = TokenDump {
        seq: PatchSequence { ids: g.tokens.clone(), origins: None },
        abc_header: prompt.header.clone(),
    };
    let mut buf = Vec::new();
    write_dump(&mut buf, &dump).internal()?;
    write_bytes(&job.output, &buf)?;
    save_vocab(&vocab, &beside(&job.output, "vocab"))?;
    let mut meta = serde_json::to_value(&g.meta).internal()?;
    meta["command"] = json!("generate");
    meta["seed"] = json!(job.params.seed);
    meta["model_fingerprint"] = json!(format!("{:016x}", model.fingerprint()));
    meta["model_order"] = json!(model.order());
    meta["reference"] = json!(job.reference.as_ref().map(|p| p.display().to_string()));
    write_meta(&job.output, &meta)?;
    if let Some(abc) = &job.abc {
        let text = render_abc(&g.document, &vocab, &prompt.header).input()?;
        write_bytes(abc, text.as_bytes())?;
    }
    ctx.info(format!("wrote {}", job.output.display()));
    let lens: Vec<String> = g.meta.segments.iter().map(|s| format!("{}:{}", s.label, s.tokens)).collect();
    println!(
        "segments={} generated_tokens={} total_tokens={} lengths={}",
        g.meta.segments.len(),
        g.meta.generated_tokens,
        g.meta.total_tokens,
        lens.join(",")
    );
    Ok(0)
}

fn safe_name(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn render(input: &Path, output: &Path, stems: bool) -> Result<u8, Failure> {
    let score = read_score(input)?;
    let doc = score_to_midi(&score).input()?;
    write_bytes(output, &write_smf(&doc).input()?)?;
    if stems {
        let stem = output.with_extension("");
        for (id, d) in score_to_stems(&score).input()? {
            let path = beside(&stem, &format!("{}.mid", safe_name(&id)));
            write_bytes(&path, &write_smf(&d).input()?)?;
        }
    }
    let notes: usize = doc.tracks.iter().map(|t| t.note_ons()).sum();
    let ticks = doc.tracks.iter().map(|t| t.length()).max().unwrap_or(0);
    println!("tracks={} notes={notes} ticks={ticks}", doc.tracks.len());
    Ok(0)
}

/// Exact decimal when short, otherwise three places; always one decimal.
fn seconds(r: Rational) -> String {
    let f = *r.numer() as f64 / *r.denom() as f64;
    let s = format!("{f:.3}");
    let s = s.trim_end_matches('0');
    if s.ends_with('.') {
        format!("{s}0")
    } else {
        s.to_string()
    }
}

fn stats(paths: &[PathBuf]) -> Result<u8, Failure> {
    let mut failed = false;
    for f in abc_inputs(paths)? {
        let score = match read_score(&f) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: {:#}", e.error);
                failed = true;
                continue;
            }
        };
        let vocal = score.vocal_voice_index();
        let (vid, bars) = score
            .voices
            .get(vocal)
            .map_or(("-".to_string(), 0), |v| (v.id.clone(), performance_order(v).len()));
        let range = vocal_range(&score, &vid).map_or("NA".to_string(), |r| r.to_string());
        println!(
            "file={} voices={} vocal_voice={vid} bars={bars} tempo={} duration={} vocal_range={range}",
            f.display(),
            score.voices.len(),
            score.tempo().bpm,
            seconds(estimate_duration(&score)),
        );
    }
    Ok(u8::from(failed))
}
