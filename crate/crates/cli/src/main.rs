//! `songbar`: validate, tokenize, build corpora, fit, generate, render and
//! measure ABC songs.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::SamplingArgs;

#[derive(Debug, Parser)]
#[command(name = "songbar", version, about = "Bar-level symbolic song pipeline")]
pub struct Cli {
    /// TOML config with default paths and sampling parameters.
    #[arg(long, global = true, env = "SONGBAR_CONFIG")]
    pub config: Option<PathBuf>,
    /// Print progress to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check ABC files (or directories of `.abc` files) and print diagnostics.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Encode an ABC file as a patch token dump.
    Tokenize {
        input: PathBuf,
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Fail on patches missing from the vocabulary instead of adding them.
        #[arg(long)]
        freeze: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Decode a token dump (plain score or generated document) to ABC.
    Detokenize {
        input: PathBuf,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Serialize a directory of songs into a training corpus.
    BuildCorpus {
        abc_dir: PathBuf,
        /// Directory of `.sections` sidecars (default: the ABC directory).
        #[arg(long)]
        sections: Option<PathBuf>,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Fit the n-gram reference model on a corpus.
    Fit {
        corpus: PathBuf,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        order: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Generate the scores of a prompt's sections.
    Generate {
        #[arg(long)]
        prompt: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// ABC song whose opening (about 30 s) is used as a style reference.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Take the most probable token at every step instead of sampling.
        #[arg(long)]
        greedy: bool,
        #[command(flatten)]
        sampling: SamplingArgs,
        /// Token dump output; the extended vocabulary and run metadata are
        /// written next to it as `<output>.vocab` and `<output>.json`.
        #[arg(short, long)]
        output: PathBuf,
        /// Also write the rendered ABC here.
        #[arg(long)]
        abc: Option<PathBuf>,
    },
    /// Compile an ABC file to a Standard MIDI File.
    Render {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write one file per voice, `<output stem>.<voice>.mid`.
        #[arg(long)]
        stems: bool,
    },
    /// Report duration and vocal range, one line per song.
    Stats {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
