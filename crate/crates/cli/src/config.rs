use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;
use songbar_core::SamplingParams;

/// Contents of a TOML config file. Every key is optional.
///
/// ```toml
/// vocab = "build/vocab.txt"
/// model = "build/model.ngrm"
///
/// [sampling]
/// top_k = 50
/// seed = 7
/// ```
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub vocab: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub sampling: Option<SamplingParams>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: FileConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // Relative paths are relative to the config file.
        let base = path.parent().unwrap_or(Path::new(""));
        Ok(FileConfig {
            vocab: cfg.vocab.map(|p| base.join(p)),
            model: cfg.model.map(|p| base.join(p)),
            sampling: cfg.sampling,
        })
    }
}

/// Sampling flags given on the command line.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct SamplingArgs {
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub top_p: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub repetition_penalty: Option<f64>,
    #[arg(long)]
    pub cfg_scale: Option<f64>,
    #[arg(long)]
    pub max_new_tokens: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl SamplingArgs {
    /// Config values (or defaults) with command-line flags on top.
    pub fn resolve(&self, cfg: &FileConfig) -> SamplingParams {
        let mut p = cfg.sampling.clone().unwrap_or_default();
        macro_rules! over {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { p.$f = v; })* };
        }
        over!(top_k, top_p, temperature, repetition_penalty, cfg_scale, max_new_tokens, seed);
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let cfg: FileConfig = toml::from_str("[sampling]\ntop_k = 10\nseed = 3\n").unwrap();
        let args = SamplingArgs { seed: Some(9), ..SamplingArgs::default() };
        let p = args.resolve(&cfg);
        assert_eq!(p.top_k, 10);
        assert_eq!(p.seed, 9);
        assert_eq!(p.top_p, 0.93);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<FileConfig>("[sampling]\ntopk = 1\n").is_err());
        assert!(toml::from_str::<FileConfig>("modle = \"x\"\n").is_err());
    }
}
