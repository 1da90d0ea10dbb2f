use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bipro::pingshui::{RhymeDictionary, VerifyOptions};
use bipro::scorer::{PromptTemplates, ScoreWeights};
use clap::ValueEnum;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mock,
    Remote,
}

/// Contents of the `--config` TOML file. Relative paths are resolved
/// against the file's directory.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    pub dictionary_path: Option<PathBuf>,
    pub templates_path: Option<PathBuf>,
    pub model: Option<ModelKind>,
    pub model_url: Option<String>,
    pub mock_seed: Option<u64>,
    pub beam_size: Option<usize>,
    pub max_rewrites: Option<usize>,
    pub seed: Option<u64>,
    pub alpha_title: Option<f64>,
    pub lenient_pronunciation: Option<bool>,
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config: AppConfig =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.dictionary_path, &mut config.templates_path].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }
}

/// Flags shared by every command; each overrides the config file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub dict: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub model: Option<ModelKind>,
    pub model_url: Option<String>,
    pub mock_seed: Option<u64>,
    pub seed: Option<u64>,
    pub lenient: bool,
    pub beam_size: Option<usize>,
    pub max_rewrites: Option<usize>,
    pub alpha_title: Option<f64>,
}

/// Effective settings after applying flags, config and defaults.
#[derive(Debug)]
pub struct Settings {
    pub dictionary: RhymeDictionary,
    pub templates: PromptTemplates,
    pub model: ModelKind,
    pub model_url: Option<String>,
    pub mock_seed: u64,
    pub beam_size: usize,
    pub max_rewrites: usize,
    pub seed: u64,
    pub weights: ScoreWeights,
    pub verify: VerifyOptions,
}

impl Settings {
    pub fn resolve(config: AppConfig, flags: Overrides) -> Result<Self> {
        let dictionary = match flags.dict.or(config.dictionary_path) {
            Some(path) => RhymeDictionary::load(&path)?,
            None => RhymeDictionary::synthetic(),
        };
        let templates = match flags.templates.or(config.templates_path) {
            Some(path) => {
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("cannot read templates {}", path.display()))?;
                PromptTemplates::from_toml_str(&text)?
            }
            None => PromptTemplates::default(),
        };
        let beam_size = flags.beam_size.or(config.beam_size).unwrap_or(6);
        if beam_size == 0 {
            bail!("beam size must be at least 1");
        }
        let alpha = flags.alpha_title.or(config.alpha_title).unwrap_or(0.5);
        Ok(Self {
            dictionary,
            templates,
            model: flags.model.or(config.model).unwrap_or(ModelKind::Mock),
            model_url: flags.model_url.or(config.model_url),
            mock_seed: flags.mock_seed.or(config.mock_seed).unwrap_or(0),
            beam_size,
            max_rewrites: flags.max_rewrites.or(config.max_rewrites).unwrap_or(20),
            seed: flags.seed.or(config.seed).unwrap_or(0),
            weights: ScoreWeights::new(alpha)?,
            verify: VerifyOptions {
                lenient: flags.lenient || config.lenient_pronunciation.unwrap_or(false),
                ..VerifyOptions::default()
            },
        })
    }
}
