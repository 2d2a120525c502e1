//! Server and CLI configuration.
//!
//! A TOML file, every key optional:
//!
//! ```toml
//! listen = "127.0.0.1:8765"
//! max_sessions = 64
//! fuel = 10000
//! program_dir = "programs"      # omit to keep programs in memory
//! transcript_dir = "transcripts"
//! grammar = "grammar.convo"     # omit to use the bundled table
//! templates = "responses.toml"
//! style = "default"
//! sounds = "sounds"             # directory holding index.json
//! ```
//!
//! Relative paths are resolved against the file's directory. Each key can
//! be overridden by an environment variable named `CONVO_` plus the key in
//! upper case, e.g. `CONVO_MAX_SESSIONS=2`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::dialog::{DialogManager, TemplateError, Templates};
use crate::grammar::{Grammar, GrammarError};
use crate::interpreter::DEFAULT_FUEL;
use crate::program::{SoundCatalog, SoundCatalogError};
use crate::store::{ProgramStore, StoreError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("environment variable {key}: {message}")]
    Env { key: String, message: String },
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Templates(#[from] TemplateError),
    #[error(transparent)]
    Sounds(#[from] SoundCatalogError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub listen: String,
    pub max_sessions: usize,
    pub fuel: u64,
    pub program_dir: Option<PathBuf>,
    pub transcript_dir: Option<PathBuf>,
    pub grammar: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub style: Option<String>,
    pub sounds: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8765".into(),
            max_sessions: 64,
            fuel: DEFAULT_FUEL,
            program_dir: None,
            transcript_dir: None,
            grammar: None,
            templates: None,
            style: None,
            sounds: None,
        }
    }
}

impl Config {
    /// Reads the file (if any) and then the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        config.apply_env(std::env::vars())?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: Config = toml::from_str(&src).map_err(|source| ConfigError::Toml {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut config.program_dir,
            &mut config.transcript_dir,
            &mut config.grammar,
            &mut config.templates,
            &mut config.sounds,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    /// Applies `CONVO_*` overrides; other keys are ignored.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
        for (key, value) in vars {
            let Some(field) = key.strip_prefix("CONVO_") else {
                continue;
            };
            let number = |v: &str| {
                v.parse::<u64>().map_err(|e| ConfigError::Env {
                    key: key.clone(),
                    message: e.to_string(),
                })
            };
            match field {
                "LISTEN" => self.listen = value,
                "MAX_SESSIONS" => self.max_sessions = number(&value)? as usize,
                "FUEL" => self.fuel = number(&value)?,
                "PROGRAM_DIR" => self.program_dir = Some(value.into()),
                "TRANSCRIPT_DIR" => self.transcript_dir = Some(value.into()),
                "GRAMMAR" => self.grammar = Some(value.into()),
                "TEMPLATES" => self.templates = Some(value.into()),
                "STYLE" => self.style = Some(value),
                "SOUNDS" => self.sounds = Some(value.into()),
                _ => log::debug!("ignoring unknown setting {key}"),
            }
        }
        Ok(())
    }

    /// Loads the grammar, templates and sound catalog.
    pub fn dialog_manager(&self) -> Result<DialogManager, ConfigError> {
        let grammar = match &self.grammar {
            Some(p) => Grammar::load(p)?,
            None => Grammar::default(),
        };
        let mut templates = match &self.templates {
            Some(p) => Templates::load(p)?,
            None => Templates::default(),
        };
        if let Some(style) = &self.style {
            templates = templates.with_style(style)?;
        }
        let sounds = match &self.sounds {
            Some(p) => SoundCatalog::load(p)?,
            None => SoundCatalog::default(),
        };
        Ok(DialogManager::new(Arc::new(grammar), Arc::new(templates), Arc::new(sounds)))
    }

    pub fn program_store(&self) -> Result<ProgramStore, ConfigError> {
        Ok(match &self.program_dir {
            Some(dir) => ProgramStore::open(dir)?,
            None => ProgramStore::in_memory(),
        })
    }
}
