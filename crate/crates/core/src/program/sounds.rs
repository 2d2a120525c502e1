use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

const DEFAULT_INDEX: &str = include_str!("../../resources/sounds/index.json");

#[derive(Debug, Error)]
pub enum SoundCatalogError {
    #[error("reading sound index {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("sound index {path}: {source}")]
    Format {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("sound index {path}: unsupported version {version}")]
    Version { path: String, version: u32 },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Index {
    version: u32,
    sounds: BTreeMap<String, String>,
}

/// Fixed map from sound id to an audio file relative to the catalog
/// directory. Playback happens in the client; the core only checks ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SoundCatalog {
    root: Option<PathBuf>,
    sounds: BTreeMap<String, String>,
}

impl Default for SoundCatalog {
    fn default() -> Self {
        Self::from_index("<bundled>", DEFAULT_INDEX).expect("bundled sound index is valid")
    }
}

impl SoundCatalog {
    /// Reads `index.json` from a sound directory.
    pub fn load(dir: &Path) -> Result<Self, SoundCatalogError> {
        let path = dir.join("index.json");
        let src = std::fs::read_to_string(&path).map_err(|source| SoundCatalogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut catalog = Self::from_index(&path.display().to_string(), &src)?;
        catalog.root = Some(dir.to_path_buf());
        Ok(catalog)
    }

    fn from_index(origin: &str, src: &str) -> Result<Self, SoundCatalogError> {
        let index: Index = serde_json::from_str(src).map_err(|source| SoundCatalogError::Format {
            path: origin.to_string(),
            source,
        })?;
        if index.version != 1 {
            return Err(SoundCatalogError::Version {
                path: origin.to_string(),
                version: index.version,
            });
        }
        Ok(Self {
            root: None,
            sounds: index.sounds,
        })
    }

    pub fn contains(&self, id: &str) -> bool {
        self.sounds.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.sounds.keys().map(String::as_str)
    }

    /// Audio file for `id`, relative to the catalog directory unless the
    /// catalog was loaded from disk.
    pub fn file(&self, id: &str) -> Option<PathBuf> {
        let rel = self.sounds.get(id)?;
        Some(match &self.root {
            Some(root) => root.join(rel),
            None => PathBuf::from(rel),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_catalog_has_farm_animals() {
        let c = SoundCatalog::default();
        for id in ["dog", "cat", "horse", "cow"] {
            assert!(c.contains(id), "{id}");
        }
        assert!(!c.contains("dragon"));
    }

    #[test]
    fn shipped_directory_matches_bundled_index() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("resources/sounds");
        let c = SoundCatalog::load(&dir).unwrap();
        assert_eq!(c.sounds, SoundCatalog::default().sounds);
        for id in c.ids() {
            assert!(c.file(id).unwrap().is_file(), "{id} has no audio file");
        }
    }

    #[test]
    fn rejects_unknown_version() {
        let err = SoundCatalog::from_index("t", r#"{"version":2,"sounds":{}}"#).unwrap_err();
        assert!(matches!(err, SoundCatalogError::Version { version: 2, .. }));
    }
}
