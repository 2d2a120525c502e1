//! Named programs shared by every session of a server.
//!
//! Names are claimed while a program is being built and become permanent
//! when it is persisted. With a directory configured, each program is also
//! written there as `<sanitized name>.json` in the program file format and
//! existing files are loaded at startup.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use thiserror::Error;

use crate::dialog::ProgramRegistry;
use crate::program::{export_json, import_json, Program, SchemaViolation};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("no program called {0}")]
    NotFound(String),
    #[error("the name, {0}, has already been used")]
    NameCollision(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: SchemaViolation,
    },
}

#[derive(Debug, Default)]
struct Inner {
    programs: BTreeMap<String, Program>,
    /// name -> owner of a name reserved by a draft in progress
    claims: BTreeMap<String, String>,
}

#[derive(Debug, Default)]
pub struct ProgramStore {
    dir: Option<PathBuf>,
    inner: Mutex<Inner>,
}

impl ProgramStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (and creates) a program directory, loading every `*.json`.
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        let io = |source| StoreError::Io {
            path: dir.to_path_buf(),
            source,
        };
        fs::create_dir_all(dir).map_err(io)?;
        let mut programs = BTreeMap::new();
        let mut entries: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        entries.sort();
        for path in entries {
            let bytes = fs::read(&path).map_err(|source| StoreError::Io {
                path: path.clone(),
                source,
            })?;
            let program = import_json(&bytes).map_err(|source| StoreError::Format {
                path: path.clone(),
                source,
            })?;
            programs.insert(program.name.clone(), program);
        }
        Ok(Self {
            dir: Some(dir.to_path_buf()),
            inner: Mutex::new(Inner {
                programs,
                claims: BTreeMap::new(),
            }),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Stores a finished program. `owner` may persist a name it claimed.
    pub fn persist(&self, program: &Program, owner: &str) -> Result<(), StoreError> {
        let mut inner = self.lock();
        let name = &program.name;
        let foreign_claim = inner.claims.get(name).is_some_and(|o| o != owner);
        if inner.programs.contains_key(name) || foreign_claim {
            return Err(StoreError::NameCollision(name.clone()));
        }
        if let Some(dir) = &self.dir {
            let path = dir.join(file_name(name));
            fs::write(&path, export_json(program)).map_err(|source| StoreError::Io { path, source })?;
        }
        inner.claims.remove(name);
        inner.programs.insert(name.clone(), program.clone());
        Ok(())
    }

    pub fn load(&self, name: &str) -> Result<Program, StoreError> {
        self.lock()
            .programs
            .get(name)
            .cloned()
            .ok_or_else(|| StoreError::NotFound(name.to_string()))
    }

    pub fn names(&self) -> Vec<String> {
        self.lock().programs.keys().cloned().collect()
    }

    /// Drops every claim held by `owner`, e.g. when its session closes.
    pub fn release_owner(&self, owner: &str) {
        self.lock().claims.retain(|_, o| o != owner);
    }
}

impl ProgramRegistry for ProgramStore {
    fn claim(&self, name: &str, owner: &str) -> bool {
        let mut inner = self.lock();
        if inner.programs.contains_key(name) {
            return false;
        }
        match inner.claims.get(name) {
            Some(o) => o == owner,
            None => {
                inner.claims.insert(name.to_string(), owner.to_string());
                true
            }
        }
    }

    fn release(&self, name: &str, owner: &str) {
        let mut inner = self.lock();
        if inner.claims.get(name).is_some_and(|o| o == owner) {
            inner.claims.remove(name);
        }
    }

    fn lookup(&self, name: &str) -> Option<Program> {
        self.load(name).ok()
    }
}

/// Maps a program name to a portable file name. Names made of lowercase
/// words map to `words_joined_by_underscores`; anything else also gets a
/// hash of the full name so distinct names never share a file.
pub fn file_name(name: &str) -> String {
    let plain = !name.is_empty()
        && name
            .split(' ')
            .all(|w| !w.is_empty() && w.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit()));
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    if !plain {
        out.push_str(&format!("-{:08x}", fnv1a(name)));
    }
    out.push_str(".json");
    out
}

fn fnv1a(s: &str) -> u32 {
    s.bytes().fold(0x811c_9dc5, |h, b| (h ^ u32::from(b)).wrapping_mul(0x0100_0193))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::Action;

    fn sample(name: &str) -> Program {
        Program::new(name, vec![Action::say("hi")])
    }

    #[test]
    fn persist_then_load() {
        let store = ProgramStore::in_memory();
        store.persist(&sample("greeting"), "a").unwrap();
        assert_eq!(store.load("greeting").unwrap(), sample("greeting"));
    }

    #[test]
    fn missing_program_is_not_found() {
        let store = ProgramStore::in_memory();
        assert!(matches!(store.load("missing"), Err(StoreError::NotFound(_))));
    }

    #[test]
    fn duplicate_persist_collides() {
        let store = ProgramStore::in_memory();
        store.persist(&sample("greeting"), "a").unwrap();
        let err = store.persist(&sample("greeting"), "b").unwrap_err();
        assert_eq!(err.to_string(), "the name, greeting, has already been used");
    }

    #[test]
    fn claims_are_exclusive_until_released() {
        let store = ProgramStore::in_memory();
        assert!(store.claim("x", "a"));
        assert!(store.claim("x", "a"));
        assert!(!store.claim("x", "b"));
        assert!(store.persist(&sample("x"), "b").is_err());
        store.release("x", "b");
        assert!(!store.claim("x", "b"));
        store.release_owner("a");
        assert!(store.claim("x", "b"));
    }

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = ProgramStore::open(dir.path()).unwrap();
        store.persist(&sample("animal sounds"), "a").unwrap();
        assert!(dir.path().join("animal_sounds.json").is_file());

        let reopened = ProgramStore::open(dir.path()).unwrap();
        assert_eq!(reopened.load("animal sounds").unwrap(), sample("animal sounds"));
        assert!(!reopened.claim("animal sounds", "b"));
    }

    #[test]
    fn file_names_are_portable_and_distinct() {
        assert_eq!(file_name("animal sounds"), "animal_sounds.json");
        let a = file_name("a/b");
        let b = file_name("a?b");
        assert_ne!(a, b);
        assert!(a.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c)));
        assert_ne!(file_name("a b"), file_name("a  b"));
    }
}
