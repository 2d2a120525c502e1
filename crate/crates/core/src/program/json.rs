//! Program file format.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "name": "animal sounds",
//!   "actions": [ { "kind": "loop_until", "until": "stop", "body": [ ... ] } ]
//! }
//! ```
//!
//! Output is pretty-printed with two-space indentation, fields in a fixed
//! order and a trailing newline, so exports can be compared byte for byte.

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Action, Program};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("schema violation at byte {offset} ({path}): {message}")]
pub struct SchemaViolation {
    /// Byte offset into the input where parsing stopped.
    pub offset: usize,
    /// Field path, e.g. `actions[0].body[2].kind`.
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy)]
struct Version;

impl Serialize for Version {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u32(FORMAT_VERSION)
    }
}

impl<'de> Deserialize<'de> for Version {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = u32::deserialize(d)?;
        if v != FORMAT_VERSION {
            return Err(de::Error::custom(format!(
                "unsupported format_version {v}, expected {FORMAT_VERSION}"
            )));
        }
        Ok(Version)
    }
}

#[derive(Serialize)]
struct FileRef<'a> {
    format_version: Version,
    name: &'a str,
    actions: &'a [Action],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileOwned {
    #[allow(dead_code)]
    format_version: Version,
    name: String,
    actions: Vec<Action>,
}

/// Serializes any program, finished or not.
pub fn encode_json(program: &Program) -> Vec<u8> {
    let file = FileRef {
        format_version: Version,
        name: &program.name,
        actions: &program.actions,
    };
    let mut out = serde_json::to_vec_pretty(&file).expect("program serialization cannot fail");
    out.push(b'\n');
    out
}

/// Serializes a finished program. Callers validate first; the bytes are the
/// same as [`encode_json`].
pub fn export_json(program: &Program) -> Vec<u8> {
    encode_json(program)
}

pub fn import_json(bytes: &[u8]) -> Result<Program, SchemaViolation> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let file: FileOwned = serde_path_to_error::deserialize(&mut de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        SchemaViolation {
            offset: byte_offset(bytes, inner.line(), inner.column()),
            path,
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|err| SchemaViolation {
        offset: byte_offset(bytes, err.line(), err.column()),
        path: ".".into(),
        message: err.to_string(),
    })?;
    Ok(Program {
        name: file.name,
        actions: file.actions,
    })
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    let line_start: usize = bytes
        .split_inclusive(|b| *b == b'\n')
        .take(line.saturating_sub(1))
        .map(<[u8]>::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(bytes.len())
}
