//! Scripted conversations.
//!
//! One turn per line:
//!
//! ```text
//! # a comment
//! > create a program        typed utterance
//! ~ animal sounds           spoken utterance (voice modality)
//! ! dog                     input for the running program
//! ```
//!
//! A replay drives a fresh session with a virtual clock that advances one
//! second per turn, so its results are byte-for-byte reproducible. The
//! assert artifact is the last program shown plus every execution event:
//!
//! ```json
//! { "program": { "format_version": 1, ... }, "events": [ { "kind": "sound_out", "sound": "dog" } ] }
//! ```

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::grammar::Modality;
use crate::interpreter::ExecutionEvent;
use crate::program::encode_json;
use crate::session::{ClientMessage, ServerMessage, Service};
use crate::store::ProgramStore;
use crate::telemetry::{append_csv, ManualClock, TelemetryCounters, TranscriptEntry};

/// Virtual time between two script turns.
pub const TURN_MS: u64 = 1000;

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Utterance { text: String, modality: Modality },
    ExecInput(String),
}

impl Step {
    pub fn message(&self) -> ClientMessage {
        match self {
            Step::Utterance { text, modality } => ClientMessage::Utterance {
                text: text.clone(),
                modality: *modality,
            },
            Step::ExecInput(text) => ClientMessage::exec_input(text),
        }
    }
}

impl std::fmt::Display for Step {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Step::Utterance {
                text,
                modality: Modality::Text,
            } => write!(f, "> {text}"),
            Step::Utterance {
                text,
                modality: Modality::Voice,
            } => write!(f, "~ {text}"),
            Step::ExecInput(text) => write!(f, "! {text}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptLine {
    pub line: usize,
    pub step: Step,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Script {
    pub lines: Vec<ScriptLine>,
}

impl Script {
    pub fn load(path: &Path) -> Result<Self, ScriptError> {
        let src = std::fs::read_to_string(path).map_err(|source| ScriptError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&src)
    }

    pub fn parse(src: &str) -> Result<Self, ScriptError> {
        let mut lines = Vec::new();
        for (idx, raw) in src.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (marker, rest) = trimmed.split_at(1);
            let text = rest.trim().to_string();
            if text.is_empty() {
                return Err(ScriptError::Syntax {
                    line,
                    message: format!("`{marker}` needs text"),
                });
            }
            let step = match marker {
                ">" => Step::Utterance {
                    text,
                    modality: Modality::Text,
                },
                "~" => Step::Utterance {
                    text,
                    modality: Modality::Voice,
                },
                "!" => Step::ExecInput(text),
                _ => {
                    return Err(ScriptError::Syntax {
                        line,
                        message: "expected `>`, `~`, `!` or `#`".into(),
                    })
                }
            };
            lines.push(ScriptLine { line, step });
        }
        Ok(Self { lines })
    }
}

/// What a replay is checked against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub program: Option<serde_json::Value>,
    pub events: Vec<ExecutionEvent>,
}

impl Artifact {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("artifacts serialize");
        out.push(b'\n');
        out
    }
}

#[derive(Debug, Clone)]
pub struct Exchange {
    pub line: usize,
    pub step: Step,
    pub replies: Vec<ServerMessage>,
}

#[derive(Debug, Clone)]
pub struct Replay {
    pub session: String,
    pub exchanges: Vec<Exchange>,
    pub artifact: Artifact,
    pub telemetry: TelemetryCounters,
    pub transcript: Vec<TranscriptEntry>,
}

impl Replay {
    /// Agent response texts, in order.
    pub fn responses(&self) -> Vec<&str> {
        self.exchanges
            .iter()
            .flat_map(|e| &e.replies)
            .filter_map(|m| match m {
                ServerMessage::AgentResponse { text, .. } => Some(text.as_str()),
                _ => None,
            })
            .collect()
    }

    /// Human-readable transcript.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for exchange in &self.exchanges {
            let _ = writeln!(out, "{}", exchange.step);
            for line in render_replies(&exchange.replies) {
                let _ = writeln!(out, "{line}");
            }
        }
        out
    }
}

/// One display line per server message.
pub fn render_replies(replies: &[ServerMessage]) -> Vec<String> {
    replies
        .iter()
        .map(|m| match m {
            ServerMessage::AgentResponse { text, .. } => format!("convo: {text}"),
            ServerMessage::ExecEvent { event } => match event {
                ExecutionEvent::SpeechOut { text } => format!("  [says] {text}"),
                ExecutionEvent::SoundOut { sound } => format!("  [plays] {sound}"),
                ExecutionEvent::InputRequest { .. } => "  [listening]".to_string(),
                ExecutionEvent::Finished => "  [finished]".to_string(),
                ExecutionEvent::RuntimeError { message, path } => format!("  [error at {path}] {message}"),
            },
            ServerMessage::Error { code, message } => {
                format!("error ({}): {message}", serde_json::to_string(code).unwrap_or_default().trim_matches('"'))
            }
            ServerMessage::SessionOpened { session, .. } => format!("({session} opened)"),
        })
        .collect()
}

/// A service wired for replays: configured resources, an in-memory
/// program store and a virtual clock.
pub fn replay_service(config: &Config) -> Result<(Service, Arc<ManualClock>), ConfigError> {
    let clock = Arc::new(ManualClock::default());
    let service = Service::new(
        config.dialog_manager()?,
        Arc::new(ProgramStore::in_memory()),
        config,
        clock.clone(),
    );
    Ok((service, clock))
}

pub fn replay(script: &Script, service: &Service, clock: &ManualClock) -> Replay {
    let mut session = service.open_session().expect("a replay needs one free session");
    let mut exchanges = Vec::new();
    let mut events = Vec::new();
    for line in &script.lines {
        clock.advance(TURN_MS);
        let replies = session.dispatch(line.step.message());
        events.extend(replies.iter().filter_map(|m| match m {
            ServerMessage::ExecEvent { event } => Some(event.clone()),
            _ => None,
        }));
        exchanges.push(Exchange {
            line: line.line,
            step: line.step.clone(),
            replies,
        });
    }
    let program = session.last_program().map(|p| {
        serde_json::from_slice(&encode_json(p)).expect("program JSON parses")
    });
    Replay {
        session: session.id().to_string(),
        exchanges,
        artifact: Artifact { program, events },
        telemetry: session.telemetry().clone(),
        transcript: session.transcript().entries().to_vec(),
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Default)]
pub struct ReplayOptions {
    pub script: PathBuf,
    pub assert: Option<PathBuf>,
    /// Write the artifact to `assert` instead of comparing.
    pub bless: bool,
    pub telemetry: Option<PathBuf>,
}

/// The `--replay` command. Returns the process exit code.
pub fn run_replay(config: &Config, opts: &ReplayOptions, out: &mut dyn Write) -> i32 {
    let script = match Script::load(&opts.script) {
        Ok(s) => s,
        Err(err) => {
            let _ = writeln!(out, "{}: {err}", opts.script.display());
            return EXIT_USAGE;
        }
    };
    let (service, clock) = match replay_service(config) {
        Ok(s) => s,
        Err(err) => {
            let _ = writeln!(out, "{err}");
            return EXIT_USAGE;
        }
    };
    let result = replay(&script, &service, &clock);
    let _ = write!(out, "{}", result.render());

    if let Some(path) = &opts.telemetry {
        if let Err(err) = append_csv(path, &[(&result.session, &result.telemetry)]) {
            let _ = writeln!(out, "{}: {err}", path.display());
            return EXIT_USAGE;
        }
    }

    let Some(golden) = &opts.assert else {
        return EXIT_OK;
    };
    let actual = result.artifact.to_bytes();
    if opts.bless {
        return match std::fs::write(golden, &actual) {
            Ok(()) => EXIT_OK,
            Err(err) => {
                let _ = writeln!(out, "{}: {err}", golden.display());
                EXIT_USAGE
            }
        };
    }
    let expected = match std::fs::read(golden) {
        Ok(bytes) => bytes,
        Err(err) => {
            let _ = writeln!(out, "{}: {err}", golden.display());
            return EXIT_USAGE;
        }
    };
    if expected == actual {
        let _ = writeln!(out, "ok: matches {}", golden.display());
        return EXIT_OK;
    }
    let expected = String::from_utf8_lossy(&expected);
    let actual = String::from_utf8_lossy(&actual);
    let diff = similar::TextDiff::from_lines(expected.as_ref(), actual.as_ref());
    let _ = write!(
        out,
        "{}",
        diff.unified_diff().header(&golden.display().to_string(), "replay")
    );
    EXIT_MISMATCH
}
