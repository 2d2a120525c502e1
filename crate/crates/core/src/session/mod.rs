//! One conversation per client, speaking JSON messages.
//!
//! Client to server:
//!
//! ```json
//! {"type": "utterance", "text": "create a program", "modality": "text"}
//! {"type": "exec_input", "text": "dog"}
//! {"type": "reset"}
//! {"type": "help"}
//! ```
//!
//! Server to client:
//!
//! ```json
//! {"type": "session_opened", "session": "session-000001", "protocol": 1, "state": "home", "phrases": ["create a program"]}
//! {"type": "agent_response", "text": "...", "state": "building", "program": {...}, "phrases": [...]}
//! {"type": "exec_event", "event": {"kind": "sound_out", "sound": "dog"}}
//! {"type": "error", "code": "no_active_run", "message": "..."}
//! ```
//!
//! `program`, when present, is the program file payload of the program in
//! view. Every client message gets at least one reply, in order.

pub mod server;

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::dialog::{AgentResponse, AgentState, AgentStateKind, DialogManager, Effect};
use crate::grammar::{IntentFrame, IntentKind, Modality, Utterance};
use crate::interpreter::{ExecutionEvent, RunState};
use crate::program::{import_json, Program};
use crate::store::ProgramStore;
use crate::telemetry::{
    Clock, SystemClock, TelemetryCounters, TelemetryEvent, TranscriptEntry, TranscriptLog,
};

pub const PROTOCOL_VERSION: u32 = 1;

fn text_modality() -> Modality {
    Modality::Text
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Utterance {
        text: String,
        #[serde(default = "text_modality")]
        modality: Modality,
    },
    ExecInput {
        #[serde(default)]
        text: Option<String>,
    },
    Reset,
    Help,
}

impl ClientMessage {
    pub fn utterance(text: &str) -> Self {
        ClientMessage::Utterance {
            text: text.into(),
            modality: Modality::Text,
        }
    }

    pub fn exec_input(text: &str) -> Self {
        ClientMessage::ExecInput {
            text: Some(text.into()),
        }
    }
}

const CLIENT_TYPES: [&str; 4] = ["utterance", "exec_input", "reset", "help"];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    SessionOpened {
        session: String,
        protocol: u32,
        state: AgentStateKind,
        phrases: Vec<String>,
    },
    AgentResponse {
        text: String,
        state: AgentStateKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        program: Option<Box<RawValue>>,
        phrases: Vec<String>,
    },
    ExecEvent {
        event: ExecutionEvent,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }

    fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        ServerMessage::Error {
            code,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Not JSON, not an object, or fields of the wrong shape.
    Malformed,
    UnknownType,
    NoActiveRun,
    EmptyUtterance,
    Capacity,
    /// A finished program could not be stored.
    Storage,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("the server is at capacity ({0} sessions)")]
pub struct CapacityError(pub usize);

struct Shared {
    dm: DialogManager,
    store: Arc<ProgramStore>,
    clock: Arc<dyn Clock>,
    fuel: u64,
    transcript_dir: Option<std::path::PathBuf>,
}

/// Creates sessions and holds what they share.
pub struct Service {
    shared: Arc<Shared>,
    active: Arc<AtomicUsize>,
    next_id: AtomicU64,
    max_sessions: usize,
}

impl Service {
    pub fn from_config(config: &Config) -> Result<Self, ConfigError> {
        let dm = config.dialog_manager()?;
        let store = Arc::new(config.program_store()?);
        Ok(Self::new(dm, store, config, Arc::new(SystemClock::default())))
    }

    pub fn new(dm: DialogManager, store: Arc<ProgramStore>, config: &Config, clock: Arc<dyn Clock>) -> Self {
        Self {
            shared: Arc::new(Shared {
                dm,
                store,
                clock,
                fuel: config.fuel,
                transcript_dir: config.transcript_dir.clone(),
            }),
            active: Arc::new(AtomicUsize::new(0)),
            next_id: AtomicU64::new(1),
            max_sessions: config.max_sessions,
        }
    }

    /// In-memory service with bundled resources.
    pub fn in_memory(clock: Arc<dyn Clock>) -> Self {
        Self::new(
            DialogManager::default(),
            Arc::new(ProgramStore::in_memory()),
            &Config::default(),
            clock,
        )
    }

    pub fn store(&self) -> &ProgramStore {
        &self.shared.store
    }

    pub fn dialog_manager(&self) -> &DialogManager {
        &self.shared.dm
    }

    pub fn active_sessions(&self) -> usize {
        self.active.load(Ordering::SeqCst)
    }

    pub fn open_session(&self) -> Result<Session, CapacityError> {
        let reserved = self
            .active
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| (n < self.max_sessions).then_some(n + 1));
        if reserved.is_err() {
            return Err(CapacityError(self.max_sessions));
        }
        let guard = CapacityGuard(self.active.clone());
        let id = format!("session-{:06}", self.next_id.fetch_add(1, Ordering::SeqCst));
        let transcript = match &self.shared.transcript_dir {
            Some(dir) => TranscriptLog::to_file(&dir.join(format!("{id}.jsonl"))).unwrap_or_else(|err| {
                log::warn!("transcript for {id}: {err}; keeping it in memory");
                TranscriptLog::in_memory()
            }),
            None => TranscriptLog::in_memory(),
        };
        let now = self.shared.clock.now_ms();
        Ok(Session {
            id,
            shared: self.shared.clone(),
            agent: AgentState::default(),
            run: None,
            telemetry: TelemetryCounters::default(),
            transcript,
            started_at: now,
            goal_started: now,
            last_program: None,
            _guard: guard,
        })
    }
}

struct CapacityGuard(Arc<AtomicUsize>);

impl Drop for CapacityGuard {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

pub struct Session {
    id: String,
    shared: Arc<Shared>,
    agent: AgentState,
    run: Option<RunState>,
    telemetry: TelemetryCounters,
    transcript: TranscriptLog,
    started_at: u64,
    goal_started: u64,
    last_program: Option<Program>,
    _guard: CapacityGuard,
}

impl Drop for Session {
    fn drop(&mut self) {
        self.shared.store.release_owner(&self.id);
    }
}

impl Session {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn state(&self) -> &AgentState {
        &self.agent
    }

    pub fn run(&self) -> Option<&RunState> {
        self.run.as_ref()
    }

    pub fn telemetry(&self) -> &TelemetryCounters {
        &self.telemetry
    }

    pub fn transcript(&self) -> &TranscriptLog {
        &self.transcript
    }

    pub fn started_at(&self) -> u64 {
        self.started_at
    }

    /// The program shown in the most recent response that carried one.
    pub fn last_program(&self) -> Option<&Program> {
        self.last_program.as_ref()
    }

    pub fn greeting(&self) -> ServerMessage {
        let state = self.agent.kind();
        ServerMessage::SessionOpened {
            session: self.id.clone(),
            protocol: PROTOCOL_VERSION,
            state,
            phrases: self.shared.dm.example_phrases(state),
        }
    }

    fn elapsed(&self) -> u64 {
        self.shared.clock.now_ms().saturating_sub(self.started_at)
    }

    /// Handles one raw text frame. Never fails: bad input yields one error
    /// reply and the session carries on.
    pub fn dispatch_raw(&mut self, raw: &str) -> Vec<ServerMessage> {
        let value: serde_json::Value = match serde_json::from_str(raw) {
            Ok(v) => v,
            Err(err) => return vec![ServerMessage::error(ErrorCode::Malformed, err.to_string())],
        };
        let Some(kind) = value.get("type").and_then(|t| t.as_str()) else {
            return vec![ServerMessage::error(
                ErrorCode::Malformed,
                "expected an object with a string `type`",
            )];
        };
        if !CLIENT_TYPES.contains(&kind) {
            return vec![ServerMessage::error(
                ErrorCode::UnknownType,
                format!("unknown message type `{kind}`"),
            )];
        }
        match serde_json::from_value::<ClientMessage>(value) {
            Ok(msg) => self.dispatch(msg),
            Err(err) => vec![ServerMessage::error(ErrorCode::Malformed, err.to_string())],
        }
    }

    pub fn dispatch(&mut self, msg: ClientMessage) -> Vec<ServerMessage> {
        match msg {
            ClientMessage::Utterance { text, modality } => self.utterance(&text, modality),
            ClientMessage::ExecInput { text } => self.exec_input(text.as_deref()),
            ClientMessage::Reset => {
                self.telemetry.record(&TelemetryEvent::Reset);
                self.turn(&IntentFrame::synthetic(IntentKind::Reset, &[]))
            }
            ClientMessage::Help => {
                self.telemetry.record(&TelemetryEvent::HelpRequest);
                self.turn(&IntentFrame::synthetic(IntentKind::AskHelp, &[]))
            }
        }
    }

    fn utterance(&mut self, text: &str, modality: Modality) -> Vec<ServerMessage> {
        let utterance = match Utterance::new(text, modality, self.elapsed()) {
            Ok(u) => u,
            Err(err) => return vec![ServerMessage::error(ErrorCode::EmptyUtterance, err.to_string())],
        };
        let frame = self.shared.dm.parse(&self.agent, &utterance);
        self.telemetry.record(&TelemetryEvent::Utterance {
            modality,
            text: text.to_string(),
        });
        match frame.kind {
            IntentKind::NotUnderstood => self.telemetry.record(&TelemetryEvent::NotUnderstood),
            IntentKind::Reset => self.telemetry.record(&TelemetryEvent::Reset),
            IntentKind::AskHelp => self.telemetry.record(&TelemetryEvent::HelpRequest),
            _ => {}
        }
        self.transcript.append(TranscriptEntry::Utterance {
            seq: self.transcript.next_seq(),
            t_ms: utterance.timestamp_ms,
            modality,
            text: text.to_string(),
            intent: frame.kind,
        });
        self.turn(&frame)
    }

    fn turn(&mut self, frame: &IntentFrame) -> Vec<ServerMessage> {
        let shared = self.shared.clone();
        let turn = shared.dm.handle_turn(&self.agent, frame, &*shared.store, &self.id);
        self.agent = turn.state;
        let mut out = Vec::new();
        let mut events = Vec::new();
        match turn.effect {
            Some(Effect::Finalized(program)) => {
                if let Err(err) = shared.store.persist(&program, &self.id) {
                    out.push(ServerMessage::error(ErrorCode::Storage, err.to_string()));
                }
                let now = shared.clock.now_ms();
                self.telemetry.record(&TelemetryEvent::GoalCompleted {
                    elapsed_ms: now.saturating_sub(self.goal_started),
                });
                self.goal_started = now;
            }
            Some(Effect::Run(program)) => {
                let (run, started) = RunState::start(program, shared.fuel);
                self.run = Some(run);
                events = started;
            }
            Some(Effect::StopRun) => self.run = None,
            None => {}
        }
        out.insert(0, self.respond(turn.response));
        self.emit_events(events, &mut out);
        out
    }

    fn exec_input(&mut self, text: Option<&str>) -> Vec<ServerMessage> {
        let Some(run) = self.run.as_mut() else {
            return vec![ServerMessage::error(ErrorCode::NoActiveRun, "no program is running")];
        };
        let Some(text) = text.filter(|t| !t.trim().is_empty()) else {
            return vec![ServerMessage::error(ErrorCode::EmptyUtterance, "exec_input needs text")];
        };
        self.transcript.append(TranscriptEntry::ExecInput {
            seq: self.transcript.next_seq(),
            t_ms: self.shared.clock.now_ms().saturating_sub(self.started_at),
            text: text.to_string(),
        });
        let events = match run.resume(text) {
            Ok(events) => events,
            Err(err) => return vec![ServerMessage::error(ErrorCode::NoActiveRun, err.to_string())],
        };
        let mut out = Vec::new();
        self.emit_events(events, &mut out);
        out
    }

    fn emit_events(&mut self, events: Vec<ExecutionEvent>, out: &mut Vec<ServerMessage>) {
        for event in events {
            self.transcript.append(TranscriptEntry::Event {
                seq: self.transcript.next_seq(),
                t_ms: self.elapsed(),
                event: event.clone(),
            });
            let terminal = event.is_terminal();
            out.push(ServerMessage::ExecEvent { event: event.clone() });
            if terminal {
                self.run = None;
                let (state, response) = self.shared.dm.execution_finished(&self.agent, &event);
                self.agent = state;
                out.push(self.respond(response));
            }
        }
    }

    fn respond(&mut self, response: AgentResponse) -> ServerMessage {
        self.transcript.append(TranscriptEntry::Response {
            seq: self.transcript.next_seq(),
            t_ms: self.elapsed(),
            text: response.text.clone(),
            state: response.state_after,
        });
        let program = response.program_snapshot.map(|json| {
            self.last_program = import_json(json.as_bytes()).ok();
            RawValue::from_string(json.trim_end().to_string()).expect("snapshots are valid JSON")
        });
        ServerMessage::AgentResponse {
            text: response.text,
            state: response.state_after,
            program,
            phrases: self.shared.dm.example_phrases(response.state_after),
        }
    }
}
