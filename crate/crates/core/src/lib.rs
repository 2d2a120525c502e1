//! Convo: build and run small programs by talking to an agent.
//!
//! The pipeline is [`grammar`] (utterance to intent), [`dialog`] (intent to
//! editor commands and a response), [`program`] (the action-list IR) and
//! [`interpreter`] (resumable execution). [`session`] wraps it in a
//! WebSocket protocol and [`script`] replays scripted conversations.

pub mod config;
pub mod dialog;
pub mod grammar;
pub mod interpreter;
pub mod program;
pub mod repl;
pub mod script;
pub mod session;
pub mod store;
pub mod telemetry;

pub use dialog::{AgentState, AgentStateKind, DialogManager};
pub use grammar::{Grammar, IntentFrame, IntentKind, Modality, Utterance};
pub use interpreter::{ExecutionEvent, RunState};
pub use program::{Action, Program};
