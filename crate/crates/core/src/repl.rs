//! Typed conversation on a terminal.
//!
//! Plain lines are utterances, or input for the program while one is
//! running. Slash commands:
//!
//! | command          | effect                                    |
//! |------------------|-------------------------------------------|
//! | `/reset`         | same as saying "reset"                    |
//! | `/help`          | same as asking for help                   |
//! | `/export <path>` | write the program in view as JSON         |
//! | `/quit`          | leave                                     |

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use crate::program::{export_json, export_pseudocode, Program};
use crate::script::render_replies;
use crate::session::{ClientMessage, ServerMessage, Service, Session};
use crate::telemetry::append_csv;

pub struct Repl {
    session: Session,
    shown: Option<Program>,
    telemetry: Option<PathBuf>,
}

impl Repl {
    pub fn new(service: &Service, telemetry: Option<PathBuf>) -> Result<Self, crate::session::CapacityError> {
        Ok(Self {
            session: service.open_session()?,
            shown: None,
            telemetry,
        })
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    /// Handles one input line. Returns false once the user quits.
    pub fn line(&mut self, line: &str, out: &mut dyn Write) -> std::io::Result<bool> {
        let line = line.trim();
        if line.is_empty() {
            return Ok(true);
        }
        let replies = match line.split_once(' ').unwrap_or((line, "")) {
            ("/quit", _) => return Ok(false),
            ("/reset", _) => self.session.dispatch(ClientMessage::Reset),
            ("/help", _) => self.session.dispatch(ClientMessage::Help),
            ("/export", path) => {
                self.export(path.trim(), out)?;
                return Ok(true);
            }
            _ if line.starts_with('/') => {
                writeln!(out, "unknown command {line}; try /reset, /help, /export <path> or /quit")?;
                return Ok(true);
            }
            _ if self.session.run().is_some() => self.session.dispatch(ClientMessage::exec_input(line)),
            _ => self.session.dispatch(ClientMessage::utterance(line)),
        };
        self.print(&replies, out)?;
        Ok(true)
    }

    fn export(&self, path: &str, out: &mut dyn Write) -> std::io::Result<()> {
        if path.is_empty() {
            return writeln!(out, "usage: /export <path>");
        }
        match self.session.last_program() {
            None => writeln!(out, "there's no program to export yet"),
            Some(program) => match std::fs::write(Path::new(path), export_json(program)) {
                Ok(()) => writeln!(out, "wrote {path}"),
                Err(err) => writeln!(out, "{path}: {err}"),
            },
        }
    }

    fn print(&mut self, replies: &[ServerMessage], out: &mut dyn Write) -> std::io::Result<()> {
        for line in render_replies(replies) {
            writeln!(out, "{line}")?;
        }
        let current = self.session.last_program();
        if current.is_some() && current != self.shown.as_ref() {
            let program = current.cloned().unwrap();
            for line in export_pseudocode(&program).lines() {
                writeln!(out, "  | {line}")?;
            }
            self.shown = Some(program);
        }
        Ok(())
    }

    /// Appends this session's telemetry row, if an export path was given.
    pub fn finish(&self) -> std::io::Result<()> {
        match &self.telemetry {
            Some(path) => append_csv(path, &[(self.session.id(), self.session.telemetry())]),
            None => Ok(()),
        }
    }
}

/// Runs until `/quit` or end of input. Returns the process exit code.
pub fn repl(service: &Service, telemetry: Option<PathBuf>, input: impl BufRead, out: &mut dyn Write) -> i32 {
    let mut repl = match Repl::new(service, telemetry) {
        Ok(r) => r,
        Err(err) => {
            let _ = writeln!(out, "{err}");
            return 2;
        }
    };
    if let Some(line) = render_replies(&[repl.session.greeting()]).first() {
        let _ = writeln!(out, "{line} Type /help for ideas, /quit to leave.");
    }
    for line in input.lines() {
        let Ok(line) = line else { break };
        match repl.line(&line, out) {
            Ok(true) => {}
            Ok(false) => break,
            Err(_) => return 1,
        }
    }
    match repl.finish() {
        Ok(()) => 0,
        Err(err) => {
            let _ = writeln!(out, "telemetry: {err}");
            1
        }
    }
}
