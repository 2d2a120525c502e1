//! Resumable program execution.
//!
//! A run is a plain value ([`RunState`]) holding an explicit frame stack, so
//! a program paused at an input request holds no thread and can be moved
//! between tasks. Each executed action costs one unit of fuel, as does
//! every re-check of a loop condition after an iteration completes; the
//! loop action itself performs the first check.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::Condition;
use crate::program::{Action, ActionPath, Program, ValueExpr};

pub const DEFAULT_FUEL: u64 = 10_000;

pub const BUDGET_EXHAUSTED: &str = "step budget exhausted";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExecutionEvent {
    SpeechOut {
        text: String,
    },
    SoundOut {
        sound: String,
    },
    InputRequest {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prompt: Option<String>,
    },
    Finished,
    RuntimeError {
        message: String,
        path: ActionPath,
    },
}

impl ExecutionEvent {
    pub fn is_terminal(&self) -> bool {
        matches!(self, ExecutionEvent::Finished | ExecutionEvent::RuntimeError { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResumeError {
    #[error("the program is not waiting for input")]
    NotPaused,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Paused,
    Finished,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FrameKind {
    Root,
    Then,
    Else,
    Loop,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Frame {
    kind: FrameKind,
    /// Path of the block owning this list; empty for the root.
    block: ActionPath,
    pc: usize,
    /// Completed iterations, loops only.
    iterations: u32,
}

/// The state of one program run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunState {
    program: Arc<Program>,
    variables: BTreeMap<String, String>,
    last_input: Option<String>,
    frames: Vec<Frame>,
    fuel: u64,
    status: RunStatus,
    /// Variable bound by the pending input request, if any.
    input_target: Option<String>,
}

/// Starts `program` and runs it to the first pause or termination.
pub fn start(program: impl Into<Arc<Program>>, fuel: u64) -> (RunState, Vec<ExecutionEvent>) {
    RunState::start(program, fuel)
}

/// Supplies the awaited input and runs to the next pause or termination.
pub fn resume(
    mut state: RunState,
    input: &str,
) -> Result<(RunState, Vec<ExecutionEvent>), (RunState, ResumeError)> {
    match state.resume(input) {
        Ok(events) => Ok((state, events)),
        Err(e) => Err((state, e)),
    }
}

/// Evaluates a condition against the current run.
pub fn eval_condition(condition: &Condition, state: &RunState) -> bool {
    match condition {
        Condition::VarEquals { variable, literal } => state
            .variables
            .get(variable)
            .is_some_and(|v| normalize_input(v) == normalize_input(literal)),
        Condition::UntilUserSays { word } => state
            .last_input
            .as_deref()
            .is_some_and(|last| last == normalize_input(word)),
        Condition::CountReached { n } => state
            .frames
            .iter()
            .rev()
            .find(|f| f.kind == FrameKind::Loop)
            .is_some_and(|f| f.iterations >= *n),
    }
}

pub fn normalize_input(text: &str) -> String {
    text.trim().to_lowercase()
}

impl RunState {
    pub fn start(program: impl Into<Arc<Program>>, fuel: u64) -> (Self, Vec<ExecutionEvent>) {
        let mut state = RunState {
            program: program.into(),
            variables: BTreeMap::new(),
            last_input: None,
            frames: vec![Frame {
                kind: FrameKind::Root,
                block: ActionPath::root(),
                pc: 0,
                iterations: 0,
            }],
            fuel,
            status: RunStatus::Running,
            input_target: None,
        };
        let mut events = Vec::new();
        state.run(&mut events);
        (state, events)
    }

    pub fn resume(&mut self, input: &str) -> Result<Vec<ExecutionEvent>, ResumeError> {
        if self.status != RunStatus::Paused {
            return Err(ResumeError::NotPaused);
        }
        let input = normalize_input(input);
        if let Some(target) = self.input_target.take() {
            self.variables.insert(target, input.clone());
        }
        self.last_input = Some(input);
        self.status = RunStatus::Running;
        let mut events = Vec::new();
        self.run(&mut events);
        Ok(events)
    }

    pub fn status(&self) -> RunStatus {
        self.status
    }

    pub fn is_paused(&self) -> bool {
        self.status == RunStatus::Paused
    }

    pub fn is_over(&self) -> bool {
        matches!(self.status, RunStatus::Finished | RunStatus::Failed)
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn variables(&self) -> &BTreeMap<String, String> {
        &self.variables
    }

    pub fn last_input(&self) -> Option<&str> {
        self.last_input.as_deref()
    }

    pub fn fuel(&self) -> u64 {
        self.fuel
    }

    /// Completed-iteration counts of the enclosing loops, outermost first.
    pub fn iteration_counters(&self) -> Vec<(ActionPath, u32)> {
        self.frames
            .iter()
            .filter(|f| f.kind == FrameKind::Loop)
            .map(|f| (f.block.clone(), f.iterations))
            .collect()
    }

    /// The next action to execute, or `None` at the end of the program.
    pub fn position(&self) -> Option<ActionPath> {
        let frame = self.frames.last()?;
        let list = self.list_of(frame);
        if frame.pc < list.len() {
            return Some(self.child_path(frame, frame.pc));
        }
        match frame.kind {
            FrameKind::Loop => Some(frame.block.clone()),
            _ => None,
        }
    }

    fn list_of(&self, frame: &Frame) -> &[Action] {
        if frame.kind == FrameKind::Root {
            return &self.program.actions;
        }
        match (frame.kind, self.program.node(&frame.block)) {
            (FrameKind::Then, Some(Action::If { then, .. })) => then,
            (FrameKind::Else, Some(Action::If { otherwise, .. })) => {
                otherwise.as_deref().unwrap_or(&[])
            }
            (FrameKind::Loop, Some(Action::LoopUntil { body, .. } | Action::RepeatTimes { body, .. })) => body,
            _ => unreachable!("frames always address blocks of the right kind"),
        }
    }

    fn child_path(&self, frame: &Frame, idx: usize) -> ActionPath {
        let offset = match (frame.kind, self.program.node(&frame.block)) {
            (FrameKind::Else, Some(Action::If { then, .. })) => then.len(),
            _ => 0,
        };
        frame.block.child(offset + idx)
    }

    fn fail(&mut self, events: &mut Vec<ExecutionEvent>, message: String, path: ActionPath) {
        events.push(ExecutionEvent::RuntimeError { message, path });
        self.frames.clear();
        self.status = RunStatus::Failed;
    }

    /// Spends one step. Returns false (after emitting the error) when the
    /// budget is already empty.
    fn spend(&mut self, events: &mut Vec<ExecutionEvent>, path: &ActionPath) -> bool {
        if self.fuel == 0 {
            self.fail(events, BUDGET_EXHAUSTED.to_string(), path.clone());
            return false;
        }
        self.fuel -= 1;
        true
    }

    fn loop_exits(&self, action: &Action, iterations: u32) -> bool {
        match action {
            Action::LoopUntil { until, .. } => {
                self.last_input.as_deref() == Some(normalize_input(until).as_str())
            }
            Action::RepeatTimes { times, .. } => iterations >= *times,
            _ => unreachable!("only loops are checked"),
        }
    }

    fn value(&self, expr: &ValueExpr) -> Result<Option<String>, String> {
        match expr {
            ValueExpr::Literal { value } => Ok(Some(value.clone())),
            ValueExpr::Variable { name } => self
                .variables
                .get(name)
                .cloned()
                .map(Some)
                .ok_or_else(|| format!("there is no variable called {name}")),
            ValueExpr::UserInput => Ok(None),
        }
    }

    fn run(&mut self, events: &mut Vec<ExecutionEvent>) {
        let program = Arc::clone(&self.program);
        while self.status == RunStatus::Running {
            let Some(frame) = self.frames.last().cloned() else {
                events.push(ExecutionEvent::Finished);
                self.status = RunStatus::Finished;
                return;
            };
            let list = self.list_of(&frame);
            if frame.pc >= list.len() {
                if frame.kind != FrameKind::Loop {
                    self.frames.pop();
                    continue;
                }
                // Iteration complete: re-check at the top.
                let iterations = frame.iterations + 1;
                if !self.spend(events, &frame.block) {
                    return;
                }
                let action = program.node(&frame.block).expect("loop frame addresses a loop");
                if self.loop_exits(action, iterations) {
                    self.frames.pop();
                } else {
                    let top = self.frames.last_mut().expect("frame exists");
                    top.iterations = iterations;
                    top.pc = 0;
                }
                continue;
            }

            let path = self.child_path(&frame, frame.pc);
            let action = list[frame.pc].clone();
            self.frames.last_mut().expect("frame exists").pc += 1;
            if !self.spend(events, &path) {
                return;
            }
            match action {
                Action::Say { text } => events.push(ExecutionEvent::SpeechOut { text }),
                Action::PlaySound { sound } => events.push(ExecutionEvent::SoundOut { sound }),
                Action::GetUserInput { save_as } => {
                    self.input_target = save_as;
                    self.status = RunStatus::Paused;
                    events.push(ExecutionEvent::InputRequest { prompt: None });
                }
                Action::CreateVariable { name, initial: expr }
                | Action::SetVariable { name, value: expr } => match self.value(&expr) {
                    Ok(Some(v)) => {
                        self.variables.insert(name, v);
                    }
                    Ok(None) => {
                        self.input_target = Some(name);
                        self.status = RunStatus::Paused;
                        events.push(ExecutionEvent::InputRequest { prompt: None });
                    }
                    Err(message) => self.fail(events, message, path),
                },
                Action::If {
                    condition,
                    otherwise,
                    ..
                } => {
                    let kind = if eval_condition(&condition, self) {
                        Some(FrameKind::Then)
                    } else if otherwise.is_some() {
                        Some(FrameKind::Else)
                    } else {
                        None
                    };
                    if let Some(kind) = kind {
                        self.frames.push(Frame {
                            kind,
                            block: path,
                            pc: 0,
                            iterations: 0,
                        });
                    }
                }
                ref looped @ (Action::LoopUntil { .. } | Action::RepeatTimes { .. }) => {
                    if !self.loop_exits(looped, 0) {
                        self.frames.push(Frame {
                            kind: FrameKind::Loop,
                            block: path,
                            pc: 0,
                            iterations: 0,
                        });
                    }
                }
            }
        }
    }
}
