use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{validate, Action, Condition, Diagnostic, DiagnosticKind, Program, SoundCatalog, MAX_DEPTH};
use super::ActionPath;

/// Header of a block opened at the cursor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "block", rename_all = "snake_case")]
pub enum BlockHeader {
    LoopUntil { until: String },
    RepeatTimes { times: u32 },
    If { condition: Condition },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    LoopUntil,
    RepeatTimes,
    If,
}

impl BlockKind {
    pub fn is_loop(self) -> bool {
        matches!(self, BlockKind::LoopUntil | BlockKind::RepeatTimes)
    }
}

/// Dialog manager to program editor channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum EditorCommand {
    AppendAction { action: Action },
    OpenBlock { header: BlockHeader },
    CloseBlock,
    FinalizeProgram,
    DiscardDraft,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EditError {
    #[error("there is no open block to close")]
    NoOpenBlock,
    #[error("blocks cannot be nested more than {MAX_DEPTH} deep")]
    DepthExceeded,
    #[error("the name, {0}, has already been used")]
    NameCollision(String),
    #[error("{0} block(s) are still open")]
    UnclosedBlocks(usize),
    #[error("the program is already finished")]
    Finalized,
}

/// A program under construction plus the editing cursor.
///
/// The cursor is the stack of open blocks; each entry is the index of the
/// open block in its parent list. Editing is append-only, so an open block
/// is always the last element of its parent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Draft {
    program: Program,
    cursor: Vec<usize>,
    finalized: bool,
}

impl Draft {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            program: Program::new(name, Vec::new()),
            cursor: Vec::new(),
            finalized: false,
        }
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn into_program(self) -> Program {
        self.program
    }

    pub fn name(&self) -> &str {
        &self.program.name
    }

    pub fn depth(&self) -> usize {
        self.cursor.len()
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }

    /// Path of the list new actions are appended to.
    pub fn cursor_path(&self) -> ActionPath {
        ActionPath(self.cursor.clone())
    }

    /// Kinds of the open blocks, outermost first.
    pub fn open_blocks(&self) -> Vec<BlockKind> {
        let mut out = Vec::new();
        let mut list = &self.program.actions;
        for &idx in &self.cursor {
            let (kind, body) = match &list[idx] {
                Action::If { then, .. } => (BlockKind::If, then),
                Action::LoopUntil { body, .. } => (BlockKind::LoopUntil, body),
                Action::RepeatTimes { body, .. } => (BlockKind::RepeatTimes, body),
                _ => unreachable!("cursor only addresses blocks"),
            };
            out.push(kind);
            list = body;
        }
        out
    }

    pub fn innermost_block(&self) -> Option<BlockKind> {
        self.open_blocks().last().copied()
    }

    /// Variables an action appended at the cursor may refer to.
    pub fn visible_variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut list = &self.program.actions;
        collect_defs(list, &mut out);
        for &idx in &self.cursor {
            list = match &list[idx] {
                Action::If { then, .. } => then,
                Action::LoopUntil { body, .. } | Action::RepeatTimes { body, .. } => body,
                _ => unreachable!("cursor only addresses blocks"),
            };
            collect_defs(list, &mut out);
        }
        out
    }

    pub fn is_visible(&self, variable: &str) -> bool {
        self.visible_variables().iter().any(|v| v == variable)
    }

    fn current_list(&mut self) -> &mut Vec<Action> {
        let mut list = &mut self.program.actions;
        for &idx in &self.cursor {
            list = match &mut list[idx] {
                Action::If { then, .. } => then,
                Action::LoopUntil { body, .. } | Action::RepeatTimes { body, .. } => body,
                _ => unreachable!("cursor only addresses blocks"),
            };
        }
        list
    }

    /// Applies one editor command. On error the draft is unchanged.
    pub fn apply(&mut self, cmd: &EditorCommand) -> Result<(), EditError> {
        if self.finalized && !matches!(cmd, EditorCommand::DiscardDraft) {
            return Err(EditError::Finalized);
        }
        match cmd {
            EditorCommand::AppendAction { action } => {
                if let Action::CreateVariable { name, .. } = action {
                    if self.is_visible(name) {
                        return Err(EditError::NameCollision(name.clone()));
                    }
                }
                if self.depth() + block_depth(action) > MAX_DEPTH {
                    return Err(EditError::DepthExceeded);
                }
                self.current_list().push(action.clone());
            }
            EditorCommand::OpenBlock { header } => {
                if self.depth() >= MAX_DEPTH {
                    return Err(EditError::DepthExceeded);
                }
                let block = match header {
                    BlockHeader::LoopUntil { until } => Action::LoopUntil {
                        until: until.clone(),
                        body: Vec::new(),
                    },
                    BlockHeader::RepeatTimes { times } => Action::RepeatTimes {
                        times: *times,
                        body: Vec::new(),
                    },
                    BlockHeader::If { condition } => Action::If {
                        condition: condition.clone(),
                        then: Vec::new(),
                        otherwise: None,
                    },
                };
                let list = self.current_list();
                list.push(block);
                let idx = list.len() - 1;
                self.cursor.push(idx);
            }
            EditorCommand::CloseBlock => {
                self.cursor.pop().ok_or(EditError::NoOpenBlock)?;
            }
            EditorCommand::FinalizeProgram => {
                if !self.cursor.is_empty() {
                    return Err(EditError::UnclosedBlocks(self.cursor.len()));
                }
                self.finalized = true;
            }
            EditorCommand::DiscardDraft => {
                self.program.actions.clear();
                self.cursor.clear();
                self.finalized = false;
            }
        }
        Ok(())
    }

    /// Program diagnostics plus one `UnclosedBlock` per open block.
    pub fn validate(&self, sounds: &SoundCatalog) -> Vec<Diagnostic> {
        let mut out = validate(&self.program, sounds);
        for depth in 0..self.cursor.len() {
            out.push(Diagnostic {
                path: ActionPath(self.cursor[..=depth].to_vec()),
                kind: DiagnosticKind::UnclosedBlock,
                message: "this block was never closed".into(),
            });
        }
        out
    }
}

fn collect_defs(list: &[Action], out: &mut Vec<String>) {
    for action in list {
        let name = match action {
            Action::CreateVariable { name, .. } => name,
            Action::GetUserInput { save_as: Some(name) } => name,
            _ => continue,
        };
        if !out.contains(name) {
            out.push(name.clone());
        }
    }
}

/// Number of nested blocks inside `action`, counting itself.
pub(crate) fn block_depth(action: &Action) -> usize {
    let max_child = |list: &[Action]| list.iter().map(block_depth).max().unwrap_or(0);
    match action {
        Action::If {
            then, otherwise, ..
        } => 1 + max_child(then).max(otherwise.as_deref().map(max_child).unwrap_or(0)),
        Action::LoopUntil { body, .. } | Action::RepeatTimes { body, .. } => 1 + max_child(body),
        _ => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::ValueExpr;

    fn append(a: Action) -> EditorCommand {
        EditorCommand::AppendAction { action: a }
    }

    #[test]
    fn append_say_to_empty_draft() {
        let mut d = Draft::new("hello");
        d.apply(&append(Action::say("hello world"))).unwrap();
        assert_eq!(d.program().actions, vec![Action::say("hello world")]);
    }

    #[test]
    fn close_without_open_block() {
        let mut d = Draft::new("x");
        assert_eq!(d.apply(&EditorCommand::CloseBlock), Err(EditError::NoOpenBlock));
        assert_eq!(d, Draft::new("x"));
    }

    #[test]
    fn loop_holds_input_action() {
        let mut d = Draft::new("x");
        d.apply(&EditorCommand::OpenBlock {
            header: BlockHeader::LoopUntil { until: "stop".into() },
        })
        .unwrap();
        assert_eq!(d.depth(), 1);
        d.apply(&append(Action::input(Some("animal")))).unwrap();
        d.apply(&EditorCommand::CloseBlock).unwrap();
        assert_eq!(d.depth(), 0);
        assert_eq!(
            d.program().actions,
            vec![Action::LoopUntil {
                until: "stop".into(),
                body: vec![Action::input(Some("animal"))],
            }]
        );
    }

    #[test]
    fn depth_guard() {
        let mut d = Draft::new("deep");
        let open = EditorCommand::OpenBlock {
            header: BlockHeader::RepeatTimes { times: 1 },
        };
        for _ in 0..MAX_DEPTH {
            d.apply(&open).unwrap();
        }
        assert_eq!(d.apply(&open), Err(EditError::DepthExceeded));
        assert_eq!(d.depth(), MAX_DEPTH);
    }

    #[test]
    fn create_variable_collision() {
        let mut d = Draft::new("x");
        let create = append(Action::CreateVariable {
            name: "score".into(),
            initial: ValueExpr::literal("0"),
        });
        d.apply(&create).unwrap();
        assert_eq!(d.apply(&create), Err(EditError::NameCollision("score".into())));
        d.apply(&append(Action::input(Some("animal")))).unwrap();
        assert_eq!(d.visible_variables(), vec!["score", "animal"]);
    }

    #[test]
    fn finalize_requires_closed_blocks() {
        let mut d = Draft::new("x");
        d.apply(&EditorCommand::OpenBlock {
            header: BlockHeader::If {
                condition: Condition::var_equals("a", "b"),
            },
        })
        .unwrap();
        assert_eq!(d.apply(&EditorCommand::FinalizeProgram), Err(EditError::UnclosedBlocks(1)));
        assert_eq!(d.innermost_block(), Some(BlockKind::If));
        d.apply(&EditorCommand::CloseBlock).unwrap();
        d.apply(&EditorCommand::FinalizeProgram).unwrap();
        assert_eq!(d.apply(&append(Action::say("late"))), Err(EditError::Finalized));
    }

    #[test]
    fn discard_clears_everything() {
        let mut d = Draft::new("x");
        d.apply(&EditorCommand::OpenBlock {
            header: BlockHeader::RepeatTimes { times: 2 },
        })
        .unwrap();
        d.apply(&EditorCommand::DiscardDraft).unwrap();
        assert_eq!(d, Draft::new("x"));
    }
}
