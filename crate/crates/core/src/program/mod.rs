//! The action-list program representation and the editor that builds it.

mod draft;
mod json;
mod pseudocode;
mod sounds;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use crate::grammar::Condition;
pub use draft::{BlockHeader, BlockKind, Draft, EditError, EditorCommand};
pub use json::{encode_json, export_json, import_json, SchemaViolation, FORMAT_VERSION};
pub use pseudocode::export_pseudocode;
pub use sounds::{SoundCatalog, SoundCatalogError};
pub use validate::{validate, Diagnostic, DiagnosticKind};

/// Maximum number of nested blocks.
pub const MAX_DEPTH: usize = 32;

/// A named list of actions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    pub actions: Vec<Action>,
}

impl Program {
    pub fn new(name: impl Into<String>, actions: Vec<Action>) -> Self {
        Self {
            name: name.into(),
            actions,
        }
    }

    /// The action addressed by `path`, if any.
    pub fn node(&self, path: &ActionPath) -> Option<&Action> {
        let (first, rest) = path.0.split_first()?;
        let mut action = self.actions.get(*first)?;
        for &idx in rest {
            action = action.child(idx)?;
        }
        Some(action)
    }
}

/// Something the agent does when the program runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    Say {
        text: String,
    },
    PlaySound {
        sound: String,
    },
    GetUserInput {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        save_as: Option<String>,
    },
    CreateVariable {
        name: String,
        initial: ValueExpr,
    },
    SetVariable {
        name: String,
        value: ValueExpr,
    },
    If {
        condition: Condition,
        then: Vec<Action>,
        #[serde(rename = "else", default, skip_serializing_if = "Option::is_none")]
        otherwise: Option<Vec<Action>>,
    },
    LoopUntil {
        until: String,
        body: Vec<Action>,
    },
    RepeatTimes {
        times: u32,
        body: Vec<Action>,
    },
}

impl Action {
    pub fn say(text: &str) -> Self {
        Action::Say { text: text.into() }
    }

    pub fn play(sound: &str) -> Self {
        Action::PlaySound {
            sound: sound.into(),
        }
    }

    pub fn input(save_as: Option<&str>) -> Self {
        Action::GetUserInput {
            save_as: save_as.map(str::to_string),
        }
    }

    pub fn is_block(&self) -> bool {
        matches!(
            self,
            Action::If { .. } | Action::LoopUntil { .. } | Action::RepeatTimes { .. }
        )
    }

    /// Child at `idx`. An `If` numbers its `then` branch first and its
    /// `else` branch after it.
    pub fn child(&self, idx: usize) -> Option<&Action> {
        match self {
            Action::If {
                then, otherwise, ..
            } => then.get(idx).or_else(|| {
                otherwise
                    .as_ref()
                    .and_then(|e| e.get(idx.checked_sub(then.len())?))
            }),
            Action::LoopUntil { body, .. } | Action::RepeatTimes { body, .. } => body.get(idx),
            _ => None,
        }
    }
}

/// Right-hand side of a variable assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ValueExpr {
    Literal { value: String },
    Variable { name: String },
    UserInput,
}

impl ValueExpr {
    pub fn literal(value: &str) -> Self {
        ValueExpr::Literal {
            value: value.into(),
        }
    }

    pub fn variable(name: &str) -> Self {
        ValueExpr::Variable { name: name.into() }
    }

    /// Reads a spoken value: "user input" asks for input, "the value of x"
    /// or "variable x" refers to a variable, anything else is literal text.
    pub fn from_spoken(text: &str) -> Self {
        let text = text.trim();
        if text == "user input" || text == "the user input" {
            return ValueExpr::UserInput;
        }
        for prefix in ["the value of variable ", "the value of ", "variable "] {
            if let Some(name) = text.strip_prefix(prefix) {
                if !name.trim().is_empty() {
                    return ValueExpr::variable(name.trim());
                }
            }
        }
        ValueExpr::literal(text)
    }
}

impl fmt::Display for ValueExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueExpr::Literal { value } => f.write_str(value),
            ValueExpr::Variable { name } => write!(f, "the value of {name}"),
            ValueExpr::UserInput => f.write_str("user input"),
        }
    }
}

/// Address of an action: one index per nesting level.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionPath(pub Vec<usize>);

impl ActionPath {
    pub fn root() -> Self {
        Self::default()
    }

    pub fn child(&self, idx: usize) -> Self {
        let mut v = self.0.clone();
        v.push(idx);
        Self(v)
    }
}

impl fmt::Display for ActionPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("<program>");
        }
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        f.write_str(&parts.join("."))
    }
}
