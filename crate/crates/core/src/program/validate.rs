use serde::Serialize;

use super::{Action, ActionPath, Condition, Program, SoundCatalog, ValueExpr, MAX_DEPTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    EmptyName,
    UndefinedVariable,
    DuplicateVariable,
    UnknownSound,
    MalformedCondition,
    CountOutsideLoop,
    InvalidCount,
    DepthExceeded,
    UnclosedBlock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub path: ActionPath,
    pub kind: DiagnosticKind,
    pub message: String,
}

/// Checks a finished program. An empty result means every program
/// invariant holds and the interpreter can only fail by running out of
/// steps.
///
/// Variables are block scoped: a definition is visible to later siblings
/// and to their descendants, never outside the block that contains it.
pub fn validate(program: &Program, sounds: &SoundCatalog) -> Vec<Diagnostic> {
    let mut checker = Checker {
        sounds,
        out: Vec::new(),
    };
    if program.name.trim().is_empty() {
        checker.report(ActionPath::root(), DiagnosticKind::EmptyName, "the program has no name".into());
    }
    checker.walk(&program.actions, &ActionPath::root(), 0, &mut Vec::new(), 0, 0);
    checker.out
}

struct Checker<'a> {
    sounds: &'a SoundCatalog,
    out: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn report(&mut self, path: ActionPath, kind: DiagnosticKind, message: String) {
        self.out.push(Diagnostic { path, kind, message });
    }

    fn require(&mut self, path: &ActionPath, scope: &[String], name: &str) {
        if name.trim().is_empty() {
            self.report(path.clone(), DiagnosticKind::EmptyName, "a variable reference has no name".into());
        } else if !scope.iter().any(|v| v == name) {
            self.report(
                path.clone(),
                DiagnosticKind::UndefinedVariable,
                format!("{name} is used before it is created"),
            );
        }
    }

    fn expr(&mut self, path: &ActionPath, scope: &[String], expr: &ValueExpr) {
        if let ValueExpr::Variable { name } = expr {
            self.require(path, scope, name);
        }
    }

    fn define(&mut self, path: &ActionPath, scope: &mut Vec<String>, name: &str) {
        if name.trim().is_empty() {
            self.report(path.clone(), DiagnosticKind::EmptyName, "a variable has no name".into());
        } else if !scope.iter().any(|v| v == name) {
            scope.push(name.to_string());
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn walk(
        &mut self,
        list: &[Action],
        parent: &ActionPath,
        offset: usize,
        scope: &mut Vec<String>,
        loops: usize,
        depth: usize,
    ) {
        for (i, action) in list.iter().enumerate() {
            let path = parent.child(offset + i);
            if action.is_block() && depth + 1 > MAX_DEPTH {
                self.report(
                    path,
                    DiagnosticKind::DepthExceeded,
                    format!("blocks are nested more than {MAX_DEPTH} deep"),
                );
                continue;
            }
            match action {
                Action::Say { .. } => {}
                Action::PlaySound { sound } => {
                    if !self.sounds.contains(sound) {
                        self.report(path, DiagnosticKind::UnknownSound, format!("there is no {sound} sound"));
                    }
                }
                Action::GetUserInput { save_as } => {
                    if let Some(name) = save_as {
                        self.define(&path, scope, name);
                    }
                }
                Action::CreateVariable { name, initial } => {
                    self.expr(&path, scope, initial);
                    if scope.iter().any(|v| v == name) {
                        self.report(
                            path.clone(),
                            DiagnosticKind::DuplicateVariable,
                            format!("the name, {name}, has already been used"),
                        );
                    }
                    self.define(&path, scope, name);
                }
                Action::SetVariable { name, value } => {
                    self.expr(&path, scope, value);
                    self.require(&path, scope, name);
                }
                Action::If {
                    condition,
                    then,
                    otherwise,
                } => {
                    self.condition(&path, scope, condition, loops);
                    self.walk(then, &path, 0, &mut scope.clone(), loops, depth + 1);
                    if let Some(otherwise) = otherwise {
                        self.walk(otherwise, &path, then.len(), &mut scope.clone(), loops, depth + 1);
                    }
                }
                Action::LoopUntil { until, body } => {
                    if !(Condition::UntilUserSays { word: until.clone() }).is_well_formed() {
                        self.report(
                            path.clone(),
                            DiagnosticKind::MalformedCondition,
                            "the loop's stop word must be a non-empty lowercase word".into(),
                        );
                    }
                    self.walk(body, &path, 0, &mut scope.clone(), loops + 1, depth + 1);
                }
                Action::RepeatTimes { times, body } => {
                    if *times == 0 {
                        self.report(path.clone(), DiagnosticKind::InvalidCount, "a loop must run at least once".into());
                    }
                    self.walk(body, &path, 0, &mut scope.clone(), loops + 1, depth + 1);
                }
            }
        }
    }

    fn condition(&mut self, path: &ActionPath, scope: &[String], condition: &Condition, loops: usize) {
        if !condition.is_well_formed() {
            self.report(
                path.clone(),
                DiagnosticKind::MalformedCondition,
                format!("the condition `{condition}` is malformed"),
            );
        }
        match condition {
            Condition::VarEquals { variable, .. } => self.require(path, scope, variable),
            Condition::CountReached { .. } if loops == 0 => self.report(
                path.clone(),
                DiagnosticKind::CountOutsideLoop,
                "counting iterations only works inside a loop".into(),
            ),
            _ => {}
        }
    }
}
