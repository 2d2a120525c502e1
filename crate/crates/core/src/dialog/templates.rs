use std::collections::BTreeMap;
use std::path::Path;

use regex::Regex;
use serde::Deserialize;
use thiserror::Error;

pub const DEFAULT_TEMPLATES: &str = include_str!("../../resources/responses.toml");

pub const DEFAULT_STYLE: &str = "default";

macro_rules! situations {
    ($($variant:ident => $id:literal [$($ph:literal),*]),* $(,)?) => {
        /// Every situation the agent can respond to.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Situation {
            $($variant),*
        }

        impl Situation {
            pub const ALL: &'static [Situation] = &[$(Situation::$variant),*];

            pub fn id(self) -> &'static str {
                match self {
                    $(Situation::$variant => $id),*
                }
            }

            pub fn placeholders(self) -> &'static [&'static str] {
                match self {
                    $(Situation::$variant => &[$($ph),*]),*
                }
            }
        }
    };
}

situations! {
    NotUnderstoodHome => "not_understood_home" [],
    NeedProgram => "need_program" [],
    ProgramNotFound => "program_not_found" ["name"],
    UnexpectedAnswer => "unexpected_answer" [],
    AskProgramName => "ask_program_name" [],
    NameTaken => "name_taken" ["name"],
    ProgramCreated => "program_created" ["name"],
    AlreadyBuilding => "already_building" ["name"],
    NotUnderstoodBuilding => "not_understood_building" [],
    Said => "said" ["text"],
    SoundAdded => "sound_added" ["sound"],
    UnknownSound => "unknown_sound" ["sound", "sounds"],
    InputSaved => "input_saved" ["name"],
    InputUnsaved => "input_unsaved" [],
    AskVariableName => "ask_variable_name" [],
    AskVariableValue => "ask_variable_value" ["name"],
    VariableCreated => "variable_created" ["name", "value"],
    VariableSet => "variable_set" ["name", "value"],
    UnknownVariable => "unknown_variable" ["name"],
    AskLoopCondition => "ask_loop_condition" [],
    BadLoopCondition => "bad_loop_condition" [],
    LoopOpened => "loop_opened" ["word"],
    RepeatOpened => "repeat_opened" ["n"],
    LoopClosed => "loop_closed" [],
    NoOpenLoop => "no_open_loop" [],
    ConditionalOpened => "conditional_opened" ["variable", "literal"],
    ConditionalClosed => "conditional_closed" [],
    NoOpenConditional => "no_open_conditional" [],
    CloseConditionalFirst => "close_conditional_first" [],
    AskElse => "ask_else" ["variable", "literal"],
    AskElseAction => "ask_else_action" ["variable", "literal"],
    YesOrNo => "yes_or_no" [],
    BadElseAction => "bad_else_action" [],
    ConditionalAdded => "conditional_added" [],
    TooDeep => "too_deep" [],
    Done => "done" ["name"],
    DoneOpenLoop => "done_open_loop" [],
    DoneOpenConditional => "done_open_conditional" [],
    InvalidProgram => "invalid_program" ["name", "problem"],
    FinishBeforeRun => "finish_before_run" ["name"],
    PendingGoal => "pending_goal" [],
    RunStarted => "run_started" ["name"],
    RunFinished => "run_finished" ["name"],
    RunFailed => "run_failed" ["name", "message"],
    RunInProgress => "run_in_progress" ["name"],
    RunBusy => "run_busy" [],
    Reset => "reset" [],
    Help => "help" ["phrases"],
    TransparencyHow => "transparency_how" [],
    TransparencyWhy => "transparency_why" ["heard", "nearest"],
    TransparencyWhyNone => "transparency_why_none" [],
    TransparencyLearning => "transparency_learning" [],
    TransparencyVoice => "transparency_voice" [],
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("reading templates {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("template file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("template file: unsupported version {0}")]
    Version(u32),
    #[error("template file: style `{DEFAULT_STYLE}` is missing situation `{0}`")]
    Missing(&'static str),
    #[error("template file: [{style}] has unknown situation `{id}`")]
    UnknownSituation { style: String, id: String },
    #[error("template file: [{style}] {id} uses unknown placeholder `{{{placeholder}}}`")]
    UnknownPlaceholder {
        style: String,
        id: String,
        placeholder: String,
    },
    #[error("template file: [{style}] {id} is empty")]
    Empty { style: String, id: String },
    #[error("template file: unknown style `{0}`")]
    UnknownStyle(String),
}

#[derive(Deserialize)]
struct File {
    version: u32,
    #[serde(flatten)]
    styles: BTreeMap<String, BTreeMap<String, String>>,
}

/// Response text keyed by (situation, style).
#[derive(Debug, Clone)]
pub struct Templates {
    style: String,
    styles: BTreeMap<String, BTreeMap<String, String>>,
}

impl Default for Templates {
    fn default() -> Self {
        Templates::parse_source(DEFAULT_TEMPLATES).expect("bundled templates are valid")
    }
}

impl Templates {
    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        let src = std::fs::read_to_string(path).map_err(|source| TemplateError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_source(&src)
    }

    pub fn parse_source(src: &str) -> Result<Self, TemplateError> {
        let file: File = toml::from_str(src)?;
        if file.version != 1 {
            return Err(TemplateError::Version(file.version));
        }
        let placeholder = Regex::new(r"\{([a-z_]+)\}").expect("static regex");
        let default = file.styles.get(DEFAULT_STYLE);
        for situation in Situation::ALL {
            if !default.is_some_and(|d| d.contains_key(situation.id())) {
                return Err(TemplateError::Missing(situation.id()));
            }
        }
        for (style, table) in &file.styles {
            for (id, text) in table {
                let situation = Situation::ALL
                    .iter()
                    .find(|s| s.id() == id)
                    .ok_or_else(|| TemplateError::UnknownSituation {
                        style: style.clone(),
                        id: id.clone(),
                    })?;
                if text.trim().is_empty() {
                    return Err(TemplateError::Empty {
                        style: style.clone(),
                        id: id.clone(),
                    });
                }
                for cap in placeholder.captures_iter(text) {
                    if !situation.placeholders().contains(&&cap[1]) {
                        return Err(TemplateError::UnknownPlaceholder {
                            style: style.clone(),
                            id: id.clone(),
                            placeholder: cap[1].to_string(),
                        });
                    }
                }
            }
        }
        Ok(Self {
            style: DEFAULT_STYLE.to_string(),
            styles: file.styles,
        })
    }

    pub fn with_style(mut self, style: &str) -> Result<Self, TemplateError> {
        if !self.styles.contains_key(style) {
            return Err(TemplateError::UnknownStyle(style.to_string()));
        }
        self.style = style.to_string();
        Ok(self)
    }

    pub fn raw(&self, situation: Situation) -> &str {
        self.styles
            .get(&self.style)
            .and_then(|t| t.get(situation.id()))
            .or_else(|| self.styles[DEFAULT_STYLE].get(situation.id()))
            .expect("default style is complete")
    }

    pub fn render(&self, situation: Situation, args: &[(&str, &str)]) -> String {
        let mut text = self.raw(situation).to_string();
        for (key, value) in args {
            text = text.replace(&format!("{{{key}}}"), value);
        }
        text
    }
}
