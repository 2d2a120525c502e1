//! Constrained natural-language understanding.
//!
//! Utterances are normalized and matched against a data-driven table of
//! phrase patterns (see [`Grammar`]). The dialog manager passes an
//! [`Expectation`] with every call so that free-form answers such as a
//! program name are not mistaken for commands.

mod table;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use table::{Grammar, GrammarError, DEFAULT_GRAMMAR};

/// How an utterance reached the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Voice,
    Text,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("utterance is empty")]
pub struct EmptyUtterance;

/// One transcribed user input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    text: String,
    pub modality: Modality,
    /// Milliseconds since the session started.
    pub timestamp_ms: u64,
}

impl Utterance {
    pub fn new(
        text: impl Into<String>,
        modality: Modality,
        timestamp_ms: u64,
    ) -> Result<Self, EmptyUtterance> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(EmptyUtterance);
        }
        Ok(Self {
            text,
            modality,
            timestamp_ms,
        })
    }

    /// Shorthand for a typed utterance at time zero.
    pub fn text(text: impl Into<String>) -> Result<Self, EmptyUtterance> {
        Self::new(text, Modality::Text, 0)
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IntentKind {
    CreateProcedure,
    RunProgram,
    CreateVariable,
    SetVariable,
    CreateLoop,
    RepeatTimes,
    CloseLoop,
    OpenConditional,
    CloseConditional,
    SayPhrase,
    PlaySound,
    GetUserInput,
    Done,
    Reset,
    AskHelp,
    AskTransparency,
    LiteralAnswer,
    ConditionAnswer,
    Affirm,
    Deny,
    NotUnderstood,
}

impl IntentKind {
    pub const ALL: [IntentKind; 21] = [
        IntentKind::CreateProcedure,
        IntentKind::RunProgram,
        IntentKind::CreateVariable,
        IntentKind::SetVariable,
        IntentKind::CreateLoop,
        IntentKind::RepeatTimes,
        IntentKind::CloseLoop,
        IntentKind::OpenConditional,
        IntentKind::CloseConditional,
        IntentKind::SayPhrase,
        IntentKind::PlaySound,
        IntentKind::GetUserInput,
        IntentKind::Done,
        IntentKind::Reset,
        IntentKind::AskHelp,
        IntentKind::AskTransparency,
        IntentKind::LiteralAnswer,
        IntentKind::ConditionAnswer,
        IntentKind::Affirm,
        IntentKind::Deny,
        IntentKind::NotUnderstood,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IntentKind::CreateProcedure => "CreateProcedure",
            IntentKind::RunProgram => "RunProgram",
            IntentKind::CreateVariable => "CreateVariable",
            IntentKind::SetVariable => "SetVariable",
            IntentKind::CreateLoop => "CreateLoop",
            IntentKind::RepeatTimes => "RepeatTimes",
            IntentKind::CloseLoop => "CloseLoop",
            IntentKind::OpenConditional => "OpenConditional",
            IntentKind::CloseConditional => "CloseConditional",
            IntentKind::SayPhrase => "SayPhrase",
            IntentKind::PlaySound => "PlaySound",
            IntentKind::GetUserInput => "GetUserInput",
            IntentKind::Done => "Done",
            IntentKind::Reset => "Reset",
            IntentKind::AskHelp => "AskHelp",
            IntentKind::AskTransparency => "AskTransparency",
            IntentKind::LiteralAnswer => "LiteralAnswer",
            IntentKind::ConditionAnswer => "ConditionAnswer",
            IntentKind::Affirm => "Affirm",
            IntentKind::Deny => "Deny",
            IntentKind::NotUnderstood => "NotUnderstood",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Slots a frame of this kind may carry.
    pub fn legal_slots(self) -> &'static [SlotName] {
        use SlotName::*;
        match self {
            IntentKind::CreateProcedure => &[Name],
            IntentKind::RunProgram => &[Name],
            IntentKind::CreateVariable => &[Name, Value],
            IntentKind::SetVariable => &[Name, Value],
            IntentKind::CreateLoop => &[Condition],
            IntentKind::RepeatTimes => &[N],
            IntentKind::OpenConditional => &[Variable, Literal, InlineActionKind, InlineActionArg],
            IntentKind::SayPhrase => &[Text],
            IntentKind::PlaySound => &[Sound],
            IntentKind::GetUserInput => &[SaveAs],
            IntentKind::AskTransparency => &[Question],
            IntentKind::LiteralAnswer => &[Value],
            IntentKind::ConditionAnswer => &[Condition],
            _ => &[],
        }
    }

    /// Slots that must be present for a parsed frame of this kind.
    pub fn mandatory_slots(self) -> &'static [SlotName] {
        use SlotName::*;
        match self {
            IntentKind::RunProgram => &[Name],
            IntentKind::SetVariable => &[Name, Value],
            IntentKind::RepeatTimes => &[N],
            IntentKind::OpenConditional => &[Variable, Literal],
            IntentKind::SayPhrase => &[Text],
            IntentKind::PlaySound => &[Sound],
            IntentKind::AskTransparency => &[Question],
            IntentKind::LiteralAnswer => &[Value],
            IntentKind::ConditionAnswer => &[Condition],
            _ => &[],
        }
    }

    /// Commands honored while the agent waits for an answer.
    pub fn is_escape(self) -> bool {
        matches!(
            self,
            IntentKind::Reset | IntentKind::AskHelp | IntentKind::AskTransparency
        )
    }
}

impl fmt::Display for IntentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotName {
    Name,
    Value,
    Condition,
    N,
    Variable,
    Literal,
    InlineActionKind,
    InlineActionArg,
    Text,
    Sound,
    SaveAs,
    Question,
    // Dialog-only slots, never produced by the parser.
    ElseWanted,
    ElseActionKind,
    ElseActionArg,
}

impl SlotName {
    pub fn name(self) -> &'static str {
        match self {
            SlotName::Name => "name",
            SlotName::Value => "value",
            SlotName::Condition => "condition",
            SlotName::N => "n",
            SlotName::Variable => "variable",
            SlotName::Literal => "literal",
            SlotName::InlineActionKind => "inline_action_kind",
            SlotName::InlineActionArg => "inline_action_arg",
            SlotName::Text => "text",
            SlotName::Sound => "sound",
            SlotName::SaveAs => "save_as",
            SlotName::Question => "question",
            SlotName::ElseWanted => "else_wanted",
            SlotName::ElseActionKind => "else_action_kind",
            SlotName::ElseActionArg => "else_action_arg",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        use SlotName::*;
        [
            Name,
            Value,
            Condition,
            N,
            Variable,
            Literal,
            InlineActionKind,
            InlineActionArg,
            Text,
            Sound,
            SaveAs,
            Question,
            ElseWanted,
            ElseActionKind,
            ElseActionArg,
        ]
        .into_iter()
        .find(|s| s.name() == name)
    }
}

impl fmt::Display for SlotName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A predicate over the running program's state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Condition {
    /// The most recent user input equals `word`.
    UntilUserSays { word: String },
    /// The named variable currently holds `literal`.
    VarEquals { variable: String, literal: String },
    /// The innermost enclosing loop has completed at least `n` iterations.
    CountReached { n: u32 },
}

impl Condition {
    pub fn until_user_says(word: &str) -> Self {
        Condition::UntilUserSays {
            word: normalize_value(word),
        }
    }

    pub fn var_equals(variable: &str, literal: &str) -> Self {
        Condition::VarEquals {
            variable: normalize_value(variable),
            literal: normalize_value(literal),
        }
    }

    /// Word and literal non-empty, `n` at least one.
    pub fn is_well_formed(&self) -> bool {
        match self {
            Condition::UntilUserSays { word } => is_normal_word(word),
            Condition::VarEquals { variable, literal } => {
                is_normal_word(variable) && is_normal_word(literal)
            }
            Condition::CountReached { n } => *n >= 1,
        }
    }
}

fn is_normal_word(s: &str) -> bool {
    !s.is_empty() && s.trim() == s && s.to_lowercase() == s
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::UntilUserSays { word } => write!(f, "until you say {word}"),
            Condition::VarEquals { variable, literal } => write!(f, "{variable} is {literal}"),
            Condition::CountReached { n } => write!(f, "{n} times"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SlotValue {
    Text(String),
    Count(u32),
    Condition(Condition),
}

impl SlotValue {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            SlotValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_count(&self) -> Option<u32> {
        match self {
            SlotValue::Count(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_condition(&self) -> Option<&Condition> {
        match self {
            SlotValue::Condition(c) => Some(c),
            _ => None,
        }
    }
}

impl From<&str> for SlotValue {
    fn from(s: &str) -> Self {
        SlotValue::Text(s.to_string())
    }
}

/// What the dialog manager is waiting for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    None,
    Name,
    Value,
    Condition,
    YesNo,
}

impl Expectation {
    pub const ALL: [Expectation; 5] = [
        Expectation::None,
        Expectation::Name,
        Expectation::Value,
        Expectation::Condition,
        Expectation::YesNo,
    ];
}

/// The parsed meaning of one utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntentFrame {
    pub kind: IntentKind,
    pub slots: BTreeMap<SlotName, SlotValue>,
    pub raw: Utterance,
}

impl IntentFrame {
    pub fn new(kind: IntentKind, raw: Utterance) -> Self {
        Self {
            kind,
            slots: BTreeMap::new(),
            raw,
        }
    }

    /// Builds a frame directly, bypassing the parser. Used by callers that
    /// already know the intent (wire-level `reset`/`help`, tests).
    pub fn synthetic(kind: IntentKind, slots: &[(SlotName, SlotValue)]) -> Self {
        let raw = Utterance::text(kind.name()).expect("intent names are non-empty");
        Self {
            kind,
            slots: slots.iter().cloned().collect(),
            raw,
        }
    }

    pub fn with(mut self, slot: SlotName, value: impl Into<SlotValue>) -> Self {
        self.slots.insert(slot, value.into());
        self
    }

    pub fn text(&self, slot: SlotName) -> Option<&str> {
        self.slots.get(&slot).and_then(SlotValue::as_text)
    }

    pub fn count(&self, slot: SlotName) -> Option<u32> {
        self.slots.get(&slot).and_then(SlotValue::as_count)
    }

    pub fn condition(&self) -> Option<&Condition> {
        self.slots.get(&SlotName::Condition).and_then(SlotValue::as_condition)
    }
}

/// Lowercase, trim, collapse interior whitespace and strip terminal
/// punctuation.
pub fn normalize(text: &str) -> String {
    let lowered = text
        .chars()
        .map(|c| match c {
            '\u{2018}' | '\u{2019}' => '\'',
            '\u{201C}' | '\u{201D}' => '"',
            c => c,
        })
        .flat_map(char::to_lowercase)
        .collect::<String>();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_end_matches(['.', '!', '?', ';', ':', ','])
        .trim_end()
        .to_string()
}

/// Normalizes a captured slot value: [`normalize`], then strips
/// surrounding quotes.
pub fn normalize_value(text: &str) -> String {
    let n = normalize(text);
    let unquoted = n.trim_matches(['\'', '"']);
    normalize(unquoted)
}
