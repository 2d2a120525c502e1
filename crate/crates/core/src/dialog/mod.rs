//! Conversation state, slot filling and response generation.
//!
//! [`DialogManager::handle_turn`] is a pure transition function over
//! [`AgentState`]. Editor commands it issues are applied to the state's
//! draft before the turn is returned and are also listed in the [`Turn`]
//! so callers can log or replay them.

mod templates;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::grammar::{
    Condition, Expectation, Grammar, IntentFrame, IntentKind, SlotName, SlotValue, Utterance,
};
use crate::interpreter::ExecutionEvent;
use crate::program::{
    encode_json, Action, ActionPath, BlockHeader, BlockKind, Draft, EditError, EditorCommand,
    Program, SoundCatalog, ValueExpr,
};

pub use templates::{Situation, TemplateError, Templates, DEFAULT_STYLE, DEFAULT_TEMPLATES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentStateKind {
    Home,
    Building,
    AwaitingSlot,
    Executing,
}

impl AgentStateKind {
    pub const ALL: [AgentStateKind; 4] = [
        AgentStateKind::Home,
        AgentStateKind::Building,
        AgentStateKind::AwaitingSlot,
        AgentStateKind::Executing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentStateKind::Home => "home",
            AgentStateKind::Building => "building",
            AgentStateKind::AwaitingSlot => "awaiting_slot",
            AgentStateKind::Executing => "executing",
        }
    }
}

impl fmt::Display for AgentStateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A requested operation and the slots collected for it so far.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserGoal {
    pub intent: IntentKind,
    pub required_slots: Vec<SlotName>,
    pub filled: BTreeMap<SlotName, SlotValue>,
}

impl UserGoal {
    pub fn new(intent: IntentKind) -> Self {
        Self {
            intent,
            required_slots: Self::required_for(intent).to_vec(),
            filled: BTreeMap::new(),
        }
    }

    /// Slots the agent asks for when the user leaves them out.
    pub fn required_for(intent: IntentKind) -> &'static [SlotName] {
        match intent {
            IntentKind::CreateProcedure => &[SlotName::Name],
            IntentKind::CreateVariable => &[SlotName::Name, SlotName::Value],
            IntentKind::CreateLoop => &[SlotName::Condition],
            IntentKind::OpenConditional => &[
                SlotName::ElseWanted,
                SlotName::ElseActionKind,
                SlotName::ElseActionArg,
            ],
            _ => &[],
        }
    }

    /// The next slot to ask for. Declining the else branch makes the
    /// remaining else slots unnecessary.
    pub fn next_unfilled(&self) -> Option<SlotName> {
        if self.text(SlotName::ElseWanted) == Some("no") {
            return None;
        }
        self.required_slots
            .iter()
            .copied()
            .find(|s| !self.filled.contains_key(s))
    }

    pub fn is_complete(&self) -> bool {
        self.next_unfilled().is_none()
    }

    pub fn text(&self, slot: SlotName) -> Option<&str> {
        self.filled.get(&slot).and_then(SlotValue::as_text)
    }

    fn fill(&mut self, slot: SlotName, value: SlotValue) {
        self.filled.insert(slot, value);
    }
}

/// The agent's pending work for one turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentGoal {
    AskSlot { slot: SlotName, prompt: String },
    ApplyEdit { command: EditorCommand },
    Respond { text: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentResponse {
    pub text: String,
    pub state_after: AgentStateKind,
    /// `encode_json` of the program in view: the draft, the program that
    /// was just finished, or the running program.
    pub program_snapshot: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct AgentState {
    pub draft: Option<Draft>,
    pub pending: Option<UserGoal>,
    pub executing: Option<Arc<Program>>,
    /// Raw text of the most recent not-understood utterance.
    pub last_not_understood: Option<String>,
}

impl AgentState {
    pub fn kind(&self) -> AgentStateKind {
        if self.executing.is_some() {
            AgentStateKind::Executing
        } else if self.pending.as_ref().is_some_and(|g| !g.is_complete()) {
            AgentStateKind::AwaitingSlot
        } else if self.draft.is_some() {
            AgentStateKind::Building
        } else {
            AgentStateKind::Home
        }
    }

    pub fn current_program(&self) -> Option<&str> {
        self.draft.as_ref().map(Draft::name)
    }

    pub fn cursor(&self) -> Option<ActionPath> {
        self.draft.as_ref().map(Draft::cursor_path)
    }

    /// The slot the agent is waiting for, if any.
    pub fn awaiting(&self) -> Option<SlotName> {
        self.pending.as_ref().and_then(UserGoal::next_unfilled)
    }
}

pub fn expectation_of(state: &AgentState) -> Expectation {
    if state.executing.is_some() {
        return Expectation::None;
    }
    match state.awaiting() {
        Some(SlotName::Name) => Expectation::Name,
        Some(SlotName::Value) => Expectation::Value,
        Some(SlotName::Condition) => Expectation::Condition,
        Some(SlotName::ElseWanted) => Expectation::YesNo,
        _ => Expectation::None,
    }
}

/// Why a turn was refused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TurnError {
    IllegalInState {
        state: AgentStateKind,
        intent: IntentKind,
    },
    NameCollision(String),
    Rejected(String),
}

/// Work for the session after a turn.
#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    /// Persist this finished program.
    Finalized(Program),
    Run(Arc<Program>),
    StopRun,
}

#[derive(Debug, Clone)]
pub struct Turn {
    pub state: AgentState,
    pub response: AgentResponse,
    pub commands: Vec<EditorCommand>,
    pub goals: Vec<AgentGoal>,
    pub error: Option<TurnError>,
    pub effect: Option<Effect>,
}

/// Named programs shared between sessions.
pub trait ProgramRegistry {
    /// Reserves `name` for `owner`. False if it is stored or reserved by
    /// someone else.
    fn claim(&self, name: &str, owner: &str) -> bool;
    fn release(&self, name: &str, owner: &str);
    fn lookup(&self, name: &str) -> Option<Program>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransparencyQuestion {
    HowUnderstand,
    WhyNotUnderstood,
    Learning,
    Voice,
    Other(String),
}

impl TransparencyQuestion {
    pub fn from_id(id: &str) -> Self {
        match id {
            "how_understand" => TransparencyQuestion::HowUnderstand,
            "why_not_understood" => TransparencyQuestion::WhyNotUnderstood,
            "learning" => TransparencyQuestion::Learning,
            "voice" => TransparencyQuestion::Voice,
            other => TransparencyQuestion::Other(other.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DialogManager {
    grammar: Arc<Grammar>,
    templates: Arc<Templates>,
    sounds: Arc<SoundCatalog>,
}

impl Default for DialogManager {
    fn default() -> Self {
        Self::new(
            Arc::new(Grammar::default()),
            Arc::new(Templates::default()),
            Arc::new(SoundCatalog::default()),
        )
    }
}

impl DialogManager {
    pub fn new(grammar: Arc<Grammar>, templates: Arc<Templates>, sounds: Arc<SoundCatalog>) -> Self {
        Self {
            grammar,
            templates,
            sounds,
        }
    }

    pub fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    pub fn templates(&self) -> &Templates {
        &self.templates
    }

    pub fn sounds(&self) -> &SoundCatalog {
        &self.sounds
    }

    /// Parses with the expectation the state implies.
    pub fn parse(&self, state: &AgentState, utterance: &Utterance) -> IntentFrame {
        self.grammar.parse(utterance, expectation_of(state))
    }

    pub fn example_phrases(&self, state: AgentStateKind) -> Vec<String> {
        self.grammar.list_example_phrases(state)
    }

    pub fn handle_turn(
        &self,
        state: &AgentState,
        frame: &IntentFrame,
        registry: &dyn ProgramRegistry,
        owner: &str,
    ) -> Turn {
        let mut step = Step {
            dm: self,
            registry,
            owner,
            state: state.clone(),
            commands: Vec::new(),
            error: None,
            effect: None,
            text: Vec::new(),
            finished: None,
        };
        step.turn(frame);
        step.finish()
    }

    /// Leaves `Executing` once the interpreter reports a terminal event.
    pub fn execution_finished(
        &self,
        state: &AgentState,
        outcome: &ExecutionEvent,
    ) -> (AgentState, AgentResponse) {
        let mut next = state.clone();
        let program = next.executing.take();
        let name = program.as_deref().map(|p| p.name.clone()).unwrap_or_default();
        let text = match outcome {
            ExecutionEvent::RuntimeError { message, .. } => self
                .templates
                .render(Situation::RunFailed, &[("name", &name), ("message", message)]),
            _ => self.templates.render(Situation::RunFinished, &[("name", &name)]),
        };
        let response = AgentResponse {
            text,
            state_after: next.kind(),
            program_snapshot: program.map(|p| json_string(&p)),
        };
        (next, response)
    }

    /// Canned answers about how the agent works. Never touches state.
    pub fn respond_transparency(&self, question: &TransparencyQuestion, state: &AgentState) -> String {
        match question {
            TransparencyQuestion::HowUnderstand => self.templates.render(Situation::TransparencyHow, &[]),
            TransparencyQuestion::Learning => self.templates.render(Situation::TransparencyLearning, &[]),
            TransparencyQuestion::Voice => self.templates.render(Situation::TransparencyVoice, &[]),
            TransparencyQuestion::WhyNotUnderstood => match &state.last_not_understood {
                Some(heard) => {
                    let nearest = self.grammar.nearest_example(heard).unwrap_or_default();
                    self.templates.render(
                        Situation::TransparencyWhy,
                        &[("heard", heard.as_str()), ("nearest", nearest)],
                    )
                }
                None => self.templates.render(Situation::TransparencyWhyNone, &[]),
            },
            TransparencyQuestion::Other(_) => self.help_text(state.kind()),
        }
    }

    fn help_text(&self, kind: AgentStateKind) -> String {
        let phrases = self
            .example_phrases(kind)
            .iter()
            .map(|p| format!("'{p}'"))
            .collect::<Vec<_>>()
            .join(", ");
        self.templates.render(Situation::Help, &[("phrases", &phrases)])
    }

    fn prompt(&self, goal: &UserGoal) -> Option<String> {
        let t = &self.templates;
        let variable = goal.text(SlotName::Variable).unwrap_or_default();
        let literal = goal.text(SlotName::Literal).unwrap_or_default();
        Some(match (goal.intent, goal.next_unfilled()?) {
            (IntentKind::CreateProcedure, _) => t.render(Situation::AskProgramName, &[]),
            (_, SlotName::Name) => t.render(Situation::AskVariableName, &[]),
            (_, SlotName::Value) => t.render(
                Situation::AskVariableValue,
                &[("name", goal.text(SlotName::Name).unwrap_or_default())],
            ),
            (_, SlotName::Condition) => t.render(Situation::AskLoopCondition, &[]),
            (_, SlotName::ElseWanted) => {
                t.render(Situation::AskElse, &[("variable", variable), ("literal", literal)])
            }
            _ => t.render(Situation::AskElseAction, &[("variable", variable), ("literal", literal)]),
        })
    }
}

fn json_string(program: &Program) -> String {
    String::from_utf8(encode_json(program)).expect("JSON output is UTF-8")
}

/// Accumulates the effects of one turn.
struct Step<'a> {
    dm: &'a DialogManager,
    registry: &'a dyn ProgramRegistry,
    owner: &'a str,
    state: AgentState,
    commands: Vec<EditorCommand>,
    error: Option<TurnError>,
    effect: Option<Effect>,
    text: Vec<String>,
    finished: Option<Program>,
}

impl Step<'_> {
    fn finish(self) -> Turn {
        let kind = self.state.kind();
        let snapshot = self
            .state
            .draft
            .as_ref()
            .map(|d| json_string(d.program()))
            .or_else(|| self.finished.as_ref().map(json_string))
            .or_else(|| self.state.executing.as_deref().map(json_string));
        let text = self.text.join(" ");
        debug_assert!(!text.is_empty(), "every turn answers");

        let mut goals: Vec<AgentGoal> = self
            .commands
            .iter()
            .map(|c| AgentGoal::ApplyEdit { command: c.clone() })
            .collect();
        if let Some(goal) = &self.state.pending {
            if let (Some(slot), Some(prompt)) = (goal.next_unfilled(), self.dm.prompt(goal)) {
                goals.push(AgentGoal::AskSlot { slot, prompt });
            }
        }
        goals.push(AgentGoal::Respond { text: text.clone() });

        Turn {
            response: AgentResponse {
                text,
                state_after: kind,
                program_snapshot: snapshot,
            },
            state: self.state,
            commands: self.commands,
            goals,
            error: self.error,
            effect: self.effect,
        }
    }

    fn say(&mut self, situation: Situation, args: &[(&str, &str)]) {
        self.text.push(self.dm.templates.render(situation, args));
    }

    fn refuse(&mut self, error: TurnError, situation: Situation, args: &[(&str, &str)]) {
        self.error = Some(error);
        self.say(situation, args);
    }

    fn illegal(&mut self, intent: IntentKind, situation: Situation, args: &[(&str, &str)]) {
        let state = self.state.kind();
        self.refuse(TurnError::IllegalInState { state, intent }, situation, args);
    }

    fn reprompt(&mut self) {
        if let Some(prompt) = self.state.pending.as_ref().and_then(|g| self.dm.prompt(g)) {
            self.text.push(prompt);
        }
    }

    fn draft(&self) -> &Draft {
        self.state.draft.as_ref().expect("building states have a draft")
    }

    /// Applies an edit to the draft and records it.
    fn edit(&mut self, cmd: EditorCommand) -> Result<(), EditError> {
        if let Some(draft) = self.state.draft.as_mut() {
            draft.apply(&cmd)?;
        }
        self.commands.push(cmd);
        Ok(())
    }

    fn edit_or_explain(&mut self, cmd: EditorCommand) -> bool {
        match self.edit(cmd) {
            Ok(()) => true,
            Err(err) => {
                let situation = match &err {
                    EditError::NameCollision(_) => Situation::NameTaken,
                    EditError::DepthExceeded => Situation::TooDeep,
                    EditError::NoOpenBlock => Situation::NoOpenLoop,
                    _ => Situation::DoneOpenLoop,
                };
                let name = match &err {
                    EditError::NameCollision(n) => n.clone(),
                    _ => String::new(),
                };
                self.refuse(TurnError::Rejected(err.to_string()), situation, &[("name", &name)]);
                false
            }
        }
    }

    fn turn(&mut self, frame: &IntentFrame) {
        if frame.kind == IntentKind::NotUnderstood {
            self.state.last_not_understood = Some(frame.raw.as_str().to_string());
        }
        match frame.kind {
            IntentKind::Reset => self.reset(),
            IntentKind::AskHelp => {
                let help = self.dm.help_text(self.state.kind());
                self.text.push(help);
                self.reprompt();
            }
            IntentKind::AskTransparency => {
                let question = TransparencyQuestion::from_id(frame.text(SlotName::Question).unwrap_or(""));
                let answer = self.dm.respond_transparency(&question, &self.state);
                self.text.push(answer);
                self.reprompt();
            }
            _ if self.state.executing.is_some() => self.executing(frame),
            _ if self.state.pending.is_some() => self.answer(frame),
            _ if self.state.draft.is_some() => self.building(frame),
            _ => self.home(frame),
        }
    }

    fn reset(&mut self) {
        if self.state.executing.take().is_some() {
            self.effect = Some(Effect::StopRun);
        }
        if let Some(draft) = &self.state.draft {
            self.registry.release(draft.name(), self.owner);
        }
        let _ = self.edit(EditorCommand::DiscardDraft);
        self.state.draft = None;
        self.state.pending = None;
        self.say(Situation::Reset, &[]);
    }

    fn executing(&mut self, frame: &IntentFrame) {
        let name = self
            .state
            .executing
            .as_ref()
            .map(|p| p.name.clone())
            .unwrap_or_default();
        match frame.kind {
            IntentKind::RunProgram => self.illegal(frame.kind, Situation::RunBusy, &[]),
            _ => self.illegal(frame.kind, Situation::RunInProgress, &[("name", &name)]),
        }
    }

    fn home(&mut self, frame: &IntentFrame) {
        use IntentKind::*;
        match frame.kind {
            CreateProcedure => self.start_goal(CreateProcedure, frame),
            RunProgram => self.run(frame.text(SlotName::Name).unwrap_or_default()),
            LiteralAnswer | ConditionAnswer | Affirm | Deny => {
                self.illegal(frame.kind, Situation::UnexpectedAnswer, &[])
            }
            NotUnderstood => self.say(Situation::NotUnderstoodHome, &[]),
            _ => self.illegal(frame.kind, Situation::NeedProgram, &[]),
        }
    }

    fn run(&mut self, name: &str) {
        match self.registry.lookup(name) {
            Some(program) => {
                let program = Arc::new(program);
                self.effect = Some(Effect::Run(program.clone()));
                self.state.executing = Some(program);
                self.say(Situation::RunStarted, &[("name", name)]);
            }
            None => self.refuse(
                TurnError::Rejected(format!("no program called {name}")),
                Situation::ProgramNotFound,
                &[("name", name)],
            ),
        }
    }

    fn building(&mut self, frame: &IntentFrame) {
        use IntentKind::*;
        let name = self.draft().name().to_string();
        match frame.kind {
            CreateProcedure => self.illegal(frame.kind, Situation::AlreadyBuilding, &[("name", &name)]),
            RunProgram => self.illegal(frame.kind, Situation::FinishBeforeRun, &[("name", &name)]),
            CreateVariable | CreateLoop => self.start_goal(frame.kind, frame),
            SetVariable => self.set_variable(frame),
            RepeatTimes => {
                let n = frame.count(SlotName::N).unwrap_or(1);
                self.open_loop(&Condition::CountReached { n });
            }
            CloseLoop => match self.draft().innermost_block() {
                Some(kind) if kind.is_loop() => {
                    let _ = self.edit(EditorCommand::CloseBlock);
                    self.say(Situation::LoopClosed, &[]);
                }
                Some(_) => self.illegal(frame.kind, Situation::CloseConditionalFirst, &[]),
                None => self.illegal(frame.kind, Situation::NoOpenLoop, &[]),
            },
            CloseConditional => match self.draft().innermost_block() {
                Some(BlockKind::If) => {
                    let _ = self.edit(EditorCommand::CloseBlock);
                    self.say(Situation::ConditionalClosed, &[]);
                }
                Some(_) => self.illegal(frame.kind, Situation::DoneOpenLoop, &[]),
                None => self.illegal(frame.kind, Situation::NoOpenConditional, &[]),
            },
            OpenConditional => self.open_conditional(frame),
            SayPhrase | PlaySound => {
                let kind = frame.kind;
                let arg = frame
                    .text(if kind == SayPhrase { SlotName::Text } else { SlotName::Sound })
                    .unwrap_or_default()
                    .to_string();
                if let Some(action) = self.inline_action(kind, &arg) {
                    self.append_simple(action);
                }
            }
            GetUserInput => {
                let save_as = frame.text(SlotName::SaveAs).map(str::to_string);
                if self.edit_or_explain(EditorCommand::AppendAction {
                    action: Action::GetUserInput {
                        save_as: save_as.clone(),
                    },
                }) {
                    match save_as {
                        Some(v) => self.say(Situation::InputSaved, &[("name", &v)]),
                        None => self.say(Situation::InputUnsaved, &[]),
                    }
                }
            }
            Done => self.done(),
            LiteralAnswer | ConditionAnswer | Affirm | Deny => {
                self.illegal(frame.kind, Situation::UnexpectedAnswer, &[])
            }
            NotUnderstood => self.say(Situation::NotUnderstoodBuilding, &[]),
            Reset | AskHelp | AskTransparency => unreachable!("handled before dispatch"),
        }
    }

    /// Builds a Say or PlaySound action, explaining unknown sounds.
    fn inline_action(&mut self, kind: IntentKind, arg: &str) -> Option<Action> {
        if kind == IntentKind::SayPhrase {
            return Some(Action::say(arg));
        }
        if self.dm.sounds.contains(arg) {
            return Some(Action::play(arg));
        }
        let sounds = self.dm.sounds.ids().collect::<Vec<_>>().join(", ");
        self.refuse(
            TurnError::Rejected(format!("unknown sound {arg}")),
            Situation::UnknownSound,
            &[("sound", arg), ("sounds", &sounds)],
        );
        None
    }

    fn append_simple(&mut self, action: Action) {
        let (situation, key, value) = match &action {
            Action::Say { text } => (Situation::Said, "text", text.clone()),
            Action::PlaySound { sound } => (Situation::SoundAdded, "sound", sound.clone()),
            _ => unreachable!("only say and play are inline actions"),
        };
        if self.edit_or_explain(EditorCommand::AppendAction { action }) {
            self.say(situation, &[(key, &value)]);
        }
    }

    fn set_variable(&mut self, frame: &IntentFrame) {
        let name = frame.text(SlotName::Name).unwrap_or_default().to_string();
        if !self.draft().is_visible(&name) {
            return self.unknown_variable(&name);
        }
        let Some(value) = self.value_expr(frame.text(SlotName::Value).unwrap_or_default()) else {
            return;
        };
        let shown = value.to_string();
        if self.edit_or_explain(EditorCommand::AppendAction {
            action: Action::SetVariable { name: name.clone(), value },
        }) {
            self.say(Situation::VariableSet, &[("name", &name), ("value", &shown)]);
        }
    }

    fn unknown_variable(&mut self, name: &str) {
        self.refuse(
            TurnError::Rejected(format!("unknown variable {name}")),
            Situation::UnknownVariable,
            &[("name", name)],
        );
    }

    /// Reads a spoken value, rejecting references to unknown variables.
    fn value_expr(&mut self, text: &str) -> Option<ValueExpr> {
        let value = ValueExpr::from_spoken(text);
        if let ValueExpr::Variable { name } = &value {
            if !self.draft().is_visible(name) {
                let name = name.clone();
                self.unknown_variable(&name);
                return None;
            }
        }
        Some(value)
    }

    fn open_loop(&mut self, condition: &Condition) -> bool {
        let (header, situation, key, value) = match condition {
            Condition::UntilUserSays { word } => (
                BlockHeader::LoopUntil { until: word.clone() },
                Situation::LoopOpened,
                "word",
                word.clone(),
            ),
            Condition::CountReached { n } => (
                BlockHeader::RepeatTimes { times: *n },
                Situation::RepeatOpened,
                "n",
                n.to_string(),
            ),
            Condition::VarEquals { .. } => {
                self.refuse(
                    TurnError::Rejected("loops stop on a word or a count".into()),
                    Situation::BadLoopCondition,
                    &[],
                );
                return false;
            }
        };
        let opened = self.edit_or_explain(EditorCommand::OpenBlock { header });
        if opened {
            self.say(situation, &[(key, &value)]);
        }
        opened
    }

    fn open_conditional(&mut self, frame: &IntentFrame) {
        let variable = frame.text(SlotName::Variable).unwrap_or_default().to_string();
        let literal = frame.text(SlotName::Literal).unwrap_or_default().to_string();
        if !self.draft().is_visible(&variable) {
            return self.unknown_variable(&variable);
        }
        let inline_kind = frame
            .text(SlotName::InlineActionKind)
            .and_then(IntentKind::from_name);
        let Some(kind) = inline_kind else {
            let condition = Condition::var_equals(&variable, &literal);
            if self.edit_or_explain(EditorCommand::OpenBlock {
                header: BlockHeader::If { condition },
            }) {
                self.say(
                    Situation::ConditionalOpened,
                    &[("variable", &variable), ("literal", &literal)],
                );
            }
            return;
        };
        let arg = frame.text(SlotName::InlineActionArg).unwrap_or_default();
        if self.inline_action(kind, arg).is_none() {
            return;
        }
        if self.draft().depth() >= crate::program::MAX_DEPTH {
            self.refuse(TurnError::Rejected("too deep".into()), Situation::TooDeep, &[]);
            return;
        }
        self.start_goal(IntentKind::OpenConditional, frame);
    }

    fn start_goal(&mut self, intent: IntentKind, frame: &IntentFrame) {
        let mut goal = UserGoal::new(intent);
        for (slot, value) in &frame.slots {
            if goal.required_slots.contains(slot) {
                if let Some(value) = self.check(&goal, *slot, value) {
                    goal.fill(*slot, value);
                }
            } else {
                goal.fill(*slot, value.clone());
            }
        }
        self.advance(goal);
    }

    /// Asks for the next missing slot or completes the goal.
    fn advance(&mut self, goal: UserGoal) {
        if goal.is_complete() {
            self.state.pending = None;
            self.complete(goal);
        } else {
            self.state.pending = Some(goal);
            self.reprompt();
        }
    }

    /// Validates an answer for `slot`, explaining rejections.
    fn check(&mut self, goal: &UserGoal, slot: SlotName, value: &SlotValue) -> Option<SlotValue> {
        match (goal.intent, slot) {
            (IntentKind::CreateProcedure, SlotName::Name) => {
                let name = value.as_text()?;
                if self.registry.claim(name, self.owner) {
                    Some(value.clone())
                } else {
                    self.refuse(
                        TurnError::NameCollision(name.to_string()),
                        Situation::NameTaken,
                        &[("name", name)],
                    );
                    None
                }
            }
            (IntentKind::CreateVariable, SlotName::Name) => {
                let name = value.as_text()?;
                if self.draft().is_visible(name) {
                    self.refuse(
                        TurnError::NameCollision(name.to_string()),
                        Situation::NameTaken,
                        &[("name", name)],
                    );
                    None
                } else {
                    Some(value.clone())
                }
            }
            (IntentKind::CreateVariable, SlotName::Value) => {
                self.value_expr(value.as_text()?)?;
                Some(value.clone())
            }
            (IntentKind::CreateLoop, SlotName::Condition) => match value.as_condition() {
                Some(Condition::VarEquals { .. }) | None => {
                    self.refuse(
                        TurnError::Rejected("loops stop on a word or a count".into()),
                        Situation::BadLoopCondition,
                        &[],
                    );
                    None
                }
                Some(_) => Some(value.clone()),
            },
            _ => Some(value.clone()),
        }
    }

    fn complete(&mut self, goal: UserGoal) {
        match goal.intent {
            IntentKind::CreateProcedure => {
                let name = goal.text(SlotName::Name).unwrap_or_default().to_string();
                self.state.draft = Some(Draft::new(name.clone()));
                self.say(Situation::ProgramCreated, &[("name", &name)]);
            }
            IntentKind::CreateVariable => {
                let name = goal.text(SlotName::Name).unwrap_or_default().to_string();
                let value = goal.text(SlotName::Value).unwrap_or_default();
                let initial = ValueExpr::from_spoken(value);
                let shown = initial.to_string();
                if self.edit_or_explain(EditorCommand::AppendAction {
                    action: Action::CreateVariable {
                        name: name.clone(),
                        initial,
                    },
                }) {
                    self.say(Situation::VariableCreated, &[("name", &name), ("value", &shown)]);
                }
            }
            IntentKind::CreateLoop => {
                if let Some(condition) = goal.filled.get(&SlotName::Condition).and_then(SlotValue::as_condition) {
                    let condition = condition.clone();
                    self.open_loop(&condition);
                }
            }
            IntentKind::OpenConditional => self.complete_conditional(&goal),
            other => unreachable!("{other} never becomes a pending goal"),
        }
    }

    fn complete_conditional(&mut self, goal: &UserGoal) {
        let variable = goal.text(SlotName::Variable).unwrap_or_default();
        let literal = goal.text(SlotName::Literal).unwrap_or_default();
        let inline = |kind: Option<&str>, arg: Option<&str>| -> Option<Action> {
            let arg = arg?;
            match IntentKind::from_name(kind?)? {
                IntentKind::SayPhrase => Some(Action::say(arg)),
                IntentKind::PlaySound => Some(Action::play(arg)),
                _ => None,
            }
        };
        let then = inline(goal.text(SlotName::InlineActionKind), goal.text(SlotName::InlineActionArg));
        let otherwise = inline(goal.text(SlotName::ElseActionKind), goal.text(SlotName::ElseActionArg));
        let action = Action::If {
            condition: Condition::var_equals(variable, literal),
            then: then.into_iter().collect(),
            otherwise: otherwise.map(|a| vec![a]),
        };
        if self.edit_or_explain(EditorCommand::AppendAction { action }) {
            self.say(Situation::ConditionalAdded, &[]);
        }
    }

    /// A turn while a goal is pending.
    fn answer(&mut self, frame: &IntentFrame) {
        use IntentKind::*;
        let mut goal = self.state.pending.clone().expect("answer needs a pending goal");
        let Some(slot) = goal.next_unfilled() else {
            self.state.pending = None;
            return self.complete(goal);
        };
        match (slot, frame.kind) {
            (SlotName::ElseWanted, Affirm) => {
                goal.fill(SlotName::ElseWanted, "yes".into());
                self.advance(goal);
            }
            (SlotName::ElseWanted, Deny) => {
                goal.fill(SlotName::ElseWanted, "no".into());
                self.advance(goal);
            }
            (SlotName::ElseWanted, LiteralAnswer | ConditionAnswer | NotUnderstood) => {
                self.illegal(frame.kind, Situation::YesOrNo, &[]);
                self.reprompt();
            }
            // Any other command declines the else branch and then runs.
            (SlotName::ElseWanted, _) => {
                goal.fill(SlotName::ElseWanted, "no".into());
                self.advance(goal);
                self.building(frame);
            }
            (SlotName::ElseActionKind | SlotName::ElseActionArg, SayPhrase | PlaySound) => {
                let key = if frame.kind == SayPhrase { SlotName::Text } else { SlotName::Sound };
                let arg = frame.text(key).unwrap_or_default().to_string();
                if self.inline_action(frame.kind, &arg).is_none() {
                    return self.reprompt();
                }
                goal.fill(SlotName::ElseActionKind, frame.kind.name().into());
                goal.fill(SlotName::ElseActionArg, arg.as_str().into());
                self.advance(goal);
            }
            (SlotName::ElseActionKind | SlotName::ElseActionArg, _) => {
                self.illegal(frame.kind, Situation::BadElseAction, &[]);
                self.reprompt();
            }
            (_, LiteralAnswer | ConditionAnswer) => {
                let value = frame
                    .slots
                    .get(&SlotName::Condition)
                    .or_else(|| frame.slots.get(&SlotName::Value))
                    .cloned()
                    .unwrap_or_else(|| frame.raw.as_str().into());
                match self.check(&goal, slot, &value) {
                    Some(value) => {
                        goal.fill(slot, value);
                        self.advance(goal);
                    }
                    None => self.reprompt(),
                }
            }
            _ => {
                self.illegal(frame.kind, Situation::PendingGoal, &[]);
                self.reprompt();
            }
        }
    }

    fn done(&mut self) {
        match self.draft().innermost_block() {
            Some(BlockKind::If) => {
                return self.illegal(IntentKind::Done, Situation::DoneOpenConditional, &[]);
            }
            Some(_) => return self.illegal(IntentKind::Done, Situation::DoneOpenLoop, &[]),
            None => {}
        }
        let name = self.draft().name().to_string();
        if let Some(problem) = self.draft().validate(&self.dm.sounds).first() {
            let message = problem.message.clone();
            self.refuse(
                TurnError::Rejected(message.clone()),
                Situation::InvalidProgram,
                &[("name", &name), ("problem", &message)],
            );
            return;
        }
        let _ = self.edit(EditorCommand::FinalizeProgram);
        let program = self.state.draft.take().expect("checked above").into_program();
        self.effect = Some(Effect::Finalized(program.clone()));
        self.finished = Some(program);
        self.say(Situation::Done, &[("name", &name)]);
    }
}
