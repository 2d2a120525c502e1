#![allow(dead_code)]

pub mod wire;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use convo::config::Config;
use convo::dialog::{AgentState, DialogManager};
use convo::grammar::{Condition, IntentFrame, IntentKind, SlotName, SlotValue};
use convo::interpreter::{ExecutionEvent, RunState, BUDGET_EXHAUSTED};
use convo::program::{ActionPath, ValueExpr};
use convo::script::{replay, replay_service, Replay, Script};
use convo::store::ProgramStore;
use convo::{Action, Program, Utterance};
use proptest::collection::vec;
use proptest::option;
use proptest::prelude::*;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn replay_fixture(name: &str) -> Replay {
    let script = Script::load(&fixture(name)).unwrap();
    let (service, clock) = replay_service(&Config::default()).unwrap();
    replay(&script, &service, &clock)
}

/// The walk-through program, written out by hand.
pub fn animal_sounds() -> Program {
    let branch = |animal: &str| Action::If {
        condition: Condition::VarEquals {
            variable: "animal".into(),
            literal: animal.into(),
        },
        then: vec![Action::PlaySound { sound: animal.into() }],
        otherwise: None,
    };
    Program::new(
        "animal sounds",
        vec![Action::LoopUntil {
            until: "stop".into(),
            body: vec![
                Action::GetUserInput {
                    save_as: Some("animal".into()),
                },
                branch("dog"),
                branch("cat"),
                branch("horse"),
                branch("cow"),
            ],
        }],
    )
}

// ---------------------------------------------------------------------------
// Program generator

pub const VARS: [&str; 3] = ["animal", "pet", "score"];
pub const WORDS: [&str; 5] = ["dog", "cat", "cow", "stop", "yes"];
pub const MAX_ACTIONS: usize = 30;

fn pick(pool: &'static [&'static str]) -> impl Strategy<Value = String> {
    proptest::sample::select(pool).prop_map(str::to_string)
}

/// Pool words mostly, arbitrary text sometimes.
fn text() -> impl Strategy<Value = String> {
    prop_oneof![4 => pick(&WORDS), 1 => "\\PC{0,10}"]
}

fn value_expr() -> impl Strategy<Value = ValueExpr> {
    prop_oneof![
        text().prop_map(|value| ValueExpr::Literal { value }),
        pick(&VARS).prop_map(|name| ValueExpr::Variable { name }),
        Just(ValueExpr::UserInput),
    ]
}

fn condition() -> impl Strategy<Value = Condition> {
    prop_oneof![
        (pick(&VARS), pick(&WORDS)).prop_map(|(variable, literal)| Condition::VarEquals { variable, literal }),
        pick(&WORDS).prop_map(|word| Condition::UntilUserSays { word }),
        (0u32..4).prop_map(|n| Condition::CountReached { n }),
    ]
}

fn leaf() -> impl Strategy<Value = Action> {
    prop_oneof![
        text().prop_map(|text| Action::Say { text }),
        pick(&["dog", "cat", "cow", "dragon"]).prop_map(|sound| Action::PlaySound { sound }),
        option::of(pick(&VARS)).prop_map(|save_as| Action::GetUserInput { save_as }),
        (pick(&VARS), value_expr()).prop_map(|(name, initial)| Action::CreateVariable { name, initial }),
        (pick(&VARS), value_expr()).prop_map(|(name, value)| Action::SetVariable { name, value }),
    ]
}

/// One action whose blocks nest at most `depth` levels.
pub fn action(depth: u32) -> impl Strategy<Value = Action> {
    leaf().prop_recursive(depth, 48, 4, |inner| {
        prop_oneof![
            (condition(), vec(inner.clone(), 0..4), option::of(vec(inner.clone(), 0..3))).prop_map(
                |(condition, then, otherwise)| Action::If {
                    condition,
                    then,
                    otherwise,
                }
            ),
            (pick(&WORDS), vec(inner.clone(), 0..4)).prop_map(|(until, body)| Action::LoopUntil { until, body }),
            (0u32..4, vec(inner, 0..4)).prop_map(|(times, body)| Action::RepeatTimes { times, body }),
        ]
    })
}

/// Programs of at most [`MAX_ACTIONS`] actions nested at most `depth` deep.
pub fn program(depth: u32) -> impl Strategy<Value = Program> {
    (prop_oneof![pick(&WORDS), "\\PC{1,12}"], vec(action(depth), 0..8)).prop_map(|(name, actions)| {
        let mut budget = MAX_ACTIONS;
        Program::new(name, truncate(actions, &mut budget))
    })
}

fn truncate(actions: Vec<Action>, budget: &mut usize) -> Vec<Action> {
    let mut out = Vec::new();
    for action in actions {
        if *budget == 0 {
            break;
        }
        *budget -= 1;
        out.push(match action {
            Action::If {
                condition,
                then,
                otherwise,
            } => {
                let then = truncate(then, budget);
                let otherwise = otherwise.map(|o| truncate(o, budget));
                Action::If {
                    condition,
                    then,
                    otherwise,
                }
            }
            Action::LoopUntil { until, body } => Action::LoopUntil {
                until,
                body: truncate(body, budget),
            },
            Action::RepeatTimes { times, body } => Action::RepeatTimes {
                times,
                body: truncate(body, budget),
            },
            other => other,
        });
    }
    out
}

pub fn count_actions(actions: &[Action]) -> usize {
    actions
        .iter()
        .map(|a| {
            1 + match a {
                Action::If { then, otherwise, .. } => {
                    count_actions(then) + otherwise.as_deref().map_or(0, count_actions)
                }
                Action::LoopUntil { body, .. } | Action::RepeatTimes { body, .. } => count_actions(body),
                _ => 0,
            }
        })
        .sum()
}

pub fn nesting(actions: &[Action]) -> usize {
    actions
        .iter()
        .map(|a| match a {
            Action::If { then, otherwise, .. } => {
                1 + nesting(then).max(otherwise.as_deref().map_or(0, nesting))
            }
            Action::LoopUntil { body, .. } | Action::RepeatTimes { body, .. } => 1 + nesting(body),
            _ => 0,
        })
        .max()
        .unwrap_or(0)
}

/// Random user inputs, with stray case and whitespace.
pub fn inputs() -> impl Strategy<Value = Vec<String>> {
    vec(
        prop_oneof![
            pick(&WORDS),
            pick(&WORDS).prop_map(|w| format!("  {} ", w.to_uppercase())),
            "[a-z]{1,4}",
        ],
        0..12,
    )
}

pub fn fuel() -> impl Strategy<Value = u64> {
    prop_oneof![3 => Just(convo::interpreter::DEFAULT_FUEL), 1 => 0u64..60]
}

// ---------------------------------------------------------------------------
// Reference evaluator: plain recursion over the action tree, consuming the
// whole input list up front. Costs one step per action and one per loop
// re-check after a completed iteration.

enum Halt {
    /// Waiting for input the list doesn't have.
    Waiting,
    Failed,
}

struct Reference<'a> {
    vars: HashMap<String, String>,
    last: Option<String>,
    fuel: u64,
    inputs: std::slice::Iter<'a, String>,
    counters: Vec<u32>,
    events: Vec<ExecutionEvent>,
}

fn norm(s: &str) -> String {
    s.trim().to_lowercase()
}

impl Reference<'_> {
    fn tick(&mut self, path: &ActionPath) -> Result<(), Halt> {
        if self.fuel == 0 {
            self.events.push(ExecutionEvent::RuntimeError {
                message: BUDGET_EXHAUSTED.into(),
                path: path.clone(),
            });
            return Err(Halt::Failed);
        }
        self.fuel -= 1;
        Ok(())
    }

    fn read(&mut self, into: Option<&str>) -> Result<(), Halt> {
        self.events.push(ExecutionEvent::InputRequest { prompt: None });
        let input = norm(self.inputs.next().ok_or(Halt::Waiting)?);
        if let Some(name) = into {
            self.vars.insert(name.to_string(), input.clone());
        }
        self.last = Some(input);
        Ok(())
    }

    fn holds(&self, c: &Condition) -> bool {
        match c {
            Condition::VarEquals { variable, literal } => {
                self.vars.get(variable).is_some_and(|v| norm(v) == norm(literal))
            }
            Condition::UntilUserSays { word } => self.last.as_deref() == Some(norm(word).as_str()),
            Condition::CountReached { n } => self.counters.last().is_some_and(|c| c >= n),
        }
    }

    fn list(&mut self, actions: &[Action], parent: &ActionPath, offset: usize) -> Result<(), Halt> {
        for (i, a) in actions.iter().enumerate() {
            let mut path = parent.0.clone();
            path.push(offset + i);
            self.action(a, &ActionPath(path))?;
        }
        Ok(())
    }

    fn action(&mut self, a: &Action, path: &ActionPath) -> Result<(), Halt> {
        self.tick(path)?;
        match a {
            Action::Say { text } => self.events.push(ExecutionEvent::SpeechOut { text: text.clone() }),
            Action::PlaySound { sound } => self.events.push(ExecutionEvent::SoundOut { sound: sound.clone() }),
            Action::GetUserInput { save_as } => self.read(save_as.as_deref())?,
            Action::CreateVariable { name, initial: v } | Action::SetVariable { name, value: v } => match v {
                ValueExpr::Literal { value } => {
                    self.vars.insert(name.clone(), value.clone());
                }
                ValueExpr::Variable { name: from } => match self.vars.get(from).cloned() {
                    Some(value) => {
                        self.vars.insert(name.clone(), value);
                    }
                    None => {
                        self.events.push(ExecutionEvent::RuntimeError {
                            message: format!("there is no variable called {from}"),
                            path: path.clone(),
                        });
                        return Err(Halt::Failed);
                    }
                },
                ValueExpr::UserInput => self.read(Some(name))?,
            },
            Action::If {
                condition,
                then,
                otherwise,
            } => {
                if self.holds(condition) {
                    self.list(then, path, 0)?;
                } else if let Some(otherwise) = otherwise {
                    self.list(otherwise, path, then.len())?;
                }
            }
            Action::LoopUntil { body, .. } | Action::RepeatTimes { body, .. } => {
                let done = |r: &Self, n: u32| match a {
                    Action::LoopUntil { until, .. } => r.last.as_deref() == Some(norm(until).as_str()),
                    Action::RepeatTimes { times, .. } => n >= *times,
                    _ => unreachable!(),
                };
                if done(self, 0) {
                    return Ok(());
                }
                self.counters.push(0);
                loop {
                    self.list(body, path, 0)?;
                    self.tick(path)?;
                    let n = self.counters.last().unwrap() + 1;
                    if done(self, n) {
                        break;
                    }
                    *self.counters.last_mut().unwrap() = n;
                }
                self.counters.pop();
            }
        }
        Ok(())
    }
}

pub fn reference_run(program: &Program, inputs: &[String], fuel: u64) -> Vec<ExecutionEvent> {
    let mut r = Reference {
        vars: HashMap::new(),
        last: None,
        fuel,
        inputs: inputs.iter(),
        counters: Vec::new(),
        events: Vec::new(),
    };
    if r.list(&program.actions, &ActionPath(vec![]), 0).is_ok() {
        r.events.push(ExecutionEvent::Finished);
    }
    r.events
}

/// Drives the production interpreter through the same inputs.
pub fn production_run(program: &Program, inputs: &[String], fuel: u64) -> Vec<ExecutionEvent> {
    let (mut run, mut events) = RunState::start(Arc::new(program.clone()), fuel);
    let mut inputs = inputs.iter();
    while run.is_paused() {
        let Some(input) = inputs.next() else { break };
        events.extend(run.resume(input).unwrap());
    }
    events
}

// ---------------------------------------------------------------------------
// Dialog fixtures

/// Drives `lines` through the dialog manager, persisting finished programs.
pub fn drive(dm: &DialogManager, store: &ProgramStore, lines: &[&str]) -> AgentState {
    let mut state = AgentState::default();
    for line in lines {
        let frame = dm.parse(&state, &Utterance::text(*line).unwrap());
        let turn = dm.handle_turn(&state, &frame, store, "fsm");
        if let Some(convo::dialog::Effect::Finalized(p)) = &turn.effect {
            store.persist(p, "fsm").unwrap();
        }
        state = turn.state;
    }
    state
}

/// One conversation prefix per reachable situation, covering every state kind.
pub const STATE_PREFIXES: &[(&str, &[&str])] = &[
    ("home", &[]),
    ("home, program stored", &["create a program called stored", "say hi", "done"]),
    ("awaiting program name", &["create a program"]),
    ("building, empty", &["create a program called x"]),
    ("awaiting loop condition", &["create a program called x", "create a loop"]),
    (
        "building inside a loop",
        &["create a program called x", "create a loop", "until i say stop"],
    ),
    ("awaiting variable name", &["create a program called x", "create a variable"]),
    (
        "awaiting variable value",
        &["create a program called x", "create a variable", "score"],
    ),
    (
        "awaiting else answer",
        &[
            "create a program called x",
            "get user input and save it as animal",
            "if animal is dog, play the dog sound",
        ],
    ),
    (
        "awaiting else action",
        &[
            "create a program called x",
            "get user input and save it as animal",
            "if animal is dog, play the dog sound",
            "yes",
        ],
    ),
    (
        "building inside a conditional",
        &[
            "create a program called x",
            "get user input and save it as animal",
            "if animal is dog",
        ],
    ),
    (
        "executing",
        &["create a program called x", "get user input", "done", "play x"],
    ),
];

/// Frames for `kind`: with no slots, and with plausible slots.
pub fn frames_for(kind: IntentKind) -> Vec<IntentFrame> {
    use SlotName::*;
    let text = |s: &str| SlotValue::Text(s.into());
    let slots: Vec<(SlotName, SlotValue)> = match kind {
        IntentKind::CreateProcedure => vec![(Name, text("fresh"))],
        IntentKind::RunProgram => vec![(Name, text("stored"))],
        IntentKind::CreateVariable => vec![(Name, text("v")), (Value, text("1"))],
        IntentKind::SetVariable => vec![(Name, text("animal")), (Value, text("cat"))],
        IntentKind::CreateLoop => vec![(Condition, SlotValue::Condition(convo::grammar::Condition::until_user_says("stop")))],
        IntentKind::RepeatTimes => vec![(N, SlotValue::Count(2))],
        IntentKind::OpenConditional => vec![
            (Variable, text("animal")),
            (Literal, text("dog")),
            (InlineActionKind, text("PlaySound")),
            (InlineActionArg, text("dog")),
        ],
        IntentKind::SayPhrase => vec![(Text, text("hi"))],
        IntentKind::PlaySound => vec![(Sound, text("cat"))],
        IntentKind::GetUserInput => vec![(SaveAs, text("w"))],
        IntentKind::AskTransparency => vec![(Question, text("why_not_understood"))],
        IntentKind::LiteralAnswer => vec![(Value, text("answer"))],
        IntentKind::ConditionAnswer => vec![(Condition, SlotValue::Condition(convo::grammar::Condition::CountReached { n: 2 }))],
        _ => vec![],
    };
    let mut frames = vec![IntentFrame::synthetic(kind, &[])];
    if !slots.is_empty() {
        frames.push(IntentFrame::synthetic(kind, &slots));
    }
    frames
}
