use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use regex::Regex;
use thiserror::Error;

use super::{
    normalize, normalize_value, Condition, Expectation, IntentFrame, IntentKind, SlotName,
    SlotValue, Utterance,
};
use crate::dialog::AgentStateKind;

/// The grammar shipped with the crate.
pub const DEFAULT_GRAMMAR: &str = include_str!("../../resources/grammar.convo");

const NUMBER_WORDS: [&str; 10] = [
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
];

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("grammar line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("reading grammar {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn syntax(line: usize, message: impl Into<String>) -> GrammarError {
    GrammarError::Syntax {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone)]
enum Binding {
    Capture(String),
    Const(String),
    UntilUserSays(String),
    VarEquals(String, String),
    CountReached(String),
}

#[derive(Debug, Clone)]
struct Rule {
    line: usize,
    regex: Regex,
    kind: IntentKind,
    numeric: BTreeSet<String>,
    bindings: Vec<(SlotName, Binding)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scope {
    Any,
    State(AgentStateKind),
}

/// A compiled phrase table.
///
/// Source format, one entry per line:
///
/// ```text
/// # comment
/// @version 1
/// @filler hey convo
/// @example building create a loop
/// create a program called {name} -> CreateProcedure(name={name})
/// repeat {n:number} times -> RepeatTimes(n={n})
/// until i say {word} -> ConditionAnswer(condition=until_user_says({word}))
/// ```
///
/// Patterns match the whole normalized utterance. `{slot}` captures one or
/// more words, `{slot:number}` captures digits or the words one to ten,
/// `(a|b)` is a word alternation, `[word]` is optional, and a trailing comma
/// on a word is optional in the input. Rules are tried in file order.
#[derive(Debug, Clone)]
pub struct Grammar {
    version: u32,
    rules: Vec<Rule>,
    fillers: Vec<String>,
    examples: Vec<(Scope, String)>,
}

impl Default for Grammar {
    fn default() -> Self {
        Grammar::parse_source(DEFAULT_GRAMMAR).expect("bundled grammar is valid")
    }
}

impl Grammar {
    pub fn load(path: &Path) -> Result<Self, GrammarError> {
        let src = std::fs::read_to_string(path).map_err(|source| GrammarError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_source(&src)
    }

    pub fn parse_source(src: &str) -> Result<Self, GrammarError> {
        let mut grammar = Grammar {
            version: 1,
            rules: Vec::new(),
            fillers: Vec::new(),
            examples: Vec::new(),
        };
        let mut example_lines = Vec::new();
        for (idx, raw) in src.lines().enumerate() {
            let line = idx + 1;
            let text = raw.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            if let Some(directive) = text.strip_prefix('@') {
                let (name, rest) = directive.split_once(' ').unwrap_or((directive, ""));
                let rest = rest.trim();
                match name {
                    "version" => {
                        grammar.version = rest
                            .parse()
                            .map_err(|_| syntax(line, format!("bad version `{rest}`")))?;
                    }
                    "filler" => {
                        if rest.is_empty() {
                            return Err(syntax(line, "empty filler"));
                        }
                        grammar.fillers.push(normalize(rest));
                    }
                    "example" => {
                        let (scope, phrase) = rest
                            .split_once(' ')
                            .ok_or_else(|| syntax(line, "expected `@example <state> <phrase>`"))?;
                        let scope = match scope {
                            "any" => Scope::Any,
                            "home" => Scope::State(AgentStateKind::Home),
                            "building" => Scope::State(AgentStateKind::Building),
                            "awaiting_slot" => Scope::State(AgentStateKind::AwaitingSlot),
                            "executing" => Scope::State(AgentStateKind::Executing),
                            other => return Err(syntax(line, format!("unknown state `{other}`"))),
                        };
                        grammar.examples.push((scope, phrase.trim().to_string()));
                        example_lines.push(line);
                    }
                    other => return Err(syntax(line, format!("unknown directive `@{other}`"))),
                }
                continue;
            }
            grammar.rules.push(parse_rule(line, text)?);
        }
        if grammar.rules.is_empty() {
            return Err(syntax(src.lines().count().max(1), "grammar has no rules"));
        }
        // Every advertised phrase has to be accepted.
        grammar.fillers.sort_by_key(|f| std::cmp::Reverse(f.len()));
        for ((scope, phrase), line) in grammar.examples.iter().zip(example_lines) {
            let utt = Utterance::text(phrase.as_str())
                .map_err(|_| syntax(line, "empty example phrase"))?;
            let kind = grammar.parse(&utt, Expectation::None).kind;
            if kind == IntentKind::NotUnderstood {
                return Err(syntax(line, format!("example `{phrase}` matches no rule")));
            }
            if *scope == Scope::State(AgentStateKind::AwaitingSlot) && !kind.is_escape() {
                return Err(syntax(
                    line,
                    format!("example `{phrase}` is not usable while awaiting an answer"),
                ));
            }
        }
        Ok(grammar)
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    /// Maps one utterance to exactly one frame.
    ///
    /// Under [`Expectation::None`] and [`Expectation::YesNo`] every command
    /// rule is tried. While waiting for a name, value or condition only
    /// reset/help/transparency commands (plus condition rules for
    /// [`Expectation::Condition`]) take precedence over the literal answer.
    pub fn parse(&self, utterance: &Utterance, expectation: Expectation) -> IntentFrame {
        let normalized = normalize(utterance.as_str());
        let stripped = self.strip_fillers(&normalized);
        let candidates: &[&str] = if stripped != normalized {
            &[normalized.as_str(), stripped.as_str()]
        } else {
            &[normalized.as_str()]
        };

        for text in candidates {
            for rule in &self.rules {
                if !allowed(rule.kind, expectation) {
                    continue;
                }
                if let Some(slots) = rule.try_match(text) {
                    log::trace!("{text:?} matched grammar line {}", rule.line);
                    return IntentFrame {
                        kind: rule.kind,
                        slots,
                        raw: utterance.clone(),
                    };
                }
            }
        }

        if expectation == Expectation::None {
            return IntentFrame::new(IntentKind::NotUnderstood, utterance.clone());
        }
        let mut value = normalize_value(&normalized);
        if value.is_empty() {
            value = utterance.as_str().trim().to_lowercase();
        }
        IntentFrame::new(IntentKind::LiteralAnswer, utterance.clone())
            .with(SlotName::Value, value.as_str())
    }

    /// Canonical phrases suited to the given state. Every phrase parses to
    /// a recognized intent (checked at load time).
    pub fn list_example_phrases(&self, state: AgentStateKind) -> Vec<String> {
        let mut out: Vec<String> = self
            .examples
            .iter()
            .filter(|(scope, _)| matches!(scope, Scope::Any) || *scope == Scope::State(state))
            .map(|(_, p)| p.clone())
            .collect();
        if out.is_empty() {
            out = self.examples.iter().map(|(_, p)| p.clone()).collect();
        }
        out
    }

    /// Every distinct example phrase, in file order.
    pub fn all_example_phrases(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.examples
            .iter()
            .map(|(_, p)| p.as_str())
            .filter(|p| seen.insert(*p))
            .collect()
    }

    /// The example phrase with the smallest character edit distance to
    /// `text` (first one wins ties).
    pub fn nearest_example(&self, text: &str) -> Option<&str> {
        let target = normalize(text);
        self.all_example_phrases()
            .into_iter()
            .min_by_key(|p| strsim::levenshtein(&target, &normalize(p)))
    }

    fn strip_fillers(&self, text: &str) -> String {
        let mut current = text;
        loop {
            let next = self.fillers.iter().find_map(|filler| {
                let rest = current.strip_prefix(filler.as_str())?;
                let rest = rest.strip_prefix(',').unwrap_or(rest);
                let rest = rest.strip_prefix(' ')?;
                (!rest.is_empty()).then_some(rest)
            });
            match next {
                Some(rest) => current = rest,
                None => return current.to_string(),
            }
        }
    }
}

fn allowed(kind: IntentKind, expectation: Expectation) -> bool {
    if kind.is_escape() {
        return true;
    }
    match expectation {
        Expectation::None | Expectation::YesNo => kind != IntentKind::ConditionAnswer,
        Expectation::Condition => kind == IntentKind::ConditionAnswer,
        Expectation::Name | Expectation::Value => false,
    }
}

impl Rule {
    fn try_match(&self, text: &str) -> Option<BTreeMap<SlotName, SlotValue>> {
        let caps = self.regex.captures(text)?;
        let get = |name: &str| -> Option<String> {
            let v = normalize_value(caps.name(name)?.as_str());
            (!v.is_empty()).then_some(v)
        };
        let count = |name: &str| -> Option<u32> { parse_count(&get(name)?) };
        let mut slots = BTreeMap::new();
        for (slot, binding) in &self.bindings {
            let value = match binding {
                Binding::Capture(c) if self.numeric.contains(c) => SlotValue::Count(count(c)?),
                Binding::Capture(c) => SlotValue::Text(get(c)?),
                Binding::Const(s) => SlotValue::Text(s.clone()),
                Binding::UntilUserSays(c) => {
                    SlotValue::Condition(Condition::UntilUserSays { word: get(c)? })
                }
                Binding::VarEquals(a, b) => SlotValue::Condition(Condition::VarEquals {
                    variable: get(a)?,
                    literal: get(b)?,
                }),
                Binding::CountReached(c) => SlotValue::Condition(Condition::CountReached {
                    n: count(c)?,
                }),
            };
            slots.insert(*slot, value);
        }
        Some(slots)
    }
}

fn parse_count(s: &str) -> Option<u32> {
    let n = match s.parse::<u32>() {
        Ok(n) => n,
        Err(_) => NUMBER_WORDS.iter().position(|w| *w == s)? as u32 + 1,
    };
    (n >= 1).then_some(n)
}

fn parse_rule(line: usize, text: &str) -> Result<Rule, GrammarError> {
    let (pattern, action) = text
        .rsplit_once("->")
        .ok_or_else(|| syntax(line, "expected `pattern -> Intent(slot=...)`"))?;
    let pattern = pattern.trim().to_lowercase();
    if pattern.is_empty() {
        return Err(syntax(line, "empty pattern"));
    }
    let (regex_src, captures, numeric) = compile_pattern(line, &pattern)?;
    let regex = Regex::new(&regex_src).map_err(|e| syntax(line, format!("bad pattern: {e}")))?;

    let action = action.trim();
    let (kind_name, args) = match action.split_once('(') {
        Some((k, rest)) => {
            let args = rest
                .strip_suffix(')')
                .ok_or_else(|| syntax(line, "missing `)`"))?;
            (k.trim(), Some(args))
        }
        None => (action, None),
    };
    let kind = IntentKind::from_name(kind_name)
        .ok_or_else(|| syntax(line, format!("unknown intent `{kind_name}`")))?;
    if matches!(kind, IntentKind::LiteralAnswer | IntentKind::NotUnderstood) {
        return Err(syntax(line, format!("{kind} cannot be produced by a rule")));
    }

    let mut bindings = Vec::new();
    for arg in split_args(args.unwrap_or("")) {
        let (slot, value) = arg
            .split_once('=')
            .ok_or_else(|| syntax(line, format!("expected `slot=value`, got `{arg}`")))?;
        let slot_name = slot.trim();
        let slot = SlotName::from_name(slot_name)
            .filter(|s| kind.legal_slots().contains(s))
            .ok_or_else(|| syntax(line, format!("slot `{slot_name}` is not legal for {kind}")))?;
        let binding = parse_binding(line, value.trim(), &captures)?;
        let is_condition = matches!(
            binding,
            Binding::UntilUserSays(_) | Binding::VarEquals(..) | Binding::CountReached(_)
        );
        if is_condition != (slot == SlotName::Condition) {
            return Err(syntax(line, format!("slot `{slot}` has the wrong value type")));
        }
        let wants_number = slot == SlotName::N;
        if let Binding::Capture(c) = &binding {
            if wants_number != numeric.contains(c) {
                return Err(syntax(
                    line,
                    format!("slot `{slot}` needs a {} capture", if wants_number { "`:number`" } else { "text" }),
                ));
            }
        }
        if let Binding::CountReached(c) = &binding {
            if !numeric.contains(c) {
                return Err(syntax(line, "count_reached needs a `:number` capture"));
            }
        }
        if bindings.iter().any(|(s, _)| *s == slot) {
            return Err(syntax(line, format!("slot `{slot}` bound twice")));
        }
        bindings.push((slot, binding));
    }
    for required in kind.mandatory_slots() {
        if !bindings.iter().any(|(s, _)| s == required) {
            return Err(syntax(line, format!("{kind} requires slot `{required}`")));
        }
    }

    Ok(Rule {
        line,
        regex,
        kind,
        numeric,
        bindings,
    })
}

fn split_args(src: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut quoted, mut start) = (0i32, false, 0);
    for (i, c) in src.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '(' if !quoted => depth += 1,
            ')' if !quoted => depth -= 1,
            ',' if !quoted && depth == 0 => {
                out.push(src[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    let last = src[start..].trim();
    if !last.is_empty() {
        out.push(last);
    }
    out.retain(|s| !s.is_empty());
    out
}

fn capture_ref(line: usize, src: &str, captures: &BTreeSet<String>) -> Result<String, GrammarError> {
    let name = src
        .trim()
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| syntax(line, format!("expected `{{capture}}`, got `{src}`")))?;
    if !captures.contains(name) {
        return Err(syntax(line, format!("pattern has no capture `{name}`")));
    }
    Ok(name.to_string())
}

fn parse_binding(line: usize, src: &str, captures: &BTreeSet<String>) -> Result<Binding, GrammarError> {
    if let Some(s) = src.strip_prefix('"').and_then(|s| s.strip_suffix('"')) {
        return Ok(Binding::Const(s.to_string()));
    }
    if src.starts_with('{') {
        return Ok(Binding::Capture(capture_ref(line, src, captures)?));
    }
    let (func, args) = src
        .split_once('(')
        .and_then(|(f, rest)| Some((f.trim(), rest.strip_suffix(')')?)))
        .ok_or_else(|| syntax(line, format!("bad slot value `{src}`")))?;
    let args: Vec<&str> = args.split(',').collect();
    match (func, args.as_slice()) {
        ("until_user_says", [w]) => Ok(Binding::UntilUserSays(capture_ref(line, w, captures)?)),
        ("var_equals", [a, b]) => Ok(Binding::VarEquals(
            capture_ref(line, a, captures)?,
            capture_ref(line, b, captures)?,
        )),
        ("count_reached", [n]) => Ok(Binding::CountReached(capture_ref(line, n, captures)?)),
        _ => Err(syntax(line, format!("unknown condition constructor `{src}`"))),
    }
}

type CompiledPattern = (String, BTreeSet<String>, BTreeSet<String>);

fn compile_pattern(line: usize, pattern: &str) -> Result<CompiledPattern, GrammarError> {
    let mut captures = BTreeSet::new();
    let mut numeric = BTreeSet::new();
    let mut out = String::from("^");
    let mut leading = true;
    for token in pattern.split_whitespace() {
        let (token, comma) = match token.strip_suffix(',') {
            Some(t) if !t.is_empty() => (t, true),
            _ => (token, false),
        };
        let (body, optional) = match token.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
            Some(inner) => (inner, true),
            None => (token, false),
        };
        let piece = if let Some(inner) = body.strip_prefix('{').and_then(|t| t.strip_suffix('}')) {
            let (name, ty) = inner.split_once(':').unwrap_or((inner, ""));
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_lowercase() || c == '_') {
                return Err(syntax(line, format!("bad capture name `{name}`")));
            }
            if !captures.insert(name.to_string()) {
                return Err(syntax(line, format!("capture `{name}` used twice")));
            }
            match ty {
                "" => format!("(?P<{name}>.+?)"),
                "number" => {
                    numeric.insert(name.to_string());
                    format!("(?P<{name}>\\d+|{})", NUMBER_WORDS.join("|"))
                }
                other => return Err(syntax(line, format!("unknown capture type `{other}`"))),
            }
        } else if let Some(alts) = body.strip_prefix('(').and_then(|t| t.strip_suffix(')')) {
            let alts: Vec<String> = alts.split('|').map(|a| regex::escape(a.trim())).collect();
            if alts.iter().any(String::is_empty) {
                return Err(syntax(line, "empty alternative"));
            }
            format!("(?:{})", alts.join("|"))
        } else {
            if body.contains(['{', '}', '(', ')', '[', ']', '|']) {
                return Err(syntax(line, format!("malformed token `{token}`")));
            }
            regex::escape(body)
        };
        let piece = if comma { format!("{piece},?") } else { piece };
        // Leading optional words carry their own trailing space.
        match (leading, optional) {
            (true, false) => {
                out.push_str(&piece);
                leading = false;
            }
            (true, true) => out.push_str(&format!("(?:{piece} )?")),
            (false, false) => {
                out.push(' ');
                out.push_str(&piece);
            }
            (false, true) => out.push_str(&format!("(?: {piece})?")),
        }
    }
    out.push('$');
    Ok((out, captures, numeric))
}
