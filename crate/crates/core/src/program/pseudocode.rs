use std::fmt::Write as _;

use super::{Action, Condition, Program, ValueExpr};

const INDENT: &str = "  ";

/// Renders an indented, language-neutral listing: a header line, then one
/// line per action with block bodies indented two spaces.
pub fn export_pseudocode(program: &Program) -> String {
    let mut out = format!("program {}\n", quote(&program.name));
    render(&mut out, &program.actions, 1);
    out
}

fn render(out: &mut String, actions: &[Action], level: usize) {
    for action in actions {
        let pad = INDENT.repeat(level);
        let line = match action {
            Action::Say { text } => format!("say {}", quote(text)),
            Action::PlaySound { sound } => format!("play sound {}", ident(sound)),
            Action::GetUserInput { save_as: None } => "get user input".to_string(),
            Action::GetUserInput { save_as: Some(v) } => {
                format!("get user input and save it as {}", ident(v))
            }
            Action::CreateVariable { name, initial } => {
                format!("create variable {} = {}", ident(name), value(initial))
            }
            Action::SetVariable { name, value: v } => {
                format!("set {} to {}", ident(name), value(v))
            }
            Action::If {
                condition,
                then,
                otherwise,
            } => {
                let _ = writeln!(out, "{pad}if {}", cond(condition));
                render(out, then, level + 1);
                if let Some(otherwise) = otherwise {
                    let _ = writeln!(out, "{pad}else");
                    render(out, otherwise, level + 1);
                }
                continue;
            }
            Action::LoopUntil { until, body } => {
                let _ = writeln!(out, "{pad}loop until user says {}", quote(until));
                render(out, body, level + 1);
                continue;
            }
            Action::RepeatTimes { times, body } => {
                let _ = writeln!(out, "{pad}repeat {times} times");
                render(out, body, level + 1);
                continue;
            }
        };
        let _ = writeln!(out, "{pad}{line}");
    }
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn ident(s: &str) -> String {
    let simple = !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
    if simple {
        s.to_string()
    } else {
        quote(s)
    }
}

fn value(v: &ValueExpr) -> String {
    match v {
        ValueExpr::Literal { value } => quote(value),
        ValueExpr::Variable { name } => format!("value of {}", ident(name)),
        ValueExpr::UserInput => "user input".to_string(),
    }
}

fn cond(c: &Condition) -> String {
    match c {
        Condition::UntilUserSays { word } => format!("user said {}", quote(word)),
        Condition::VarEquals { variable, literal } => {
            format!("{} is {}", ident(variable), quote(literal))
        }
        Condition::CountReached { n } => format!("loop count reached {n}"),
    }
}
