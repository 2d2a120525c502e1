//! Shows how the bundled grammar reads a few utterances, with and without a
//! pending question.
//!
//! `cargo run --example parse_utterances -- "repeat 3 times" "stop"`

use convo::grammar::{Expectation, Grammar};
use convo::Utterance;

fn main() {
    let grammar = Grammar::default();
    let mut lines: Vec<String> = std::env::args().skip(1).collect();
    if lines.is_empty() {
        lines = [
            "Hey Convo, create a program called Animal Sounds.",
            "If animal is dog, play the dog sound.",
            "Until I say 'stop'.",
            "3 times",
            "no",
            "make me a sandwich",
        ]
        .map(String::from)
        .to_vec();
    }
    for line in &lines {
        let utterance = Utterance::text(line.as_str()).expect("non-empty");
        println!("{line}");
        for expectation in [Expectation::None, Expectation::Condition, Expectation::YesNo] {
            let frame = grammar.parse(&utterance, expectation);
            let slots: Vec<String> = frame
                .slots
                .iter()
                .map(|(name, value)| format!("{}={value:?}", name.name()))
                .collect();
            println!("  {expectation:?}: {} {}", frame.kind.name(), slots.join(" "));
        }
        if let Some(near) = grammar.nearest_example(line) {
            println!("  nearest example: {near}");
        }
    }
}
