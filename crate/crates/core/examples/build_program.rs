//! Builds a program with editor commands and prints it as pseudocode and JSON.

use convo::grammar::Condition;
use convo::program::{export_json, export_pseudocode, BlockHeader, Draft, EditorCommand, SoundCatalog};
use convo::Action;

fn main() {
    let mut draft = Draft::new("farm");
    let commands = [
        EditorCommand::OpenBlock { header: BlockHeader::RepeatTimes { times: 2 } },
        EditorCommand::AppendAction { action: Action::input(Some("animal")) },
        EditorCommand::OpenBlock {
            header: BlockHeader::If { condition: Condition::var_equals("animal", "cow") },
        },
        EditorCommand::AppendAction { action: Action::play("cow") },
        EditorCommand::CloseBlock,
        EditorCommand::AppendAction { action: Action::say("next") },
        EditorCommand::CloseBlock,
        EditorCommand::FinalizeProgram,
    ];
    for cmd in &commands {
        draft.apply(cmd).unwrap_or_else(|e| panic!("{cmd:?}: {e}"));
        println!("{:<12} depth {} cursor {}", command_name(cmd), draft.depth(), draft.cursor_path());
    }

    // A second close has nothing to close and leaves the draft untouched.
    println!("extra close: {:?}", draft.clone().apply(&EditorCommand::CloseBlock));

    let problems = draft.validate(&SoundCatalog::default());
    println!("diagnostics: {}", problems.len());
    println!("\n{}", export_pseudocode(draft.program()));
    print!("{}", String::from_utf8(export_json(draft.program())).unwrap());
}

fn command_name(cmd: &EditorCommand) -> &'static str {
    match cmd {
        EditorCommand::AppendAction { .. } => "append",
        EditorCommand::OpenBlock { .. } => "open",
        EditorCommand::CloseBlock => "close",
        EditorCommand::FinalizeProgram => "finalize",
        EditorCommand::DiscardDraft => "discard",
    }
}
