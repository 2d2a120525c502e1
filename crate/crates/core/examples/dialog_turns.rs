//! Drives the dialog manager directly, showing states, pending slots and
//! the editor commands each turn produces.

use convo::dialog::{DialogManager, Effect};
use convo::store::ProgramStore;
use convo::{AgentState, Utterance};

fn main() {
    let dm = DialogManager::default();
    let store = ProgramStore::in_memory();
    let mut state = AgentState::default();
    for line in [
        "create a program",
        "greeter",
        "create a variable",
        "name",
        "friend",
        "if name is friend",
        "say welcome back",
        "close conditional",
        "how do you understand me",
        "done",
    ] {
        let frame = dm.parse(&state, &Utterance::text(line).unwrap());
        let turn = dm.handle_turn(&state, &frame, &store, "example");
        println!("> {line}");
        println!("  {} -> {}", frame.kind.name(), turn.response.text);
        println!("  state {}, awaiting {:?}", turn.state.kind().name(), turn.state.awaiting().map(|s| s.name()));
        for cmd in &turn.commands {
            println!("  edit {cmd:?}");
        }
        if let Some(Effect::Finalized(program)) = &turn.effect {
            store.persist(program, "example").unwrap();
            println!("  stored {:?}", store.names());
        }
        state = turn.state;
    }
}
