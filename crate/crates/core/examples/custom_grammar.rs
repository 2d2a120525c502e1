//! Extends the phrase table and the response templates, then builds a
//! dialog manager from them.

use std::sync::Arc;

use convo::dialog::{DialogManager, Templates};
use convo::grammar::Grammar;
use convo::program::SoundCatalog;
use convo::store::ProgramStore;
use convo::{AgentState, Utterance};

const BUNDLED_GRAMMAR: &str = include_str!("../resources/grammar.convo");
const BUNDLED_TEMPLATES: &str = include_str!("../resources/responses.toml");

// Rules are tried in order, so extra rules go in front of the bundled ones.
const EXTRA_RULES: &str = r#"
woof -> PlaySound(sound="dog")
meow -> PlaySound(sound="cat")
parrot {text} -> SayPhrase(text={text})
@example building woof
"#;

const KID_STYLE: &str = r#"
[kid]
sound_added = "Yay! The {sound} goes in next!"
said = "Cool, I'll shout {text}!"
"#;

fn main() {
    let grammar = Grammar::parse_source(&format!("{EXTRA_RULES}\n{BUNDLED_GRAMMAR}")).unwrap();
    let templates = Templates::parse_source(&format!("{BUNDLED_TEMPLATES}\n{KID_STYLE}"))
        .and_then(|t| t.with_style("kid"))
        .unwrap();
    let dm = DialogManager::new(Arc::new(grammar), Arc::new(templates), Arc::new(SoundCatalog::default()));

    let store = ProgramStore::in_memory();
    let mut state = AgentState::default();
    for line in ["create a program", "pets", "woof", "meow", "parrot hello", "play the cow sound", "done"] {
        let frame = dm.parse(&state, &Utterance::text(line).unwrap());
        let turn = dm.handle_turn(&state, &frame, &store, "example");
        println!("> {line}\n  {}", turn.response.text);
        state = turn.state;
    }
}
