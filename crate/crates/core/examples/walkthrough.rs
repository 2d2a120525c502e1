//! Replays the animal-sounds walk-through and prints the conversation.
//!
//! `cargo run --example walkthrough [SCRIPT]`

use std::path::PathBuf;

use convo::config::Config;
use convo::script::{replay, replay_service, Script};

fn main() {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/lisa_walkthrough.script")
    });
    let script = Script::load(&path).unwrap_or_else(|e| panic!("{e}"));
    let (service, clock) = replay_service(&Config::default()).unwrap();
    let result = replay(&script, &service, &clock);
    print!("{}", result.render());
    if let Some(program) = &result.artifact.program {
        println!("\nfinal program:\n{}", serde_json::to_string_pretty(program).unwrap());
    }
}
