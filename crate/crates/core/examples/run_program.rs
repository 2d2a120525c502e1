//! Runs a program file, feeding it the remaining arguments as user input.
//!
//! `cargo run --example run_program -- tests/fixtures/animal_sounds.json dog cow stop`

use convo::interpreter::{ExecutionEvent, RunState, DEFAULT_FUEL};
use convo::program::import_json;

fn main() {
    let mut args = std::env::args().skip(1);
    let path = args.next().expect("usage: run_program PROGRAM.json [INPUT...]");
    let program = import_json(&std::fs::read(&path).unwrap()).unwrap_or_else(|e| panic!("{path}: {e}"));
    let mut inputs = args;

    let (mut run, events) = RunState::start(program, DEFAULT_FUEL);
    show(&events);
    while run.is_paused() {
        let Some(input) = inputs.next() else {
            println!("(out of input, still waiting)");
            break;
        };
        println!("> {input}");
        show(&run.resume(&input).unwrap());
    }
    println!("variables: {:?}", run.variables());
    println!("fuel left: {}", run.fuel());
}

fn show(events: &[ExecutionEvent]) {
    for e in events {
        match e {
            ExecutionEvent::SpeechOut { text } => println!("says: {text}"),
            ExecutionEvent::SoundOut { sound } => println!("plays: {sound}"),
            ExecutionEvent::InputRequest { .. } => println!("listening..."),
            ExecutionEvent::Finished => println!("finished"),
            ExecutionEvent::RuntimeError { message, path } => println!("error at {path}: {message}"),
        }
    }
}
