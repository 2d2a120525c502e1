mod common;

use std::sync::Arc;

use common::*;
use convo::interpreter::{ExecutionEvent, ResumeError, RunState, BUDGET_EXHAUSTED};
use convo::program::{validate, SoundCatalog, ValueExpr};
use convo::{Action, Program};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;

/// Some variables defined up front, so a good share of programs validate.
fn scoped_program() -> impl Strategy<Value = Program> {
    (proptest::sample::subsequence(VARS.to_vec(), 0..=VARS.len()), program(3)).prop_map(|(defined, mut p)| {
        let prefix = defined.into_iter().map(|name| Action::CreateVariable {
            name: name.to_string(),
            initial: ValueExpr::Literal { value: "dog".into() },
        });
        p.actions = prefix.chain(p.actions).collect();
        p
    })
}

fn is_terminal(e: Option<&ExecutionEvent>) -> bool {
    matches!(e, Some(ExecutionEvent::Finished | ExecutionEvent::RuntimeError { .. }))
}

#[test]
fn enough_generated_programs_validate() {
    let sounds = SoundCatalog::default();
    let mut runner = TestRunner::deterministic();
    let strategy = scoped_program();
    let valid = (0..500)
        .filter(|_| {
            let p = strategy.new_tree(&mut runner).unwrap().current();
            validate(&p, &sounds).is_empty()
        })
        .count();
    assert!(valid >= 50, "only {valid} of 500 programs validate");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn runs_are_deterministic(p in program(3), inputs in inputs(), fuel in fuel()) {
        prop_assert_eq!(production_run(&p, &inputs, fuel), production_run(&p, &inputs, fuel));
    }

    #[test]
    fn runs_end_within_the_budget(p in program(3), seed in proptest::collection::vec("[a-z]{1,4}", 1..4), fuel in 0u64..300) {
        let (mut run, mut events) = RunState::start(Arc::new(p), fuel);
        let mut inputs = seed.iter().cycle();
        let mut resumes = 0;
        while run.is_paused() {
            events.extend(run.resume(inputs.next().unwrap()).unwrap());
            resumes += 1;
            prop_assert!(resumes <= fuel, "resumed more often than the budget allows");
        }
        prop_assert!(is_terminal(events.last()), "{:?}", events.last());
        prop_assert_eq!(events.iter().filter(|e| is_terminal(Some(e))).count(), 1);
        prop_assert!(run.fuel() <= fuel);
        prop_assert_eq!(run.resume("more"), Err(ResumeError::NotPaused));
    }

    #[test]
    fn valid_programs_only_fail_by_running_out(p in scoped_program(), inputs in inputs(), fuel in fuel()) {
        if validate(&p, &SoundCatalog::default()).is_empty() {
            for e in production_run(&p, &inputs, fuel) {
                if let ExecutionEvent::RuntimeError { message, .. } = &e {
                    prop_assert_eq!(message.as_str(), BUDGET_EXHAUSTED);
                }
            }
        }
    }

    #[test]
    fn until_loops_run_whole_iterations(inputs in proptest::collection::vec(prop_oneof![Just("stop".to_string()), "[a-r]{1,3}"], 0..8)) {
        let p = Program::new("echo", vec![Action::LoopUntil {
            until: "stop".into(),
            body: vec![Action::input(Some("w")), Action::say("next")],
        }]);
        let events = production_run(&p, &inputs, convo::interpreter::DEFAULT_FUEL);
        let says = events.iter().filter(|e| matches!(e, ExecutionEvent::SpeechOut { .. })).count();
        match inputs.iter().position(|i| i == "stop") {
            Some(at) => {
                prop_assert_eq!(says, at + 1);
                prop_assert_eq!(events.last(), Some(&ExecutionEvent::Finished));
            }
            None => {
                prop_assert_eq!(says, inputs.len());
                prop_assert_eq!(events.last(), Some(&ExecutionEvent::InputRequest { prompt: None }));
            }
        }
    }
}
