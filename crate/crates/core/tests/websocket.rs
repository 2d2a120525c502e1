mod common;

use std::sync::Arc;
use std::time::Duration;

use common::wire::{self, next_text, Client, Reply};
use common::*;
use convo::config::Config;
use convo::dialog::DialogManager;
use convo::script::{Script, Step};
use convo::session::{server, ClientMessage, Service};
use convo::store::ProgramStore;
use convo::telemetry::ManualClock;
use futures_util::{SinkExt, StreamExt};
use proptest::prelude::*;
use tokio_tungstenite::tungstenite::protocol::frame::coding::CloseCode;
use tokio_tungstenite::tungstenite::Message;

fn service() -> Service {
    Service::in_memory(Arc::new(ManualClock::default()))
}

fn kinds(replies: &[Reply]) -> Vec<&str> {
    replies.iter().map(|r| r.kind.as_str()).collect()
}

fn event_kind(reply: &Reply) -> &str {
    reply.event.as_ref().and_then(|e| e["kind"].as_str()).unwrap_or("")
}

#[tokio::test]
async fn greeting_opens_at_home_with_phrases() {
    let addr = wire::start(service()).await;
    let client = Client::connect(addr).await;
    let g = &client.greeting;
    assert_eq!(g.kind, "session_opened");
    assert_eq!(g.state.as_deref(), Some("home"));
    assert!(g.session.as_deref().unwrap().starts_with("session-"));

    let other = Client::connect(addr).await;
    assert_ne!(other.greeting.session, g.session);
}

#[tokio::test]
async fn bad_frames_get_one_error_each_and_the_session_survives() {
    let addr = wire::start(service()).await;
    let mut c = Client::connect(addr).await;
    let cases = [
        ("not json", "malformed"),
        ("[1, 2]", "malformed"),
        (r#"{"type": 7}"#, "malformed"),
        (r#"{"type": "utterance"}"#, "malformed"),
        (r#"{"type": "utterance", "text": "hi", "volume": 11}"#, "malformed"),
        (r#"{"type": "dance"}"#, "unknown_type"),
        (r#"{"type": "utterance", "text": "   "}"#, "empty_utterance"),
        (r#"{"type": "exec_input", "text": "dog"}"#, "no_active_run"),
    ];
    for (raw, code) in cases {
        let replies = c.send_raw(raw).await;
        assert_eq!(kinds(&replies), ["error"], "{raw}");
        assert_eq!(replies[0].code.as_deref(), Some(code), "{raw}");
    }

    c.socket.send(Message::Binary(vec![0xff, 0xfe])).await.unwrap();
    let reply = Reply::parse(&next_text(&mut c.socket).await.unwrap());
    assert_eq!(reply.code.as_deref(), Some("malformed"));

    let replies = c.send(&ClientMessage::utterance("create a program")).await;
    assert_eq!(kinds(&replies), ["agent_response"]);
    assert_eq!(replies[0].state.as_deref(), Some("awaiting_slot"));
}

#[tokio::test]
async fn binary_json_frames_are_accepted() {
    let addr = wire::start(service()).await;
    let mut c = Client::connect(addr).await;
    c.socket
        .send(Message::Binary(br#"{"type": "help"}"#.to_vec()))
        .await
        .unwrap();
    let reply = Reply::parse(&next_text(&mut c.socket).await.unwrap());
    assert_eq!(reply.kind, "agent_response");
}

#[tokio::test]
async fn a_full_server_refuses_with_capacity_then_recovers() {
    let config = Config {
        max_sessions: 1,
        ..Config::default()
    };
    let service = Arc::new(Service::new(
        DialogManager::default(),
        Arc::new(ProgramStore::in_memory()),
        &config,
        Arc::new(ManualClock::default()),
    ));
    let addr = server::spawn(service.clone(), "127.0.0.1:0").await.unwrap();
    let first = Client::connect(addr).await;

    let (mut refused, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/session"))
        .await
        .unwrap();
    let reply = Reply::parse(&next_text(&mut refused).await.unwrap());
    assert_eq!(reply.kind, "error");
    assert_eq!(reply.code.as_deref(), Some("capacity"));
    let close = loop {
        match refused.next().await.expect("close frame").unwrap() {
            Message::Close(frame) => break frame.expect("close reason"),
            _ => continue,
        }
    };
    assert_eq!(close.code, CloseCode::Again);
    assert_eq!(close.reason, "capacity");

    drop(first);
    for _ in 0..200 {
        if service.active_sessions() == 0 {
            break;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    assert_eq!(service.active_sessions(), 0);
    let again = Client::connect(addr).await;
    assert_eq!(again.greeting.kind, "session_opened");
}

#[tokio::test]
async fn run_replies_come_response_first_and_finish_with_a_response() {
    let addr = wire::start(service()).await;
    let mut c = Client::connect(addr).await;
    for line in ["create a program", "echo", "say hi", "get user input", "play the dog sound", "done"] {
        let replies = c.send(&ClientMessage::utterance(line)).await;
        assert_eq!(kinds(&replies), ["agent_response"], "{line}");
    }

    let replies = c.send(&ClientMessage::utterance("play echo")).await;
    assert_eq!(kinds(&replies), ["agent_response", "exec_event", "exec_event"]);
    assert_eq!(replies[0].state.as_deref(), Some("executing"));
    assert_eq!(event_kind(&replies[1]), "speech_out");
    assert_eq!(event_kind(&replies[2]), "input_request");

    let replies = c.send(&ClientMessage::exec_input("anything")).await;
    assert_eq!(kinds(&replies), ["exec_event", "exec_event", "agent_response"]);
    assert_eq!(event_kind(&replies[0]), "sound_out");
    assert_eq!(event_kind(&replies[1]), "finished");
    assert_eq!(replies[2].state.as_deref(), Some("home"));

    let replies = c.send(&ClientMessage::exec_input("late")).await;
    assert_eq!(replies[0].code.as_deref(), Some("no_active_run"));
}

#[tokio::test]
async fn walkthrough_over_the_wire_builds_the_golden_program() {
    let script = Script::load(&fixture("lisa_walkthrough.script")).unwrap();
    let golden = std::fs::read_to_string(fixture("animal_sounds.json")).unwrap();
    let addr = wire::start(service()).await;
    let mut c = Client::connect(addr).await;

    let mut last_snapshot = None;
    let mut sounds = Vec::new();
    for line in &script.lines {
        for reply in c.send(&line.step.message()).await {
            assert_ne!(reply.kind, "error", "line {}: {:?}", line.line, reply.message);
            if let Some(p) = &reply.program {
                last_snapshot = Some(p.get().to_string());
            }
            if event_kind(&reply) == "sound_out" {
                sounds.push(reply.event.unwrap()["sound"].as_str().unwrap().to_string());
            }
        }
    }
    assert_eq!(last_snapshot.unwrap() + "\n", golden);
    assert_eq!(sounds, ["dog", "cat"]);
}

// ---------------------------------------------------------------------------
// Isolation, in process

fn step() -> impl Strategy<Value = Step> {
    let lines = vec![
        "create a program", "pets", "farm", "create a loop", "until i say stop", "repeat 2 times",
        "get user input and save it as animal", "if animal is cat, play the cat sound", "say hi",
        "no", "yes", "close loop", "done", "play pets", "play farm", "reset", "help", "xyzzy",
    ];
    prop_oneof![
        4 => proptest::sample::select(lines).prop_map(|t| Step::Utterance { text: t.into(), modality: convo::Modality::Text }),
        1 => proptest::sample::select(vec!["cat", "dog", "stop"]).prop_map(|t| Step::ExecInput(t.into())),
    ]
}

fn solo(steps: &[Step]) -> Vec<String> {
    let service = service();
    let mut s = service.open_session().unwrap();
    steps.iter().flat_map(|st| s.dispatch(st.message())).map(|m| m.to_json()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Both sessions only play programs they name themselves, and the names
    // differ, so the shared store never couples them.
    #[test]
    fn interleaved_sessions_match_solo_runs(
        a in proptest::collection::vec(step(), 0..20),
        b in proptest::collection::vec(step(), 0..20),
        order in proptest::collection::vec(any::<bool>(), 40),
    ) {
        let rename = |steps: &[Step], from: &str, to: &str| -> Vec<Step> {
            steps.iter().map(|st| match st {
                Step::Utterance { text, modality } => Step::Utterance { text: text.replace(from, to), modality: *modality },
                other => other.clone(),
            }).collect()
        };
        let a = rename(&rename(&a, "farm", "pets"), "pets", "alpha");
        let b = rename(&rename(&b, "pets", "farm"), "farm", "beta");

        let service = service();
        let mut sa = service.open_session().unwrap();
        let mut sb = service.open_session().unwrap();
        let (mut out_a, mut out_b) = (Vec::new(), Vec::new());
        let (mut ia, mut ib) = (a.iter(), b.iter());
        let mut pick = order.iter().cycle();
        loop {
            let next = if *pick.next().unwrap() { ia.next().map(|s| (0, s)).or_else(|| ib.next().map(|s| (1, s))) }
                else { ib.next().map(|s| (1, s)).or_else(|| ia.next().map(|s| (0, s))) };
            match next {
                Some((0, st)) => out_a.extend(sa.dispatch(st.message()).iter().map(|m| m.to_json())),
                Some((_, st)) => out_b.extend(sb.dispatch(st.message()).iter().map(|m| m.to_json())),
                None => break,
            }
        }
        prop_assert_eq!(out_a, solo(&a));
        prop_assert_eq!(out_b, solo(&b));
    }
}
