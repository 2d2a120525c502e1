//! Runs a short session and prints its telemetry row as CSV.

use std::sync::Arc;

use convo::session::{ClientMessage, Service};
use convo::telemetry::{export_csv, transcript_means, ManualClock};
use convo::Modality;

fn main() {
    let clock = Arc::new(ManualClock::default());
    let service = Service::in_memory(clock.clone());
    let mut session = service.open_session().unwrap();
    for (text, modality) in [
        ("create a program", Modality::Voice),
        ("hello", Modality::Voice),
        ("say hello world", Modality::Text),
        ("flibbertigibbet", Modality::Text),
        ("what can i say", Modality::Voice),
        ("done", Modality::Text),
    ] {
        clock.advance(1500);
        session.dispatch(ClientMessage::Utterance { text: text.into(), modality });
    }
    print!("{}", String::from_utf8(export_csv(session.telemetry(), session.id())).unwrap());
    let (chars, words) = transcript_means(session.transcript().entries());
    println!("recounted from the transcript: {chars:.3} chars, {words:.3} words");
}
