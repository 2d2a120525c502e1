//! Starts the server in process and talks to it over a WebSocket.
//!
//! Pass an address such as `127.0.0.1:8765` to use a running `convo --serve`
//! instead.

use std::sync::Arc;

use convo::session::{server, ClientMessage, Service};
use futures_util::{SinkExt, StreamExt};
use tokio_tungstenite::tungstenite::Message;

#[tokio::main(flavor = "current_thread")]
async fn main() {
    let addr = match std::env::args().nth(1) {
        Some(addr) => addr,
        None => {
            let service = Arc::new(Service::from_config(&Default::default()).unwrap());
            server::spawn(service, "127.0.0.1:0").await.unwrap().to_string()
        }
    };
    let (mut socket, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/session")).await.unwrap();
    println!("<- {}", next(&mut socket).await);

    let messages = [
        ClientMessage::utterance("create a program called echo"),
        ClientMessage::utterance("get user input and save it as word"),
        ClientMessage::utterance("say thanks"),
        ClientMessage::utterance("done"),
        ClientMessage::utterance("play echo"),
        ClientMessage::exec_input("hello"),
    ];
    for msg in messages {
        let json = serde_json::to_string(&msg).unwrap();
        println!("-> {json}");
        socket.send(Message::Text(json)).await.unwrap();
        // Every message gets at least one reply; finishing a run adds a
        // closing response after the events.
        let replies = if matches!(msg, ClientMessage::ExecInput { .. }) { 3 } else { 1 };
        for _ in 0..replies {
            println!("<- {}", next(&mut socket).await);
        }
        if matches!(msg, ClientMessage::Utterance { ref text, .. } if text == "play echo") {
            println!("<- {}", next(&mut socket).await);
        }
    }
    socket.close(None).await.unwrap();
}

async fn next<S>(socket: &mut S) -> String
where
    S: StreamExt<Item = Result<Message, tokio_tungstenite::tungstenite::Error>> + Unpin,
{
    loop {
        match socket.next().await.expect("server hung up").unwrap() {
            Message::Text(t) => return t,
            _ => continue,
        }
    }
}
