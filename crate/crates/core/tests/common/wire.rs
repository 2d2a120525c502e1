use std::net::SocketAddr;
use std::sync::Arc;

use convo::session::{server, ClientMessage, Service};
use futures_util::{SinkExt, StreamExt};
use serde::Deserialize;
use serde_json::value::RawValue;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

/// One server message, with the program snapshot kept verbatim.
#[derive(Debug, Deserialize)]
pub struct Reply {
    #[serde(rename = "type")]
    pub kind: String,
    pub text: Option<String>,
    pub state: Option<String>,
    pub program: Option<Box<RawValue>>,
    pub event: Option<serde_json::Value>,
    pub code: Option<String>,
    pub message: Option<String>,
    pub session: Option<String>,
}

impl Reply {
    pub fn parse(frame: &str) -> Reply {
        serde_json::from_str(frame).unwrap_or_else(|e| panic!("{e}: {frame}"))
    }
}

pub type Socket = WebSocketStream<MaybeTlsStream<TcpStream>>;

pub async fn start(service: Service) -> SocketAddr {
    server::spawn(Arc::new(service), "127.0.0.1:0").await.unwrap()
}

pub struct Client {
    pub socket: Socket,
    pub greeting: Reply,
}

/// Message type the server doesn't know; its error reply marks the end of
/// the replies to whatever was sent before it.
const BARRIER: &str = r#"{"type":"barrier"}"#;

impl Client {
    pub async fn connect(addr: SocketAddr) -> Client {
        let (mut socket, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/session"))
            .await
            .unwrap();
        let greeting = next_text(&mut socket).await.map(|t| Reply::parse(&t)).expect("greeting");
        Client { socket, greeting }
    }

    pub async fn send_raw(&mut self, raw: &str) -> Vec<Reply> {
        self.socket.send(Message::Text(raw.into())).await.unwrap();
        self.socket.send(Message::Text(BARRIER.into())).await.unwrap();
        let mut out = Vec::new();
        loop {
            let text = next_text(&mut self.socket).await.expect("socket closed mid-turn");
            let reply = Reply::parse(&text);
            if reply.code.as_deref() == Some("unknown_type")
                && reply.message.as_deref().is_some_and(|m| m.contains("barrier"))
            {
                return out;
            }
            out.push(reply);
        }
    }

    pub async fn send(&mut self, msg: &ClientMessage) -> Vec<Reply> {
        self.send_raw(&serde_json::to_string(msg).unwrap()).await
    }
}

pub async fn next_text(socket: &mut Socket) -> Option<String> {
    while let Some(frame) = socket.next().await {
        match frame.ok()? {
            Message::Text(t) => return Some(t.to_string()),
            Message::Close(_) => return None,
            _ => continue,
        }
    }
    None
}
