//! WebSocket endpoint `/session`.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::ws::{close_code, CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use tokio::net::TcpListener;

use super::{ErrorCode, ServerMessage, Service};

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/session", get(upgrade))
        .with_state(service)
}

/// Serves until the listener fails.
pub async fn serve(service: Arc<Service>, listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(service)).await
}

/// Binds `addr` and serves in the background, returning the bound address.
pub async fn spawn(service: Arc<Service>, addr: &str) -> std::io::Result<SocketAddr> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    tokio::spawn(async move {
        if let Err(err) = serve(service, listener).await {
            log::error!("server stopped: {err}");
        }
    });
    Ok(local)
}

async fn upgrade(ws: WebSocketUpgrade, State(service): State<Arc<Service>>) -> Response {
    ws.on_upgrade(move |socket| connection(socket, service))
}

async fn send(socket: &mut WebSocket, msg: &ServerMessage) -> bool {
    socket.send(Message::Text(msg.to_json())).await.is_ok()
}

async fn connection(mut socket: WebSocket, service: Arc<Service>) {
    let mut session = match service.open_session() {
        Ok(s) => s,
        Err(err) => {
            let msg = ServerMessage::Error {
                code: ErrorCode::Capacity,
                message: err.to_string(),
            };
            let _ = send(&mut socket, &msg).await;
            let _ = socket
                .send(Message::Close(Some(CloseFrame {
                    code: close_code::AGAIN,
                    reason: "capacity".into(),
                })))
                .await;
            return;
        }
    };
    log::info!("{} opened", session.id());
    if !send(&mut socket, &session.greeting()).await {
        return;
    }
    while let Some(Ok(frame)) = socket.recv().await {
        let replies = match frame {
            Message::Text(text) => session.dispatch_raw(&text),
            Message::Binary(bytes) => match std::str::from_utf8(&bytes) {
                Ok(text) => session.dispatch_raw(text),
                Err(_) => vec![ServerMessage::Error {
                    code: ErrorCode::Malformed,
                    message: "frames must be UTF-8 JSON".into(),
                }],
            },
            Message::Close(_) => break,
            Message::Ping(_) | Message::Pong(_) => continue,
        };
        for reply in &replies {
            if !send(&mut socket, reply).await {
                log::info!("{} dropped", session.id());
                return;
            }
        }
    }
    log::info!("{} closed", session.id());
}
