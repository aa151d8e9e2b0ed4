//! WebSocket/HTTP front end for a teleoperation session.
//!
//! * `GET /session` upgrades to a WebSocket carrying JSON [`GatewayMessage`]s.
//!   The server pushes `TelemetrySnapshot`s (10 Hz) and `SessionEvent`s; the
//!   client sends `CommandRequest`s and gets a `CommandAck` back.
//! * `GET /health` and `GET /session/metrics` return JSON.
//!
//! Commands are forwarded one at a time through the session's command
//! queue, where they take the same clamp path as the bridge stream.

use std::net::SocketAddr;
use std::sync::{mpsc, Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{IntoResponse, Json};
use axum::routing::get;
use axum::Router;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, oneshot, watch};

use vdt_core::session::{
    CommandAck, CommandEnvelope, OperatorCommand, Session, SessionError, SessionMetrics, SessionObserver,
    SessionOutput, TelemetrySnapshot,
};

/// Messages a client can fall behind by before it is disconnected.
pub const CLIENT_BACKLOG: usize = 64;
const ACK_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionEventKind {
    Start,
    Stop,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub event: SessionEventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// Everything on the `/session` socket, tagged by `"type"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum GatewayMessage {
    TelemetrySnapshot(TelemetrySnapshot),
    CommandRequest(OperatorCommand),
    CommandAck(CommandAck),
    SessionEvent(SessionEvent),
}

impl GatewayMessage {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Idle,
    Running,
    Stopped,
}

struct Shared {
    feed: broadcast::Sender<Arc<str>>,
    commands: Mutex<Option<mpsc::Sender<CommandEnvelope>>>,
    metrics: Mutex<SessionMetrics>,
    status: Mutex<SessionStatus>,
    closing: watch::Sender<bool>,
}

impl Shared {
    fn publish(&self, msg: &GatewayMessage) {
        match msg.to_json() {
            // No receivers is fine: the session never waits on clients.
            Ok(text) => {
                let _ = self.feed.send(text.into());
            }
            Err(e) => {
                log::error!("could not serialize gateway message: {e}");
                let event = GatewayMessage::SessionEvent(SessionEvent {
                    event: SessionEventKind::Error,
                    message: Some(format!("serialization failed: {e}")),
                });
                if let Ok(text) = event.to_json() {
                    let _ = self.feed.send(text.into());
                }
            }
        }
    }
}

/// Gateway state shared by the HTTP handlers and the session observer.
#[derive(Clone)]
pub struct Gateway {
    shared: Arc<Shared>,
}

impl Default for Gateway {
    fn default() -> Self {
        Self::new()
    }
}

impl Gateway {
    pub fn new() -> Self {
        let (feed, _) = broadcast::channel(CLIENT_BACKLOG);
        let (closing, _) = watch::channel(false);
        Self {
            shared: Arc::new(Shared {
                feed,
                commands: Mutex::new(None),
                metrics: Mutex::new(SessionMetrics::default()),
                status: Mutex::new(SessionStatus::Idle),
                closing,
            }),
        }
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/health", get(health))
            .route("/session", get(session_socket))
            .route("/session/metrics", get(session_metrics))
            .with_state(self.shared.clone())
    }

    /// Observer to install on the session.
    pub fn observer(&self) -> GatewayObserver {
        GatewayObserver {
            shared: self.shared.clone(),
        }
    }

    pub fn status(&self) -> SessionStatus {
        *self.shared.status.lock().expect("status lock")
    }

    pub fn client_count(&self) -> usize {
        self.shared.feed.receiver_count()
    }

    fn start(&self, commands: mpsc::Sender<CommandEnvelope>) {
        *self.shared.commands.lock().expect("command lock") = Some(commands);
        *self.shared.status.lock().expect("status lock") = SessionStatus::Running;
        self.shared.publish(&GatewayMessage::SessionEvent(SessionEvent {
            event: SessionEventKind::Start,
            message: None,
        }));
    }

    fn stop(&self, error: Option<String>) {
        self.shared.commands.lock().expect("command lock").take();
        *self.shared.status.lock().expect("status lock") = SessionStatus::Stopped;
        if let Some(e) = &error {
            self.shared.publish(&GatewayMessage::SessionEvent(SessionEvent {
                event: SessionEventKind::Error,
                message: Some(e.clone()),
            }));
        }
        self.shared.publish(&GatewayMessage::SessionEvent(SessionEvent {
            event: SessionEventKind::Stop,
            message: None,
        }));
        self.shared.closing.send_replace(true);
    }

    /// Serves `listener` while `session` runs on a blocking thread, then
    /// tells clients the session stopped and shuts the server down.
    pub async fn run_session(&self, listener: TcpListener, session: Session) -> Result<SessionOutput, SessionError> {
        let (tx, rx) = mpsc::channel();
        let session = session.with_commands(rx).with_observer(self.observer());
        let (stop_tx, stop_rx) = oneshot::channel::<()>();
        let app = self.router();
        let server = tokio::spawn(async move {
            let shutdown = async {
                let _ = stop_rx.await;
            };
            if let Err(e) = axum::serve(listener, app).with_graceful_shutdown(shutdown).await {
                log::error!("gateway server failed: {e}");
            }
        });
        self.start(tx);
        let result = match tokio::task::spawn_blocking(move || session.run()).await {
            Ok(r) => r,
            Err(e) => Err(SessionError::Config(format!("session thread failed: {e}"))),
        };
        let error = match &result {
            Ok(out) => out.report.halted.clone(),
            Err(e) => Some(e.to_string()),
        };
        self.stop(error);
        let _ = stop_tx.send(());
        let _ = tokio::time::timeout(Duration::from_secs(2), server).await;
        result
    }
}

/// Publishes snapshots and metrics from the session thread.
pub struct GatewayObserver {
    shared: Arc<Shared>,
}

impl SessionObserver for GatewayObserver {
    fn snapshot(&mut self, snapshot: &TelemetrySnapshot) {
        self.shared.publish(&GatewayMessage::TelemetrySnapshot(snapshot.clone()));
    }

    fn metrics(&mut self, metrics: &SessionMetrics) {
        *self.shared.metrics.lock().expect("metrics lock") = metrics.clone();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub session: SessionStatus,
    pub clients: usize,
}

async fn health(State(shared): State<Arc<Shared>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        session: *shared.status.lock().expect("status lock"),
        clients: shared.feed.receiver_count(),
    })
}

async fn session_metrics(State(shared): State<Arc<Shared>>) -> Json<SessionMetrics> {
    Json(shared.metrics.lock().expect("metrics lock").clone())
}

async fn session_socket(ws: WebSocketUpgrade, State(shared): State<Arc<Shared>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client_loop(socket, shared))
}

/// What a client's subscription yields next.
#[derive(Debug, PartialEq)]
pub enum Feed {
    Message(Arc<str>),
    /// The client fell more than [`CLIENT_BACKLOG`] messages behind.
    Overrun(u64),
    Closed,
}

pub async fn next_feed(rx: &mut broadcast::Receiver<Arc<str>>) -> Feed {
    match rx.recv().await {
        Ok(m) => Feed::Message(m),
        Err(broadcast::error::RecvError::Lagged(n)) => Feed::Overrun(n),
        Err(broadcast::error::RecvError::Closed) => Feed::Closed,
    }
}

async fn client_loop(mut socket: WebSocket, shared: Arc<Shared>) {
    let mut feed = shared.feed.subscribe();
    let mut closing = shared.closing.subscribe();
    loop {
        tokio::select! {
            next = next_feed(&mut feed) => match next {
                Feed::Message(text) => {
                    if socket.send(WsMessage::Text(text.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                Feed::Overrun(n) => {
                    log::warn!("client fell {n} messages behind, disconnecting");
                    break;
                }
                Feed::Closed => break,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(WsMessage::Text(text))) => {
                    let reply = handle_client_text(&shared, text.as_str()).await;
                    match reply.to_json() {
                        Ok(json) => {
                            if socket.send(WsMessage::Text(json.into())).await.is_err() {
                                break;
                            }
                        }
                        Err(e) => log::error!("could not serialize reply: {e}"),
                    }
                }
                Some(Ok(WsMessage::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
            () = async { let _ = closing.wait_for(|c| *c).await; } => {
                // Flush what is already queued (the stop event) before closing.
                while let Ok(text) = feed.try_recv() {
                    if socket.send(WsMessage::Text(text.as_ref().into())).await.is_err() {
                        return;
                    }
                }
                let _ = socket.send(WsMessage::Close(None)).await;
                break;
            }
        }
    }
}

fn rejected(reason: String) -> GatewayMessage {
    GatewayMessage::CommandAck(CommandAck {
        accepted: false,
        velocity: [0.0; 3],
        yaw_rate: 0.0,
        clamped: false,
        reason: Some(reason),
    })
}

async fn handle_client_text(shared: &Shared, text: &str) -> GatewayMessage {
    let command = match serde_json::from_str::<GatewayMessage>(text) {
        Ok(GatewayMessage::CommandRequest(c)) => c,
        Ok(_) => return rejected("only CommandRequest messages are accepted".into()),
        Err(e) => return rejected(format!("invalid command: {e}")),
    };
    let (tx, rx) = oneshot::channel();
    let queued = {
        let guard = shared.commands.lock().expect("command lock");
        match guard.as_ref() {
            Some(commands) => commands
                .send(CommandEnvelope::new(command, move |ack| {
                    let _ = tx.send(ack);
                }))
                .is_ok(),
            None => false,
        }
    };
    if !queued {
        return rejected("session stopped".into());
    }
    match tokio::time::timeout(ACK_TIMEOUT, rx).await {
        Ok(Ok(ack)) => GatewayMessage::CommandAck(ack),
        _ => rejected("session stopped".into()),
    }
}

/// Binds the gateway listener, reporting the bound address.
pub async fn bind(addr: SocketAddr) -> std::io::Result<(TcpListener, SocketAddr)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    Ok((listener, local))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn messages_carry_type_tag() {
        let msg = GatewayMessage::CommandRequest(OperatorCommand {
            velocity: [1.0, 2.0, 0.0],
            yaw_rate: 0.1,
        });
        let v: serde_json::Value = serde_json::from_str(&msg.to_json().unwrap()).unwrap();
        assert_eq!(v["type"], "CommandRequest");
        assert_eq!(v["velocity"][1], 2.0);
        let back: GatewayMessage = serde_json::from_value(v).unwrap();
        assert_eq!(back, msg);
        let ev = GatewayMessage::SessionEvent(SessionEvent {
            event: SessionEventKind::Stop,
            message: None,
        });
        assert_eq!(ev.to_json().unwrap(), r#"{"type":"SessionEvent","event":"stop"}"#);
    }

    #[tokio::test]
    async fn slow_subscriber_is_overrun() {
        let (tx, mut rx) = broadcast::channel::<Arc<str>>(CLIENT_BACKLOG);
        for i in 0..CLIENT_BACKLOG + 1 {
            tx.send(i.to_string().into()).unwrap();
        }
        assert_eq!(next_feed(&mut rx).await, Feed::Overrun(1));
        let (tx, mut rx) = broadcast::channel::<Arc<str>>(CLIENT_BACKLOG);
        for i in 0..CLIENT_BACKLOG {
            tx.send(i.to_string().into()).unwrap();
        }
        assert_eq!(next_feed(&mut rx).await, Feed::Message("0".into()));
    }

    #[tokio::test]
    async fn stopped_session_rejects_commands() {
        let gw = Gateway::new();
        let text = GatewayMessage::CommandRequest(OperatorCommand::default()).to_json().unwrap();
        let reply = handle_client_text(&gw.shared, &text).await;
        match reply {
            GatewayMessage::CommandAck(ack) => assert_eq!(ack.reason.as_deref(), Some("session stopped")),
            other => panic!("{other:?}"),
        }
    }
}
