//! WebSocket front end: one shim session per connection, JSON text frames
//! both ways, plus a health endpoint.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

use crate::normalizer::NormalizerBackend;
use crate::session::{Session, SessionConfig, SessionError, SessionEvent};

/// Client to server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientFrame {
    Open {
        #[serde(default)]
        initial_text: String,
        #[serde(default)]
        config: Option<SessionConfig>,
    },
    Utter {
        text: String,
    },
    Answer {
        text: String,
    },
    Close,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Not a JSON text frame of a known shape.
    BadRequest,
    /// `utter`, `answer` or `close` before `open`.
    NoSession,
    /// A second `open` on the same connection.
    SessionExists,
    /// `answer` with no question outstanding.
    NoClarification,
    EmptyUtterance,
    /// The session configuration was rejected.
    InvalidConfig,
}

/// Server to client: every session event, plus a few control frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ServerFrame {
    Event(SessionEvent),
    Control(Control),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Control {
    SessionOpened { id: String, buffer: String },
    SessionClosed { id: String },
    Error { code: ErrorCode, message: String },
}

impl ServerFrame {
    fn error(code: ErrorCode, message: impl Into<String>) -> ServerFrame {
        ServerFrame::Control(Control::Error {
            code,
            message: message.into(),
        })
    }

    pub fn is_error(&self) -> bool {
        matches!(self, ServerFrame::Control(Control::Error { .. }))
    }
}

pub struct GatewayState {
    backend: Arc<dyn NormalizerBackend>,
    default_config: SessionConfig,
    next_id: AtomicU64,
    active: AtomicUsize,
}

impl GatewayState {
    pub fn new(
        backend: Arc<dyn NormalizerBackend>,
        default_config: SessionConfig,
    ) -> Arc<GatewayState> {
        Arc::new(GatewayState {
            backend,
            default_config,
            next_id: AtomicU64::new(1),
            active: AtomicUsize::new(0),
        })
    }

    pub fn active_sessions(&self) -> usize {
        self.active.load(Ordering::SeqCst)
    }
}

/// The session owned by one connection.
pub struct Slot {
    id: String,
    session: Session,
    state: Arc<GatewayState>,
}

impl Drop for Slot {
    fn drop(&mut self) {
        self.state.active.fetch_sub(1, Ordering::SeqCst);
    }
}

/// Applies one client frame to a connection's slot. Always returns at least
/// one frame.
pub fn respond(
    state: &Arc<GatewayState>,
    slot: &mut Option<Slot>,
    frame: ClientFrame,
) -> Vec<ServerFrame> {
    match frame {
        ClientFrame::Open {
            initial_text,
            config,
        } => {
            if slot.is_some() {
                return vec![ServerFrame::error(
                    ErrorCode::SessionExists,
                    "session already open",
                )];
            }
            let config = config.unwrap_or_else(|| state.default_config.clone());
            let session = match Session::open_with(&initial_text, config, state.backend.clone()) {
                Ok(s) => s,
                Err(e) => return vec![ServerFrame::error(ErrorCode::InvalidConfig, e.to_string())],
            };
            let id = format!("s{}", state.next_id.fetch_add(1, Ordering::SeqCst));
            state.active.fetch_add(1, Ordering::SeqCst);
            let buffer = session.buffer_text();
            *slot = Some(Slot {
                id: id.clone(),
                session,
                state: state.clone(),
            });
            vec![ServerFrame::Control(Control::SessionOpened { id, buffer })]
        }
        ClientFrame::Utter { text } => with_session(slot, |s| utter(s, &text)),
        ClientFrame::Answer { text } => with_session(slot, |s| {
            if s.pending_clarification().is_none() {
                return vec![ServerFrame::error(
                    ErrorCode::NoClarification,
                    "no question is pending",
                )];
            }
            utter(s, &text)
        }),
        ClientFrame::Close => match slot.take() {
            Some(closed) => vec![ServerFrame::Control(Control::SessionClosed {
                id: closed.id.clone(),
            })],
            None => vec![ServerFrame::error(ErrorCode::NoSession, "no open session")],
        },
    }
}

fn with_session(
    slot: &mut Option<Slot>,
    f: impl FnOnce(&mut Session) -> Vec<ServerFrame>,
) -> Vec<ServerFrame> {
    match slot {
        Some(s) => f(&mut s.session),
        None => vec![ServerFrame::error(ErrorCode::NoSession, "send open first")],
    }
}

fn utter(session: &mut Session, text: &str) -> Vec<ServerFrame> {
    match session.utter(text) {
        Ok(events) => events.into_iter().map(ServerFrame::Event).collect(),
        Err(SessionError::EmptyUtterance) => vec![ServerFrame::error(
            ErrorCode::EmptyUtterance,
            "utterance is empty",
        )],
        Err(e) => vec![ServerFrame::error(ErrorCode::BadRequest, e.to_string())],
    }
}

/// Parses and applies one text frame.
pub fn respond_text(
    state: &Arc<GatewayState>,
    slot: &mut Option<Slot>,
    text: &str,
) -> Vec<ServerFrame> {
    match serde_json::from_str::<ClientFrame>(text) {
        Ok(frame) => respond(state, slot, frame),
        Err(e) => vec![ServerFrame::error(ErrorCode::BadRequest, e.to_string())],
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub service: String,
    pub version: String,
    pub backend: String,
    pub active_sessions: usize,
}

pub fn router(state: Arc<GatewayState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/session", get(session_ws))
        .with_state(state)
}

async fn healthz(State(state): State<Arc<GatewayState>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        service: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        backend: state.backend.name().into(),
        active_sessions: state.active_sessions(),
    })
}

async fn session_ws(
    ws: WebSocketUpgrade,
    State(state): State<Arc<GatewayState>>,
) -> impl IntoResponse {
    ws.on_upgrade(move |socket| connection(socket, state))
}

async fn connection(mut socket: WebSocket, state: Arc<GatewayState>) {
    let mut slot: Option<Slot> = None;
    while let Some(msg) = socket.recv().await {
        let frames = match msg {
            Ok(Message::Text(text)) => respond_text(&state, &mut slot, text.as_str()),
            Ok(Message::Binary(_)) => vec![ServerFrame::error(
                ErrorCode::BadRequest,
                "binary frames are not accepted",
            )],
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => continue,
        };
        for frame in frames {
            let text = serde_json::to_string(&frame).expect("frames serialize");
            if socket.send(Message::Text(text.into())).await.is_err() {
                return;
            }
        }
    }
    // Dropping the slot ends the session.
    drop(slot);
}

pub async fn bind(addr: SocketAddr) -> std::io::Result<TcpListener> {
    TcpListener::bind(addr).await
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    state: Arc<GatewayState>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalizer::RuleNormalizer;

    fn state() -> Arc<GatewayState> {
        GatewayState::new(
            Arc::new(RuleNormalizer::default()),
            SessionConfig::default(),
        )
    }

    fn event_types(frames: &[ServerFrame]) -> Vec<String> {
        frames
            .iter()
            .map(|f| {
                serde_json::to_value(f).unwrap()["type"]
                    .as_str()
                    .unwrap()
                    .to_string()
            })
            .collect()
    }

    #[test]
    fn open_utter_close() {
        let st = state();
        let mut slot = None;
        let out = respond_text(
            &st,
            &mut slot,
            r#"{"type":"open","initial_text":"apple pie"}"#,
        );
        assert!(
            matches!(&out[..], [ServerFrame::Control(Control::SessionOpened { buffer, .. })] if buffer == "apple pie")
        );
        assert_eq!(st.active_sessions(), 1);
        let out = respond_text(&st, &mut slot, r#"{"type":"utter","text":"select apple"}"#);
        assert_eq!(
            event_types(&out),
            [
                "listening_state",
                "transcript",
                "normalized",
                "relayed",
                "vui_outcome",
                "listening_state"
            ]
        );
        let out = respond(&st, &mut slot, ClientFrame::Close);
        assert_eq!(event_types(&out), ["session_closed"]);
        assert_eq!(st.active_sessions(), 0);
    }

    #[test]
    fn protocol_errors() {
        let st = state();
        let mut slot = None;
        let code = |frames: Vec<ServerFrame>| match &frames[..] {
            [ServerFrame::Control(Control::Error { code, .. })] => *code,
            other => panic!("{other:?}"),
        };
        assert_eq!(
            code(respond_text(&st, &mut slot, "{nope")),
            ErrorCode::BadRequest
        );
        assert_eq!(
            code(respond_text(&st, &mut slot, r#"{"type":"dance"}"#)),
            ErrorCode::BadRequest
        );
        assert_eq!(
            code(respond(&st, &mut slot, ClientFrame::Close)),
            ErrorCode::NoSession
        );
        respond_text(&st, &mut slot, r#"{"type":"open"}"#);
        assert_eq!(
            code(respond_text(&st, &mut slot, r#"{"type":"open"}"#)),
            ErrorCode::SessionExists
        );
        assert_eq!(
            code(respond_text(
                &st,
                &mut slot,
                r#"{"type":"answer","text":"x"}"#
            )),
            ErrorCode::NoClarification
        );
        assert_eq!(
            code(respond_text(
                &st,
                &mut slot,
                r#"{"type":"utter","text":"  "}"#
            )),
            ErrorCode::EmptyUtterance
        );
    }
}
