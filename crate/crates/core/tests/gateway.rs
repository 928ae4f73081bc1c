//! The WebSocket gateway and health endpoint over real sockets.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio::sync::oneshot;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};
use vuishim::gateway::{self, GatewayState};
use vuishim::normalizer::RuleNormalizer;
use vuishim::session::SessionConfig;

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

struct Server {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
    }
}

async fn start() -> Server {
    let state = GatewayState::new(
        Arc::new(RuleNormalizer::default()),
        SessionConfig::default(),
    );
    let listener = gateway::bind("127.0.0.1:0".parse().unwrap()).await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (stop, stopped) = oneshot::channel::<()>();
    tokio::spawn(gateway::serve(listener, state, async {
        let _ = stopped.await;
    }));
    Server {
        addr,
        stop: Some(stop),
    }
}

async fn connect(server: &Server) -> Ws {
    let (ws, _) = connect_async(format!("ws://{}/session", server.addr))
        .await
        .unwrap();
    ws
}

async fn send(ws: &mut Ws, frame: Value) {
    ws.send(Message::text(frame.to_string())).await.unwrap();
}

async fn next(ws: &mut Ws) -> Value {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next())
            .await
            .expect("frame within 5 s")
            .expect("stream open")
            .unwrap();
        if let Message::Text(text) = msg {
            return serde_json::from_str(text.as_str()).unwrap();
        }
    }
}

/// Frames up to and including the end of one utterance, or a single error.
async fn batch(ws: &mut Ws) -> Vec<Value> {
    let mut frames = Vec::new();
    loop {
        let f = next(ws).await;
        let done = f["type"] == "error" || (f["type"] == "listening_state" && f["on"] == false);
        frames.push(f);
        if done {
            return frames;
        }
    }
}

fn types(frames: &[Value]) -> Vec<&str> {
    frames.iter().map(|f| f["type"].as_str().unwrap()).collect()
}

async fn health(addr: SocketAddr) -> Value {
    let mut stream = TcpStream::connect(addr).await.unwrap();
    stream
        .write_all(b"GET /healthz HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut raw = String::new();
    stream.read_to_string(&mut raw).await.unwrap();
    assert!(raw.starts_with("HTTP/1.1 200"), "{raw}");
    let body = raw.split("\r\n\r\n").nth(1).unwrap();
    serde_json::from_str(body).unwrap()
}

#[tokio::test]
async fn healthz_reports_service_metadata() {
    let server = start().await;
    let h = health(server.addr).await;
    assert_eq!(h["status"], "ok");
    assert_eq!(h["service"], "vuishim");
    assert_eq!(h["backend"], "rule");
    assert_eq!(h["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(h["active_sessions"], 0);
}

#[tokio::test]
async fn open_echoes_buffer() {
    let server = start().await;
    let mut ws = connect(&server).await;
    send(
        &mut ws,
        json!({"type": "open", "initial_text": "apple pie and apple tart"}),
    )
    .await;
    let opened = next(&mut ws).await;
    assert_eq!(opened["type"], "session_opened");
    assert_eq!(opened["buffer"], "apple pie and apple tart");
    assert!(opened["id"].as_str().is_some_and(|id| !id.is_empty()));
}

#[tokio::test]
async fn utterance_frames_arrive_in_event_order() {
    let server = start().await;
    let mut ws = connect(&server).await;
    send(
        &mut ws,
        json!({"type": "open", "initial_text": "apple pie"}),
    )
    .await;
    next(&mut ws).await;
    send(&mut ws, json!({"type": "utter", "text": "select apple"})).await;
    let frames = batch(&mut ws).await;
    assert_eq!(
        types(&frames),
        [
            "listening_state",
            "transcript",
            "normalized",
            "relayed",
            "vui_outcome",
            "listening_state"
        ]
    );
    assert_eq!(frames[1]["text"], "select apple");
    assert_eq!(frames[3]["command"], "SELECT apple");
    assert_eq!(frames[4]["outcome"]["status"], "applied");
}

#[tokio::test]
async fn malformed_frames_get_bad_request_and_keep_the_connection() {
    let server = start().await;
    let mut ws = connect(&server).await;
    ws.send(Message::text("{not json")).await.unwrap();
    let err = next(&mut ws).await;
    assert_eq!(
        (err["type"].as_str(), err["code"].as_str()),
        (Some("error"), Some("bad_request"))
    );
    ws.send(Message::binary(vec![1u8, 2, 3])).await.unwrap();
    assert_eq!(next(&mut ws).await["code"], "bad_request");
    send(&mut ws, json!({"type": "utter", "text": "select apple"})).await;
    assert_eq!(next(&mut ws).await["code"], "no_session");

    send(&mut ws, json!({"type": "open", "initial_text": "apple"})).await;
    assert_eq!(next(&mut ws).await["type"], "session_opened");
    send(&mut ws, json!({"type": "utter", "text": "delete apple"})).await;
    let frames = batch(&mut ws).await;
    assert_eq!(frames[4]["outcome"]["buffer"], "");
}

#[tokio::test]
async fn clarification_round_trip_over_the_wire() {
    let server = start().await;
    let mut ws = connect(&server).await;
    send(
        &mut ws,
        json!({"type": "open", "initial_text": "we eat apple pie"}),
    )
    .await;
    next(&mut ws).await;
    send(&mut ws, json!({"type": "answer", "text": "soon"})).await;
    assert_eq!(next(&mut ws).await["code"], "no_clarification");
    send(
        &mut ws,
        json!({"type": "utter", "text": "insert before apple pie"}),
    )
    .await;
    let asked = batch(&mut ws).await;
    assert!(asked.iter().any(|f| f["type"] == "clarification_asked"
        && f["question"] == "What should I insert before apple pie?"));
    send(&mut ws, json!({"type": "answer", "text": "in the morning"})).await;
    let done = batch(&mut ws).await;
    let relayed = done.iter().find(|f| f["type"] == "relayed").unwrap();
    assert_eq!(relayed["command"], "INSERT in the morning BEFORE apple pie");
}

#[tokio::test]
async fn sessions_are_isolated_and_die_with_their_connection() {
    let server = start().await;
    let mut a = connect(&server).await;
    let mut b = connect(&server).await;
    send(&mut a, json!({"type": "open", "initial_text": "red apple"})).await;
    send(
        &mut b,
        json!({"type": "open", "initial_text": "blue river"}),
    )
    .await;
    let (ida, idb) = (
        next(&mut a).await["id"].clone(),
        next(&mut b).await["id"].clone(),
    );
    assert_ne!(ida, idb);
    assert_eq!(health(server.addr).await["active_sessions"], 2);

    send(&mut a, json!({"type": "utter", "text": "delete apple"})).await;
    send(&mut b, json!({"type": "utter", "text": "delete river"})).await;
    let fa = batch(&mut a).await;
    let fb = batch(&mut b).await;
    assert_eq!(fa[4]["outcome"]["buffer"], "red");
    assert_eq!(fb[4]["outcome"]["buffer"], "blue");
    assert!(fa.iter().all(|f| !f.to_string().contains("river")));
    assert!(fb.iter().all(|f| !f.to_string().contains("apple")));

    send(&mut a, json!({"type": "close"})).await;
    let closed = next(&mut a).await;
    assert_eq!(
        (closed["type"].clone(), closed["id"].clone()),
        (json!("session_closed"), ida)
    );
    drop(b);
    let mut active = Value::Null;
    for _ in 0..50 {
        active = health(server.addr).await["active_sessions"].clone();
        if active == 0 {
            break;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    assert_eq!(active, 0);

    // A fresh connection starts from nothing.
    let mut c = connect(&server).await;
    send(&mut c, json!({"type": "utter", "text": "undo"})).await;
    assert_eq!(next(&mut c).await["code"], "no_session");
}
