//! Typing service. One TCP port carries three kinds of connection, told apart
//! by their first four bytes:
//!
//! * `EEGW` frame stream; `CMDF` messages for the commands its frames trigger
//!   are written back on the same connection.
//! * `CMDS` subscribes to every `CMDF` message. The server echoes `CMDS` once
//!   the subscription is live.
//! * `FEED` subscribes to the newline-delimited JSON event feed, starting with
//!   a `state` event.
//!
//! With `--http`, `/ws` bridges browsers: it streams the feed and accepts
//! `{"intent": k}` or `{"channels": c, "values": [...]}` text messages and
//! binary `EEGW` frames.
//!
//! All connections share one session. Fan-out goes through bounded broadcast
//! queues, so a slow subscriber loses its oldest messages instead of stalling
//! ingest.

use std::sync::{Arc, Mutex};

use anyhow::{bail, Context, Result};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use neurotype_core::typing::wire::{COMMAND_LEN, FRAME_HEADER_LEN, FRAME_MAGIC};
use neurotype_core::typing::{stub_frame, EventKind, Frame, FrameHeader, Step, TypingSession};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc};

use crate::classifier::{Loaded, SharedClassifier};

pub const COMMAND_SUBSCRIBE: &[u8; 4] = b"CMDS";
pub const FEED_SUBSCRIBE: &[u8; 4] = b"FEED";
const EVENT_QUEUE: usize = 256;
const COMMAND_QUEUE: usize = 64;
// larger bodies are not skipped, the connection is dropped
const MAX_SKIP_BODY: usize = 1 << 24;

pub struct Hub {
    session: Mutex<TypingSession<SharedClassifier>>,
    events: broadcast::Sender<String>,
    commands: broadcast::Sender<[u8; COMMAND_LEN]>,
}

impl Hub {
    pub fn new(loaded: Loaded) -> Self {
        Hub {
            session: Mutex::new(TypingSession::new(loaded.classifier, loaded.map)),
            events: broadcast::channel(EVENT_QUEUE).0,
            commands: broadcast::channel(COMMAND_QUEUE).0,
        }
    }

    fn session(&self) -> std::sync::MutexGuard<'_, TypingSession<SharedClassifier>> {
        self.session.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn channels(&self) -> usize {
        self.session().channels()
    }

    pub fn snapshot(&self) -> String {
        self.session().event(EventKind::State).to_line()
    }

    pub fn error_line(&self, message: &str) -> String {
        self.session().error_event(message).to_line()
    }

    /// Processes one frame and publishes the outcome. Publication happens under
    /// the session lock so the feed order matches the processing order.
    /// Errors are returned, not published; the caller decides who sees them.
    pub fn ingest(&self, frame: &Frame) -> neurotype_core::Result<Step> {
        let mut session = self.session();
        let step = session.process(frame)?;
        let _ = self.events.send(step.event.to_line());
        if let Some(m) = step.command {
            let _ = self.commands.send(m.encode());
        }
        Ok(step)
    }

    pub fn publish_error(&self, message: &str) {
        let _ = self.events.send(self.error_line(message));
    }
}

async fn ingest_blocking(hub: &Arc<Hub>, frame: Frame) -> Result<neurotype_core::Result<Step>> {
    let hub = hub.clone();
    Ok(tokio::task::spawn_blocking(move || hub.ingest(&frame)).await?)
}

pub async fn run(listen: &str, http: Option<&str>, loaded: Loaded) -> Result<()> {
    let hub = Arc::new(Hub::new(loaded));
    let listener = TcpListener::bind(listen).await.with_context(|| format!("binding {listen}"))?;
    println!("listening on {}", listener.local_addr()?);
    if let Some(addr) = http {
        let l = TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
        println!("http on {}", l.local_addr()?);
        let app = router(hub.clone());
        tokio::spawn(async move {
            if let Err(e) = axum::serve(l, app).await {
                eprintln!("http bridge stopped: {e}");
            }
        });
    }
    loop {
        let (sock, peer) = listener.accept().await?;
        let hub = hub.clone();
        tokio::spawn(async move {
            if let Err(e) = handle(sock, hub).await {
                eprintln!("{peer}: {e:#}");
            }
        });
    }
}

async fn handle(sock: TcpStream, hub: Arc<Hub>) -> Result<()> {
    sock.set_nodelay(true)?;
    let (mut rd, wr) = sock.into_split();
    let mut prefix = [0u8; 4];
    rd.read_exact(&mut prefix).await?;
    match &prefix {
        FRAME_MAGIC => ingest_stream(prefix, rd, wr, hub).await,
        COMMAND_SUBSCRIBE => {
            let rx = hub.commands.subscribe();
            let mut wr = wr;
            wr.write_all(COMMAND_SUBSCRIBE).await?;
            forward(rx, wr, |m| m.to_vec()).await
        }
        FEED_SUBSCRIBE => {
            let rx = hub.events.subscribe();
            let mut wr = wr;
            wr.write_all(hub.snapshot().as_bytes()).await?;
            forward(rx, wr, |line| line.into_bytes()).await
        }
        other => {
            let msg = format!("unknown stream prefix {other:?}");
            hub.publish_error(&msg);
            bail!(msg)
        }
    }
}

async fn forward<T: Clone>(mut rx: broadcast::Receiver<T>, mut wr: OwnedWriteHalf, bytes: impl Fn(T) -> Vec<u8>) -> Result<()> {
    loop {
        match rx.recv().await {
            Ok(item) => wr.write_all(&bytes(item)).await?,
            Err(broadcast::error::RecvError::Lagged(_)) => continue,
            Err(broadcast::error::RecvError::Closed) => return Ok(()),
        }
    }
}

/// Frames in, `CMDF` replies out. A frame whose header parses but whose shape
/// is wrong is skipped and reported; an unreadable header ends the connection
/// because the stream cannot be resynchronised.
async fn ingest_stream(prefix: [u8; 4], mut rd: OwnedReadHalf, mut wr: OwnedWriteHalf, hub: Arc<Hub>) -> Result<()> {
    let mut header = [0u8; FRAME_HEADER_LEN];
    header[..4].copy_from_slice(&prefix);
    rd.read_exact(&mut header[4..]).await?;
    loop {
        let h = match FrameHeader::parse(&header) {
            Ok(h) => h,
            Err(e) => {
                hub.publish_error(&e.to_string());
                return Err(e.into());
            }
        };
        if h.body_len() > MAX_SKIP_BODY {
            let msg = format!("frame body of {} bytes exceeds the limit", h.body_len());
            hub.publish_error(&msg);
            bail!(msg);
        }
        let mut body = vec![0u8; h.body_len()];
        rd.read_exact(&mut body).await?;
        let outcome = match Frame::from_body(h, &body) {
            Ok(frame) => ingest_blocking(&hub, frame).await?,
            Err(e) => Err(e),
        };
        match outcome {
            Ok(step) => {
                if let Some(m) = step.command {
                    wr.write_all(&m.encode()).await?;
                }
            }
            Err(e) => hub.publish_error(&e.to_string()),
        }
        match rd.read_exact(&mut header).await {
            Ok(_) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(()),
            Err(e) => return Err(e.into()),
        }
    }
}

fn router(hub: Arc<Hub>) -> Router {
    Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/state", get(state_line))
        .with_state(hub)
}

async fn state_line(State(hub): State<Arc<Hub>>) -> String {
    hub.snapshot()
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(hub): State<Arc<Hub>>) -> Response {
    ws.on_upgrade(move |socket| ws_session(socket, hub))
}

/// Frame carried by a bridge text message.
fn bridge_frame(text: &str, channels: usize) -> std::result::Result<Frame, String> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| format!("bad message: {e}"))?;
    if let Some(intent) = v.get("intent") {
        return match intent.as_u64() {
            Some(k) if k < neurotype_core::data::NUM_INTENTS as u64 => Ok(stub_frame(channels, k as u8)),
            _ => Err(format!("intent must be 0..{}, got {intent}", neurotype_core::data::NUM_INTENTS)),
        };
    }
    let c = v.get("channels").and_then(|c| c.as_u64()).ok_or("message needs `intent` or `channels`")?;
    let values = v
        .get("values")
        .and_then(|v| v.as_array())
        .ok_or("message needs `values`")?
        .iter()
        .map(|x| x.as_f64().map(|f| f as f32).ok_or("values must be numbers"))
        .collect::<std::result::Result<Vec<f32>, _>>()?;
    Frame::new(c as usize, values).map_err(|e| e.to_string())
}

/// Feed out, frames in. Errors caused by this socket go only to this socket.
async fn ws_session(socket: WebSocket, hub: Arc<Hub>) {
    let (mut tx, mut rx) = socket.split();
    let mut events = hub.events.subscribe();
    let (own_tx, mut own_rx) = mpsc::channel::<String>(16);
    let first = hub.snapshot();
    let writer = tokio::spawn(async move {
        if tx.send(Message::text(first.trim_end())).await.is_err() {
            return;
        }
        loop {
            let line = tokio::select! {
                ev = events.recv() => match ev {
                    Ok(line) => line,
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => return,
                },
                own = own_rx.recv() => match own {
                    Some(line) => line,
                    None => return,
                },
            };
            if tx.send(Message::text(line.trim_end())).await.is_err() {
                return;
            }
        }
    });
    let channels = hub.channels();
    while let Some(Ok(msg)) = rx.next().await {
        let frame = match msg {
            Message::Text(t) => bridge_frame(t.as_str(), channels),
            Message::Binary(b) => Frame::decode(&b).map_err(|e| e.to_string()),
            Message::Close(_) => break,
            _ => continue,
        };
        let outcome = match frame {
            Ok(f) => match ingest_blocking(&hub, f).await {
                Ok(r) => r.map(|_| ()).map_err(|e| e.to_string()),
                Err(e) => Err(e.to_string()),
            },
            Err(e) => Err(e),
        };
        if let Err(e) = outcome {
            if own_tx.send(hub.error_line(&e)).await.is_err() {
                break;
            }
        }
    }
    writer.abort();
}
