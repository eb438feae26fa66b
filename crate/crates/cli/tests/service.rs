//! `neurotype serve` with the stub classifier, driven over its sockets.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use neurotype_core::typing::wire::{encode_frame, COMMAND_LEN};
use neurotype_core::typing::{stub_frame, stub_script, Command as Cmd, CommandMap, CommandMessage};
use serde_json::Value;
use tokio_tungstenite::tungstenite::Message;

const CHANNELS: usize = 14;

struct Server {
    child: Child,
    tcp: String,
    http: Option<String>,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn start(extra: &[&str]) -> Server {
    let mut child = Command::new(env!("CARGO_BIN_EXE_neurotype"))
        .args(["serve", "--listen", "127.0.0.1:0", "--model", "stub", "--channels", &CHANNELS.to_string()])
        .args(extra)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let addr = |l: String, prefix: &str| l.strip_prefix(prefix).unwrap_or_else(|| panic!("unexpected line {l}")).to_string();
    let tcp = addr(lines.next().unwrap().unwrap(), "listening on ");
    let http = (!extra.is_empty()).then(|| addr(lines.next().unwrap().unwrap(), "http on "));
    Server { child, tcp, http }
}

struct Feed(BufReader<TcpStream>);

impl Feed {
    fn open(addr: &str) -> Feed {
        let mut s = TcpStream::connect(addr).unwrap();
        s.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
        s.write_all(b"FEED").unwrap();
        Feed(BufReader::new(s))
    }

    fn next(&mut self) -> Value {
        let mut line = String::new();
        self.0.read_line(&mut line).unwrap();
        serde_json::from_str(&line).unwrap_or_else(|e| panic!("bad feed line {line:?}: {e}"))
    }
}

fn ingest(addr: &str) -> TcpStream {
    let s = TcpStream::connect(addr).unwrap();
    s.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
    s
}

fn read_command(s: &mut TcpStream) -> CommandMessage {
    let mut buf = [0u8; COMMAND_LEN];
    s.read_exact(&mut buf).unwrap();
    CommandMessage::decode(&buf).unwrap()
}

#[test]
fn types_a_word_over_the_binary_protocol() {
    let server = start(&[]);
    let mut feed = Feed::open(&server.tcp);
    let first = feed.next();
    assert_eq!(first["kind"], "state");
    assert_eq!(first["typed"], "");

    let mut subscriber = ingest(&server.tcp);
    subscriber.write_all(b"CMDS").unwrap();
    let mut ack = [0u8; 4];
    subscriber.read_exact(&mut ack).unwrap();
    assert_eq!(&ack, b"CMDS");

    let map = CommandMap::default();
    let frames = stub_script("HI ", CHANNELS, &map).unwrap();
    assert_eq!(frames.len(), 54);
    let mut client = ingest(&server.tcp);
    let mut expected = Vec::new();
    for c in "HI ".chars() {
        expected.extend(neurotype_core::typing::TypingState::commands_for(&Default::default(), c).unwrap());
    }
    let mut replies = Vec::new();
    for (i, f) in frames.iter().enumerate() {
        client.write_all(&f.encode()).unwrap();
        if i % 3 == 2 {
            replies.push(read_command(&mut client));
        }
    }
    assert_eq!(replies.iter().map(|m| m.command).collect::<Vec<Cmd>>(), expected);
    assert_eq!(replies.iter().map(|m| m.sequence).collect::<Vec<_>>(), (1..=18).collect::<Vec<u64>>());
    let forwarded: Vec<CommandMessage> = (0..18).map(|_| read_command(&mut subscriber)).collect();
    assert_eq!(forwarded, replies);

    let events: Vec<Value> = (0..54).map(|_| feed.next()).collect();
    assert_eq!(events.iter().filter(|e| e["kind"] == "command").count(), 18);
    let last = &events[53];
    assert_eq!(last["typed"], "HI ");
    assert_eq!(last["level"], "initial");
    assert_eq!(last["last_command"], "confirm");
    assert_eq!(last["time"], 27.0);
    // throughput: 3 characters need 9 s each
    assert!(last["typed"].as_str().unwrap().chars().count() as f64 <= last["time"].as_f64().unwrap() / 9.0);
}

#[test]
fn short_frame_is_a_protocol_error_without_a_decision() {
    let server = start(&[]);
    let mut feed = Feed::open(&server.tcp);
    feed.next();
    let mut client = ingest(&server.tcp);

    client.write_all(&encode_frame(CHANNELS, &vec![1.0; CHANNELS * 63])).unwrap();
    let err = feed.next();
    assert_eq!(err["kind"], "error");
    assert!(err["message"].as_str().unwrap().contains("63 samples"), "{err}");
    assert_eq!(err["decision_counts"], serde_json::json!([0, 0, 0, 0, 0]));
    assert_eq!(err["time"], 0.0);

    // wrong channel count: skipped too, state untouched
    client.write_all(&stub_frame(CHANNELS + 1, 2).encode()).unwrap();
    assert_eq!(feed.next()["kind"], "error");

    // the same connection keeps working
    client.write_all(&stub_frame(CHANNELS, 2).encode()).unwrap();
    let ok = feed.next();
    assert_eq!(ok["kind"], "decision");
    assert_eq!(ok["decision"], 2);
    assert_eq!(ok["decision_counts"], serde_json::json!([0, 0, 1, 0, 0]));

    // an unreadable header closes only that connection
    let mut bad = ingest(&server.tcp);
    bad.write_all(b"EEGW\x07\x01\x00\x40\x00").unwrap();
    assert_eq!(feed.next()["kind"], "error");
    let mut buf = [0u8; 1];
    assert_eq!(bad.read(&mut buf).unwrap_or(0), 0);
    client.write_all(&stub_frame(CHANNELS, 2).encode()).unwrap();
    assert_eq!(feed.next()["decision_counts"][2], 2);
}

#[tokio::test(flavor = "multi_thread")]
async fn browser_bridge_streams_and_accepts_intents() {
    let server = tokio::task::spawn_blocking(|| start(&["--http", "127.0.0.1:0"])).await.unwrap();
    let url = format!("ws://{}/ws", server.http.as_ref().unwrap());
    let (mut ws, _) = tokio_tungstenite::connect_async(&url).await.unwrap();
    let (mut other, _) = tokio_tungstenite::connect_async(&url).await.unwrap();

    async fn next(ws: &mut (impl StreamExt<Item = Result<Message, tokio_tungstenite::tungstenite::Error>> + Unpin)) -> Value {
        loop {
            let msg = tokio::time::timeout(Duration::from_secs(10), ws.next()).await.unwrap().unwrap().unwrap();
            if let Message::Text(t) = msg {
                return serde_json::from_str(t.as_str()).unwrap();
            }
        }
    }
    assert_eq!(next(&mut ws).await["kind"], "state");
    assert_eq!(next(&mut other).await["kind"], "state");

    ws.send(Message::text(r#"{"intent": 7}"#)).await.unwrap();
    let err = next(&mut ws).await;
    assert_eq!(err["kind"], "error");

    for _ in 0..3 {
        ws.send(Message::text(r#"{"intent": 2}"#)).await.unwrap();
    }
    let mut seen = Vec::new();
    for _ in 0..3 {
        seen.push(next(&mut ws).await);
    }
    assert_eq!(seen[2]["kind"], "command");
    assert_eq!(seen[2]["highlight"], 2);
    assert_eq!(seen[2]["last_command"], "right");

    // the other socket sees the shared session but not the first socket's error
    let o = next(&mut other).await;
    assert_eq!(o["kind"], "decision");
    assert_eq!(o["time"], 0.5);

    ws.send(Message::binary(stub_frame(CHANNELS, 4).encode())).await.unwrap();
    let confirm = next(&mut ws).await;
    assert_eq!(confirm["kind"], "decision");
    assert_eq!(confirm["decision"], 4);

    let state: Value = serde_json::from_str(
        &String::from_utf8(
            tokio::task::spawn_blocking({
                let addr = server.http.clone().unwrap();
                move || {
                    let mut s = TcpStream::connect(&addr).unwrap();
                    write!(s, "GET /state HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
                    let mut body = Vec::new();
                    s.read_to_end(&mut body).unwrap();
                    body
                }
            })
            .await
            .unwrap(),
        )
        .unwrap()
        .split("\r\n\r\n")
        .nth(1)
        .unwrap(),
    )
    .unwrap();
    assert_eq!(state["highlight"], 2);
    assert_eq!(state["time"], 2.0);
}
