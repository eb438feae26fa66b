use serde::{Deserialize, Serialize};

use super::command::{Command, CommandMap};
use super::state::{window_decide, Aggregator, Level, TypingState};
use super::tree::CharacterTree;
use super::wire::{CommandMessage, Frame};
use crate::data::NUM_INTENTS;
use crate::error::{Error, Result};

/// Stream time covered by one frame, in seconds.
pub const WINDOW_SECONDS: f64 = 0.5;

/// Per-sample intent classifier used by a session.
pub trait Classifier: Send + Sync {
    fn channels(&self) -> usize;
    fn classify(&self, sample: &[f64]) -> Result<u8>;
}

/// Reads the intent straight off channel 0: `round(ch0)` clamped to 0..=4.
/// Lets tests and demos drive a session without a trained model.
#[derive(Debug, Clone, Copy)]
pub struct StubClassifier {
    pub channels: usize,
}

impl Classifier for StubClassifier {
    fn channels(&self) -> usize {
        self.channels
    }

    fn classify(&self, sample: &[f64]) -> Result<u8> {
        let v = sample.first().copied().unwrap_or(0.0);
        Ok(v.round().clamp(0.0, (NUM_INTENTS - 1) as f64) as u8)
    }
}

impl<C: Classifier + ?Sized> Classifier for Box<C> {
    fn channels(&self) -> usize {
        (**self).channels()
    }

    fn classify(&self, sample: &[f64]) -> Result<u8> {
        (**self).classify(sample)
    }
}

impl<C: Classifier + ?Sized> Classifier for std::sync::Arc<C> {
    fn channels(&self) -> usize {
        (**self).channels()
    }

    fn classify(&self, sample: &[f64]) -> Result<u8> {
        (**self).classify(sample)
    }
}

/// A window whose stub classification is `intent` on every sample.
pub fn stub_frame(channels: usize, intent: u8) -> Frame {
    let mut values = vec![0.0f32; channels * super::state::WINDOW_LEN];
    for s in values.chunks_mut(channels) {
        s[0] = intent as f32;
    }
    Frame::new(channels, values).expect("well-formed")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    State,
    Decision,
    Command,
    Error,
}

/// One line of the UI feed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub kind: EventKind,
    pub time: f64,
    pub level: Level,
    pub path: Vec<usize>,
    pub highlight: Option<usize>,
    pub blocks: [String; 3],
    pub typed: String,
    pub last_command: Option<Command>,
    pub decision: Option<u8>,
    pub decision_counts: [u64; NUM_INTENTS],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl Event {
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("event serializes");
        s.push('\n');
        s
    }
}

/// Result of feeding one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub decision: u8,
    pub command: Option<CommandMessage>,
    pub typed: Option<char>,
    pub event: Event,
}

/// One ingest stream: classify, vote, aggregate and type, in frame order.
/// Time is the stream clock, advanced by `WINDOW_SECONDS` per frame.
pub struct TypingSession<C: Classifier> {
    classifier: C,
    map: CommandMap,
    tree: CharacterTree,
    aggregator: Aggregator,
    state: TypingState,
    clock: f64,
    sequence: u64,
    counts: [u64; NUM_INTENTS],
    last_command: Option<Command>,
}

impl<C: Classifier> TypingSession<C> {
    pub fn new(classifier: C, map: CommandMap) -> Self {
        TypingSession {
            classifier,
            map,
            tree: CharacterTree::default(),
            aggregator: Aggregator::new(),
            state: TypingState::new(),
            clock: 0.0,
            sequence: 0,
            counts: [0; NUM_INTENTS],
            last_command: None,
        }
    }

    pub fn state(&self) -> &TypingState {
        &self.state
    }

    pub fn text(&self) -> &str {
        self.state.text()
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn tree(&self) -> &CharacterTree {
        &self.tree
    }

    pub fn channels(&self) -> usize {
        self.classifier.channels()
    }

    pub fn classify_frame(&self, frame: &Frame) -> Result<Vec<u8>> {
        if frame.channels != self.classifier.channels() {
            return Err(Error::Protocol(format!(
                "frame has {} channels, model expects {}",
                frame.channels,
                self.classifier.channels()
            )));
        }
        let classify = |s: &[f32]| {
            let x: Vec<f64> = s.iter().map(|&v| v as f64).collect();
            self.classifier.classify(&x)
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            frame.values.par_chunks(frame.channels).map(classify).collect()
        }
        #[cfg(not(feature = "parallel"))]
        frame.samples().map(classify).collect()
    }

    /// Processes one frame. On error nothing in the session changes.
    pub fn process(&mut self, frame: &Frame) -> Result<Step> {
        let labels = self.classify_frame(frame)?;
        let decision = window_decide(&labels)?;
        self.clock += WINDOW_SECONDS;
        self.counts[decision as usize] += 1;
        let mut command = None;
        let mut typed = None;
        if let Some(label) = self.aggregator.push(decision, self.clock) {
            let cmd = self.map.command(label)?;
            typed = self.state.apply(cmd, &self.tree);
            self.sequence += 1;
            self.last_command = Some(cmd);
            command = Some(CommandMessage {
                command: cmd,
                sequence: self.sequence,
            });
        }
        let kind = if command.is_some() { EventKind::Command } else { EventKind::Decision };
        let mut event = self.event(kind);
        event.decision = Some(decision);
        Ok(Step {
            decision,
            command,
            typed,
            event,
        })
    }

    pub fn event(&self, kind: EventKind) -> Event {
        Event {
            kind,
            time: self.clock,
            level: self.state.level(),
            path: self.state.path().to_vec(),
            highlight: self.state.highlight(),
            blocks: self.tree.blocks(self.state.path()),
            typed: self.state.text().to_string(),
            last_command: self.last_command,
            decision: None,
            decision_counts: self.counts,
            message: None,
        }
    }

    pub fn error_event(&self, message: impl Into<String>) -> Event {
        let mut e = self.event(EventKind::Error);
        e.message = Some(message.into());
        e
    }
}

/// Frames that type `word` with the stub classifier: three windows per command.
pub fn stub_script(word: &str, channels: usize, map: &CommandMap) -> Result<Vec<Frame>> {
    let tree = CharacterTree::default();
    let mut frames = Vec::new();
    for c in word.chars() {
        let cmds = TypingState::commands_for(&tree, c)
            .ok_or_else(|| Error::Config(format!("character `{c}` is not in the tree")))?;
        for cmd in cmds {
            let intent = map.label(cmd);
            frames.extend(std::iter::repeat_with(|| stub_frame(channels, intent)).take(3));
        }
    }
    Ok(frames)
}
