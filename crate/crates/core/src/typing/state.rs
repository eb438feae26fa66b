use std::collections::VecDeque;

use serde::Serialize;

use super::command::Command;
use super::tree::{CharacterTree, DEPTH};
use crate::data::NUM_INTENTS;
use crate::error::{Error, Result};

/// Predictions per decision window.
pub const WINDOW_LEN: usize = 64;
/// Equal consecutive decisions needed before a command is sent.
pub const CONSISTENT_DECISIONS: usize = 3;
pub const HISTORY_LIMIT: usize = 32;

/// Mode of one window of labels; ties go to the lowest label.
pub fn window_decide(labels: &[u8]) -> Result<u8> {
    if labels.len() != WINDOW_LEN {
        return Err(Error::Protocol(format!("decision window needs {WINDOW_LEN} labels, got {}", labels.len())));
    }
    let mut counts = [0usize; NUM_INTENTS];
    for &l in labels {
        *counts
            .get_mut(l as usize)
            .ok_or_else(|| Error::Protocol(format!("label {l} outside 0..{NUM_INTENTS}")))? += 1;
    }
    let mut best = 0;
    for c in 1..NUM_INTENTS {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    Ok(best as u8)
}

/// Collapses decisions into commands: a label is emitted once it has been seen
/// three times in a row, after which the run starts over.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Aggregator {
    pending: Vec<u8>,
    last_emission: Option<f64>,
}

impl Aggregator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pending(&self) -> &[u8] {
        &self.pending
    }

    /// Stream time of the last emission.
    pub fn last_emission(&self) -> Option<f64> {
        self.last_emission
    }

    pub fn push(&mut self, decision: u8, at: f64) -> Option<u8> {
        if self.pending.last().is_some_and(|&d| d != decision) {
            self.pending.clear();
        }
        self.pending.push(decision);
        if self.pending.len() == CONSISTENT_DECISIONS {
            self.pending.clear();
            self.last_emission = Some(at);
            return Some(decision);
        }
        None
    }

    pub fn reset(&mut self) {
        self.pending.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Initial,
    Sub,
    Bottom,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Snapshot {
    path: Vec<usize>,
    highlight: Option<usize>,
    text: String,
}

/// Position in the character tree plus the typed text. Every non-Cancel
/// command is recorded so Cancel can restore the state before it.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TypingState {
    path: Vec<usize>,
    highlight: Option<usize>,
    text: String,
    history: VecDeque<Snapshot>,
}

impl TypingState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn level(&self) -> Level {
        match self.path.len() {
            0 => Level::Initial,
            1 => Level::Sub,
            _ => Level::Bottom,
        }
    }

    pub fn path(&self) -> &[usize] {
        &self.path
    }

    pub fn highlight(&self) -> Option<usize> {
        self.highlight
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            path: self.path.clone(),
            highlight: self.highlight,
            text: self.text.clone(),
        }
    }

    /// Applies one command. Returns the character typed, if any.
    pub fn apply(&mut self, cmd: Command, tree: &CharacterTree) -> Option<char> {
        if cmd == Command::Cancel {
            if let Some(prev) = self.history.pop_back() {
                self.path = prev.path;
                self.highlight = prev.highlight;
                self.text = prev.text;
            }
            return None;
        }
        if self.history.len() == HISTORY_LIMIT {
            self.history.pop_front();
        }
        self.history.push_back(self.snapshot());
        if let Some(b) = cmd.block() {
            self.highlight = Some(b);
            return None;
        }
        let b = self.highlight.take()?;
        self.path.push(b);
        if self.path.len() < DEPTH {
            return None;
        }
        let leaf: [usize; DEPTH] = self.path[..].try_into().unwrap();
        let c = tree.leaf(&leaf);
        self.text.push(c);
        self.path.clear();
        Some(c)
    }

    /// Commands that type `c` from the initial interface.
    pub fn commands_for(tree: &CharacterTree, c: char) -> Option<Vec<Command>> {
        let path = tree.path_of(c)?;
        Some(
            path.iter()
                .flat_map(|&b| [Command::ALL[b], Command::Confirm])
                .collect(),
        )
    }
}
