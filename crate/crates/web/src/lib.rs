//! Browser demo bindings: drive the typing state machine with simulated
//! intents, trace the three-in-a-row rule, and compute an intent similarity
//! heatmap on synthetic data. Everything returns JSON text so the page can stay
//! plain JavaScript.

use neurotype_core::data::synthetic;
use neurotype_core::similarity::similarity_matrix;
use neurotype_core::typing::{stub_frame, Aggregator, Command, CommandMap, EventKind, StubClassifier, TypingSession, TypingState};
use serde_json::json;
use wasm_bindgen::prelude::*;

const DEMO_CHANNELS: usize = 1;

/// A live session fed one window per call.
#[wasm_bindgen]
pub struct TypingDemo {
    session: TypingSession<StubClassifier>,
}

#[wasm_bindgen]
impl TypingDemo {
    #[wasm_bindgen(constructor)]
    pub fn new() -> TypingDemo {
        TypingDemo {
            session: TypingSession::new(StubClassifier { channels: DEMO_CHANNELS }, CommandMap::default()),
        }
    }

    /// Current state as one feed event.
    pub fn state(&self) -> String {
        event_json(&self.session.event(EventKind::State))
    }

    /// Feeds one window whose every sample decodes to `intent`.
    pub fn push_intent(&mut self, intent: u8) -> Result<String, String> {
        if intent as usize >= neurotype_core::data::NUM_INTENTS {
            return Err(format!("intent {intent} is not 0..4"));
        }
        let step = self.session.process(&stub_frame(DEMO_CHANNELS, intent)).map_err(|e| e.to_string())?;
        Ok(event_json(&step.event))
    }

    /// Feeds the three windows that emit `command` (`left`, `up`, ...).
    pub fn send_command(&mut self, command: &str) -> Result<String, String> {
        let cmd: Command = command.parse().map_err(|e: neurotype_core::Error| e.to_string())?;
        let intent = CommandMap::default().label(cmd);
        let mut last = String::new();
        for _ in 0..3 {
            last = self.push_intent(intent)?;
        }
        Ok(last)
    }

    pub fn typed(&self) -> String {
        self.session.text().to_string()
    }

    pub fn reset(&mut self) {
        *self = TypingDemo::new();
    }
}

impl Default for TypingDemo {
    fn default() -> Self {
        Self::new()
    }
}

fn event_json(e: &neurotype_core::typing::Event) -> String {
    e.to_line().trim_end().to_string()
}

/// Command names that type `text` from the initial interface.
#[wasm_bindgen]
pub fn command_word(text: &str) -> Result<String, String> {
    let tree = neurotype_core::typing::CharacterTree::default();
    let mut words = Vec::new();
    for c in text.to_uppercase().chars() {
        let cmds = TypingState::commands_for(&tree, c).ok_or_else(|| format!("`{c}` cannot be typed"))?;
        words.push(cmds.iter().map(|c| c.name()).collect::<Vec<_>>());
    }
    Ok(json!(words).to_string())
}

/// Runs a decision sequence through the aggregation rule; returns, for each
/// decision, the emitted label or null.
#[wasm_bindgen]
pub fn aggregation_trace(decisions: &[u8]) -> String {
    let mut agg = Aggregator::new();
    let out: Vec<Option<u8>> = decisions
        .iter()
        .enumerate()
        .map(|(i, &d)| agg.push(d, i as f64 * neurotype_core::typing::WINDOW_SECONDS))
        .collect();
    json!(out).to_string()
}

/// Similarity table of Gaussian blobs: `{intents, rho, self, cross, pd}`.
#[wasm_bindgen]
pub fn blob_similarity(channels: usize, separation: f64, per_intent: usize, seed: u64) -> Result<String, String> {
    if channels < 2 || per_intent < 2 {
        return Err("need at least 2 channels and 2 samples per intent".into());
    }
    let n = per_intent * neurotype_core::data::NUM_INTENTS;
    let ds = synthetic::blobs(n, channels, neurotype_core::data::NUM_INTENTS, separation, seed);
    let groups: Vec<(u8, Vec<&[f64]>)> = ds.by_intent().into_iter().enumerate().map(|(l, g)| (l as u8, g)).collect();
    let m = similarity_matrix(&groups, per_intent, seed).map_err(|e| e.to_string())?;
    let k = m.len();
    let pd: Vec<Option<f64>> = (0..k).map(|i| m.percentage_difference(i).ok()).collect();
    Ok(json!({
        "intents": m.intents,
        "rho": (0..k).map(|i| m.row(i).to_vec()).collect::<Vec<_>>(),
        "self": (0..k).map(|i| m.self_similarity(i)).collect::<Vec<_>>(),
        "cross": (0..k).map(|i| m.cross_similarity(i)).collect::<Vec<_>>(),
        "pd": pd,
    })
    .to_string())
}
