//! Online typing: per-window mode vote, the three-in-a-row command rule, and
//! a three-level, 27-character selection tree.

pub mod command;
pub mod session;
pub mod state;
pub mod tree;
pub mod wire;

pub use command::{Command, CommandMap};
pub use session::{stub_frame, stub_script, Classifier, Event, EventKind, Step, StubClassifier, TypingSession, WINDOW_SECONDS};
pub use state::{window_decide, Aggregator, Level, TypingState, WINDOW_LEN};
pub use tree::CharacterTree;
pub use wire::{CommandMessage, Frame, FrameHeader};
