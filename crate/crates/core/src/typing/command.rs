use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::NUM_INTENTS;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Left,
    Up,
    Right,
    Cancel,
    Confirm,
}

impl Command {
    pub const ALL: [Command; 5] = [Command::Left, Command::Up, Command::Right, Command::Cancel, Command::Confirm];

    /// Wire code, 0..=4.
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::Protocol(format!("unknown command code {code}")))
    }

    /// Block addressed by a selection command.
    pub fn block(self) -> Option<usize> {
        match self {
            Command::Left => Some(0),
            Command::Up => Some(1),
            Command::Right => Some(2),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Left => "left",
            Command::Up => "up",
            Command::Right => "right",
            Command::Cancel => "cancel",
            Command::Confirm => "confirm",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown command `{s}`")))
    }
}

/// Bijection from intent labels to commands. Serialized as the list of
/// commands indexed by label, e.g. `["left","up","right","cancel","confirm"]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Command>", into = "Vec<Command>")]
pub struct CommandMap([Command; NUM_INTENTS]);

impl Default for CommandMap {
    fn default() -> Self {
        CommandMap(Command::ALL)
    }
}

impl CommandMap {
    pub fn new(by_label: [Command; NUM_INTENTS]) -> Result<Self> {
        for c in Command::ALL {
            if !by_label.contains(&c) {
                return Err(Error::Config(format!("command map is not a bijection: `{c}` has no label")));
            }
        }
        Ok(CommandMap(by_label))
    }

    pub fn command(&self, label: u8) -> Result<Command> {
        self.0
            .get(label as usize)
            .copied()
            .ok_or_else(|| Error::Data {
                row: 0,
                reason: format!("label {label} outside 0..{NUM_INTENTS}"),
            })
    }

    pub fn label(&self, command: Command) -> u8 {
        self.0.iter().position(|&c| c == command).expect("bijection") as u8
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("command map: {e}")))
    }
}

impl TryFrom<Vec<Command>> for CommandMap {
    type Error = Error;

    fn try_from(v: Vec<Command>) -> Result<Self> {
        let arr: [Command; NUM_INTENTS] = v
            .try_into()
            .map_err(|v: Vec<Command>| Error::Config(format!("command map needs {NUM_INTENTS} entries, got {}", v.len())))?;
        CommandMap::new(arr)
    }
}

impl From<CommandMap> for Vec<Command> {
    fn from(m: CommandMap) -> Self {
        m.0.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_map() {
        let m = CommandMap::default();
        assert_eq!(m.command(4).unwrap(), Command::Confirm);
        assert_eq!(m.command(0).unwrap(), Command::Left);
        assert!(m.command(5).is_err());
        for label in 0..5 {
            assert_eq!(m.label(m.command(label).unwrap()), label);
        }
    }

    #[test]
    fn custom_map_and_json() {
        let m = CommandMap::from_json(r#"["up","cancel","left","right","confirm"]"#).unwrap();
        assert_eq!(m.command(0).unwrap(), Command::Up);
        assert_eq!(m.label(Command::Left), 2);
        let back: CommandMap = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn non_bijective_map_rejected() {
        assert!(CommandMap::from_json(r#"["up","up","left","right","confirm"]"#).is_err());
        assert!(CommandMap::from_json(r#"["up","left","right","confirm"]"#).is_err());
        assert!(CommandMap::from_json(r#"["up","down","left","right","confirm"]"#).is_err());
    }

    #[test]
    fn codes_round_trip() {
        for c in Command::ALL {
            assert_eq!(Command::from_code(c.code()).unwrap(), c);
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
        assert!(Command::from_code(5).is_err());
    }
}
