//! Binary messages. `EEGW` frames carry one window of raw samples from the
//! headset client; `CMDF` messages carry emitted commands to the consumer.

use super::command::Command;
use super::state::WINDOW_LEN;
use crate::error::{Error, Result};

pub const FRAME_MAGIC: &[u8; 4] = b"EEGW";
pub const COMMAND_MAGIC: &[u8; 4] = b"CMDF";
pub const VERSION: u8 = 1;
pub const FRAME_HEADER_LEN: usize = 9;
pub const COMMAND_LEN: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub channels: u16,
    pub samples: u16,
}

impl FrameHeader {
    /// Validates magic and version. The sample count is not checked here so a
    /// reader can still skip the body of a wrong-sized frame.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < FRAME_HEADER_LEN {
            return Err(Error::Protocol("truncated frame header".into()));
        }
        if &bytes[..4] != FRAME_MAGIC {
            return Err(Error::Protocol(format!("bad frame magic {:?}", &bytes[..4])));
        }
        if bytes[4] != VERSION {
            return Err(Error::Protocol(format!("unsupported frame version {}", bytes[4])));
        }
        Ok(FrameHeader {
            channels: u16::from_le_bytes([bytes[5], bytes[6]]),
            samples: u16::from_le_bytes([bytes[7], bytes[8]]),
        })
    }

    pub fn body_len(&self) -> usize {
        self.channels as usize * self.samples as usize * 4
    }

    pub fn check(&self) -> Result<()> {
        if self.samples as usize != WINDOW_LEN {
            return Err(Error::Protocol(format!("frame carries {} samples, expected {WINDOW_LEN}", self.samples)));
        }
        if self.channels == 0 {
            return Err(Error::Protocol("frame has zero channels".into()));
        }
        Ok(())
    }
}

/// One window: `samples × channels` values, sample-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub channels: usize,
    pub values: Vec<f32>,
}

impl Frame {
    pub fn new(channels: usize, values: Vec<f32>) -> Result<Self> {
        if channels == 0 || values.len() != channels * WINDOW_LEN {
            return Err(Error::Protocol(format!(
                "frame needs {WINDOW_LEN} × {channels} values, got {}",
                values.len()
            )));
        }
        Ok(Frame { channels, values })
    }

    pub fn samples(&self) -> impl Iterator<Item = &[f32]> {
        self.values.chunks(self.channels)
    }

    pub fn encode(&self) -> Vec<u8> {
        encode_frame(self.channels, &self.values)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let header = FrameHeader::parse(bytes)?;
        header.check()?;
        let body = &bytes[FRAME_HEADER_LEN..];
        if body.len() != header.body_len() {
            return Err(Error::Protocol(format!("frame body is {} bytes, expected {}", body.len(), header.body_len())));
        }
        Self::from_body(header, body)
    }

    pub fn from_body(header: FrameHeader, body: &[u8]) -> Result<Self> {
        header.check()?;
        let values = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Frame::new(header.channels as usize, values)
    }
}

/// Encodes any sample count; used by tests and clients that need to send
/// deliberately malformed frames.
pub fn encode_frame(channels: usize, values: &[f32]) -> Vec<u8> {
    let samples = values.len() / channels.max(1);
    let mut out = Vec::with_capacity(FRAME_HEADER_LEN + values.len() * 4);
    out.extend_from_slice(FRAME_MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(channels as u16).to_le_bytes());
    out.extend_from_slice(&(samples as u16).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommandMessage {
    pub command: Command,
    pub sequence: u64,
}

impl CommandMessage {
    pub fn encode(&self) -> [u8; COMMAND_LEN] {
        let mut out = [0u8; COMMAND_LEN];
        out[..4].copy_from_slice(COMMAND_MAGIC);
        out[4] = VERSION;
        out[5] = self.command.code();
        out[6..].copy_from_slice(&self.sequence.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != COMMAND_LEN {
            return Err(Error::Protocol(format!("command message is {} bytes", bytes.len())));
        }
        if &bytes[..4] != COMMAND_MAGIC {
            return Err(Error::Protocol("bad command magic".into()));
        }
        if bytes[4] != VERSION {
            return Err(Error::Protocol(format!("unsupported command version {}", bytes[4])));
        }
        Ok(CommandMessage {
            command: Command::from_code(bytes[5])?,
            sequence: u64::from_le_bytes(bytes[6..].try_into().unwrap()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn frame_layout() {
        let f = Frame::new(2, (0..128).map(|i| i as f32).collect()).unwrap();
        let bytes = f.encode();
        assert_eq!(&bytes[..9], b"EEGW\x01\x02\x00\x40\x00");
        assert_eq!(bytes.len(), 9 + 128 * 4);
        assert_eq!(&bytes[13..17], &1.0f32.to_le_bytes());
        assert_eq!(Frame::decode(&bytes).unwrap(), f);
    }

    #[test]
    fn short_frame_rejected() {
        let bytes = encode_frame(3, &[0.0; 63 * 3]);
        let h = FrameHeader::parse(&bytes).unwrap();
        assert_eq!(h.samples, 63);
        assert_eq!(h.body_len(), 63 * 3 * 4);
        assert!(matches!(Frame::decode(&bytes), Err(Error::Protocol(_))));
    }

    #[test]
    fn bad_header_rejected() {
        let mut bytes = encode_frame(1, &[0.0; 64]);
        bytes[4] = 2;
        assert!(Frame::decode(&bytes).is_err());
        bytes[0] = b'X';
        assert!(FrameHeader::parse(&bytes).is_err());
        assert!(FrameHeader::parse(b"EEG").is_err());
        let ok = encode_frame(1, &[0.0; 64]);
        assert!(Frame::decode(&ok[..ok.len() - 1]).is_err());
    }

    #[test]
    fn command_layout() {
        let m = CommandMessage {
            command: Command::Confirm,
            sequence: 258,
        };
        let b = m.encode();
        assert_eq!(&b, b"CMDF\x01\x04\x02\x01\x00\x00\x00\x00\x00\x00");
        assert_eq!(CommandMessage::decode(&b).unwrap(), m);
        let mut bad = b;
        bad[5] = 9;
        assert!(CommandMessage::decode(&bad).is_err());
    }

    proptest! {
        #[test]
        fn frames_round_trip(channels in 1usize..20, seed in any::<u32>()) {
            let values: Vec<f32> = (0..channels * 64).map(|i| (i as f32 * 0.37 + seed as f32).sin() * 100.0).collect();
            let f = Frame::new(channels, values).unwrap();
            prop_assert_eq!(Frame::decode(&f.encode()).unwrap(), f);
        }
    }
}
