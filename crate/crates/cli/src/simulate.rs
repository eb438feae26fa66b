//! Offline replay of a recording through one session, paced by `--speed`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use neurotype_core::data;
use neurotype_core::typing::wire::{FRAME_HEADER_LEN, FRAME_MAGIC};
use neurotype_core::typing::{stub_script, CommandMap, EventKind, Frame, FrameHeader, TypingSession, WINDOW_LEN, WINDOW_SECONDS};
use neurotype_core::Error;

use crate::classifier::Loaded;

/// Splits a concatenated `EEGW` recording. A frame with a readable header but
/// the wrong shape becomes an error entry; anything unreadable ends the list.
pub fn read_recording(bytes: &[u8]) -> Vec<Result<Frame, Error>> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let header = match FrameHeader::parse(&bytes[pos..]) {
            Ok(h) => h,
            Err(e) => {
                out.push(Err(e));
                break;
            }
        };
        let start = pos + FRAME_HEADER_LEN;
        let end = start + header.body_len();
        if end > bytes.len() {
            out.push(Err(Error::Protocol("truncated frame body".into())));
            break;
        }
        out.push(Frame::from_body(header, &bytes[start..end]));
        pos = end;
    }
    out
}

/// Cuts a dataset CSV into 64-row windows; a short tail is an error entry.
fn csv_windows(path: &Path, channels: usize) -> Result<Vec<Result<Frame, Error>>> {
    let ds = data::load_dataset(path, channels).with_context(|| format!("reading {}", path.display()))?;
    let values: Vec<f32> = ds.samples().iter().map(|&v| v as f32).collect();
    let mut out: Vec<Result<Frame, Error>> = values
        .chunks_exact(WINDOW_LEN * channels)
        .map(|w| Frame::new(channels, w.to_vec()))
        .collect();
    let tail = ds.len() % WINDOW_LEN;
    if tail > 0 {
        out.push(Err(Error::Protocol(format!("{tail} trailing samples do not fill a window"))));
    }
    Ok(out)
}

pub fn run(input: &Path, loaded: Loaded, speed: f64, commands: Option<&Path>) -> Result<()> {
    if !(speed > 0.0) {
        bail!("--speed must be positive, got {speed}");
    }
    let channels = loaded.classifier.channels();
    let bytes = std::fs::read(input).with_context(|| format!("reading {}", input.display()))?;
    let frames = if bytes.starts_with(FRAME_MAGIC) {
        read_recording(&bytes)
    } else {
        csv_windows(input, channels)?
    };
    let mut session = TypingSession::new(loaded.classifier, loaded.map);
    let mut cmd_out = match commands {
        Some(p) => Some(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => None,
    };
    let pause = Duration::from_secs_f64(WINDOW_SECONDS / speed);
    let mut out = std::io::stdout().lock();
    out.write_all(session.event(EventKind::State).to_line().as_bytes())?;
    for frame in frames {
        let line = match frame.and_then(|f| session.process(&f)) {
            Ok(step) => {
                if let (Some(m), Some(w)) = (step.command, cmd_out.as_mut()) {
                    w.write_all(&m.encode())?;
                }
                step.event.to_line()
            }
            Err(e) => session.error_event(e.to_string()).to_line(),
        };
        out.write_all(line.as_bytes())?;
        out.flush()?;
        if !pause.is_zero() {
            std::thread::sleep(pause);
        }
    }
    if let Some(mut w) = cmd_out {
        w.flush()?;
    }
    eprintln!("typed {:?} in {:.1}s of stream time", session.text(), session.clock());
    Ok(())
}

pub fn script(word: &str, channels: usize, map: Option<&Path>, out: &Path) -> Result<()> {
    if channels == 0 {
        bail!("--channels must be at least 1");
    }
    let map = match map {
        Some(p) => CommandMap::from_json(&std::fs::read_to_string(p)?)?,
        None => CommandMap::default(),
    };
    let frames = stub_script(&word.to_uppercase(), channels, &map)?;
    let mut w = BufWriter::new(File::create(out).with_context(|| format!("creating {}", out.display()))?);
    for f in &frames {
        w.write_all(&f.encode())?;
    }
    w.flush()?;
    println!("wrote {} frames to {}", frames.len(), out.display());
    Ok(())
}
