use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use neurotype_core::pipeline::PipelineModel;
use neurotype_core::typing::{Classifier, CommandMap, StubClassifier};

pub const STUB: &str = "stub";
const STUB_DEFAULT_CHANNELS: usize = 64;

pub type SharedClassifier = Arc<dyn Classifier>;

pub struct Loaded {
    pub classifier: SharedClassifier,
    pub map: CommandMap,
}

/// A trained model, or the stub when `model` is `stub`. An explicit map file
/// overrides the one stored in the model.
pub fn load(model: &str, channels: Option<usize>, map: Option<&Path>) -> Result<Loaded> {
    let (classifier, stored): (SharedClassifier, CommandMap) = if model == STUB {
        let channels = channels.unwrap_or(STUB_DEFAULT_CHANNELS);
        if channels == 0 {
            bail!("stub classifier needs at least one channel");
        }
        (Arc::new(StubClassifier { channels }), CommandMap::default())
    } else {
        let m = PipelineModel::load(Path::new(model)).with_context(|| format!("loading model {model}"))?;
        if let Some(c) = channels.filter(|&c| c != m.channels) {
            bail!("--channels {c} does not match the model's {} channels", m.channels);
        }
        let stored = m.command_map().clone();
        (Arc::new(m), stored)
    };
    let map = match map {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            CommandMap::from_json(&text)?
        }
        None => stored,
    };
    Ok(Loaded { classifier, map })
}

#[cfg(test)]
mod tests {
    use super::*;
    use neurotype_core::typing::Command;

    #[test]
    fn stub_and_map_override() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("map.json");
        std::fs::write(&p, r#"["confirm","up","right","cancel","left"]"#).unwrap();
        let l = load(STUB, Some(14), Some(&p)).unwrap();
        assert_eq!(l.classifier.channels(), 14);
        assert_eq!(l.map.command(0).unwrap(), Command::Confirm);

        std::fs::write(&p, r#"["left","left","right","cancel","confirm"]"#).unwrap();
        assert!(load(STUB, None, Some(&p)).is_err());
        assert!(load(STUB, Some(0), None).is_err());
        assert!(load("/nonexistent/model.ntpm", None, None).is_err());
    }
}
