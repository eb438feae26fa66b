//! End-to-end model: both feature branches, the autoencoder and the tree
//! ensemble, plus training, evaluation and the on-disk container.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boost::{self, GbtConfig, TreeEnsemble};
use crate::data::{Dataset, NUM_INTENTS};
use crate::error::{Error, Result};
use crate::fusion::{self, stack_rows, Autoencoder, AutoencoderConfig};
use crate::metrics::Metrics;
use crate::nn::params::{load_params, save_params};
use crate::nn::seeded_rng;
use crate::spatial::{self, SpatialNet, SpatialNetConfig};
use crate::temporal::{self, TemporalNet, TemporalNetConfig};
use crate::typing::{Classifier, CommandMap};

pub const MODEL_MAGIC: &[u8; 4] = b"NTPM";
pub const MODEL_VERSION: u32 = 1;

/// Rows per feature-extraction chunk.
const EXTRACT_CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    #[default]
    Hybrid,
    TemporalOnly,
    SpatialOnly,
}

impl FeatureSource {
    pub fn uses_temporal(self) -> bool {
        self != FeatureSource::SpatialOnly
    }

    pub fn uses_spatial(self) -> bool {
        self != FeatureSource::TemporalOnly
    }
}

impl fmt::Display for FeatureSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSource::Hybrid => "hybrid",
            FeatureSource::TemporalOnly => "temporal_only",
            FeatureSource::SpatialOnly => "spatial_only",
        })
    }
}

impl FromStr for FeatureSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hybrid" => Ok(FeatureSource::Hybrid),
            "temporal_only" | "temporal" | "rnn" => Ok(FeatureSource::TemporalOnly),
            "spatial_only" | "spatial" | "cnn" => Ok(FeatureSource::SpatialOnly),
            _ => Err(Error::Config(format!("unknown feature source `{s}`"))),
        }
    }
}

/// Training configuration; the JSON form has one object per stage.
///
/// ```json
/// { "rnn": { "iterations": 2500, "batch_size": 7000, "learning_rate": 0.005, "l2": 0.004 },
///   "cnn": { "iterations": 2500, "batch_size": 7000, "learning_rate": 0.004, "l2": 0.001 },
///   "ae": { "latent": 800, "iterations": 400, "learning_rate": 0.002 },
///   "classifier": { "learning_rate": 0.5, "max_depth": 6, "iterations": 500 },
///   "features": "hybrid",
///   "train_fraction": 0.75,
///   "command_map": ["left", "up", "right", "cancel", "confirm"] }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub rnn: TemporalNetConfig,
    pub cnn: SpatialNetConfig,
    pub ae: AutoencoderConfig,
    pub classifier: GbtConfig,
    pub features: FeatureSource,
    pub train_fraction: f64,
    pub command_map: CommandMap,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            rnn: TemporalNetConfig::default(),
            cnn: SpatialNetConfig::default(),
            ae: AutoencoderConfig::default(),
            classifier: GbtConfig::default(),
            features: FeatureSource::Hybrid,
            train_fraction: 0.75,
            command_map: CommandMap::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.classifier.validate()?;
        let classes = [self.rnn.classes, self.cnn.classes, self.classifier.classes];
        if classes.iter().any(|&c| c != NUM_INTENTS) {
            return Err(Error::Config(format!("every stage must use {NUM_INTENTS} classes, got {classes:?}")));
        }
        if self.rnn.hidden == 0 || self.cnn.features == 0 || self.ae.latent == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!("train_fraction {} outside (0, 1)", self.train_fraction)));
        }
        Ok(())
    }
}

/// Feature widths along the prediction path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DimsTrace {
    pub input: usize,
    pub temporal: Option<usize>,
    pub spatial: Option<usize>,
    pub stacked: usize,
    pub latent: usize,
    pub classes: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingReport {
    pub temporal_loss: Vec<f64>,
    pub spatial_loss: Vec<f64>,
    pub ae_loss: Vec<f64>,
    /// `(stage, seconds)` in execution order.
    pub timings: Vec<(&'static str, f64)>,
}

/// Where a model's training rows came from, so evaluation can rebuild the
/// held-out split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSource {
    pub subject: String,
    pub split_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineModel {
    pub config: PipelineConfig,
    pub channels: usize,
    pub trained_on: Option<TrainingSource>,
    pub temporal: Option<TemporalNet>,
    pub spatial: Option<SpatialNet>,
    pub autoencoder: Autoencoder,
    pub trees: TreeEnsemble,
}

impl PipelineModel {
    /// Randomly initialised networks and an empty ensemble, shaped per `config`.
    pub fn untrained(channels: usize, config: &PipelineConfig, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let src = config.features;
        let temporal = src.uses_temporal().then(|| TemporalNet::new(channels, &config.rnn, &mut rng));
        let spatial = src.uses_spatial().then(|| SpatialNet::new(channels, &config.cnn, &mut rng));
        let stacked = temporal.as_ref().map_or(0, |t| t.feature_size()) + spatial.as_ref().map_or(0, |s| s.feature_size());
        let autoencoder = Autoencoder::new(stacked, config.ae.latent, &mut rng);
        PipelineModel {
            config: config.clone(),
            channels,
            trained_on: None,
            temporal,
            spatial,
            autoencoder,
            trees: TreeEnsemble::new(config.classifier.classes, config.ae.latent),
        }
    }

    pub fn source(&self) -> FeatureSource {
        self.config.features
    }

    pub fn command_map(&self) -> &CommandMap {
        &self.config.command_map
    }

    fn check_rows(&self, samples: &[f64], n: usize) -> Result<()> {
        if samples.len() != n * self.channels {
            return Err(Error::shape(format!(
                "model expects {} channels per sample, got {} values for {n} samples",
                self.channels,
                samples.len()
            )));
        }
        Ok(())
    }

    /// Stacked branch features for `n` rows.
    pub fn stacked_features(&self, samples: &[f64], n: usize) -> Result<Vec<f64>> {
        self.check_rows(samples, n)?;
        branch_features(self.temporal.as_ref(), self.spatial.as_ref(), self.channels, samples)
    }

    /// Latent codes for `n` rows.
    pub fn latent_features(&self, samples: &[f64], n: usize) -> Result<Vec<f64>> {
        let stacked = self.stacked_features(samples, n)?;
        self.autoencoder.encode_batch(&stacked, n)
    }

    /// Class probabilities, row-major `n × classes`.
    pub fn predict_scores(&self, samples: &[f64], n: usize) -> Result<Vec<f64>> {
        let latent = self.latent_features(samples, n)?;
        let d = self.autoencoder.latent_size();
        let mut out = Vec::with_capacity(n * self.trees.classes());
        for row in latent.chunks(d) {
            out.extend(self.trees.predict_scores(row)?);
        }
        Ok(out)
    }

    pub fn predict_batch(&self, samples: &[f64], n: usize) -> Result<Vec<u8>> {
        let latent = self.latent_features(samples, n)?;
        latent
            .chunks(self.autoencoder.latent_size())
            .map(|row| self.trees.predict(row))
            .collect()
    }

    pub fn predict(&self, sample: &[f64]) -> Result<u8> {
        Ok(self.predict_batch(sample, 1)?[0])
    }

    /// Runs one sample and records the width of every intermediate feature.
    pub fn dims_trace(&self, sample: &[f64]) -> Result<DimsTrace> {
        self.check_rows(sample, 1)?;
        let temporal = self.temporal.as_ref().map(|t| t.extract(sample)).transpose()?;
        let spatial = self.spatial.as_ref().map(|s| s.extract(sample)).transpose()?;
        let stacked = [temporal.clone().unwrap_or_default(), spatial.clone().unwrap_or_default()].concat();
        let latent = self.autoencoder.encode(&stacked)?;
        let scores = self.trees.predict_scores(&latent)?;
        Ok(DimsTrace {
            input: sample.len(),
            temporal: temporal.map(|v| v.len()),
            spatial: spatial.map(|v| v.len()),
            stacked: stacked.len(),
            latent: latent.len(),
            classes: scores.len(),
        })
    }

    pub fn evaluate(&self, test: &Dataset) -> Result<Metrics> {
        evaluate(self, test)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }

    /// `NTPM`, version, then tagged sections `META`, `RNN `, `CNN `, `AE  `,
    /// `GBT ` each as `tag[4] len:u64 bytes`.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let meta = Meta {
            channels: self.channels,
            config: self.config.clone(),
            trained_on: self.trained_on.clone(),
        };
        let mut sections: Vec<(&[u8; 4], Vec<u8>)> = vec![(b"META", serde_json::to_vec(&meta).expect("meta serializes"))];
        if let Some(t) = &self.temporal {
            sections.push((b"RNN ", save_params(t, "rnn.")?));
        }
        if let Some(s) = &self.spatial {
            sections.push((b"CNN ", save_params(s, "cnn.")?));
        }
        sections.push((b"AE  ", save_params(&self.autoencoder, "ae.")?));
        sections.push((b"GBT ", self.trees.dump().into_bytes()));
        w.write_all(MODEL_MAGIC)?;
        w.write_all(&MODEL_VERSION.to_le_bytes())?;
        for (tag, body) in sections {
            w.write_all(tag)?;
            w.write_all(&(body.len() as u64).to_le_bytes())?;
            w.write_all(&body)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        if buf.len() < 8 || &buf[..4] != MODEL_MAGIC {
            return Err(Error::Format("not a model file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
        if version != MODEL_VERSION {
            return Err(Error::Format(format!("model version {version}, this build reads {MODEL_VERSION}")));
        }
        let mut sections: Vec<([u8; 4], &[u8])> = Vec::new();
        let mut pos = 8;
        while pos < buf.len() {
            if pos + 12 > buf.len() {
                return Err(Error::Format("truncated model file (section header)".into()));
            }
            let tag: [u8; 4] = buf[pos..pos + 4].try_into().unwrap();
            let len = u64::from_le_bytes(buf[pos + 4..pos + 12].try_into().unwrap()) as usize;
            pos += 12;
            if len > buf.len() - pos {
                return Err(Error::Format(format!("truncated model file (section {})", String::from_utf8_lossy(&tag).trim())));
            }
            sections.push((tag, &buf[pos..pos + len]));
            pos += len;
        }
        let section = |tag: &[u8; 4]| {
            sections
                .iter()
                .find(|(t, _)| t == tag)
                .map(|(_, b)| *b)
                .ok_or_else(|| Error::Format(format!("model file has no {} section", String::from_utf8_lossy(tag).trim())))
        };
        let meta: Meta = serde_json::from_slice(section(b"META")?).map_err(|e| Error::Format(format!("model metadata: {e}")))?;
        meta.config.validate()?;
        let mut model = PipelineModel::untrained(meta.channels, &meta.config, 0);
        model.trained_on = meta.trained_on;
        if let Some(t) = model.temporal.as_mut() {
            load_params(t, "rnn.", section(b"RNN ")?)?;
        }
        if let Some(s) = model.spatial.as_mut() {
            load_params(s, "cnn.", section(b"CNN ")?)?;
        }
        load_params(&mut model.autoencoder, "ae.", section(b"AE  ")?)?;
        let dump = std::str::from_utf8(section(b"GBT ")?).map_err(|_| Error::Format("tree dump is not UTF-8".into()))?;
        let trees = TreeEnsemble::parse(dump)?;
        if trees.features() != model.autoencoder.latent_size() {
            return Err(Error::Format(format!(
                "tree ensemble reads {} features, autoencoder emits {}",
                trees.features(),
                model.autoencoder.latent_size()
            )));
        }
        model.trees = trees;
        Ok(model)
    }
}

impl Classifier for PipelineModel {
    fn channels(&self) -> usize {
        self.channels
    }

    fn classify(&self, sample: &[f64]) -> Result<u8> {
        self.predict(sample)
    }
}

/// Temporal then spatial features of every row, extracted in chunks.
fn branch_features(temporal: Option<&TemporalNet>, spatial: Option<&SpatialNet>, channels: usize, samples: &[f64]) -> Result<Vec<f64>> {
    let t_dim = temporal.map_or(0, |t| t.feature_size());
    let s_dim = spatial.map_or(0, |s| s.feature_size());
    let chunk = |rows: &[f64]| -> Result<Vec<f64>> {
        let m = rows.len() / channels;
        let xt = match temporal {
            Some(t) => t.forward_independent(rows, m)?.features.into_values(),
            None => Vec::new(),
        };
        let xs = match spatial {
            Some(s) => s.forward_rows(rows, m)?.features.into_values(),
            None => Vec::new(),
        };
        Ok(stack_rows(&xt, t_dim, &xs, s_dim, m))
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<Result<Vec<f64>>> = {
        use rayon::prelude::*;
        samples.par_chunks(EXTRACT_CHUNK * channels).map(chunk).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<Vec<f64>>> = samples.chunks(EXTRACT_CHUNK * channels).map(chunk).collect();
    let mut out = Vec::with_capacity(samples.len() / channels * (t_dim + s_dim));
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct Meta {
    channels: usize,
    config: PipelineConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trained_on: Option<TrainingSource>,
}

fn timed<T>(timings: &mut Vec<(&'static str, f64)>, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(Error::in_stage(stage))?;
    timings.push((stage, start.elapsed().as_secs_f64()));
    Ok(out)
}

/// Branch training, feature stacking, autoencoder fit, latent encoding and
/// boosting, in that order. Each stage draws its own seed from `seed`.
pub fn train_pipeline(train: &Dataset, config: &PipelineConfig, seed: u64) -> Result<PipelineModel> {
    Ok(train_pipeline_with_report(train, config, seed)?.0)
}

pub fn train_pipeline_with_report(train: &Dataset, config: &PipelineConfig, seed: u64) -> Result<(PipelineModel, TrainingReport)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut rng = seeded_rng(seed);
    let (t_seed, s_seed, ae_seed): (u64, u64, u64) = (rng.gen(), rng.gen(), rng.gen());
    let src = config.features;
    let mut report = TrainingReport::default();

    let start = Instant::now();
    let run_temporal = || src.uses_temporal().then(|| temporal::train(train, &config.rnn, t_seed)).transpose();
    let run_spatial = || src.uses_spatial().then(|| spatial::train(train, &config.cnn, s_seed)).transpose();
    #[cfg(feature = "parallel")]
    let (t_res, s_res) = rayon::join(run_temporal, run_spatial);
    #[cfg(not(feature = "parallel"))]
    let (t_res, s_res) = (run_temporal(), run_spatial());
    let temporal = t_res.map_err(Error::in_stage("temporal"))?.map(|(net, loss)| {
        report.temporal_loss = loss;
        net
    });
    let spatial = s_res.map_err(Error::in_stage("spatial"))?.map(|(net, loss)| {
        report.spatial_loss = loss;
        net
    });
    report.timings.push(("branches", start.elapsed().as_secs_f64()));

    let model = fit_head(train, temporal, spatial, config, ae_seed, &mut report)?;
    Ok((model, report))
}

/// Fits the autoencoder and tree ensemble on top of already trained branches.
/// The feature source follows from which branches are given.
pub fn train_head(
    train: &Dataset,
    temporal: Option<TemporalNet>,
    spatial: Option<SpatialNet>,
    config: &PipelineConfig,
    seed: u64,
) -> Result<(PipelineModel, TrainingReport)> {
    let features = match (&temporal, &spatial) {
        (Some(_), Some(_)) => FeatureSource::Hybrid,
        (Some(_), None) => FeatureSource::TemporalOnly,
        (None, Some(_)) => FeatureSource::SpatialOnly,
        (None, None) => return Err(Error::Config("no feature branch given".into())),
    };
    let config = PipelineConfig {
        features,
        ..config.clone()
    };
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut report = TrainingReport::default();
    let model = fit_head(train, temporal, spatial, &config, seed, &mut report)?;
    Ok((model, report))
}

fn fit_head(
    train: &Dataset,
    temporal: Option<TemporalNet>,
    spatial: Option<SpatialNet>,
    config: &PipelineConfig,
    ae_seed: u64,
    report: &mut TrainingReport,
) -> Result<PipelineModel> {
    let n = train.len();
    let stacked = timed(&mut report.timings, "extract", || {
        branch_features(temporal.as_ref(), spatial.as_ref(), train.channels(), train.samples())
    })?;
    let dim = stacked.len() / n;
    let (autoencoder, ae_loss) = timed(&mut report.timings, "autoencoder", || fusion::train(&stacked, n, dim, &config.ae, ae_seed))?;
    report.ae_loss = ae_loss;
    let latent = timed(&mut report.timings, "encode", || autoencoder.encode_batch(&stacked, n))?;
    let trees = timed(&mut report.timings, "boosting", || {
        boost::fit(&latent, n, config.ae.latent, train.labels(), &config.classifier)
    })?;
    Ok(PipelineModel {
        config: config.clone(),
        channels: train.channels(),
        trained_on: None,
        temporal,
        spatial,
        autoencoder,
        trees,
    })
}

pub fn evaluate(model: &PipelineModel, test: &Dataset) -> Result<Metrics> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let scores = model.predict_scores(test.samples(), test.len())?;
    let classes = model.trees.classes();
    let predicted: Vec<u8> = scores.chunks(classes).map(|r| crate::nn::argmax(r) as u8).collect();
    Metrics::compute(classes, &predicted, test.labels(), Some(&scores))
}
