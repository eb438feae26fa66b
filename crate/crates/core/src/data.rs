//! Labeled EEG sample sets: on-disk format, validation, splitting and batching.
//!
//! One CSV per subject with header `ch0,…,ch{K−1},label` and one time-point per
//! row, next to a `key=value` sidecar (`rate`, `channels`, `subject`, `corpus`).

use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::nn::{seeded_rng, SeededRng};

pub const NUM_INTENTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corpus {
    /// PhysioNet motor movement/imagery: 64 channels at 160 Hz.
    Eegmmidb,
    /// 14-channel headset at 128 Hz.
    Emotiv,
    Synthetic,
}

impl Corpus {
    pub fn expected_rate(self) -> Option<u32> {
        match self {
            Corpus::Eegmmidb => Some(160),
            Corpus::Emotiv => Some(128),
            Corpus::Synthetic => None,
        }
    }

    pub fn expected_channels(self) -> Option<usize> {
        match self {
            Corpus::Eegmmidb => Some(64),
            Corpus::Emotiv => Some(14),
            Corpus::Synthetic => None,
        }
    }
}

impl fmt::Display for Corpus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Corpus::Eegmmidb => "eegmmidb",
            Corpus::Emotiv => "emotiv",
            Corpus::Synthetic => "synthetic",
        })
    }
}

impl FromStr for Corpus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eegmmidb" => Ok(Corpus::Eegmmidb),
            "emotiv" => Ok(Corpus::Emotiv),
            "synthetic" => Ok(Corpus::Synthetic),
            other => Err(Error::Format(format!("unknown corpus `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub rate_hz: u32,
    pub subject: String,
    pub corpus: Corpus,
}

impl DatasetMeta {
    pub fn to_sidecar(&self, channels: usize) -> String {
        format!(
            "rate={}\nchannels={}\nsubject={}\ncorpus={}\n",
            self.rate_hz, channels, self.subject, self.corpus
        )
    }

    /// Parses a sidecar, returning the metadata and the declared channel count.
    pub fn parse_sidecar(text: &str) -> Result<(Self, usize)> {
        let mut rate = None;
        let mut channels = None;
        let mut subject = None;
        let mut corpus = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("sidecar line {}: expected key=value", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let bad = |what: &str| Error::Format(format!("sidecar line {}: bad {what} `{v}`", lineno + 1));
            match k {
                "rate" => rate = Some(v.parse::<u32>().map_err(|_| bad("rate"))?),
                "channels" => channels = Some(v.parse::<usize>().map_err(|_| bad("channels"))?),
                "subject" => subject = Some(v.to_string()),
                "corpus" => corpus = Some(v.parse::<Corpus>()?),
                _ => {}
            }
        }
        let missing = |k: &str| Error::Format(format!("sidecar is missing `{k}`"));
        let meta = DatasetMeta {
            rate_hz: rate.ok_or_else(|| missing("rate"))?,
            subject: subject.ok_or_else(|| missing("subject"))?,
            corpus: corpus.ok_or_else(|| missing("corpus"))?,
        };
        let channels = channels.ok_or_else(|| missing("channels"))?;
        if let Some(r) = meta.corpus.expected_rate() {
            if r != meta.rate_hz {
                return Err(Error::Format(format!(
                    "corpus {} is sampled at {r} Hz, sidecar says {}",
                    meta.corpus, meta.rate_hz
                )));
            }
        }
        Ok((meta, channels))
    }
}

/// Samples stored row-major `[n, channels]` with one intent label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    channels: usize,
    samples: Vec<f64>,
    labels: Vec<u8>,
    pub meta: Option<DatasetMeta>,
}

impl Dataset {
    pub fn new(channels: usize, samples: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::shape("dataset needs at least one channel"));
        }
        if samples.len() != labels.len() * channels {
            return Err(Error::shape(format!(
                "{} values do not form {} rows of {channels} channels",
                samples.len(),
                labels.len()
            )));
        }
        if let Some(row) = samples.chunks(channels).position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(Error::Data {
                row: row + 1,
                reason: "non-finite voltage".into(),
            });
        }
        if let Some(row) = labels.iter().position(|&l| l as usize >= NUM_INTENTS) {
            return Err(Error::Data {
                row: row + 1,
                reason: format!("label {} outside 0..{}", labels[row], NUM_INTENTS - 1),
            });
        }
        Ok(Dataset {
            channels,
            samples,
            labels,
            meta: None,
        })
    }

    pub fn with_meta(mut self, meta: DatasetMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.channels..(i + 1) * self.channels]
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub(crate) fn check_labels(&self, classes: usize) -> Result<()> {
        match self.labels.iter().position(|&l| l as usize >= classes) {
            Some(row) => Err(Error::Data {
                row: row + 1,
                reason: format!("label {} outside 0..{}", self.labels[row], classes - 1),
            }),
            None => Ok(()),
        }
    }

    /// Copies the listed rows into contiguous sample and label buffers.
    pub fn gather(&self, idx: &[usize]) -> (Vec<f64>, Vec<u8>) {
        let mut x = Vec::with_capacity(idx.len() * self.channels);
        let mut y = Vec::with_capacity(idx.len());
        for &i in idx {
            x.extend_from_slice(self.sample(i));
            y.push(self.labels[i]);
        }
        (x, y)
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let (samples, labels) = self.gather(idx);
        Dataset {
            channels: self.channels,
            samples,
            labels,
            meta: self.meta.clone(),
        }
    }

    /// Sample rows grouped by intent label.
    pub fn by_intent(&self) -> Vec<Vec<&[f64]>> {
        let mut groups = vec![Vec::new(); NUM_INTENTS];
        for i in 0..self.len() {
            groups[self.labels[i] as usize].push(self.sample(i));
        }
        groups
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..self.channels).map(|c| format!("ch{c}")).collect();
        header.push("label".into());
        wr.write_record(&header).map_err(csv_err)?;
        let mut record: Vec<String> = Vec::with_capacity(self.channels + 1);
        for i in 0..self.len() {
            record.clear();
            record.extend(self.sample(i).iter().map(|v| format!("{v:.16e}")));
            record.push(self.labels[i].to_string());
            wr.write_record(&record).map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

/// Parses a sample CSV. Row numbers in errors count data rows from 1.
pub fn read_csv<R: Read>(reader: R, expected_channels: usize) -> Result<Dataset> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.is_empty() {
        return Err(Error::Empty("dataset file"));
    }
    if header.len() != expected_channels + 1 {
        return Err(Error::Data {
            row: 0,
            reason: format!(
                "header has {} columns, expected {} channels + label",
                header.len(),
                expected_channels
            ),
        });
    }
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Data {
            row,
            reason: e.to_string(),
        })?;
        if rec.len() != expected_channels + 1 {
            return Err(Error::Data {
                row,
                reason: format!("{} columns, expected {}", rec.len(), expected_channels + 1),
            });
        }
        for (c, cell) in rec.iter().take(expected_channels).enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Data {
                row,
                reason: format!("non-numeric value `{cell}` in ch{c}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Data {
                    row,
                    reason: format!("non-finite value in ch{c}"),
                });
            }
            samples.push(v);
        }
        let cell = rec[expected_channels].trim();
        let label: u8 = cell
            .parse()
            .ok()
            .filter(|&l: &u8| (l as usize) < NUM_INTENTS)
            .ok_or_else(|| Error::Data {
                row,
                reason: format!("label `{cell}` is not an intent in 0..{}", NUM_INTENTS - 1),
            })?;
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    Dataset::new(expected_channels, samples, labels)
}

/// Loads one CSV file with `expected_channels` channel columns.
pub fn load_dataset(path: &Path, expected_channels: usize) -> Result<Dataset> {
    let file = fs::File::open(path)?;
    let ds = read_csv(std::io::BufReader::new(file), expected_channels)?;
    let sidecar = path.with_extension("meta");
    if sidecar.exists() {
        let (meta, channels) = DatasetMeta::parse_sidecar(&fs::read_to_string(&sidecar)?)?;
        if channels != expected_channels {
            return Err(Error::Format(format!(
                "{} declares {channels} channels, expected {expected_channels}",
                sidecar.display()
            )));
        }
        return Ok(ds.with_meta(meta));
    }
    Ok(ds)
}

pub fn subject_paths(dir: &Path, subject: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{subject}.csv")), dir.join(format!("{subject}.meta")))
}

/// Loads `<dir>/<subject>.csv`, taking the channel count from the sidecar.
pub fn load_subject(dir: &Path, subject: &str) -> Result<Dataset> {
    let (csv_path, meta_path) = subject_paths(dir, subject);
    let (_, channels) = DatasetMeta::parse_sidecar(&fs::read_to_string(&meta_path)?)?;
    load_dataset(&csv_path, channels)
}

/// Every subject (one `.meta` sidecar each) in `dir`, sorted by name.
pub fn list_subjects(dir: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "meta") {
            if let Some(stem) = path.file_stem() {
                out.push(stem.to_string_lossy().into_owned());
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn save_subject(dir: &Path, ds: &Dataset) -> Result<()> {
    let meta = ds
        .meta
        .as_ref()
        .ok_or_else(|| Error::Format("dataset has no metadata to save".into()))?;
    let (csv_path, meta_path) = subject_paths(dir, &meta.subject);
    ds.write_csv(std::io::BufWriter::new(fs::File::create(csv_path)?))?;
    fs::write(meta_path, meta.to_sidecar(ds.channels()))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.75,
            seed: 0,
        }
    }
}

/// Seeded shuffle, then the first `round(fraction·n)` rows train and the rest test.
pub fn split(ds: &Dataset, spec: SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds.len(), spec)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

pub fn split_indices(n: usize, spec: SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if n == 0 {
        return Err(Error::Empty("dataset"));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must be in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded_rng(spec.seed));
    let k = (spec.train_fraction * n as f64).round() as usize;
    let test = idx.split_off(k);
    Ok((idx, test))
}

/// Seeded permutation of `0..n` cut into batches of `size`; the last may be short.
pub fn batches(n: usize, size: usize, seed: u64) -> Vec<Vec<usize>> {
    let size = size.max(1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded_rng(seed));
    idx.chunks(size).map(<[usize]>::to_vec).collect()
}

/// Endless batch stream: reshuffles `0..n` every epoch and yields batches of
/// `min(size, n)` rows, with a short batch at each epoch end.
pub struct BatchCycler {
    order: Vec<usize>,
    pos: usize,
    size: usize,
    rng: SeededRng,
}

impl BatchCycler {
    pub fn new(n: usize, size: usize, seed: u64) -> Self {
        BatchCycler {
            order: (0..n).collect(),
            pos: n,
            size: size.clamp(1, n.max(1)),
            rng: seeded_rng(seed),
        }
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        if self.pos >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let end = (self.pos + self.size).min(self.order.len());
        let out = self.order[self.pos..end].to_vec();
        self.pos = end;
        out
    }
}

/// Seeded synthetic sample sets used by tests, the acceptance suite and demos.
pub mod synthetic {
    use rand::Rng;
    use rand_distr::StandardNormal;

    use super::*;

    /// Gaussian blobs: intent `c` has a random mean vector (spread `separation`)
    /// and unit-variance isotropic noise.
    pub fn blobs(n: usize, channels: usize, classes: usize, separation: f64, seed: u64) -> Dataset {
        let mut rng = seeded_rng(seed);
        let centers: Vec<Vec<f64>> = (0..classes)
            .map(|_| (0..channels).map(|_| separation * rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let mut samples = Vec::with_capacity(n * channels);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % classes;
            for v in &centers[c] {
                samples.push(v + rng.sample::<f64, _>(StandardNormal));
            }
            labels.push(c as u8);
        }
        let ds = Dataset::new(channels, samples, labels).expect("synthetic blobs are valid");
        // interleave classes randomly so contiguous slices are not class-sorted
        let order = batches(n, n.max(1), seed ^ 0x5eed).concat();
        ds.subset(&order)
    }

    /// Linearly separable: channel `c mod K` carries a large positive offset for intent `c`.
    pub fn separable(n: usize, channels: usize, classes: usize, seed: u64) -> Dataset {
        let mut rng = seeded_rng(seed);
        let mut samples = Vec::with_capacity(n * channels);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let c = rng.gen_range(0..classes);
            for k in 0..channels {
                let base = if k == c % channels { 3.0 } else { 0.0 };
                samples.push(base + 0.3 * rng.sample::<f64, _>(StandardNormal));
            }
            labels.push(c as u8);
        }
        Dataset::new(channels, samples, labels).expect("synthetic data is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_row_fixture() {
        let text = "ch0,ch1,label\n1.5,-2,0\n0,3.25,4\n7,8,2\n";
        let ds = read_csv(text.as_bytes(), 2).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.sample(1), &[0.0, 3.25]);
        assert_eq!(ds.labels(), &[0, 4, 2]);
    }

    #[test]
    fn bad_label_names_row() {
        let text = "ch0,ch1,label\n1,2,0\n3,4,7\n";
        match read_csv(text.as_bytes(), 2) {
            Err(Error::Data { row, reason }) => {
                assert_eq!(row, 2);
                assert!(reason.contains('7'));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_empty_dataset_error() {
        assert!(matches!(read_csv("".as_bytes(), 2), Err(Error::Empty(_))));
        assert!(matches!(read_csv("ch0,ch1,label\n".as_bytes(), 2), Err(Error::Empty(_))));
    }

    #[test]
    fn wrong_width_and_non_numeric_rejected() {
        let r = read_csv("ch0,ch1,label\n1,2,3,0\n".as_bytes(), 2);
        assert!(matches!(r, Err(Error::Data { row: 1, .. })));
        let r = read_csv("ch0,ch1,label\n1,2,0\n1,x,0\n".as_bytes(), 2);
        assert!(matches!(r, Err(Error::Data { row: 2, .. })));
        let r = read_csv("ch0,label\n1,0\n".as_bytes(), 2);
        assert!(r.is_err());
    }

    #[test]
    fn split_sizes() {
        let (tr, te) = split_indices(28_000, SplitSpec { train_fraction: 0.75, seed: 1 }).unwrap();
        assert_eq!((tr.len(), te.len()), (21_000, 7_000));
        let (tr, te) = split_indices(100, SplitSpec { train_fraction: 0.75, seed: 1 }).unwrap();
        assert_eq!((tr.len(), te.len()), (75, 25));
    }

    #[test]
    fn split_is_seed_stable() {
        let spec = SplitSpec { train_fraction: 0.6, seed: 42 };
        assert_eq!(split_indices(50, spec).unwrap(), split_indices(50, spec).unwrap());
        assert!(split_indices(0, spec).is_err());
    }

    #[test]
    fn batch_sizes() {
        let sizes: Vec<usize> = batches(10, 3, 0).iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 3, 3, 1]);
        assert_eq!(batches(10, 50, 0).len(), 1);
        assert_eq!(batches(10, 3, 9), batches(10, 3, 9));
    }

    #[test]
    fn cycler_covers_each_epoch() {
        let mut c = BatchCycler::new(7, 3, 5);
        let mut epoch: Vec<usize> = (0..3).flat_map(|_| c.next_batch()).collect();
        epoch.sort();
        assert_eq!(epoch, (0..7).collect::<Vec<_>>());
        let mut big = BatchCycler::new(4, 7000, 1);
        assert_eq!(big.next_batch().len(), 4);
    }

    #[test]
    fn sidecar_round_trip_and_rate_check() {
        let meta = DatasetMeta {
            rate_hz: 160,
            subject: "S1".into(),
            corpus: Corpus::Eegmmidb,
        };
        let (back, ch) = DatasetMeta::parse_sidecar(&meta.to_sidecar(64)).unwrap();
        assert_eq!((back, ch), (meta, 64));
        assert!(DatasetMeta::parse_sidecar("rate=100\nchannels=14\nsubject=a\ncorpus=emotiv\n").is_err());
    }

    #[test]
    fn subject_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = synthetic::blobs(20, 3, 5, 1.0, 3).with_meta(DatasetMeta {
            rate_hz: 128,
            subject: "S7".into(),
            corpus: Corpus::Synthetic,
        });
        save_subject(dir.path(), &ds).unwrap();
        assert_eq!(list_subjects(dir.path()).unwrap(), vec!["S7".to_string()]);
        assert_eq!(load_subject(dir.path(), "S7").unwrap(), ds);
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(
            rows in proptest::collection::vec((proptest::collection::vec(-1e6f64..1e6, 3), 0u8..5), 1..20)
        ) {
            let samples: Vec<f64> = rows.iter().flat_map(|(v, _)| v.clone()).collect();
            let labels: Vec<u8> = rows.iter().map(|(_, l)| *l).collect();
            let ds = Dataset::new(3, samples, labels).unwrap();
            let mut buf = Vec::new();
            ds.write_csv(&mut buf).unwrap();
            let back = read_csv(&buf[..], 3).unwrap();
            prop_assert_eq!(back, ds);
        }

        #[test]
        fn split_is_a_partition(n in 1usize..300, frac in 0.05f64..0.95, seed in any::<u64>()) {
            let (tr, te) = split_indices(n, SplitSpec { train_fraction: frac, seed }).unwrap();
            let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
            all.sort();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(tr.len(), (frac * n as f64).round() as usize);
        }
    }
}
