//! Batch subcommands: train, eval, analyze.

use std::fs::File;
use std::path::Path;

use anyhow::{bail, Context, Result};
use neurotype_core::data::{self, Dataset, SplitSpec, NUM_INTENTS};
use neurotype_core::pipeline::{self, PipelineConfig, PipelineModel, TrainingSource};
use neurotype_core::similarity::similarity_matrix;

fn load_subject(dir: &Path, subject: &str) -> Result<Dataset> {
    data::load_subject(dir, subject).with_context(|| format!("loading subject {subject} from {}", dir.display()))
}

pub fn train(dir: &Path, subject: &str, config: Option<&Path>, seed: u64, out: &Path) -> Result<()> {
    let cfg = match config {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    cfg.validate()?;
    let ds = load_subject(dir, subject)?;
    let (train, test) = data::split(
        &ds,
        SplitSpec {
            train_fraction: cfg.train_fraction,
            seed,
        },
    )?;
    eprintln!(
        "subject {subject}: {} training rows, {} held out, {} channels, features {}",
        train.len(),
        test.len(),
        ds.channels(),
        cfg.features
    );
    let (mut model, report) = pipeline::train_pipeline_with_report(&train, &cfg, seed)?;
    model.trained_on = Some(TrainingSource {
        subject: subject.to_string(),
        split_seed: seed,
    });
    for (stage, secs) in &report.timings {
        eprintln!("  {stage:<12}{secs:>9.2}s");
    }
    for (name, trace) in [
        ("temporal", &report.temporal_loss),
        ("spatial", &report.spatial_loss),
        ("autoencoder", &report.ae_loss),
    ] {
        if let (Some(first), Some(last)) = (trace.first(), trace.last()) {
            eprintln!("  {name} loss {first:.4} -> {last:.4}");
        }
    }
    model.save(out).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(())
}

pub struct EvalArgs<'a> {
    pub model: &'a Path,
    pub data: &'a Path,
    pub report: &'a Path,
    pub roc: Option<&'a Path>,
    pub subject: Option<&'a str>,
    pub split_seed: Option<u64>,
    pub all_rows: bool,
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let model = PipelineModel::load(args.model).with_context(|| format!("loading model {}", args.model.display()))?;
    let recorded = model.trained_on.clone();
    let Some(subject) = args.subject.map(str::to_string).or_else(|| recorded.as_ref().map(|t| t.subject.clone())) else {
        bail!("model does not record its training subject; pass --subject");
    };
    let ds = load_subject(args.data, &subject)?;
    if ds.channels() != model.channels {
        bail!("subject {subject} has {} channels, model expects {}", ds.channels(), model.channels);
    }
    let rows = if args.all_rows {
        ds
    } else {
        let seed = args.split_seed.or(recorded.map(|t| t.split_seed)).unwrap_or(0);
        data::split(
            &ds,
            SplitSpec {
                train_fraction: model.config.train_fraction,
                seed,
            },
        )?
        .1
    };
    let metrics = model.evaluate(&rows)?;
    metrics.write_report(File::create(args.report).with_context(|| format!("creating {}", args.report.display()))?)?;
    let roc = args.roc.map(Path::to_path_buf).unwrap_or_else(|| args.report.with_extension("roc.csv"));
    metrics.write_roc(File::create(&roc).with_context(|| format!("creating {}", roc.display()))?)?;
    println!(
        "accuracy {:.4} on {} rows of {subject}; macro F1 {:.4}",
        metrics.accuracy,
        rows.len(),
        metrics.macro_f1
    );
    println!("wrote {} and {}", args.report.display(), roc.display());
    Ok(())
}

pub fn analyze(dir: &Path, out: &Path, subjects: &[String], per_intent: usize, seed: u64) -> Result<()> {
    let subjects = if subjects.is_empty() {
        data::list_subjects(dir).with_context(|| format!("listing {}", dir.display()))?
    } else {
        subjects.to_vec()
    };
    if subjects.is_empty() {
        bail!("no subjects in {}", dir.display());
    }
    let sets = subjects.iter().map(|s| load_subject(dir, s)).collect::<Result<Vec<_>>>()?;
    if let Some(ds) = sets.iter().find(|d| d.channels() != sets[0].channels()) {
        bail!("subjects disagree on channel count ({} vs {})", sets[0].channels(), ds.channels());
    }
    let mut groups: Vec<(u8, Vec<&[f64]>)> = (0..NUM_INTENTS as u8).map(|l| (l, Vec::new())).collect();
    for ds in &sets {
        for (label, rows) in ds.by_intent().into_iter().enumerate() {
            groups[label].1.extend(rows);
        }
    }
    groups.retain(|(_, rows)| !rows.is_empty());
    let table = similarity_matrix(&groups, per_intent, seed)?;
    table.write_csv(File::create(out).with_context(|| format!("creating {}", out.display()))?)?;
    for (i, label) in table.intents.iter().enumerate() {
        println!(
            "intent {label}: self {:.4} cross {:.4} pd {:.2}%",
            table.self_similarity(i),
            table.cross_similarity(i),
            table.percentage_difference(i)?
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}
