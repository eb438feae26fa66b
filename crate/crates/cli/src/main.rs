use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod classifier;
mod offline;
mod serve;
mod simulate;

#[derive(Parser)]
#[command(name = "neurotype", version, about = "EEG intent decoding and brain typing")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a model on the training split of one subject.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        subject: String,
        /// JSON pipeline configuration; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a model on held-out rows and write the metrics report.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// ROC points; defaults to the report path with a `.roc.csv` extension.
        #[arg(long)]
        roc: Option<PathBuf>,
        /// Overrides the subject recorded in the model.
        #[arg(long)]
        subject: Option<String>,
        /// Overrides the split seed recorded in the model.
        #[arg(long)]
        split_seed: Option<u64>,
        /// Evaluate every row instead of the held-out split.
        #[arg(long)]
        all_rows: bool,
    },
    /// Intent similarity table (self, cross, percentage difference).
    Analyze {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Subjects to pool; all subjects in DATA when omitted.
        #[arg(long)]
        subject: Vec<String>,
        #[arg(long, default_value_t = neurotype_core::similarity::DEFAULT_SAMPLES_PER_INTENT)]
        per_intent: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the typing service.
    Serve {
        #[arg(long)]
        listen: String,
        /// Model file, or `stub` to read intents off channel 0.
        #[arg(long)]
        model: String,
        /// JSON list of five commands indexed by intent label.
        #[arg(long)]
        map: Option<PathBuf>,
        /// Channel count for the stub classifier.
        #[arg(long)]
        channels: Option<usize>,
        /// Browser bridge: WebSocket at `/ws`.
        #[arg(long)]
        http: Option<String>,
    },
    /// Replay a recording through a local session and print the event feed.
    Simulate {
        /// `EEGW` frame recording, or a dataset CSV cut into 64-row windows.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: String,
        /// Stream time per wall-clock second.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        channels: Option<usize>,
        /// Also write the emitted `CMDF` messages here.
        #[arg(long)]
        commands: Option<PathBuf>,
    },
    /// Write a stub-classifier recording that types WORD.
    Script {
        #[arg(long)]
        word: String,
        #[arg(long, default_value_t = 64)]
        channels: usize,
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Cmd::Train {
            data,
            subject,
            config,
            seed,
            out,
        } => offline::train(&data, &subject, config.as_deref(), seed, &out),
        Cmd::Eval {
            model,
            data,
            report,
            roc,
            subject,
            split_seed,
            all_rows,
        } => offline::eval(offline::EvalArgs {
            model: &model,
            data: &data,
            report: &report,
            roc: roc.as_deref(),
            subject: subject.as_deref(),
            split_seed,
            all_rows,
        }),
        Cmd::Analyze {
            data,
            out,
            subject,
            per_intent,
            seed,
        } => offline::analyze(&data, &out, &subject, per_intent, seed),
        Cmd::Serve {
            listen,
            model,
            map,
            channels,
            http,
        } => {
            let loaded = classifier::load(&model, channels, map.as_deref())?;
            tokio::runtime::Runtime::new()?.block_on(serve::run(&listen, http.as_deref(), loaded))
        }
        Cmd::Simulate {
            input,
            model,
            speed,
            map,
            channels,
            commands,
        } => {
            let loaded = classifier::load(&model, channels, map.as_deref())?;
            simulate::run(&input, loaded, speed, commands.as_deref())
        }
        Cmd::Script {
            word,
            channels,
            map,
            out,
        } => simulate::script(&word, channels, map.as_deref(), &out),
    }
}
