//! `neurotype script` and `neurotype simulate`.

use std::process::Command;

use neurotype_core::data::{self, Corpus, Dataset, DatasetMeta};
use neurotype_core::typing::wire::COMMAND_LEN;
use neurotype_core::typing::{stub_script, CommandMap, CommandMessage};
use serde_json::Value;

fn run(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_neurotype")).args(args).output().unwrap()
}

fn events(stdout: &[u8]) -> Vec<Value> {
    String::from_utf8_lossy(stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn scripted_recording_types_the_word() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("hi.eegw");
    let cmds = dir.path().join("hi.cmdf");
    let out = run(&["script", "--word", "hi", "--channels", "4", "--out", rec.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(std::fs::metadata(&rec).unwrap().len(), 36 * (9 + 4 * 64 * 4));

    let out = run(&[
        "simulate", "--input", rec.to_str().unwrap(), "--model", "stub", "--channels", "4", "--speed", "1000",
        "--commands", cmds.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ev = events(&out.stdout);
    assert_eq!(ev.len(), 37);
    assert_eq!(ev[0]["kind"], "state");
    assert_eq!(ev[36]["typed"], "HI");
    assert!(String::from_utf8_lossy(&out.stderr).contains("typed \"HI\" in 18.0s"));

    let bytes = std::fs::read(&cmds).unwrap();
    let sent: Vec<CommandMessage> = bytes.chunks(COMMAND_LEN).map(|c| CommandMessage::decode(c).unwrap()).collect();
    assert_eq!(sent.len(), 12);
    assert_eq!(sent[11].sequence, 12);
}

#[test]
fn csv_input_and_bad_frames_in_a_recording() {
    let dir = tempfile::tempdir().unwrap();
    // CSV: 18 windows typing "I", plus 10 stray rows
    let map = CommandMap::default();
    let frames = stub_script("I", 2, &map).unwrap();
    let mut samples: Vec<f64> = frames.iter().flat_map(|f| f.values.iter().map(|&v| v as f64)).collect();
    samples.extend(std::iter::repeat_n(0.0, 20));
    let n = samples.len() / 2;
    let ds = Dataset::new(2, samples, vec![0; n]).unwrap().with_meta(DatasetMeta {
        rate_hz: 128,
        subject: "R".into(),
        corpus: Corpus::Synthetic,
    });
    data::save_subject(dir.path(), &ds).unwrap();
    let csv = dir.path().join("R.csv");
    let out = run(&["simulate", "--input", csv.to_str().unwrap(), "--model", "stub", "--channels", "2", "--speed", "inf"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ev = events(&out.stdout);
    assert_eq!(ev[18]["typed"], "I");
    assert_eq!(ev.last().unwrap()["kind"], "error");

    // a short frame in the middle of a recording is skipped and reported
    let rec = dir.path().join("mixed.eegw");
    let mut bytes = Vec::new();
    for (i, f) in frames.iter().enumerate() {
        if i == 5 {
            bytes.extend(neurotype_core::typing::wire::encode_frame(2, &[0.0; 2 * 63]));
        }
        bytes.extend(f.encode());
    }
    std::fs::write(&rec, bytes).unwrap();
    let out = run(&["simulate", "--input", rec.to_str().unwrap(), "--model", "stub", "--channels", "2", "--speed", "1e9"]);
    let ev = events(&out.stdout);
    assert_eq!(ev.iter().filter(|e| e["kind"] == "error").count(), 1);
    assert_eq!(ev.last().unwrap()["typed"], "I");

    let out = run(&["simulate", "--input", rec.to_str().unwrap(), "--model", "stub", "--speed", "0"]);
    assert!(!out.status.success());
}
