//! Runs every CLI stage in-process against a synthetic corpus in a scratch
//! directory: simulate, clean, label, markov, hmm select/fit/decode/summarize
//! and regress. Equivalent to calling the `pathtrace` binary step by step.
//!
//! cargo run --release --example full_pipeline -- [work_dir]

use std::path::PathBuf;

use pathtrace::simulate::{presets, LengthSpec};

fn step(args: &[&str]) {
    println!("$ pathtrace {}", args.join(" "));
    let code = pathtrace::cli::run(std::iter::once("pathtrace").chain(args.iter().copied()));
    if code != 0 {
        std::process::exit(code);
    }
}

fn main() {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("pathtrace-pipeline"));
    std::fs::create_dir_all(&dir).expect("create work dir");
    let f = |name: &str| dir.join(name).to_string_lossy().into_owned();

    let scenario = presets::planted_label_scenario(300, LengthSpec::Uniform { min: 20, max: 60 }, 0);
    std::fs::write(f("scenario.json"), serde_json::to_vec_pretty(&scenario).unwrap()).expect("write scenario");

    step(&[
        "--seed", "5", "simulate", "--scenario", &f("scenario.json"), "--out-logs", &f("logs.csv"),
        "--out-truth", &f("truth.csv"), "--out-meta", &f("meta.csv"), "--out-assessments", &f("assess.csv"),
    ]);
    step(&["clean", "--logs", &f("logs.csv"), "--meta", &f("meta.csv"), "--out", &f("clean.csv"), "--report", &f("report.json")]);
    step(&["label", "--clean", &f("clean.csv"), "--meta", &f("meta.csv"), "--out", &f("labeled.csv")]);
    for mode in ["within", "across"] {
        step(&[
            "markov", "--labeled", &f("labeled.csv"), "--mode", mode, "--out-prob", &f(&format!("prob_{mode}.csv")),
            "--out-time", &f(&format!("time_{mode}.csv")), "--out-counts", &f(&format!("counts_{mode}.csv")),
        ]);
    }
    step(&[
        "--seed", "5", "hmm", "select", "--labeled", &f("labeled.csv"), "--mode", "across", "--smin", "2", "--smax",
        "4", "--folds", "3", "--restarts", "2", "--out", &f("select.json"),
    ]);
    step(&["--seed", "5", "hmm", "fit", "--labeled", &f("labeled.csv"), "--mode", "across", "--states", "3", "--out", &f("model.json")]);
    step(&["hmm", "decode", "--model", &f("model.json"), "--labeled", &f("labeled.csv"), "--out", &f("paths.csv")]);
    step(&["hmm", "summarize", "--paths", &f("paths.csv"), "--labeled", &f("labeled.csv"), "--out", &f("summary.csv")]);
    for suite in ["hmm-states", "replay"] {
        step(&[
            "regress", "--paths", &f("paths.csv"), "--labeled", &f("labeled.csv"), "--assessments", &f("assess.csv"),
            "--suite", suite, "--reference", "0", "--out", &f(&format!("{suite}.csv")),
        ]);
    }
    println!("\noutputs in {}", dir.display());
}
