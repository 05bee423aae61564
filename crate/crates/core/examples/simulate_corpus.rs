//! Writes a synthetic corpus in the same CSV layout the CLI reads: attempt
//! logs, problem metadata, ground truth and assessment scores.
//!
//! cargo run --release --example simulate_corpus -- <out_dir> [n_students]

use std::path::PathBuf;

use pathtrace::simulate::{
    assessments_csv, meta_csv, presets, records_csv, sample_assessments, sample_logs, truth_csv, truth_state_shares,
    LengthSpec,
};

fn main() -> pathtrace::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(dir) = args.next().map(PathBuf::from) else {
        eprintln!("usage: simulate_corpus <out_dir> [n_students]");
        std::process::exit(2);
    };
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(500);
    std::fs::create_dir_all(&dir).map_err(|e| pathtrace::Error::io(dir.clone(), e))?;

    let scenario = presets::planted_label_scenario(n, LengthSpec::Uniform { min: 15, max: 120 }, 2024);
    let logs = sample_logs(&scenario)?;
    let shares = truth_state_shares(&logs.truth, scenario.truth.n_states);
    let assessments = sample_assessments(&shares, scenario.assessment_effects.as_deref().unwrap_or(&[]), scenario.seed);

    let files = [
        ("logs.csv", records_csv(&logs.records)?),
        ("meta.csv", meta_csv(&logs.meta)?),
        ("truth.csv", truth_csv(&logs.truth)?),
        ("assessments.csv", assessments_csv(&assessments)?),
    ];
    for (name, bytes) in files {
        let path = dir.join(name);
        std::fs::write(&path, &bytes).map_err(|e| pathtrace::Error::io(path.clone(), e))?;
        println!("{:>9} bytes  {}", bytes.len(), path.display());
    }
    let repaired = logs.truth.iter().filter(|t| t.repaired).count();
    println!("{} attempts, {repaired} inserted or relabeled to keep labels consistent", logs.records.len());
    Ok(())
}
