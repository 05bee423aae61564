//! Chooses the number of hidden states for a planted corpus by
//! cross-validated held-out BIC.
//!
//! cargo run --release --example select_states -- [seed]

use std::time::Instant;

use pathtrace::hmm::{select_states, FitConfig};
use pathtrace::simulate::{presets, sample_sequences};

fn main() -> pathtrace::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let scenario = presets::planted_symbol_scenario(seed);
    let seqs: Vec<Vec<usize>> = sample_sequences(&scenario)?.into_iter().map(|s| s.symbols).collect();

    let start = Instant::now();
    let report = select_states(&seqs, 5, 2..=6, 5, &FitConfig::with_seed(seed))?;
    println!("planted states: {}", scenario.truth.n_states);
    for (s, b) in &report.candidates {
        let mark = if *s == report.chosen_states { " <- chosen" } else { "" };
        println!("S = {s}: mean held-out BIC {b:.1}{mark}");
    }
    println!("elapsed: {:.1?}", start.elapsed());
    Ok(())
}
