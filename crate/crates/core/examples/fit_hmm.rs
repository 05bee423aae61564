//! Fits a three-state HMM to a planted corpus, prints the recovered
//! parameters next to the truth, and scores Viterbi paths against the hidden
//! states.
//!
//! cargo run --release --example fit_hmm -- [seed]

use pathtrace::hmm::{baum_welch, viterbi, FitConfig, HmmParams};
use pathtrace::simulate::{presets, sample_sequences};

fn print_matrix(name: &str, rows: &[Vec<f64>]) {
    println!("{name}:");
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.3}")).collect();
        println!("  [{}]", cells.join(", "));
    }
}

/// Fitted state whose emissions put the most mass on each true state's
/// favourite symbol. The planted states have distinct favourites.
fn match_states(truth: &HmmParams, fitted: &HmmParams) -> Vec<usize> {
    let favourite = |row: &[f64]| (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
    truth
        .emission
        .iter()
        .map(|row| {
            let sym = favourite(row);
            (0..fitted.n_states)
                .max_by(|&a, &b| fitted.emission[a][sym].total_cmp(&fitted.emission[b][sym]))
                .unwrap()
        })
        .collect()
}

fn main() -> pathtrace::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let scenario = presets::planted_symbol_scenario(seed);
    let sampled = sample_sequences(&scenario)?;
    let seqs: Vec<Vec<usize>> = sampled.iter().map(|s| s.symbols.clone()).collect();

    let fit = baum_welch(&seqs, 3, 5, &FitConfig::with_seed(seed))?;
    println!(
        "log-likelihood {:.2} after {} iterations (restart {}, converged: {})",
        fit.log_likelihood, fit.iterations, fit.restart_index, fit.converged
    );

    let perm = match_states(&scenario.truth, &fit.params);
    let aligned = fit.params.permuted(&perm);
    print_matrix("true transitions", &scenario.truth.transition);
    print_matrix("fitted transitions", &aligned.transition);
    print_matrix("true emissions", &scenario.truth.emission);
    print_matrix("fitted emissions", &aligned.emission);

    let (mut hits, mut total) = (0, 0);
    for s in &sampled {
        let path = viterbi(&fit.params, &s.symbols)?;
        for (&decoded, &hidden) in path.iter().zip(&s.states) {
            hits += usize::from(decoded == perm[hidden]);
            total += 1;
        }
    }
    println!("Viterbi recovers the hidden state at {:.1}% of {total} positions", 100.0 * hits as f64 / total as f64);
    Ok(())
}
