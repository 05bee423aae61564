//! First-order label transitions on a synthetic corpus, within problems and
//! across a student's whole history.
//!
//! cargo run --release --example markov_transitions -- [heatmap.csv]

use pathtrace::ingest::{order, order_across, SequenceMode};
use pathtrace::labeling::{label_attempts, PathwayLabel};
use pathtrace::markov::{estimate_transitions, HeatmapKind, TransitionStats};
use pathtrace::simulate::{presets, sample_logs, LengthSpec};

fn strongest(stats: &TransitionStats, k: usize) -> Vec<(PathwayLabel, PathwayLabel, f64, u64)> {
    let mut cells = Vec::new();
    for from in PathwayLabel::ALL {
        for to in PathwayLabel::ALL {
            let n = stats.counts[from.index()][to.index()];
            if n >= 20 {
                cells.push((from, to, stats.probability(from, to), n));
            }
        }
    }
    cells.sort_by(|a, b| b.2.total_cmp(&a.2));
    cells.truncate(k);
    cells
}

fn main() -> pathtrace::Result<()> {
    let scenario = presets::planted_label_scenario(300, LengthSpec::Uniform { min: 10, max: 80 }, 42);
    let logs = sample_logs(&scenario)?;
    let labeled = label_attempts(&order_across(&logs.records)?, &logs.meta)?;
    println!("{} attempts from {} students", labeled.len(), scenario.n_students);

    for mode in [SequenceMode::WithinProblem, SequenceMode::AcrossProblem] {
        let stats = estimate_transitions(&order(&labeled, mode)?);
        println!("\n{mode}: {} transitions; strongest cells with at least 20 observations", stats.total_transitions());
        for (from, to, p, n) in strongest(&stats, 6) {
            let t = stats.mean_log_time[from.index()][to.index()].unwrap_or(f64::NAN);
            println!("  {from:>22} -> {to:<22} p = {p:.3}  n = {n:<5} mean ln(ms) = {t:.2}");
        }
        if mode == SequenceMode::AcrossProblem {
            if let Some(path) = std::env::args().nth(1) {
                stats.export_heatmap(HeatmapKind::Probability, &path)?;
                println!("probability heatmap written to {path}");
            }
        }
    }
    Ok(())
}
