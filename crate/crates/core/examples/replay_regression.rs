//! Regresses synthetic outcome scores on decoded-state shares and on replay
//! timing, with Benjamini-Hochberg adjusted p-values.
//!
//! The planted scenario raises each post subscale by 1.5 per unit share of
//! the completion state and by 3 per unit share of the replay state, so
//! post_math moves by 4.5 and 9. Decoding noise attenuates the fitted
//! coefficients somewhat. Replay timing acts as a proxy for the replay state.
//!
//! cargo run --release --example replay_regression

use pathtrace::hmm::{baum_welch, decode_sequences, symbol_sequences, FitConfig};
use pathtrace::ingest::{order, order_across, SequenceMode};
use pathtrace::labeling::{label_attempts, PathwayLabel, N_LABELS};
use pathtrace::simulate::{presets, sample_assessments, sample_logs, truth_state_shares, LengthSpec};
use pathtrace::stats::{build_features, run_model_suite, Assessments, BhScope, OutcomeVar, RegressionResult, Suite};

fn print_results(results: &[RegressionResult]) {
    for r in results {
        println!("\n{}  (n = {}, R² = {:.3})", r.model, r.n, r.r2);
        for j in 0..r.predictors.len() {
            let adj = r.p_adj[j].map_or("-".to_string(), |p| format!("{p:.2e}"));
            println!(
                "  {:<22}b = {:>9.4}  se = {:>8.4}  p = {:>9.2e}  p_adj = {adj}",
                r.predictors[j], r.coefficients[j], r.std_errors[j], r.p_raw[j]
            );
        }
    }
}

fn main() -> pathtrace::Result<()> {
    let seed = 11;
    let scenario = presets::planted_label_scenario(600, LengthSpec::Uniform { min: 20, max: 80 }, seed);
    let logs = sample_logs(&scenario)?;
    let shares = truth_state_shares(&logs.truth, scenario.truth.n_states);
    let effects = scenario.assessment_effects.clone().unwrap_or_default();
    let assessments = Assessments::from_rows(sample_assessments(&shares, &effects, seed))?;

    let labeled = label_attempts(&order_across(&logs.records)?, &logs.meta)?;
    let across = order(&labeled, SequenceMode::AcrossProblem)?;
    let fit = baum_welch(&symbol_sequences(&across), 3, N_LABELS, &FitConfig::with_seed(seed))?;
    let paths = decode_sequences(&fit.params, &across)?;

    // the state that emits `incomplete` most often is the reference
    let incomplete = PathwayLabel::ALL.iter().position(|l| l.as_str() == "incomplete").unwrap();
    let reference = (0..3)
        .max_by(|&a, &b| fit.params.emission[a][incomplete].total_cmp(&fit.params.emission[b][incomplete]))
        .unwrap();
    println!("reference state {reference}; fitted emissions:");
    for (s, row) in fit.params.emission.iter().enumerate() {
        let mut top: Vec<(f64, PathwayLabel)> = row.iter().copied().zip(PathwayLabel::ALL).collect();
        top.sort_by(|a, b| b.0.total_cmp(&a.0));
        let names: Vec<String> = top[..3].iter().map(|(p, l)| format!("{l} {p:.2}")).collect();
        println!("  state {s}: {}", names.join(", "));
    }

    let features = build_features(&paths, &across, &assessments, reference, 3)?;
    let outcomes = [OutcomeVar::PostMath, OutcomeVar::StateTest7];
    print_results(&run_model_suite(&features, Suite::HmmStates, &outcomes, BhScope::PerModel)?);
    print_results(&run_model_suite(&features, Suite::ReplayTiming, &outcomes, BhScope::PerModel)?);
    Ok(())
}
