use std::collections::BTreeMap;

use pathtrace::ingest::{clean, order_across};
use pathtrace::labeling::label_attempts;
use pathtrace::simulate::{presets, sample_logs, sample_sequences, LengthSpec, SimScenario};

fn frequency_error(counts: &[Vec<f64>], truth: &[Vec<f64>]) -> f64 {
    counts
        .iter()
        .zip(truth)
        .flat_map(|(row, t)| {
            let total: f64 = row.iter().sum();
            row.iter().zip(t).map(move |(c, p)| (c / total - p).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn hidden_paths_follow_the_planted_chain() {
    let sc = SimScenario {
        n_students: 2_000,
        length: LengthSpec::Fixed(51),
        ..presets::planted_symbol_scenario(21)
    };
    let seqs = sample_sequences(&sc).unwrap();
    let (s, m) = (sc.truth.n_states, sc.truth.n_symbols);
    let mut trans = vec![vec![0.0; s]; s];
    let mut emit = vec![vec![0.0; m]; s];
    let mut first = vec![0.0; s];
    for seq in &seqs {
        first[seq.states[0]] += 1.0;
        for w in seq.states.windows(2) {
            trans[w[0]][w[1]] += 1.0;
        }
        for (&st, &sym) in seq.states.iter().zip(&seq.symbols) {
            emit[st][sym] += 1.0;
        }
    }
    let n_trans: f64 = trans.iter().flatten().sum();
    assert!(n_trans >= 1e5);
    assert!(frequency_error(&trans, &sc.truth.transition) < 0.02);
    assert!(frequency_error(&emit, &sc.truth.emission) < 0.02);
    assert!(frequency_error(&[first], std::slice::from_ref(&sc.truth.pi)) < 0.05);
}

#[test]
fn sampling_is_reproducible_per_seed() {
    let sc = presets::planted_label_scenario(30, LengthSpec::Uniform { min: 3, max: 40 }, 9);
    let a = sample_logs(&sc).unwrap();
    let b = sample_logs(&sc).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.truth, b.truth);
    let c = sample_logs(&SimScenario { seed: 10, ..sc }).unwrap();
    assert_ne!(a.records, c.records);
}

#[test]
fn relabeling_synthetic_logs_reproduces_every_label() {
    let sc = presets::planted_label_scenario(250, LengthSpec::Fixed(50), 17);
    let logs = sample_logs(&sc).unwrap();
    assert!(logs.records.len() >= 10_000);
    let (kept, report) = clean(&logs.records);
    assert_eq!(report.retained, logs.records.len(), "cleaning must not remove synthetic rows");
    let labeled = label_attempts(&order_across(&kept).unwrap(), &logs.meta).unwrap();
    let truth: BTreeMap<_, _> = logs
        .truth
        .iter()
        .map(|t| ((t.student_id.as_str(), t.problem_id.as_str(), t.attempt_index), t))
        .collect();
    assert_eq!(truth.len(), labeled.len());
    let mut mismatches = 0;
    for a in &labeled {
        let r = &a.record;
        let t = truth[&(r.student_id.as_str(), r.problem_id.as_str(), r.attempt_index)];
        if t.label != a.label.as_str() {
            mismatches += 1;
        }
        // rows without a hidden state are always repairs
        assert!(t.state.is_some() || t.repaired);
    }
    assert_eq!(mismatches, 0);
    let sampled = logs.truth.iter().filter(|t| t.state.is_some()).count();
    assert_eq!(sampled, 250 * 50);
}
