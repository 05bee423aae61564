mod common;

use common::*;
use pathtrace::hmm::{
    baum_welch, corpus_loglik, fit_from, forward_loglik, posterior_decode, posteriors, random_init, restart_rng,
    select_states, viterbi, FitConfig, HmmParams, ModelFile,
};
use pathtrace::ingest::SequenceMode;
use pathtrace::simulate::{presets, sample_sequences, LengthSpec, SimScenario};
use rand::Rng;

fn random_obs(rng: &mut impl Rng, m: usize, t: usize) -> Vec<usize> {
    (0..t).map(|_| rng.gen_range(0..m)).collect()
}

#[test]
fn forward_matches_path_enumeration() {
    let mut rng = rng(101);
    for s in 1..=3 {
        for m in 2..=4 {
            for t in 1..=6 {
                let p = random_model(&mut rng, s, m);
                let obs = random_obs(&mut rng, m, t);
                let expected = brute_force_likelihood(&p, &obs).ln();
                let got = forward_loglik(&p, &obs).unwrap();
                assert!(((got - expected) / expected).abs() <= 1e-9, "S={s} M={m} T={t}: {got} vs {expected}");
            }
        }
    }
}

#[test]
fn viterbi_matches_path_enumeration() {
    let mut rng = rng(202);
    for trial in 0..200 {
        let (s, m, t) = (1 + trial % 3, 2 + trial % 3, 1 + trial % 6);
        let p = random_model(&mut rng, s, m);
        let obs = random_obs(&mut rng, m, t);
        assert_eq!(viterbi(&p, &obs).unwrap(), brute_force_viterbi(&p, &obs), "trial {trial}");
    }
}

#[test]
fn viterbi_ties_follow_enumeration_order() {
    // uniform model: every path ties
    let p = HmmParams::new(vec![0.5, 0.5], vec![vec![0.5, 0.5]; 2], vec![vec![0.5, 0.5]; 2]).unwrap();
    for obs in [vec![0], vec![1, 0, 1], vec![0, 0, 0, 1]] {
        assert_eq!(viterbi(&p, &obs).unwrap(), brute_force_viterbi(&p, &obs));
    }
}

#[test]
fn posteriors_match_enumeration_and_normalize() {
    let mut rng = rng(303);
    for _ in 0..60 {
        let (s, m, t) = (rng.gen_range(1..=3), rng.gen_range(2..=4), rng.gen_range(1..=6));
        let p = random_model(&mut rng, s, m);
        let obs = random_obs(&mut rng, m, t);
        let got = posteriors(&p, &obs).unwrap();
        let expected = brute_force_posteriors(&p, &obs);
        for (row, exp) in got.iter().zip(&expected) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
            for (a, b) in row.iter().zip(exp) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        let decoded = posterior_decode(&p, &obs).unwrap();
        for (t, &st) in decoded.iter().enumerate() {
            assert!(expected[t].iter().all(|&x| x <= expected[t][st] + 1e-12));
        }
    }
}

#[test]
fn long_sequences_do_not_underflow() {
    let p = presets::planted_symbol_model();
    let obs: Vec<usize> = (0..20_000).map(|t| (t * 7) % 5).collect();
    let ll = forward_loglik(&p, &obs).unwrap();
    assert!(ll.is_finite() && ll < -10_000.0);
    let post = posteriors(&p, &obs).unwrap();
    assert!((post[19_999].iter().sum::<f64>() - 1.0).abs() < 1e-10);
    assert_eq!(viterbi(&p, &obs).unwrap().len(), 20_000);
}

fn small_corpus(seed: u64) -> Vec<Vec<usize>> {
    let truth = random_model(&mut rng(seed), 3, 4);
    let sc = SimScenario {
        truth,
        n_students: 40,
        length: LengthSpec::Uniform { min: 5, max: 30 },
        seed,
        logs: None,
        assessment_effects: None,
    };
    sample_sequences(&sc).unwrap().into_iter().map(|s| s.symbols).collect()
}

#[test]
fn em_log_likelihood_never_decreases() {
    for seed in 0..10 {
        let seqs = small_corpus(seed);
        let cfg = FitConfig {
            n_restarts: 1,
            max_iter: 200,
            tol: 0.0,
            ..FitConfig::with_seed(seed)
        };
        let fit = baum_welch(&seqs, 3, 4, &cfg).unwrap();
        for w in fit.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8, "seed {seed}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn relabeled_initializer_gives_relabeled_fit() {
    let seqs = small_corpus(7);
    let cfg = FitConfig {
        n_restarts: 1,
        max_iter: 60,
        ..FitConfig::with_seed(7)
    };
    let init = random_init(3, 4, &mut restart_rng(7, 0));
    let perm = [2, 0, 1];
    let a = fit_from(init.clone(), &seqs, &cfg).unwrap();
    let b = fit_from(init.permuted(&perm), &seqs, &cfg).unwrap();
    assert_eq!(a.iterations, b.iterations);
    assert!((a.log_likelihood - b.log_likelihood).abs() <= 1e-8 * a.log_likelihood.abs());
    let expected = a.params.permuted(&perm);
    for (x, y) in expected
        .emission
        .iter()
        .flatten()
        .chain(expected.transition.iter().flatten())
        .zip(b.params.emission.iter().flatten().chain(b.params.transition.iter().flatten()))
    {
        assert!((x - y).abs() < 1e-8);
    }
}

#[test]
fn fitted_rows_are_stochastic_and_floored() {
    let seqs = small_corpus(3);
    let fit = baum_welch(&seqs, 4, 4, &FitConfig::with_seed(3)).unwrap();
    fit.params.validate().unwrap();
    for row in std::iter::once(&fit.params.pi).chain(&fit.params.transition).chain(&fit.params.emission) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(row.iter().all(|&x| x >= 1e-10));
    }
    let ll = corpus_loglik(&fit.params, &seqs).unwrap();
    assert_eq!(ll, fit.log_likelihood);
}

#[test]
fn fit_is_deterministic_across_thread_counts() {
    let seqs = small_corpus(11);
    let cfg = FitConfig::with_seed(11);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| baum_welch(&seqs, 3, 4, &cfg).unwrap())
    };
    let one = run(1);
    let many = run(8);
    assert_eq!(one, many);
    let decode = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| seqs.iter().map(|s| viterbi(&one.params, s).unwrap()).collect::<Vec<_>>())
    };
    assert_eq!(decode(1), decode(8));
}

#[test]
fn selection_prefers_planted_count_on_small_corpus() {
    let truth = presets::planted_symbol_model();
    let sc = SimScenario {
        truth,
        n_students: 150,
        length: LengthSpec::Fixed(40),
        seed: 5,
        logs: None,
        assessment_effects: None,
    };
    let seqs: Vec<Vec<usize>> = sample_sequences(&sc).unwrap().into_iter().map(|s| s.symbols).collect();
    let cfg = FitConfig {
        n_restarts: 2,
        ..FitConfig::with_seed(5)
    };
    let report = select_states(&seqs, 5, 1..=4, 3, &cfg).unwrap();
    assert_eq!(report.chosen_states, 3);
    assert_eq!(report.detail.len(), 4 * 3);
    let held_out: usize = report.detail.iter().filter(|d| d.n_states == 1).map(|d| d.n_heldout).sum();
    assert_eq!(held_out, 150 * 40);
}

#[test]
fn model_file_round_trip() {
    let seqs = small_corpus(4);
    let mut seqs12 = seqs.clone();
    seqs12.push(vec![11]);
    let fit = baum_welch(&seqs12, 2, 12, &FitConfig { n_restarts: 1, ..FitConfig::with_seed(4) }).unwrap();
    let file = ModelFile::from_fit(&fit, SequenceMode::AcrossProblem);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    std::fs::write(&path, file.to_json().unwrap()).unwrap();
    let back = ModelFile::load(&path).unwrap();
    assert_eq!(back, file);
    assert_eq!(back.params().unwrap(), fit.params);
}

