//! State-count selection by K-fold cross-validated, held-out BIC.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::fit::{baum_welch, corpus_loglik, FitConfig};
use super::params::HmmParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldDetail {
    pub n_states: usize,
    pub fold: usize,
    pub train_loglik: f64,
    pub heldout_loglik: f64,
    /// Free parameters of the fitted model.
    pub k: usize,
    pub n_heldout: usize,
    pub bic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSelectionReport {
    /// Mean held-out BIC per candidate state count.
    pub candidates: BTreeMap<usize, f64>,
    pub chosen_states: usize,
    pub folds: usize,
    pub seed: u64,
    pub detail: Vec<FoldDetail>,
}

/// `-2 ll + k ln(n)`.
pub fn bic(loglik: f64, k: usize, n: usize) -> f64 {
    -2.0 * loglik + k as f64 * (n as f64).ln()
}

/// The candidate with the smallest mean BIC; ties resolve to fewer states.
pub fn choose_state_count(candidates: &BTreeMap<usize, f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (&s, &b) in candidates {
        match best {
            Some((_, bb)) if !(b < bb) => {}
            _ => best = Some((s, b)),
        }
    }
    best.map(|(s, _)| s)
}

/// Fold index of every sequence: a seeded shuffle dealt round-robin.
pub fn fold_assignment(n_sequences: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n_sequences).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    order.shuffle(&mut rng);
    let mut assign = vec![0; n_sequences];
    for (pos, &idx) in order.iter().enumerate() {
        assign[idx] = pos % folds;
    }
    assign
}

fn fit_seed(seed: u64, n_states: usize, fold: usize) -> u64 {
    super::mix_seed(seed, &[n_states as u64, fold as u64])
}

/// For every candidate state count, fits on all folds but one and scores
/// the held-out fold by BIC with n = held-out observation count.
pub fn select_states(
    seqs: &[Vec<usize>],
    n_symbols: usize,
    state_range: RangeInclusive<usize>,
    folds: usize,
    config: &FitConfig,
) -> Result<ModelSelectionReport> {
    if folds < 2 {
        return Err(Error::Config("at least two folds are required".into()));
    }
    if seqs.len() < folds {
        return Err(Error::Config(format!(
            "{} sequences cannot be split into {folds} folds",
            seqs.len()
        )));
    }
    if state_range.is_empty() || *state_range.start() == 0 {
        return Err(Error::Config("state range must be non-empty and start at 1 or more".into()));
    }
    let assign = fold_assignment(seqs.len(), folds, config.seed);
    let jobs: Vec<(usize, usize)> = state_range
        .clone()
        .flat_map(|s| (0..folds).map(move |f| (s, f)))
        .collect();
    let detail: Vec<FoldDetail> = jobs
        .par_iter()
        .map(|&(n_states, fold)| {
            let train: Vec<Vec<usize>> = seqs
                .iter()
                .zip(&assign)
                .filter(|(_, &a)| a != fold)
                .map(|(s, _)| s.clone())
                .collect();
            let held: Vec<Vec<usize>> = seqs
                .iter()
                .zip(&assign)
                .filter(|(_, &a)| a == fold)
                .map(|(s, _)| s.clone())
                .collect();
            let cfg = FitConfig {
                seed: fit_seed(config.seed, n_states, fold),
                ..*config
            };
            let fit = baum_welch(&train, n_states, n_symbols, &cfg)?;
            let heldout_loglik = corpus_loglik(&fit.params, &held)?;
            let n_heldout: usize = held.iter().map(Vec::len).sum();
            let k = HmmParams::free_parameters(n_states, n_symbols);
            Ok(FoldDetail {
                n_states,
                fold,
                train_loglik: fit.log_likelihood,
                heldout_loglik,
                k,
                n_heldout,
                bic: bic(heldout_loglik, k, n_heldout),
            })
        })
        .collect::<Result<_>>()?;
    let mut candidates = BTreeMap::new();
    for s in state_range {
        let bics: Vec<f64> = detail.iter().filter(|d| d.n_states == s).map(|d| d.bic).collect();
        candidates.insert(s, bics.iter().sum::<f64>() / bics.len() as f64);
    }
    let chosen_states = choose_state_count(&candidates).expect("non-empty candidate set");
    Ok(ModelSelectionReport {
        candidates,
        chosen_states,
        folds,
        seed: config.seed,
        detail,
    })
}
