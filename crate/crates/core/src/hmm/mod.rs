//! Categorical-emission hidden Markov models over pathway labels.

mod fit;
mod inference;
mod params;
mod select;
mod summary;

pub use fit::{baum_welch, corpus_loglik, fit_from, random_init, restart_rng, FitConfig, FitReport};
pub use inference::{forward_loglik, posterior_decode, posteriors, viterbi};
pub use params::HmmParams;
pub use select::{bic, choose_state_count, fold_assignment, select_states, FoldDetail, ModelSelectionReport};
pub use summary::{
    decode_sequences, join_paths, load_paths, load_paths_from_reader, paths_csv, run_lengths, state_percentages, state_summaries,
    summary_csv, symbol_sequences, DecodedTrajectory, ModelFile, PathRow, StateSummary,
};

/// SplitMix64-style mixing of a base seed with extra words, used to derive
/// independent sub-seeds.
pub(crate) fn mix_seed(seed: u64, words: &[u64]) -> u64 {
    let mut z = seed;
    for &w in words {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(w);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}
