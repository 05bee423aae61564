//! Baum-Welch EM with seeded random restarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::inference::{backward, forward};
use super::params::{HmmParams, LogParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iter: usize,
    /// Stop once the relative log-likelihood improvement drops below this.
    pub tol: f64,
    pub n_restarts: usize,
    pub seed: u64,
    pub prob_floor: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-6,
            n_restarts: 5,
            seed: 0,
            prob_floor: 1e-10,
        }
    }
}

impl FitConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    fn validate(&self, n_symbols: usize, n_states: usize) -> Result<()> {
        if self.n_restarts == 0 {
            return Err(Error::Config("n_restarts must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::Config("tol must be non-negative".into()));
        }
        let widest = n_symbols.max(n_states) as f64;
        if !(0.0..1.0 / widest).contains(&self.prob_floor) {
            return Err(Error::Config(format!(
                "prob_floor {} must lie in [0, 1/{widest})",
                self.prob_floor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Fitted parameters, floored at `prob_floor`.
    pub params: HmmParams,
    /// Corpus log-likelihood of the returned (floored) parameters.
    pub log_likelihood: f64,
    /// Number of M-steps performed.
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
    pub restart_index: usize,
    /// Corpus log-likelihood before the first M-step and after each one.
    pub trace: Vec<f64>,
}

/// Expected sufficient statistics accumulated over a set of sequences.
#[derive(Debug, Clone)]
struct Stats {
    loglik: f64,
    start: Vec<f64>,
    trans: Vec<f64>,
    emit: Vec<f64>,
}

impl Stats {
    fn zeros(s: usize, m: usize) -> Self {
        Self {
            loglik: 0.0,
            start: vec![0.0; s],
            trans: vec![0.0; s * s],
            emit: vec![0.0; s * m],
        }
    }

    fn add(&mut self, other: &Stats) {
        self.loglik += other.loglik;
        for (a, b) in self.start.iter_mut().zip(&other.start) {
            *a += b;
        }
        for (a, b) in self.trans.iter_mut().zip(&other.trans) {
            *a += b;
        }
        for (a, b) in self.emit.iter_mut().zip(&other.emit) {
            *a += b;
        }
    }
}

/// Sequences per work unit. Fixed so that the summation order, and hence the
/// result, does not depend on the number of threads.
const CHUNK: usize = 32;

/// Smallest per-step scale the probability-space recursion accepts before
/// handing the sequence to the log-domain path.
const MIN_SCALE: f64 = 1e-250;

#[derive(Default)]
struct Buffers {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    scale: Vec<f64>,
    scratch: Vec<f64>,
    w: Vec<f64>,
}

/// Scaled forward-backward (each forward row normalized to sum 1). Returns
/// `None`, leaving `st` untouched, when a scale underflows or a backward
/// value overflows.
fn accumulate_scaled(lp: &LogParams, seq: &[usize], buf: &mut Buffers, st: &mut Stats) -> Option<()> {
    let (s, m) = (lp.s, lp.m);
    let t_len = seq.len();
    let Buffers {
        alpha,
        beta,
        scale,
        w,
        ..
    } = buf;
    alpha.clear();
    alpha.resize(t_len * s, 0.0);
    beta.clear();
    beta.resize(t_len * s, 0.0);
    scale.clear();
    w.clear();
    w.resize(s, 0.0);

    let b0 = lp.b_column(seq[0]);
    let mut c = 0.0;
    for i in 0..s {
        alpha[i] = lp.pi[i] * b0[i];
        c += alpha[i];
    }
    if !(c > MIN_SCALE) {
        return None;
    }
    alpha[..s].iter_mut().for_each(|a| *a /= c);
    scale.push(c);
    for t in 1..t_len {
        let (prev, cur) = alpha.split_at_mut(t * s);
        let prev = &prev[(t - 1) * s..];
        let cur = &mut cur[..s];
        cur.iter_mut().for_each(|x| *x = 0.0);
        for (&a, row) in prev.iter().zip(lp.trans.chunks_exact(s)) {
            if a != 0.0 {
                cur.iter_mut().zip(row).for_each(|(c, &r)| *c += a * r);
            }
        }
        let mut c = 0.0;
        for (x, &b) in cur.iter_mut().zip(lp.b_column(seq[t])) {
            *x *= b;
            c += *x;
        }
        if !(c > MIN_SCALE) {
            return None;
        }
        let inv = 1.0 / c;
        cur.iter_mut().for_each(|x| *x *= inv);
        scale.push(c);
    }

    beta[(t_len - 1) * s..].iter_mut().for_each(|x| *x = 1.0);
    for t in (0..t_len - 1).rev() {
        let (cur, next) = beta.split_at_mut((t + 1) * s);
        let cur = &mut cur[t * s..];
        let inv = 1.0 / scale[t + 1];
        for ((w, &b), &n) in w.iter_mut().zip(lp.b_column(seq[t + 1])).zip(next.iter()) {
            *w = b * n * inv;
        }
        for (x, row) in cur.iter_mut().zip(lp.trans.chunks_exact(s)) {
            let acc: f64 = row.iter().zip(w.iter()).map(|(r, w)| r * w).sum();
            if !acc.is_finite() {
                return None;
            }
            *x = acc;
        }
    }

    // ln of the product of scales, flushing before the product can underflow
    let (mut ll, mut prod) = (0.0, 1.0f64);
    for &c in scale.iter() {
        if prod < 1e-40 {
            ll += prod.ln();
            prod = 1.0;
        }
        prod *= c;
    }
    st.loglik += ll + prod.ln();
    for i in 0..s {
        st.start[i] += alpha[i] * beta[i];
    }
    for ((&o, a), b) in seq.iter().zip(alpha.chunks_exact(s)).zip(beta.chunks_exact(s)) {
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            st.emit[i * m + o] += x * y;
        }
    }
    for t in 0..t_len - 1 {
        let inv = 1.0 / scale[t + 1];
        let next = &beta[(t + 1) * s..(t + 2) * s];
        for ((w, &b), &n) in w.iter_mut().zip(lp.b_column(seq[t + 1])).zip(next) {
            *w = b * n * inv;
        }
        let a_row = &alpha[t * s..(t + 1) * s];
        for ((&a, row), out) in a_row.iter().zip(lp.trans.chunks_exact(s)).zip(st.trans.chunks_exact_mut(s)) {
            if a != 0.0 {
                for ((o, &r), &w) in out.iter_mut().zip(row).zip(w.iter()) {
                    *o += a * r * w;
                }
            }
        }
    }
    Some(())
}

/// Log-domain statistics for one sequence, used when scaling fails.
fn accumulate_log(lp: &LogParams, seq: &[usize], buf: &mut Buffers, st: &mut Stats) -> Result<()> {
    let (s, m) = (lp.s, lp.m);
    let Buffers {
        alpha,
        beta,
        scratch,
        w: lv,
        ..
    } = buf;
    let ll = forward(lp, seq, alpha, scratch);
    if ll == f64::NEG_INFINITY {
        return Err(Error::ImpossibleSequence);
    }
    backward(lp, seq, beta, scratch);
    st.loglik += ll;
    lv.clear();
    lv.resize(s, 0.0);
    for (t, &o) in seq.iter().enumerate() {
        for i in 0..s {
            let g = (alpha[t * s + i] + beta[t * s + i] - ll).exp();
            if t == 0 {
                st.start[i] += g;
            }
            st.emit[i * m + o] += g;
        }
    }
    for t in 0..seq.len().saturating_sub(1) {
        let o = seq[t + 1];
        for j in 0..s {
            lv[j] = lp.log_b(j, o) + beta[(t + 1) * s + j];
        }
        for i in 0..s {
            for j in 0..s {
                st.trans[i * s + j] += (alpha[t * s + i] + lp.log_trans[i * s + j] + lv[j] - ll).exp();
            }
        }
    }
    Ok(())
}

fn accumulate(lp: &LogParams, seqs: &[Vec<usize>]) -> Result<Stats> {
    let mut st = Stats::zeros(lp.s, lp.m);
    let mut buf = Buffers::default();
    for seq in seqs {
        if accumulate_scaled(lp, seq, &mut buf, &mut st).is_none() {
            accumulate_log(lp, seq, &mut buf, &mut st)?;
        }
    }
    Ok(st)
}

fn e_step(params: &HmmParams, seqs: &[Vec<usize>]) -> Result<Stats> {
    let lp = LogParams::new(params);
    let parts: Vec<Stats> = seqs
        .par_chunks(CHUNK)
        .map(|chunk| accumulate(&lp, chunk))
        .collect::<Result<_>>()?;
    let mut total = Stats::zeros(lp.s, lp.m);
    for p in &parts {
        total.add(p);
    }
    Ok(total)
}

/// Corpus log-likelihood, summed in the same fixed order as the E-step.
pub fn corpus_loglik(params: &HmmParams, seqs: &[Vec<usize>]) -> Result<f64> {
    for seq in seqs {
        params.check_symbols(seq)?;
    }
    let lp = LogParams::new(params);
    let parts: Vec<f64> = seqs
        .par_chunks(CHUNK)
        .map(|chunk| {
            let (mut alpha, mut scratch) = (Vec::new(), Vec::new());
            chunk.iter().map(|s| forward(&lp, s, &mut alpha, &mut scratch)).sum()
        })
        .collect();
    Ok(parts.into_iter().sum())
}

fn normalize_into(counts: &[f64], old: &[f64]) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    if total > 0.0 && total.is_finite() {
        counts.iter().map(|c| c / total).collect()
    } else {
        old.to_vec()
    }
}

fn m_step(st: &Stats, old: &HmmParams) -> HmmParams {
    let (s, m) = (old.n_states, old.n_symbols);
    HmmParams {
        n_states: s,
        n_symbols: m,
        pi: normalize_into(&st.start, &old.pi),
        transition: (0..s)
            .map(|i| normalize_into(&st.trans[i * s..(i + 1) * s], &old.transition[i]))
            .collect(),
        emission: (0..s)
            .map(|i| normalize_into(&st.emit[i * m..(i + 1) * m], &old.emission[i]))
            .collect(),
    }
}

fn validate_corpus(seqs: &[Vec<usize>], n_states: usize, n_symbols: usize) -> Result<()> {
    if n_states == 0 {
        return Err(Error::InvalidParams("number of states must be at least 1".into()));
    }
    if n_symbols == 0 {
        return Err(Error::InvalidParams("number of symbols must be at least 1".into()));
    }
    if seqs.is_empty() {
        return Err(Error::Empty("training corpus".into()));
    }
    for seq in seqs {
        if seq.is_empty() {
            return Err(Error::Empty("training sequence".into()));
        }
        if let Some(&bad) = seq.iter().find(|&&o| o >= n_symbols) {
            return Err(Error::SymbolOutOfRange { symbol: bad, n_symbols });
        }
    }
    Ok(())
}

fn dirichlet_row(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1) + f64::MIN_POSITIVE).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / total).collect()
}

/// Random initial parameters with every row drawn from Dirichlet(1).
pub fn random_init(n_states: usize, n_symbols: usize, rng: &mut impl Rng) -> HmmParams {
    HmmParams {
        n_states,
        n_symbols,
        pi: dirichlet_row(rng, n_states),
        transition: (0..n_states).map(|_| dirichlet_row(rng, n_states)).collect(),
        emission: (0..n_states).map(|_| dirichlet_row(rng, n_symbols)).collect(),
    }
}

/// The generator used for restart `restart` of a fit seeded with `seed`.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Runs EM from the given starting point.
pub fn fit_from(init: HmmParams, seqs: &[Vec<usize>], config: &FitConfig) -> Result<FitReport> {
    init.validate()?;
    validate_corpus(seqs, init.n_states, init.n_symbols)?;
    config.validate(init.n_symbols, init.n_states)?;
    run_em(init, seqs, config, 0)
}

fn run_em(init: HmmParams, seqs: &[Vec<usize>], config: &FitConfig, restart_index: usize) -> Result<FitReport> {
    let mut params = init;
    let mut stats = e_step(&params, seqs)?;
    let mut trace = vec![stats.loglik];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iter {
        params = m_step(&stats, &params);
        iterations += 1;
        let next = e_step(&params, seqs)?;
        trace.push(next.loglik);
        let improvement = (next.loglik - stats.loglik) / stats.loglik.abs().max(f64::MIN_POSITIVE);
        stats = next;
        if improvement < config.tol {
            converged = true;
            break;
        }
    }
    let params = params.floored(config.prob_floor);
    let log_likelihood = corpus_loglik(&params, seqs)?;
    Ok(FitReport {
        params,
        log_likelihood,
        iterations,
        converged,
        seed: config.seed,
        restart_index,
        trace,
    })
}

/// Fits an `n_states`-state model over `n_symbols` symbols, keeping the
/// restart with the highest final log-likelihood (lowest index on ties).
pub fn baum_welch(
    seqs: &[Vec<usize>],
    n_states: usize,
    n_symbols: usize,
    config: &FitConfig,
) -> Result<FitReport> {
    validate_corpus(seqs, n_states, n_symbols)?;
    config.validate(n_symbols, n_states)?;
    let runs: Vec<FitReport> = (0..config.n_restarts)
        .into_par_iter()
        .map(|r| {
            let init = random_init(n_states, n_symbols, &mut restart_rng(config.seed, r));
            run_em(init, seqs, config, r)
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.log_likelihood > runs[best].log_likelihood {
            best = i;
        }
    }
    Ok(runs.into_iter().nth(best).expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaled_and_log_statistics_agree() {
        let mut rng = restart_rng(9, 0);
        for s in 1..=4 {
            let p = random_init(s, 3, &mut rng);
            let lp = LogParams::new(&p);
            let seq: Vec<usize> = (0..40).map(|t| (t * 7 + s) % 3).collect();
            let mut buf = Buffers::default();
            let (mut a, mut b) = (Stats::zeros(s, 3), Stats::zeros(s, 3));
            accumulate_scaled(&lp, &seq, &mut buf, &mut a).unwrap();
            accumulate_log(&lp, &seq, &mut buf, &mut b).unwrap();
            assert!((a.loglik - b.loglik).abs() < 1e-10 * b.loglik.abs());
            for (x, y) in a.start.iter().chain(&a.trans).chain(&a.emit).zip(b.start.iter().chain(&b.trans).chain(&b.emit)) {
                assert!((x - y).abs() < 1e-9 * (1.0 + y.abs()), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn underflowing_scale_falls_back() {
        // emissions far below the scaling threshold force the log path
        let p = HmmParams::new(vec![1.0, 0.0], vec![vec![0.5, 0.5], vec![0.5, 0.5]], vec![vec![1.0 - 1e-300, 1e-300], vec![1.0, 0.0]]).unwrap();
        let lp = LogParams::new(&p);
        let mut buf = Buffers::default();
        let mut st = Stats::zeros(2, 2);
        assert!(accumulate_scaled(&lp, &[1, 0], &mut buf, &mut st).is_none());
        assert_eq!(st.loglik, 0.0);
        let st = accumulate(&lp, &[vec![1, 0]]).unwrap();
        let expected = super::super::forward_loglik(&p, &[1, 0]).unwrap();
        assert!((st.loglik - expected).abs() < 1e-9 * expected.abs());
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let cfg = FitConfig::default();
        assert!(matches!(baum_welch(&[], 2, 3, &cfg), Err(Error::Empty(_))));
        assert!(baum_welch(&[vec![0]], 0, 3, &cfg).is_err());
        assert!(baum_welch(&[vec![]], 1, 3, &cfg).is_err());
        assert!(matches!(baum_welch(&[vec![3]], 1, 3, &cfg), Err(Error::SymbolOutOfRange { .. })));
        let bad = FitConfig { n_restarts: 0, ..cfg };
        assert!(baum_welch(&[vec![0]], 1, 3, &bad).is_err());
    }

    #[test]
    fn single_symbol_single_state() {
        let seqs = vec![vec![2; 10]; 5];
        let fit = baum_welch(&seqs, 1, 4, &FitConfig::with_seed(3)).unwrap();
        let b = &fit.params.emission[0];
        assert!((b[2] - (1.0 - 3e-10)).abs() < 1e-15);
        assert!(b.iter().enumerate().all(|(k, &p)| k == 2 || (p - 1e-10).abs() < 1e-20));
        // 50 observations at ln(1 - 3e-10) each
        assert!(fit.log_likelihood < 0.0);
        assert!((fit.log_likelihood - 50.0 * (1.0 - 3e-10f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn infinite_tolerance_stops_after_one_iteration() {
        let seqs = vec![vec![0, 1, 2, 1, 0], vec![2, 2, 1]];
        let cfg = FitConfig {
            tol: f64::INFINITY,
            ..FitConfig::with_seed(1)
        };
        let fit = baum_welch(&seqs, 2, 3, &cfg).unwrap();
        assert_eq!(fit.iterations, 1);
        assert!(fit.converged);
        assert_eq!(fit.trace.len(), 2);
    }

    #[test]
    fn max_iter_cap_is_reported_unconverged() {
        let seqs = vec![vec![0, 1, 2, 1, 0, 0, 2, 1, 1, 0]; 4];
        let cfg = FitConfig {
            max_iter: 2,
            tol: 0.0,
            ..FitConfig::with_seed(9)
        };
        let fit = baum_welch(&seqs, 3, 3, &cfg).unwrap();
        assert_eq!(fit.iterations, 2);
        assert!(!fit.converged);
    }

    #[test]
    fn rows_are_stochastic_and_floored() {
        let seqs = vec![vec![0, 0, 1, 3, 3, 3, 1, 0], vec![3, 3, 3, 0]];
        let fit = baum_welch(&seqs, 3, 4, &FitConfig::with_seed(5)).unwrap();
        let p = &fit.params;
        for row in std::iter::once(&p.pi).chain(&p.transition).chain(&p.emission) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&x| x >= 1e-10 * (1.0 - 1e-12)));
        }
    }
}
