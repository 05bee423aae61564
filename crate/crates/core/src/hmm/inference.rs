//! Forward-backward and Viterbi in the log domain.
//!
//! Each recursion step shifts by the running maximum and sums in probability
//! space, so a step costs O(S) exponentials rather than O(S^2). When the
//! shifted sum underflows, the cell is recomputed with a full log-sum-exp.

use crate::error::{Error, Result};

use super::params::{HmmParams, LogParams};

pub(crate) fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

const UNDERFLOW: f64 = 1e-280;

/// Log forward variables, row-major `T x S`, and the sequence log-likelihood.
pub(crate) fn forward(lp: &LogParams, seq: &[usize], alpha: &mut Vec<f64>, scratch: &mut Vec<f64>) -> f64 {
    let s = lp.s;
    let t_len = seq.len();
    alpha.clear();
    alpha.resize(t_len * s, f64::NEG_INFINITY);
    scratch.clear();
    scratch.resize(s, 0.0);
    for j in 0..s {
        alpha[j] = lp.log_pi[j] + lp.log_b(j, seq[0]);
    }
    for t in 1..t_len {
        let (prev, cur) = alpha.split_at_mut(t * s);
        let prev = &prev[(t - 1) * s..];
        let cur = &mut cur[..s];
        let m = prev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        for (e, &a) in scratch.iter_mut().zip(prev) {
            *e = (a - m).exp();
        }
        let o = seq[t];
        for j in 0..s {
            let mut acc = 0.0;
            for i in 0..s {
                acc += scratch[i] * lp.trans[i * s + j];
            }
            let lb = lp.log_b(j, o);
            cur[j] = if acc > UNDERFLOW {
                m + acc.ln() + lb
            } else {
                log_sum_exp((0..s).map(|i| prev[i] + lp.log_trans[i * s + j])) + lb
            };
        }
    }
    log_sum_exp(alpha[(t_len - 1) * s..].iter().copied())
}

/// Log backward variables, row-major `T x S`.
pub(crate) fn backward(lp: &LogParams, seq: &[usize], beta: &mut Vec<f64>, scratch: &mut Vec<f64>) {
    let s = lp.s;
    let t_len = seq.len();
    beta.clear();
    beta.resize(t_len * s, 0.0);
    scratch.clear();
    scratch.resize(s, 0.0);
    let mut v = vec![0.0; s];
    for t in (0..t_len.saturating_sub(1)).rev() {
        let (cur, next) = beta.split_at_mut((t + 1) * s);
        let cur = &mut cur[t * s..];
        let next = &next[..s];
        let o = seq[t + 1];
        let mut m = f64::NEG_INFINITY;
        for j in 0..s {
            scratch[j] = lp.log_b(j, o) + next[j];
            m = m.max(scratch[j]);
        }
        if m == f64::NEG_INFINITY {
            cur.iter_mut().for_each(|b| *b = f64::NEG_INFINITY);
            continue;
        }
        for (e, &x) in v.iter_mut().zip(scratch.iter()) {
            *e = (x - m).exp();
        }
        for i in 0..s {
            let mut acc = 0.0;
            for j in 0..s {
                acc += lp.trans[i * s + j] * v[j];
            }
            cur[i] = if acc > UNDERFLOW {
                m + acc.ln()
            } else {
                log_sum_exp((0..s).map(|j| lp.log_trans[i * s + j] + scratch[j]))
            };
        }
    }
}

/// ln P(seq | params). Impossible sequences return negative infinity.
pub fn forward_loglik(params: &HmmParams, seq: &[usize]) -> Result<f64> {
    params.check_symbols(seq)?;
    let lp = LogParams::new(params);
    let (mut alpha, mut scratch) = (Vec::new(), Vec::new());
    Ok(forward(&lp, seq, &mut alpha, &mut scratch))
}

/// Per-position state posteriors P(state_t = i | seq), `T` rows of `S`.
pub fn posteriors(params: &HmmParams, seq: &[usize]) -> Result<Vec<Vec<f64>>> {
    params.check_symbols(seq)?;
    let lp = LogParams::new(params);
    let (mut alpha, mut beta, mut scratch) = (Vec::new(), Vec::new(), Vec::new());
    let ll = forward(&lp, seq, &mut alpha, &mut scratch);
    if ll == f64::NEG_INFINITY {
        return Err(Error::ImpossibleSequence);
    }
    backward(&lp, seq, &mut beta, &mut scratch);
    let s = lp.s;
    Ok((0..seq.len())
        .map(|t| (0..s).map(|i| (alpha[t * s + i] + beta[t * s + i] - ll).exp()).collect())
        .collect())
}

/// Log scores closer than this (relative) count as tied, so paths that are
/// equally likely in exact arithmetic are not split by rounding.
const TIE_TOL: f64 = 1e-12;

fn beats(candidate: f64, best: f64) -> bool {
    if best == f64::NEG_INFINITY {
        candidate > best
    } else {
        candidate > best + TIE_TOL * best.abs().max(1.0)
    }
}

/// Most probable state path. Ties go to the lower state index, both for the
/// final state and for every back-pointer.
pub fn viterbi(params: &HmmParams, seq: &[usize]) -> Result<Vec<usize>> {
    params.check_symbols(seq)?;
    let lp = LogParams::new(params);
    let s = lp.s;
    let t_len = seq.len();
    let mut delta: Vec<f64> = (0..s).map(|j| lp.log_pi[j] + lp.log_b(j, seq[0])).collect();
    let mut next = vec![0.0; s];
    let mut back = vec![0usize; t_len * s];
    for t in 1..t_len {
        for j in 0..s {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for i in 0..s {
                let v = delta[i] + lp.log_trans[i * s + j];
                if beats(v, best) {
                    best = v;
                    arg = i;
                }
            }
            next[j] = best + lp.log_b(j, seq[t]);
            back[t * s + j] = arg;
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let mut last = 0;
    for j in 1..s {
        if beats(delta[j], delta[last]) {
            last = j;
        }
    }
    if delta[last] == f64::NEG_INFINITY {
        return Err(Error::ImpossibleSequence);
    }
    let mut path = vec![0; t_len];
    path[t_len - 1] = last;
    for t in (1..t_len).rev() {
        path[t - 1] = back[t * s + path[t]];
    }
    Ok(path)
}

/// Per-position argmax of the posteriors (lower index on ties).
pub fn posterior_decode(params: &HmmParams, seq: &[usize]) -> Result<Vec<usize>> {
    Ok(posteriors(params, seq)?
        .into_iter()
        .map(|row| {
            let mut arg = 0;
            for (i, &p) in row.iter().enumerate() {
                if p > row[arg] {
                    arg = i;
                }
            }
            arg
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn degenerate() -> HmmParams {
        HmmParams::new(
            vec![0.5, 0.5],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn degenerate_forward() {
        let p = degenerate();
        assert!((forward_loglik(&p, &[0, 0]).unwrap() - 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(forward_loglik(&p, &[0, 1]).unwrap(), f64::NEG_INFINITY);
        assert!(matches!(forward_loglik(&p, &[2]), Err(Error::SymbolOutOfRange { symbol: 2, .. })));
        assert!(forward_loglik(&p, &[]).is_err());
    }

    #[test]
    fn degenerate_viterbi() {
        let p = degenerate();
        assert_eq!(viterbi(&p, &[0, 0]).unwrap(), vec![0, 0]);
        assert_eq!(viterbi(&p, &[1, 1, 1]).unwrap(), vec![1, 1, 1]);
        assert!(matches!(viterbi(&p, &[0, 1]), Err(Error::ImpossibleSequence)));
    }

    #[test]
    fn symmetric_tie_goes_low() {
        let p = HmmParams::new(
            vec![1.0 / 3.0; 3],
            vec![vec![1.0 / 3.0; 3]; 3],
            vec![vec![0.5, 0.5]; 3],
        )
        .unwrap();
        assert_eq!(viterbi(&p, &[0, 1, 1, 0]).unwrap(), vec![0, 0, 0, 0]);
        assert_eq!(posterior_decode(&p, &[0, 1]).unwrap(), vec![0, 0]);
    }

    #[test]
    fn underflow_fallback_keeps_finite_likelihood() {
        // state 1 is reachable only from itself, with a tiny prior, while
        // state 0 dominates the early prefix by hundreds of nats.
        let p = HmmParams::new(
            vec![1.0 - 1e-300, 1e-300],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.999, 0.001, 0.0], vec![0.001, 0.0, 0.999]],
        )
        .unwrap();
        let mut seq = vec![0; 200];
        seq.push(2);
        let ll = forward_loglik(&p, &seq).unwrap();
        let expected = 1e-300f64.ln() + 200.0 * 0.001f64.ln() + 0.999f64.ln();
        assert!((ll - expected).abs() < 1e-9 * expected.abs(), "{ll} vs {expected}");
    }
}
