use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Categorical-emission HMM parameters in probability space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmParams {
    pub n_states: usize,
    pub n_symbols: usize,
    /// Initial state distribution.
    pub pi: Vec<f64>,
    /// `transition[i][j]` = P(next = j | current = i).
    pub transition: Vec<Vec<f64>>,
    /// `emission[i][k]` = P(symbol k | state i).
    pub emission: Vec<Vec<f64>>,
}

const ROW_TOL: f64 = 1e-6;

fn check_row(name: &str, row: &[f64], len: usize) -> Result<()> {
    if row.len() != len {
        return Err(Error::InvalidParams(format!("{name} has length {} (expected {len})", row.len())));
    }
    if row.iter().any(|&p| !(0.0..=1.0).contains(&p) || p.is_nan()) {
        return Err(Error::InvalidParams(format!("{name} has an entry outside [0, 1]")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_TOL {
        return Err(Error::InvalidParams(format!("{name} sums to {sum}")));
    }
    Ok(())
}

impl HmmParams {
    pub fn new(pi: Vec<f64>, transition: Vec<Vec<f64>>, emission: Vec<Vec<f64>>) -> Result<Self> {
        let n_states = pi.len();
        if n_states == 0 {
            return Err(Error::InvalidParams("at least one hidden state is required".into()));
        }
        let n_symbols = emission.first().map_or(0, Vec::len);
        if n_symbols == 0 {
            return Err(Error::InvalidParams("at least one symbol is required".into()));
        }
        let p = Self {
            n_states,
            n_symbols,
            pi,
            transition,
            emission,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_row("pi", &self.pi, self.n_states)?;
        if self.transition.len() != self.n_states || self.emission.len() != self.n_states {
            return Err(Error::InvalidParams("matrix row count differs from n_states".into()));
        }
        for (i, row) in self.transition.iter().enumerate() {
            check_row(&format!("transition row {i}"), row, self.n_states)?;
        }
        for (i, row) in self.emission.iter().enumerate() {
            check_row(&format!("emission row {i}"), row, self.n_symbols)?;
        }
        Ok(())
    }

    /// Number of free parameters: (S-1) + S(S-1) + S(M-1).
    pub fn free_parameters(n_states: usize, n_symbols: usize) -> usize {
        let s = n_states;
        (s - 1) + s * (s - 1) + s * (n_symbols - 1)
    }

    /// Relabels hidden states: new state `k` is old state `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> HmmParams {
        HmmParams {
            n_states: self.n_states,
            n_symbols: self.n_symbols,
            pi: perm.iter().map(|&i| self.pi[i]).collect(),
            transition: perm
                .iter()
                .map(|&i| perm.iter().map(|&j| self.transition[i][j]).collect())
                .collect(),
            emission: perm.iter().map(|&i| self.emission[i].clone()).collect(),
        }
    }

    /// Mixes every row with the uniform floor so each entry is at least
    /// `floor` and each row still sums to one.
    pub fn floored(&self, floor: f64) -> HmmParams {
        let fix = |row: &[f64]| -> Vec<f64> {
            let n = row.len() as f64;
            let f = floor.min(1.0 / n);
            let sum: f64 = row.iter().sum();
            row.iter().map(|&p| f + (1.0 - n * f) * p / sum).collect()
        };
        HmmParams {
            n_states: self.n_states,
            n_symbols: self.n_symbols,
            pi: fix(&self.pi),
            transition: self.transition.iter().map(|r| fix(r)).collect(),
            emission: self.emission.iter().map(|r| fix(r)).collect(),
        }
    }

    /// Stationary distribution of the transition matrix by power iteration.
    pub fn stationary(&self) -> Vec<f64> {
        let s = self.n_states;
        let mut v = vec![1.0 / s as f64; s];
        for _ in 0..100_000 {
            let mut next = vec![0.0; s];
            for i in 0..s {
                for j in 0..s {
                    next[j] += v[i] * self.transition[i][j];
                }
            }
            let diff: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
            v = next;
            if diff < 1e-15 {
                break;
            }
        }
        v
    }

    pub(crate) fn check_symbols(&self, seq: &[usize]) -> Result<()> {
        if seq.is_empty() {
            return Err(Error::Empty("observation sequence".into()));
        }
        if let Some(&bad) = seq.iter().find(|&&o| o >= self.n_symbols) {
            return Err(Error::SymbolOutOfRange {
                symbol: bad,
                n_symbols: self.n_symbols,
            });
        }
        Ok(())
    }
}

/// Log-domain copy of [`HmmParams`] with flat row-major matrices, plus the
/// probability-space copies used by the shifted and scaled recursions.
#[derive(Debug, Clone)]
pub(crate) struct LogParams {
    pub s: usize,
    pub m: usize,
    pub pi: Vec<f64>,
    pub log_pi: Vec<f64>,
    pub trans: Vec<f64>,
    pub log_trans: Vec<f64>,
    pub log_emit: Vec<f64>,
    /// Emission probabilities, symbol-major (`M x S`).
    pub emit_by_symbol: Vec<f64>,
}

impl LogParams {
    pub fn new(p: &HmmParams) -> Self {
        let s = p.n_states;
        let m = p.n_symbols;
        let trans: Vec<f64> = p.transition.iter().flatten().copied().collect();
        let mut emit_by_symbol = vec![0.0; m * s];
        for (i, row) in p.emission.iter().enumerate() {
            for (o, &b) in row.iter().enumerate() {
                emit_by_symbol[o * s + i] = b;
            }
        }
        Self {
            s,
            m,
            pi: p.pi.clone(),
            log_pi: p.pi.iter().map(|x| x.ln()).collect(),
            log_trans: trans.iter().map(|x| x.ln()).collect(),
            trans,
            log_emit: p.emission.iter().flatten().map(|x| x.ln()).collect(),
            emit_by_symbol,
        }
    }

    #[inline]
    pub fn b_column(&self, symbol: usize) -> &[f64] {
        &self.emit_by_symbol[symbol * self.s..(symbol + 1) * self.s]
    }

    #[inline]
    pub fn log_b(&self, state: usize, symbol: usize) -> f64 {
        self.log_emit[state * self.m + symbol]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_rows() {
        assert!(HmmParams::new(vec![0.5, 0.6], vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![1.0], vec![1.0]]).is_err());
        assert!(HmmParams::new(vec![], vec![], vec![]).is_err());
        assert!(HmmParams::new(vec![1.0], vec![vec![1.0]], vec![vec![0.5, 0.5]]).is_ok());
    }

    #[test]
    fn free_parameter_count() {
        assert_eq!(HmmParams::free_parameters(3, 5), 2 + 6 + 12);
        assert_eq!(HmmParams::free_parameters(1, 12), 11);
    }

    #[test]
    fn floor_keeps_rows_stochastic() {
        let p = HmmParams::new(vec![1.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let f = p.floored(1e-10);
        for row in std::iter::once(&f.pi).chain(&f.transition).chain(&f.emission) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&x| x >= 1e-10));
        }
    }

    #[test]
    fn stationary_of_two_state_chain() {
        let p = HmmParams::new(vec![0.5, 0.5], vec![vec![0.9, 0.1], vec![0.3, 0.7]], vec![vec![1.0], vec![1.0]]).unwrap();
        let st = p.stationary();
        assert!((st[0] - 0.75).abs() < 1e-12);
    }
}
