//! Decoding labeled sequences and summarizing the decoded states.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{order, OrderedSequences, SequenceKey, SequenceMode};
use crate::io::{csv_bytes, fmt_opt};
use crate::labeling::{LabeledAttempt, PathwayLabel};

use super::fit::FitReport;
use super::inference::viterbi;
use super::params::HmmParams;

/// Persisted model: parameters plus the label order and fit metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub n_states: usize,
    pub n_symbols: usize,
    pub labels: Vec<String>,
    pub mode: SequenceMode,
    pub pi: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    pub emission: Vec<Vec<f64>>,
    pub seed: u64,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restart_index: usize,
}

impl ModelFile {
    pub fn from_fit(fit: &FitReport, mode: SequenceMode) -> Self {
        let p = &fit.params;
        Self {
            n_states: p.n_states,
            n_symbols: p.n_symbols,
            labels: PathwayLabel::ALL.iter().map(|l| l.to_string()).collect(),
            mode,
            pi: p.pi.clone(),
            transition: p.transition.clone(),
            emission: p.emission.clone(),
            seed: fit.seed,
            log_likelihood: fit.log_likelihood,
            iterations: fit.iterations,
            converged: fit.converged,
            restart_index: fit.restart_index,
        }
    }

    pub fn params(&self) -> Result<HmmParams> {
        let canonical: Vec<String> = PathwayLabel::ALL.iter().map(|l| l.to_string()).collect();
        if self.labels != canonical {
            return Err(Error::InvalidParams("model label order differs from the canonical order".into()));
        }
        let p = HmmParams {
            n_states: self.n_states,
            n_symbols: self.n_symbols,
            pi: self.pi.clone(),
            transition: self.transition.clone(),
            emission: self.emission.clone(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut v = serde_json::to_vec_pretty(self)?;
        v.push(b'\n');
        Ok(v)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&text)?)
    }
}

/// Label indices of each labeled sequence.
pub fn symbol_sequences(seqs: &OrderedSequences<LabeledAttempt>) -> Vec<Vec<usize>> {
    seqs.sequences
        .iter()
        .map(|(_, s)| s.iter().map(|a| a.label.index()).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedTrajectory {
    pub key: SequenceKey,
    pub states: Vec<usize>,
}

/// Viterbi paths for every sequence, in sequence order.
pub fn decode_sequences(
    params: &HmmParams,
    seqs: &OrderedSequences<LabeledAttempt>,
) -> Result<Vec<DecodedTrajectory>> {
    seqs.sequences
        .par_iter()
        .map(|(key, s)| {
            let symbols: Vec<usize> = s.iter().map(|a| a.label.index()).collect();
            Ok(DecodedTrajectory {
                key: key.clone(),
                states: viterbi(params, &symbols)?,
            })
        })
        .collect()
}

/// Mean length of maximal constant runs per state; `None` for states that
/// never occur. Runs never cross trajectory boundaries.
pub fn run_lengths(trajectories: &[DecodedTrajectory], n_states: usize) -> Vec<Option<f64>> {
    let mut total = vec![0usize; n_states];
    let mut runs = vec![0usize; n_states];
    for tr in trajectories {
        let mut i = 0;
        while i < tr.states.len() {
            let s = tr.states[i];
            let mut j = i;
            while j < tr.states.len() && tr.states[j] == s {
                j += 1;
            }
            if s < n_states {
                total[s] += j - i;
                runs[s] += 1;
            }
            i = j;
        }
    }
    (0..n_states)
        .map(|s| (runs[s] > 0).then(|| total[s] as f64 / runs[s] as f64))
        .collect()
}

/// Fraction of each trajectory's attempts decoded to each state.
pub fn state_percentages(
    trajectories: &[DecodedTrajectory],
    n_states: usize,
) -> Result<Vec<(SequenceKey, Vec<f64>)>> {
    trajectories
        .iter()
        .map(|tr| {
            if tr.states.is_empty() {
                return Err(Error::Empty(format!("trajectory {} has no attempts", tr.key)));
            }
            let mut pct = vec![0.0; n_states];
            for &s in &tr.states {
                if s >= n_states {
                    return Err(Error::InvalidParams(format!("state {s} outside 0..{n_states}")));
                }
                pct[s] += 1.0;
            }
            let n = tr.states.len() as f64;
            pct.iter_mut().for_each(|p| *p /= n);
            Ok((tr.key.clone(), pct))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub state: usize,
    pub n_attempts: usize,
    /// Distinct students with at least one attempt in the state.
    pub n_students: usize,
    /// Mean ln(ms) over attempts in the state.
    pub mean_log_time: Option<f64>,
    /// Mean over participating students of the distinct problems they
    /// attempted while in the state.
    pub mean_problems_per_student: Option<f64>,
    /// Distinct problems attempted in the state by anyone.
    pub total_problems: usize,
    pub mean_run_length: Option<f64>,
}

pub fn state_summaries(
    trajectories: &[DecodedTrajectory],
    labeled: &OrderedSequences<LabeledAttempt>,
    n_states: usize,
) -> Result<Vec<StateSummary>> {
    if trajectories.len() != labeled.sequences.len() {
        return Err(Error::Integrity(format!(
            "{} trajectories for {} sequences",
            trajectories.len(),
            labeled.sequences.len()
        )));
    }
    let mut n_attempts = vec![0usize; n_states];
    let mut log_time = vec![0.0f64; n_states];
    let mut per_student: Vec<BTreeMap<&str, BTreeSet<&str>>> = vec![BTreeMap::new(); n_states];
    let mut problems: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); n_states];
    for (tr, (key, seq)) in trajectories.iter().zip(&labeled.sequences) {
        if &tr.key != key || tr.states.len() != seq.len() {
            return Err(Error::Integrity(format!("trajectory {} is not aligned with its attempts", tr.key)));
        }
        for (&s, a) in tr.states.iter().zip(seq) {
            if s >= n_states {
                return Err(Error::InvalidParams(format!("state {s} outside 0..{n_states}")));
            }
            n_attempts[s] += 1;
            log_time[s] += a.record.log_time();
            per_student[s]
                .entry(a.record.student_id.as_str())
                .or_default()
                .insert(a.record.problem_id.as_str());
            problems[s].insert(a.record.problem_id.as_str());
        }
    }
    let runs = run_lengths(trajectories, n_states);
    Ok((0..n_states)
        .map(|s| {
            let students = &per_student[s];
            StateSummary {
                state: s,
                n_attempts: n_attempts[s],
                n_students: students.len(),
                mean_log_time: (n_attempts[s] > 0).then(|| log_time[s] / n_attempts[s] as f64),
                mean_problems_per_student: (!students.is_empty()).then(|| {
                    students.values().map(BTreeSet::len).sum::<usize>() as f64 / students.len() as f64
                }),
                total_problems: problems[s].len(),
                mean_run_length: runs[s],
            }
        })
        .collect())
}

pub fn summary_csv(summaries: &[StateSummary]) -> Result<Vec<u8>> {
    let mut rows = vec![vec![
        "state".to_string(),
        "n_attempts".into(),
        "n_students".into(),
        "mean_log_time".into(),
        "mean_problems_per_student".into(),
        "total_problems".into(),
        "mean_run_length".into(),
    ]];
    for s in summaries {
        rows.push(vec![
            s.state.to_string(),
            s.n_attempts.to_string(),
            s.n_students.to_string(),
            fmt_opt(s.mean_log_time),
            fmt_opt(s.mean_problems_per_student),
            s.total_problems.to_string(),
            fmt_opt(s.mean_run_length),
        ]);
    }
    csv_bytes(rows)
}

/// One row of `paths.csv`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathRow {
    pub student_id: String,
    pub problem_id: String,
    pub attempt_index: u32,
    pub state: usize,
}

pub fn paths_csv(trajectories: &[DecodedTrajectory], labeled: &OrderedSequences<LabeledAttempt>) -> Result<Vec<u8>> {
    let mut rows = vec![vec![
        "student_id".to_string(),
        "problem_id".into(),
        "attempt_index".into(),
        "state".into(),
    ]];
    for (tr, (_, seq)) in trajectories.iter().zip(&labeled.sequences) {
        for (&s, a) in tr.states.iter().zip(seq) {
            rows.push(vec![
                a.record.student_id.clone(),
                a.record.problem_id.clone(),
                a.record.attempt_index.to_string(),
                s.to_string(),
            ]);
        }
    }
    csv_bytes(rows)
}

pub fn load_paths_from_reader(reader: impl Read) -> Result<Vec<PathRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let rows: std::result::Result<Vec<PathRow>, csv::Error> = rdr.deserialize().collect();
    Ok(rows?)
}

pub fn load_paths(path: impl AsRef<Path>) -> Result<Vec<PathRow>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_paths_from_reader(f)
}

/// Re-attaches decoded states to labeled attempts and orders both by `mode`.
/// Every attempt must have exactly one path row and vice versa.
pub fn join_paths(
    rows: &[PathRow],
    labeled: &[LabeledAttempt],
    mode: SequenceMode,
) -> Result<(OrderedSequences<LabeledAttempt>, Vec<DecodedTrajectory>)> {
    let mut by_key: HashMap<(&str, &str, u32), usize> = HashMap::with_capacity(rows.len());
    for r in rows {
        if by_key
            .insert((r.student_id.as_str(), r.problem_id.as_str(), r.attempt_index), r.state)
            .is_some()
        {
            return Err(Error::Integrity(format!(
                "duplicate path row for {}/{}#{}",
                r.student_id, r.problem_id, r.attempt_index
            )));
        }
    }
    if by_key.len() != labeled.len() {
        return Err(Error::Integrity(format!(
            "{} path rows for {} labeled attempts",
            by_key.len(),
            labeled.len()
        )));
    }
    let seqs = order(labeled, mode)?;
    let mut trajectories = Vec::with_capacity(seqs.len());
    for (key, seq) in &seqs.sequences {
        let states = seq
            .iter()
            .map(|a| {
                let r = &a.record;
                by_key
                    .get(&(r.student_id.as_str(), r.problem_id.as_str(), r.attempt_index))
                    .copied()
                    .ok_or_else(|| {
                        Error::Integrity(format!(
                            "no decoded state for {}/{}#{}",
                            r.student_id, r.problem_id, r.attempt_index
                        ))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        trajectories.push(DecodedTrajectory {
            key: key.clone(),
            states,
        });
    }
    Ok((seqs, trajectories))
}
