//! First-order transition statistics over the twelve pathway labels.

use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::{OrderedSequences, SequenceMode};
use crate::io::{csv_bytes, fmt_f64, fmt_opt, write_atomic};
use crate::labeling::{LabeledAttempt, PathwayLabel, N_LABELS};

type Grid<T> = [[T; N_LABELS]; N_LABELS];

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionStats {
    pub mode: SequenceMode,
    pub counts: Grid<u64>,
    /// Row-normalized counts; all-zero rows stay zero.
    pub probabilities: Grid<f64>,
    /// Mean ln(ms) of the source attempt over all i -> j transitions, `None`
    /// where no such transition was observed.
    pub mean_log_time: Grid<Option<f64>>,
    log_time_sum: Grid<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatmapKind {
    Probability,
    MeanLogTime,
    Count,
}

impl TransitionStats {
    fn from_sums(mode: SequenceMode, counts: Grid<u64>, log_time_sum: Grid<f64>) -> Self {
        let mut probabilities = [[0.0; N_LABELS]; N_LABELS];
        let mut mean_log_time = [[None; N_LABELS]; N_LABELS];
        for i in 0..N_LABELS {
            let row: u64 = counts[i].iter().sum();
            for j in 0..N_LABELS {
                if counts[i][j] > 0 {
                    probabilities[i][j] = counts[i][j] as f64 / row as f64;
                    mean_log_time[i][j] = Some(log_time_sum[i][j] / counts[i][j] as f64);
                }
            }
        }
        Self {
            mode,
            counts,
            probabilities,
            mean_log_time,
            log_time_sum,
        }
    }

    pub fn labels() -> [&'static str; N_LABELS] {
        PathwayLabel::ALL.map(|l| l.as_str())
    }

    pub fn total_transitions(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Rows whose source label never transitions anywhere.
    pub fn zero_rows(&self) -> [bool; N_LABELS] {
        let mut z = [false; N_LABELS];
        for (i, row) in self.counts.iter().enumerate() {
            z[i] = row.iter().all(|&c| c == 0);
        }
        z
    }

    pub fn probability(&self, from: PathwayLabel, to: PathwayLabel) -> f64 {
        self.probabilities[from.index()][to.index()]
    }

    /// Cell-wise sum of two estimates over disjoint sequence sets.
    pub fn merge(&self, other: &TransitionStats) -> Result<TransitionStats> {
        if self.mode != other.mode {
            return Err(Error::Config("cannot merge within- and across-problem statistics".into()));
        }
        let mut counts = self.counts;
        let mut sums = self.log_time_sum;
        for i in 0..N_LABELS {
            for j in 0..N_LABELS {
                counts[i][j] += other.counts[i][j];
                sums[i][j] += other.log_time_sum[i][j];
            }
        }
        Ok(Self::from_sums(self.mode, counts, sums))
    }

    /// Renders one matrix as CSV: a header row of labels, then one row per
    /// source label. Probability and time grids carry a trailing `zero_row`
    /// flag column.
    pub fn heatmap_csv(&self, which: HeatmapKind) -> Result<Vec<u8>> {
        let labels = Self::labels();
        let flagged = which != HeatmapKind::Count;
        let zero = self.zero_rows();
        let mut rows: Vec<Vec<String>> = Vec::with_capacity(N_LABELS + 1);
        let mut header = vec!["from\\to".to_string()];
        header.extend(labels.iter().map(|s| s.to_string()));
        if flagged {
            header.push("zero_row".into());
        }
        rows.push(header);
        for i in 0..N_LABELS {
            let mut row = vec![labels[i].to_string()];
            for j in 0..N_LABELS {
                row.push(match which {
                    HeatmapKind::Probability => fmt_f64(self.probabilities[i][j]),
                    HeatmapKind::MeanLogTime => fmt_opt(self.mean_log_time[i][j]),
                    HeatmapKind::Count => self.counts[i][j].to_string(),
                });
            }
            if flagged {
                row.push(zero[i].to_string());
            }
            rows.push(row);
        }
        csv_bytes(rows)
    }

    pub fn export_heatmap(&self, which: HeatmapKind, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, &self.heatmap_csv(which)?)
    }
}

/// Counts every consecutive pair inside each sequence; sequence boundaries
/// never produce a transition.
pub fn estimate_transitions(sequences: &OrderedSequences<LabeledAttempt>) -> TransitionStats {
    let mut counts = [[0u64; N_LABELS]; N_LABELS];
    let mut sums = [[0.0f64; N_LABELS]; N_LABELS];
    for (_, seq) in &sequences.sequences {
        for w in seq.windows(2) {
            let (i, j) = (w[0].label.index(), w[1].label.index());
            counts[i][j] += 1;
            sums[i][j] += w[0].record.log_time();
        }
    }
    TransitionStats::from_sums(sequences.mode, counts, sums)
}

/// Transition counts of plain index sequences, for callers that hold symbols
/// rather than labeled attempts.
pub fn count_symbol_transitions(sequences: &[Vec<usize>], n: usize) -> Vec<Vec<u64>> {
    let mut counts = vec![vec![0u64; n]; n];
    for s in sequences {
        for w in s.windows(2) {
            counts[w[0]][w[1]] += 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{AttemptRecord, ProblemKind, SequenceKey};
    use crate::labeling::{Outcome, ReplayCategory};

    const A: PathwayLabel = PathwayLabel::new(Outcome::Incomplete, false, false);
    const B: PathwayLabel = PathwayLabel::new(Outcome::Optimal, false, true);

    fn la(label: PathwayLabel, time: u64) -> LabeledAttempt {
        LabeledAttempt {
            record: AttemptRecord {
                student_id: "s".into(),
                problem_id: "p".into(),
                attempt_index: 1,
                start_timestamp: 0,
                step_count: 1,
                time_spent: time,
                goal_reached: false,
                hints_requested: 0,
                problem_kind: ProblemKind::Regular,
            },
            label,
            replay_category: ReplayCategory::NonReplay,
        }
    }

    fn seqs(list: Vec<Vec<LabeledAttempt>>) -> OrderedSequences<LabeledAttempt> {
        OrderedSequences {
            mode: SequenceMode::AcrossProblem,
            sequences: list
                .into_iter()
                .enumerate()
                .map(|(i, s)| (SequenceKey::Student(i.to_string()), s))
                .collect(),
        }
    }

    #[test]
    fn hand_counted_fixture() {
        let s = seqs(vec![vec![la(A, 10), la(A, 10), la(B, 10), la(A, 10)]]);
        let st = estimate_transitions(&s);
        assert_eq!(st.counts[A.index()][A.index()], 1);
        assert_eq!(st.counts[A.index()][B.index()], 1);
        assert_eq!(st.counts[B.index()][A.index()], 1);
        assert_eq!(st.total_transitions(), 3);
        assert_eq!(st.probability(A, A), 0.5);
        assert_eq!(st.probability(A, B), 0.5);
        assert_eq!(st.probability(B, A), 1.0);
    }

    #[test]
    fn singleton_has_no_transitions() {
        let st = estimate_transitions(&seqs(vec![vec![la(A, 10)]]));
        assert_eq!(st.total_transitions(), 0);
        assert!(st.zero_rows().iter().all(|&z| z));
    }

    #[test]
    fn mean_log_time_of_source() {
        let e = std::f64::consts::E;
        let s = seqs(vec![vec![la(A, 1000), la(B, 5)], vec![la(A, (e * 1000.0).round() as u64), la(B, 5)]]);
        let st = estimate_transitions(&s);
        let got = st.mean_log_time[A.index()][B.index()].unwrap();
        // integer milliseconds: e*1000 rounds to 2718
        let expected = (1000f64.ln() + 2718f64.ln()) / 2.0;
        assert!((got - expected).abs() < 1e-12);
        assert!((got - (1000f64.ln() + 0.5)).abs() < 1e-4);
        assert!(st.mean_log_time[B.index()][A.index()].is_none());
    }

    #[test]
    fn heatmap_shapes_and_empty_cells() {
        let st = estimate_transitions(&seqs(vec![vec![la(A, 10), la(B, 10)]]));
        let text = String::from_utf8(st.heatmap_csv(HeatmapKind::Probability).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 13);
        assert!(lines.iter().all(|l| l.split(',').count() == 14));
        // B never leaves: zero row flagged
        let b_row = lines[1 + B.index()];
        assert!(b_row.ends_with(",true"));
        assert!(b_row.split(',').skip(1).take(12).all(|c| c == "0"));
        let time = String::from_utf8(st.heatmap_csv(HeatmapKind::MeanLogTime).unwrap()).unwrap();
        let a_row: Vec<&str> = time.lines().nth(1 + A.index()).unwrap().split(',').collect();
        assert_eq!(a_row[1 + A.index()], "");
        assert_eq!(a_row[1 + B.index()].parse::<f64>().unwrap(), 10f64.ln());
        let counts = String::from_utf8(st.heatmap_csv(HeatmapKind::Count).unwrap()).unwrap();
        assert!(counts.lines().all(|l| l.split(',').count() == 13));
    }

    #[test]
    fn merge_requires_same_mode() {
        let a = estimate_transitions(&seqs(vec![vec![la(A, 10), la(B, 10)]]));
        let mut b = a.clone();
        b.mode = SequenceMode::WithinProblem;
        assert!(a.merge(&b).is_err());
        let m = a.merge(&a).unwrap();
        assert_eq!(m.counts[A.index()][B.index()], 2);
    }
}
