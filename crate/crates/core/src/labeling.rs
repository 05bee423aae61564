//! Pathway labels (outcome x replay x end-marker) and replay timing.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ingest::{
    load_logs_from_reader, AttemptRecord, ColumnMapping, HasAttempt, LoadedLogs, OrderedSequences,
    ProblemMeta, SequenceMode,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Incomplete,
    Suboptimal,
    Optimal,
}

/// One of the twelve attempt labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathwayLabel {
    pub outcome: Outcome,
    pub replay: bool,
    pub is_end: bool,
}

pub const N_LABELS: usize = 12;

impl PathwayLabel {
    /// Canonical order: incomplete, suboptimal, optimal; within each outcome
    /// non-replay before replay, and the plain label before its `_end` form.
    pub const ALL: [PathwayLabel; N_LABELS] = {
        let outcomes = [Outcome::Incomplete, Outcome::Suboptimal, Outcome::Optimal];
        let mut all = [PathwayLabel {
            outcome: Outcome::Incomplete,
            replay: false,
            is_end: false,
        }; N_LABELS];
        let mut i = 0;
        while i < N_LABELS {
            all[i] = PathwayLabel {
                outcome: outcomes[i / 4],
                replay: (i % 4) >= 2,
                is_end: i % 2 == 1,
            };
            i += 1;
        }
        all
    };

    pub const fn new(outcome: Outcome, replay: bool, is_end: bool) -> Self {
        Self {
            outcome,
            replay,
            is_end,
        }
    }

    /// Position in [`PathwayLabel::ALL`]; doubles as the HMM symbol index.
    pub fn index(self) -> usize {
        let base = match self.outcome {
            Outcome::Incomplete => 0,
            Outcome::Suboptimal => 4,
            Outcome::Optimal => 8,
        };
        base + 2 * usize::from(self.replay) + usize::from(self.is_end)
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        const NAMES: [&str; N_LABELS] = [
            "incomplete",
            "incomplete_end",
            "replay_incomplete",
            "replay_incomplete_end",
            "sub_optimal",
            "sub_optimal_end",
            "replay_sub_optimal",
            "replay_sub_optimal_end",
            "optimal",
            "optimal_end",
            "replay_optimal",
            "replay_optimal_end",
        ];
        NAMES[self.index()]
    }
}

impl PartialOrd for PathwayLabel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PathwayLabel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.index().cmp(&other.index())
    }
}

impl fmt::Display for PathwayLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for PathwayLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PathwayLabel::ALL
            .iter()
            .copied()
            .find(|l| l.as_str() == s.trim())
            .ok_or_else(|| Error::Schema(format!("unknown pathway label {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ReplayCategory {
    NonReplay,
    ImmediateReplay,
    DelayedReplay,
}

impl ReplayCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ReplayCategory::NonReplay => "non_replay",
            ReplayCategory::ImmediateReplay => "immediate_replay",
            ReplayCategory::DelayedReplay => "delayed_replay",
        }
    }
}

impl fmt::Display for ReplayCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for ReplayCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "non_replay" => Ok(ReplayCategory::NonReplay),
            "immediate_replay" => Ok(ReplayCategory::ImmediateReplay),
            "delayed_replay" => Ok(ReplayCategory::DelayedReplay),
            other => Err(Error::Schema(format!("unknown replay category {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledAttempt {
    pub record: AttemptRecord,
    pub label: PathwayLabel,
    pub replay_category: ReplayCategory,
}

impl HasAttempt for LabeledAttempt {
    fn attempt(&self) -> &AttemptRecord {
        &self.record
    }
}

pub fn classify_outcome(goal_reached: bool, step_count: u32, optimal_step_count: u32) -> Result<Outcome> {
    if optimal_step_count < 1 || step_count < 1 {
        return Err(Error::Integrity(format!(
            "step counts must be >= 1 (steps {step_count}, optimal {optimal_step_count})"
        )));
    }
    if !goal_reached {
        return Ok(Outcome::Incomplete);
    }
    match step_count.cmp(&optimal_step_count) {
        std::cmp::Ordering::Equal => Ok(Outcome::Optimal),
        std::cmp::Ordering::Greater => Ok(Outcome::Suboptimal),
        std::cmp::Ordering::Less => Err(Error::Integrity(format!(
            "completed in {step_count} steps, below the optimal {optimal_step_count}"
        ))),
    }
}

/// Labels every attempt of chronologically ordered per-student sequences.
///
/// An attempt is a replay iff the same student completed the same problem in
/// some earlier attempt; retries before the first completion are resets. The
/// `_end` suffix marks the chronologically last attempt of each
/// (student, problem) group. Output follows the input sequence order.
pub fn label_attempts(
    across: &OrderedSequences<AttemptRecord>,
    meta: &ProblemMeta,
) -> Result<Vec<LabeledAttempt>> {
    if across.mode != SequenceMode::AcrossProblem {
        return Err(Error::Config("label_attempts needs across-problem sequences".into()));
    }
    let mut out = Vec::with_capacity(across.total_attempts());
    for (_, seq) in &across.sequences {
        let mut last_pos: HashMap<&str, usize> = HashMap::new();
        for (i, r) in seq.iter().enumerate() {
            last_pos.insert(r.problem_id.as_str(), i);
        }
        let mut completed: HashSet<&str> = HashSet::new();
        let mut labels = Vec::with_capacity(seq.len());
        for (i, r) in seq.iter().enumerate() {
            let optimal = meta.optimal_step_count(&r.problem_id)?;
            let outcome = classify_outcome(r.goal_reached, r.step_count, optimal).map_err(|e| match e {
                Error::Integrity(m) => Error::Integrity(format!(
                    "student {:?} problem {:?} attempt {}: {m}",
                    r.student_id, r.problem_id, r.attempt_index
                )),
                other => other,
            })?;
            let replay = completed.contains(r.problem_id.as_str());
            let is_end = last_pos[r.problem_id.as_str()] == i;
            if r.goal_reached {
                completed.insert(r.problem_id.as_str());
            }
            labels.push(PathwayLabel::new(outcome, replay, is_end));
        }
        let cats = categorize(seq.iter().zip(&labels).map(|(r, l)| (r.problem_id.as_str(), l.replay)));
        for ((r, label), replay_category) in seq.iter().zip(labels).zip(cats) {
            out.push(LabeledAttempt {
                record: r.clone(),
                label,
                replay_category,
            });
        }
    }
    Ok(out)
}

fn categorize<'a>(stream: impl Iterator<Item = (&'a str, bool)>) -> Vec<ReplayCategory> {
    let mut prev: Option<&str> = None;
    stream
        .map(|(problem, replay)| {
            let cat = if !replay {
                ReplayCategory::NonReplay
            } else if prev == Some(problem) {
                ReplayCategory::ImmediateReplay
            } else {
                ReplayCategory::DelayedReplay
            };
            prev = Some(problem);
            cat
        })
        .collect()
}

/// Recomputes replay timing from the replay flags of chronologically ordered
/// labeled sequences. A replay is immediate when the student's previous
/// attempt (on any problem) was on the same problem, delayed otherwise.
pub fn replay_categories(
    across: &OrderedSequences<LabeledAttempt>,
) -> Result<OrderedSequences<LabeledAttempt>> {
    if across.mode != SequenceMode::AcrossProblem {
        return Err(Error::Config("replay categories need across-problem sequences".into()));
    }
    let mut out = across.clone();
    for (_, seq) in &mut out.sequences {
        let cats = categorize(seq.iter().map(|a| (a.record.problem_id.as_str(), a.label.replay)));
        for (a, c) in seq.iter_mut().zip(cats) {
            a.replay_category = c;
        }
    }
    Ok(out)
}

/// Label frequencies and percentages; labels absent from the input are
/// omitted.
pub fn label_distribution(labeled: &[LabeledAttempt]) -> BTreeMap<PathwayLabel, (usize, f64)> {
    let mut counts: BTreeMap<PathwayLabel, usize> = BTreeMap::new();
    for a in labeled {
        *counts.entry(a.label).or_default() += 1;
    }
    let total = labeled.len() as f64;
    counts
        .into_iter()
        .map(|(l, c)| (l, (c, 100.0 * c as f64 / total)))
        .collect()
}

/// Parses a labeled CSV: the log columns named by `mapping` plus `label`
/// and `replay_category`.
pub fn load_labeled_from_reader(
    reader: impl Read,
    mapping: &ColumnMapping,
) -> Result<(LoadedLogs, Vec<LabeledAttempt>)> {
    let logs = load_logs_from_reader(reader, mapping)?.into_strict()?;
    let label_col = logs
        .headers
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| Error::Schema("missing column \"label\"".into()))?;
    let cat_col = logs
        .headers
        .iter()
        .position(|h| h == "replay_category")
        .ok_or_else(|| Error::Schema("missing column \"replay_category\"".into()))?;
    let mut labeled = Vec::with_capacity(logs.records.len());
    for (rec, raw) in logs.records.iter().zip(&logs.raw) {
        let label: PathwayLabel = raw.get(label_col).unwrap_or("").parse()?;
        let replay_category: ReplayCategory = raw.get(cat_col).unwrap_or("").parse()?;
        if label.replay == (replay_category == ReplayCategory::NonReplay) {
            return Err(Error::Integrity(format!(
                "label {label} inconsistent with replay category {replay_category} (student {:?}, problem {:?})",
                rec.student_id, rec.problem_id
            )));
        }
        labeled.push(LabeledAttempt {
            record: rec.clone(),
            label,
            replay_category,
        });
    }
    Ok((logs, labeled))
}

pub fn load_labeled(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<(LoadedLogs, Vec<LabeledAttempt>)> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_labeled_from_reader(f, mapping)
}
