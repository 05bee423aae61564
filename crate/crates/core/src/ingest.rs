//! Attempt-level log ingestion: parsing, cleaning, and the two sequence
//! orderings (within one problem, across all of a student's problems).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, RowError};

/// Upper bound on a single attempt's `time_spent` (30 minutes).
pub const TIME_CAP_MS: u64 = 1_800_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Regular,
    Tutorial,
    Optional,
}

impl FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "regular" | "" => Ok(ProblemKind::Regular),
            "tutorial" => Ok(ProblemKind::Tutorial),
            "optional" => Ok(ProblemKind::Optional),
            other => Err(format!("unknown problem kind {other:?}")),
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            ProblemKind::Regular => "regular",
            ProblemKind::Tutorial => "tutorial",
            ProblemKind::Optional => "optional",
        })
    }
}

/// One student x problem x attempt row.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AttemptRecord {
    pub student_id: String,
    pub problem_id: String,
    /// 1-based attempt number within the (student, problem) group.
    pub attempt_index: u32,
    /// Epoch milliseconds.
    pub start_timestamp: i64,
    pub step_count: u32,
    /// Milliseconds.
    pub time_spent: u64,
    pub goal_reached: bool,
    pub hints_requested: u32,
    pub problem_kind: ProblemKind,
}

impl AttemptRecord {
    /// Natural log of `time_spent` in milliseconds.
    pub fn log_time(&self) -> f64 {
        (self.time_spent as f64).ln()
    }
}

/// Anything that carries an [`AttemptRecord`], so orderings work for raw and
/// labeled attempts alike.
pub trait HasAttempt {
    fn attempt(&self) -> &AttemptRecord;
}

impl HasAttempt for AttemptRecord {
    fn attempt(&self) -> &AttemptRecord {
        self
    }
}

/// Minimal move counts per problem.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProblemMeta {
    optimal_steps: BTreeMap<String, u32>,
}

impl ProblemMeta {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, problem_id: impl Into<String>, optimal_step_count: u32) -> Result<()> {
        let problem_id = problem_id.into();
        if optimal_step_count < 1 {
            return Err(Error::Integrity(format!(
                "problem {problem_id:?} has optimal_step_count 0"
            )));
        }
        if self.optimal_steps.contains_key(&problem_id) {
            return Err(Error::Integrity(format!(
                "duplicate metadata for problem {problem_id:?}"
            )));
        }
        self.optimal_steps.insert(problem_id, optimal_step_count);
        Ok(())
    }

    pub fn optimal_step_count(&self, problem_id: &str) -> Result<u32> {
        self.optimal_steps
            .get(problem_id)
            .copied()
            .ok_or_else(|| Error::MissingMeta(problem_id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.optimal_steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.optimal_steps.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.optimal_steps.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Problem ids referenced by `records` that have no metadata entry.
    pub fn missing_for<'a, R: HasAttempt>(&self, records: &'a [R]) -> BTreeSet<&'a str> {
        records
            .iter()
            .map(|r| r.attempt().problem_id.as_str())
            .filter(|p| !self.optimal_steps.contains_key(*p))
            .collect()
    }

    /// Reads a `problem_id,optimal_step_count` CSV.
    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let pid = column_index(&headers, "problem_id")?;
        let opt = column_index(&headers, "optimal_step_count")?;
        let mut meta = ProblemMeta::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let line = i as u64 + 2;
            let count: u32 = row[opt].parse().map_err(|_| {
                Error::Rows(vec![RowError {
                    line,
                    message: format!("optimal_step_count {:?} is not an integer", &row[opt]),
                }])
            })?;
            meta.insert(&row[pid], count)?;
        }
        Ok(meta)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(f)
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Schema(format!("missing column {name:?}")))
}

/// Maps record fields onto CSV header names.
///
/// An empty column name for `hints_requested` or `problem_kind` means the
/// column is absent and the field takes its default (0 / regular).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub student_id: String,
    pub problem_id: String,
    pub attempt_index: String,
    pub start_timestamp: String,
    pub step_count: String,
    pub time_spent: String,
    pub goal_reached: String,
    pub hints_requested: String,
    pub problem_kind: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            student_id: "student_id".into(),
            problem_id: "problem_id".into(),
            attempt_index: "attempt_index".into(),
            start_timestamp: "start_timestamp".into(),
            step_count: "step_count".into(),
            time_spent: "time_spent".into(),
            goal_reached: "goal_reached".into(),
            hints_requested: "hints_requested".into(),
            problem_kind: "problem_kind".into(),
        }
    }
}

/// Column mapping plus the optional student exclusion list, read from a
/// `key = value` file (`#` starts a comment).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestConfig {
    pub mapping: ColumnMapping,
    pub excluded_students: BTreeSet<String>,
}

impl IngestConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = IngestConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("config line {}: expected key = value", n + 1))
            })?;
            let value = value.trim().to_string();
            let m = &mut cfg.mapping;
            match key.trim() {
                "student_id" => m.student_id = value,
                "problem_id" => m.problem_id = value,
                "attempt_index" => m.attempt_index = value,
                "start_timestamp" => m.start_timestamp = value,
                "step_count" => m.step_count = value,
                "time_spent" => m.time_spent = value,
                "goal_reached" => m.goal_reached = value,
                "hints_requested" => m.hints_requested = value,
                "problem_kind" => m.problem_kind = value,
                "exclude_students" => cfg.excluded_students.extend(
                    value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(String::from),
                ),
                other => {
                    return Err(Error::Config(format!(
                        "config line {}: unknown key {other:?}",
                        n + 1
                    )))
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// Result of [`load_logs`]: parsed records, per-row failures, and the raw
/// rows so writers can echo the input columns unchanged.
#[derive(Debug, Clone, Default)]
pub struct LoadedLogs {
    pub headers: csv::StringRecord,
    pub records: Vec<AttemptRecord>,
    /// Raw CSV row for each entry of `records`.
    pub raw: Vec<csv::StringRecord>,
    pub row_errors: Vec<RowError>,
}

impl LoadedLogs {
    /// Fails with [`Error::Rows`] if any row did not parse.
    pub fn into_strict(self) -> Result<Self> {
        if self.row_errors.is_empty() {
            Ok(self)
        } else {
            Err(Error::Rows(self.row_errors))
        }
    }
}

struct Columns {
    student: usize,
    problem: usize,
    attempt: usize,
    timestamp: usize,
    steps: usize,
    time: usize,
    goal: usize,
    hints: Option<usize>,
    kind: Option<usize>,
}

impl Columns {
    fn resolve(headers: &csv::StringRecord, m: &ColumnMapping) -> Result<Self> {
        let mut missing = Vec::new();
        let mut find = |name: &str, optional: bool| -> Option<usize> {
            if optional && name.is_empty() {
                return None;
            }
            let idx = headers.iter().position(|h| h == name);
            if idx.is_none() {
                missing.push(name.to_string());
            }
            idx
        };
        let student = find(&m.student_id, false);
        let problem = find(&m.problem_id, false);
        let attempt = find(&m.attempt_index, false);
        let timestamp = find(&m.start_timestamp, false);
        let steps = find(&m.step_count, false);
        let time = find(&m.time_spent, false);
        let goal = find(&m.goal_reached, false);
        let hints = find(&m.hints_requested, true);
        let kind = find(&m.problem_kind, true);
        if !missing.is_empty() {
            return Err(Error::Schema(format!("missing column(s): {}", missing.join(", "))));
        }
        Ok(Columns {
            student: student.unwrap(),
            problem: problem.unwrap(),
            attempt: attempt.unwrap(),
            timestamp: timestamp.unwrap(),
            steps: steps.unwrap(),
            time: time.unwrap(),
            goal: goal.unwrap(),
            hints,
            kind,
        })
    }

    fn parse(&self, row: &csv::StringRecord) -> std::result::Result<AttemptRecord, String> {
        fn num<T: FromStr>(row: &csv::StringRecord, idx: usize, what: &str) -> std::result::Result<T, String> {
            let cell = row.get(idx).unwrap_or("").trim();
            cell.parse()
                .map_err(|_| format!("{what}: cannot parse {cell:?}"))
        }
        let attempt_index: u32 = num(row, self.attempt, "attempt_index")?;
        if attempt_index == 0 {
            return Err("attempt_index: must be >= 1".into());
        }
        let goal_cell = row.get(self.goal).unwrap_or("").trim();
        Ok(AttemptRecord {
            student_id: row.get(self.student).unwrap_or("").trim().to_string(),
            problem_id: row.get(self.problem).unwrap_or("").trim().to_string(),
            attempt_index,
            start_timestamp: num(row, self.timestamp, "start_timestamp")?,
            step_count: num(row, self.steps, "step_count")?,
            time_spent: num(row, self.time, "time_spent")?,
            goal_reached: parse_bool(goal_cell)
                .ok_or_else(|| format!("goal_reached: cannot parse {goal_cell:?}"))?,
            hints_requested: match self.hints {
                Some(i) => num(row, i, "hints_requested")?,
                None => 0,
            },
            problem_kind: match self.kind {
                Some(i) => row.get(i).unwrap_or("").parse().map_err(|e| format!("problem_kind: {e}"))?,
                None => ProblemKind::Regular,
            },
        })
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "t" | "1" | "yes" => Some(true),
        "false" | "f" | "0" | "no" => Some(false),
        _ => None,
    }
}

/// Parses attempt rows from any reader. Rows that fail to parse are
/// collected into `row_errors`; nothing is dropped silently.
pub fn load_logs_from_reader(reader: impl Read, mapping: &ColumnMapping) -> Result<LoadedLogs> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = Columns::resolve(&headers, mapping)?;
    let mut out = LoadedLogs {
        headers,
        ..Default::default()
    };
    for (i, row) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                out.row_errors.push(RowError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        match cols.parse(&row) {
            Ok(rec) => {
                out.records.push(rec);
                out.raw.push(row);
            }
            Err(message) => out.row_errors.push(RowError { line, message }),
        }
    }
    Ok(out)
}

pub fn load_logs(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<LoadedLogs> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_logs_from_reader(f, mapping)
}

/// Per-rule removal counts. Each removed row is attributed to the first rule
/// it matches, in the order the fields are declared.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub removed_tutorial: usize,
    pub removed_optional: usize,
    pub removed_zero_steps: usize,
    pub removed_zero_time: usize,
    pub removed_over_cap: usize,
    pub removed_excluded_students: usize,
    pub retained: usize,
}

impl CleanReport {
    pub fn total_removed(&self) -> usize {
        self.removed_tutorial
            + self.removed_optional
            + self.removed_zero_steps
            + self.removed_zero_time
            + self.removed_over_cap
            + self.removed_excluded_students
    }

    pub fn input_rows(&self) -> usize {
        self.total_removed() + self.retained
    }
}

/// Indices of the rows that survive cleaning, plus the report.
pub fn clean_indices<R: HasAttempt>(
    records: &[R],
    excluded_students: &BTreeSet<String>,
) -> (Vec<usize>, CleanReport) {
    let mut report = CleanReport::default();
    let mut kept = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let r = r.attempt();
        let counter = if r.problem_kind == ProblemKind::Tutorial {
            &mut report.removed_tutorial
        } else if r.problem_kind == ProblemKind::Optional {
            &mut report.removed_optional
        } else if r.step_count == 0 {
            &mut report.removed_zero_steps
        } else if r.time_spent == 0 {
            &mut report.removed_zero_time
        } else if r.time_spent > TIME_CAP_MS {
            &mut report.removed_over_cap
        } else if excluded_students.contains(&r.student_id) {
            &mut report.removed_excluded_students
        } else {
            kept.push(i);
            continue;
        };
        *counter += 1;
    }
    report.retained = kept.len();
    (kept, report)
}

/// Drops tutorial, optional, zero-step, zero-time and over-cap rows.
pub fn clean(records: &[AttemptRecord]) -> (Vec<AttemptRecord>, CleanReport) {
    clean_excluding(records, &BTreeSet::new())
}

/// [`clean`], additionally dropping every row of the listed students.
pub fn clean_excluding(
    records: &[AttemptRecord],
    excluded_students: &BTreeSet<String>,
) -> (Vec<AttemptRecord>, CleanReport) {
    let (kept, report) = clean_indices(records, excluded_students);
    (kept.into_iter().map(|i| records[i].clone()).collect(), report)
}

/// Renumbers `attempt_index` to 1..k within each (student, problem) group,
/// preserving the original attempt order. Input order is kept.
pub fn renumber_attempts(records: &mut [AttemptRecord]) -> Result<()> {
    let within = order_within(records)?;
    let mut new_index: BTreeMap<(&str, &str, u32), u32> = BTreeMap::new();
    for (_, seq) in &within.sequences {
        for (k, r) in seq.iter().enumerate() {
            new_index.insert(
                (r.student_id.as_str(), r.problem_id.as_str(), r.attempt_index),
                k as u32 + 1,
            );
        }
    }
    let updates: Vec<u32> = records
        .iter()
        .map(|r| new_index[&(r.student_id.as_str(), r.problem_id.as_str(), r.attempt_index)])
        .collect();
    for (r, k) in records.iter_mut().zip(updates) {
        r.attempt_index = k;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceMode {
    WithinProblem,
    AcrossProblem,
}

impl FromStr for SequenceMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "within" | "within_problem" => Ok(SequenceMode::WithinProblem),
            "across" | "across_problem" => Ok(SequenceMode::AcrossProblem),
            other => Err(format!("unknown mode {other:?} (expected within|across)")),
        }
    }
}

impl fmt::Display for SequenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            SequenceMode::WithinProblem => "within_problem",
            SequenceMode::AcrossProblem => "across_problem",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SequenceKey {
    Student(String),
    StudentProblem(String, String),
}

impl SequenceKey {
    pub fn student_id(&self) -> &str {
        match self {
            SequenceKey::Student(s) | SequenceKey::StudentProblem(s, _) => s,
        }
    }
}

impl fmt::Display for SequenceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequenceKey::Student(s) => f.write_str(s),
            SequenceKey::StudentProblem(s, p) => write!(f, "{s}/{p}"),
        }
    }
}

/// Attempts grouped into keyed, ordered sequences. Keys are sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedSequences<R = AttemptRecord> {
    pub mode: SequenceMode,
    pub sequences: Vec<(SequenceKey, Vec<R>)>,
}

impl<R> OrderedSequences<R> {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn total_attempts(&self) -> usize {
        self.sequences.iter().map(|(_, s)| s.len()).sum()
    }

    pub fn map<T>(&self, mut f: impl FnMut(&R) -> T) -> OrderedSequences<T> {
        OrderedSequences {
            mode: self.mode,
            sequences: self
                .sequences
                .iter()
                .map(|(k, s)| (k.clone(), s.iter().map(&mut f).collect()))
                .collect(),
        }
    }
}

/// One sequence per (student, problem), ordered by attempt number.
pub fn order_within<R: HasAttempt + Clone>(records: &[R]) -> Result<OrderedSequences<R>> {
    let mut groups: BTreeMap<(&str, &str), Vec<&R>> = BTreeMap::new();
    for r in records {
        let a = r.attempt();
        groups
            .entry((a.student_id.as_str(), a.problem_id.as_str()))
            .or_default()
            .push(r);
    }
    let mut sequences = Vec::with_capacity(groups.len());
    for ((student, problem), mut seq) in groups {
        seq.sort_by_key(|r| r.attempt().attempt_index);
        if let Some(w) = seq
            .windows(2)
            .find(|w| w[0].attempt().attempt_index == w[1].attempt().attempt_index)
        {
            return Err(Error::Integrity(format!(
                "duplicate attempt {} for student {student:?} on problem {problem:?}",
                w[0].attempt().attempt_index
            )));
        }
        sequences.push((
            SequenceKey::StudentProblem(student.to_string(), problem.to_string()),
            seq.into_iter().cloned().collect(),
        ));
    }
    Ok(OrderedSequences {
        mode: SequenceMode::WithinProblem,
        sequences,
    })
}

/// One sequence per student, in chronological order across problems.
pub fn order_across<R: HasAttempt + Clone>(records: &[R]) -> Result<OrderedSequences<R>> {
    let mut groups: BTreeMap<&str, Vec<&R>> = BTreeMap::new();
    for r in records {
        groups.entry(r.attempt().student_id.as_str()).or_default().push(r);
    }
    let mut sequences = Vec::with_capacity(groups.len());
    for (student, mut seq) in groups {
        seq.sort_by_key(|r| r.attempt().start_timestamp);
        if let Some(w) = seq
            .windows(2)
            .find(|w| w[0].attempt().start_timestamp == w[1].attempt().start_timestamp)
        {
            return Err(Error::Integrity(format!(
                "student {student:?} has two attempts at timestamp {}",
                w[0].attempt().start_timestamp
            )));
        }
        sequences.push((
            SequenceKey::Student(student.to_string()),
            seq.into_iter().cloned().collect(),
        ));
    }
    Ok(OrderedSequences {
        mode: SequenceMode::AcrossProblem,
        sequences,
    })
}

/// Dispatches to [`order_within`] or [`order_across`].
pub fn order<R: HasAttempt + Clone>(records: &[R], mode: SequenceMode) -> Result<OrderedSequences<R>> {
    match mode {
        SequenceMode::WithinProblem => order_within(records),
        SequenceMode::AcrossProblem => order_across(records),
    }
}
