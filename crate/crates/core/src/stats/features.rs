//! Per-student feature tables and the regression suites built on them.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::DecodedTrajectory;
use crate::ingest::{OrderedSequences, SequenceMode};
use crate::io::{csv_bytes, fmt_f64, fmt_opt};
use crate::labeling::{LabeledAttempt, ReplayCategory};

use super::bh::bh_adjust;
use super::ols::{ols_fit, RegressionResult};

/// Assessment scores for one student; any score may be missing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AssessmentScores {
    pub pre_conceptual: Option<f64>,
    pub pre_procedural: Option<f64>,
    pub pre_flexibility: Option<f64>,
    pub pre_math: Option<f64>,
    pub state_test_5: Option<f64>,
    pub post_conceptual: Option<f64>,
    pub post_procedural: Option<f64>,
    pub post_flexibility: Option<f64>,
    pub post_math: Option<f64>,
    pub state_test_7: Option<f64>,
}

const SCORE_COLUMNS: [&str; 10] = [
    "pre_conceptual",
    "pre_procedural",
    "pre_flexibility",
    "pre_math",
    "state_test_5",
    "post_conceptual",
    "post_procedural",
    "post_flexibility",
    "post_math",
    "state_test_7",
];

impl AssessmentScores {
    fn slot(&mut self, column: &str) -> Option<&mut Option<f64>> {
        Some(match column {
            "pre_conceptual" => &mut self.pre_conceptual,
            "pre_procedural" => &mut self.pre_procedural,
            "pre_flexibility" => &mut self.pre_flexibility,
            "pre_math" => &mut self.pre_math,
            "state_test_5" => &mut self.state_test_5,
            "post_conceptual" => &mut self.post_conceptual,
            "post_procedural" => &mut self.post_procedural,
            "post_flexibility" => &mut self.post_flexibility,
            "post_math" => &mut self.post_math,
            "state_test_7" => &mut self.state_test_7,
            _ => return None,
        })
    }
}

/// Assessment table keyed by student id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assessments(pub BTreeMap<String, AssessmentScores>);

impl Assessments {
    pub fn from_rows(rows: impl IntoIterator<Item = (String, AssessmentScores)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (id, scores) in rows {
            if map.insert(id.clone(), scores).is_some() {
                return Err(Error::Integrity(format!("duplicate assessment row for student {id:?}")));
            }
        }
        Ok(Self(map))
    }

    /// Reads a CSV with a `student_id` column and any subset of the score
    /// columns; empty cells are missing values.
    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let id_col = headers
            .iter()
            .position(|h| h == "student_id")
            .ok_or_else(|| Error::Schema("assessments: missing column \"student_id\"".into()))?;
        let score_cols: Vec<(usize, String)> = headers
            .iter()
            .enumerate()
            .filter(|(_, h)| SCORE_COLUMNS.contains(h))
            .map(|(i, h)| (i, h.to_string()))
            .collect();
        let mut rows = Vec::new();
        for (n, row) in rdr.records().enumerate() {
            let row = row?;
            let mut scores = AssessmentScores::default();
            for (i, name) in &score_cols {
                let cell = row.get(*i).unwrap_or("");
                if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
                    continue;
                }
                let v: f64 = cell.parse().map_err(|_| {
                    Error::Schema(format!("assessments line {}: {name} = {cell:?} is not a number", n + 2))
                })?;
                *scores.slot(name).expect("known column") = Some(v);
            }
            rows.push((row[id_col].to_string(), scores));
        }
        Self::from_rows(rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentFeatures {
    pub student_id: String,
    pub state_pct: Vec<f64>,
    pub immediate_replay_pct: f64,
    pub delayed_replay_pct: f64,
    pub non_replay_pct: f64,
    pub problem_count: usize,
    pub total_hints: u64,
    pub scores: AssessmentScores,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub n_states: usize,
    pub reference_state: usize,
    pub students: Vec<StudentFeatures>,
}

/// Joins decoded across-problem trajectories, labeled attempts and
/// assessments into one row per student. Students without an assessment row
/// keep all scores missing and drop out of every model.
pub fn build_features(
    trajectories: &[DecodedTrajectory],
    labeled: &OrderedSequences<LabeledAttempt>,
    assessments: &Assessments,
    reference_state: usize,
    n_states: usize,
) -> Result<FeatureTable> {
    if labeled.mode != SequenceMode::AcrossProblem {
        return Err(Error::Config("features need across-problem trajectories".into()));
    }
    if reference_state >= n_states {
        return Err(Error::Config(format!(
            "reference state {reference_state} outside 0..{n_states}"
        )));
    }
    if trajectories.len() != labeled.sequences.len() {
        return Err(Error::Integrity("trajectories and labeled sequences differ in count".into()));
    }
    let mut students = Vec::with_capacity(trajectories.len());
    for (tr, (key, seq)) in trajectories.iter().zip(&labeled.sequences) {
        if &tr.key != key || tr.states.len() != seq.len() {
            return Err(Error::Integrity(format!("trajectory {} is not aligned with its attempts", tr.key)));
        }
        if seq.is_empty() {
            return Err(Error::Empty(format!("student {key} has no attempts")));
        }
        let n = seq.len() as f64;
        let mut state_pct = vec![0.0; n_states];
        for &s in &tr.states {
            if s >= n_states {
                return Err(Error::InvalidParams(format!("state {s} outside 0..{n_states}")));
            }
            state_pct[s] += 1.0;
        }
        state_pct.iter_mut().for_each(|p| *p /= n);
        let count = |c: ReplayCategory| seq.iter().filter(|a| a.replay_category == c).count() as f64;
        let mut problems: Vec<&str> = seq.iter().map(|a| a.record.problem_id.as_str()).collect();
        problems.sort_unstable();
        problems.dedup();
        let student_id = key.student_id().to_string();
        students.push(StudentFeatures {
            scores: assessments.0.get(&student_id).copied().unwrap_or_default(),
            student_id,
            state_pct,
            immediate_replay_pct: count(ReplayCategory::ImmediateReplay) / n,
            delayed_replay_pct: count(ReplayCategory::DelayedReplay) / n,
            non_replay_pct: count(ReplayCategory::NonReplay) / n,
            problem_count: problems.len(),
            total_hints: seq.iter().map(|a| u64::from(a.record.hints_requested)).sum(),
        });
    }
    Ok(FeatureTable {
        n_states,
        reference_state,
        students,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomeVar {
    PostConceptual,
    PostProcedural,
    PostFlexibility,
    PostMath,
    StateTest7,
}

impl OutcomeVar {
    pub const ALL: [OutcomeVar; 5] = [
        OutcomeVar::PostConceptual,
        OutcomeVar::PostProcedural,
        OutcomeVar::PostFlexibility,
        OutcomeVar::PostMath,
        OutcomeVar::StateTest7,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OutcomeVar::PostConceptual => "post_conceptual",
            OutcomeVar::PostProcedural => "post_procedural",
            OutcomeVar::PostFlexibility => "post_flexibility",
            OutcomeVar::PostMath => "post_math",
            OutcomeVar::StateTest7 => "state_test_7",
        }
    }

    /// The matched baseline measure entered as a covariate.
    pub fn covariate_name(self) -> &'static str {
        match self {
            OutcomeVar::PostConceptual => "pre_conceptual",
            OutcomeVar::PostProcedural => "pre_procedural",
            OutcomeVar::PostFlexibility => "pre_flexibility",
            OutcomeVar::PostMath => "pre_math",
            OutcomeVar::StateTest7 => "state_test_5",
        }
    }

    fn response(self, s: &AssessmentScores) -> Option<f64> {
        match self {
            OutcomeVar::PostConceptual => s.post_conceptual,
            OutcomeVar::PostProcedural => s.post_procedural,
            OutcomeVar::PostFlexibility => s.post_flexibility,
            OutcomeVar::PostMath => s.post_math,
            OutcomeVar::StateTest7 => s.state_test_7,
        }
    }

    fn covariate(self, s: &AssessmentScores) -> Option<f64> {
        match self {
            OutcomeVar::PostConceptual => s.pre_conceptual,
            OutcomeVar::PostProcedural => s.pre_procedural,
            OutcomeVar::PostFlexibility => s.pre_flexibility,
            OutcomeVar::PostMath => s.pre_math,
            OutcomeVar::StateTest7 => s.state_test_5,
        }
    }
}

impl FromStr for OutcomeVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OutcomeVar::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown outcome {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Suite {
    /// Non-reference state percentages as predictors.
    HmmStates,
    /// Immediate and delayed replay proportions (non-replay is the reference).
    ReplayTiming,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hmm-states" | "hmm_states" => Ok(Suite::HmmStates),
            "replay" | "replay-timing" | "replay_timing" => Ok(Suite::ReplayTiming),
            other => Err(Error::Config(format!("unknown suite {other:?}"))),
        }
    }
}

/// Which p-values are pooled for Benjamini-Hochberg adjustment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BhScope {
    /// Within each model's predictor p-values.
    #[default]
    PerModel,
    /// Across all predictor p-values of the suite.
    Suite,
}

impl FromStr for BhScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model" | "per-model" => Ok(BhScope::PerModel),
            "suite" => Ok(BhScope::Suite),
            other => Err(Error::Config(format!("unknown BH scope {other:?}"))),
        }
    }
}

impl FeatureTable {
    /// Predictor names (intercept first) and the matching row builder.
    fn design(&self, suite: Suite, outcome: OutcomeVar) -> (Vec<String>, impl Fn(&StudentFeatures, f64) -> Vec<f64> + '_) {
        let mut names = vec!["intercept".to_string()];
        let states: Vec<usize> = (0..self.n_states).filter(|&s| s != self.reference_state).collect();
        match suite {
            Suite::HmmStates => names.extend(states.iter().map(|s| format!("state_{s}_pct"))),
            Suite::ReplayTiming => {
                names.push("immediate_replay_pct".into());
                names.push("delayed_replay_pct".into());
            }
        }
        names.push("total_hints".into());
        names.push("problem_count".into());
        names.push(outcome.covariate_name().into());
        let row = move |f: &StudentFeatures, cov: f64| {
            let mut r = vec![1.0];
            match suite {
                Suite::HmmStates => r.extend(states.iter().map(|&s| f.state_pct[s])),
                Suite::ReplayTiming => {
                    r.push(f.immediate_replay_pct);
                    r.push(f.delayed_replay_pct);
                }
            }
            r.push(f.total_hints as f64);
            r.push(f.problem_count as f64);
            r.push(cov);
            r
        };
        (names, row)
    }
}

/// Fits one OLS model per outcome with listwise deletion, then applies BH
/// adjustment to the non-intercept p-values according to `scope`.
pub fn run_model_suite(
    features: &FeatureTable,
    suite: Suite,
    outcomes: &[OutcomeVar],
    scope: BhScope,
) -> Result<Vec<RegressionResult>> {
    let suite_name = match suite {
        Suite::HmmStates => "hmm_states",
        Suite::ReplayTiming => "replay_timing",
    };
    let mut results = Vec::with_capacity(outcomes.len());
    for &outcome in outcomes {
        let (names, build) = features.design(suite, outcome);
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for f in &features.students {
            if let (Some(y), Some(cov)) = (outcome.response(&f.scores), outcome.covariate(&f.scores)) {
                rows.extend(build(f, cov));
                ys.push(y);
            }
        }
        let n = ys.len();
        let x = DMatrix::from_row_slice(n, names.len(), &rows);
        let y = DVector::from_vec(ys);
        let mut fit = ols_fit(&format!("{suite_name}:{}", outcome.name()), &names, &x, &y)?;
        fit.n_dropped = features.students.len() - n;
        results.push(fit);
    }
    apply_bh(&mut results, scope)?;
    Ok(results)
}

/// Fills `p_adj` for every non-intercept predictor.
pub fn apply_bh(results: &mut [RegressionResult], scope: BhScope) -> Result<()> {
    match scope {
        BhScope::PerModel => {
            for r in results.iter_mut() {
                let adj = bh_adjust(&r.p_raw[1..])?;
                r.p_adj = std::iter::once(None).chain(adj.into_iter().map(Some)).collect();
            }
        }
        BhScope::Suite => {
            let pooled: Vec<f64> = results.iter().flat_map(|r| r.p_raw[1..].iter().copied()).collect();
            let mut adj = bh_adjust(&pooled)?.into_iter();
            for r in results.iter_mut() {
                let k = r.p_raw.len() - 1;
                r.p_adj = std::iter::once(None).chain(adj.by_ref().take(k).map(Some)).collect();
            }
        }
    }
    Ok(())
}

/// One row per (model, predictor): model, predictor, b, se, t, p_raw,
/// p_adj, r2, n.
pub fn results_csv(results: &[RegressionResult]) -> Result<Vec<u8>> {
    let mut rows = vec![["model", "predictor", "b", "se", "t", "p_raw", "p_adj", "r2", "n"]
        .map(String::from)
        .to_vec()];
    for r in results {
        for j in 0..r.predictors.len() {
            rows.push(vec![
                r.model.clone(),
                r.predictors[j].clone(),
                fmt_f64(r.coefficients[j]),
                fmt_f64(r.std_errors[j]),
                fmt_f64(r.t_stats[j]),
                fmt_f64(r.p_raw[j]),
                fmt_opt(r.p_adj[j]),
                fmt_f64(r.r2),
                r.n.to_string(),
            ]);
        }
    }
    csv_bytes(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{order_across, AttemptRecord, ProblemKind, SequenceKey};
    use crate::labeling::{Outcome, PathwayLabel};

    fn la(student: &str, problem: &str, ts: i64, cat: ReplayCategory) -> LabeledAttempt {
        LabeledAttempt {
            record: AttemptRecord {
                student_id: student.into(),
                problem_id: problem.into(),
                attempt_index: ts as u32,
                start_timestamp: ts,
                step_count: 1,
                time_spent: 100,
                goal_reached: true,
                hints_requested: 2,
                problem_kind: ProblemKind::Regular,
            },
            label: PathwayLabel::new(Outcome::Optimal, cat != ReplayCategory::NonReplay, false),
            replay_category: cat,
        }
    }

    #[test]
    fn replay_proportions_and_reference_omission() {
        use ReplayCategory::*;
        let attempts = vec![la("s", "P1", 1, NonReplay), la("s", "P1", 2, ImmediateReplay), la("s", "P2", 3, NonReplay), la("s", "P2", 4, NonReplay)];
        let labeled = order_across(&attempts[..3]).unwrap();
        let tr = vec![DecodedTrajectory { key: SequenceKey::Student("s".into()), states: vec![0, 1, 1] }];
        let ft = build_features(&tr, &labeled, &Assessments::default(), 0, 2).unwrap();
        let f = &ft.students[0];
        assert!((f.immediate_replay_pct - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(f.delayed_replay_pct, 0.0);
        assert!((f.non_replay_pct - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f.problem_count, 2);
        assert_eq!(f.total_hints, 6);

        let labeled = order_across(&attempts).unwrap();
        let tr = vec![DecodedTrajectory { key: SequenceKey::Student("s".into()), states: vec![2, 2, 4, 4] }];
        let ft = build_features(&tr, &labeled, &Assessments::default(), 2, 5).unwrap();
        let (names, build) = ft.design(Suite::HmmStates, OutcomeVar::PostMath);
        assert!(!names.contains(&"state_2_pct".to_string()));
        let idx = names.iter().position(|n| n == "state_4_pct").unwrap();
        assert_eq!(build(&ft.students[0], 0.0)[idx], 0.5);
        assert!(build_features(&tr, &labeled, &Assessments::default(), 5, 5).is_err());
    }

    #[test]
    fn duplicate_assessment_rows() {
        let csv = "student_id,post_math\na,1\na,2\n";
        assert!(matches!(Assessments::from_reader(csv.as_bytes()), Err(Error::Integrity(_))));
        let ok = Assessments::from_reader("student_id,post_math,pre_math\na,1,\nb,NA,3\n".as_bytes()).unwrap();
        assert_eq!(ok.0["a"].post_math, Some(1.0));
        assert_eq!(ok.0["a"].pre_math, None);
        assert_eq!(ok.0["b"].post_math, None);
    }

    #[test]
    fn design_column_counts() {
        let ft = FeatureTable { n_states: 4, reference_state: 1, students: vec![] };
        let (names, _) = ft.design(Suite::HmmStates, OutcomeVar::PostConceptual);
        assert_eq!(names.len(), 7);
        let (names, _) = ft.design(Suite::ReplayTiming, OutcomeVar::StateTest7);
        assert_eq!(
            names,
            vec!["intercept", "immediate_replay_pct", "delayed_replay_pct", "total_hints", "problem_count", "state_test_5"]
        );
    }
}
