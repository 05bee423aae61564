//! Synthetic corpora with known ground truth: ancestral sampling from an
//! HMM, and attempt logs whose labels reproduce a sampled label stream.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::HmmParams;
use crate::ingest::{AttemptRecord, ProblemKind, ProblemMeta, TIME_CAP_MS};
use crate::io::{csv_bytes, fmt_opt};
use crate::labeling::{Outcome, PathwayLabel, N_LABELS};
use crate::stats::AssessmentScores;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthSpec {
    Fixed(usize),
    Uniform { min: usize, max: usize },
}

/// Settings for turning label streams into attempt records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogSettings {
    /// Mean of ln(time_spent ms) per label, in canonical label order.
    pub time_ln_mean: Vec<f64>,
    pub time_ln_sd: f64,
    /// Number of distinct problems available to each student.
    pub problem_pool: usize,
    /// Probability of continuing an older open problem rather than the most
    /// recently touched one, which produces interleaving and delayed replays.
    pub switch_rate: f64,
    pub optimal_steps_min: u32,
    pub optimal_steps_max: u32,
    /// Success probability of the geometric draw for extra steps.
    pub extra_step_p: f64,
    /// Success probability of the geometric draw for hints per attempt.
    pub hint_p: f64,
    /// Idle gap between consecutive attempts, milliseconds.
    pub gap_ms_min: u64,
    pub gap_ms_max: u64,
}

impl Default for LogSettings {
    fn default() -> Self {
        Self {
            time_ln_mean: (0..N_LABELS).map(|i| 9.5 + 0.05 * i as f64).collect(),
            time_ln_sd: 0.8,
            problem_pool: 400,
            switch_rate: 0.2,
            optimal_steps_min: 2,
            optimal_steps_max: 8,
            extra_step_p: 0.5,
            hint_p: 0.7,
            gap_ms_min: 500,
            gap_ms_max: 60_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub truth: HmmParams,
    pub n_students: usize,
    pub length: LengthSpec,
    /// Overridden by the command-line `--seed`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub logs: Option<LogSettings>,
    /// Per-state effect of state share on synthetic post-test scores.
    #[serde(default)]
    pub assessment_effects: Option<Vec<f64>>,
}

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        self.truth.validate()?;
        if self.n_students == 0 {
            return Err(Error::Config("scenario needs at least one student".into()));
        }
        match self.length {
            LengthSpec::Fixed(0) => return Err(Error::Config("sequence length must be >= 1".into())),
            LengthSpec::Uniform { min, max } if min == 0 || min > max => {
                return Err(Error::Config(format!("bad length range {min}..={max}")))
            }
            _ => {}
        }
        if let Some(l) = &self.logs {
            if l.time_ln_mean.len() != N_LABELS {
                return Err(Error::Config("time_ln_mean needs one entry per label".into()));
            }
            if l.optimal_steps_min < 1 || l.optimal_steps_min > l.optimal_steps_max {
                return Err(Error::Config("bad optimal step range".into()));
            }
            if !(0.0..=1.0).contains(&l.switch_rate) {
                return Err(Error::Config("switch_rate must be in [0, 1]".into()));
            }
            if l.gap_ms_min > l.gap_ms_max {
                return Err(Error::Config("bad gap range".into()));
            }
        }
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let s: Self = serde_json::from_slice(bytes)?;
        s.validate()?;
        Ok(s)
    }
}

/// Generator for sub-stream `stream` of `seed`. Each student or sequence
/// gets its own stream, so generation order does not matter.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn categorical(rng: &mut impl Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the cumulative sum: last state with mass
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledSequence {
    pub symbols: Vec<usize>,
    pub states: Vec<usize>,
}

fn sample_one(truth: &HmmParams, len: usize, rng: &mut impl Rng) -> SampledSequence {
    let mut states = Vec::with_capacity(len);
    let mut symbols = Vec::with_capacity(len);
    let mut s = categorical(rng, &truth.pi);
    for t in 0..len {
        if t > 0 {
            s = categorical(rng, &truth.transition[s]);
        }
        states.push(s);
        symbols.push(categorical(rng, &truth.emission[s]));
    }
    SampledSequence { symbols, states }
}

fn draw_len(spec: LengthSpec, rng: &mut impl Rng) -> usize {
    match spec {
        LengthSpec::Fixed(n) => n,
        LengthSpec::Uniform { min, max } => rng.gen_range(min..=max),
    }
}

/// Ancestral sampling: one sequence per student, with its hidden path.
pub fn sample_sequences(scenario: &SimScenario) -> Result<Vec<SampledSequence>> {
    scenario.validate()?;
    Ok((0..scenario.n_students)
        .map(|i| {
            let mut rng = stream_rng(scenario.seed, i as u64);
            let len = draw_len(scenario.length, &mut rng);
            sample_one(&scenario.truth, len, &mut rng)
        })
        .collect())
}

/// Ground truth for one synthetic attempt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRow {
    pub student_id: String,
    pub problem_id: String,
    pub attempt_index: u32,
    pub label: String,
    /// Hidden state that emitted the label; empty for inserted rows.
    pub state: Option<usize>,
    /// Inserted, or relabeled from the sampled label.
    pub repaired: bool,
}

#[derive(Debug, Clone)]
pub struct SyntheticLogs {
    pub records: Vec<AttemptRecord>,
    pub truth: Vec<TruthRow>,
    pub meta: ProblemMeta,
    /// One line per inserted or relabeled attempt.
    pub synthesis_log: Vec<String>,
}

struct OpenProblem {
    id: usize,
    completed: bool,
    last_touch: usize,
}

struct Planned {
    problem: usize,
    label: PathwayLabel,
    state: Option<usize>,
    relabeled: bool,
}

/// Places a label stream onto problems so that labeling the resulting
/// attempts reproduces it. Replay labels with no completed open problem get
/// a completion inserted first; the last attempt on a problem left open at
/// the end is promoted to its `_end` form.
fn plan_student(
    labels: &[(PathwayLabel, usize)],
    settings: &LogSettings,
    student: &str,
    rng: &mut impl Rng,
    log: &mut Vec<String>,
) -> Result<Vec<Planned>> {
    let mut fresh: Vec<usize> = (0..settings.problem_pool).collect();
    fresh.shuffle(rng);
    let mut open: Vec<OpenProblem> = Vec::new();
    let mut plan = Vec::with_capacity(labels.len() + 4);
    let take_fresh = |fresh: &mut Vec<usize>| {
        fresh.pop().ok_or_else(|| {
            Error::Config(format!("student {student}: problem pool of {} exhausted", settings.problem_pool))
        })
    };
    for (step, &(label, state)) in labels.iter().enumerate() {
        let candidates: Vec<usize> = (0..open.len()).filter(|&i| open[i].completed == label.replay).collect();
        let slot = if let Some(&latest) = candidates.iter().max_by_key(|&&i| open[i].last_touch) {
            if candidates.len() > 1 && rng.gen_bool(settings.switch_rate) {
                let others: Vec<usize> = candidates.iter().copied().filter(|&i| i != latest).collect();
                *others.choose(rng).expect("non-empty")
            } else {
                latest
            }
        } else if !label.replay {
            open.push(OpenProblem {
                id: take_fresh(&mut fresh)?,
                completed: false,
                last_touch: step,
            });
            open.len() - 1
        } else {
            let id = take_fresh(&mut fresh)?;
            log.push(format!(
                "student {student}: inserted optimal completion before {label} at position {step}"
            ));
            plan.push(Planned {
                problem: id,
                label: PathwayLabel::new(Outcome::Optimal, false, false),
                state: None,
                relabeled: false,
            });
            open.push(OpenProblem {
                id,
                completed: true,
                last_touch: step,
            });
            open.len() - 1
        };
        let p = &mut open[slot];
        p.last_touch = step;
        plan.push(Planned {
            problem: p.id,
            label,
            state: Some(state),
            relabeled: false,
        });
        if label.outcome != Outcome::Incomplete {
            p.completed = true;
        }
        if label.is_end {
            open.remove(slot);
        }
    }
    for p in open {
        let last = plan.iter_mut().rev().find(|q| q.problem == p.id).expect("open problems were attempted");
        let closing = PathwayLabel::new(last.label.outcome, last.label.replay, true);
        log.push(format!("student {student}: relabeled {} as {closing} to close {}", last.label, problem_id(p.id)));
        last.label = closing;
        last.relabeled = true;
    }
    Ok(plan)
}

pub fn problem_id(i: usize) -> String {
    format!("P{:04}", i + 1)
}

pub fn student_id(i: usize) -> String {
    format!("S{:05}", i + 1)
}

/// Synthesizes attempt records for every student's sampled label stream.
/// The truth HMM must emit over the twelve pathway labels.
pub fn sample_logs(scenario: &SimScenario) -> Result<SyntheticLogs> {
    scenario.validate()?;
    let settings = scenario
        .logs
        .clone()
        .ok_or_else(|| Error::Config("scenario has no log-synthesis settings".into()))?;
    if scenario.truth.n_symbols != N_LABELS {
        return Err(Error::Config(format!(
            "log synthesis needs a {N_LABELS}-symbol model, got {}",
            scenario.truth.n_symbols
        )));
    }
    let mut meta_rng = stream_rng(scenario.seed, u64::MAX);
    let optimal: Vec<u32> = (0..settings.problem_pool)
        .map(|_| meta_rng.gen_range(settings.optimal_steps_min..=settings.optimal_steps_max))
        .collect();
    let mut meta = ProblemMeta::new();
    for (i, &o) in optimal.iter().enumerate() {
        meta.insert(problem_id(i), o)?;
    }
    let extra = Geometric::new(settings.extra_step_p).map_err(|e| Error::Config(e.to_string()))?;
    let hints = Geometric::new(settings.hint_p).map_err(|e| Error::Config(e.to_string()))?;
    let times: Vec<LogNormal<f64>> = settings
        .time_ln_mean
        .iter()
        .map(|&mu| LogNormal::new(mu, settings.time_ln_sd).map_err(|e| Error::Config(e.to_string())))
        .collect::<Result<_>>()?;

    let sequences = sample_sequences(scenario)?;
    let mut out = SyntheticLogs {
        records: Vec::new(),
        truth: Vec::new(),
        meta,
        synthesis_log: Vec::new(),
    };
    for (i, seq) in sequences.iter().enumerate() {
        let sid = student_id(i);
        // separate stream family from sample_sequences
        let mut rng = stream_rng(scenario.seed ^ 0x5EED_0F_1065, i as u64);
        let labels: Vec<(PathwayLabel, usize)> = seq
            .symbols
            .iter()
            .zip(&seq.states)
            .map(|(&sym, &st)| (PathwayLabel::ALL[sym], st))
            .collect();
        let plan = plan_student(&labels, &settings, &sid, &mut rng, &mut out.synthesis_log)?;
        let mut clock: i64 = 1_600_000_000_000 + i as i64 * 1_000;
        let mut attempts_on: BTreeMap<usize, u32> = BTreeMap::new();
        for p in plan {
            let n = attempts_on.entry(p.problem).or_default();
            *n += 1;
            let opt = optimal[p.problem];
            let (goal, steps) = match p.label.outcome {
                Outcome::Optimal => (true, opt),
                Outcome::Suboptimal => (true, opt + 1 + extra.sample(&mut rng) as u32),
                Outcome::Incomplete => (false, 1 + extra.sample(&mut rng) as u32),
            };
            let time = (times[p.label.index()].sample(&mut rng).round() as u64).clamp(1, TIME_CAP_MS);
            let rec = AttemptRecord {
                student_id: sid.clone(),
                problem_id: problem_id(p.problem),
                attempt_index: *n,
                start_timestamp: clock,
                step_count: steps,
                time_spent: time,
                goal_reached: goal,
                hints_requested: hints.sample(&mut rng) as u32,
                problem_kind: ProblemKind::Regular,
            };
            clock += time as i64 + rng.gen_range(settings.gap_ms_min..=settings.gap_ms_max) as i64 + 1;
            out.truth.push(TruthRow {
                student_id: sid.clone(),
                problem_id: rec.problem_id.clone(),
                attempt_index: rec.attempt_index,
                label: p.label.to_string(),
                state: p.state,
                repaired: p.state.is_none() || p.relabeled,
            });
            out.records.push(rec);
        }
    }
    Ok(out)
}

/// Per-student fraction of sampled attempts in each hidden state, in
/// student order. Inserted rows carry no state and are not counted.
pub fn truth_state_shares(truth: &[TruthRow], n_states: usize) -> Vec<(String, Vec<f64>)> {
    let mut shares: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for t in truth {
        if let Some(s) = t.state {
            shares.entry(t.student_id.as_str()).or_insert_with(|| vec![0.0; n_states])[s] += 1.0;
        }
    }
    shares
        .into_iter()
        .map(|(id, mut v)| {
            let n: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= n);
            (id.to_string(), v)
        })
        .collect()
}

/// Synthetic assessment scores: baseline scores are drawn independently and
/// each post score is baseline + Σ effect[s] * share[s] + N(0, 1) noise.
pub fn sample_assessments(
    students: &[(String, Vec<f64>)],
    effects: &[f64],
    seed: u64,
) -> Vec<(String, AssessmentScores)> {
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    students
        .iter()
        .enumerate()
        .map(|(i, (id, share))| {
            let mut rng = stream_rng(seed ^ 0xA55E_55ED, i as u64);
            let shift: f64 = share.iter().zip(effects).map(|(s, e)| s * e).sum();
            let mut base = || rng.gen_range(0.0..4.0);
            let pre = [base(), base(), base()];
            let state5 = 500.0 + 60.0 * noise.sample(&mut rng);
            let post: Vec<f64> = pre.iter().map(|p| p + shift + noise.sample(&mut rng)).collect();
            let scores = AssessmentScores {
                pre_conceptual: Some(pre[0]),
                pre_procedural: Some(pre[1]),
                pre_flexibility: Some(pre[2]),
                pre_math: Some(pre.iter().sum()),
                state_test_5: Some(state5),
                post_conceptual: Some(post[0]),
                post_procedural: Some(post[1]),
                post_flexibility: Some(post[2]),
                post_math: Some(post.iter().sum::<f64>() + noise.sample(&mut rng)),
                state_test_7: Some(state5 + 20.0 * shift + 10.0 * noise.sample(&mut rng)),
            };
            (id.clone(), scores)
        })
        .collect()
}

pub const LOG_COLUMNS: [&str; 9] = [
    "student_id",
    "problem_id",
    "attempt_index",
    "start_timestamp",
    "step_count",
    "time_spent",
    "goal_reached",
    "hints_requested",
    "problem_kind",
];

pub fn records_csv(records: &[AttemptRecord]) -> Result<Vec<u8>> {
    let header = LOG_COLUMNS.map(String::from).to_vec();
    csv_bytes(std::iter::once(header).chain(records.iter().map(|r| {
        vec![
            r.student_id.clone(),
            r.problem_id.clone(),
            r.attempt_index.to_string(),
            r.start_timestamp.to_string(),
            r.step_count.to_string(),
            r.time_spent.to_string(),
            r.goal_reached.to_string(),
            r.hints_requested.to_string(),
            r.problem_kind.to_string(),
        ]
    })))
}

pub fn truth_csv(rows: &[TruthRow]) -> Result<Vec<u8>> {
    let header = ["student_id", "problem_id", "attempt_index", "label", "state", "repaired"]
        .map(String::from)
        .to_vec();
    csv_bytes(std::iter::once(header).chain(rows.iter().map(|r| {
        vec![
            r.student_id.clone(),
            r.problem_id.clone(),
            r.attempt_index.to_string(),
            r.label.clone(),
            r.state.map(|s| s.to_string()).unwrap_or_default(),
            r.repaired.to_string(),
        ]
    })))
}

pub fn meta_csv(meta: &ProblemMeta) -> Result<Vec<u8>> {
    let header = vec!["problem_id".to_string(), "optimal_step_count".to_string()];
    csv_bytes(std::iter::once(header).chain(meta.iter().map(|(p, o)| vec![p.to_string(), o.to_string()])))
}

pub fn assessments_csv(rows: &[(String, AssessmentScores)]) -> Result<Vec<u8>> {
    let header: Vec<String> = std::iter::once("student_id")
        .chain([
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
        ])
        .map(String::from)
        .collect();
    csv_bytes(std::iter::once(header).chain(rows.iter().map(|(id, s)| {
        vec![
            id.clone(),
            fmt_opt(s.pre_conceptual),
            fmt_opt(s.pre_procedural),
            fmt_opt(s.pre_flexibility),
            fmt_opt(s.pre_math),
            fmt_opt(s.state_test_5),
            fmt_opt(s.post_conceptual),
            fmt_opt(s.post_procedural),
            fmt_opt(s.post_flexibility),
            fmt_opt(s.post_math),
            fmt_opt(s.state_test_7),
        ]
    })))
}

/// Reference models used by tests and examples.
pub mod presets {
    use super::*;

    /// Three well-separated states over five symbols.
    pub fn planted_symbol_model() -> HmmParams {
        HmmParams::new(
            vec![0.5, 0.3, 0.2],
            vec![vec![0.80, 0.15, 0.05], vec![0.10, 0.80, 0.10], vec![0.10, 0.10, 0.80]],
            vec![
                vec![0.70, 0.20, 0.05, 0.03, 0.02],
                vec![0.05, 0.10, 0.70, 0.10, 0.05],
                vec![0.02, 0.03, 0.05, 0.20, 0.70],
            ],
        )
        .expect("valid preset")
    }

    /// 500 sequences of length 50 from [`planted_symbol_model`].
    pub fn planted_symbol_scenario(seed: u64) -> SimScenario {
        SimScenario {
            truth: planted_symbol_model(),
            n_students: 500,
            length: LengthSpec::Fixed(50),
            seed,
            logs: None,
            assessment_effects: None,
        }
    }

    fn label_row(weights: &[(&str, f64)]) -> Vec<f64> {
        let mut row = vec![0.0; N_LABELS];
        for &(name, w) in weights {
            let l: PathwayLabel = name.parse().expect("known label");
            row[l.index()] = w;
        }
        row
    }

    /// Three-state model over the twelve labels: incomplete-dominant,
    /// completion-dominant and replay-dominant.
    pub fn planted_label_model() -> HmmParams {
        // replays are only reachable after a completion state, so sampled
        // streams rarely need an inserted completion
        HmmParams::new(
            vec![0.6, 0.4, 0.0],
            vec![vec![0.85, 0.15, 0.0], vec![0.07, 0.78, 0.15], vec![0.05, 0.25, 0.70]],
            vec![
                label_row(&[
                    ("incomplete", 0.55),
                    ("incomplete_end", 0.20),
                    ("sub_optimal_end", 0.15),
                    ("optimal_end", 0.10),
                ]),
                label_row(&[
                    ("incomplete", 0.05),
                    ("sub_optimal", 0.10),
                    ("sub_optimal_end", 0.15),
                    ("optimal", 0.35),
                    ("optimal_end", 0.35),
                ]),
                label_row(&[
                    ("replay_incomplete", 0.15),
                    ("replay_incomplete_end", 0.05),
                    ("replay_sub_optimal", 0.15),
                    ("replay_sub_optimal_end", 0.10),
                    ("replay_optimal", 0.35),
                    ("replay_optimal_end", 0.20),
                ]),
            ],
        )
        .expect("valid preset")
    }

    pub fn planted_label_scenario(n_students: usize, length: LengthSpec, seed: u64) -> SimScenario {
        SimScenario {
            truth: planted_label_model(),
            n_students,
            length,
            seed,
            logs: Some(LogSettings::default()),
            assessment_effects: Some(vec![0.0, 1.5, 3.0]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::presets::*;
    use super::*;
    use crate::ingest::{clean, order_across};
    use crate::labeling::label_attempts;

    fn delta_scenario() -> SimScenario {
        SimScenario {
            truth: HmmParams::new(vec![1.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            n_students: 3,
            length: LengthSpec::Fixed(4),
            seed: 11,
            logs: None,
            assessment_effects: None,
        }
    }

    #[test]
    fn degenerate_chain() {
        let seqs = sample_sequences(&delta_scenario()).unwrap();
        for s in seqs {
            assert_eq!(s.symbols, vec![0; 4]);
            assert_eq!(s.states, vec![0; 4]);
        }
    }

    #[test]
    fn seeded_determinism() {
        let sc = planted_symbol_scenario(4);
        assert_eq!(sample_sequences(&sc).unwrap(), sample_sequences(&sc).unwrap());
        let other = planted_symbol_scenario(5);
        assert_ne!(sample_sequences(&sc).unwrap(), sample_sequences(&other).unwrap());
    }

    #[test]
    fn only_optimal_end_labels() {
        let l = "optimal_end".parse::<PathwayLabel>().unwrap().index();
        let mut row = vec![0.0; N_LABELS];
        row[l] = 1.0;
        let sc = SimScenario {
            truth: HmmParams::new(vec![1.0], vec![vec![1.0]], vec![row]).unwrap(),
            n_students: 4,
            length: LengthSpec::Uniform { min: 3, max: 9 },
            seed: 2,
            logs: Some(LogSettings::default()),
            assessment_effects: None,
        };
        let logs = sample_logs(&sc).unwrap();
        assert!(logs.synthesis_log.is_empty());
        for r in &logs.records {
            assert_eq!(r.attempt_index, 1);
            assert!(r.goal_reached);
            assert_eq!(r.step_count, logs.meta.optimal_step_count(&r.problem_id).unwrap());
        }
    }

    #[test]
    fn synthetic_logs_survive_cleaning_and_relabel() {
        let sc = planted_label_scenario(40, LengthSpec::Uniform { min: 5, max: 60 }, 8);
        let logs = sample_logs(&sc).unwrap();
        let (kept, report) = clean(&logs.records);
        assert_eq!(report.retained, logs.records.len());
        let labeled = label_attempts(&order_across(&kept).unwrap(), &logs.meta).unwrap();
        let mut truth: BTreeMap<(String, String, u32), String> = BTreeMap::new();
        for t in &logs.truth {
            truth.insert((t.student_id.clone(), t.problem_id.clone(), t.attempt_index), t.label.clone());
        }
        assert_eq!(labeled.len(), truth.len());
        for a in &labeled {
            let r = &a.record;
            assert_eq!(truth[&(r.student_id.clone(), r.problem_id.clone(), r.attempt_index)], a.label.as_str());
        }
    }

    #[test]
    fn rejects_wrong_alphabet_for_logs() {
        let mut sc = planted_symbol_scenario(1);
        sc.logs = Some(LogSettings::default());
        assert!(sample_logs(&sc).is_err());
        sc.logs = None;
        assert!(sample_logs(&sc).is_err());
    }

    #[test]
    fn scenario_json_round_trip() {
        let sc = planted_label_scenario(10, LengthSpec::Fixed(5), 3);
        let json = serde_json::to_vec(&sc).unwrap();
        assert_eq!(SimScenario::from_json(&json).unwrap(), sc);
        let minimal = br#"{"truth":{"n_states":1,"n_symbols":2,"pi":[1.0],"transition":[[1.0]],"emission":[[0.5,0.5]]},
            "n_students":2,"length":{"uniform":{"min":1,"max":3}},"seed":1,"logs":{}}"#;
        let parsed = SimScenario::from_json(minimal).unwrap();
        assert_eq!(parsed.logs.unwrap().problem_pool, 400);
    }
}
