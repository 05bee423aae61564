//! Independent oracles and fixtures shared by the integration tests. Nothing
//! here calls into the inference or statistics code it is used to check.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pathtrace::hmm::HmmParams;
use pathtrace::ingest::{AttemptRecord, ProblemKind, ProblemMeta};
use pathtrace::simulate::{presets, LengthSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_row(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = v.iter().sum();
    v.into_iter().map(|x| x / total).collect()
}

pub fn random_model(rng: &mut impl Rng, s: usize, m: usize) -> HmmParams {
    HmmParams::new(
        random_row(rng, s),
        (0..s).map(|_| random_row(rng, s)).collect(),
        (0..s).map(|_| random_row(rng, m)).collect(),
    )
    .unwrap()
}

/// Every length-`t` state path, last position varying fastest.
pub fn all_paths(s: usize, t: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..s.pow(t as u32)).map(move |mut code| {
        let mut path = vec![0; t];
        for slot in path.iter_mut().rev() {
            *slot = code % s;
            code /= s;
        }
        path
    })
}

/// Joint probability of a state path and an observation sequence.
pub fn path_probability(p: &HmmParams, path: &[usize], obs: &[usize]) -> f64 {
    let mut prob = p.pi[path[0]] * p.emission[path[0]][obs[0]];
    for t in 1..obs.len() {
        prob *= p.transition[path[t - 1]][path[t]] * p.emission[path[t]][obs[t]];
    }
    prob
}

/// P(obs) summed over every hidden path.
pub fn brute_force_likelihood(p: &HmmParams, obs: &[usize]) -> f64 {
    all_paths(p.n_states, obs.len()).map(|path| path_probability(p, &path, obs)).sum()
}

/// Most probable path. Paths within a relative 1e-12 of the maximum count
/// as tied; among ties the path that is smallest when read from the last
/// position backwards wins, which is the order produced by preferring the
/// lower state at the end and at every back-pointer.
pub fn brute_force_viterbi(p: &HmmParams, obs: &[usize]) -> Vec<usize> {
    let scored: Vec<(f64, Vec<usize>)> = all_paths(p.n_states, obs.len())
        .map(|path| (path_probability(p, &path, obs), path))
        .collect();
    let max = scored.iter().map(|(prob, _)| *prob).fold(0.0, f64::max);
    scored
        .into_iter()
        .filter(|(prob, _)| *prob >= max * (1.0 - 1e-12))
        .map(|(_, path)| path)
        .min_by(|a, b| a.iter().rev().cmp(b.iter().rev()))
        .unwrap()
}

/// Posterior P(state_t = i | obs) by enumeration.
pub fn brute_force_posteriors(p: &HmmParams, obs: &[usize]) -> Vec<Vec<f64>> {
    let mut post = vec![vec![0.0; p.n_states]; obs.len()];
    let mut total = 0.0;
    for path in all_paths(p.n_states, obs.len()) {
        let prob = path_probability(p, &path, obs);
        total += prob;
        for (t, &s) in path.iter().enumerate() {
            post[t][s] += prob;
        }
    }
    post.iter_mut().flatten().for_each(|x| *x /= total);
    post
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// `perm[i]` is the fitted state matched to true state `i`, minimizing the
/// total L1 distance between emission rows over all permutations.
pub fn align_states(truth: &HmmParams, fitted: &HmmParams) -> Vec<usize> {
    permutations(truth.n_states)
        .into_iter()
        .min_by(|a, b| {
            let cost = |perm: &Vec<usize>| -> f64 {
                (0..truth.n_states).map(|i| l1(&truth.emission[i], &fitted.emission[perm[i]])).sum()
            };
            cost(a).total_cmp(&cost(b))
        })
        .unwrap()
}

/// Largest per-row L1 error of the transition and emission matrices after
/// alignment.
pub fn recovery_errors(truth: &HmmParams, fitted: &HmmParams) -> (f64, f64) {
    let perm = align_states(truth, fitted);
    let s = truth.n_states;
    let mut a_err: f64 = 0.0;
    let mut b_err: f64 = 0.0;
    for i in 0..s {
        let row: Vec<f64> = (0..s).map(|j| fitted.transition[perm[i]][perm[j]]).collect();
        a_err = a_err.max(l1(&truth.transition[i], &row));
        b_err = b_err.max(l1(&truth.emission[i], &fitted.emission[perm[i]]));
    }
    (a_err, b_err)
}

fn gamma_half_integer(x2: u32) -> f64 {
    // Gamma(x2 / 2) by the recurrence from Gamma(1/2) or Gamma(1)
    let (mut g, mut k) = if x2 % 2 == 0 { (1.0, 2) } else { (std::f64::consts::PI.sqrt(), 1) };
    while k < x2 {
        g *= k as f64 / 2.0;
        k += 2;
    }
    g
}

/// Student-t density for integer degrees of freedom.
pub fn t_density(t: f64, df: u32) -> f64 {
    let nu = df as f64;
    let c = gamma_half_integer(df + 1) / ((nu * std::f64::consts::PI).sqrt() * gamma_half_integer(df));
    c * (1.0 + t * t / nu).powf(-(nu + 1.0) / 2.0)
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Two-sided tail probability P(|T| >= |t|) by quadrature of the density.
pub fn t_two_sided_quadrature(t: f64, df: u32) -> f64 {
    let central = integrate(&|x| t_density(x, df), 0.0, t.abs(), 1e-14);
    (1.0 - 2.0 * central).max(0.0)
}

pub fn attempt(student: &str, problem: &str, index: u32, ts: i64, goal: bool, steps: u32) -> AttemptRecord {
    AttemptRecord {
        student_id: student.into(),
        problem_id: problem.into(),
        attempt_index: index,
        start_timestamp: ts,
        step_count: steps,
        time_spent: 15_000,
        goal_reached: goal,
        hints_requested: 0,
        problem_kind: ProblemKind::Regular,
    }
}

pub fn fixture_meta() -> ProblemMeta {
    let mut meta = ProblemMeta::new();
    for (p, o) in [("P1", 3), ("P2", 4), ("P3", 2), ("P4", 5), ("P5", 2), ("P6", 2)] {
        meta.insert(p, o).unwrap();
    }
    meta
}

/// One student's chronological attempts with labels and replay categories
/// worked out by hand from the definitions. The first ten rows stand alone
/// as a fixture; the last three add the two labels ten rows cannot reach.
pub fn hand_labeled_fixture() -> Vec<(AttemptRecord, &'static str, &'static str)> {
    vec![
        // P1: failed try before any completion is a reset
        (attempt("S1", "P1", 1, 1_000, false, 2), "incomplete", "non_replay"),
        (attempt("S1", "P1", 2, 2_000, true, 3), "optimal", "non_replay"),
        (attempt("S1", "P1", 3, 3_000, false, 1), "replay_incomplete", "immediate_replay"),
        (attempt("S1", "P2", 1, 4_000, true, 6), "sub_optimal", "non_replay"),
        (attempt("S1", "P1", 4, 5_000, true, 5), "replay_sub_optimal", "delayed_replay"),
        (attempt("S1", "P1", 5, 6_000, true, 3), "replay_optimal", "immediate_replay"),
        (attempt("S1", "P2", 2, 7_000, true, 4), "replay_optimal_end", "delayed_replay"),
        (attempt("S1", "P3", 1, 8_000, false, 1), "incomplete_end", "non_replay"),
        (attempt("S1", "P1", 6, 9_000, false, 2), "replay_incomplete_end", "delayed_replay"),
        (attempt("S1", "P4", 1, 10_000, true, 5), "optimal_end", "non_replay"),
        (attempt("S1", "P5", 1, 11_000, true, 3), "sub_optimal_end", "non_replay"),
        (attempt("S1", "P6", 1, 12_000, true, 2), "optimal", "non_replay"),
        (attempt("S1", "P6", 2, 13_000, true, 4), "replay_sub_optimal_end", "immediate_replay"),
    ]
}

pub fn run_pathtrace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathtrace"))
        .args(args)
        .env_remove("PATHTRACE_THREADS")
        .output()
        .unwrap()
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = run_pathtrace(args);
    assert!(
        out.status.success(),
        "pathtrace {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn path_in(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

pub fn files_in(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

pub fn write_planted_scenario(dir: &Path, n_students: usize, length: usize) -> String {
    let sc = presets::planted_label_scenario(n_students, LengthSpec::Fixed(length), 0);
    let path = path_in(dir, "scenario.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&sc).unwrap()).unwrap();
    path
}

/// Every pipeline stage from a planted scenario; returns the output bytes.
pub fn pipeline(d: &Path, threads: &str) -> Vec<(String, Vec<u8>)> {
    let sc = write_planted_scenario(d, 200, 40);
    let f = |n: &str| path_in(d, n);
    let t = threads;
    run_ok(&[
        "--seed", "7", "--threads", t, "simulate", "--scenario", &sc, "--out-logs", &f("logs.csv"), "--out-truth",
        &f("truth.csv"), "--out-meta", &f("meta.csv"), "--out-assessments", &f("assess.csv"),
    ]);
    run_ok(&["--threads", t, "clean", "--logs", &f("logs.csv"), "--meta", &f("meta.csv"), "--out", &f("clean.csv"), "--report", &f("report.json")]);
    run_ok(&["--threads", t, "label", "--clean", &f("clean.csv"), "--meta", &f("meta.csv"), "--out", &f("labeled.csv")]);
    run_ok(&[
        "--threads", t, "markov", "--labeled", &f("labeled.csv"), "--mode", "within", "--out-prob", &f("prob.csv"),
        "--out-time", &f("time.csv"), "--out-counts", &f("counts.csv"),
    ]);
    run_ok(&[
        "--seed", "7", "--threads", t, "hmm", "select", "--labeled", &f("labeled.csv"), "--mode", "across",
        "--smin", "2", "--smax", "4", "--folds", "3", "--restarts", "2", "--out", &f("select.json"),
    ]);
    run_ok(&[
        "--seed", "7", "--threads", t, "hmm", "fit", "--labeled", &f("labeled.csv"), "--mode", "across", "--states",
        "3", "--out", &f("model.json"),
    ]);
    run_ok(&["--threads", t, "hmm", "decode", "--model", &f("model.json"), "--labeled", &f("labeled.csv"), "--out", &f("paths.csv")]);
    run_ok(&["--threads", t, "hmm", "summarize", "--paths", &f("paths.csv"), "--labeled", &f("labeled.csv"), "--out", &f("summary.csv")]);
    for suite in ["hmm-states", "replay"] {
        run_ok(&[
            "--threads", t, "regress", "--paths", &f("paths.csv"), "--labeled", &f("labeled.csv"), "--assessments",
            &f("assess.csv"), "--suite", suite, "--reference", "0", "--out", &f(&format!("{suite}.csv")),
        ]);
    }
    files_in(d)
        .into_iter()
        .filter(|path| path.file_name().unwrap() != "scenario.json")
        .map(|path| (path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path).unwrap()))
        .collect()
}
