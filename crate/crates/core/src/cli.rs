//! Command-line front end. Every subcommand reads its inputs, runs one
//! pipeline stage and commits all of its outputs together.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hmm::{
    baum_welch, decode_sequences, join_paths, load_paths, paths_csv, select_states, state_summaries, summary_csv,
    symbol_sequences, FitConfig, ModelFile,
};
use crate::ingest::{
    clean_indices, load_logs, order, order_across, renumber_attempts, AttemptRecord, ColumnMapping, IngestConfig,
    ProblemMeta, SequenceMode,
};
use crate::io::{csv_bytes, OutputSet};
use crate::labeling::{label_attempts, load_labeled, LabeledAttempt, N_LABELS};
use crate::markov::{estimate_transitions, HeatmapKind};
use crate::simulate::{assessments_csv, meta_csv, records_csv, sample_assessments, sample_logs, truth_csv, truth_state_shares, SimScenario};
use crate::stats::{build_features, results_csv, run_model_suite, Assessments, BhScope, OutcomeVar, Suite};

#[derive(Debug, Parser)]
#[command(name = "pathtrace", version, about = "Latent problem-solving pathways from attempt logs")]
struct Cli {
    /// Seed for every randomized step; required by `hmm select`, `hmm fit`
    /// and `simulate`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = all cores). Results do not depend on this.
    #[arg(long, global = true, env = "PATHTRACE_THREADS")]
    threads: Option<usize>,

    /// Print failures as a JSON object on stderr.
    #[arg(long, global = true)]
    json_errors: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Apply the cleaning rules and renumber attempts.
    Clean(CleanArgs),
    /// Append pathway labels and replay categories.
    Label(LabelArgs),
    /// First-order transition matrices between labels.
    Markov(MarkovArgs),
    /// Hidden Markov model selection, fitting, decoding and summaries.
    #[command(subcommand)]
    Hmm(HmmCommand),
    /// Regress outcome scores on decoded-state or replay features.
    Regress(RegressArgs),
    /// Generate a synthetic corpus from a scenario file.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct CleanArgs {
    #[arg(long)]
    logs: PathBuf,
    #[arg(long)]
    meta: PathBuf,
    /// Column mapping and student exclusions (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Debug, Args)]
struct LabelArgs {
    #[arg(long)]
    clean: PathBuf,
    #[arg(long)]
    meta: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MarkovArgs {
    #[arg(long)]
    labeled: PathBuf,
    #[arg(long, value_parser = parse_mode)]
    mode: SequenceMode,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_prob: PathBuf,
    #[arg(long)]
    out_time: PathBuf,
    #[arg(long)]
    out_counts: PathBuf,
}

#[derive(Debug, Args)]
struct FitOptions {
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 1e-10)]
    prob_floor: f64,
}

impl FitOptions {
    fn config(&self, seed: u64) -> FitConfig {
        FitConfig {
            max_iter: self.max_iter,
            tol: self.tol,
            n_restarts: self.restarts,
            seed,
            prob_floor: self.prob_floor,
        }
    }
}

#[derive(Debug, Subcommand)]
enum HmmCommand {
    /// Choose the state count by cross-validated held-out BIC.
    Select {
        #[arg(long)]
        labeled: PathBuf,
        #[arg(long, value_parser = parse_mode)]
        mode: SequenceMode,
        #[arg(long, default_value_t = 2)]
        smin: usize,
        #[arg(long, default_value_t = 8)]
        smax: usize,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[command(flatten)]
        fit: FitOptions,
        /// Report path; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a model with a fixed state count.
    Fit {
        #[arg(long)]
        labeled: PathBuf,
        #[arg(long, value_parser = parse_mode)]
        mode: SequenceMode,
        #[arg(long)]
        states: usize,
        #[command(flatten)]
        fit: FitOptions,
        #[arg(long)]
        out: PathBuf,
    },
    /// Viterbi paths for every sequence.
    Decode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        labeled: PathBuf,
        /// Must match the model's mode when given.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<SequenceMode>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-state attempt, student, time and run-length summaries.
    Summarize {
        #[arg(long)]
        paths: PathBuf,
        #[arg(long)]
        labeled: PathBuf,
        #[arg(long, value_parser = parse_mode, default_value = "across")]
        mode: SequenceMode,
        /// State count; defaults to the largest decoded state + 1.
        #[arg(long)]
        states: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RegressArgs {
    /// Across-problem paths from `hmm decode`.
    #[arg(long)]
    paths: PathBuf,
    #[arg(long)]
    labeled: PathBuf,
    #[arg(long)]
    assessments: PathBuf,
    /// `hmm-states` or `replay`.
    #[arg(long, value_parser = parse_suite)]
    suite: Suite,
    /// State left out of the share predictors.
    #[arg(long)]
    reference: usize,
    /// State count; inferred from the paths when omitted.
    #[arg(long)]
    states: Option<usize>,
    /// Pool p-values for adjustment per `model` or across the whole `suite`.
    #[arg(long, value_parser = parse_scope, default_value = "model")]
    bh_scope: BhScope,
    /// Comma-separated outcome subset; all five by default.
    #[arg(long, value_delimiter = ',')]
    outcomes: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out_logs: PathBuf,
    #[arg(long)]
    out_truth: PathBuf,
    #[arg(long)]
    out_meta: Option<PathBuf>,
    #[arg(long)]
    out_assessments: Option<PathBuf>,
}

fn parse_mode(s: &str) -> std::result::Result<SequenceMode, String> {
    s.parse()
}

fn parse_suite(s: &str) -> std::result::Result<Suite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_scope(s: &str) -> std::result::Result<BhScope, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let json_errors = args.iter().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            if json_errors {
                let msg = e.render().to_string();
                report_json("usage", msg.trim(), None);
            } else {
                eprint!("{e}");
            }
            return 2;
        }
    };
    let name = cli.command.name();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            if cli.json_errors {
                report_json(e.kind(), &e.to_string(), Some(name));
            } else {
                eprintln!("pathtrace {name}: {e}");
            }
            1
        }
    }
}

fn report_json(kind: &str, message: &str, command: Option<&str>) {
    #[derive(Serialize)]
    struct Diagnostic<'a> {
        error: &'a str,
        message: &'a str,
        #[serde(skip_serializing_if = "Option::is_none")]
        command: Option<&'a str>,
    }
    let d = Diagnostic {
        error: kind,
        message,
        command,
    };
    eprintln!("{}", serde_json::to_string(&d).unwrap_or_default());
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Clean(_) => "clean",
            Command::Label(_) => "label",
            Command::Markov(_) => "markov",
            Command::Hmm(HmmCommand::Select { .. }) => "hmm select",
            Command::Hmm(HmmCommand::Fit { .. }) => "hmm fit",
            Command::Hmm(HmmCommand::Decode { .. }) => "hmm decode",
            Command::Hmm(HmmCommand::Summarize { .. }) => "hmm summarize",
            Command::Regress(_) => "regress",
            Command::Simulate(_) => "simulate",
        }
    }

    fn inputs(&self) -> Vec<(&'static str, &Path)> {
        let mut v: Vec<(&'static str, &Path)> = Vec::new();
        match self {
            Command::Clean(a) => {
                v.push(("--logs", &a.logs));
                v.push(("--meta", &a.meta));
                if let Some(c) = &a.config {
                    v.push(("--config", c));
                }
            }
            Command::Label(a) => {
                v.push(("--clean", &a.clean));
                v.push(("--meta", &a.meta));
                if let Some(c) = &a.config {
                    v.push(("--config", c));
                }
            }
            Command::Markov(a) => {
                v.push(("--labeled", &a.labeled));
                if let Some(c) = &a.config {
                    v.push(("--config", c));
                }
            }
            Command::Hmm(HmmCommand::Select { labeled, .. }) | Command::Hmm(HmmCommand::Fit { labeled, .. }) => {
                v.push(("--labeled", labeled));
            }
            Command::Hmm(HmmCommand::Decode { model, labeled, .. }) => {
                v.push(("--model", model));
                v.push(("--labeled", labeled));
            }
            Command::Hmm(HmmCommand::Summarize { paths, labeled, .. }) => {
                v.push(("--paths", paths));
                v.push(("--labeled", labeled));
            }
            Command::Regress(a) => {
                v.push(("--paths", &a.paths));
                v.push(("--labeled", &a.labeled));
                v.push(("--assessments", &a.assessments));
            }
            Command::Simulate(a) => v.push(("--scenario", &a.scenario)),
        }
        v
    }

    fn outputs(&self) -> Vec<(&'static str, &Path)> {
        let mut v: Vec<(&'static str, &Path)> = Vec::new();
        match self {
            Command::Clean(a) => {
                v.push(("--out", &a.out));
                v.push(("--report", &a.report));
            }
            Command::Label(a) => v.push(("--out", &a.out)),
            Command::Markov(a) => {
                v.push(("--out-prob", &a.out_prob));
                v.push(("--out-time", &a.out_time));
                v.push(("--out-counts", &a.out_counts));
            }
            Command::Hmm(HmmCommand::Select { out, .. }) => {
                if let Some(o) = out {
                    v.push(("--out", o));
                }
            }
            Command::Hmm(HmmCommand::Fit { out, .. })
            | Command::Hmm(HmmCommand::Decode { out, .. })
            | Command::Hmm(HmmCommand::Summarize { out, .. }) => v.push(("--out", out)),
            Command::Regress(a) => v.push(("--out", &a.out)),
            Command::Simulate(a) => {
                v.push(("--out-logs", &a.out_logs));
                v.push(("--out-truth", &a.out_truth));
                if let Some(p) = &a.out_meta {
                    v.push(("--out-meta", p));
                }
                if let Some(p) = &a.out_assessments {
                    v.push(("--out-assessments", p));
                }
            }
        }
        v
    }

    fn needs_seed(&self) -> bool {
        matches!(
            self,
            Command::Hmm(HmmCommand::Select { .. }) | Command::Hmm(HmmCommand::Fit { .. }) | Command::Simulate(_)
        )
    }
}

/// Up-front argument checks: all missing inputs in one error, no output
/// path used twice or equal to an input.
fn preflight(cmd: &Command, seed: Option<u64>) -> Result<()> {
    let missing: Vec<String> = cmd
        .inputs()
        .into_iter()
        .filter(|(_, p)| !p.is_file())
        .map(|(flag, p)| format!("{flag} {}", p.display()))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingInputs(missing));
    }
    let mut seen: BTreeMap<PathBuf, &str> = BTreeMap::new();
    for (flag, p) in cmd.inputs().into_iter().chain(cmd.outputs()) {
        if let Some(prev) = seen.insert(p.to_path_buf(), flag) {
            if cmd.outputs().iter().any(|(f, _)| *f == flag) {
                return Err(Error::Config(format!(
                    "conflicting flags: {prev} and {flag} both name {}",
                    p.display()
                )));
            }
        }
    }
    if cmd.needs_seed() && seed.is_none() {
        return Err(Error::Config(format!("{} requires an explicit --seed", cmd.name())));
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    preflight(&cli.command, cli.seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    let seed = cli.seed.unwrap_or_default();
    pool.install(|| match &cli.command {
        Command::Clean(a) => cmd_clean(a),
        Command::Label(a) => cmd_label(a),
        Command::Markov(a) => cmd_markov(a),
        Command::Hmm(h) => cmd_hmm(h, seed),
        Command::Regress(a) => cmd_regress(a),
        Command::Simulate(a) => cmd_simulate(a, seed),
    })
}

fn ingest_config(path: Option<&PathBuf>) -> Result<IngestConfig> {
    path.map(IngestConfig::load).transpose().map(Option::unwrap_or_default)
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Schema(format!("missing column {name:?}")))
}

fn check_meta(meta: &ProblemMeta, records: &[AttemptRecord]) -> Result<()> {
    match meta.missing_for(records).into_iter().next() {
        Some(p) => Err(Error::MissingMeta(p.to_string())),
        None => Ok(()),
    }
}

fn cmd_clean(a: &CleanArgs) -> Result<()> {
    let cfg = ingest_config(a.config.as_ref())?;
    let logs = load_logs(&a.logs, &cfg.mapping)?.into_strict()?;
    let meta = ProblemMeta::load(&a.meta)?;
    let (kept, report) = clean_indices(&logs.records, &cfg.excluded_students);
    let mut records: Vec<AttemptRecord> = kept.iter().map(|&i| logs.records[i].clone()).collect();
    check_meta(&meta, &records)?;
    renumber_attempts(&mut records)?;
    let attempt_col = column_index(&logs.headers, &cfg.mapping.attempt_index)?;
    let rows = std::iter::once(logs.headers.iter().map(String::from).collect::<Vec<_>>()).chain(
        kept.iter().zip(&records).map(|(&i, r)| {
            let mut row: Vec<String> = logs.raw[i].iter().map(String::from).collect();
            row[attempt_col] = r.attempt_index.to_string();
            row
        }),
    );
    let mut out = OutputSet::new();
    out.stage(&a.out, &csv_bytes(rows)?)?;
    out.stage(&a.report, &json_bytes(&report)?)?;
    out.commit()
}

fn cmd_label(a: &LabelArgs) -> Result<()> {
    let cfg = ingest_config(a.config.as_ref())?;
    let logs = load_logs(&a.clean, &cfg.mapping)?.into_strict()?;
    let meta = ProblemMeta::load(&a.meta)?;
    let labeled = label_attempts(&order_across(&logs.records)?, &meta)?;
    let by_key: BTreeMap<(&str, &str, u32), &LabeledAttempt> = labeled
        .iter()
        .map(|l| {
            let r = &l.record;
            ((r.student_id.as_str(), r.problem_id.as_str(), r.attempt_index), l)
        })
        .collect();
    for h in ["label", "replay_category"] {
        if logs.headers.iter().any(|c| c == h) {
            return Err(Error::Schema(format!("input already has a {h:?} column")));
        }
    }
    let mut header: Vec<String> = logs.headers.iter().map(String::from).collect();
    header.push("label".into());
    header.push("replay_category".into());
    let rows = std::iter::once(header).chain(logs.records.iter().zip(&logs.raw).map(|(r, raw)| {
        let l = by_key[&(r.student_id.as_str(), r.problem_id.as_str(), r.attempt_index)];
        let mut row: Vec<String> = raw.iter().map(String::from).collect();
        row.push(l.label.to_string());
        row.push(l.replay_category.to_string());
        row
    }));
    let mut out = OutputSet::new();
    out.stage(&a.out, &csv_bytes(rows)?)?;
    out.commit()
}

fn cmd_markov(a: &MarkovArgs) -> Result<()> {
    let cfg = ingest_config(a.config.as_ref())?;
    let (_, labeled) = load_labeled(&a.labeled, &cfg.mapping)?;
    let stats = estimate_transitions(&order(&labeled, a.mode)?);
    let mut out = OutputSet::new();
    out.stage(&a.out_prob, &stats.heatmap_csv(HeatmapKind::Probability)?)?;
    out.stage(&a.out_time, &stats.heatmap_csv(HeatmapKind::MeanLogTime)?)?;
    out.stage(&a.out_counts, &stats.heatmap_csv(HeatmapKind::Count)?)?;
    out.commit()
}

fn labeled_symbols(path: &Path, mode: SequenceMode) -> Result<Vec<Vec<usize>>> {
    let (_, labeled) = load_labeled(path, &ColumnMapping::default())?;
    let seqs = symbol_sequences(&order(&labeled, mode)?);
    if seqs.is_empty() {
        return Err(Error::Empty(format!("{} has no attempts", path.display())));
    }
    Ok(seqs)
}

fn cmd_hmm(cmd: &HmmCommand, seed: u64) -> Result<()> {
    match cmd {
        HmmCommand::Select {
            labeled,
            mode,
            smin,
            smax,
            folds,
            fit,
            out,
        } => {
            let seqs = labeled_symbols(labeled, *mode)?;
            let report = select_states(&seqs, N_LABELS, *smin..=*smax, *folds, &fit.config(seed))?;
            let bytes = json_bytes(&report)?;
            match out {
                Some(path) => {
                    let mut set = OutputSet::new();
                    set.stage(path, &bytes)?;
                    set.commit()
                }
                None => {
                    print!("{}", String::from_utf8_lossy(&bytes));
                    Ok(())
                }
            }
        }
        HmmCommand::Fit {
            labeled,
            mode,
            states,
            fit,
            out,
        } => {
            let seqs = labeled_symbols(labeled, *mode)?;
            let report = baum_welch(&seqs, *states, N_LABELS, &fit.config(seed))?;
            let mut set = OutputSet::new();
            set.stage(out, &ModelFile::from_fit(&report, *mode).to_json()?)?;
            set.commit()
        }
        HmmCommand::Decode {
            model,
            labeled,
            mode,
            out,
        } => {
            let model = ModelFile::load(model)?;
            if let Some(m) = mode {
                if *m != model.mode {
                    return Err(Error::Config(format!(
                        "conflicting flags: --mode {m:?} but the model was fitted with {:?}",
                        model.mode
                    )));
                }
            }
            let params = model.params()?;
            let (_, attempts) = load_labeled(labeled, &ColumnMapping::default())?;
            let seqs = order(&attempts, model.mode)?;
            let paths = decode_sequences(&params, &seqs)?;
            let mut set = OutputSet::new();
            set.stage(out, &paths_csv(&paths, &seqs)?)?;
            set.commit()
        }
        HmmCommand::Summarize {
            paths,
            labeled,
            mode,
            states,
            out,
        } => {
            let rows = load_paths(paths)?;
            let (_, attempts) = load_labeled(labeled, &ColumnMapping::default())?;
            let n_states = state_count(*states, rows.iter().map(|r| r.state))?;
            let (seqs, trajectories) = join_paths(&rows, &attempts, *mode)?;
            let summaries = state_summaries(&trajectories, &seqs, n_states)?;
            let mut set = OutputSet::new();
            set.stage(out, &summary_csv(&summaries)?)?;
            set.commit()
        }
    }
}

fn state_count(given: Option<usize>, states: impl Iterator<Item = usize>) -> Result<usize> {
    let observed = states.max().map(|m| m + 1);
    match (given, observed) {
        (Some(s), Some(o)) if o > s => Err(Error::Config(format!("--states {s} but paths use state {}", o - 1))),
        (Some(s), _) => Ok(s),
        (None, Some(o)) => Ok(o),
        (None, None) => Err(Error::Empty("paths file has no rows".into())),
    }
}

fn cmd_regress(a: &RegressArgs) -> Result<()> {
    let rows = load_paths(&a.paths)?;
    let (_, attempts) = load_labeled(&a.labeled, &ColumnMapping::default())?;
    let assessments = Assessments::load(&a.assessments)?;
    let n_states = state_count(a.states, rows.iter().map(|r| r.state))?;
    let (seqs, trajectories) = join_paths(&rows, &attempts, SequenceMode::AcrossProblem)?;
    let features = build_features(&trajectories, &seqs, &assessments, a.reference, n_states)?;
    let outcomes: Vec<OutcomeVar> = if a.outcomes.is_empty() {
        OutcomeVar::ALL.to_vec()
    } else {
        a.outcomes.iter().map(|o| o.parse()).collect::<Result<_>>()?
    };
    let results = run_model_suite(&features, a.suite, &outcomes, a.bh_scope)?;
    let mut set = OutputSet::new();
    set.stage(&a.out, &results_csv(&results)?)?;
    set.commit()
}

fn cmd_simulate(a: &SimulateArgs, seed: u64) -> Result<()> {
    let bytes = std::fs::read(&a.scenario).map_err(|e| Error::io(&a.scenario, e))?;
    let mut scenario = SimScenario::from_json(&bytes)?;
    scenario.seed = seed;
    let logs = sample_logs(&scenario)?;
    let mut set = OutputSet::new();
    set.stage(&a.out_logs, &records_csv(&logs.records)?)?;
    set.stage(&a.out_truth, &truth_csv(&logs.truth)?)?;
    if let Some(p) = &a.out_meta {
        set.stage(p, &meta_csv(&logs.meta)?)?;
    }
    if let Some(p) = &a.out_assessments {
        let n_states = scenario.truth.n_states;
        let students = truth_state_shares(&logs.truth, n_states);
        let effects = scenario.assessment_effects.clone().unwrap_or_else(|| vec![0.0; n_states]);
        let scores = sample_assessments(&students, &effects, seed);
        set.stage(p, &assessments_csv(&scores)?)?;
    }
    set.commit()
}

