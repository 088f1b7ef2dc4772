//! The `rlabm` command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rlabm_core::flu::FluEnv;
use rlabm_core::RngStream;

use crate::analysis::summarize;
use crate::error::{HarnessError, HarnessResult};
use crate::experiments::{self, flu, mg};
use crate::io::{self, Manifest};
use crate::metrics::MetricsTable;
use crate::spec::{Experiment, ExperimentSpec};

#[derive(Debug, Parser)]
#[command(name = "rlabm", version, about = "Run minority-game and influenza vaccination learning experiments")]
pub struct Cli {
    /// Worker threads for parallel trials (default: all cores).
    #[arg(long, global = true, env = "RLABM_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment spec and write its artifacts.
    Run(RunArgs),
    /// Same as `run`; kept as a separate verb for training-only specs.
    Train(RunArgs),
    /// Evaluate a saved policy against fresh environments.
    Eval(EvalArgs),
    /// Expand `--set` grids over a spec into child runs.
    Sweep(SweepArgs),
    /// Aggregate metrics.csv files into one summary CSV.
    Report(ReportArgs),
    /// Check a spec file without running it.
    ValidateConfig(SpecArg),
}

#[derive(Debug, Args)]
pub struct SpecArg {
    #[arg(long)]
    pub spec: PathBuf,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output root; runs go to `<out>/<run-id>/`. Falls back to the spec's
    /// output_dir, then `runs`.
    #[arg(long, env = "RLABM_OUT_DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// Replaces the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Defaults to the spec id.
    #[arg(long)]
    pub run_id: Option<String>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Spec the policy was trained under.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub policy: PathBuf,
    /// Fresh populations (minority game) to evaluate on.
    #[arg(long, default_value_t = 100)]
    pub populations: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub run_id: Option<String>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// `dotted.path=v1,v2,...`; repeat for a grid.
    #[arg(long = "set", required = true)]
    pub sets: Vec<String>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directories, metrics.csv files, or roots containing run
    /// directories.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Write here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Some(n) = cli.threads {
        // Fails only if the pool already exists, e.g. when called twice in
        // one process; the existing pool is then reused.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> HarnessResult<()> {
    match cmd {
        Command::Run(a) | Command::Train(a) => {
            let mut spec = ExperimentSpec::load(&a.spec)?;
            if let Some(s) = a.seed {
                spec.seed = s;
            }
            let run_id = a.run_id.unwrap_or_else(|| spec.id.clone());
            let dir = execute(&spec, &run_id, &out_root(&a.out, &spec))?;
            println!("{}", dir.display());
            Ok(())
        }
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => report(a),
        Command::ValidateConfig(a) => {
            let spec = ExperimentSpec::load(&a.spec)?;
            println!("{}: ok ({}, seed {})", a.spec.display(), spec.experiment.kind(), spec.seed);
            Ok(())
        }
    }
}

fn out_root(out: &OutArgs, spec: &ExperimentSpec) -> PathBuf {
    out.out
        .clone()
        .or_else(|| spec.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Runs `spec` and writes `<root>/<run_id>/{manifest.json, metrics.csv,
/// trace.csv, policy.bin}`. Returns the run directory.
pub fn execute(spec: &ExperimentSpec, run_id: &str, root: &Path) -> HarnessResult<PathBuf> {
    log::info!("running {run_id} ({}, seed {})", spec.experiment.kind(), spec.seed);
    let out = experiments::run(spec, run_id)?;
    let dir = root.join(run_id);
    std::fs::create_dir_all(&dir)?;
    let mut artifacts = vec!["metrics.csv".to_string()];
    io::write_metrics(&dir.join("metrics.csv"), &out.metrics)?;
    if let Some((trace, kind)) = &out.trace {
        io::write_trace(&dir.join("trace.csv"), trace, *kind)?;
        artifacts.push("trace.csv".into());
    }
    if !out.policies.is_empty() {
        io::write_policies(&dir.join("policy.bin"), &out.policies)?;
        artifacts.push("policy.bin".into());
    }
    let manifest = Manifest {
        run_id: run_id.to_string(),
        kind: spec.experiment.kind().to_string(),
        seed: spec.seed,
        trial_seeds: out.trial_seeds,
        spec: serde_json::to_value(spec)?,
        summary: out.summary,
        artifacts,
        version: env!("CARGO_PKG_VERSION").to_string(),
        created: now(),
    };
    io::write_manifest(&dir.join("manifest.json"), &manifest)?;
    Ok(dir)
}

fn eval(a: EvalArgs) -> HarnessResult<()> {
    let mut spec = ExperimentSpec::load(&a.spec)?;
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    let policies = io::read_policies(&a.policy)?;
    let policy = policies
        .first()
        .ok_or_else(|| HarnessError::config(format!("{} holds no policy", a.policy.display())))?;
    let run_id = a.run_id.unwrap_or_else(|| format!("{}-eval", spec.id));
    let mut summary = serde_json::Map::new();
    let metrics = match &spec.experiment {
        Experiment::MgSingleFixed(s) => eval_mg(&s.game, policy, a.populations, spec.seed, &run_id, &mut summary)?,
        Experiment::MgResampled(s) => eval_mg(&s.game, policy, a.populations, spec.seed, &run_id, &mut summary)?,
        Experiment::FluSingle(s) => {
            // Rebuild each replicate's world as training did, without training.
            let seeds = experiments::derive_seeds(spec.seed, "flu/single", s.replicates);
            let mut t = MetricsTable::new(&run_id);
            for (r, &sd) in seeds.iter().enumerate() {
                let mut st = RngStream::new(sd, "replicate");
                let net = flu::network(&s.flu, &mut st.fork("network")?)?;
                let burn_seed = st.next_seed();
                let node = st.below(net.nodes());
                let _init = st.next_seed();
                let _train = st.next_seed();
                let eval_seed = st.next_seed();
                let (model, _) = flu::burned_in(&s.flu, net, burn_seed)?;
                let env = FluEnv::new(model, vec![node], s.episode_seasons)?;
                let ev = flu::evaluate(&env, std::slice::from_ref(policy), s.eval_seasons, eval_seed)?;
                let twin = flu::evaluate_twin(&env, s.eval_seasons, eval_seed)?;
                t.push(r, 0, "uninfected_rate", ev.uninfected);
                t.push(r, 0, "default_uninfected_rate", twin);
                t.push(r, 0, "advantage", ev.uninfected - twin);
            }
            t
        }
        other => {
            return Err(HarnessError::config(format!(
                "eval supports mg_single_fixed, mg_resampled and flu_single specs, not {}",
                other.kind()
            )))
        }
    };
    let dir = out_root(&a.out, &spec).join(&run_id);
    std::fs::create_dir_all(&dir)?;
    io::write_metrics(&dir.join("metrics.csv"), &metrics)?;
    let manifest = Manifest {
        run_id: run_id.clone(),
        kind: format!("{}/eval", spec.experiment.kind()),
        seed: spec.seed,
        trial_seeds: vec![],
        spec: serde_json::json!({ "spec": spec, "policy": a.policy, "populations": a.populations }),
        summary,
        artifacts: vec!["metrics.csv".into()],
        version: env!("CARGO_PKG_VERSION").to_string(),
        created: now(),
    };
    io::write_manifest(&dir.join("manifest.json"), &manifest)?;
    println!("{}", dir.display());
    Ok(())
}

fn eval_mg(
    game: &rlabm_core::mg::GameConfig,
    policy: &rlabm_core::nn::MlpParams,
    populations: usize,
    seed: u64,
    run_id: &str,
    summary: &mut serde_json::Map<String, serde_json::Value>,
) -> HarnessResult<MetricsTable> {
    if policy.layers().first().map(|l| l.spec.inputs) != Some(game.rl_window) {
        return Err(HarnessError::config("policy input width does not match the spec's rl_window"));
    }
    let t = mg::generalization(game, policy, populations, seed, run_id, 0)?;
    let w = t.values("gen_win_rate");
    summary.insert("mean_win_rate".into(), crate::analysis::mean(&w).into());
    summary.insert("below_0.9".into(), w.iter().filter(|&&x| x < 0.9).count().into());
    Ok(t)
}

/// Splits `path=v1,v2` into the path and its values.
pub fn parse_set(s: &str) -> HarnessResult<(String, Vec<String>)> {
    let (path, values) = s
        .split_once('=')
        .ok_or_else(|| HarnessError::config(format!("--set {s:?}: expected path=v1,v2,...")))?;
    let values: Vec<String> = values.split(',').map(str::to_string).collect();
    if path.is_empty() || values.iter().any(String::is_empty) {
        return Err(HarnessError::config(format!("--set {s:?}: empty path or value")));
    }
    Ok((path.to_string(), values))
}

/// Cartesian product of the `--set` grids, first axis slowest.
pub fn expand_grid(sets: &[(String, Vec<String>)]) -> Vec<Vec<(String, String)>> {
    let mut combos = vec![Vec::new()];
    for (path, values) in sets {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push((path.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    combos
}

fn sweep(a: SweepArgs) -> HarnessResult<()> {
    let base = ExperimentSpec::load(&a.spec)?;
    let sets = a.sets.iter().map(|s| parse_set(s)).collect::<HarnessResult<Vec<_>>>()?;
    let combos = expand_grid(&sets);
    // Validate every child before running any.
    let children = combos
        .iter()
        .map(|c| {
            c.iter()
                .try_fold(base.clone(), |spec, (p, v)| spec.with_override(p, v))
        })
        .collect::<HarnessResult<Vec<_>>>()?;
    let root = out_root(&a.out, &base);
    std::fs::create_dir_all(&root)?;
    let mut index = csv::Writer::from_path(root.join(format!("{}-sweep.csv", base.id)))?;
    let mut header = vec!["run_id".to_string()];
    header.extend(sets.iter().map(|s| s.0.clone()));
    index.write_record(&header)?;
    for (k, (child, combo)) in children.iter().zip(&combos).enumerate() {
        let run_id = format!("{}-{k:03}", base.id);
        let dir = execute(child, &run_id, &root)?;
        let mut rec = vec![run_id];
        rec.extend(combo.iter().map(|c| c.1.clone()));
        index.write_record(&rec)?;
        println!("{}", dir.display());
    }
    index.flush()?;
    Ok(())
}

fn metrics_files(inputs: &[PathBuf]) -> HarnessResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_file() {
            out.push(p.clone());
        } else if p.join("metrics.csv").is_file() {
            out.push(p.join("metrics.csv"));
        } else if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path().join("metrics.csv")))
                .filter(|m| m.is_file())
                .collect();
            found.sort();
            if found.is_empty() {
                return Err(HarnessError::MissingFile(p.join("metrics.csv")));
            }
            out.extend(found);
        } else {
            return Err(HarnessError::MissingFile(p.clone()));
        }
    }
    Ok(out)
}

/// One row per (trial, epoch, metric) with n, mean, std, min and max over
/// all input runs.
pub fn aggregate(tables: &[MetricsTable]) -> Vec<(usize, usize, String, crate::analysis::Summary)> {
    let mut groups: BTreeMap<(usize, usize, String), Vec<f64>> = BTreeMap::new();
    for t in tables {
        for r in t.rows() {
            groups.entry((r.trial, r.epoch, r.metric.clone())).or_default().push(r.value);
        }
    }
    groups
        .into_iter()
        .map(|((trial, epoch, metric), xs)| (trial, epoch, metric, summarize(&xs)))
        .collect()
}

fn report(a: ReportArgs) -> HarnessResult<()> {
    let files = metrics_files(&a.inputs)?;
    let tables = files.iter().map(|f| io::read_metrics(f)).collect::<HarnessResult<Vec<_>>>()?;
    let rows = aggregate(&tables);
    let sink: Box<dyn std::io::Write> = match &a.out {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["trial", "epoch", "metric", "n", "mean", "std", "min", "max"])?;
    for (trial, epoch, metric, s) in rows {
        w.write_record([
            trial.to_string(),
            epoch.to_string(),
            metric,
            s.n.to_string(),
            s.mean.to_string(),
            s.std.to_string(),
            s.min.to_string(),
            s.max.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
