//! The `cdiff` command line: train, sample, sweep, check, report.
//!
//! Exit codes: 0 success, 1 validation or check failure, 2 usage error.
//! Every command that writes files finishes by writing a manifest holding the
//! argument vector, so rerunning those arguments reproduces the outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::bench::{run_sweep, summarize, train_policy, write_sweep_csv, EpisodeRecord, Policy, SweepResult, TaskFamily};
use crate::compose::{validate_spec, CompositionEntry, CompositionMode, CompositionSpec};
use crate::error::Error;
use crate::models::{load_checkpoint, GaussianDataScore, ScoreModel, TrainConfig};
use crate::oracles::all_oracles;
use crate::report::{point_moments, read_samples_csv, scatter_svg, write_samples_csv, write_trace_csv, ScatterStyle};
use crate::sampler::{sample_composed, sample_composed_traced, SamplerConfig, Solver};
use crate::schedule::{NoiseSchedule, DEFAULT_BETA_END, DEFAULT_BETA_START};
use crate::trajectory::Condition;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "cdiff", version, about = "Compose diffusion policies by weighted noise-estimate summation")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Seed for every random draw of the command.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for outputs and the manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a per-modality denoiser on a synthetic task family.
    Train(TrainArgs),
    /// Sample from one model or a composition of several.
    Sample(SampleArgs),
    /// Sweep the MCDP weight between two trained policies.
    Sweep(SweepArgs),
    /// Run the closed-form oracle suite.
    Check(CheckArgs),
    /// Render scatter plots and a summary from samples or a sweep.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub family: String,
    #[arg(long)]
    pub modality: String,
    #[arg(long, default_value_t = 20_000)]
    pub steps: usize,
    /// Checkpoint path, relative to --out-dir.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Length T of the linear noise schedule.
    #[arg(long, default_value_t = crate::schedule::DEFAULT_NUM_STEPS)]
    pub diffusion_steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Mcdp,
    Cfg,
    Energy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Ancestral,
    Ddim,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// `gauss:<mean-csv>:<std>[:T]` or a checkpoint path; repeat per model.
    #[arg(long = "model", required = true)]
    pub models: Vec<String>,
    /// Comma-separated weights, one per model.
    #[arg(long, allow_hyphen_values = true)]
    pub weights: Option<String>,
    /// A single weight; repeat once per model.
    #[arg(long = "weight", allow_hyphen_values = true)]
    pub weight: Vec<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Mcdp)]
    pub mode: ModeArg,
    /// Unconditional model for cfg mode.
    #[arg(long)]
    pub uncond: Option<String>,
    /// Shared guidance exponent filling every cfg weight.
    #[arg(long)]
    pub guidance: Option<f64>,
    /// `<modality>:<f1,f2,...>` or `-` for none; repeat once per model.
    #[arg(long = "cond", allow_hyphen_values = true)]
    pub conds: Vec<String>,
    #[arg(long, default_value_t = 1000)]
    pub chains: usize,
    #[arg(long, value_enum, default_value_t = SolverArg::Ancestral)]
    pub solver: SolverArg,
    #[arg(long, default_value_t = 0.0)]
    pub eta: f64,
    /// Also write every intermediate state to trace.csv.
    #[arg(long)]
    pub trace: bool,
    /// Samples file name inside --out-dir.
    #[arg(long, default_value = "samples.csv")]
    pub out: String,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub family: String,
    #[arg(long)]
    pub ckpt1: PathBuf,
    #[arg(long)]
    pub ckpt2: PathBuf,
    /// `start:stop:step` or a comma list of w1 values.
    #[arg(long, default_value = "0.1:0.9:0.1")]
    pub weights: String,
    #[arg(long, default_value_t = 100)]
    pub episodes: usize,
    #[arg(long, default_value = "0,1,2,3,4")]
    pub seeds: String,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    /// Print oracle names and exit.
    #[arg(long)]
    pub list: bool,
    /// Run only the named oracle; repeatable.
    #[arg(long)]
    pub only: Vec<String>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Samples CSV; repeat for several weight settings.
    #[arg(long = "samples")]
    pub samples: Vec<PathBuf>,
    /// Annotation for the matching --samples file.
    #[arg(long = "label")]
    pub labels: Vec<String>,
    /// Directory written by `cdiff sweep`.
    #[arg(long)]
    pub sweep_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Failure(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(Error::Io(e))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    args: &'a [String],
    config: serde_json::Value,
    seeds: Vec<u64>,
    outputs: Vec<String>,
    tool_version: &'static str,
    wall_clock_seconds: f64,
}

struct Run<'a> {
    command: &'static str,
    args: &'a [String],
    out_dir: PathBuf,
    outputs: Vec<PathBuf>,
    start: Instant,
}

impl Run<'_> {
    fn write(&mut self, name: impl AsRef<Path>, contents: &str) -> CliResult<PathBuf> {
        let path = self.out_dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    fn finish(self, manifest_path: PathBuf, config: serde_json::Value, seeds: Vec<u64>) -> CliResult<()> {
        let m = RunManifest {
            command: self.command,
            args: self.args,
            config,
            seeds,
            outputs: self.outputs.iter().map(|p| p.display().to_string()).collect(),
            tool_version: env!("CARGO_PKG_VERSION"),
            wall_clock_seconds: self.start.elapsed().as_secs_f64(),
        };
        let mut text = serde_json::to_string_pretty(&m).map_err(Error::from)?;
        text.push('\n');
        fs::write(manifest_path, text)?;
        Ok(())
    }
}

/// Parses `args` (without the program name), runs the command and returns the exit code.
pub fn run(args: &[String]) -> i32 {
    let argv = std::iter::once("cdiff".to_string()).chain(args.iter().cloned());
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let outcome = match cli.threads {
        Some(0) => Err(usage("--threads must be at least 1")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli, args)),
            Err(e) => Err(CliError::Failure(Error::InvalidParameter(e.to_string()))),
        },
        None => dispatch(&cli, args),
    };
    match outcome {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Failure(e)) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(cli: &Cli, args: &[String]) -> CliResult<i32> {
    let run = |command| Run {
        command,
        args,
        out_dir: cli.out_dir.clone(),
        outputs: Vec::new(),
        start: Instant::now(),
    };
    match &cli.command {
        Command::Train(a) => cmd_train(cli, a, run("train")),
        Command::Sample(a) => cmd_sample(cli, a, run("sample")),
        Command::Sweep(a) => cmd_sweep(a, run("sweep")),
        Command::Check(a) => cmd_check(a),
        Command::Report(a) => cmd_report(a, run("report")),
    }
}

fn cmd_train(cli: &Cli, a: &TrainArgs, mut run: Run<'_>) -> CliResult<i32> {
    let family = TaskFamily::by_name(&a.family).map_err(|e| usage(e.to_string()))?;
    family.modality_index(&a.modality).map_err(|e| usage(e.to_string()))?;
    let config = TrainConfig {
        seed: cli.seed,
        steps: a.steps,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        ..TrainConfig::default()
    };
    let schedule = NoiseSchedule::linear(a.diffusion_steps, DEFAULT_BETA_START, DEFAULT_BETA_END).map_err(|e| usage(e.to_string()))?;
    let ckpt = train_policy(&family, &a.modality, &schedule, &config, |step, loss| {
        if step > 0 && step % 1000 == 0 {
            eprintln!("step {step}: loss {loss:.5}");
        }
    })?;
    let text = ckpt.to_json()?;
    let path = run.write(&a.out, &text)?;
    println!(
        "trained {} modality {} for {} steps: final loss {}",
        family.name,
        a.modality,
        a.steps,
        ckpt.meta().final_loss.map_or("n/a".into(), |l| format!("{l:.5}"))
    );
    let manifest = PathBuf::from(format!("{}.manifest.json", path.display()));
    let config = json!({
        "family": family,
        "modality": a.modality,
        "steps": a.steps,
        "batch_size": a.batch_size,
        "learning_rate": a.lr,
        "schedule": schedule.descriptor(),
        "final_loss": ckpt.meta().final_loss,
    });
    run.finish(manifest, config, vec![cli.seed])?;
    Ok(EXIT_OK)
}

/// Parses a model URI: `gauss:<mean-csv>:<std>[:T]` or a checkpoint path.
pub fn parse_model(uri: &str) -> CliResult<Arc<dyn ScoreModel>> {
    if let Some(rest) = uri.strip_prefix("gauss:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if !(2..=3).contains(&parts.len()) {
            return Err(usage(format!("model {uri:?}: expected gauss:<mean-csv>:<std>[:T]")));
        }
        let mean = parse_floats(parts[0]).map_err(|e| usage(format!("model {uri:?}: {e}")))?;
        let std: f64 = parts[1]
            .parse()
            .map_err(|_| usage(format!("model {uri:?}: bad std {:?}", parts[1])))?;
        let steps = match parts.get(2) {
            Some(t) => t.parse().map_err(|_| usage(format!("model {uri:?}: bad step count {t:?}")))?,
            None => crate::schedule::DEFAULT_NUM_STEPS,
        };
        let schedule = NoiseSchedule::linear(steps, DEFAULT_BETA_START, DEFAULT_BETA_END)?;
        return Ok(Arc::new(GaussianDataScore::new(mean, std, schedule).map_err(|e| usage(format!("model {uri:?}: {e}")))?));
    }
    Ok(Arc::new(load_checkpoint(uri)?))
}

fn parse_floats(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad number {v:?}")))
        .collect()
}

fn parse_condition(s: &str) -> CliResult<Option<Condition>> {
    if s == "-" {
        return Ok(None);
    }
    let (id, feats) = s
        .split_once(':')
        .ok_or_else(|| usage(format!("condition {s:?}: expected <modality>:<f1,f2,...> or -")))?;
    let features = if feats.is_empty() { Vec::new() } else { parse_floats(feats).map_err(|e| usage(format!("condition {s:?}: {e}")))? };
    Ok(Some(Condition::new(id, features).map_err(|e| usage(e.to_string()))?))
}

fn resolve_weights(a: &SampleArgs) -> CliResult<Vec<f64>> {
    let n = a.models.len();
    let weights = match (&a.weights, a.weight.is_empty()) {
        (Some(_), false) => return Err(usage("use either --weights or --weight, not both")),
        (Some(list), true) => parse_floats(list).map_err(|e| usage(format!("--weights: {e}")))?,
        (None, false) => a.weight.clone(),
        (None, true) if n == 1 || a.guidance.is_some() => vec![a.guidance.unwrap_or(1.0); n],
        (None, true) => return Err(usage(format!("{n} models need --weights with {n} values"))),
    };
    if weights.len() != n {
        return Err(usage(format!("{} weights given for {n} models", weights.len())));
    }
    Ok(weights)
}

fn cmd_sample(cli: &Cli, a: &SampleArgs, mut run: Run<'_>) -> CliResult<i32> {
    let weights = resolve_weights(a)?;
    let models = a.models.iter().map(|m| parse_model(m)).collect::<CliResult<Vec<_>>>()?;
    let conds: Vec<Option<Condition>> = match a.conds.len() {
        0 => vec![None; models.len()],
        k if k == models.len() => a.conds.iter().map(|c| parse_condition(c)).collect::<CliResult<_>>()?,
        k => return Err(usage(format!("{k} --cond values given for {} models", models.len()))),
    };
    let entries: Vec<CompositionEntry> = models
        .iter()
        .zip(conds)
        .zip(&weights)
        .map(|((m, c), w)| CompositionEntry::new(m.clone(), c, *w))
        .collect();
    let mode = match a.mode {
        ModeArg::Mcdp => CompositionMode::Mcdp,
        ModeArg::Cfg => CompositionMode::Cfg,
        ModeArg::Energy => CompositionMode::Energy,
    };
    let unconditional = a.uncond.as_deref().map(parse_model).transpose()?;
    let mut spec = CompositionSpec { entries, mode, unconditional, guidance_exponent: None };
    if let (Some(g), CompositionMode::Cfg) = (a.guidance, mode) {
        spec = spec.with_guidance_exponent(g);
    }
    validate_spec(&spec).map_err(Error::Validation)?;
    let solver = match a.solver {
        SolverArg::Ancestral => Solver::Ancestral,
        SolverArg::Ddim => Solver::Ddim { eta: a.eta },
    };
    let schedule = spec.schedule().expect("validated spec has entries").clone();
    let config = SamplerConfig::new(schedule, cli.seed, a.chains).with_solver(solver);
    let samples = if a.trace {
        let (samples, traces) = sample_composed_traced(&spec, &config)?;
        let trace_text = write_trace_csv(&traces)?;
        let samples_text = write_samples_csv(&samples)?;
        run.write(&a.out, &samples_text)?;
        run.write("trace.csv", &trace_text)?;
        samples
    } else {
        let samples = sample_composed(&spec, &config)?;
        run.write(&a.out, &write_samples_csv(&samples)?)?;
        samples
    };
    let dims = samples[0].len();
    let n = samples.len() as f64;
    let means: Vec<f64> = (0..dims).map(|d| samples.iter().map(|s| s.values()[d]).sum::<f64>() / n).collect();
    println!("{} chains; column means {:?}", samples.len(), means);
    let config = json!({
        "models": a.models,
        "weights": weights,
        "mode": mode.to_string(),
        "uncond": a.uncond,
        "conds": a.conds,
        "chains": a.chains,
        "solver": format!("{solver:?}"),
        "schedule_id": config.schedule.id().to_string(),
        "models_resolved": spec.entries.iter().map(|e| e.model.label()).collect::<Vec<_>>(),
    });
    let manifest = run.out_dir.join("manifest.json");
    run.finish(manifest, config, vec![cli.seed])?;
    Ok(EXIT_OK)
}

/// `start:stop:step` (inclusive, rounded to 10 decimals) or a comma list.
pub fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let grid = match parts.as_slice() {
        [start, stop, step] => {
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| usage(format!("grid {spec:?}: bad number {s:?}")));
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || stop < start {
                return Err(usage(format!("grid {spec:?}: need step > 0 and stop >= start")));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|k| ((start + k as f64 * step) * 1e10).round() / 1e10).collect()
        }
        [list] => parse_floats(list).map_err(|e| usage(format!("grid {spec:?}: {e}")))?,
        _ => return Err(usage(format!("grid {spec:?}: expected start:stop:step or a comma list"))),
    };
    if let Some(w) = grid.iter().find(|w| !(0.0..=1.0).contains(*w)) {
        return Err(usage(format!("grid {spec:?}: weight {w} outside [0, 1]")));
    }
    Ok(grid)
}

fn cmd_sweep(a: &SweepArgs, mut run: Run<'_>) -> CliResult<i32> {
    let family = TaskFamily::by_name(&a.family).map_err(|e| usage(e.to_string()))?;
    let grid = parse_grid(&a.weights)?;
    let seeds: Vec<u64> = a
        .seeds
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| usage(format!("--seeds: bad seed {s:?}"))))
        .collect::<CliResult<_>>()?;
    let p1 = Policy::from_checkpoint(load_checkpoint(&a.ckpt1)?);
    let p2 = Policy::from_checkpoint(load_checkpoint(&a.ckpt2)?);
    let result = run_sweep(&family, &p1, &p2, &grid, a.episodes, &seeds)?;
    let summary = summarize(&result);
    run.write("sweep.csv", &write_sweep_csv(&result))?;
    run.write("sweep.json", &(serde_json::to_string_pretty(&result).map_err(Error::from)? + "\n"))?;
    run.write("episodes.json", &(serde_json::to_string(&result.records).map_err(Error::from)? + "\n"))?;
    run.write("summary.txt", &summary.table)?;
    print!("{}", summary.table);
    let config = json!({
        "family": family,
        "ckpt1": a.ckpt1.display().to_string(),
        "ckpt2": a.ckpt2.display().to_string(),
        "weight_grid": grid,
        "episodes": a.episodes,
        "best_w1": summary.best_w1,
    });
    let manifest = run.out_dir.join("manifest.json");
    run.finish(manifest, config, seeds)?;
    Ok(EXIT_OK)
}

fn cmd_check(a: &CheckArgs) -> CliResult<i32> {
    let oracles = all_oracles();
    if a.list {
        for o in &oracles {
            println!("{:<22} {}", o.name, o.description);
        }
        return Ok(EXIT_OK);
    }
    for name in &a.only {
        if !oracles.iter().any(|o| o.name == name) {
            return Err(usage(format!("unknown oracle {name:?}; see --list")));
        }
    }
    let mut failed = 0;
    for o in oracles.iter().filter(|o| a.only.is_empty() || a.only.iter().any(|n| n == o.name)) {
        let r = o.run();
        println!(
            "{} {:<22} {} (tolerance {}) [{:.1}s]",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.measured,
            r.tolerance,
            r.seconds
        );
        failed += usize::from(!r.passed);
    }
    if failed > 0 {
        println!("{failed} oracle(s) failed");
        Ok(EXIT_FAILURE)
    } else {
        Ok(EXIT_OK)
    }
}

fn manifest_annotation(csv: &Path) -> Option<String> {
    let text = fs::read_to_string(csv.parent()?.join("manifest.json")).ok()?;
    let v: serde_json::Value = serde_json::from_str(&text).ok()?;
    if v["command"] != "sample" {
        return None;
    }
    let weights: Vec<String> = v["config"]["weights"].as_array()?.iter().map(|w| w.to_string()).collect();
    Some(format!("{} weights ({})", v["config"]["mode"].as_str()?, weights.join(", ")))
}

fn cmd_report(a: &ReportArgs, mut run: Run<'_>) -> CliResult<i32> {
    if a.samples.is_empty() && a.sweep_dir.is_none() {
        return Err(usage("report needs --samples or --sweep-dir"));
    }
    if !a.labels.is_empty() && a.labels.len() != a.samples.len() {
        return Err(usage(format!("{} --label values for {} --samples files", a.labels.len(), a.samples.len())));
    }
    let mut plots: Vec<(String, String, Vec<[f64; 2]>)> = Vec::new();
    let mut summary = String::new();
    for (k, path) in a.samples.iter().enumerate() {
        let text = fs::read_to_string(path)?;
        let table = read_samples_csv(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let pts = table.final_points()?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("samples_{k}"));
        let parent = path.parent().and_then(|p| p.file_name()).map(|p| p.to_string_lossy().into_owned());
        let name = match parent {
            Some(p) if !p.is_empty() && a.samples.len() > 1 => format!("{p}_{stem}"),
            _ => stem,
        };
        let annotation = a
            .labels
            .get(k)
            .cloned()
            .or_else(|| manifest_annotation(path))
            .unwrap_or_default();
        let (m, s) = point_moments(&pts);
        summary.push_str(&format!(
            "{name}: n={} mean=({:.4}, {:.4}) std=({:.4}, {:.4}) {annotation}\n",
            pts.len(),
            m[0],
            m[1],
            s[0],
            s[1]
        ));
        plots.push((name, annotation, pts));
    }
    if let Some(dir) = &a.sweep_dir {
        let sweep: SweepResult = serde_json::from_str(&fs::read_to_string(dir.join("sweep.json"))?)
            .map_err(|e| Error::Parse(format!("sweep.json: {e}")))?;
        let records: Vec<EpisodeRecord> = serde_json::from_str(&fs::read_to_string(dir.join("episodes.json"))?)
            .map_err(|e| Error::Parse(format!("episodes.json: {e}")))?;
        if records.is_empty() {
            return Err(Error::Empty("sweep episodes").into());
        }
        let err = |p: [f64; 2], g: [f64; 2]| [p[0] - g[0], p[1] - g[1]];
        plots.push((
            format!("{}_dp1", sweep.task_name),
            format!("DP1 [{}] final-waypoint error", sweep.modality_1),
            records.iter().map(|r| err(r.dp1_final, r.goal)).collect(),
        ));
        plots.push((
            format!("{}_dp2", sweep.task_name),
            format!("DP2 [{}] final-waypoint error", sweep.modality_2),
            records.iter().map(|r| err(r.dp2_final, r.goal)).collect(),
        ));
        for (k, w) in sweep.weight_grid.iter().enumerate() {
            plots.push((
                format!("{}_w1_{w}", sweep.task_name),
                format!("MCDP w1={w}, w2={} final-waypoint error", ((1.0 - w) * 1e10).round() / 1e10),
                records.iter().map(|r| err(r.composed_final[k], r.goal)).collect(),
            ));
        }
        summary.push_str(&summarize(&sweep).table);
    }
    let shared = a.sweep_dir.is_some().then_some([-0.6, 0.6, -0.6, 0.6]);
    let mut rendered = Vec::with_capacity(plots.len());
    for (name, annotation, pts) in &plots {
        let style = ScatterStyle { title: name.clone(), annotation: annotation.clone(), bounds: shared };
        rendered.push((format!("{name}.svg"), scatter_svg(pts, &style)?));
    }
    for (file, svg) in &rendered {
        run.write(file, svg)?;
    }
    run.write("summary.txt", &summary)?;
    print!("{summary}");
    let config = json!({
        "samples": a.samples.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "labels": a.labels,
        "sweep_dir": a.sweep_dir.as_ref().map(|p| p.display().to_string()),
    });
    let manifest = run.out_dir.join("manifest.json");
    run.finish(manifest, config, vec![])?;
    Ok(EXIT_OK)
}
