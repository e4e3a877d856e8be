use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};
use stratdetect_core::assign::{sample_assignment, sample_assignment_on_topology};
use stratdetect_core::detect::run_test_with;
use stratdetect_core::presets::{instance_preset, preset_names};
use stratdetect_core::rng::derive_seed;
use stratdetect_core::{
    NoiseModel, ReviewProfile, StrategyMix, Supervision, TestConfig, TestResult,
};

use crate::error::{AppError, AppResult};
use crate::formats::{self, Ids};
use crate::sim::{self, Agents, ExperimentConfig, Sigma};

pub const TOOL: &str = "stratdetect";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "stratdetect",
    version,
    about = "Detect strategic behaviour in peer assessment"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the test on an instance, an assignment and a ranking profile.
    Test(TestArgs),
    /// Run an experiment described by a JSON config.
    Simulate(SimulateArgs),
    /// Write a synthetic dataset bundle.
    Generate(GenerateArgs),
    /// List instance presets and strategy mixes.
    Presets,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub assignment: PathBuf,
    #[arg(long)]
    pub profile: PathBuf,
    /// `none`, `ground-truth` or `file:PATH` with impartial rankings.
    #[arg(long, default_value = "none")]
    pub supervision: String,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Null matrices to sample; 0 enumerates all of them.
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// CSV report; the metadata sidecar goes next to it as `*.meta.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Add wall time to the sidecar, which then differs between runs.
    #[arg(long)]
    pub record_timing: bool,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value = "game20")]
    pub preset: String,
    /// Strategy mix or single strategy for non-truthful reviewers.
    #[arg(long, default_value = "truthful")]
    pub mix: String,
    #[arg(long, default_value_t = 0.0)]
    pub truthful_fraction: f64,
    /// Noise on the values reviewers perceive.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    /// Noise of the impartial rankings.
    #[arg(long, default_value_t = 0.0)]
    pub impartial_sigma: f64,
    #[arg(long)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Edge list fixing the assignment structure.
    #[arg(long)]
    pub topology: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Failures are reported as one JSON line on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 4 } else { 0 };
        }
    };
    let mut ids = None;
    match execute(cli.command, &mut ids) {
        Ok(()) => 0,
        Err(e) => {
            let report = e.report(ids.as_ref());
            eprintln!(
                "{}",
                serde_json::to_string(&report).expect("report serializes")
            );
            e.exit_code()
        }
    }
}

fn execute(command: Command, ids: &mut Option<Ids>) -> AppResult<()> {
    match command {
        Command::Test(a) => {
            let threads = a.threads;
            with_threads(threads, || cmd_test(&a, ids))
        }
        Command::Simulate(a) => with_threads(a.threads, || cmd_simulate(&a)),
        Command::Generate(a) => cmd_generate(&a),
        Command::Presets => cmd_presets(),
    }
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> AppResult<T> + Send) -> AppResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| AppError::Config(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

#[derive(Debug, Serialize)]
pub struct TestConfigEcho {
    pub instance: String,
    pub assignment: String,
    pub profile: String,
    pub supervision: String,
    pub alpha: f64,
    pub k: usize,
    pub seed: u64,
    pub rule: &'static str,
}

#[derive(Debug, Serialize)]
pub struct Exact {
    pub numerator: i64,
    pub denominator: u64,
}

/// Order statistics of the null values; quantiles take the
/// `floor(q * (len - 1))`-th smallest value.
#[derive(Debug, Serialize)]
pub struct PhiSummary {
    pub count: usize,
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
    pub threshold: f64,
}

#[derive(Debug, Serialize)]
pub struct TestReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: TestConfigEcho,
    pub tau: f64,
    pub tau_exact: Exact,
    pub reject: bool,
    pub effect_size: Option<f64>,
    pub authored_count: usize,
    pub threshold_index: usize,
    pub threshold: f64,
    pub p_value: f64,
    pub phi_summary: PhiSummary,
    pub phi: Vec<f64>,
}

fn summarize(r: &TestResult) -> PhiSummary {
    let mut s = r.phi.clone();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| s[(p * (s.len() - 1) as f64) as usize];
    PhiSummary {
        count: s.len(),
        min: s[0],
        q05: q(0.05),
        q25: q(0.25),
        median: q(0.5),
        q75: q(0.75),
        q95: q(0.95),
        max: s[s.len() - 1],
        threshold: r.threshold,
    }
}

pub fn cmd_test(a: &TestArgs, ids_out: &mut Option<Ids>) -> AppResult<()> {
    let (inst, ids) =
        formats::parse_instance(&formats::read_file(&a.instance)?, &display(&a.instance))?;
    *ids_out = Some(ids.clone());
    let assignment = formats::parse_assignment(
        &formats::read_file(&a.assignment)?,
        &display(&a.assignment),
        &inst,
        &ids,
    )?;
    let profile = formats::parse_profile(
        &formats::read_file(&a.profile)?,
        &display(&a.profile),
        &assignment,
        &ids,
    )?;
    let supervision = match a.supervision.as_str() {
        "none" => Supervision::None,
        "ground-truth" => Supervision::GroundTruth,
        other => match other.strip_prefix("file:") {
            Some(path) => {
                let text = formats::read_file(Path::new(path))?;
                let p = formats::parse_profile(&text, path, &assignment, &ids).map_err(
                    |e| match e {
                        AppError::Core(c) => match c.reviewer() {
                            Some(reviewer) => {
                                stratdetect_core::Error::SupervisionAssignmentMismatch { reviewer }
                                    .into()
                            }
                            None => AppError::Core(c),
                        },
                        e => e,
                    },
                )?;
                Supervision::Impartial(p)
            }
            None => {
                return Err(AppError::Config(format!(
                    "--supervision must be none, ground-truth or file:PATH, got {other:?}"
                )))
            }
        },
    };
    let config = TestConfig {
        alpha: a.alpha,
        k: a.k,
        supervision,
        seed: a.seed,
        ..TestConfig::default()
    };
    let r = run_test_with(&inst, &assignment, &profile, &config, sim::parallel_phi)?;
    let report = TestReport {
        tool: TOOL,
        version: VERSION,
        config: TestConfigEcho {
            instance: display(&a.instance),
            assignment: display(&a.assignment),
            profile: display(&a.profile),
            supervision: a.supervision.clone(),
            alpha: a.alpha,
            k: a.k,
            seed: a.seed,
            rule: "borda",
        },
        tau: r.tau,
        tau_exact: Exact {
            numerator: r.tau_scaled,
            denominator: r.scale,
        },
        reject: r.reject,
        effect_size: r.effect_size,
        authored_count: r.authored_count,
        threshold_index: r.threshold_index,
        threshold: r.threshold,
        p_value: r.p_value,
        phi_summary: summarize(&r),
        phi: r.phi.clone(),
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    if let Some(out) = &a.out {
        formats::write_file(out, &text)?;
    }
    print_stdout(&text);
    Ok(())
}

fn print_stdout(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
}

#[derive(Debug, Serialize)]
pub struct Sidecar<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub experiment: &'static str,
    pub seed: u64,
    pub deterministic: bool,
    pub config_digest: String,
    pub config: &'a ExperimentConfig,
    pub rows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
}

/// SHA-256 of the effective config in its canonical JSON form.
pub fn config_digest(config: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("meta.json")
}

pub fn cmd_simulate(a: &SimulateArgs) -> AppResult<()> {
    let config = ExperimentConfig::parse(&formats::read_file(&a.config)?)?;
    let start = Instant::now();
    let rows = sim::run_experiment(&config)?;
    let elapsed = start.elapsed().as_secs_f64();
    let csv = formats::write_csv(&rows)?;
    match &a.out {
        Some(out) => {
            formats::write_file(out, &csv)?;
            let meta = Sidecar {
                tool: TOOL,
                version: VERSION,
                core_version: VERSION,
                experiment: config.name(),
                seed: config.seed(),
                deterministic: config.is_deterministic(),
                config_digest: config_digest(&config),
                config: &config,
                rows: rows.len(),
                wall_time_seconds: a.record_timing.then_some(elapsed),
            };
            let mut text = serde_json::to_string_pretty(&meta).expect("sidecar serializes");
            text.push('\n');
            formats::write_file(&sidecar_path(out), &text)?;
        }
        None => print_stdout(&csv),
    }
    Ok(())
}

pub fn cmd_generate(a: &GenerateArgs) -> AppResult<()> {
    let inst = instance_preset(&a.preset)?;
    if !(0.0..=1.0).contains(&a.truthful_fraction) {
        return Err(AppError::Config(format!(
            "--truthful-fraction {} outside [0, 1]",
            a.truthful_fraction
        )));
    }
    let ids = Ids::prefixed(inst.m, inst.n);
    let assignment_seed = derive_seed(&[a.seed, 1]);
    let assignment = match &a.topology {
        Some(path) => {
            let t = formats::parse_topology(
                &formats::read_file(path)?,
                &display(path),
                inst.m,
                inst.n,
            )?;
            sample_assignment_on_topology(&inst, &t, assignment_seed)?
        }
        None => sample_assignment(&inst, assignment_seed)?,
    };
    let agents = Agents {
        mix: StrategyMix::preset(&a.mix)?,
        truthful_fraction: a.truthful_fraction,
        noise: NoiseModel::Gaussian(a.sigma),
    };
    agents.noise.validate()?;
    let (kinds, profile) =
        sim::simulate_agents(&inst, &assignment, &agents, derive_seed(&[a.seed, 2]))?;
    NoiseModel::Gaussian(a.impartial_sigma).validate()?;
    let impartial: ReviewProfile = sim::impartial_profile(
        &inst,
        &assignment,
        Sigma(a.impartial_sigma),
        derive_seed(&[a.seed, 3]),
    )?;

    std::fs::create_dir_all(&a.out).map_err(|e| AppError::io(display(&a.out), e))?;
    formats::write_file(
        &a.out.join("instance.json"),
        &formats::write_instance(&inst, &ids),
    )?;
    formats::write_file(
        &a.out.join("assignment.txt"),
        &formats::write_assignment(&assignment, &ids),
    )?;
    formats::write_file(
        &a.out.join("profile.txt"),
        &formats::write_profile(&profile, &ids),
    )?;
    formats::write_file(
        &a.out.join("impartial.txt"),
        &formats::write_profile(&impartial, &ids),
    )?;
    let strategies: String = kinds
        .iter()
        .enumerate()
        .map(|(i, k)| format!("{}: {}\n", ids.reviewer(i), k.name()))
        .collect();
    formats::write_file(&a.out.join("strategies.txt"), &strategies)?;
    Ok(())
}

pub fn cmd_presets() -> AppResult<()> {
    let mut s = String::from("instances:\n");
    for name in preset_names() {
        let i = instance_preset(&name)?;
        s.push_str(&format!(
            "  {name}: n={} m={} lambda={} mu={}\n",
            i.n, i.m, i.lambda, i.mu
        ));
    }
    s.push_str("  identity:<size>:<load>\nmixes:\n");
    for name in StrategyMix::preset_names() {
        let mix = StrategyMix::preset(&name)?;
        let parts: Vec<String> = mix
            .weights()
            .iter()
            .map(|(k, w)| format!("{}={}", k.name(), (w * 1e4).round() / 1e4))
            .collect();
        s.push_str(&format!("  {name}: {}\n", parts.join(" ")));
    }
    print_stdout(&s);
    Ok(())
}
