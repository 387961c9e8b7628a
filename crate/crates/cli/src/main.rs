use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use puzzlegen::dataset::{
    configure_workers, generate_dataset, refresh_from_images, verify_dataset, DatasetConfig, PoolPaths, RefreshConfig,
    TaskCounts,
};
use puzzlegen::eval::{
    read_records, run_agent, run_endpoint, run_responses_file, score, write_records, write_report, Agent, ChatClient,
    ModelEndpoint,
};
use puzzlegen::render::RenderStyle;
use puzzlegen::sample::{read_manifest, MANIFEST_FILE};
use puzzlegen::{Error, OptionMode, TaskId};

const EXIT_USAGE: u8 = 1;
const EXIT_VERIFY: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "puzzlegen", version, about = "Generate, verify and score visual-puzzle VQA datasets")]
struct Cli {
    /// Worker threads (defaults to available cores).
    #[arg(long, global = true)]
    concurrency: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset directory.
    Generate(GenerateArgs),
    /// Verify every sample of a dataset; exit 2 unless all pass.
    Verify {
        dir: PathBuf,
        /// Print every failure reason.
        #[arg(long)]
        verbose: bool,
    },
    /// Rebuild Jigsaw and Difference Hunt samples over an image pool.
    Refresh(RefreshArgs),
    /// Produce an answer records file from an endpoint, a responses file or a baseline agent.
    Eval(EvalArgs),
    /// Print metrics for a records file.
    Score {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Write summary.json and breakdown tables for a records file.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the oracle and random agents on a throwaway 600-sample dataset in every mode.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Keep the generated datasets here instead of a temporary directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GenerateArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// fixed | randomized | direct
    #[arg(long)]
    mode: Option<OptionMode>,
    /// Comma-separated task list (names or codes such as WS, GS).
    #[arg(long)]
    tasks: Option<String>,
    /// One count for every task, or `TASK=N,...`.
    #[arg(long)]
    counts: Option<String>,
    /// Directory with icons/, hanzi/, words/ and optionally images/.
    #[arg(long)]
    pools: Option<PathBuf>,
    #[arg(long)]
    font: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Replace a non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct RefreshArgs {
    /// Image directory (with optional images.tsv).
    #[arg(long)]
    images: PathBuf,
    /// Two-column id/caption file.
    #[arg(long)]
    captions: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "fixed")]
    mode: OptionMode,
    #[arg(long, default_value = "Jigsaw,DifferenceHunt")]
    tasks: String,
    /// One count for both tasks, or `TASK=N,...`.
    #[arg(long, default_value = "200")]
    counts: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Chat-completion base URL.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long, default_value = "model")]
    model: String,
    /// Environment variable holding the bearer token.
    #[arg(long, default_value = "PUZZLEGEN_API_TOKEN")]
    env_token: String,
    /// Pre-recorded responses (JSON lines with sample_id, raw_response).
    #[arg(long)]
    responses: Option<PathBuf>,
    /// oracle | random | constant:B
    #[arg(long)]
    agent: Option<Agent>,
    /// Seed for the random agent.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 120)]
    timeout_secs: u64,
    /// Records file to write.
    #[arg(long)]
    out: PathBuf,
}

fn parse_tasks(spec: &str) -> anyhow::Result<Vec<TaskId>> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<TaskId>().map_err(|e| anyhow::anyhow!(usage(e.to_string()))))
        .collect()
}

fn parse_counts(spec: &str, base: TaskCounts) -> anyhow::Result<TaskCounts> {
    if let Ok(n) = spec.trim().parse::<usize>() {
        return Ok(TaskCounts::uniform(n));
    }
    let mut counts = base;
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let Some((task, n)) = part.split_once('=') else {
            bail!(usage(format!("count {part:?} is not TASK=N")));
        };
        let task: TaskId = task.trim().parse().map_err(|e: Error| anyhow::anyhow!(usage(e.to_string())))?;
        let n: usize = n.trim().parse().map_err(|_| anyhow::anyhow!(usage(format!("bad count in {part:?}"))))?;
        counts.set(task, n);
    }
    Ok(counts)
}

/// Marks an error as a usage problem (exit 1).
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: String) -> Usage {
    Usage(msg)
}

fn generate(args: GenerateArgs) -> anyhow::Result<()> {
    let mut cfg = match &args.config {
        Some(p) => DatasetConfig::load(p)?,
        None => DatasetConfig::new(0, OptionMode::FixedOption),
    };
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    if let Some(c) = &args.counts {
        cfg.counts = parse_counts(c, cfg.counts)?;
    }
    if let Some(t) = &args.tasks {
        cfg.counts = cfg.counts.restrict(&parse_tasks(t)?);
    }
    if let Some(p) = &args.pools {
        cfg.pools = PoolPaths::under(p);
    }
    if let Some(f) = &args.font {
        cfg.style = RenderStyle {
            font: f.clone(),
            ..cfg.style
        };
    }
    puzzlegen::dataset::prepare_output(&args.out, args.force)?;
    let summary = generate_dataset(&cfg, &args.out)?;
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

fn verify(dir: &Path, verbose: bool) -> anyhow::Result<bool> {
    let report = verify_dataset(dir)?;
    println!("verified {}/{} samples", report.passed, report.total);
    for f in &report.failures {
        if verbose {
            println!("FAIL {}: {}", f.id, f.reasons.join("; "));
        } else {
            println!("FAIL {}: {}", f.id, f.reasons.first().map(String::as_str).unwrap_or(""));
        }
    }
    for o in &report.orphans {
        println!("ORPHAN {o}");
    }
    if !report.rendered {
        println!("note: grid images were not re-rendered (generation assets unavailable)");
    }
    Ok(report.all_passed())
}

fn refresh(args: RefreshArgs) -> anyhow::Result<()> {
    let tasks = parse_tasks(&args.tasks)?;
    let counts = parse_counts(&args.counts, TaskCounts::zero())?;
    let cfg = RefreshConfig {
        images: args.images,
        captions: args.captions,
        tasks,
        jigsaw: counts.jigsaw,
        difference_hunt: counts.difference_hunt,
        mode: args.mode,
        master_seed: args.seed,
    };
    puzzlegen::dataset::prepare_output(&args.out, args.force)?;
    let summary = refresh_from_images(&cfg, &args.out)?;
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

fn load_samples(dataset: &Path) -> anyhow::Result<Vec<puzzlegen::PuzzleSample>> {
    let manifest = dataset.join(MANIFEST_FILE);
    if !manifest.is_file() {
        return Err(Error::ManifestMissing(dataset.to_path_buf()).into());
    }
    Ok(read_manifest(&manifest)?)
}

fn eval(args: EvalArgs, concurrency: Option<usize>) -> anyhow::Result<()> {
    let samples = load_samples(&args.dataset)?;
    let sources = [args.endpoint.is_some(), args.responses.is_some(), args.agent.is_some()];
    if sources.iter().filter(|&&b| b).count() != 1 {
        bail!(usage("eval needs exactly one of --endpoint, --responses, --agent".into()));
    }
    let records = if let Some(url) = args.endpoint {
        let mut ep = ModelEndpoint::new(url, &args.model, &args.env_token);
        ep.timeout = Duration::from_secs(args.timeout_secs);
        if let Some(c) = concurrency {
            ep.concurrency = c;
        }
        let templates = puzzlegen::dataset::read_snapshot(&args.dataset)
            .map(|s| s.config.templates)
            .unwrap_or_default();
        let client = ChatClient::new(ep)?;
        run_endpoint(&client, &args.dataset, &samples, &templates)?
    } else if let Some(path) = args.responses {
        run_responses_file(&path, &args.model, &samples)?
    } else {
        run_agent(&samples, args.agent.expect("checked above"), args.seed)
    };
    write_records(&args.out, &records)?;
    println!("wrote {} records to {}", records.len(), args.out.display());
    Ok(())
}

fn selftest(seed: u64, out: Option<PathBuf>) -> anyhow::Result<bool> {
    let tmp;
    let root = match out {
        Some(p) => p,
        None => {
            tmp = std::env::temp_dir().join(format!("puzzlegen-selftest-{}", std::process::id()));
            tmp.clone()
        }
    };
    let mut ok = true;
    for mode in OptionMode::ALL {
        let dir = root.join(mode.short());
        puzzlegen::dataset::prepare_output(&dir, true)?;
        // 600 samples per mode; direct mode spreads them over the five tasks it supports.
        let counts = if mode == OptionMode::DirectAnswer {
            let mut c = TaskCounts::uniform(120);
            c.set(TaskId::Jigsaw, 0);
            c
        } else {
            TaskCounts::uniform(100)
        };
        let cfg = DatasetConfig::new(seed, mode).with_counts(counts);
        generate_dataset(&cfg, &dir).with_context(|| format!("generating {mode} dataset"))?;
        let verified = verify_dataset(&dir)?;
        let samples = load_samples(&dir)?;
        let oracle = score(&run_agent(&samples, Agent::Oracle, seed), &samples)?;
        let random = score(&run_agent(&samples, Agent::Random, seed), &samples)?;
        let oracle_ok = oracle.per_task.values().all(|m| m.accuracy == 1.0 && m.mre.is_none_or(|e| e == 0.0));
        let pass = verified.all_passed() && oracle_ok;
        ok &= pass;
        println!(
            "{} {mode}: {} samples, verified {}/{}, oracle overall {:.3}, random overall {:.3}",
            if pass { "PASS" } else { "FAIL" },
            samples.len(),
            verified.passed,
            verified.total,
            oracle.overall,
            random.overall
        );
    }
    if root.starts_with(std::env::temp_dir()) {
        let _ = std::fs::remove_dir_all(&root);
    }
    Ok(ok)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    if let Some(n) = cli.concurrency {
        if n == 0 {
            bail!(usage("--concurrency must be at least 1".into()));
        }
        configure_workers(n)?;
    }
    match cli.command {
        Command::Generate(a) => generate(a).map(|_| true),
        Command::Verify { dir, verbose } => verify(&dir, verbose),
        Command::Refresh(a) => refresh(a).map(|_| true),
        Command::Eval(a) => eval(a, cli.concurrency).map(|_| true),
        Command::Score { records, dataset } => {
            let samples = load_samples(&dataset)?;
            let report = score(&read_records(&records)?, &samples)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(true)
        }
        Command::Report { records, dataset, out } => {
            let samples = load_samples(&dataset)?;
            let report = write_report(&out, &read_records(&records)?, &samples)?;
            println!("overall {:.3}; report written to {}", report.overall, out.display());
            Ok(true)
        }
        Command::Selftest { seed, out } => selftest(seed, out),
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::MissingPath(_) | Error::InvalidParameter(_) | Error::OutputNotEmpty(_)) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERIFY),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
