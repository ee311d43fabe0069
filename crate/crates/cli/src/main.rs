use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pipeplan::catalog::builtin_pipeline;
use pipeplan::io::{read_json, to_versioned_string};
use pipeplan::landscape::{generate_landscape, Difficulty, GroundTruthLandscape};
use pipeplan::model::{Budget, PipelineSpec, Query, TierTopology};
use pipeplan::par::Execution;
use pipeplan::profiler::{fixed_n_baseline, SessionLimits};
use pipeplan::rng::derive;
use pipeplan::sched::{
    greedy_cost, greedy_goodput, ilp_oracle_limited, ilp_oracle_unlimited, random_instance, Cluster, DeploymentState,
    ORACLE_MAX_QUERIES,
};
use pipeplan::search::{single_query_search, HistoryStore, SearchConfig};
use pipeplan::sim::{ablations, compare, run, slo_from_front, Hardness, SimConfig, Variant};
use pipeplan::workload::Workload;

#[derive(Parser)]
#[command(name = "pipeplan", version, about = "SLO-aware planning for multi-operator ML pipelines")]
struct Cli {
    /// Run on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search plans for one query and print its candidate set as JSON.
    Plan(PlanArgs),
    /// Replay a simulation config.
    Simulate {
        config: PathBuf,
        /// Output directory; overrides the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replaces the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run planner variants on the same trace and tabulate them.
    Compare {
        /// Configs to compare; the first one is the baseline.
        configs: Vec<PathBuf>,
        /// Compare the standard ablations of this config instead.
        #[arg(long, conflicts_with = "configs")]
        ablations: Option<PathBuf>,
        /// Directory for comparison.csv and per-variant reports.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the greedy schedulers against exhaustive optima on random instances.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct PlanArgs {
    /// Built-in pipeline name (SR, VT, LVC, DVC, ACG).
    #[arg(long, conflicts_with = "pipeline_file")]
    pipeline: Option<String>,
    #[arg(long)]
    pipeline_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    landscape_seed: u64,
    #[arg(long)]
    landscape_file: Option<PathBuf>,
    #[arg(long)]
    topology: Option<PathBuf>,
    /// Accuracy SLO; derived from the frontier when omitted.
    #[arg(long)]
    accuracy: Option<f64>,
    /// Latency SLO in seconds; derived from the frontier when omitted.
    #[arg(long)]
    latency: Option<f64>,
    /// Frontier position used for omitted SLOs, from fastest (0) to most accurate (1).
    #[arg(long, default_value_t = 0.5)]
    slo_quantile: f64,
    #[arg(long, value_enum, default_value = "medium")]
    hardness: HardnessArg,
    #[arg(long, default_value_t = 5.0, conflicts_with = "budget_gpu_hours")]
    budget_seconds: f64,
    #[arg(long)]
    budget_gpu_hours: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_guided_sampling: bool,
    #[arg(long)]
    no_cache: bool,
    /// Profile every plan with the pipeline's fixed sample count.
    #[arg(long)]
    fixed_n: bool,
    /// Write per-step search telemetry as JSONL.
    #[arg(long)]
    telemetry: Option<PathBuf>,
    /// Write the candidate set here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum HardnessArg {
    Easy,
    Medium,
    Hard,
}

impl From<HardnessArg> for Hardness {
    fn from(h: HardnessArg) -> Self {
        match h {
            HardnessArg::Easy => Hardness::Easy,
            HardnessArg::Medium => Hardness::Medium,
            HardnessArg::Hard => Hardness::Hard,
        }
    }
}

#[derive(Args)]
struct OracleArgs {
    /// Required: the oracle enumerates every assignment and is exponential.
    #[arg(long)]
    exhaustive: bool,
    #[arg(long, default_value_t = 200)]
    instances: usize,
    #[arg(long, default_value_t = 8)]
    max_queries: usize,
    #[arg(long, default_value_t = 4)]
    max_plans: usize,
    /// Machines per tier, two tiers.
    #[arg(long, default_value_t = 2)]
    machines: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-instance CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    match cli.command {
        Command::Plan(args) => plan(args, exec),
        Command::Simulate { config, out, seed } => simulate(&config, out, seed),
        Command::Compare { configs, ablations, out } => compare_cmd(configs, ablations, out, exec),
        Command::Oracle(args) => oracle(args, exec),
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn plan(args: PlanArgs, exec: Execution) -> Result<()> {
    let pipeline: PipelineSpec = match (&args.pipeline, &args.pipeline_file) {
        (Some(name), None) => builtin_pipeline(name)?,
        (None, Some(p)) => read_json(p)?,
        _ => bail!("give exactly one of --pipeline and --pipeline-file"),
    };
    let topology = match &args.topology {
        Some(p) => read_json::<TierTopology>(p)?,
        None => TierTopology::three_tier_default(),
    };
    let landscape: GroundTruthLandscape = match &args.landscape_file {
        Some(p) => read_json(p)?,
        None => generate_landscape(args.landscape_seed, &pipeline, &Difficulty::default()),
    };
    let workload = Workload::new(pipeline, topology, landscape);
    let (a_front, l_front) = slo_from_front(
        &workload.accuracy_latency_frontier()?,
        args.slo_quantile,
        Hardness::from(args.hardness).multipliers(),
    )
    .context("the plan space is empty")?;
    let budget = match args.budget_gpu_hours {
        Some(h) => Budget::ProfilingGpuHours(h),
        None => Budget::ResponseSeconds(args.budget_seconds),
    };
    let name = workload.pipeline.name().to_string();
    let query = Query::new(0, &name, args.accuracy.unwrap_or(a_front), args.latency.unwrap_or(l_front), budget);
    query.validate()?;
    let config = SearchConfig {
        seed: args.seed,
        limits: SessionLimits {
            fixed_n: args.fixed_n.then(|| fixed_n_baseline(&name).unwrap_or(350)),
            ..SessionLimits::default()
        },
        strata: if args.no_guided_sampling { 1 } else { 4 },
        use_cache: !args.no_cache,
        execution: exec,
        ..SearchConfig::default()
    };
    let outcome = single_query_search(&query, &workload, &HistoryStore::default(), &config, None)?;
    if let Some(p) = &args.telemetry {
        outcome.write_telemetry(p, query.id)?;
    }
    eprintln!(
        "query a_slo={:.4} l_slo={:.4}s: {} candidates after {} steps, {:.2} simulated s, {:.1} GPU-s",
        query.a_slo,
        query.l_slo,
        outcome.candidates.len(),
        outcome.steps.len(),
        outcome.elapsed,
        outcome.gpu_seconds
    );
    let mut text = to_versioned_string(&outcome.candidates)?;
    text.push('\n');
    write_or_print(args.out.as_deref(), &text)
}

fn simulate(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<()> {
    let mut cfg = SimConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let scenario = cfg.scenario()?;
    let output = run(&scenario)?;
    let r = &output.report;
    eprintln!(
        "{} queries: {} completed, {} degraded, {} rejected, {} pending; mean goodput {:.3}, peak {}",
        r.queries,
        r.count(pipeplan::sim::QueryStatus::Completed),
        r.count(pipeplan::sim::QueryStatus::Degraded),
        r.count(pipeplan::sim::QueryStatus::Rejected),
        r.count(pipeplan::sim::QueryStatus::Pending),
        r.mean_goodput,
        r.peak_goodput
    );
    match out.or(cfg.output_dir) {
        Some(dir) => output.write(&dir).map_err(Into::into),
        None => write_or_print(None, &format!("{}\n", r.to_json()?)),
    }
}

fn compare_cmd(configs: Vec<PathBuf>, base: Option<PathBuf>, out: Option<PathBuf>, exec: Execution) -> Result<()> {
    let variants = match base {
        Some(p) => ablations(&SimConfig::load(&p)?),
        None => {
            if configs.len() < 2 {
                bail!("compare needs at least two configs, or --ablations <config>");
            }
            configs
                .iter()
                .map(|p| {
                    Ok(Variant {
                        name: p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned()),
                        config: SimConfig::load(p)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let c = compare(&variants, exec)?;
    let csv = c.to_csv()?;
    match out {
        Some(dir) => {
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            fs::write(dir.join("comparison.csv"), &csv)?;
            for (row, report) in c.rows.iter().zip(&c.reports) {
                report.write(&dir.join(&row.variant))?;
            }
            Ok(())
        }
        None => write_or_print(None, &csv),
    }
}

fn oracle(args: OracleArgs, exec: Execution) -> Result<()> {
    if !args.exhaustive {
        bail!("the oracle enumerates every assignment; pass --exhaustive to run it");
    }
    if args.max_queries > ORACLE_MAX_QUERIES || args.max_queries == 0 {
        bail!("--max-queries must be between 1 and {ORACLE_MAX_QUERIES}");
    }
    let cluster = Cluster {
        machines: vec![args.machines; 2],
        machine_cost: TierTopology::three_tier_default().tiers()[1..].iter().map(|t| t.machine_cost()).collect(),
    };
    let rows = exec.map_range(args.instances, |i| -> pipeplan::Result<Vec<String>> {
        let seed = derive(args.seed, &[i as u64]);
        let n = 1 + (derive(seed, &[1]) % args.max_queries as u64) as usize;
        let inst = random_instance(seed, n, args.max_plans, &cluster);
        let greedy = greedy_goodput(&inst, DeploymentState::new(cluster.clone())).goodput_weight();
        let best = ilp_oracle_limited(&inst, &cluster)?.goodput;
        let cost = greedy_cost(&inst, &cluster).dollars_per_hour;
        let cheapest = ilp_oracle_unlimited(&inst, &cluster)?.dollars_per_hour;
        let ratio = |a: f64, b: f64| if a == b { 1.0 } else { a / b };
        Ok(vec![
            i.to_string(),
            n.to_string(),
            greedy.to_string(),
            best.to_string(),
            ratio(greedy, best).to_string(),
            cost.to_string(),
            cheapest.to_string(),
            ratio(cost, cheapest).to_string(),
        ])
    });
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "instance",
        "queries",
        "greedy_goodput",
        "optimal_goodput",
        "goodput_ratio",
        "greedy_cost",
        "optimal_cost",
        "cost_ratio",
    ])?;
    let (mut good, mut cheap) = (0, 0);
    for row in rows {
        let row = row?;
        good += (row[4].parse::<f64>()? >= 0.9) as usize;
        cheap += (row[7].parse::<f64>()? <= 1.15) as usize;
        w.write_record(&row)?;
    }
    eprintln!(
        "{} instances: goodput within 90% of optimum on {good}, cost within 15% on {cheap}",
        args.instances
    );
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{}", e.error()))?;
    write_or_print(args.out.as_deref(), &String::from_utf8(bytes)?)
}
