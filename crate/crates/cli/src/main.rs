//! `scad`: generate workloads, build schedules, simulate deployments, run
//! experiment plans, partition layer graphs, and diff reports.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use scad_core::doc::{load_dag, resolve_platform, save_dag};
use scad_core::experiment::{
    diff_reports, load_plan, load_report, render_diff, render_module_table, render_report_table,
    run_experiment, write_report, Stage,
};
use scad_core::heft::{
    compute_ranks, default_schedule, dump_schedule, parse_schedule, render_gantt, schedule_heft,
    Schedule,
};
use scad_core::instantiate::{
    iterate_corun_schedule, schedule_by_instantiation, InstantiateOptions,
};
use scad_core::partition::{
    dump_partition_plan, load_layer_graph, load_support_profile, partition, render_partition_plan,
    substitute,
};
use scad_core::sim::{simulate, Policy, SimConfig};
use scad_core::workload::build_stage_app;

#[derive(Parser)]
#[command(name = "scad", version, about = "DAG scheduling toolkit and platform simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a workload DAG document
    Gen(GenArgs),
    /// Build a schedule for a DAG under a deployment stage
    Schedule(ScheduleArgs),
    /// Simulate a DAG under a scheduling policy
    Sim(SimArgs),
    /// Run an experiment plan end to end
    Run(RunArgs),
    /// Split a layer graph across an accelerator and its fallback engine
    Partition(PartitionArgs),
    /// Per-module deltas between two experiment reports
    Diff(DiffArgs),
}

#[derive(Args)]
struct GenArgs {
    /// App name (ADy288, ADy416, ADy608, ADs288, ADs416, ADs608)
    #[arg(long)]
    app: String,
    /// Calibration segment (1-6)
    #[arg(long, default_value_t = 1)]
    segment: u32,
    /// Builtin platform name or platform file to embed
    #[arg(long, default_value = "jetson")]
    platform: String,
    /// Output path for the .dag document
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScheduleArgs {
    /// Deployment stage: linux-ts, static-rt, jit, jit+accel,
    /// jit+accel+custom, jit+accel+custom+iter (or 1-6)
    #[arg(long)]
    stage: Stage,
    /// DAG document to schedule
    dag: PathBuf,
    /// Platform override: builtin name or file (default: embedded)
    platform: Option<String>,
    /// Write the schedule document here instead of printing the Gantt view
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    /// Cap on raw placement candidates for the enumerating stages
    #[arg(long, default_value_t = 60_000)]
    bound: u64,
    /// Evaluate every raw candidate instead of one per equivalence class
    #[arg(long)]
    no_symmetry: bool,
    /// Probe-run horizon for candidate cost measurement (ms)
    #[arg(long, default_value_t = 2_000.0)]
    probe_horizon_ms: f64,
    /// Evaluation horizon per candidate (ms)
    #[arg(long, default_value_t = 4_000.0)]
    eval_horizon_ms: f64,
    /// Refinement rounds for the iterative stage
    #[arg(long, default_value_t = 5)]
    max_rounds: usize,
    /// Worker threads for candidate evaluation (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct SimArgs {
    /// DAG document to simulate
    dag: PathBuf,
    /// Schedule document; derived from the policy when omitted
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// TIME_SHARING, STATIC_RT, or JIT_RT
    #[arg(long, default_value = "JIT_RT")]
    policy: Policy,
    #[arg(long, default_value_t = 10_000.0)]
    horizon_ms: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    /// Write the machine-readable report here as well
    #[arg(long)]
    report_json: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment plan file
    #[arg(long)]
    plan: PathBuf,
    /// Output directory for <name>.report.json / .txt (default: plan's dir)
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Worker threads for candidate evaluation (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct PartitionArgs {
    /// Layer-graph file (.lg) or builtin name (yolov3, yolov3_spp)
    model: String,
    /// Support profile file (.prof) or builtin name (dla)
    #[arg(long)]
    profile: String,
    /// Replace an op kind before partitioning, as from=to (repeatable)
    #[arg(long)]
    substitute: Vec<String>,
    /// Write the plan as a structured document here
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiffArgs {
    a: PathBuf,
    b: PathBuf,
    /// Emit the diff as JSON instead of a table
    #[arg(long)]
    json: bool,
}

fn set_jobs(jobs: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool")?;
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> anyhow::Result<()> {
    let (_, dag) = build_stage_app(args.segment, &args.app)?;
    let platform = resolve_platform(&args.platform)?;
    save_dag(&dag, &platform, &args.out)?;
    println!(
        "wrote {} ({} nodes, {} edges, segment {})",
        args.out.display(),
        dag.nodes.len(),
        dag.edges.len(),
        args.segment
    );
    Ok(())
}

fn cmd_schedule(args: ScheduleArgs) -> anyhow::Result<()> {
    set_jobs(args.jobs)?;
    let (dag, embedded) = load_dag(&args.dag)?;
    let platform = match &args.platform {
        Some(spec) => resolve_platform(spec)?,
        None => embedded,
    };
    let cfg = SimConfig {
        seed: args.seed,
        noise_sigma: args.noise_sigma,
        ..SimConfig::default()
    };
    let opts = InstantiateOptions {
        enumeration_bound: args.bound as u128,
        use_symmetry: !args.no_symmetry,
        probe_horizon_ms: args.probe_horizon_ms,
        eval_horizon_ms: args.eval_horizon_ms,
        policy: args.stage.default_policy(),
    };
    let sched: Schedule = match args.stage {
        Stage::LinuxTs => default_schedule(&dag, &platform)?,
        Stage::StaticRt | Stage::Jit => {
            let ranks = compute_ranks(&dag, &platform)?;
            schedule_heft(&dag, &platform, &ranks)?
        }
        Stage::JitAccel | Stage::JitAccelCustom => {
            let out = schedule_by_instantiation(&dag, &platform, &cfg, &opts)?;
            print_pins(&dag, &platform, &out.pins);
            println!(
                "searched {} raw candidates as {} forms",
                out.raw_candidates,
                out.candidates.len()
            );
            out.schedule
        }
        Stage::JitAccelCustomIter => {
            let out = iterate_corun_schedule(&dag, &platform, &cfg, &opts, args.max_rounds)?;
            print_pins(&dag, &platform, &out.pins);
            println!("refined over {} rounds", out.steps.len());
            out.schedule
        }
    };
    match &args.out {
        Some(path) => {
            std::fs::write(path, dump_schedule(&dag, &platform, &sched)?)?;
            println!(
                "wrote {} (makespan {:.3} ms)",
                path.display(),
                sched.makespan
            );
        }
        None => print!("{}", render_gantt(&dag, &platform, &sched)),
    }
    Ok(())
}

fn print_pins(
    dag: &scad_core::Dag,
    platform: &scad_core::Platform,
    pins: &BTreeMap<usize, usize>,
) {
    for (&t, &p) in pins {
        println!("pin {} -> {}", dag.nodes[t].id, platform.processors[p].id);
    }
}

fn cmd_sim(args: SimArgs) -> anyhow::Result<()> {
    let (dag, platform) = load_dag(&args.dag)?;
    let sched = match &args.schedule {
        Some(path) => parse_schedule(&dag, &platform, &std::fs::read_to_string(path)?)?,
        None => match args.policy {
            Policy::TimeSharing => default_schedule(&dag, &platform)?,
            _ => {
                let ranks = compute_ranks(&dag, &platform)?;
                schedule_heft(&dag, &platform, &ranks)?
            }
        },
    };
    let cfg = SimConfig {
        horizon_ms: args.horizon_ms,
        seed: args.seed,
        noise_sigma: args.noise_sigma,
        ..SimConfig::default()
    };
    let out = simulate(&dag, &platform, &sched, args.policy, &cfg)?;
    print!("{}", render_module_table(&out.report, ""));
    if let Some(path) = &args.report_json {
        let mut text = serde_json::to_string_pretty(&out.report)?;
        text.push('\n');
        std::fs::write(path, text)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    set_jobs(args.jobs)?;
    let plan = load_plan(&args.plan)?;
    let report = run_experiment(&plan)?;
    let dir = match &args.out {
        Some(d) => d.clone(),
        None => args
            .plan
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    let (json_path, txt_path) = write_report(&report, &dir)?;
    print!("{}", render_report_table(&report));
    println!("\nwrote {} and {}", json_path.display(), txt_path.display());
    Ok(())
}

fn cmd_partition(args: PartitionArgs) -> anyhow::Result<()> {
    let path = std::path::Path::new(&args.model);
    let mut lg = if path.exists() {
        load_layer_graph(path)?
    } else {
        scad_core::partition::builtin_layer_graph(&args.model)?
    };
    let prof_path = std::path::Path::new(&args.profile);
    let profile = if prof_path.exists() {
        load_support_profile(prof_path)?
    } else {
        scad_core::partition::builtin_support_profile(&args.profile)?
    };
    if !args.substitute.is_empty() {
        let mut subs = BTreeMap::new();
        for s in &args.substitute {
            let (from, to) = s
                .split_once('=')
                .with_context(|| format!("substitution {s} is not from=to"))?;
            subs.insert(from.to_string(), to.to_string());
        }
        lg = substitute(&lg, &subs);
    }
    let plan = partition(&lg, &profile)?;
    print!("{}", render_partition_plan(&lg, &plan));
    if let Some(out) = &args.out {
        std::fs::write(out, dump_partition_plan(&plan)?)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_diff(args: DiffArgs) -> anyhow::Result<()> {
    let a = load_report(&args.a)?;
    let b = load_report(&args.b)?;
    let diff = diff_reports(&a, &b)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&diff)?);
    } else {
        print!("{}", render_diff(&diff));
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    // Exit quietly when the reader of a pipe goes away (`scad ... | head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Gen(args) => cmd_gen(args),
        Cmd::Schedule(args) => cmd_schedule(args),
        Cmd::Sim(args) => cmd_sim(args),
        Cmd::Run(args) => cmd_run(args),
        Cmd::Partition(args) => cmd_partition(args),
        Cmd::Diff(args) => cmd_diff(args),
    }
}
