//! Experiment orchestration: a plan names apps and scheduler stages, every
//! (app, stage) cell is generated, scheduled, and simulated, and the results
//! land in a machine-readable report plus an aligned text table.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dag::Platform;
use crate::doc::resolve_platform;
use crate::error::Error;
use crate::heft::{compute_ranks, default_schedule, schedule_heft, Schedule};
use crate::instantiate::{
    iterate_corun_schedule, schedule_by_instantiation, InstantiateOptions, IterationStep, Score,
};
use crate::sim::{simulate, Policy, SimConfig, SimReport};
use crate::Result;

pub const PLAN_VERSION: u32 = 1;

/// The six deployment stages, in the order the platform went through them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Stage {
    /// Default time-sharing, untuned placement.
    LinuxTs,
    /// Static real-time priorities over a list schedule.
    StaticRt,
    /// Just-in-time priority adjustment, same placement.
    Jit,
    /// JIT plus enumerated accelerator placement.
    JitAccel,
    /// JIT plus enumeration over hardware-tailored detector variants.
    JitAccelCustom,
    /// The full pipeline with iterative co-run-aware refinement.
    JitAccelCustomIter,
}

pub const STAGES: [Stage; 6] = [
    Stage::LinuxTs,
    Stage::StaticRt,
    Stage::Jit,
    Stage::JitAccel,
    Stage::JitAccelCustom,
    Stage::JitAccelCustomIter,
];

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::LinuxTs => "linux-ts",
            Stage::StaticRt => "static-rt",
            Stage::Jit => "jit",
            Stage::JitAccel => "jit+accel",
            Stage::JitAccelCustom => "jit+accel+custom",
            Stage::JitAccelCustomIter => "jit+accel+custom+iter",
        }
    }

    /// Workload calibration segment this stage deploys.
    pub fn segment(&self) -> u32 {
        match self {
            Stage::LinuxTs => 1,
            Stage::StaticRt => 2,
            Stage::Jit => 3,
            Stage::JitAccel => 4,
            Stage::JitAccelCustom => 5,
            Stage::JitAccelCustomIter => 6,
        }
    }

    pub fn default_policy(&self) -> Policy {
        match self {
            Stage::LinuxTs => Policy::TimeSharing,
            Stage::StaticRt => Policy::StaticRt,
            _ => Policy::JitRt,
        }
    }

    pub fn from_segment(segment: u32) -> Result<Stage> {
        STAGES
            .get(segment.checked_sub(1).unwrap_or(u32::MAX) as usize)
            .copied()
            .ok_or_else(|| Error::Parse(format!("no stage for segment {segment}")))
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Stage> {
        if let Ok(segment) = s.parse::<u32>() {
            return Stage::from_segment(segment);
        }
        STAGES
            .iter()
            .find(|st| st.name() == s)
            .copied()
            .ok_or_else(|| {
                let names: Vec<&str> = STAGES.iter().map(|st| st.name()).collect();
                Error::Parse(format!("unknown stage {s}; expected one of {names:?}"))
            })
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl TryFrom<String> for Stage {
    type Error = Error;

    fn try_from(s: String) -> Result<Stage> {
        s.parse()
    }
}

impl From<Stage> for String {
    fn from(s: Stage) -> String {
        s.name().to_string()
    }
}

/// A grid of (app, stage) cells plus the simulation knobs they share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    pub version: u32,
    /// Output stem: reports are written as `<name>.report.json` / `.txt`.
    pub name: String,
    pub apps: Vec<String>,
    pub stages: Vec<Stage>,
    /// Builtin platform name or path to a platform file.
    pub platform: String,
    pub horizon_ms: f64,
    pub seed: u64,
    pub noise_sigma: f64,
    /// Overrides the per-stage default policy when set.
    pub policy: Option<String>,
    pub enumeration_bound: u64,
    pub use_symmetry: bool,
    pub probe_horizon_ms: f64,
    pub eval_horizon_ms: f64,
    /// Refinement rounds for the iterative stage.
    pub max_rounds: usize,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            version: PLAN_VERSION,
            name: "experiment".into(),
            apps: vec![],
            stages: vec![],
            platform: "jetson".into(),
            horizon_ms: 10_000.0,
            seed: 7,
            noise_sigma: 0.0,
            policy: None,
            enumeration_bound: 60_000,
            use_symmetry: true,
            probe_horizon_ms: 2_000.0,
            eval_horizon_ms: 4_000.0,
            max_rounds: 5,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.version != PLAN_VERSION {
            return Err(Error::Version {
                found: self.version,
                expected: PLAN_VERSION,
            });
        }
        if self.apps.is_empty() {
            return Err(Error::Invalid("plan lists no apps".into()));
        }
        if self.stages.is_empty() {
            return Err(Error::Invalid("plan lists no stages".into()));
        }
        if let Some(p) = &self.policy {
            p.parse::<Policy>()?;
        }
        if self.horizon_ms <= 0.0 {
            return Err(Error::Invalid("horizon_ms must be positive".into()));
        }
        Ok(())
    }
}

pub fn parse_plan(text: &str) -> Result<ExperimentPlan> {
    let plan: ExperimentPlan = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    plan.validate()?;
    Ok(plan)
}

pub fn load_plan(path: &Path) -> Result<ExperimentPlan> {
    parse_plan(&std::fs::read_to_string(path)?)
}

pub fn dump_plan(plan: &ExperimentPlan) -> Result<String> {
    toml::to_string_pretty(plan).map_err(|e| Error::Parse(e.to_string()))
}

/// Summary of an enumeration run attached to cells that used one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub raw_candidates: u128,
    pub evaluated_forms: usize,
    pub score: Score,
}

/// One (app, stage) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub app: String,
    pub stage: Stage,
    pub segment: u32,
    pub policy: String,
    /// Task id -> processor id, the static placement the run used.
    pub assignment: BTreeMap<String, String>,
    /// Accelerator pins chosen by enumeration; empty for fixed stages.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub pins: BTreeMap<String, String>,
    pub makespan_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub iterations: Vec<IterationStep>,
    pub report: SimReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: u32,
    pub name: String,
    pub platform: String,
    pub seed: u64,
    pub horizon_ms: f64,
    pub noise_sigma: f64,
    pub cells: Vec<CellResult>,
}

fn tag<T>(stage: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: stage.into(),
        source: Box::new(e),
    })
}

fn run_cell(
    plan: &ExperimentPlan,
    platform: &Platform,
    app: &str,
    stage: Stage,
) -> Result<CellResult> {
    let (_, dag) = tag(
        "generate",
        crate::workload::build_stage_app(stage.segment(), app),
    )?;
    let policy = match &plan.policy {
        Some(p) => p.parse::<Policy>()?,
        None => stage.default_policy(),
    };
    let cfg = SimConfig {
        horizon_ms: plan.horizon_ms,
        seed: plan.seed,
        noise_sigma: plan.noise_sigma,
        ..SimConfig::default()
    };
    let opts = InstantiateOptions {
        enumeration_bound: plan.enumeration_bound as u128,
        use_symmetry: plan.use_symmetry,
        probe_horizon_ms: plan.probe_horizon_ms,
        eval_horizon_ms: plan.eval_horizon_ms,
        policy,
    };

    let mut pins: BTreeMap<usize, usize> = BTreeMap::new();
    let mut search = None;
    let mut iterations = Vec::new();
    let sched: Schedule = match stage {
        Stage::LinuxTs => tag("schedule", default_schedule(&dag, platform))?,
        Stage::StaticRt | Stage::Jit => {
            let ranks = tag("schedule", compute_ranks(&dag, platform))?;
            tag("schedule", schedule_heft(&dag, platform, &ranks))?
        }
        Stage::JitAccel | Stage::JitAccelCustom => {
            let out = tag("schedule", schedule_by_instantiation(&dag, platform, &cfg, &opts))?;
            pins = out.pins;
            search = Some(SearchSummary {
                raw_candidates: out.raw_candidates,
                evaluated_forms: out.candidates.len(),
                score: out.score,
            });
            out.schedule
        }
        Stage::JitAccelCustomIter => {
            let out = tag(
                "schedule",
                iterate_corun_schedule(&dag, platform, &cfg, &opts, plan.max_rounds),
            )?;
            pins = out.pins;
            search = Some(SearchSummary {
                raw_candidates: 0,
                evaluated_forms: 0,
                score: out.score,
            });
            iterations = out.steps;
            out.schedule
        }
    };

    let out = tag("simulate", simulate(&dag, platform, &sched, policy, &cfg))?;
    let name_of = |t: usize| dag.nodes[t].id.clone();
    let proc_of = |p: usize| platform.processors[p].id.clone();
    Ok(CellResult {
        app: app.to_string(),
        stage,
        segment: stage.segment(),
        policy: policy.as_str().to_string(),
        assignment: sched
            .assignment
            .iter()
            .enumerate()
            .map(|(t, &p)| (name_of(t), proc_of(p)))
            .collect(),
        pins: pins.iter().map(|(&t, &p)| (name_of(t), proc_of(p))).collect(),
        makespan_ms: sched.makespan,
        search,
        iterations,
        report: out.report,
    })
}

/// Run every (app, stage) cell of the plan. Cell order is apps-major, the
/// order both lists are written in.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    plan.validate()?;
    let platform = tag("platform", resolve_platform(&plan.platform))?;
    let grid: Vec<(String, Stage)> = plan
        .apps
        .iter()
        .flat_map(|a| plan.stages.iter().map(move |&s| (a.clone(), s)))
        .collect();
    use rayon::prelude::*;
    let cells: Vec<CellResult> = grid
        .par_iter()
        .map(|(app, stage)| run_cell(plan, &platform, app, *stage))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport {
        version: PLAN_VERSION,
        name: plan.name.clone(),
        platform: plan.platform.clone(),
        seed: plan.seed,
        horizon_ms: plan.horizon_ms,
        noise_sigma: plan.noise_sigma,
        cells,
    })
}

pub fn dump_report(report: &ExperimentReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn parse_report(text: &str) -> Result<ExperimentReport> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn load_report(path: &Path) -> Result<ExperimentReport> {
    parse_report(&std::fs::read_to_string(path)?)
}

/// Write `<name>.report.json` and `<name>.report.txt` under `dir`.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let json_path = dir.join(format!("{}.report.json", report.name));
    let txt_path = dir.join(format!("{}.report.txt", report.name));
    std::fs::write(&json_path, dump_report(report)?)?;
    std::fs::write(&txt_path, render_report_table(report))?;
    Ok((json_path, txt_path))
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.1}"),
        None => "-".into(),
    }
}

/// Aligned per-module stats with energy and totals, one line per module.
pub fn render_module_table(report: &SimReport, indent: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{indent}{:<14} {:>10} {:>8} {:>9} {:>8} {:>7}  {}\n",
        "module", "mean ms", "std", "p99 ms", "miss %", "done", "note"
    ));
    for (name, m) in &report.modules {
        let note = if m.starved { "starved" } else { "" };
        out.push_str(&format!(
            "{indent}{:<14} {:>10} {:>8} {:>9} {:>8.1} {:>7}  {}\n",
            name,
            fmt_opt(m.mean_ms),
            fmt_opt(m.std_ms),
            fmt_opt(m.p99_ms),
            m.miss_rate * 100.0,
            m.completed,
            note
        ));
    }
    if !report.starved_tasks.is_empty() {
        out.push_str(&format!(
            "{indent}starved tasks: {}\n",
            report.starved_tasks.join(", ")
        ));
    }
    let mut busy: BTreeMap<&str, f64> = BTreeMap::new();
    for (id, pe) in &report.energy.processors {
        let kind = id.trim_end_matches(|c: char| c.is_ascii_digit());
        *busy.entry(kind).or_default() += pe.busy_ms;
    }
    let busy_line: Vec<String> = busy.iter().map(|(k, v)| format!("{k} {v:.0} ms")).collect();
    out.push_str(&format!(
        "{indent}energy {:.1} J | busy: {}\n",
        report.energy.total_j,
        busy_line.join(", ")
    ));
    out.push_str(&format!(
        "{indent}totals: {} completed, {} missed, {} dropped\n",
        report.totals.completed, report.totals.missed, report.totals.dropped
    ));
    out
}

/// Aligned per-module table, one block per cell.
pub fn render_report_table(report: &ExperimentReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "experiment {} | platform {} | seed {} | horizon {} ms | noise {}\n",
        report.name, report.platform, report.seed, report.horizon_ms, report.noise_sigma
    ));
    for cell in &report.cells {
        out.push_str(&format!(
            "\n{} / {} (segment {}, policy {})\n",
            cell.app, cell.stage, cell.segment, cell.policy
        ));
        if let Some(s) = &cell.search {
            out.push_str(&format!(
                "  placement search: {} raw candidates, {} forms evaluated\n",
                s.raw_candidates, s.evaluated_forms
            ));
        }
        if !cell.iterations.is_empty() {
            let last = cell.iterations.last().unwrap();
            out.push_str(&format!(
                "  refinement: {} rounds, fixpoint {}\n",
                cell.iterations.len(),
                last.fixpoint
            ));
        }
        out.push_str(&render_module_table(&cell.report, "  "));
    }
    out
}

/// Per-module signed deltas between two matched cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleDelta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_ms: Option<f64>,
    pub miss_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDiff {
    pub app: String,
    pub stage_a: Stage,
    pub stage_b: Stage,
    pub modules: BTreeMap<String, ModuleDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDiff {
    pub a: String,
    pub b: String,
    pub cells: Vec<CellDiff>,
}

fn workload_identity(r: &ExperimentReport) -> String {
    let apps: Vec<&str> = r.cells.iter().map(|c| c.app.as_str()).collect();
    format!("{}:{:?}", r.platform, apps)
}

/// Signed per-module deltas (b minus a) for positionally matched cells.
/// The two reports must cover the same apps on the same platform.
pub fn diff_reports(a: &ExperimentReport, b: &ExperimentReport) -> Result<ReportDiff> {
    if workload_identity(a) != workload_identity(b) {
        return Err(Error::WorkloadMismatch {
            a: workload_identity(a),
            b: workload_identity(b),
        });
    }
    let mut cells = Vec::new();
    for (ca, cb) in a.cells.iter().zip(&b.cells) {
        let mods_a: Vec<&String> = ca.report.modules.keys().collect();
        let mods_b: Vec<&String> = cb.report.modules.keys().collect();
        if mods_a != mods_b {
            return Err(Error::WorkloadMismatch {
                a: format!("{} modules {mods_a:?}", ca.app),
                b: format!("{} modules {mods_b:?}", cb.app),
            });
        }
        let modules = ca
            .report
            .modules
            .iter()
            .map(|(name, ma)| {
                let mb = &cb.report.modules[name];
                let mean = match (ma.mean_ms, mb.mean_ms) {
                    (Some(x), Some(y)) => Some(y - x),
                    _ => None,
                };
                (
                    name.clone(),
                    ModuleDelta {
                        mean_ms: mean,
                        miss_rate: mb.miss_rate - ma.miss_rate,
                    },
                )
            })
            .collect();
        cells.push(CellDiff {
            app: ca.app.clone(),
            stage_a: ca.stage,
            stage_b: cb.stage,
            modules,
        });
    }
    Ok(ReportDiff {
        a: a.name.clone(),
        b: b.name.clone(),
        cells,
    })
}

pub fn render_diff(diff: &ReportDiff) -> String {
    let mut out = String::new();
    out.push_str(&format!("diff {} -> {}\n", diff.a, diff.b));
    for cell in &diff.cells {
        out.push_str(&format!(
            "\n{} ({} -> {})\n",
            cell.app, cell.stage_a, cell.stage_b
        ));
        out.push_str(&format!(
            "  {:<14} {:>12} {:>12}\n",
            "module", "d mean ms", "d miss %"
        ));
        for (name, d) in &cell.modules {
            let mean = match d.mean_ms {
                Some(v) => format!("{v:+.1}"),
                None => "-".into(),
            };
            out.push_str(&format!(
                "  {:<14} {:>12} {:>+11.1}\n",
                name,
                mean,
                d.miss_rate * 100.0
            ));
        }
    }
    out
}
