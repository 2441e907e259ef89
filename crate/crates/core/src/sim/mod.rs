//! Deterministic discrete-event execution of a task graph on a platform
//! under one of three CPU scheduling policies, with serial accelerator
//! engines whose service rate degrades as distinct co-running tasks pile
//! up. Internal time is integer microseconds; identical inputs and seed
//! produce identical outputs, byte-for-byte.
//!
//! Work item lifecycle: trigger -> pending (capacity one, oldest replaced)
//! -> service -> finish. Latency is measured from first service, not from
//! arrival: queue wait shows up as drops and staleness, never as latency.
//! A deadline miss is latency above deadline x slack; drops are not misses.
//!
//! Threads per task: one main plus assistants. Assistants carry a fixed
//! fraction of the main cost per activation, released at item arrival
//! with a backlog of at most one batch. Tasks placed on an accelerator
//! spend a dispatch slice of main-thread time on the host core, then
//! block for engine service.

pub mod report;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, BTreeMap, VecDeque};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dag::{Dag, Platform, ProcKind};
use crate::heft::{default_schedule, default_schedule_pinned, Schedule};
use crate::{Error, Result};

pub use report::{
    EnergyReport, ModuleStats, ProcEnergy, SimReport, TaskStats, Totals, TraceEv, TraceEvent,
};
use report::{mean_std, p99, round3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Policy {
    /// Per-core round robin; a woken thread goes to the queue front and
    /// preempts the current one.
    TimeSharing,
    /// Every thread of a task holds the task's schedule priority; strict
    /// priority, FIFO among equals, run to block.
    StaticRt,
    /// Main threads are raised to their schedule priority only while
    /// holding a work item; assistants and idle mains stay in the
    /// time-shared band.
    JitRt,
}

impl Policy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Policy::TimeSharing => "TIME_SHARING",
            Policy::StaticRt => "STATIC_RT",
            Policy::JitRt => "JIT_RT",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Policy> {
        match s {
            "TIME_SHARING" => Ok(Policy::TimeSharing),
            "STATIC_RT" => Ok(Policy::StaticRt),
            "JIT_RT" => Ok(Policy::JitRt),
            other => Err(Error::Parse(format!("unknown policy {other}"))),
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub horizon_ms: f64,
    pub seed: u64,
    /// Multiplicative execution noise; 0 disables. The factor is
    /// 1 + sigma * z with z standard normal truncated to [-2, 2].
    pub noise_sigma: f64,
    /// Deadline slack multiplier; a miss is latency > deadline * slack.
    pub slack_factor: f64,
    pub quantum_ms: f64,
    /// Host-side main-thread time to launch one accelerator request.
    pub dispatch_ms: f64,
    /// Assistant work per activation as a fraction of the main cost.
    pub assistant_fraction: f64,
    pub gpu_corun_gamma: f64,
    pub dla_corun_gamma: f64,
    /// Unbounded FIFO pending queues instead of replace-oldest capacity 1.
    pub unbounded_queues: bool,
    pub trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            horizon_ms: 10_000.0,
            seed: 1,
            noise_sigma: 0.0,
            slack_factor: 1.10,
            quantum_ms: 10.0,
            dispatch_ms: 0.2,
            assistant_fraction: 0.2,
            gpu_corun_gamma: 0.15,
            dla_corun_gamma: 0.0,
            unbounded_queues: false,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub report: SimReport,
    pub trace: Vec<TraceEvent>,
}

fn to_us(ms: f64) -> u64 {
    (ms * 1000.0).round().max(0.0) as u64
}

fn to_ms(us: u64) -> f64 {
    us as f64 / 1000.0
}

/// Per-activation noise factor, independent of simulation history.
fn noise_factor(seed: u64, task: usize, seq: u64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 1.0;
    }
    let h = seed
        ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(task as u64 + 1)
        ^ 0xD1B5_4A32_D192_ED03u64.wrapping_mul(seq + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(h);
    let z: f64 = loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= 2.0 {
            break z;
        }
    };
    (1.0 + sigma * z).max(0.05)
}

#[derive(Debug, Clone, Copy)]
struct Item {
    seq: u64,
    start_us: Option<u64>,
    /// Module entry timestamp; None until resolved at first service for
    /// items that begin a module (no same-category input).
    entry_us: Option<u64>,
    main_us: u64,
    engine_us: u64,
}

#[derive(Debug)]
struct TaskState {
    pending: VecDeque<Item>,
    current: Option<Item>,
    next_seq: u64,
    activations: u64,
    completions: u64,
    drops: u64,
    misses: u64,
    latencies_ms: Vec<f64>,
    /// Per in-edge slot: freshness of triggering inputs and the module
    /// entry carried by the latest delivery.
    fresh: Vec<bool>,
    latest_entry: Vec<Option<u64>>,
    dispatching: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ThrMode {
    Idle,
    Queued,
    Running,
    Blocked,
}

#[derive(Debug)]
struct Thr {
    task: usize,
    is_main: bool,
    core: usize,
    remaining_us: u64,
    pending_share_us: Option<u64>,
    mode: ThrMode,
    promoted: bool,
    fifo_key: u64,
    grant_us: u64,
}

#[derive(Debug)]
struct Core {
    proc: usize,
    /// (-priority, fifo) -> thread; first entry is the most urgent.
    rt: BTreeMap<(i64, u64), usize>,
    dq: VecDeque<usize>,
    running: Option<usize>,
    gen: u64,
    fifo_seq: u64,
}

#[derive(Debug)]
struct Engine {
    proc: usize,
    /// (task, enqueue time); at most one in-flight item per task exists.
    queue: Vec<(usize, u64)>,
    running: Option<usize>,
    remaining_us: u64,
    f_milli: u64,
    last_us: u64,
    gen: u64,
    gamma_milli: u64,
}

impl Engine {
    fn k(&self) -> u64 {
        self.queue.len() as u64 + u64::from(self.running.is_some())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Ev {
    EngineDone { eng: usize, gen: u64 },
    CoreDone { core: usize, gen: u64 },
    CoreQuantum { core: usize, gen: u64 },
    Fire { task: usize },
}

impl Ev {
    fn class(&self) -> u8 {
        match self {
            Ev::EngineDone { .. } => 0,
            Ev::CoreDone { .. } => 1,
            Ev::CoreQuantum { .. } => 2,
            Ev::Fire { .. } => 3,
        }
    }

    fn entity(&self) -> usize {
        match *self {
            Ev::EngineDone { eng, .. } => eng,
            Ev::CoreDone { core, .. } | Ev::CoreQuantum { core, .. } => core,
            Ev::Fire { task } => task,
        }
    }
}

struct Machine<'a> {
    dag: &'a Dag,
    platform: &'a Platform,
    sched: &'a Schedule,
    policy: Policy,
    cfg: &'a SimConfig,
    now: u64,
    horizon_us: u64,
    heap: BinaryHeap<Reverse<(u64, u8, usize, u64, Ev)>>,
    push_seq: u64,
    pred: Vec<Vec<(usize, usize)>>,
    succ: Vec<Vec<(usize, usize)>>,
    in_slot: Vec<usize>,
    trig_in: Vec<Vec<bool>>,
    is_exit: Vec<bool>,
    on_engine: Vec<bool>,
    tasks: Vec<TaskState>,
    threads: Vec<Thr>,
    mains: Vec<usize>,
    assistants: Vec<Vec<usize>>,
    cores: Vec<Core>,
    engines: Vec<Engine>,
    engine_of_proc: BTreeMap<usize, usize>,
    busy_us: Vec<u64>,
    exit_samples: Vec<Vec<f64>>,
    exit_missed: Vec<u64>,
    trace: Vec<TraceEvent>,
}

impl<'a> Machine<'a> {
    fn build(
        dag: &'a Dag,
        platform: &'a Platform,
        sched: &'a Schedule,
        policy: Policy,
        cfg: &'a SimConfig,
    ) -> Result<Machine<'a>> {
        let problems = dag.validate(platform);
        if !problems.is_empty() {
            return Err(Error::InvalidDag(problems.join("; ")));
        }
        let n = dag.nodes.len();
        if sched.assignment.len() != n || sched.priorities.len() != n {
            return Err(Error::InvalidSchedule(
                "schedule does not match dag".into(),
            ));
        }
        for (t, &p) in sched.assignment.iter().enumerate() {
            if p >= platform.processors.len()
                || !dag.nodes[t].eligible_on(platform.processors[p].kind)
            {
                return Err(Error::InvalidSchedule(format!(
                    "task {} has an invalid placement",
                    dag.nodes[t].id
                )));
            }
        }
        if cfg.horizon_ms <= 0.0 || cfg.quantum_ms <= 0.0 {
            return Err(Error::Invalid("horizon and quantum must be positive".into()));
        }

        let pred = dag.predecessors();
        let succ = dag.successors();
        let mut in_slot = vec![usize::MAX; dag.edges.len()];
        for t in 0..n {
            for (slot, &(_, e)) in pred[t].iter().enumerate() {
                in_slot[e] = slot;
            }
        }
        let trig_in: Vec<Vec<bool>> = (0..n)
            .map(|t| pred[t].iter().map(|&(_, e)| dag.edges[e].triggering).collect())
            .collect();
        let is_exit: Vec<bool> = (0..n)
            .map(|t| {
                !succ[t]
                    .iter()
                    .any(|&(j, _)| dag.nodes[j].category == dag.nodes[t].category)
            })
            .collect();
        let on_engine: Vec<bool> = (0..n)
            .map(|t| platform.processors[sched.assignment[t]].kind != ProcKind::Cpu)
            .collect();

        let mut cores = Vec::new();
        let mut core_of_proc = BTreeMap::new();
        let mut engines = Vec::new();
        let mut engine_of_proc = BTreeMap::new();
        for (p, proc) in platform.processors.iter().enumerate() {
            if proc.kind == ProcKind::Cpu {
                core_of_proc.insert(p, cores.len());
                cores.push(Core {
                    proc: p,
                    rt: BTreeMap::new(),
                    dq: VecDeque::new(),
                    running: None,
                    gen: 0,
                    fifo_seq: 0,
                });
            } else {
                let gamma = match proc.kind {
                    ProcKind::Gpu => cfg.gpu_corun_gamma,
                    ProcKind::Dla => cfg.dla_corun_gamma,
                    ProcKind::Cpu => 0.0,
                };
                engine_of_proc.insert(p, engines.len());
                engines.push(Engine {
                    proc: p,
                    queue: Vec::new(),
                    running: None,
                    remaining_us: 0,
                    f_milli: 1000,
                    last_us: 0,
                    gen: 0,
                    gamma_milli: (gamma * 1000.0).round() as u64,
                });
            }
        }
        let host_proc = (0..platform.processors.len()).find(|&p| {
            platform.processors[p].kind == ProcKind::Cpu
                && !platform.is_reserved(&platform.processors[p].id)
        });
        if on_engine.iter().any(|&e| e) && host_proc.is_none() {
            return Err(Error::InvalidPlatform(
                "accelerator tasks need a general cpu core for dispatch".into(),
            ));
        }
        let host_core = host_proc
            .or_else(|| core_of_proc.keys().next().copied())
            .map(|p| core_of_proc[&p])
            .ok_or_else(|| Error::InvalidPlatform("platform has no cpu core".into()))?;

        let mut threads = Vec::new();
        let mut mains = Vec::new();
        let mut assistants = Vec::new();
        for t in 0..n {
            let core = if on_engine[t] {
                host_core
            } else {
                *core_of_proc.get(&sched.assignment[t]).ok_or_else(|| {
                    Error::InvalidSchedule(format!(
                        "task {} placed off any cpu core",
                        dag.nodes[t].id
                    ))
                })?
            };
            mains.push(threads.len());
            threads.push(Thr {
                task: t,
                is_main: true,
                core,
                remaining_us: 0,
                pending_share_us: None,
                mode: ThrMode::Idle,
                promoted: false,
                fifo_key: 0,
                grant_us: 0,
            });
            let mut helpers = Vec::new();
            for _ in 1..dag.nodes[t].threads {
                helpers.push(threads.len());
                threads.push(Thr {
                    task: t,
                    is_main: false,
                    core,
                    remaining_us: 0,
                    pending_share_us: None,
                    mode: ThrMode::Idle,
                    promoted: false,
                    fifo_key: 0,
                    grant_us: 0,
                });
            }
            assistants.push(helpers);
        }

        let tasks = (0..n)
            .map(|t| TaskState {
                pending: VecDeque::new(),
                current: None,
                next_seq: 0,
                activations: 0,
                completions: 0,
                drops: 0,
                misses: 0,
                latencies_ms: Vec::new(),
                fresh: vec![false; pred[t].len()],
                latest_entry: vec![None; pred[t].len()],
                dispatching: false,
            })
            .collect();

        let busy_us = vec![0_u64; platform.processors.len()];
        Ok(Machine {
            dag,
            platform,
            sched,
            policy,
            cfg,
            now: 0,
            horizon_us: to_us(cfg.horizon_ms),
            heap: BinaryHeap::new(),
            push_seq: 0,
            pred,
            succ,
            in_slot,
            trig_in,
            is_exit,
            on_engine,
            tasks,
            threads,
            mains,
            assistants,
            cores,
            engines,
            engine_of_proc,
            busy_us,
            exit_samples: vec![Vec::new(); n],
            exit_missed: vec![0; n],
            trace: Vec::new(),
        })
    }

    fn push(&mut self, t: u64, ev: Ev) {
        self.push_seq += 1;
        self.heap
            .push(Reverse((t, ev.class(), ev.entity(), self.push_seq, ev)));
    }

    fn emit(&mut self, task: usize, seq: u64, ev: TraceEv) {
        if self.cfg.trace {
            self.trace.push(TraceEvent {
                t_ms: round3(to_ms(self.now)),
                task: self.dag.nodes[task].id.clone(),
                seq,
                ev,
            });
        }
    }

    /// Band priority of a thread under the active policy.
    fn prio_of(&self, th: usize) -> Option<i64> {
        let thr = &self.threads[th];
        match self.policy {
            Policy::TimeSharing => None,
            Policy::StaticRt => Some(self.sched.priorities[thr.task]),
            Policy::JitRt => {
                if thr.is_main && thr.promoted {
                    Some(self.sched.priorities[thr.task])
                } else {
                    None
                }
            }
        }
    }

    fn rt_key(&self, th: usize) -> (i64, u64) {
        (-self.prio_of(th).unwrap(), self.threads[th].fifo_key)
    }

    // -- CPU cores ---------------------------------------------------------

    fn wake(&mut self, th: usize) {
        debug_assert_eq!(self.threads[th].mode, ThrMode::Idle);
        let c = self.threads[th].core;
        self.threads[th].mode = ThrMode::Queued;
        if self.prio_of(th).is_some() {
            self.cores[c].fifo_seq += 1;
            self.threads[th].fifo_key = self.cores[c].fifo_seq;
            let key = self.rt_key(th);
            self.cores[c].rt.insert(key, th);
        } else {
            self.cores[c].dq.push_front(th);
        }
        self.dispatch(c, true);
    }

    fn pick(&self, c: usize) -> Option<(usize, bool)> {
        if let Some((_, &th)) = self.cores[c].rt.iter().next() {
            return Some((th, true));
        }
        self.cores[c].dq.front().map(|&th| (th, false))
    }

    /// Account the running thread's progress and put it back at the front
    /// of its band.
    fn preempt(&mut self, c: usize) {
        let Some(r) = self.cores[c].running.take() else {
            return;
        };
        let executed = self.now - self.threads[r].grant_us;
        self.busy_us[self.cores[c].proc] += executed;
        self.threads[r].remaining_us = self.threads[r].remaining_us.saturating_sub(executed);
        self.threads[r].mode = ThrMode::Queued;
        if self.prio_of(r).is_some() {
            let key = self.rt_key(r);
            self.cores[c].rt.insert(key, r);
        } else {
            self.cores[c].dq.push_front(r);
        }
        self.cores[c].gen += 1;
    }

    fn dispatch(&mut self, c: usize, band_preempt: bool) {
        let Some((cand, cand_rt)) = self.pick(c) else {
            return;
        };
        if let Some(r) = self.cores[c].running {
            let r_rt = self.prio_of(r).is_some();
            let take_over = if cand_rt && r_rt {
                self.rt_key(cand) < self.rt_key(r)
            } else if cand_rt {
                true
            } else if r_rt {
                false
            } else {
                band_preempt
            };
            if !take_over {
                return;
            }
        }
        // Pop the winner first so the preempted thread requeues behind it.
        let th = if cand_rt {
            let (&key, &th) = self.cores[c].rt.iter().next().unwrap();
            self.cores[c].rt.remove(&key);
            th
        } else {
            self.cores[c].dq.pop_front().unwrap()
        };
        self.preempt(c);
        self.threads[th].mode = ThrMode::Running;
        self.threads[th].grant_us = self.now;
        self.cores[c].running = Some(th);
        self.cores[c].gen += 1;
        let gen = self.cores[c].gen;

        // First grant of a cpu item's main segment starts its clock.
        let task = self.threads[th].task;
        if self.threads[th].is_main && !self.on_engine[task] {
            if let Some(item) = self.tasks[task].current {
                if item.start_us.is_none() {
                    let mut it = item;
                    it.start_us = Some(self.now);
                    if it.entry_us.is_none() {
                        it.entry_us = Some(self.now);
                    }
                    let seq = it.seq;
                    self.tasks[task].current = Some(it);
                    self.emit(task, seq, TraceEv::Started);
                }
            }
        }

        let remaining = self.threads[th].remaining_us;
        let quantum = to_us(self.cfg.quantum_ms);
        if self.prio_of(th).is_some() || remaining <= quantum {
            self.push(self.now + remaining, Ev::CoreDone { core: c, gen });
        } else {
            self.push(self.now + quantum, Ev::CoreQuantum { core: c, gen });
        }
    }

    fn on_quantum(&mut self, c: usize) {
        let Some(r) = self.cores[c].running.take() else {
            return;
        };
        let executed = self.now - self.threads[r].grant_us;
        self.busy_us[self.cores[c].proc] += executed;
        self.threads[r].remaining_us = self.threads[r].remaining_us.saturating_sub(executed);
        self.threads[r].mode = ThrMode::Queued;
        self.cores[c].dq.push_back(r);
        self.cores[c].gen += 1;
        self.dispatch(c, false);
    }

    fn on_core_done(&mut self, c: usize) {
        let Some(r) = self.cores[c].running.take() else {
            return;
        };
        let executed = self.now - self.threads[r].grant_us;
        self.busy_us[self.cores[c].proc] += executed;
        self.threads[r].remaining_us = 0;
        self.cores[c].gen += 1;

        let task = self.threads[r].task;
        if self.threads[r].is_main {
            if self.tasks[task].dispatching {
                // Launch complete: hand the item to the engine, block.
                self.tasks[task].dispatching = false;
                self.threads[r].mode = ThrMode::Blocked;
                let seq = self.tasks[task].current.map(|i| i.seq).unwrap_or(0);
                self.emit(task, seq, TraceEv::DispatchDone);
                let eng = self.engine_of_proc[&self.sched.assignment[task]];
                self.engine_enqueue(eng, task);
            } else {
                self.threads[r].mode = ThrMode::Idle;
                self.finish_item(task);
            }
        } else {
            // Assistant batch done; roll straight into a backlogged batch.
            if let Some(share) = self.threads[r].pending_share_us.take() {
                self.threads[r].remaining_us = share;
                self.threads[r].mode = ThrMode::Queued;
                if self.prio_of(r).is_some() {
                    self.cores[c].fifo_seq += 1;
                    self.threads[r].fifo_key = self.cores[c].fifo_seq;
                    let key = self.rt_key(r);
                    self.cores[c].rt.insert(key, r);
                } else {
                    self.cores[c].dq.push_back(r);
                }
            } else {
                self.threads[r].mode = ThrMode::Idle;
            }
        }
        self.dispatch(c, false);
    }

    // -- engines -----------------------------------------------------------

    /// Bring consumed work up to date at the current rate.
    fn engine_update(&mut self, e: usize) {
        let elapsed = self.now - self.engines[e].last_us;
        if elapsed > 0 && self.engines[e].running.is_some() {
            self.busy_us[self.engines[e].proc] += elapsed;
            let consumed = elapsed * 1000 / self.engines[e].f_milli;
            self.engines[e].remaining_us =
                self.engines[e].remaining_us.saturating_sub(consumed);
        }
        self.engines[e].last_us = self.now;
    }

    /// Recompute the co-run factor and reschedule completion.
    fn engine_refresh(&mut self, e: usize) {
        let k = self.engines[e].k().max(1);
        self.engines[e].f_milli = 1000 + self.engines[e].gamma_milli * (k - 1);
        if self.engines[e].running.is_some() {
            self.engines[e].gen += 1;
            let gen = self.engines[e].gen;
            let done = self.now
                + (self.engines[e].remaining_us * self.engines[e].f_milli).div_ceil(1000);
            self.push(done, Ev::EngineDone { eng: e, gen });
        }
    }

    fn engine_enqueue(&mut self, e: usize, task: usize) {
        self.engine_update(e);
        self.engines[e].queue.push((task, self.now));
        if self.engines[e].running.is_none() {
            self.engine_start_next(e);
        }
        self.engine_refresh(e);
    }

    fn engine_start_next(&mut self, e: usize) {
        if self.engines[e].queue.is_empty() {
            return;
        }
        // Admission is FIFO: the engine runtime does not see band priorities.
        let best = self
            .engines[e]
            .queue
            .iter()
            .enumerate()
            .min_by_key(|&(_, &(task, enq))| (enq, task))
            .map(|(i, _)| i)
            .unwrap();
        let (task, _) = self.engines[e].queue.swap_remove(best);
        // swap_remove breaks order but selection is by key, order unused.
        let mut item = self.tasks[task].current.expect("engine item present");
        item.start_us = Some(self.now);
        if item.entry_us.is_none() {
            item.entry_us = Some(self.now);
        }
        let seq = item.seq;
        self.tasks[task].current = Some(item);
        self.engines[e].running = Some(task);
        self.engines[e].remaining_us = item.engine_us;
        let engine_id = self.platform.processors[self.engines[e].proc].id.clone();
        self.emit(task, seq, TraceEv::EngineStart { engine: engine_id });
        self.emit(task, seq, TraceEv::Started);
    }

    fn on_engine_done(&mut self, e: usize) {
        self.engine_update(e);
        let Some(task) = self.engines[e].running.take() else {
            return;
        };
        self.engines[e].remaining_us = 0;
        self.finish_item(task);
        self.engine_start_next(e);
        self.engine_refresh(e);
    }

    // -- item lifecycle ----------------------------------------------------

    fn fire(&mut self, t: usize) {
        let node = &self.dag.nodes[t];
        let seq = self.tasks[t].next_seq;
        self.tasks[t].next_seq += 1;
        self.tasks[t].activations += 1;

        let factor = noise_factor(self.cfg.seed, t, seq, self.cfg.noise_sigma);
        let eff = self.platform.effective_cost(node, self.sched.assignment[t]);
        let (main_ms, engine_ms) = if self.on_engine[t] {
            (self.cfg.dispatch_ms, eff * factor)
        } else {
            (eff * factor, 0.0)
        };

        // Module entry: inherit the earliest same-category input.
        let entry = self.pred[t]
            .iter()
            .enumerate()
            .filter(|&(_, &(s, _))| self.dag.nodes[s].category == node.category)
            .filter_map(|(slot, _)| self.tasks[t].latest_entry[slot])
            .min();

        // Consume freshness on triggering inputs.
        for slot in 0..self.tasks[t].fresh.len() {
            if self.trig_in[t][slot] {
                self.tasks[t].fresh[slot] = false;
            }
        }

        let item = Item {
            seq,
            start_us: None,
            entry_us: entry,
            main_us: to_us(main_ms),
            engine_us: to_us(engine_ms),
        };
        self.emit(t, seq, TraceEv::Arrival);

        // Assistants get their share on arrival, newest batch wins.
        let helpers = self.assistants[t].clone();
        if !helpers.is_empty() {
            let total = to_us(self.cfg.assistant_fraction * main_ms);
            let share = total / helpers.len() as u64;
            if share > 0 {
                for a in helpers {
                    if self.threads[a].mode == ThrMode::Idle {
                        self.threads[a].remaining_us = share;
                        self.wake(a);
                    } else {
                        self.threads[a].pending_share_us = Some(share);
                    }
                }
            }
        }

        if self.tasks[t].current.is_none() {
            self.tasks[t].pending.push_back(item);
            self.take_next(t);
        } else {
            let cap = if self.cfg.unbounded_queues { usize::MAX } else { 1 };
            if self.tasks[t].pending.len() >= cap {
                let old = self.tasks[t].pending.pop_front().unwrap();
                self.tasks[t].drops += 1;
                self.emit(t, old.seq, TraceEv::Dropped);
            }
            self.tasks[t].pending.push_back(item);
        }
    }

    fn take_next(&mut self, t: usize) {
        let Some(item) = self.tasks[t].pending.pop_front() else {
            return;
        };
        let seq = item.seq;
        self.tasks[t].current = Some(item);
        let main = self.mains[t];
        self.threads[main].remaining_us = if self.on_engine[t] {
            self.tasks[t].dispatching = true;
            to_us(self.cfg.dispatch_ms)
        } else {
            item.main_us
        };
        if self.policy == Policy::JitRt {
            self.threads[main].promoted = true;
            let priority = self.sched.priorities[t];
            self.emit(t, seq, TraceEv::PriorityRaise { priority });
        }
        self.wake(main);
    }

    fn finish_item(&mut self, t: usize) {
        let item = self.tasks[t].current.take().expect("finishing current item");
        // Engine completions find the main still blocked on the launch.
        let main = self.mains[t];
        if self.threads[main].mode == ThrMode::Blocked {
            self.threads[main].mode = ThrMode::Idle;
        }
        let node = &self.dag.nodes[t];
        let start = item.start_us.expect("finished item was started");
        let entry = item.entry_us.expect("entry resolved at start");
        let latency_ms = to_ms(self.now - start);
        let allowed = node.deadline_ms * self.cfg.slack_factor;
        let missed = latency_ms > allowed;
        self.tasks[t].completions += 1;
        self.tasks[t].latencies_ms.push(latency_ms);
        if missed {
            self.tasks[t].misses += 1;
        }
        if self.is_exit[t] {
            let sample_ms = to_ms(self.now - entry);
            self.exit_samples[t].push(sample_ms);
            if sample_ms > allowed {
                self.exit_missed[t] += 1;
            }
        }
        self.emit(
            t,
            item.seq,
            TraceEv::Finished {
                latency_ms: round3(latency_ms),
                missed,
            },
        );

        // Deliver to consumers and let all-of joins fire.
        for i in 0..self.succ[t].len() {
            let (dst, e) = self.succ[t][i];
            let slot = self.in_slot[e];
            self.tasks[dst].latest_entry[slot] = Some(entry);
            if self.dag.edges[e].triggering {
                self.tasks[dst].fresh[slot] = true;
            }
            let reactive = self.dag.nodes[dst].period_ms.is_none();
            if reactive {
                let any_trig = self.trig_in[dst].iter().any(|&b| b);
                let all_fresh = self
                    .trig_in[dst]
                    .iter()
                    .zip(&self.tasks[dst].fresh)
                    .all(|(&trig, &fresh)| !trig || fresh);
                if any_trig && all_fresh {
                    self.fire(dst);
                }
            }
        }

        if self.policy == Policy::JitRt {
            self.threads[main].promoted = false;
            self.emit(t, item.seq, TraceEv::PriorityDrop);
        }
        self.take_next(t);
    }

    // -- run ---------------------------------------------------------------

    fn run(&mut self) {
        for t in 0..self.dag.nodes.len() {
            if self.dag.nodes[t].period_ms.is_some() {
                self.push(0, Ev::Fire { task: t });
            }
        }
        while let Some(&Reverse((when, _, _, _, _))) = self.heap.peek() {
            if when > self.horizon_us {
                break;
            }
            let Reverse((when, _, _, _, ev)) = self.heap.pop().unwrap();
            self.now = when;
            match ev {
                Ev::Fire { task } => {
                    self.fire(task);
                    let period = to_us(self.dag.nodes[task].period_ms.unwrap());
                    self.push(self.now + period, Ev::Fire { task });
                }
                Ev::CoreDone { core, gen } => {
                    if self.cores[core].gen == gen {
                        self.on_core_done(core);
                    }
                }
                Ev::CoreQuantum { core, gen } => {
                    if self.cores[core].gen == gen {
                        self.on_quantum(core);
                    }
                }
                Ev::EngineDone { eng, gen } => {
                    if self.engines[eng].gen == gen {
                        self.on_engine_done(eng);
                    }
                }
            }
        }
        self.now = self.horizon_us;
    }

    fn into_report(mut self) -> SimOutput {
        let n = self.dag.nodes.len();
        let mut modules: BTreeMap<String, ModuleStats> = BTreeMap::new();
        let mut categories: Vec<crate::dag::Category> =
            self.dag.nodes.iter().map(|t| t.category).collect();
        categories.sort();
        categories.dedup();

        let mut pooled_completed = 0_u64;
        let mut pooled_missed = 0_u64;
        for cat in categories {
            let exits: Vec<usize> = (0..n)
                .filter(|&t| self.dag.nodes[t].category == cat && self.is_exit[t])
                .collect();
            let completed: u64 = exits.iter().map(|&t| self.exit_samples[t].len() as u64).sum();
            let missed: u64 = exits.iter().map(|&t| self.exit_missed[t]).sum();
            pooled_completed += completed;
            pooled_missed += missed;
            let dominant = exits
                .iter()
                .copied()
                .filter(|&t| !self.exit_samples[t].is_empty())
                .map(|t| (mean_std(&self.exit_samples[t]).0, t))
                .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(b.1.cmp(&a.1)));
            let stats = match dominant {
                Some((_, t)) => {
                    let (mean, std) = mean_std(&self.exit_samples[t]);
                    let p = p99(&mut self.exit_samples[t]);
                    ModuleStats {
                        completed,
                        missed,
                        miss_rate: round3(missed as f64 / completed as f64),
                        starved: false,
                        dominant_exit: Some(self.dag.nodes[t].id.clone()),
                        mean_ms: Some(round3(mean)),
                        std_ms: Some(round3(std)),
                        p99_ms: Some(round3(p)),
                        deadline_ms: self.dag.nodes[t].deadline_ms,
                    }
                }
                None => ModuleStats {
                    completed: 0,
                    missed: 0,
                    miss_rate: 1.0,
                    starved: true,
                    dominant_exit: None,
                    mean_ms: None,
                    std_ms: None,
                    p99_ms: None,
                    deadline_ms: exits
                        .iter()
                        .map(|&t| self.dag.nodes[t].deadline_ms)
                        .fold(f64::INFINITY, f64::min),
                },
            };
            modules.insert(cat.to_string(), stats);
        }

        let mut tasks = BTreeMap::new();
        let mut starved = Vec::new();
        let mut dropped = 0_u64;
        for t in 0..n {
            let ts = &self.tasks[t];
            dropped += ts.drops;
            if ts.completions == 0 {
                starved.push(self.dag.nodes[t].id.clone());
            }
            let (mean, max) = if ts.latencies_ms.is_empty() {
                (None, None)
            } else {
                let (m, _) = mean_std(&ts.latencies_ms);
                let mx = ts.latencies_ms.iter().copied().fold(0.0_f64, f64::max);
                (Some(round3(m)), Some(round3(mx)))
            };
            tasks.insert(
                self.dag.nodes[t].id.clone(),
                TaskStats {
                    activations: ts.activations,
                    completions: ts.completions,
                    drops: ts.drops,
                    misses: ts.misses,
                    mean_ms: mean,
                    max_ms: max,
                },
            );
        }
        starved.sort();

        let mut procs = BTreeMap::new();
        let mut total_j = 0.0;
        for (p, proc) in self.platform.processors.iter().enumerate() {
            let busy_ms = to_ms(self.busy_us[p]);
            let energy_j = busy_ms / 1000.0 * proc.power_watts;
            total_j += energy_j;
            procs.insert(
                proc.id.clone(),
                ProcEnergy {
                    busy_ms: round3(busy_ms),
                    energy_j: round3(energy_j),
                },
            );
        }

        let report = SimReport {
            policy: self.policy.as_str().to_string(),
            seed: self.cfg.seed,
            horizon_ms: self.cfg.horizon_ms,
            modules,
            tasks,
            starved_tasks: starved,
            energy: EnergyReport {
                processors: procs,
                total_j: round3(total_j),
            },
            totals: Totals {
                completed: pooled_completed,
                missed: pooled_missed,
                miss_rate: if pooled_completed == 0 {
                    1.0
                } else {
                    round3(pooled_missed as f64 / pooled_completed as f64)
                },
                dropped,
            },
        };
        SimOutput {
            report,
            trace: self.trace,
        }
    }
}

pub fn simulate(
    dag: &Dag,
    platform: &Platform,
    sched: &Schedule,
    policy: Policy,
    cfg: &SimConfig,
) -> Result<SimOutput> {
    let mut m = Machine::build(dag, platform, sched, policy, cfg)?;
    m.run();
    Ok(m.into_report())
}

/// Mean observed execution time per task (ms) under an untuned time-shared
/// deployment; tasks that never complete map to infinity.
pub fn measure_task_perf(
    dag: &Dag,
    platform: &Platform,
    cfg: &SimConfig,
) -> Result<BTreeMap<String, f64>> {
    measure_task_perf_pinned(dag, platform, &BTreeMap::new(), cfg)
}

/// Same measurement with accelerator placements forced by `pins`.
pub fn measure_task_perf_pinned(
    dag: &Dag,
    platform: &Platform,
    pins: &BTreeMap<usize, usize>,
    cfg: &SimConfig,
) -> Result<BTreeMap<String, f64>> {
    let sched = default_schedule_pinned(dag, platform, pins)?;
    let out = simulate(dag, platform, &sched, Policy::TimeSharing, cfg)?;
    Ok(perf_from_report(dag, &out.report))
}

/// Extract the same per-task means from any finished run.
pub fn perf_from_report(dag: &Dag, report: &SimReport) -> BTreeMap<String, f64> {
    dag.nodes
        .iter()
        .map(|n| {
            let mean = report
                .tasks
                .get(&n.id)
                .and_then(|t| t.mean_ms)
                .unwrap_or(f64::INFINITY);
            (n.id.clone(), mean)
        })
        .collect()
}

/// Convenience wrapper pairing `default_schedule` with a policy run.
pub fn simulate_default(
    dag: &Dag,
    platform: &Platform,
    policy: Policy,
    cfg: &SimConfig,
) -> Result<SimOutput> {
    let sched = default_schedule(dag, platform)?;
    simulate(dag, platform, &sched, policy, cfg)
}
