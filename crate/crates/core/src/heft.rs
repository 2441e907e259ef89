//! List scheduling by upward rank with insertion-based earliest-finish
//! placement, plus the schedule document (`.sched`) and a text Gantt view.
//!
//! rank(n) = w(n) + max over successors (c(n,m) + rank(m)), where w is the
//! mean effective cost over the processors the task may use and c is the
//! mean declared transfer cost of the edge. Exit tasks take rank = w.
//! Tasks are placed in descending rank order on the processor giving the
//! earliest insertion-based finish time; per-processor priorities follow
//! descending rank (larger number = more urgent).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dag::{Dag, Platform, ProcKind};
use crate::doc::SCHEMA_VERSION;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    /// Upward rank per node index.
    pub rank: Vec<f64>,
}

impl RankTable {
    /// Task order used for placement: descending rank, ties by node index.
    pub fn placement_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.rank.len()).collect();
        order.sort_by(|&a, &b| {
            self.rank[b]
                .partial_cmp(&self.rank[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        order
    }
}

pub fn compute_ranks(dag: &Dag, platform: &Platform) -> Result<RankTable> {
    let order = dag
        .topo_order()
        .map_err(|cycle| Error::InvalidDag(format!("cycle detected among {} nodes", cycle.len())))?;
    let succ = dag.successors();
    let n = dag.nodes.len();

    let mut wbar = vec![0.0; n];
    for (i, task) in dag.nodes.iter().enumerate() {
        let eligible: Vec<usize> = (0..platform.processors.len())
            .filter(|&p| task.eligible_on(platform.processors[p].kind))
            .collect();
        wbar[i] = if eligible.is_empty() {
            task.mean_cost()
        } else {
            eligible
                .iter()
                .map(|&p| platform.effective_cost(task, p))
                .sum::<f64>()
                / eligible.len() as f64
        };
    }

    let mut rank = vec![0.0; n];
    for &i in order.iter().rev() {
        let tail = succ[i]
            .iter()
            .map(|&(j, ei)| dag.edges[ei].mean_comm() + rank[j])
            .fold(0.0_f64, f64::max);
        rank[i] = wbar[i] + tail;
    }
    Ok(RankTable { rank })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub task: usize,
    pub start: f64,
    pub finish: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    /// Node index -> processor index.
    pub assignment: Vec<usize>,
    /// Node index -> priority; strictly ordered by descending rank among
    /// tasks sharing a processor (and globally, by construction).
    pub priorities: Vec<i64>,
    /// Per processor, slots sorted by start time.
    pub slots: Vec<Vec<Slot>>,
    pub makespan: f64,
}

impl Schedule {
    pub fn slot_of(&self, task: usize) -> Option<Slot> {
        let p = *self.assignment.get(task)?;
        self.slots
            .get(p)?
            .iter()
            .find(|s| s.task == task)
            .copied()
    }
}

/// Processors `task` may be placed on. Reserved processors are exclusive to
/// Planning/Control tasks in both directions when the platform reserves any;
/// if that leaves an isolated task with no eligible reserved instance, it
/// falls back to the general pool rather than becoming unschedulable.
pub fn candidate_processors(dag: &Dag, platform: &Platform, task: usize) -> Vec<usize> {
    let node = &dag.nodes[task];
    let eligible = |p: &usize| node.eligible_on(platform.processors[*p].kind);
    let all: Vec<usize> = (0..platform.processors.len()).filter(eligible).collect();
    if platform.reserved.is_empty() {
        return all;
    }
    let (reserved, general): (Vec<usize>, Vec<usize>) = all
        .into_iter()
        .partition(|&p| platform.is_reserved(&platform.processors[p].id));
    if node.category.is_isolated() {
        if reserved.is_empty() {
            general
        } else {
            reserved
        }
    } else {
        general
    }
}

pub fn schedule_heft(dag: &Dag, platform: &Platform, ranks: &RankTable) -> Result<Schedule> {
    schedule_heft_pinned(dag, platform, ranks, &BTreeMap::new())
}

/// HEFT placement with optional per-task processor pins (used when a
/// candidate assignment fixes accelerator placement ahead of scheduling).
pub fn schedule_heft_pinned(
    dag: &Dag,
    platform: &Platform,
    ranks: &RankTable,
    pins: &BTreeMap<usize, usize>,
) -> Result<Schedule> {
    let n = dag.nodes.len();
    if ranks.rank.len() != n {
        return Err(Error::InvalidSchedule(
            "rank table does not match dag".into(),
        ));
    }
    let pred = dag.predecessors();
    let order = ranks.placement_order();

    let mut assignment = vec![usize::MAX; n];
    let mut start = vec![0.0_f64; n];
    let mut finish = vec![0.0_f64; n];
    let mut slots: Vec<Vec<Slot>> = vec![Vec::new(); platform.processors.len()];
    let mut busy = vec![0.0_f64; platform.processors.len()];

    for &t in &order {
        let candidates: Vec<usize> = match pins.get(&t) {
            Some(&p) => vec![p],
            None => candidate_processors(dag, platform, t),
        };
        if candidates.is_empty() {
            return Err(Error::InvalidSchedule(format!(
                "task {} has no eligible processor",
                dag.nodes[t].id
            )));
        }
        let mut best: Option<(f64, f64, f64, usize)> = None;
        for &p in &candidates {
            let kind = platform.processors[p].kind;
            let ready = pred[t]
                .iter()
                .map(|&(s, ei)| {
                    let comm = if assignment[s] == p {
                        0.0
                    } else {
                        let skind = platform.processors[assignment[s]].kind;
                        dag.edges[ei].comm_between(skind, kind)
                    };
                    finish[s] + comm
                })
                .fold(0.0_f64, f64::max);
            let w = platform.effective_cost(&dag.nodes[t], p);
            let mut est = ready;
            for slot in &slots[p] {
                if est + w <= slot.start {
                    break;
                }
                if slot.finish > est {
                    est = slot.finish;
                }
            }
            let eft = est + w;
            // Equal finish times favor the least-loaded processor so that
            // late-ready tasks spread instead of piling onto one core.
            let better = match best {
                None => true,
                Some((beft, bbusy, _, _)) => {
                    eft < beft || (eft == beft && busy[p] < bbusy)
                }
            };
            if better {
                best = Some((eft, busy[p], est, p));
            }
        }
        let (eft, _, est, p) = best.unwrap();
        assignment[t] = p;
        start[t] = est;
        finish[t] = eft;
        busy[p] += eft - est;
        let pos = slots[p].partition_point(|s| s.start <= est);
        slots[p].insert(
            pos,
            Slot {
                task: t,
                start: est,
                finish: eft,
            },
        );
    }

    let mut priorities = vec![0_i64; n];
    for (pos, &t) in order.iter().enumerate() {
        priorities[t] = (n - pos) as i64;
    }
    let makespan = finish.iter().copied().fold(0.0_f64, f64::max);

    Ok(Schedule {
        assignment,
        priorities,
        slots,
        makespan,
    })
}

/// Structural checks on a schedule against its dag and platform.
/// Returns violations; empty means the schedule is well formed.
pub fn check_schedule(dag: &Dag, platform: &Platform, sched: &Schedule) -> Vec<String> {
    let mut violations = Vec::new();
    let n = dag.nodes.len();
    if sched.assignment.len() != n || sched.priorities.len() != n {
        violations.push("schedule size does not match dag".to_string());
        return violations;
    }
    for (t, &p) in sched.assignment.iter().enumerate() {
        if p >= platform.processors.len() {
            violations.push(format!("task {} assigned to unknown processor", dag.nodes[t].id));
            continue;
        }
        if !dag.nodes[t].eligible_on(platform.processors[p].kind) {
            violations.push(format!(
                "task {} placed on ineligible kind {}",
                dag.nodes[t].id, platform.processors[p].kind
            ));
        }
    }
    for (p, list) in sched.slots.iter().enumerate() {
        for w in list.windows(2) {
            if w[1].start < w[0].finish - 1e-9 {
                violations.push(format!(
                    "overlapping slots on {}: {} and {}",
                    platform.processors[p].id, dag.nodes[w[0].task].id, dag.nodes[w[1].task].id
                ));
            }
        }
        for s in list {
            if sched.assignment[s.task] != p {
                violations.push(format!(
                    "slot/assignment mismatch for task {}",
                    dag.nodes[s.task].id
                ));
            }
        }
    }
    let idx = dag.id_index();
    for e in &dag.edges {
        let (Some(&s), Some(&d)) = (idx.get(e.src.as_str()), idx.get(e.dst.as_str())) else {
            continue;
        };
        let (Some(ss), Some(ds)) = (sched.slot_of(s), sched.slot_of(d)) else {
            violations.push(format!("missing slot for edge {} -> {}", e.src, e.dst));
            continue;
        };
        let comm = if sched.assignment[s] == sched.assignment[d] {
            0.0
        } else {
            e.comm_between(
                platform.processors[sched.assignment[s]].kind,
                platform.processors[sched.assignment[d]].kind,
            )
        };
        if ds.start + 1e-9 < ss.finish + comm {
            violations.push(format!(
                "precedence violated on edge {} -> {}",
                e.src, e.dst
            ));
        }
    }
    // Priorities must strictly follow descending rank on each processor.
    // Flat-priority schedules (all equal) opt out of rank coupling.
    let flat = sched.priorities.windows(2).all(|w| w[0] == w[1]);
    if !flat {
        if let Ok(ranks) = compute_ranks(dag, platform) {
            for p in 0..platform.processors.len() {
                let on_p: Vec<usize> = (0..n).filter(|&t| sched.assignment[t] == p).collect();
                for &a in &on_p {
                    for &b in &on_p {
                        if ranks.rank[a] > ranks.rank[b]
                            && sched.priorities[a] <= sched.priorities[b]
                        {
                            violations.push(format!(
                                "priority order violates ranks on {}: {} vs {}",
                                platform.processors[p].id, dag.nodes[a].id, dag.nodes[b].id
                            ));
                        }
                    }
                }
            }
        }
    }
    violations
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedDoc {
    pub version: u32,
    pub makespan_ms: f64,
    /// task id -> processor id
    pub assignment: BTreeMap<String, String>,
    /// task id -> priority
    pub priorities: BTreeMap<String, i64>,
    pub slots: Vec<SlotDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotDoc {
    pub task: String,
    pub processor: String,
    pub start_ms: f64,
    pub finish_ms: f64,
}

pub fn schedule_to_doc(dag: &Dag, platform: &Platform, sched: &Schedule) -> SchedDoc {
    let mut assignment = BTreeMap::new();
    let mut priorities = BTreeMap::new();
    for (t, node) in dag.nodes.iter().enumerate() {
        assignment.insert(
            node.id.clone(),
            platform.processors[sched.assignment[t]].id.clone(),
        );
        priorities.insert(node.id.clone(), sched.priorities[t]);
    }
    let mut slots = Vec::new();
    for (p, list) in sched.slots.iter().enumerate() {
        for s in list {
            slots.push(SlotDoc {
                task: dag.nodes[s.task].id.clone(),
                processor: platform.processors[p].id.clone(),
                start_ms: s.start,
                finish_ms: s.finish,
            });
        }
    }
    slots.sort_by(|a, b| {
        a.start_ms
            .partial_cmp(&b.start_ms)
            .unwrap()
            .then_with(|| a.task.cmp(&b.task))
    });
    SchedDoc {
        version: SCHEMA_VERSION,
        makespan_ms: sched.makespan,
        assignment,
        priorities,
        slots,
    }
}

pub fn schedule_from_doc(dag: &Dag, platform: &Platform, doc: &SchedDoc) -> Result<Schedule> {
    if doc.version != SCHEMA_VERSION {
        return Err(Error::Version {
            found: doc.version,
            expected: SCHEMA_VERSION,
        });
    }
    let n = dag.nodes.len();
    let mut assignment = vec![usize::MAX; n];
    let mut priorities = vec![0_i64; n];
    for (t, node) in dag.nodes.iter().enumerate() {
        let pid = doc.assignment.get(&node.id).ok_or_else(|| {
            Error::InvalidSchedule(format!("schedule missing task {}", node.id))
        })?;
        assignment[t] = platform
            .proc_index(pid)
            .ok_or_else(|| Error::InvalidSchedule(format!("unknown processor {pid}")))?;
        priorities[t] = *doc
            .priorities
            .get(&node.id)
            .ok_or_else(|| Error::InvalidSchedule(format!("missing priority for {}", node.id)))?;
    }
    let mut slots: Vec<Vec<Slot>> = vec![Vec::new(); platform.processors.len()];
    for s in &doc.slots {
        let t = dag
            .index_of(&s.task)
            .ok_or_else(|| Error::InvalidSchedule(format!("slot for unknown task {}", s.task)))?;
        let p = platform
            .proc_index(&s.processor)
            .ok_or_else(|| Error::InvalidSchedule(format!("unknown processor {}", s.processor)))?;
        slots[p].push(Slot {
            task: t,
            start: s.start_ms,
            finish: s.finish_ms,
        });
    }
    for list in &mut slots {
        list.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap());
    }
    Ok(Schedule {
        assignment,
        priorities,
        slots,
        makespan: doc.makespan_ms,
    })
}

pub fn dump_schedule(dag: &Dag, platform: &Platform, sched: &Schedule) -> Result<String> {
    toml::to_string_pretty(&schedule_to_doc(dag, platform, sched))
        .map_err(|e| Error::Parse(e.to_string()))
}

pub fn parse_schedule(dag: &Dag, platform: &Platform, text: &str) -> Result<Schedule> {
    let doc: SchedDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    schedule_from_doc(dag, platform, &doc)
}

/// Plain-text Gantt: one line per processor, slots in time order.
pub fn render_gantt(dag: &Dag, platform: &Platform, sched: &Schedule) -> String {
    let mut out = String::new();
    for (p, proc) in platform.processors.iter().enumerate() {
        out.push_str(&format!("{:<6}", proc.id));
        if sched.slots[p].is_empty() {
            out.push_str(" (idle)");
        }
        for s in &sched.slots[p] {
            out.push_str(&format!(
                " [{:.1}..{:.1}] {}",
                s.start, s.finish, dag.nodes[s.task].id
            ));
        }
        out.push('\n');
    }
    out.push_str(&format!("makespan: {:.3} ms\n", sched.makespan));
    out
}

/// A fixed processor assignment with no list-scheduling: CPU-capable tasks
/// spread round-robin over general cores in node order, accelerator tasks on
/// the first eligible instance of their preferred kind, isolated tasks
/// round-robin over reserved cores. Priorities are all equal; slots come
/// from a greedy earliest-fit pass so the result is still a valid schedule.
/// This is the stand-in for an untuned time-sharing deployment.
pub fn default_schedule(dag: &Dag, platform: &Platform) -> Result<Schedule> {
    default_schedule_pinned(dag, platform, &BTreeMap::new())
}

pub fn default_schedule_pinned(
    dag: &Dag,
    platform: &Platform,
    pins: &BTreeMap<usize, usize>,
) -> Result<Schedule> {
    let n = dag.nodes.len();
    let general_cpus: Vec<usize> = (0..platform.processors.len())
        .filter(|&p| {
            platform.processors[p].kind == ProcKind::Cpu
                && !platform.is_reserved(&platform.processors[p].id)
        })
        .collect();
    let reserved_cpus: Vec<usize> = (0..platform.processors.len())
        .filter(|&p| platform.is_reserved(&platform.processors[p].id))
        .collect();

    let mut assignment = vec![usize::MAX; n];
    let mut rr_general = 0usize;
    let mut rr_reserved = 0usize;
    for (t, node) in dag.nodes.iter().enumerate() {
        if let Some(&p) = pins.get(&t) {
            assignment[t] = p;
            continue;
        }
        // Prefer the most specialized eligible kind: DLA, then GPU, then CPU.
        let pick_kind = [ProcKind::Gpu, ProcKind::Dla]
            .into_iter()
            .find(|k| node.eligible_on(*k) && platform.has_kind(*k));
        if let Some(kind) = pick_kind {
            // First instance of that kind; candidate assignments refine this.
            assignment[t] = (0..platform.processors.len())
                .find(|&p| platform.processors[p].kind == kind)
                .unwrap();
            continue;
        }
        if node.category.is_isolated() && !reserved_cpus.is_empty() {
            assignment[t] = reserved_cpus[rr_reserved % reserved_cpus.len()];
            rr_reserved += 1;
        } else if !general_cpus.is_empty() && node.eligible_on(ProcKind::Cpu) {
            assignment[t] = general_cpus[rr_general % general_cpus.len()];
            rr_general += 1;
        } else {
            let any = (0..platform.processors.len())
                .find(|&p| node.eligible_on(platform.processors[p].kind));
            assignment[t] = any.ok_or_else(|| {
                Error::InvalidSchedule(format!("task {} has no eligible processor", node.id))
            })?;
        }
    }

    // Greedy earliest-fit slots in topological order with the fixed mapping.
    let order = dag
        .topo_order()
        .map_err(|_| Error::InvalidDag("cycle".into()))?;
    let pred = dag.predecessors();
    let mut finish = vec![0.0_f64; n];
    let mut avail = vec![0.0_f64; platform.processors.len()];
    let mut slots: Vec<Vec<Slot>> = vec![Vec::new(); platform.processors.len()];
    for &t in &order {
        let p = assignment[t];
        let kind = platform.processors[p].kind;
        let ready = pred[t]
            .iter()
            .map(|&(s, ei)| {
                let comm = if assignment[s] == p {
                    0.0
                } else {
                    dag.edges[ei].comm_between(platform.processors[assignment[s]].kind, kind)
                };
                finish[s] + comm
            })
            .fold(0.0_f64, f64::max);
        let start = ready.max(avail[p]);
        let end = start + platform.effective_cost(&dag.nodes[t], p);
        finish[t] = end;
        avail[p] = end;
        slots[p].push(Slot {
            task: t,
            start,
            finish: end,
        });
    }
    let makespan = finish.iter().copied().fold(0.0_f64, f64::max);
    Ok(Schedule {
        assignment,
        priorities: vec![0; n],
        slots,
        makespan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::{Category, Edge, TaskNode};

    fn node(id: &str, cost: f64) -> TaskNode {
        TaskNode {
            id: id.into(),
            name: id.into(),
            category: Category::Sensing,
            costs: BTreeMap::from([(ProcKind::Cpu, cost)]),
            eligibility: vec![ProcKind::Cpu],
            period_ms: None,
            deadline_ms: 100.0,
            threads: 2,
        }
    }

    fn edge_c(src: &str, dst: &str, c: f64) -> Edge {
        let mut comm = BTreeMap::new();
        if c > 0.0 {
            comm.insert("CPU-CPU".to_string(), c);
        }
        Edge {
            src: src.into(),
            dst: dst.into(),
            comm_cost: comm,
            payload_kb: 0.0,
            assumed: false,
            triggering: true,
        }
    }

    #[test]
    fn single_node_rank_is_its_cost() {
        let dag = Dag::new(vec![node("A", 5.0)], vec![]);
        let ranks = compute_ranks(&dag, &Platform::cpu_only(1)).unwrap();
        assert_eq!(ranks.rank, vec![5.0]);
    }

    #[test]
    fn chain_rank_adds_comm_and_tail() {
        let dag = Dag::new(
            vec![node("A", 2.0), node("B", 3.0)],
            vec![edge_c("A", "B", 1.0)],
        );
        let ranks = compute_ranks(&dag, &Platform::cpu_only(2)).unwrap();
        assert_eq!(ranks.rank, vec![6.0, 3.0]);
    }

    #[test]
    fn diamond_rank_takes_max_branch() {
        // A -> B(10), A -> C(1), B -> D, C -> D
        let dag = Dag::new(
            vec![node("A", 1.0), node("B", 10.0), node("C", 1.0), node("D", 1.0)],
            vec![
                edge_c("A", "B", 0.0),
                edge_c("A", "C", 0.0),
                edge_c("B", "D", 0.0),
                edge_c("C", "D", 0.0),
            ],
        );
        let ranks = compute_ranks(&dag, &Platform::cpu_only(2)).unwrap();
        assert_eq!(ranks.rank[0], 12.0); // 1 + max(10+1, 1+1)
        assert_eq!(ranks.rank[3], 1.0);
    }

    #[test]
    fn single_node_gets_slot_at_zero() {
        let dag = Dag::new(vec![node("A", 7.0)], vec![]);
        let platform = Platform::cpu_only(2);
        let ranks = compute_ranks(&dag, &platform).unwrap();
        let sched = schedule_heft(&dag, &platform, &ranks).unwrap();
        let slot = sched.slot_of(0).unwrap();
        assert_eq!((slot.start, slot.finish), (0.0, 7.0));
        assert_eq!(sched.makespan, 7.0);
        assert!(check_schedule(&dag, &platform, &sched).is_empty());
    }

    #[test]
    fn independent_tasks_spread_over_processors() {
        let dag = Dag::new(vec![node("A", 5.0), node("B", 5.0)], vec![]);
        let platform = Platform::cpu_only(2);
        let ranks = compute_ranks(&dag, &platform).unwrap();
        let sched = schedule_heft(&dag, &platform, &ranks).unwrap();
        assert_ne!(sched.assignment[0], sched.assignment[1]);
        assert_eq!(sched.makespan, 5.0);
    }

    #[test]
    fn insertion_uses_gap_before_later_slot() {
        // S on cpu1, its child X pinned to cpu0 starts only at
        // finish(S) + comm = 12, leaving cpu0 idle over [0,12). The
        // lower-rank Y (pinned to cpu0, ready at 0) must fill that gap.
        let dag = Dag::new(
            vec![node("S", 8.0), node("X", 3.0), node("Y", 2.0)],
            vec![edge_c("S", "X", 4.0)],
        );
        let platform = Platform::cpu_only(2);
        let ranks = compute_ranks(&dag, &platform).unwrap();
        // S: 8 + (4 + 3) = 15, X: 3, Y: 2 -> order S, X, Y.
        let pins = BTreeMap::from([(0usize, 1usize), (1usize, 0usize), (2usize, 0usize)]);
        let sched = schedule_heft_pinned(&dag, &platform, &ranks, &pins).unwrap();
        let x = sched.slot_of(1).unwrap();
        let y = sched.slot_of(2).unwrap();
        assert_eq!((x.start, x.finish), (12.0, 15.0));
        assert_eq!((y.start, y.finish), (0.0, 2.0));
        assert!(check_schedule(&dag, &platform, &sched).is_empty());
    }

    #[test]
    fn pinned_task_stays_on_pin() {
        let dag = Dag::new(vec![node("A", 5.0), node("B", 5.0)], vec![]);
        let platform = Platform::cpu_only(3);
        let ranks = compute_ranks(&dag, &platform).unwrap();
        let pins = BTreeMap::from([(1usize, 2usize)]);
        let sched = schedule_heft_pinned(&dag, &platform, &ranks, &pins).unwrap();
        assert_eq!(sched.assignment[1], 2);
    }

    #[test]
    fn priorities_strictly_follow_ranks() {
        let dag = Dag::new(
            vec![node("A", 2.0), node("B", 3.0), node("C", 4.0)],
            vec![edge_c("A", "B", 0.0), edge_c("B", "C", 0.0)],
        );
        let platform = Platform::cpu_only(1);
        let ranks = compute_ranks(&dag, &platform).unwrap();
        let sched = schedule_heft(&dag, &platform, &ranks).unwrap();
        assert!(sched.priorities[0] > sched.priorities[1]);
        assert!(sched.priorities[1] > sched.priorities[2]);
    }

    #[test]
    fn sched_doc_round_trip() {
        let dag = Dag::new(
            vec![node("A", 2.0), node("B", 3.0)],
            vec![edge_c("A", "B", 1.0)],
        );
        let platform = Platform::cpu_only(2);
        let ranks = compute_ranks(&dag, &platform).unwrap();
        let sched = schedule_heft(&dag, &platform, &ranks).unwrap();
        let text = dump_schedule(&dag, &platform, &sched).unwrap();
        let back = parse_schedule(&dag, &platform, &text).unwrap();
        assert_eq!(sched, back);
    }

    #[test]
    fn reserved_cores_are_exclusive_both_ways() {
        let mut planning = node("P", 1.0);
        planning.category = Category::Planning;
        let sensing = node("S", 1.0);
        let dag = Dag::new(vec![planning, sensing], vec![]);
        let mut platform = Platform::cpu_only(2);
        platform.reserved = vec!["cpu1".into()];
        let ranks = compute_ranks(&dag, &platform).unwrap();
        let sched = schedule_heft(&dag, &platform, &ranks).unwrap();
        assert_eq!(platform.processors[sched.assignment[0]].id, "cpu1");
        assert_eq!(platform.processors[sched.assignment[1]].id, "cpu0");
    }

    #[test]
    fn default_schedule_is_valid_and_flat_priority() {
        let dag = Dag::new(
            vec![node("A", 2.0), node("B", 3.0), node("C", 4.0)],
            vec![edge_c("A", "B", 0.0)],
        );
        let platform = Platform::cpu_only(2);
        let sched = default_schedule(&dag, &platform).unwrap();
        assert!(sched.priorities.iter().all(|&p| p == 0));
        let violations = check_schedule(&dag, &platform, &sched);
        assert!(violations.is_empty(), "{violations:?}");
    }
}
