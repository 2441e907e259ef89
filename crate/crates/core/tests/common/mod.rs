//! Shared fixtures and independent oracles used by the integration suites.
//!
//! The oracles here are deliberately written as plain array walks over raw
//! instance data, with no types or helpers from the library under test, so
//! they can disagree with the implementation if it drifts.

#![allow(dead_code)]

use std::collections::BTreeMap;

use scad_core::dag::{comm_key, Category, Dag, Edge, Platform, ProcKind, Processor, TaskNode};

/// The classic 10-task / 3-processor list-scheduling benchmark instance:
/// per-processor costs and a single transfer weight per edge (applied
/// whenever producer and consumer land on different processors).
pub struct RawInstance {
    pub costs: Vec<[f64; 3]>,
    pub edges: Vec<(usize, usize, f64)>,
}

pub fn classic_instance() -> RawInstance {
    RawInstance {
        costs: vec![
            [14.0, 16.0, 9.0],
            [13.0, 19.0, 18.0],
            [11.0, 13.0, 19.0],
            [13.0, 8.0, 17.0],
            [12.0, 13.0, 10.0],
            [13.0, 16.0, 9.0],
            [7.0, 15.0, 11.0],
            [5.0, 11.0, 14.0],
            [18.0, 12.0, 20.0],
            [21.0, 7.0, 16.0],
        ],
        edges: vec![
            (0, 1, 18.0),
            (0, 2, 12.0),
            (0, 3, 9.0),
            (0, 4, 11.0),
            (0, 5, 14.0),
            (1, 7, 19.0),
            (1, 8, 16.0),
            (2, 6, 23.0),
            (3, 7, 27.0),
            (3, 8, 23.0),
            (4, 8, 13.0),
            (5, 7, 15.0),
            (6, 9, 17.0),
            (7, 9, 11.0),
            (8, 9, 13.0),
        ],
    }
}

pub struct OracleSchedule {
    pub rank: Vec<f64>,
    pub order: Vec<usize>,
    pub proc_of: Vec<usize>,
    pub start: Vec<f64>,
    pub finish: Vec<f64>,
    pub makespan: f64,
}

/// Independent list-scheduling trace: upward ranks by direct recursion,
/// then insertion-based earliest-finish placement scanning busy slots.
pub fn oracle_heft(inst: &RawInstance, nprocs: usize) -> OracleSchedule {
    let n = inst.costs.len();
    let mut succ: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut pred: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(s, d, c) in &inst.edges {
        succ[s].push((d, c));
        pred[d].push((s, c));
    }

    fn rank_of(
        i: usize,
        inst: &RawInstance,
        succ: &[Vec<(usize, f64)>],
        nprocs: usize,
        memo: &mut [Option<f64>],
    ) -> f64 {
        if let Some(r) = memo[i] {
            return r;
        }
        let w: f64 = inst.costs[i][..nprocs].iter().sum::<f64>() / nprocs as f64;
        let tail = succ[i]
            .iter()
            .map(|&(j, c)| c + rank_of(j, inst, succ, nprocs, memo))
            .fold(0.0_f64, f64::max);
        let r = w + tail;
        memo[i] = Some(r);
        r
    }

    let mut memo = vec![None; n];
    let rank: Vec<f64> = (0..n)
        .map(|i| rank_of(i, inst, &succ, nprocs, &mut memo))
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| rank[b].partial_cmp(&rank[a]).unwrap().then(a.cmp(&b)));

    let mut slots: Vec<Vec<(f64, f64)>> = vec![Vec::new(); nprocs];
    let mut proc_of = vec![usize::MAX; n];
    let mut start = vec![0.0; n];
    let mut finish = vec![0.0; n];

    for &t in &order {
        let mut best: Option<(f64, f64, usize)> = None;
        for p in 0..nprocs {
            let ready = pred[t]
                .iter()
                .map(|&(s, c)| finish[s] + if proc_of[s] == p { 0.0 } else { c })
                .fold(0.0_f64, f64::max);
            let w = inst.costs[t][p];
            // Insertion scan: earliest point at or after `ready` where a
            // window of length w fits between existing slots.
            let mut candidate = ready;
            let mut placed = false;
            for &(s, e) in &slots[p] {
                if candidate + w <= s {
                    placed = true;
                    break;
                }
                if e > candidate {
                    candidate = e;
                }
            }
            let _ = placed;
            let eft = candidate + w;
            let better = match best {
                None => true,
                Some((beft, _, _)) => eft < beft,
            };
            if better {
                best = Some((eft, candidate, p));
            }
        }
        let (eft, st, p) = best.unwrap();
        proc_of[t] = p;
        start[t] = st;
        finish[t] = eft;
        slots[p].push((st, eft));
        slots[p].sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    }

    let makespan = finish.iter().copied().fold(0.0_f64, f64::max);
    OracleSchedule {
        rank,
        order,
        proc_of,
        start,
        finish,
        makespan,
    }
}

/// The classic instance expressed in library types: one processor of each
/// kind so per-kind costs become per-processor costs, and every edge carries
/// the same weight for all distinct kind pairs.
pub fn classic_dag() -> (Dag, Platform) {
    let inst = classic_instance();
    let kinds = [ProcKind::Cpu, ProcKind::Gpu, ProcKind::Dla];
    let nodes: Vec<TaskNode> = inst
        .costs
        .iter()
        .enumerate()
        .map(|(i, w)| TaskNode {
            id: format!("n{}", i + 1),
            name: format!("n{}", i + 1),
            category: Category::Sensing,
            costs: BTreeMap::from([
                (ProcKind::Cpu, w[0]),
                (ProcKind::Gpu, w[1]),
                (ProcKind::Dla, w[2]),
            ]),
            eligibility: kinds.to_vec(),
            period_ms: if i == 0 { Some(1000.0) } else { None },
            deadline_ms: 1000.0,
            threads: 1,
        })
        .collect();
    let edges: Vec<Edge> = inst
        .edges
        .iter()
        .map(|&(s, d, c)| {
            let mut comm = BTreeMap::new();
            for a in 0..kinds.len() {
                for b in (a + 1)..kinds.len() {
                    comm.insert(comm_key(kinds[a], kinds[b]), c);
                }
            }
            Edge {
                src: format!("n{}", s + 1),
                dst: format!("n{}", d + 1),
                comm_cost: comm,
                payload_kb: 0.0,
                assumed: false,
                triggering: true,
            }
        })
        .collect();
    let platform = Platform {
        processors: vec![
            Processor {
                id: "p1".into(),
                kind: ProcKind::Cpu,
                speed_factor: 1.0,
                power_watts: 2.0,
            },
            Processor {
                id: "p2".into(),
                kind: ProcKind::Gpu,
                speed_factor: 1.0,
                power_watts: 30.0,
            },
            Processor {
                id: "p3".into(),
                kind: ProcKind::Dla,
                speed_factor: 1.0,
                power_watts: 1.0,
            },
        ],
        reserved: Vec::new(),
    };
    (Dag::new(nodes, edges), platform)
}
