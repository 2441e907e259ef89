//! The scheduler must reproduce the well-known 10-task, 3-processor
//! reference schedule exactly, and must agree with an independent
//! array-based reimplementation on the same instance.

mod common;

use common::{classic_dag, classic_instance, oracle_heft};
use scad_core::heft::{check_schedule, compute_ranks, schedule_heft};

const EPS: f64 = 1e-9;

#[test]
fn classic_instance_ranks() {
    let (dag, platform) = classic_dag();
    let ranks = compute_ranks(&dag, &platform).unwrap();
    let expected = [
        108.0,
        77.0,
        80.0, // carries ~1e-14 float error from the /3 mean; see EPS
        80.0,
        69.0,
        63.333_333_333_333_336,
        42.666_666_666_666_664,
        35.666_666_666_666_664,
        44.333_333_333_333_336,
        14.666_666_666_666_666,
    ];
    for (i, &e) in expected.iter().enumerate() {
        assert!(
            (ranks.rank[i] - e).abs() < EPS,
            "rank[{i}] = {}, expected {e}",
            ranks.rank[i]
        );
    }
}

#[test]
fn classic_instance_schedule_matches_reference() {
    let (dag, platform) = classic_dag();
    let ranks = compute_ranks(&dag, &platform).unwrap();
    let sched = schedule_heft(&dag, &platform, &ranks).unwrap();

    // (task, processor index, start, finish), frozen from the reference.
    let expected = [
        (0usize, 2usize, 0.0, 9.0),
        (1, 0, 27.0, 40.0),
        (2, 2, 9.0, 28.0),
        (3, 1, 18.0, 26.0),
        (4, 2, 28.0, 38.0),
        (5, 1, 26.0, 42.0),
        (6, 2, 38.0, 49.0),
        (7, 0, 57.0, 62.0),
        (8, 1, 56.0, 68.0),
        (9, 1, 73.0, 80.0),
    ];
    for &(t, p, s, f) in &expected {
        assert_eq!(sched.assignment[t], p, "task n{} processor", t + 1);
        let slot = sched.slot_of(t).unwrap();
        assert!(
            (slot.start - s).abs() < EPS && (slot.finish - f).abs() < EPS,
            "task n{}: got [{}, {}], expected [{s}, {f}]",
            t + 1,
            slot.start,
            slot.finish
        );
    }
    assert!((sched.makespan - 80.0).abs() < EPS);
    assert!(check_schedule(&dag, &platform, &sched).is_empty());
}

#[test]
fn implementation_agrees_with_independent_oracle() {
    let inst = classic_instance();
    let oracle = oracle_heft(&inst, 3);

    let (dag, platform) = classic_dag();
    let ranks = compute_ranks(&dag, &platform).unwrap();
    let sched = schedule_heft(&dag, &platform, &ranks).unwrap();

    for t in 0..inst.costs.len() {
        assert!((ranks.rank[t] - oracle.rank[t]).abs() < EPS, "rank of n{}", t + 1);
        assert_eq!(sched.assignment[t], oracle.proc_of[t], "processor of n{}", t + 1);
        let slot = sched.slot_of(t).unwrap();
        assert!((slot.start - oracle.start[t]).abs() < EPS, "start of n{}", t + 1);
        assert!((slot.finish - oracle.finish[t]).abs() < EPS, "finish of n{}", t + 1);
    }
    assert!((sched.makespan - oracle.makespan).abs() < EPS);
    assert_eq!(ranks.placement_order(), oracle.order);
}
