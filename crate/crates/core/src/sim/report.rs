//! Simulation outputs: per-module deadline accounting, per-task execution
//! stats, and per-processor energy attribution.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub(crate) fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleStats {
    /// Completed samples across all exit streams of the module.
    pub completed: u64,
    pub missed: u64,
    /// missed / completed; a starved module reports 1.0.
    pub miss_rate: f64,
    /// True when no exit stream produced a single sample.
    pub starved: bool,
    /// Exit task whose stream dominates (largest mean latency).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dominant_exit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p99_ms: Option<f64>,
    /// Deadline of the dominant exit task (ms).
    pub deadline_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStats {
    pub activations: u64,
    pub completions: u64,
    pub drops: u64,
    pub misses: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcEnergy {
    pub busy_ms: f64,
    pub energy_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub processors: BTreeMap<String, ProcEnergy>,
    pub total_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    /// Pooled over every module exit sample.
    pub completed: u64,
    pub missed: u64,
    pub miss_rate: f64,
    pub dropped: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub policy: String,
    pub seed: u64,
    pub horizon_ms: f64,
    pub modules: BTreeMap<String, ModuleStats>,
    pub tasks: BTreeMap<String, TaskStats>,
    pub starved_tasks: Vec<String>,
    pub energy: EnergyReport,
    pub totals: Totals,
}

impl SimReport {
    pub fn max_module_miss_rate(&self) -> f64 {
        self.modules
            .values()
            .map(|m| m.miss_rate)
            .fold(0.0, f64::max)
    }

    /// Largest p99/deadline over modules; starved modules count as infinite.
    pub fn max_deadline_ratio(&self) -> f64 {
        self.modules
            .values()
            .map(|m| {
                if m.starved {
                    f64::INFINITY
                } else {
                    m.p99_ms.map_or(f64::INFINITY, |p| p / m.deadline_ms)
                }
            })
            .fold(0.0, f64::max)
    }
}

pub(crate) fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub(crate) fn p99(samples: &mut Vec<f64>) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len();
    let idx = ((0.99 * n as f64).ceil() as usize).clamp(1, n) - 1;
    samples[idx]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t_ms: f64,
    pub task: String,
    pub seq: u64,
    #[serde(flatten)]
    pub ev: TraceEv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "ev", rename_all = "snake_case")]
pub enum TraceEv {
    Arrival,
    Dropped,
    Started,
    DispatchDone,
    EngineStart { engine: String },
    Finished { latency_ms: f64, missed: bool },
    PriorityRaise { priority: i64 },
    PriorityDrop,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_std_of_constant_is_zero() {
        let (m, s) = mean_std(&[4.0, 4.0, 4.0]);
        assert_eq!((m, s), (4.0, 0.0));
    }

    #[test]
    fn p99_picks_near_top_sample() {
        let mut v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(p99(&mut v), 99.0);
        let mut small = vec![7.0, 3.0];
        assert_eq!(p99(&mut small), 7.0);
    }
}
