//! Splitting a layered network between an accelerator and its fallback
//! engine. Devices that cap the number of fallback subgraphs force a merge
//! once the cap is reached: the final fallback segment absorbs everything
//! to the end of the network, supported layers included. Each fallback
//! segment costs two boundary crossings (entry and exit).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerGraph {
    pub name: String,
    pub blocks: Vec<Block>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub name: String,
    /// Operation kinds in execution order.
    pub layers: Vec<String>,
}

impl LayerGraph {
    /// Flat operation list in execution order.
    pub fn layers(&self) -> Vec<&str> {
        self.blocks
            .iter()
            .flat_map(|b| b.layers.iter().map(String::as_str))
            .collect()
    }

    pub fn layer_count(&self) -> usize {
        self.blocks.iter().map(|b| b.layers.len()).sum()
    }
}

/// Line format: `network <name>`, then `block <name>` opening a block and
/// `layer <op_kind>` lines inside it. Blank lines and `#` comments skipped.
pub fn parse_layer_graph(text: &str) -> Result<LayerGraph> {
    let mut name = None;
    let mut blocks: Vec<Block> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (word, rest) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| Error::Parse(format!("line {}: missing argument", lineno + 1)))?;
        let rest = rest.trim();
        match word {
            "network" => {
                if name.is_some() {
                    return Err(Error::Parse(format!(
                        "line {}: duplicate network line",
                        lineno + 1
                    )));
                }
                name = Some(rest.to_string());
            }
            "block" => blocks.push(Block {
                name: rest.to_string(),
                layers: Vec::new(),
            }),
            "layer" => match blocks.last_mut() {
                Some(b) => b.layers.push(rest.to_string()),
                None => {
                    return Err(Error::Parse(format!(
                        "line {}: layer before any block",
                        lineno + 1
                    )))
                }
            },
            other => {
                return Err(Error::Parse(format!(
                    "line {}: unknown directive {other}",
                    lineno + 1
                )))
            }
        }
    }
    Ok(LayerGraph {
        name: name.ok_or_else(|| Error::Parse("missing network line".into()))?,
        blocks,
    })
}

pub fn dump_layer_graph(lg: &LayerGraph) -> String {
    let mut out = format!("network {}\n", lg.name);
    for b in &lg.blocks {
        let _ = writeln!(out, "block {}", b.name);
        for l in &b.layers {
            let _ = writeln!(out, "layer {l}");
        }
    }
    out
}

pub fn load_layer_graph(path: &std::path::Path) -> Result<LayerGraph> {
    parse_layer_graph(&std::fs::read_to_string(path)?)
}

pub fn save_layer_graph(lg: &LayerGraph, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, dump_layer_graph(lg))?;
    Ok(())
}

/// Replace operation kinds throughout; the model-customization step that
/// swaps an unsupported activation for a supported one.
pub fn substitute(lg: &LayerGraph, subs: &BTreeMap<String, String>) -> LayerGraph {
    let mut out = lg.clone();
    for b in &mut out.blocks {
        for l in &mut b.layers {
            if let Some(repl) = subs.get(l) {
                *l = repl.clone();
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportProfile {
    pub device: String,
    pub supported_ops: BTreeSet<String>,
    #[serde(default = "default_budget")]
    pub max_fallback_subgraphs: u32,
}

fn default_budget() -> u32 {
    8
}

pub fn parse_support_profile(text: &str) -> Result<SupportProfile> {
    toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn load_support_profile(path: &std::path::Path) -> Result<SupportProfile> {
    parse_support_profile(&std::fs::read_to_string(path)?)
}

const YOLOV3_LG: &str = include_str!("../assets/yolov3.lg");
const YOLOV3_SPP_LG: &str = include_str!("../assets/yolov3_spp.lg");
const DLA_PROF: &str = include_str!("../assets/dla.prof");

pub fn builtin_layer_graph(name: &str) -> Result<LayerGraph> {
    let text = match name {
        "yolov3" => YOLOV3_LG,
        "yolov3_spp" => YOLOV3_SPP_LG,
        _ => return Err(Error::UnknownProfile(name.to_string())),
    };
    parse_layer_graph(text)
}

pub fn builtin_support_profile(name: &str) -> Result<SupportProfile> {
    match name {
        "dla" => parse_support_profile(DLA_PROF),
        _ => Err(Error::UnknownProfile(name.to_string())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Target,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub placement: Placement,
    /// Flat layer indices, inclusive on both ends.
    pub first_layer: usize,
    pub last_layer: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.last_layer - self.first_layer + 1
    }

    pub fn is_empty(&self) -> bool {
        false // segments always cover at least one layer
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub segments: Vec<Segment>,
    /// Fallback segments actually realized (never above the budget).
    pub fallback_count: usize,
    /// Maximal unsupported runs before any budget-forced merging.
    pub unsupported_runs: usize,
    /// True when the natural run structure fits the device budget.
    pub feasible: bool,
    /// True when the final fallback segment was extended to the end of the
    /// network to stay within budget.
    pub absorbed_tail: bool,
}

impl PartitionPlan {
    /// Boundary crossings: entry and exit per fallback segment.
    pub fn transition_count(&self) -> usize {
        2 * self.fallback_count
    }

    pub fn entry_transition_count(&self) -> usize {
        self.fallback_count
    }
}

pub fn dump_partition_plan(plan: &PartitionPlan) -> Result<String> {
    toml::to_string_pretty(plan).map_err(|e| Error::Parse(e.to_string()))
}

/// Aligned segment table with layer names resolved against the graph.
pub fn render_partition_plan(lg: &LayerGraph, plan: &PartitionPlan) -> String {
    let layers = lg.layers();
    let mut out = String::new();
    out.push_str(&format!(
        "{:<4} {:<9} {:>6} {:>6} {:>6}  {}\n",
        "seg", "placement", "first", "last", "len", "ops"
    ));
    for (i, s) in plan.segments.iter().enumerate() {
        let place = match s.placement {
            Placement::Target => "target",
            Placement::Fallback => "fallback",
        };
        let mut ops: Vec<&str> = Vec::new();
        for &l in layers[s.first_layer..=s.last_layer].iter() {
            if ops.last() != Some(&l) {
                ops.push(l);
            }
        }
        let mut shown = ops.join(",");
        if shown.len() > 48 {
            shown.truncate(45);
            shown.push_str("...");
        }
        out.push_str(&format!(
            "{:<4} {:<9} {:>6} {:>6} {:>6}  {}\n",
            i, place, s.first_layer, s.last_layer, s.len(), shown
        ));
    }
    out.push_str(&format!(
        "fallback segments: {} | unsupported runs: {} | feasible: {} | absorbed tail: {}\n",
        plan.fallback_count, plan.unsupported_runs, plan.feasible, plan.absorbed_tail
    ));
    out
}

pub fn partition(lg: &LayerGraph, profile: &SupportProfile) -> Result<PartitionPlan> {
    if profile.max_fallback_subgraphs == 0 {
        return Err(Error::Invalid(
            "max_fallback_subgraphs must be at least 1".into(),
        ));
    }
    let budget = profile.max_fallback_subgraphs as usize;
    let mask: Vec<bool> = lg
        .layers()
        .iter()
        .map(|op| profile.supported_ops.contains(*op))
        .collect();

    // Maximal runs as (first, last, supported).
    let mut runs: Vec<(usize, usize, bool)> = Vec::new();
    for (i, &s) in mask.iter().enumerate() {
        match runs.last_mut() {
            Some((_, last, sup)) if *sup == s && *last + 1 == i => *last = i,
            _ => runs.push((i, i, s)),
        }
    }
    let unsupported_runs = runs.iter().filter(|r| !r.2).count();

    let mut segments = Vec::new();
    let mut fallback_count = 0usize;
    let mut absorbed_tail = false;
    for &(first, last, supported) in &runs {
        if supported {
            segments.push(Segment {
                placement: Placement::Target,
                first_layer: first,
                last_layer: last,
            });
        } else if fallback_count + 1 < budget || unsupported_runs <= budget {
            fallback_count += 1;
            segments.push(Segment {
                placement: Placement::Fallback,
                first_layer: first,
                last_layer: last,
            });
        } else {
            // Budget-th unsupported run with more still to come: one
            // fallback from here to the end keeps the device limit.
            fallback_count += 1;
            segments.push(Segment {
                placement: Placement::Fallback,
                first_layer: first,
                last_layer: mask.len() - 1,
            });
            absorbed_tail = true;
            break;
        }
    }

    Ok(PartitionPlan {
        segments,
        fallback_count,
        unsupported_runs,
        feasible: unsupported_runs <= budget,
        absorbed_tail,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerCostModel {
    /// Per-op cost in ms when the layer runs on the accelerator.
    pub target_ms: BTreeMap<String, f64>,
    /// Per-op cost in ms when the layer runs on the fallback engine.
    pub fallback_ms: BTreeMap<String, f64>,
    /// Cost of one boundary crossing in ms.
    pub transition_penalty_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedCost {
    pub total_ms: f64,
    pub compute_ms: f64,
    pub transition_ms: f64,
    pub fallback_count: usize,
    pub feasible: bool,
}

/// End-to-end execution cost of the partitioned network on the device:
/// per-layer compute at each segment's placement plus two crossings per
/// fallback segment.
pub fn derive_costs(
    lg: &LayerGraph,
    profile: &SupportProfile,
    model: &LayerCostModel,
) -> Result<DerivedCost> {
    let plan = partition(lg, profile)?;
    let layers = lg.layers();
    let mut compute_ms = 0.0;
    for seg in &plan.segments {
        let table = match seg.placement {
            Placement::Target => &model.target_ms,
            Placement::Fallback => &model.fallback_ms,
        };
        for &op in &layers[seg.first_layer..=seg.last_layer] {
            compute_ms += table
                .get(op)
                .copied()
                .ok_or_else(|| Error::UnknownOp(op.to_string()))?;
        }
    }
    let transition_ms = plan.transition_count() as f64 * model.transition_penalty_ms;
    Ok(DerivedCost {
        total_ms: compute_ms + transition_ms,
        compute_ms,
        transition_ms,
        fallback_count: plan.fallback_count,
        feasible: plan.feasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_block(ops: &[&str]) -> LayerGraph {
        LayerGraph {
            name: "t".into(),
            blocks: vec![Block {
                name: "b".into(),
                layers: ops.iter().map(|s| s.to_string()).collect(),
            }],
        }
    }

    fn prof(supported: &[&str], budget: u32) -> SupportProfile {
        SupportProfile {
            device: "dla".into(),
            supported_ops: supported.iter().map(|s| s.to_string()).collect(),
            max_fallback_subgraphs: budget,
        }
    }

    #[test]
    fn fully_supported_network_is_one_target_segment() {
        let lg = single_block(&["conv", "relu", "conv"]);
        let plan = partition(&lg, &prof(&["conv", "relu"], 8)).unwrap();
        assert_eq!(plan.segments.len(), 1);
        assert_eq!(plan.segments[0].placement, Placement::Target);
        assert_eq!(plan.fallback_count, 0);
        assert!(plan.feasible);
    }

    #[test]
    fn isolated_unsupported_layer_splits_in_three() {
        let lg = single_block(&["conv", "odd", "conv"]);
        let plan = partition(&lg, &prof(&["conv"], 8)).unwrap();
        let placements: Vec<Placement> = plan.segments.iter().map(|s| s.placement).collect();
        assert_eq!(
            placements,
            vec![Placement::Target, Placement::Fallback, Placement::Target]
        );
        assert_eq!(plan.fallback_count, 1);
    }

    #[test]
    fn budget_overflow_absorbs_tail() {
        // Three unsupported runs, budget two: the second fallback must run
        // to the end, swallowing the trailing supported layers.
        let lg = single_block(&["a", "x", "a", "x", "a", "x", "a"]);
        let plan = partition(&lg, &prof(&["a"], 2)).unwrap();
        assert_eq!(plan.unsupported_runs, 3);
        assert_eq!(plan.fallback_count, 2);
        assert!(!plan.feasible);
        assert!(plan.absorbed_tail);
        let last = plan.segments.last().unwrap();
        assert_eq!(last.placement, Placement::Fallback);
        assert_eq!((last.first_layer, last.last_layer), (3, 6));
    }

    #[test]
    fn exact_budget_fit_is_feasible_without_merge() {
        let lg = single_block(&["a", "x", "a", "x", "a"]);
        let plan = partition(&lg, &prof(&["a"], 2)).unwrap();
        assert_eq!(plan.fallback_count, 2);
        assert!(plan.feasible);
        assert!(!plan.absorbed_tail);
    }

    #[test]
    fn zero_budget_is_rejected() {
        let lg = single_block(&["a"]);
        assert!(partition(&lg, &prof(&["a"], 0)).is_err());
    }

    #[test]
    fn layer_graph_round_trip() {
        let lg = builtin_layer_graph("yolov3").unwrap();
        let back = parse_layer_graph(&dump_layer_graph(&lg)).unwrap();
        assert_eq!(lg, back);
        assert_eq!(lg.layer_count(), 249);
    }

    #[test]
    fn substitution_only_touches_mapped_ops() {
        let lg = single_block(&["conv", "leaky_relu", "conv"]);
        let subs = BTreeMap::from([("leaky_relu".to_string(), "relu".to_string())]);
        let out = substitute(&lg, &subs);
        assert_eq!(out.blocks[0].layers, vec!["conv", "relu", "conv"]);
        assert_eq!(lg.blocks[0].layers[1], "leaky_relu");
    }

    #[test]
    fn unknown_op_in_cost_model_is_reported() {
        let lg = single_block(&["conv", "mystery"]);
        let model = LayerCostModel {
            target_ms: BTreeMap::from([("conv".to_string(), 1.0)]),
            fallback_ms: BTreeMap::new(),
            transition_penalty_ms: 0.0,
        };
        let err = derive_costs(&lg, &prof(&["conv", "mystery"], 8), &model).unwrap_err();
        assert!(matches!(err, Error::UnknownOp(op) if op == "mystery"));
    }
}
