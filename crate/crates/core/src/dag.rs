//! Task graph and platform model.
//!
//! A task is a periodic or reactive node with one main thread and optional
//! assistant threads. Costs are per processor kind; a processor instance
//! scales its kind cost by `speed_factor`. Reserved processors accept only
//! Planning/Control tasks, mirroring the common practice of isolating the
//! planning pipeline on dedicated cores.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProcKind {
    #[serde(rename = "CPU")]
    Cpu,
    #[serde(rename = "GPU")]
    Gpu,
    #[serde(rename = "DLA")]
    Dla,
}

impl ProcKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProcKind::Cpu => "CPU",
            ProcKind::Gpu => "GPU",
            ProcKind::Dla => "DLA",
        }
    }
}

impl std::fmt::Display for ProcKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Module category. Reports aggregate per category, and scheduling treats
/// Planning/Control specially when the platform reserves processors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Sensing,
    Perception2D,
    Perception3D,
    Localization,
    Tracking,
    Prediction,
    Planning,
    Control,
}

pub const ALL_CATEGORIES: [Category; 8] = [
    Category::Sensing,
    Category::Perception2D,
    Category::Perception3D,
    Category::Localization,
    Category::Tracking,
    Category::Prediction,
    Category::Planning,
    Category::Control,
];

impl Category {
    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Sensing => "Sensing",
            Category::Perception2D => "Perception2D",
            Category::Perception3D => "Perception3D",
            Category::Localization => "Localization",
            Category::Tracking => "Tracking",
            Category::Prediction => "Prediction",
            Category::Planning => "Planning",
            Category::Control => "Control",
        }
    }

    /// Planning/Control run on reserved processors when the platform has any.
    pub fn is_isolated(&self) -> bool {
        matches!(self, Category::Planning | Category::Control)
    }
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_threads() -> u32 {
    2
}

fn default_true() -> bool {
    true
}

fn is_default_threads(t: &u32) -> bool {
    *t == default_threads()
}

fn is_true(b: &bool) -> bool {
    *b
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskNode {
    pub id: String,
    pub name: String,
    pub category: Category,
    /// Execution cost in ms per processor kind; must cover `eligibility`.
    pub costs: BTreeMap<ProcKind, f64>,
    pub eligibility: Vec<ProcKind>,
    /// Periodic source when set; reactive otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_ms: Option<f64>,
    /// Expected end-to-end latency; misses are judged against
    /// `deadline_ms * slack_factor`.
    pub deadline_ms: f64,
    #[serde(default = "default_threads", skip_serializing_if = "is_default_threads")]
    pub threads: u32,
}

impl TaskNode {
    pub fn is_source(&self) -> bool {
        self.period_ms.is_some()
    }

    pub fn eligible_on(&self, kind: ProcKind) -> bool {
        self.eligibility.contains(&kind)
    }

    /// Mean cost over eligible kinds; the rank weight w-bar.
    pub fn mean_cost(&self) -> f64 {
        if self.eligibility.is_empty() {
            return 0.0;
        }
        let sum: f64 = self
            .eligibility
            .iter()
            .map(|k| self.costs.get(k).copied().unwrap_or(0.0))
            .sum();
        sum / self.eligibility.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub src: String,
    pub dst: String,
    /// Transfer cost in ms keyed by unordered kind pair, e.g. "CPU-GPU".
    /// Absent pairs and same-processor transfers cost 0.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub comm_cost: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub payload_kb: f64,
    /// Structure taken from prose rather than a published graph.
    #[serde(default, skip_serializing_if = "is_false")]
    pub assumed: bool,
    /// Triggering edges drive downstream activation (all-of join).
    /// Non-triggering edges only refresh a latest-value input.
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub triggering: bool,
}

impl Edge {
    pub fn comm_between(&self, a: ProcKind, b: ProcKind) -> f64 {
        let key = comm_key(a, b);
        self.comm_cost.get(&key).copied().unwrap_or(0.0)
    }

    /// Mean transfer cost over declared pairs; the rank term c-bar.
    pub fn mean_comm(&self) -> f64 {
        if self.comm_cost.is_empty() {
            return 0.0;
        }
        self.comm_cost.values().sum::<f64>() / self.comm_cost.len() as f64
    }
}

pub fn comm_key(a: ProcKind, b: ProcKind) -> String {
    let (x, y) = if a <= b { (a, b) } else { (b, a) };
    format!("{}-{}", x.as_str(), y.as_str())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Processor {
    pub id: String,
    pub kind: ProcKind,
    /// Dimensionless multiplier on kind costs; 1.0 is nominal speed.
    #[serde(default = "default_speed")]
    pub speed_factor: f64,
    #[serde(default)]
    pub power_watts: f64,
}

fn default_speed() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Platform {
    pub processors: Vec<Processor>,
    /// Processor ids that accept only Planning/Control tasks.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reserved: Vec<String>,
}

impl Platform {
    /// Single-device profile modeled on a Jetson-class box: 8 CPU cores
    /// (2 reserved for planning isolation), one GPU, two DLAs.
    pub fn jetson() -> Platform {
        let mut processors = Vec::new();
        for i in 0..8 {
            processors.push(Processor {
                id: format!("cpu{i}"),
                kind: ProcKind::Cpu,
                speed_factor: 1.0,
                power_watts: 2.0,
            });
        }
        processors.push(Processor {
            id: "gpu0".into(),
            kind: ProcKind::Gpu,
            speed_factor: 1.0,
            power_watts: 30.0,
        });
        for i in 0..2 {
            processors.push(Processor {
                id: format!("dla{i}"),
                kind: ProcKind::Dla,
                speed_factor: 1.0,
                power_watts: 1.0,
            });
        }
        Platform {
            processors,
            reserved: vec!["cpu6".into(), "cpu7".into()],
        }
    }

    pub fn cpu_only(cores: usize) -> Platform {
        Platform {
            processors: (0..cores)
                .map(|i| Processor {
                    id: format!("cpu{i}"),
                    kind: ProcKind::Cpu,
                    speed_factor: 1.0,
                    power_watts: 2.0,
                })
                .collect(),
            reserved: Vec::new(),
        }
    }

    pub fn proc_index(&self, id: &str) -> Option<usize> {
        self.processors.iter().position(|p| p.id == id)
    }

    pub fn is_reserved(&self, id: &str) -> bool {
        self.reserved.iter().any(|r| r == id)
    }

    pub fn has_kind(&self, kind: ProcKind) -> bool {
        self.processors.iter().any(|p| p.kind == kind)
    }

    /// Effective cost of running `task` on processor index `p`.
    pub fn effective_cost(&self, task: &TaskNode, p: usize) -> f64 {
        let proc = &self.processors[p];
        task.costs.get(&proc.kind).copied().unwrap_or(f64::INFINITY) * proc.speed_factor
    }

    pub fn validate(&self) -> Vec<String> {
        let mut violations = Vec::new();
        if self.processors.is_empty() {
            violations.push("no processors".to_string());
        }
        let mut seen = HashSet::new();
        for p in &self.processors {
            if !seen.insert(p.id.as_str()) {
                violations.push(format!("duplicate processor id: {}", p.id));
            }
            if p.speed_factor <= 0.0 {
                violations.push(format!("processor {} has nonpositive speed_factor", p.id));
            }
            if p.power_watts < 0.0 {
                violations.push(format!("processor {} has negative power_watts", p.id));
            }
        }
        for r in &self.reserved {
            match self.processors.iter().find(|p| &p.id == r) {
                None => violations.push(format!("reserved id references unknown processor: {r}")),
                Some(p) if p.kind != ProcKind::Cpu => {
                    violations.push(format!("reserved processor {r} is not a CPU"))
                }
                _ => {}
            }
        }
        violations
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dag {
    pub nodes: Vec<TaskNode>,
    pub edges: Vec<Edge>,
}

impl Dag {
    pub fn new(nodes: Vec<TaskNode>, edges: Vec<Edge>) -> Dag {
        Dag { nodes, edges }
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn id_index(&self) -> HashMap<&str, usize> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect()
    }

    /// Successor lists as (node index, edge index), in edge input order.
    pub fn successors(&self) -> Vec<Vec<(usize, usize)>> {
        let idx = self.id_index();
        let mut succ = vec![Vec::new(); self.nodes.len()];
        for (ei, e) in self.edges.iter().enumerate() {
            if let (Some(&s), Some(&d)) = (idx.get(e.src.as_str()), idx.get(e.dst.as_str())) {
                succ[s].push((d, ei));
            }
        }
        succ
    }

    /// Predecessor lists as (node index, edge index), in edge input order.
    pub fn predecessors(&self) -> Vec<Vec<(usize, usize)>> {
        let idx = self.id_index();
        let mut pred = vec![Vec::new(); self.nodes.len()];
        for (ei, e) in self.edges.iter().enumerate() {
            if let (Some(&s), Some(&d)) = (idx.get(e.src.as_str()), idx.get(e.dst.as_str())) {
                pred[d].push((s, ei));
            }
        }
        pred
    }

    /// Deterministic topological order (Kahn, smallest node index first).
    /// Errors with the cycle membership when the graph is not a DAG.
    pub fn topo_order(&self) -> Result<Vec<usize>, Vec<usize>> {
        let succ = self.successors();
        let mut indeg = vec![0usize; self.nodes.len()];
        for list in &succ {
            for &(d, _) in list {
                indeg[d] += 1;
            }
        }
        let mut ready: BTreeSet<usize> = indeg
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0)
            .map(|(i, _)| i)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(&i) = ready.iter().next() {
            ready.remove(&i);
            order.push(i);
            for &(d, _) in &succ[i] {
                indeg[d] -= 1;
                if indeg[d] == 0 {
                    ready.insert(d);
                }
            }
        }
        if order.len() == self.nodes.len() {
            Ok(order)
        } else {
            Err((0..self.nodes.len()).filter(|i| !order.contains(i)).collect())
        }
    }

    /// Structural and platform-consistency violations, empty when clean.
    pub fn validate(&self, platform: &Platform) -> Vec<String> {
        let mut violations = Vec::new();
        if self.nodes.is_empty() {
            violations.push("no nodes".to_string());
            return violations;
        }
        let mut seen = HashSet::new();
        for n in &self.nodes {
            if !seen.insert(n.id.as_str()) {
                violations.push(format!("duplicate node id: {}", n.id));
            }
            if n.eligibility.is_empty() {
                violations.push(format!("task {} has empty eligibility", n.id));
            }
            for kind in &n.eligibility {
                if !n.costs.contains_key(kind) {
                    violations.push(format!("task {} missing cost for {kind}", n.id));
                }
                if !platform.has_kind(*kind) {
                    violations.push(format!(
                        "task {} eligible on {kind} but platform has no {kind} processor",
                        n.id
                    ));
                }
            }
            for (kind, c) in &n.costs {
                if *c < 0.0 {
                    violations.push(format!("task {} has negative cost for {kind}", n.id));
                }
            }
            if let Some(p) = n.period_ms {
                if p <= 0.0 {
                    violations.push(format!("task {} has nonpositive period", n.id));
                }
            }
            if n.deadline_ms <= 0.0 {
                violations.push(format!("task {} has nonpositive deadline", n.id));
            }
            if n.threads < 1 {
                violations.push(format!("task {} has zero threads", n.id));
            }
        }
        let idx = self.id_index();
        for e in &self.edges {
            if !idx.contains_key(e.src.as_str()) {
                violations.push(format!("edge references unknown node: {}", e.src));
            }
            if !idx.contains_key(e.dst.as_str()) {
                violations.push(format!("edge references unknown node: {}", e.dst));
            }
            if e.src == e.dst {
                violations.push(format!("self-loop on node: {}", e.src));
            }
            for c in e.comm_cost.values() {
                if *c < 0.0 {
                    violations.push(format!("edge {} -> {} has negative comm cost", e.src, e.dst));
                }
            }
        }
        violations.extend(platform.validate());
        if let Err(cycle) = self.topo_order() {
            let mut ids: Vec<&str> = cycle.iter().map(|&i| self.nodes[i].id.as_str()).collect();
            ids.sort_unstable();
            violations.push(format!("cycle detected: {}", ids.join(",")));
        }
        violations
    }

    pub fn longest_period_ms(&self) -> f64 {
        self.nodes
            .iter()
            .filter_map(|n| n.period_ms)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

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

    fn edge(src: &str, dst: &str) -> Edge {
        Edge {
            src: src.into(),
            dst: dst.into(),
            comm_cost: BTreeMap::new(),
            payload_kb: 0.0,
            assumed: false,
            triggering: true,
        }
    }

    #[test]
    fn two_node_chain_is_clean() {
        let dag = Dag::new(vec![node("A", 1.0), node("B", 2.0)], vec![edge("A", "B")]);
        assert!(dag.validate(&Platform::cpu_only(1)).is_empty());
    }

    #[test]
    fn cycle_is_reported_with_members() {
        let dag = Dag::new(
            vec![node("A", 1.0), node("B", 2.0)],
            vec![edge("A", "B"), edge("B", "A")],
        );
        let violations = dag.validate(&Platform::cpu_only(1));
        assert!(violations.contains(&"cycle detected: A,B".to_string()), "{violations:?}");
    }

    #[test]
    fn eligibility_needs_matching_platform_kind() {
        let mut n = node("A", 1.0);
        n.eligibility = vec![ProcKind::Dla];
        n.costs = BTreeMap::from([(ProcKind::Dla, 1.0)]);
        let dag = Dag::new(vec![n], vec![]);
        let violations = dag.validate(&Platform::cpu_only(2));
        assert_eq!(
            violations,
            vec!["task A eligible on DLA but platform has no DLA processor".to_string()]
        );
    }

    #[test]
    fn missing_cost_entry_is_a_violation() {
        let mut n = node("A", 1.0);
        n.eligibility = vec![ProcKind::Cpu, ProcKind::Gpu];
        let dag = Dag::new(vec![n], vec![]);
        let violations = dag.validate(&Platform::jetson());
        assert!(violations.iter().any(|v| v == "task A missing cost for GPU"));
    }

    #[test]
    fn topo_order_is_deterministic_and_respects_edges() {
        let dag = Dag::new(
            vec![node("C", 1.0), node("A", 1.0), node("B", 1.0)],
            vec![edge("A", "B"), edge("A", "C")],
        );
        let order = dag.topo_order().unwrap();
        // A (index 1) first, then smallest-index ready node.
        assert_eq!(order, vec![1, 0, 2]);
    }

    #[test]
    fn comm_key_is_order_insensitive() {
        assert_eq!(comm_key(ProcKind::Gpu, ProcKind::Cpu), "CPU-GPU");
        assert_eq!(comm_key(ProcKind::Cpu, ProcKind::Gpu), "CPU-GPU");
        let e = Edge {
            comm_cost: BTreeMap::from([("CPU-GPU".to_string(), 2.5)]),
            ..edge("A", "B")
        };
        assert_eq!(e.comm_between(ProcKind::Gpu, ProcKind::Cpu), 2.5);
        assert_eq!(e.comm_between(ProcKind::Cpu, ProcKind::Cpu), 0.0);
    }

    #[test]
    fn jetson_profile_shape() {
        let p = Platform::jetson();
        assert_eq!(p.processors.iter().filter(|x| x.kind == ProcKind::Cpu).count(), 8);
        assert_eq!(p.processors.iter().filter(|x| x.kind == ProcKind::Gpu).count(), 1);
        assert_eq!(p.processors.iter().filter(|x| x.kind == ProcKind::Dla).count(), 2);
        assert_eq!(p.reserved.len(), 2);
        assert!(p.validate().is_empty());
    }
}
