//! On-disk form of task graphs (`.dag`) and platforms.
//!
//! Both are TOML with an explicit integer schema version. Unknown fields are
//! rejected so that typos fail loudly instead of silently changing runs.

use serde::{Deserialize, Serialize};

use crate::dag::{Dag, Edge, Platform, TaskNode};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DagDoc {
    pub version: u32,
    pub platform: Platform,
    pub nodes: Vec<TaskNode>,
    pub edges: Vec<Edge>,
}

impl DagDoc {
    pub fn new(dag: &Dag, platform: &Platform) -> DagDoc {
        DagDoc {
            version: SCHEMA_VERSION,
            platform: platform.clone(),
            nodes: dag.nodes.clone(),
            edges: dag.edges.clone(),
        }
    }

    pub fn into_parts(self) -> (Dag, Platform) {
        (Dag::new(self.nodes, self.edges), self.platform)
    }
}

/// Parse a `.dag` document. The result is guaranteed to pass `Dag::validate`.
pub fn parse_dag(text: &str) -> Result<(Dag, Platform)> {
    let doc: DagDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if doc.version != SCHEMA_VERSION {
        return Err(Error::Version {
            found: doc.version,
            expected: SCHEMA_VERSION,
        });
    }
    if doc.nodes.is_empty() {
        return Err(Error::EmptyDag);
    }
    let (dag, platform) = doc.into_parts();
    let violations = dag.validate(&platform);
    if !violations.is_empty() {
        return Err(Error::InvalidDag(violations.join("; ")));
    }
    Ok((dag, platform))
}

pub fn dump_dag(dag: &Dag, platform: &Platform) -> Result<String> {
    toml::to_string_pretty(&DagDoc::new(dag, platform)).map_err(|e| Error::Parse(e.to_string()))
}

pub fn load_dag(path: &std::path::Path) -> Result<(Dag, Platform)> {
    parse_dag(&std::fs::read_to_string(path)?)
}

pub fn save_dag(dag: &Dag, platform: &Platform, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, dump_dag(dag, platform)?)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlatformDoc {
    version: u32,
    #[serde(flatten)]
    platform: Platform,
}

pub fn parse_platform(text: &str) -> Result<Platform> {
    let doc: PlatformDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if doc.version != SCHEMA_VERSION {
        return Err(Error::Version {
            found: doc.version,
            expected: SCHEMA_VERSION,
        });
    }
    let violations = doc.platform.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidPlatform(violations.join("; ")));
    }
    Ok(doc.platform)
}

pub fn dump_platform(platform: &Platform) -> Result<String> {
    toml::to_string_pretty(&PlatformDoc {
        version: SCHEMA_VERSION,
        platform: platform.clone(),
    })
    .map_err(|e| Error::Parse(e.to_string()))
}

/// Resolve a platform argument: a builtin name (`jetson`, `cpu<N>`) or a
/// path to a platform TOML file.
pub fn resolve_platform(spec: &str) -> Result<Platform> {
    if spec == "jetson" {
        return Ok(Platform::jetson());
    }
    if let Some(n) = spec.strip_prefix("cpu") {
        if let Ok(cores) = n.parse::<usize>() {
            return Ok(Platform::cpu_only(cores));
        }
    }
    let path = std::path::Path::new(spec);
    if path.exists() {
        return parse_platform(&std::fs::read_to_string(path)?);
    }
    Err(Error::InvalidPlatform(format!(
        "unknown platform {spec} (expected jetson, cpu<N>, or a file path)"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::{Category, ProcKind};
    use std::collections::BTreeMap;

    fn sample() -> (Dag, Platform) {
        let nodes = vec![
            TaskNode {
                id: "src".into(),
                name: "source".into(),
                category: Category::Sensing,
                costs: BTreeMap::from([(ProcKind::Cpu, 5.0)]),
                eligibility: vec![ProcKind::Cpu],
                period_ms: Some(100.0),
                deadline_ms: 100.0,
                threads: 2,
            },
            TaskNode {
                id: "det".into(),
                name: "detector".into(),
                category: Category::Perception2D,
                costs: BTreeMap::from([(ProcKind::Gpu, 40.0), (ProcKind::Dla, 60.0)]),
                eligibility: vec![ProcKind::Gpu, ProcKind::Dla],
                period_ms: None,
                deadline_ms: 100.0,
                threads: 2,
            },
        ];
        let edges = vec![Edge {
            src: "src".into(),
            dst: "det".into(),
            comm_cost: BTreeMap::from([("CPU-GPU".to_string(), 0.5)]),
            payload_kb: 1200.0,
            assumed: false,
            triggering: true,
        }];
        (Dag::new(nodes, edges), Platform::jetson())
    }

    #[test]
    fn round_trip_is_identity() {
        let (dag, platform) = sample();
        let text = dump_dag(&dag, &platform).unwrap();
        let (dag2, platform2) = parse_dag(&text).unwrap();
        assert_eq!(dag, dag2);
        assert_eq!(platform, platform2);
        assert_eq!(text, dump_dag(&dag2, &platform2).unwrap());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let (dag, platform) = sample();
        // Appended at the end it would land inside the trailing comm_cost
        // map, which takes free-form keys; inject at the document root.
        let text = dump_dag(&dag, &platform)
            .unwrap()
            .replace("version = 1\n", "version = 1\nbogus_field = 3\n");
        assert!(matches!(parse_dag(&text), Err(Error::Parse(_))));
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let (dag, platform) = sample();
        let text = dump_dag(&dag, &platform).unwrap().replace("version = 1", "version = 9");
        assert!(matches!(parse_dag(&text), Err(Error::Version { found: 9, .. })));
    }

    #[test]
    fn empty_node_list_is_rejected() {
        let text = "version = 1\nnodes = []\nedges = []\n[platform]\n[[platform.processors]]\nid = \"cpu0\"\nkind = \"CPU\"\n";
        assert!(matches!(parse_dag(text), Err(Error::EmptyDag)));
    }

    #[test]
    fn platform_round_trip_and_builtin() {
        let p = Platform::jetson();
        let text = dump_platform(&p).unwrap();
        assert_eq!(parse_platform(&text).unwrap(), p);
        assert_eq!(resolve_platform("jetson").unwrap(), p);
        assert_eq!(resolve_platform("cpu3").unwrap().processors.len(), 3);
    }
}
