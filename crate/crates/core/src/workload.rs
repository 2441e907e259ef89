//! Construction of the driving-stack application family.
//!
//! Six application variants share one backbone pipeline (lidar localization,
//! 3D perception, tracking, prediction, planning, control) and differ in the
//! camera detector: three input resolutions, each in a plain and an SPP
//! flavor, with the stream count shrinking as resolution grows. Execution
//! costs come from calibration profiles measured on the reference device,
//! one per optimization stage and app.
//!
//! Detector DLA timing is not a free profile knob: it is derived from the
//! embedded layer graph through the partitioner, so fallback overhead and
//! the effect of activation substitution follow from the network structure.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dag::{Category, Dag, Edge, ProcKind, TaskNode};
use crate::partition::{
    builtin_layer_graph, builtin_support_profile, derive_costs, substitute, LayerCostModel,
};
use crate::{Error, Result};

pub const APP_NAMES: [&str; 6] = [
    "ADy288", "ADy416", "ADy608", "ADs288", "ADs416", "ADs608",
];
pub const SEGMENTS: std::ops::RangeInclusive<u32> = 1..=6;

const PIPELINE_DEADLINE_MS: f64 = 100.0;
const CONTROL_DEADLINE_MS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AppSpec {
    pub name: &'static str,
    pub streams: usize,
    pub input_px: u32,
    pub spp: bool,
}

pub fn app_spec(name: &str) -> Result<AppSpec> {
    let lower = name.to_ascii_lowercase();
    let (canon, streams, px, spp) = match lower.as_str() {
        "ady288" => ("ADy288", 10, 288, false),
        "ady416" => ("ADy416", 5, 416, false),
        "ady608" => ("ADy608", 3, 608, false),
        "ads288" => ("ADs288", 10, 288, true),
        "ads416" => ("ADs416", 5, 416, true),
        "ads608" => ("ADs608", 3, 608, true),
        _ => return Err(Error::UnknownApp(name.to_string())),
    };
    Ok(AppSpec {
        name: canon,
        streams,
        input_px: px,
        spp,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DlaMode {
    /// Detector runs on the GPU only.
    None,
    /// Detector may run on a DLA with unsupported layers bounced back.
    Fallback,
    /// Detector is rebuilt with supported activations and stays resident.
    Resident,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccelCosts {
    pub yolo_gpu: f64,
    pub pp_gpu: f64,
}

/// Measured mean service times plus device timing rates for one
/// (stage, app) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationProfile {
    pub version: u32,
    pub app: String,
    pub segment: u32,
    pub dla_mode: DlaMode,
    pub cpu_ms: BTreeMap<String, f64>,
    pub accel_ms: AccelCosts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_rates: Option<LayerCostModel>,
}

pub fn parse_profile(text: &str) -> Result<CalibrationProfile> {
    let p: CalibrationProfile =
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if p.version != 1 {
        return Err(Error::Version {
            found: p.version,
            expected: 1,
        });
    }
    if p.dla_mode != DlaMode::None && p.layer_rates.is_none() {
        return Err(Error::Parse(format!(
            "profile {} segment {} enables the dla but carries no layer rates",
            p.app, p.segment
        )));
    }
    Ok(p)
}

pub fn load_profile(path: &Path) -> Result<CalibrationProfile> {
    parse_profile(&std::fs::read_to_string(path)?)
}

pub fn profile_name(segment: u32, app: &str) -> Result<String> {
    let spec = app_spec(app)?;
    if !SEGMENTS.contains(&segment) {
        return Err(Error::UnknownProfile(format!("segment{segment}")));
    }
    Ok(format!(
        "segment{segment}-{}",
        spec.name.to_ascii_lowercase()
    ))
}

macro_rules! builtin {
    ($name:literal) => {
        ($name, include_str!(concat!("../profiles/", $name, ".toml")))
    };
}

static BUILTIN_PROFILES: [(&str, &str); 36] = [
    builtin!("segment1-ady288"),
    builtin!("segment1-ady416"),
    builtin!("segment1-ady608"),
    builtin!("segment1-ads288"),
    builtin!("segment1-ads416"),
    builtin!("segment1-ads608"),
    builtin!("segment2-ady288"),
    builtin!("segment2-ady416"),
    builtin!("segment2-ady608"),
    builtin!("segment2-ads288"),
    builtin!("segment2-ads416"),
    builtin!("segment2-ads608"),
    builtin!("segment3-ady288"),
    builtin!("segment3-ady416"),
    builtin!("segment3-ady608"),
    builtin!("segment3-ads288"),
    builtin!("segment3-ads416"),
    builtin!("segment3-ads608"),
    builtin!("segment4-ady288"),
    builtin!("segment4-ady416"),
    builtin!("segment4-ady608"),
    builtin!("segment4-ads288"),
    builtin!("segment4-ads416"),
    builtin!("segment4-ads608"),
    builtin!("segment5-ady288"),
    builtin!("segment5-ady416"),
    builtin!("segment5-ady608"),
    builtin!("segment5-ads288"),
    builtin!("segment5-ads416"),
    builtin!("segment5-ads608"),
    builtin!("segment6-ady288"),
    builtin!("segment6-ady416"),
    builtin!("segment6-ady608"),
    builtin!("segment6-ads288"),
    builtin!("segment6-ads416"),
    builtin!("segment6-ads608"),
];

pub fn builtin_profile(name: &str) -> Result<CalibrationProfile> {
    BUILTIN_PROFILES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| parse_profile(text))
        .unwrap_or_else(|| Err(Error::UnknownProfile(name.to_string())))
}

/// Detector cost on the DLA under the profile's mode, derived from the
/// partitioned layer graph. `None` when the DLA is not in play.
pub fn detector_dla_cost(profile: &CalibrationProfile) -> Result<Option<f64>> {
    if profile.dla_mode == DlaMode::None {
        return Ok(None);
    }
    let spec = app_spec(&profile.app)?;
    let graph_name = if spec.spp { "yolov3_spp" } else { "yolov3" };
    let mut lg = builtin_layer_graph(graph_name)?;
    if profile.dla_mode == DlaMode::Resident {
        let subs = BTreeMap::from([("leaky_relu".to_string(), "relu".to_string())]);
        lg = substitute(&lg, &subs);
    }
    let support = builtin_support_profile("dla")?;
    let rates = profile
        .layer_rates
        .as_ref()
        .ok_or_else(|| Error::Parse("missing layer rates".into()))?;
    let derived = derive_costs(&lg, &support, rates)?;
    if profile.dla_mode == DlaMode::Resident && !derived.feasible {
        return Err(Error::Invalid(
            "substituted network still overflows the fallback budget".into(),
        ));
    }
    Ok(Some(derived.total_ms))
}

fn cpu_cost(profile: &CalibrationProfile, key: &str) -> Result<f64> {
    profile
        .cpu_ms
        .get(key)
        .copied()
        .ok_or_else(|| Error::Parse(format!("profile lacks cpu_ms entry {key}")))
}

struct NodeBuilder {
    nodes: Vec<TaskNode>,
}

impl NodeBuilder {
    fn cpu(
        &mut self,
        id: &str,
        category: Category,
        cost: f64,
        period_ms: Option<f64>,
        deadline_ms: f64,
        threads: u32,
    ) {
        self.nodes.push(TaskNode {
            id: id.into(),
            name: id.into(),
            category,
            costs: BTreeMap::from([(ProcKind::Cpu, cost)]),
            eligibility: vec![ProcKind::Cpu],
            period_ms,
            deadline_ms,
            threads,
        });
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

/// Topic hand-off between CPU nodes: transfer cost applies only when the
/// endpoints land on different cores.
fn data_edge(src: &str, dst: &str, ms: f64, kb: f64) -> Edge {
    Edge {
        comm_cost: BTreeMap::from([("CPU-CPU".to_string(), ms)]),
        payload_kb: kb,
        ..edge(src, dst)
    }
}

/// Transfer that crosses the host/accelerator boundary in either direction.
fn accel_edge(src: &str, dst: &str, ms: f64, kb: f64) -> Edge {
    Edge {
        comm_cost: BTreeMap::from([
            ("CPU-GPU".to_string(), ms),
            ("CPU-DLA".to_string(), ms),
            ("GPU-DLA".to_string(), ms),
        ]),
        payload_kb: kb,
        ..edge(src, dst)
    }
}

/// Structure inferred from component descriptions rather than a published
/// wiring; data-only so the consumer is not driven by the producer's rate.
/// Latest-value reads of small state, so no transfer term.
fn assumed_data_edge(src: &str, dst: &str) -> Edge {
    Edge {
        assumed: true,
        triggering: false,
        ..edge(src, dst)
    }
}

/// Build the task graph for the profile's app with the profile's costs.
pub fn build_app(profile: &CalibrationProfile) -> Result<Dag> {
    let spec = app_spec(&profile.app)?;
    let d = PIPELINE_DEADLINE_MS;
    let dc = CONTROL_DEADLINE_MS;
    let mut b = NodeBuilder { nodes: Vec::new() };

    // Lidar front end and localization.
    b.cpu("velodyne_driver", Category::Sensing, cpu_cost(profile, "velodyne_driver")?, Some(100.0), d, 2);
    b.cpu("voxel_grid_filter", Category::Sensing, cpu_cost(profile, "voxel_grid_filter")?, None, d, 2);
    b.cpu("nmea2tfpose", Category::Localization, cpu_cost(profile, "nmea2tfpose")?, Some(10.0), d, 1);
    b.cpu("ndt_matching", Category::Localization, cpu_cost(profile, "ndt_matching")?, None, d, 3);
    b.cpu("pose_relay", Category::Localization, cpu_cost(profile, "pose_relay")?, None, d, 1);
    b.cpu("vel_relay", Category::Localization, cpu_cost(profile, "vel_relay")?, None, d, 1);

    // 3D perception stays on the GPU.
    b.nodes.push(TaskNode {
        id: "lidar_point_pillars".into(),
        name: "lidar_point_pillars".into(),
        category: Category::Perception3D,
        costs: BTreeMap::from([(ProcKind::Gpu, profile.accel_ms.pp_gpu)]),
        eligibility: vec![ProcKind::Gpu],
        period_ms: None,
        deadline_ms: d,
        threads: 1,
    });

    // Fusion, tracking, prediction.
    b.cpu("range_vision_fusion", Category::Tracking, cpu_cost(profile, "range_vision_fusion")?, None, d, 2);
    b.cpu("imm_ukf_tracker", Category::Tracking, cpu_cost(profile, "imm_ukf_tracker")?, None, d, 2);
    b.cpu("native_motion_predictor", Category::Prediction, cpu_cost(profile, "native_motion_predictor")?, None, d, 2);
    b.cpu("costmap_generator", Category::Prediction, cpu_cost(profile, "costmap_generator")?, None, d, 2);

    // Planning chain and control, both on the tight deadline.
    b.cpu("waypoint_replanner", Category::Planning, cpu_cost(profile, "waypoint_replanner")?, Some(100.0), dc, 1);
    b.cpu("lane_rule", Category::Planning, cpu_cost(profile, "lane_rule")?, None, dc, 1);
    b.cpu("lane_stop", Category::Planning, cpu_cost(profile, "lane_stop")?, None, dc, 1);
    b.cpu("lane_select", Category::Planning, cpu_cost(profile, "lane_select")?, None, dc, 1);
    b.cpu("astar_avoid", Category::Planning, cpu_cost(profile, "astar_avoid")?, None, dc, 2);
    b.cpu("velocity_set", Category::Planning, cpu_cost(profile, "velocity_set")?, None, dc, 1);
    b.cpu("pure_pursuit", Category::Control, cpu_cost(profile, "pure_pursuit")?, Some(10.0), dc, 2);

    // Camera streams and detectors.
    let cam_cost = cpu_cost(profile, "camera_driver")?;
    let dla_cost = detector_dla_cost(profile)?;
    for k in 0..spec.streams {
        b.cpu(&format!("camera_{k}"), Category::Sensing, cam_cost, Some(100.0 / 3.0), d, 1);
        let mut costs = BTreeMap::from([(ProcKind::Gpu, profile.accel_ms.yolo_gpu)]);
        let mut eligibility = vec![ProcKind::Gpu];
        if let Some(c) = dla_cost {
            costs.insert(ProcKind::Dla, c);
            eligibility.push(ProcKind::Dla);
        }
        b.nodes.push(TaskNode {
            id: format!("yolo_{k}"),
            name: format!("yolo_{k}"),
            category: Category::Perception2D,
            costs,
            eligibility,
            period_ms: None,
            deadline_ms: d,
            threads: 1,
        });
    }

    let mut edges = vec![
        data_edge("velodyne_driver", "voxel_grid_filter", 5.0, 2048.0),
        Edge {
            assumed: true,
            ..data_edge("voxel_grid_filter", "ndt_matching", 4.0, 800.0)
        },
        data_edge("nmea2tfpose", "ndt_matching", 0.05, 1.0),
        data_edge("ndt_matching", "pose_relay", 0.05, 1.0),
        data_edge("ndt_matching", "vel_relay", 0.05, 1.0),
        accel_edge("voxel_grid_filter", "lidar_point_pillars", 4.0, 800.0),
        accel_edge("lidar_point_pillars", "range_vision_fusion", 0.5, 20.0),
        data_edge("range_vision_fusion", "imm_ukf_tracker", 0.1, 10.0),
        data_edge("imm_ukf_tracker", "native_motion_predictor", 0.1, 10.0),
        data_edge("native_motion_predictor", "costmap_generator", 0.1, 10.0),
        data_edge("waypoint_replanner", "lane_rule", 0.05, 2.0),
        data_edge("lane_rule", "lane_stop", 0.05, 2.0),
        data_edge("lane_stop", "lane_select", 0.05, 2.0),
        data_edge("lane_select", "astar_avoid", 0.05, 2.0),
        data_edge("astar_avoid", "velocity_set", 0.05, 2.0),
        assumed_data_edge("costmap_generator", "astar_avoid"),
        assumed_data_edge("pose_relay", "lane_select"),
        assumed_data_edge("pose_relay", "pure_pursuit"),
        assumed_data_edge("vel_relay", "lane_select"),
        assumed_data_edge("vel_relay", "velocity_set"),
    ];
    for k in 0..spec.streams {
        edges.push(accel_edge(&format!("camera_{k}"), &format!("yolo_{k}"), 2.0, 300.0));
        edges.push(accel_edge(&format!("yolo_{k}"), "range_vision_fusion", 0.5, 20.0));
    }

    Ok(Dag::new(b.nodes, edges))
}

/// One-call builder from stage and app names using the embedded profiles.
pub fn build_stage_app(segment: u32, app: &str) -> Result<(CalibrationProfile, Dag)> {
    let profile = builtin_profile(&profile_name(segment, app)?)?;
    let dag = build_app(&profile)?;
    Ok((profile, dag))
}
