use std::path::Path;
use std::process::{Command, Output};

fn scad(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scad"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn scad")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = scad(dir, args);
    assert!(
        out.status.success(),
        "scad {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn gen_schedule_sim_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let gen = ok(dir, &["gen", "--app", "ADy608", "--segment", "2", "-o", "w.dag"]);
    assert!(gen.contains("24 nodes"), "{gen}");

    let gantt = ok(dir, &["schedule", "--stage", "static-rt", "w.dag"]);
    assert!(gantt.contains("makespan:"), "{gantt}");
    assert!(gantt.contains("velodyne_driver"), "{gantt}");

    ok(dir, &["schedule", "--stage", "static-rt", "w.dag", "-o", "w.sched"]);
    let sim = ok(
        dir,
        &[
            "sim", "w.dag", "--schedule", "w.sched", "--policy", "STATIC_RT",
            "--horizon-ms", "1000", "--seed", "7", "--report-json", "r.json",
        ],
    );
    assert!(sim.contains("Perception2D"), "{sim}");
    assert!(sim.contains("totals:"), "{sim}");

    let text = std::fs::read_to_string(dir.join("r.json")).unwrap();
    let report: scad_core::sim::SimReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.policy, "STATIC_RT");
    assert_eq!(report.modules.len(), 8);
}

#[test]
fn enumerating_stage_prints_pins_and_search_size() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["gen", "--app", "ADy608", "--segment", "5", "-o", "w.dag"]);
    let out = ok(
        dir,
        &[
            "schedule", "--stage", "jit+accel+custom", "w.dag", "-o", "w.sched",
            "--probe-horizon-ms", "500", "--eval-horizon-ms", "500", "--jobs", "2",
        ],
    );
    // 3 detector streams over {gpu0, dla0, dla1}: 27 raw, 6 forms.
    assert!(out.contains("searched 27 raw candidates as 6 forms"), "{out}");
    assert!(out.contains("pin yolo_0 ->"), "{out}");
    assert!(dir.join("w.sched").exists());
}

#[test]
fn run_writes_stable_reports_and_diff_of_self_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("plan.toml"),
        "name = \"mini\"\napps = [\"ADy608\"]\nstages = [\"linux-ts\"]\nhorizon_ms = 1000.0\nnoise_sigma = 0.04\n",
    )
    .unwrap();

    // Misses do not fail the run; the report still lands on disk.
    let out = ok(dir, &["run", "--plan", "plan.toml", "-o", "a"]);
    assert!(out.contains("ADy608 / linux-ts"), "{out}");
    ok(dir, &["run", "--plan", "plan.toml", "-o", "b"]);

    let a = std::fs::read(dir.join("a/mini.report.json")).unwrap();
    let b = std::fs::read(dir.join("b/mini.report.json")).unwrap();
    assert_eq!(a, b, "same plan must produce byte-identical reports");
    assert!(dir.join("a/mini.report.txt").exists());

    let diff = ok(
        dir,
        &["diff", "a/mini.report.json", "b/mini.report.json", "--json"],
    );
    let parsed: scad_core::experiment::ReportDiff = serde_json::from_str(&diff).unwrap();
    for cell in &parsed.cells {
        for d in cell.modules.values() {
            assert_eq!(d.miss_rate, 0.0);
            assert_eq!(d.mean_ms.unwrap_or(0.0), 0.0);
        }
    }
}

#[test]
fn diff_rejects_reports_over_different_workloads() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    for (name, app) in [("p1", "ADy608"), ("p2", "ADs608")] {
        std::fs::write(
            dir.join(format!("{name}.toml")),
            format!(
                "name = \"{name}\"\napps = [\"{app}\"]\nstages = [\"linux-ts\"]\nhorizon_ms = 500.0\n"
            ),
        )
        .unwrap();
        ok(dir, &["run", "--plan", &format!("{name}.toml")]);
    }
    let out = scad(dir, &["diff", "p1.report.json", "p2.report.json"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("different workloads"), "{err}");
}

#[test]
fn partition_reports_infeasibility_and_substitution_fixes_it() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let raw = ok(dir, &["partition", "yolov3", "--profile", "dla"]);
    assert!(raw.contains("feasible: false"), "{raw}");
    assert!(raw.contains("fallback segments: 8"), "{raw}");

    let fixed = ok(
        dir,
        &[
            "partition", "yolov3", "--profile", "dla",
            "--substitute", "leaky_relu=relu", "-o", "plan.toml",
        ],
    );
    assert!(fixed.contains("feasible: true"), "{fixed}");
    assert!(fixed.contains("fallback segments: 0"), "{fixed}");
    let doc = std::fs::read_to_string(dir.join("plan.toml")).unwrap();
    assert!(doc.contains("fallback_count = 0"), "{doc}");
}

#[test]
fn errors_are_tagged_and_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = scad(dir, &["gen", "--app", "ADx999", "-o", "w.dag"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown app"));

    std::fs::write(
        dir.join("bad.toml"),
        "name = \"bad\"\napps = [\"ADx999\"]\nstages = [\"jit\"]\n",
    )
    .unwrap();
    let out = scad(dir, &["run", "--plan", "bad.toml"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stage generate"), "{err}");
}
