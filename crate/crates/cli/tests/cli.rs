use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use synergy_cli::{apply_override, build_report, collect_summaries, parse_sweep};
use synergy_core::output::RunSummary;
use synergy_core::scenario::Scenario;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_synergy"));
    c.env_remove("SYNERGY_OUT");
    c
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn synergy(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn summary(dir: &Path, seed: u64) -> RunSummary {
    let text = fs::read_to_string(dir.join(format!("summary_s{seed}.json"))).unwrap();
    RunSummary::from_json(&text).unwrap()
}

const SHORT: &str = r#"
seed = 4
swarm_size = 6
record_stride = 10

[params]
sensing_range = 2.0
env_size = 10.0
goal_size = 6.0
t_max = 400.0
"#;

#[test]
fn desk_scenario_converges_and_writes_both_files() {
    let out = tempfile::tempdir().unwrap();
    let o = synergy(&[
        "run",
        "--scenario",
        scenario("desk_outward.toml").to_str().unwrap(),
        "--seed",
        "3",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = fs::read_to_string(out.path().join("trajectory_s3.csv")).unwrap();
    assert!(csv.starts_with("t,robot_id,x,y,theta,state,v,omega,goal_x,goal_y\n"));
    let s = summary(out.path(), 3);
    assert!(s.converged);
    assert!((1..=2).contains(&s.n_communities));
    assert_eq!(s.params.sensing_range, 1.6);

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("summary_s3.json")).unwrap())
            .unwrap();
    for key in [
        "seed",
        "synergy_time",
        "n_communities",
        "communities",
        "min_interrobot_distance",
        "warnings",
    ] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn late_joiner_ends_in_one_community_of_six() {
    let out = tempfile::tempdir().unwrap();
    let o = synergy(&[
        "run",
        "--scenario",
        scenario("late_joiner.toml").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let s = summary(out.path(), 0);
    assert_eq!(s.communities, vec![vec![0, 1, 2, 3, 4, 5]]);
    assert!(s.synergy_time.unwrap() >= 60.0);
}

#[test]
fn unsafe_gap_is_a_config_error() {
    let out = tempfile::tempdir().unwrap();
    let path = scenario("unsafe_gap.toml");
    let o = synergy(&[
        "run",
        "--scenario",
        path.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ERROR"));
    assert!(!out.path().join("summary_s0.json").exists());

    assert_eq!(
        synergy(&["check", "--scenario", path.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
    let ok = synergy(&[
        "check",
        "--scenario",
        scenario("flagship.toml").to_str().unwrap(),
    ]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("INFO [compactness]"));
}

#[test]
fn malformed_scenario_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "seed = 1\nswarm_size = \"six\"\n").unwrap();
    let o = synergy(&["run", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn timeout_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.toml");
    fs::write(&path, SHORT.replace("t_max = 400.0", "t_max = 5.0")).unwrap();
    let o = synergy(&[
        "run",
        "--scenario",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!summary(&dir.path().join("o"), 4).converged);
}

#[test]
fn output_root_defaults_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.toml");
    fs::write(&path, SHORT).unwrap();
    let root = dir.path().join("from_env");
    let o = bin()
        .env("SYNERGY_OUT", &root)
        .args(["run", "--scenario", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.code() == Some(0) || o.status.code() == Some(2));
    assert!(root.join("summary_s4.json").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.toml");
    fs::write(&path, SHORT).unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("o{k}"));
        synergy(&[
            "run",
            "--scenario",
            path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        outputs.push((
            fs::read(out.join("trajectory_s4.csv")).unwrap(),
            fs::read(out.join("summary_s4.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn sweep_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.toml");
    fs::write(&path, SHORT).unwrap();
    let out = dir.path().join("sweep");
    let o = synergy(&[
        "sweep",
        "--scenario",
        path.to_str().unwrap(),
        "--sweep",
        "min_community_size=2,3",
        "--repeats",
        "3",
        "--seed",
        "10",
        "--workers",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    let runs = fs::read_to_string(out.join("runs.csv")).unwrap();
    let mut lines = runs.lines();
    assert_eq!(
        lines.next(),
        Some("param_value,run,seed,synergy_time,n_communities")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    assert!(rows[0].starts_with("2,0,10,"));
    assert!(rows[5].starts_with("3,2,12,"));
    let agg = fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 3);
    assert!(out.join("min_community_size=3/summary_s12.json").exists());

    let again = dir.path().join("again");
    synergy(&[
        "sweep",
        "--scenario",
        path.to_str().unwrap(),
        "--sweep",
        "min_community_size=2,3",
        "--repeats",
        "3",
        "--seed",
        "10",
        "--workers",
        "1",
        "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(runs, fs::read_to_string(again.join("runs.csv")).unwrap());

    let o = synergy(&["report", out.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(text.contains("== Swarm size 6 =="));
    assert!(text.contains("== Minimum community size =="));
    assert!(text.contains("Robot"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["groups"].as_array().unwrap().len(), 1);
    assert_eq!(json["minimum_size"].as_array().unwrap().len(), 2);
    assert_eq!(
        json["groups"][0]["untraceability"]["per_robot"]
            .as_array()
            .unwrap()
            .len(),
        6
    );
}

#[test]
fn report_groups_mixed_swarm_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let base = Scenario::parse(SHORT).unwrap();
    for (k, n) in [(0u64, 6.0), (1, 6.0), (2, 4.0), (3, 4.0)] {
        let s = apply_override(&base, "swarm_size", n).unwrap().with_seed(k);
        synergy_cli::run_to_dir(&s, &dir.path().join(format!("r{k}"))).unwrap();
    }
    let found = collect_summaries(dir.path()).unwrap();
    assert_eq!(found.len(), 4);
    let report = build_report(&found).unwrap();
    let sizes: Vec<usize> = report.groups.iter().map(|g| g.swarm_size).collect();
    assert_eq!(sizes, vec![4, 6]);
    assert!(report.to_text().contains("mixed swarm sizes"));
}

#[test]
fn empty_report_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = synergy(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_axis_parsing_and_overrides() {
    let (name, values) = parse_sweep("sensing_range=1,2.5, 4").unwrap();
    assert_eq!(name, "sensing_range");
    assert_eq!(values, vec![1.0, 2.5, 4.0]);
    assert!(parse_sweep("sensing_range").is_err());
    assert!(parse_sweep("colour=1").is_err());
    assert!(parse_sweep("goal_radius=a").is_err());

    let base = Scenario::parse(SHORT).unwrap();
    let s = apply_override(&base, "specific_area", 80.0).unwrap();
    assert!((s.params.env_bounds.max_x - (80.0f64 * 6.0).sqrt() / 2.0).abs() < 1e-12);
    assert!(apply_override(&base, "min_community_size", 2.5).is_err());
    assert!(apply_override(&base, "sensing_range", -1.0).is_err());
    let deg = apply_override(&base, "fov_half_angle_deg", 90.0).unwrap();
    assert!((deg.params.fov_half_angle - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
}

#[test]
fn failing_sweep_values_are_recorded_and_the_rest_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.toml");
    fs::write(&path, SHORT.replace("t_max = 400.0", "t_max = 20.0")).unwrap();
    let out = dir.path().join("s");
    let o = synergy(&[
        "sweep",
        "--scenario",
        path.to_str().unwrap(),
        "--sweep",
        "safe_distance=0.5,1.0",
        "--repeats",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let failures = fs::read_to_string(out.join("failures.csv")).unwrap();
    assert!(failures.contains("synergy-condition"));
    assert!(out.join("safe_distance=0.5/summary_s4.json").exists());
}
