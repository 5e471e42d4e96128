//! End-to-end runs of the `tolrerm` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL_SANDWICH: &str = "experiment = \"sandwich_audit\"\nseed = 3\n[params]\ncases = 40\ninclusion_instances = 1\ninclusion_probes = 200\n";

/// A configuration whose measure check fails: the stated bound is below the
/// true mass at `d = 2`.
const FAILING_ORACLE: &str = "experiment = \"oracle_query_sweep\"\nseed = 3\n[params]\ndims = [2]\ndiameters = [20, 50]\nbudgets = [0, 1, 5]\ntrials = 300\nmeasure_samples = 20000\nsymmetry_queries = 1000\nscaling_max_budget = 5000\n";

struct Sandbox {
    dir: TempDir,
}

impl Sandbox {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn config(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn out_dir(&self) -> PathBuf {
        self.path().join("out")
    }

    fn tolrerm(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_tolrerm"))
            .args(args)
            .env("TOLRERM_OUTPUT_DIR", self.out_dir())
            .current_dir(self.path())
            .output()
            .unwrap()
    }

    fn run(&self, config: &Path, extra: &[&str]) -> Output {
        let mut args = vec!["run", "--config", config.to_str().unwrap()];
        args.extend_from_slice(extra);
        self.tolrerm(&args)
    }

    fn outputs(&self) -> Vec<String> {
        let mut names: Vec<String> = fs::read_dir(self.out_dir())
            .map(|rd| rd.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect())
            .unwrap_or_default();
        names.sort();
        names
    }
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn list_experiments_names_all_seven() {
    let sb = Sandbox::new();
    let out = sb.tolrerm(&["list-experiments"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "tolrerm_sweep",
        "inflation_gap_audit",
        "sandwich_audit",
        "lb_linear_game",
        "oracle_query_sweep",
        "robust_vc_audit",
        "regularity_check",
    ] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing from\n{text}");
    }
}

#[test]
fn passing_run_writes_csv_and_exits_zero() {
    let sb = Sandbox::new();
    let cfg = sb.config("s.toml", SMALL_SANDWICH);
    let out = sb.run(&cfg, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(sb.outputs(), ["sandwich_audit.csv"]);
    let text = fs::read_to_string(sb.out_dir().join("sandwich_audit.csv")).unwrap();
    assert!(text.starts_with("# schema: tolrerm.run.v1\n"));
    assert!(text.contains("# check grid_sandwich: PASS"));
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.starts_with("case,middle,hypothesis"), "{header}");
    let data_rows = text.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(data_rows, 80);
    assert!(stderr(&out).contains("PASS negative_control_detected"));
}

#[test]
fn reruns_are_byte_identical_and_seed_matters() {
    let sb = Sandbox::new();
    let cfg = sb.config("s.toml", SMALL_SANDWICH);
    let path = sb.out_dir().join("sandwich_audit.csv");
    sb.run(&cfg, &[]);
    let first = fs::read(&path).unwrap();
    sb.run(&cfg, &[]);
    assert_eq!(first, fs::read(&path).unwrap());
    sb.run(&cfg, &["--set", "seed=4"]);
    assert_ne!(first, fs::read(&path).unwrap());
}

#[test]
fn extra_tables_go_to_sibling_files() {
    let sb = Sandbox::new();
    let cfg = sb.config("t.toml", "experiment = \"tolrerm_sweep\"\nseed = 1\noutput_path = \"sweep.csv\"\n[params]\nn_grid = [10, 20]\ntasks = 2\ntrials_per_task = 2\n");
    let out = sb.run(&cfg, &[]);
    assert!(matches!(out.status.code(), Some(0 | 1)), "{}", stderr(&out));
    assert_eq!(sb.outputs(), ["sweep.csv", "sweep.trials.csv"]);
}

#[test]
fn json_output_carries_schema_and_checks() {
    let sb = Sandbox::new();
    let cfg = sb.config("s.toml", SMALL_SANDWICH);
    let out = sb.run(&cfg, &["--set", "format=json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value =
        serde_json::from_slice(&fs::read(sb.out_dir().join("sandwich_audit.json")).unwrap()).unwrap();
    assert_eq!(v["schema"], "tolrerm.run.v1");
    assert_eq!(v["passed"], true);
    assert_eq!(v["config"]["params"]["cases"], 40);
    assert!(v["checks"].as_array().unwrap().len() >= 4);
    assert_eq!(v["tables"][0]["name"], "cases");
}

#[test]
fn failed_check_exits_one_and_still_writes() {
    let sb = Sandbox::new();
    let cfg = sb.config("o.toml", FAILING_ORACLE);
    let out = sb.run(&cfg, &[]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stderr(&out).contains("FAIL measure_bound"));
    assert!(sb.outputs().contains(&"oracle_query_sweep.measure.csv".to_string()));
}

#[test]
fn usage_errors_exit_two_and_write_nothing() {
    let sb = Sandbox::new();
    let cases = [
        ("unknown key", "experiment = \"sandwich_audit\"\nseed = 1\nbogus = 2\n"),
        ("unknown param", "experiment = \"sandwich_audit\"\nseed = 1\n[params]\ncasez = 3\n"),
        ("unknown experiment", "experiment = \"nope\"\nseed = 1\n"),
        ("missing seed", "experiment = \"sandwich_audit\"\n"),
        ("invalid value", "experiment = \"tolrerm_sweep\"\nseed = 1\n[params]\neps = 2.0\n"),
        ("not toml", "experiment = \n"),
    ];
    for (what, text) in cases {
        let cfg = sb.config("bad.toml", text);
        let out = sb.run(&cfg, &[]);
        assert_eq!(out.status.code(), Some(2), "{what}: {}", stderr(&out));
        let out = sb.tolrerm(&["validate", "--config", cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{what}: {}", stderr(&out));
    }
    let out = sb.run(&sb.path().join("missing.toml"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let out = sb.tolrerm(&["run"]);
    assert_eq!(out.status.code(), Some(2));
    let cfg = sb.config("s.toml", SMALL_SANDWICH);
    let out = sb.run(&cfg, &["--set", "params.cases"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(sb.outputs().is_empty());
}

#[test]
fn unwritable_output_exits_three() {
    let sb = Sandbox::new();
    let blocker = sb.path().join("blocker");
    fs::write(&blocker, "a file, not a directory").unwrap();
    let text = SMALL_SANDWICH.replacen(
        "seed = 3\n",
        &format!("seed = 3\noutput_path = \"{}\"\n", blocker.join("x.csv").display()),
        1,
    );
    let cfg = sb.config("s.toml", &text);
    let out = sb.run(&cfg, &[]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn validate_prints_resolved_defaults() {
    let sb = Sandbox::new();
    let cfg = sb.config("r.toml", "experiment = \"regularity_check\"\nseed = 9\n");
    let out = sb.tolrerm(&["validate", "--config", cfg.to_str().unwrap(), "--set", "params.probes=33"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["seed"], 9);
    assert_eq!(v["params"]["probes"], 33);
    assert_eq!(v["params"]["sphere_radius"], 2.0);
    assert!(v["output_path"].as_str().unwrap().ends_with("regularity_check.csv"));
    assert!(sb.outputs().is_empty());
}
