use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_edgescatter"));
    c.env_remove("EDGESCATTER_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, body: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(o: &Output) -> Value {
    serde_json::from_str(&stdout(o)).unwrap()
}

fn entry(v: &Value) -> (f64, f64) {
    (v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

const GENERIC: &str = r#"
[[potential.bumps]]
component = "q0"
amplitude = 1.0
x0 = 0.3
y0 = 0.2
sx = 1.0
sy = 1.2

[[potential.bumps]]
component = "q1"
amplitude = 0.7
x0 = -0.5
y0 = -0.4
sx = 0.8
sy = 0.9
"#;

#[test]
fn free_single_channel_transmission_is_one() {
    let o = run(&["--task", "scatter", "--energy", "1.2"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["n_plus"], 0);
    assert_eq!(v["n_minus"], 1);
    let (re, im) = entry(&v["t_minus"][0][0]);
    assert!((re - 1.0).abs() < 1e-10 && im.abs() < 1e-10);
    assert_eq!(v["channels"][0]["level"], 0);
    assert_eq!(v["channels"][0]["current"], -1.0);
}

#[test]
fn gaussian_scalar_phase() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "phase.toml",
        "task = \"scatter\"\nenergy = 1.2\n[[potential.bumps]]\ncomponent = \"q0\"\namplitude = 0.5\nsx = 1.0\n",
    );
    let o = run(&["--config", &cfg]);
    assert_eq!(code(&o), 0);
    let (re, im) = entry(&json(&o)["t_minus"][0][0]);
    let phi = 0.5 * (2.0 * std::f64::consts::PI).sqrt();
    assert!(((re * re + im * im).sqrt() - 1.0).abs() < 1e-8);
    assert!((im.atan2(re) + phi).abs() < 1e-6, "phase {}", im.atan2(re));
}

#[test]
fn generic_scatter_report_and_defect_gate() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "generic.toml", &format!("task = \"scatter\"\nenergy = 2.2\n{GENERIC}"));
    let out = dir.path().join("s.json");
    let o = run(&["--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["n_plus"], 2);
    assert_eq!(v["n_minus"], 3);
    assert!(v["unitarity_defect"].as_f64().unwrap() < 1e-6);
    assert_eq!(v["channels"].as_array().unwrap().len(), 5);
    assert_eq!(v["t_plus"].as_array().unwrap().len(), 2);
    assert_eq!(v["t_minus"][0].as_array().unwrap().len(), 3);
    assert_eq!(v["r_plus"].as_array().unwrap().len(), 3);
    assert_eq!(v["r_plus"][0].as_array().unwrap().len(), 2);
    assert!(v["ordering"].as_str().unwrap().contains("incident"));
    assert!((v["trace_difference"].as_f64().unwrap() + 1.0).abs() < 1e-8);

    let strict = write(&dir, "strict.toml", &format!("task = \"scatter\"\nenergy = 2.2\ndefect_bound = 1e-30\n{GENERIC}"));
    let o = run(&["--config", &strict]);
    assert_eq!(code(&o), 1);
    assert_eq!(json(&o)["passed"], false);
}

#[test]
fn output_is_deterministic_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "generic.toml", &format!("task = \"scatter\"\nenergy = 1.8\n{GENERIC}"));
    let a = stdout(&run(&["--config", &cfg, "--jobs", "1"]));
    let b = stdout(&run(&["--config", &cfg]));
    assert_eq!(a, b);
    let v: Value = serde_json::from_str(&a).unwrap();
    let again = serde_json::to_string_pretty(&v).unwrap() + "\n";
    assert_eq!(again, a);
    // Every float in the file re-parses to the same double.
    let (re, _) = entry(&v["t_minus"][0][0]);
    assert_eq!(format!("{re:?}").parse::<f64>().unwrap(), re);
}

#[test]
fn toml_and_json_configs_agree() {
    let dir = TempDir::new().unwrap();
    let t = write(&dir, "c.toml", "task = \"channels\"\nenergy = 2.2\n[solver]\nn_evanescent = 3\n");
    let j = write(&dir, "c.json", r#"{"task": "channels", "energy": 2.2, "solver": {"n_evanescent": 3}}"#);
    let (a, b) = (run(&["--config", &t]), run(&["--config", &j]));
    assert_eq!(code(&a), 0);
    assert_eq!(stdout(&a), stdout(&b));
    let v = json(&a);
    assert_eq!(v["propagating"].as_array().unwrap().len(), 5);
    assert_eq!(v["evanescent"].as_array().unwrap().len(), 6);
}

#[test]
fn channels_csv() {
    let o = run(&["--task", "channels", "--energy", "1.2", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "level,branch_sign,kind,xi_re,xi_im,current");
    let zero: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&zero[..3], ["0", "-1", "propagating"]);
    let nums: Vec<f64> = zero[3..].iter().map(|t| t.parse().unwrap()).collect();
    assert_eq!(nums, [-1.2, 0.0, -1.0]);
    assert!(lines.all(|l| l.contains("evanescent")));
}

fn spectrum_rows(text: &str) -> Vec<(String, i64, f64, f64)> {
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect()
}

#[test]
fn spectrum_linear_wall_branches() {
    let o = run(&["--task", "spectrum"]);
    assert_eq!(code(&o), 0);
    let rows = spectrum_rows(&stdout(&o));
    let mut branches: Vec<i64> = rows.iter().filter(|r| r.0 == "branch").map(|r| r.1).collect();
    branches.dedup();
    assert_eq!(branches, vec![0, 1, -1, 2, -2, 3, -3, 4, -4]);
    for r in rows.iter().filter(|r| r.0 == "branch") {
        let expect = match r.1 {
            0 => -r.2,
            n => n.signum() as f64 * (r.2 * r.2 + 2.0 * n.abs() as f64).sqrt(),
        };
        assert!((r.3 - expect).abs() < 1e-12);
        assert!(r.3.abs() <= 3.0);
    }
    let mut at_zero: Vec<f64> = rows.iter().filter(|r| r.0 == "branch" && r.2 == 0.0).map(|r| r.3).collect();
    at_zero.sort_by(f64::total_cmp);
    let s = |x: f64| x.sqrt();
    let expect = [-s(8.0), -s(6.0), -2.0, -s(2.0), 0.0, s(2.0), 2.0, s(6.0), s(8.0)];
    assert_eq!(at_zero.len(), expect.len());
    for (a, b) in at_zero.iter().zip(expect) {
        assert!((a - b).abs() < 1e-12);
    }
    let critical: Vec<f64> = rows.iter().filter(|r| r.0 == "critical").map(|r| r.3).collect();
    assert_eq!(critical.len(), 9);
}

#[test]
fn spectrum_small_window_has_only_zero_branch() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "s.toml", "task = \"spectrum\"\ne_max = 0.1\n");
    let out = dir.path().join("s.csv");
    assert_eq!(code(&run(&["--config", &cfg, "--out", out.to_str().unwrap()])), 0);
    let rows = spectrum_rows(&std::fs::read_to_string(out).unwrap());
    assert!(rows.iter().filter(|r| r.0 == "branch").all(|r| r.1 == 0));
    assert_eq!(rows.iter().filter(|r| r.0 == "critical").count(), 1);
}

#[test]
fn conductivity_window_and_threshold_guard() {
    let o = run(&["--task", "conductivity", "--window", "0.5,1.2", "--jobs", "2"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert!((v["integrated"].as_f64().unwrap() + 1.0).abs() < 1e-4);
    assert_eq!(v["nodes"].as_array().unwrap().len(), 21);

    let csv = run(&["--task", "conductivity", "--window", "0.5,1.2", "--format", "csv"]);
    assert_eq!(stdout(&csv).lines().count(), 22);

    let o = run(&["--task", "conductivity", "--window", "1.3,1.5"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("contains critical value"));
}

#[test]
fn config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.toml", "task = \"spectrum\"\nbogus = 1\n");
    let yaml = write(&dir, "bad.yaml", "task: spectrum\n");
    let neg = write(&dir, "neg.toml", "task = \"spectrum\"\n[solver]\ntol_match = -1.0\n");
    let cases = [
        vec!["--task", "scatter"],
        vec!["--task", "nope"],
        vec![],
        vec!["--config", "/nonexistent/c.toml", "--task", "spectrum"],
        vec!["--config", &bad],
        vec!["--config", &yaml],
        vec!["--config", &neg],
        vec!["--task", "conductivity", "--window", "1.2,0.5"],
        vec!["--task", "scatter", "--energy", "2.2", "--jobs", "0"],
    ];
    for args in &cases {
        let o = run(args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(o.stdout.is_empty());
    }
}

#[test]
fn numerical_failures_exit_three() {
    let dir = TempDir::new().unwrap();
    let o = run(&["--task", "scatter", "--energy", "1.4142135623730951"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("critical"));
    let small = write(&dir, "small.toml", "task = \"scatter\"\nenergy = 2.2\nn_max = 2\n");
    assert_eq!(code(&run(&["--config", &small])), 3);
}

#[test]
fn validate_default_passes() {
    let o = run(&["--task", "validate", "--seed", "7"]);
    let v = json(&o);
    let failed: Vec<&Value> = v["checks"].as_array().unwrap().iter().filter(|c| c["passed"] != true).collect();
    assert!(failed.is_empty(), "{failed:#?}");
    assert_eq!(code(&o), 0);
    assert_eq!(v["seed"], 7);
    assert_eq!(v["checks"].as_array().unwrap().len(), 12);
}

#[test]
fn validate_coarse_grid_fails_convergence_only() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "coarse.toml", "task = \"validate\"\n[solver]\nnodes_per_unit = 4\n");
    let o = run(&["--config", &cfg]);
    assert_eq!(code(&o), 1);
    let v = json(&o);
    for c in v["checks"].as_array().unwrap() {
        let name = c["name"].as_str().unwrap();
        assert_eq!(c["passed"] == true, name != "grid_convergence", "{c:#}");
    }
}

#[test]
fn validate_reports_window_through_threshold() {
    let o = run(&["--task", "validate", "--window", "1.3,1.5", "--format", "csv"]);
    assert_eq!(code(&o), 1);
    let text = stdout(&o);
    let row = text.lines().find(|l| l.starts_with("quantization,")).unwrap();
    assert!(row.starts_with("quantization,false"));
    assert!(row.contains("WindowHitsCritical"));
}

#[test]
fn log_level_from_environment() {
    let quiet = run(&["--task", "channels", "--energy", "1.2"]);
    assert!(quiet.stderr.is_empty());
    let loud = bin()
        .args(["--task", "channels", "--energy", "1.2"])
        .env("EDGESCATTER_LOG", "info")
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&loud.stderr).contains("running task `channels`"));
    assert_eq!(loud.stdout, quiet.stdout);
}

#[test]
fn potential_path_is_relative_to_config() {
    let dir = TempDir::new().unwrap();
    write(&dir, "pot.json", r#"{"bumps": [{"component": "q0", "amplitude": 0.5, "sx": 1.0}]}"#);
    let cfg = write(&dir, "c.toml", "task = \"scatter\"\nenergy = 1.2\npotential_path = \"pot.json\"\n");
    let o = run(&["--config", &cfg]);
    assert_eq!(code(&o), 0);
    let (re, im) = entry(&json(&o)["t_minus"][0][0]);
    assert!((im.atan2(re) + 1.2533141373155).abs() < 1e-6);
    assert!(Path::new(&cfg).exists());
}
