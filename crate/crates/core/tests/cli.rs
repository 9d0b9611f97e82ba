use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
name = "small_ou"
seed = 7

[potential]
family = "quadratic"
kappa = 1.0

[weight]
beta = 0.0

[grid]
n = 200
radius = 6.0

[hypothesis]
c = 1.0
alpha = 2.0
delta = 1.0

[lyapunov]
form = "exp_power"
gamma = 0.0
c_rate = 0.125
smoothing_radius = 0.0

[kernel]
invariant_times = [0.1, 0.5]
ondiag = { t_min = 0.05, t_max = 0.5, points = 6, log_spaced = true }

[mc]
n_paths = 4000
dt = 1e-2
t = 0.5
x0 = 0.5
"#;

fn heatbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatbound")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("cfg.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn json_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| n.ends_with(".json"))
        .collect();
    names.sort();
    names
}

#[test]
fn all_stages_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let res = heatbound(&["all", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(json_files(&out), ["hypothesis.json", "kernel.json", "lyapunov.json", "mc.json", "summary.json"]);
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary.is_object());
}

#[test]
fn reruns_are_byte_identical_across_policies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(heatbound(&["mc", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(heatbound(&["mc", "--config", &cfg, "--out", b.to_str().unwrap(), "--sequential"]).status.success());
    let ra = std::fs::read(a.join("mc.json")).unwrap();
    let rb = std::fs::read(b.join("mc.json")).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn seed_override_changes_the_sample() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(heatbound(&["mc", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(heatbound(&["mc", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "8"]).status.success());
    assert_ne!(std::fs::read(a.join("mc.json")).unwrap(), std::fs::read(b.join("mc.json")).unwrap());
}

#[test]
fn invalid_exponents_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("gamma = 0.0\n", "gamma = 0.0\nalpha = 0.5\n");
    let cfg = write_config(dir.path(), &text);
    let res = heatbound(&["lyapunov", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("gamma > 1 - alpha"));
}

#[test]
fn unknown_field_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}\n[extra]\nfoo = 1\n"));
    let res = heatbound(&["hypothesis", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("extra"));
}

#[test]
fn unknown_preset_and_bad_scale_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(heatbound(&["kernel", "--preset", "nope", "--out", out]).status.code(), Some(2));
    assert_eq!(heatbound(&["kernel", "--preset", "ou", "--tol-scale", "0", "--out", out]).status.code(), Some(2));
}
