use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_debye-cq");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().expect("binary runs")
}

fn small_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let text = format!(
        r#"
scheme = "ade"

[domain]
z_min = -1.0
z_max = 1.0
n_cells = 128

[time]
cfl_fraction = 0.9
n_steps = 60

[[materials]]
name = "air"

[[materials]]
name = "slab"
eps_inf_prime = 1.5
poles = [{{ delta_eps = 4.0, tau_relax = 1e-10 }}, {{ delta_eps = 2.0, omega_corner = 5e11 }}]

[[layout]]
z_start = -1.0
z_end = 0.25
material = "air"

[[layout]]
z_start = 0.25
z_end = 1.0
material = "slab"

[initial_condition]
type = "gaussian"
amplitude = 1.0
width = 40.0
center = 0.0

[outputs]
snapshot_stride = 20
snapshot_dir = "snap"
energy_path = "energy.csv"
comparison_path = "comparison.csv"
plot_path = "plot.gp"
{extra}
"#
    );
    let path = dir.join("case.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn simulate_writes_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = run(dir.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let energy = std::fs::read_to_string(dir.path().join("energy.csv")).unwrap();
    let mut lines = energy.lines();
    assert_eq!(lines.next(), Some("n,t,E,D,residual"));
    assert_eq!(lines.count(), 61);

    for step in [0, 20, 40, 60] {
        let snap = std::fs::read_to_string(dir.path().join(format!("snap/snapshot_{step:06}.csv"))).unwrap();
        assert!(snap.starts_with("z,e_x,h_y,p_x\n"));
        assert_eq!(snap.lines().count(), 129);
    }
    let plot = std::fs::read_to_string(dir.path().join("plot.gp")).unwrap();
    assert!(plot.contains("snapshot_000060.csv"));
    assert!(plot.contains("energy.csv"));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let cfg = small_config(dir.path(), "");
        let out = run(dir.path(), &["simulate", "--config", cfg.to_str().unwrap(), "--scheme", "cq-focq"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["energy.csv", "snap/snapshot_000040.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between runs");
    }
}

#[test]
fn zero_initial_field_stays_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("type = \"gaussian\"\namplitude = 1.0\nwidth = 40.0\ncenter = 0.0", "type = \"zero\"");
    std::fs::write(&cfg, text).unwrap();
    let out = run(dir.path(), &["simulate", "--config", cfg.to_str().unwrap(), "--scheme", "cq-direct"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let snap = std::fs::read_to_string(dir.path().join("snap/snapshot_000060.csv")).unwrap();
    for line in snap.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(&cols[1..], &[0.0, 0.0, 0.0]);
    }
    let energy = std::fs::read_to_string(dir.path().join("energy.csv")).unwrap();
    for line in energy.lines().skip(1) {
        assert_eq!(line.split(',').nth(2).unwrap().parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn compare_identical_schemes_has_zero_difference() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = run(dir.path(), &["compare", "--config", cfg.to_str().unwrap(), "--schemes", "ade,ade"]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,t,diff_e,diff_h,diff_p"));
    for line in lines {
        let cols: Vec<f64> = line.split(',').skip(2).map(|v| v.parse().unwrap()).collect();
        assert_eq!(cols, vec![0.0; 3]);
    }
}

#[test]
fn compare_ade_and_cq() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = run(dir.path(), &["compare", "--config", cfg.to_str().unwrap(), "--schemes", "ade,cq-direct"]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).contains("verdict         pass"));

    // an impossible tolerance is reported with exit code 3
    let out = run(
        dir.path(),
        &["compare", "--config", cfg.to_str().unwrap(), "--schemes", "ade,cq-focq", "--tol", "1e-30"],
    );
    assert_eq!(out.status.code(), Some(3), "{}", stdout(&out));
}

#[test]
fn invalid_layout_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let text = std::fs::read_to_string(&cfg).unwrap().replace("z_start = 0.25", "z_start = 0.2");
    std::fs::write(&cfg, text).unwrap();
    let out = run(dir.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("layout"));
}

#[test]
fn unknown_keys_and_missing_files_fail() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "\n[bogus]\nx = 1\n");
    let out = run(dir.path(), &["cfl", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(dir.path(), &["cfl", "--config", "does-not-exist.toml"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(dir.path(), &["simulate", "--preset", "nope"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn cfl_prints_the_stable_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["cfl", "--preset", "tissue-interface"]);
    assert!(out.status.success());
    let tau: f64 = stdout(&out).trim().parse().unwrap();
    // vacuum bound h / (2c) with h = 2/1024, lowered by the tissue's eps_inf
    let vacuum = (2.0 / 1024.0) / (2.0 * 299_792_458.0);
    assert!(tau > vacuum && tau < 2.0 * vacuum, "{tau}");
}

#[test]
fn unstable_step_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("cfl_fraction = 0.9\nn_steps = 60", "dt = 1e-10\nn_steps = 3000");
    std::fs::write(&cfg, text).unwrap();
    let out = run(dir.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stdout(&out));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn weights_are_dumped() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = run(
        dir.path(),
        &["simulate", "--config", cfg.to_str().unwrap(), "--scheme", "cq-direct", "--steps", "10", "--dump-weights", "w"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let slab = std::fs::read_to_string(dir.path().join("w/weights_slab.csv")).unwrap();
    assert!(slab.starts_with("n,omega_n\n"));
    assert_eq!(slab.lines().count(), 12);
    assert!(dir.path().join("w/weights_air.csv").exists());
}
