use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use micellar_cli::run::{read_snapshot, COLUMNS};
use micellar_core::{Model, SimConfig};

fn micellar(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_micellar"));
    cmd.args(args).env_remove("MICELLAR_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let out = dir.join(format!("{name}_out"));
    let text = format!("{body}\nout_dir = {:?}\n", out.to_str().unwrap());
    let path = dir.join(format!("{name}.toml"));
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL_2D: &str = "d_x = 2\nd_q = 2\nn_x = 8\nn_q = 16\n";

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn verify_passes_and_reports_json() {
    let out = micellar(&["verify"], &[]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("all checks passed"));
    let out = micellar(&["verify", "--json"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["checks"].as_array().unwrap().len(), 7);
}

#[test]
fn injected_mismatch_fails_cancellation() {
    let out = micellar(&["verify", "--json", "--inject-mismatch"], &[]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    let failed: Vec<&str> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["cancellation_residual"]);
}

#[test]
fn gap_reproduces_ornstein_uhlenbeck_spectrum() {
    let out = micellar(&["gap", "--hookean", "1", "--nq", "64"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["lambda0"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    let eigs: Vec<f64> = v["eigs"].as_array().unwrap().iter().map(|e| e.as_f64().unwrap()).collect();
    assert_eq!(eigs.len(), 5);
    for (k, e) in eigs.iter().enumerate() {
        assert!((e - k as f64).abs() < 1e-3 * (k as f64).max(1e-9) + 1e-10, "{eigs:?}");
    }
    let v = json(&micellar(&["gap", "--hookean", "2"], &[]));
    assert!((v["lambda0"].as_f64().unwrap() - 2.0).abs() < 2e-3);
}

#[test]
fn gap_on_two_cells_is_a_resolution_error() {
    let out = micellar(&["gap", "--hookean", "1", "--nq", "2"], &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("resolution"));
}

#[test]
fn gap_for_fene_springs() {
    let out = micellar(&["gap", "--fene", "2", "--b0", "3", "--nq", "32", "--dq", "2"], &[]);
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["lambda0"].as_f64().unwrap() > 0.0);
}

#[test]
fn missing_key_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "c", "d_x = 1\nd_q = 1\nn_q = 16\nt_end = 1.0\nscenario = \"equilibrium\"");
    let out = micellar(&["run", &path], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_x"));
}

#[test]
fn invalid_configurations_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown", format!("{SMALL_2D}t_end = 1.0\nscenario = \"equilibrium\"\nviscosity = 2.0")),
        ("regime", "d_x = 2\nd_q = 1\nn_x = 8\nn_q = 16\nt_end = 1.0\nscenario = \"equilibrium\"".to_string()),
        ("order", format!("{SMALL_2D}t_end = 1.0\nscenario_order = 3\nscenario = \"equilibrium\"")),
        ("scenario", format!("{SMALL_2D}t_end = 1.0\nscenario = \"vortex\"")),
        ("rates", format!("{SMALL_2D}t_end = 1.0\nk1 = 2.0\nscenario = \"equilibrium\"")),
    ];
    for (name, body) in cases {
        let path = write_config(dir.path(), name, &body);
        let out = micellar(&["run", &path], &[]);
        assert_eq!(out.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = micellar(&["run", dir.path().join("absent.toml").to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rejected_step_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{SMALL_2D}t_end = 1.0\ndt = 1.0\namplitude = 5.0\nscenario = \"taylor-green\"");
    let path = write_config(dir.path(), "cfl", &body);
    let out = micellar(&["run", &path], &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn equilibrium_run_stays_at_rest() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{SMALL_2D}t_end = 1.0\ndt = 0.01\nscenario = \"equilibrium\"\nsnapshot = true");
    let path = write_config(dir.path(), "eq", &body);
    let out = micellar(&["run", &path], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out_dir = dir.path().join("eq_out");
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["steps"], 100);
    assert!(summary["free_energy_final"].as_f64().unwrap() <= 1e-24);
    let v = &summary["invariants"]["violations"];
    for key in ["free_energy_increase", "negative_reaction_dissipation", "sobolev_equivalence"] {
        assert_eq!(v[key], 0);
    }
    let hash = summary["manifest_hash"].as_str().unwrap();
    let csv = fs::read_to_string(out_dir.join("timeseries.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), format!("# manifest {hash}"));
    assert_eq!(lines.next().unwrap(), COLUMNS.join(","));
    assert_eq!(lines.count(), 11);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["hash"], hash);

    let (layout, state) = read_snapshot(&out_dir).unwrap();
    assert_eq!(layout.manifest_hash, hash);
    assert_eq!(layout.endianness, "little");
    let config: SimConfig = serde_json::from_value(manifest["config"].clone()).unwrap();
    let model = Model::new(&config).unwrap();
    assert_eq!(state.psi_a, model.maxwellians.a.values().repeat(model.nx()));
    assert_eq!(state.psi_b, model.maxwellians.b.values().repeat(model.nx()));
    assert!(state.u.comps.iter().flatten().all(|v| *v == 0.0));
}

#[test]
fn kernel_bump_run_is_monotone_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{SMALL_2D}t_end = 0.5\ndt = 0.01\ncadence = 1\nscenario = \"kernel-bump\"\nseed = 4");
    let path = write_config(dir.path(), "kb", &body);
    let out = micellar(&["run", &path], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv_path = dir.path().join("kb_out").join("timeseries.csv");
    let first = fs::read(&csv_path).unwrap();
    let out = micellar(&["run", &path], &[("MICELLAR_THREADS", "1")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(first, fs::read(&csv_path).unwrap());

    let text = String::from_utf8(first).unwrap();
    assert!(!text.contains("NaN") && !text.contains("inf"));
    let col = COLUMNS.iter().position(|c| *c == "total_energy").unwrap();
    let totals: Vec<f64> = text.lines().skip(2).map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect();
    assert_eq!(totals.len(), 51);
    for w in totals.windows(2) {
        assert!(w[1] - w[0] <= 1e-13, "{w:?}");
    }
    assert!(totals[50] < totals[0]);
}

#[test]
fn thread_count_must_be_positive() {
    let out = micellar(&["verify"], &[("MICELLAR_THREADS", "none")]);
    assert_eq!(out.status.code(), Some(2));
}
