use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn onebit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_onebit"))
        .args(args)
        .output()
        .expect("failed to launch onebit")
}

fn smoke_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/ula_smoke.toml")
}

fn run_to(dir: &Path, name: &str, extra: &[&str]) -> String {
    let out = dir.join(name);
    let config = smoke_config();
    let mut args = vec![
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let res = onebit(&args);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    std::fs::read_to_string(out).unwrap()
}

#[test]
fn run_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let text = run_to(dir.path(), "a.csv", &[]);
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(data[0].starts_with("scenario,realization,seed,scheme,n_d"));
    // 4 realizations x 2 pilot lengths x 3 schemes
    assert_eq!(data.len(), 1 + 24);

    assert_eq!(text, run_to(dir.path(), "b.csv", &["--parallel", "3"]));
    let other = run_to(dir.path(), "c.csv", &["--seed", "99"]);
    assert_ne!(text, other);
    assert!(other.lines().nth_back(0).unwrap().contains(",99,"));
}

#[test]
fn scan_objective_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan.csv");
    let config = smoke_config();
    let res = onebit(&[
        "scan-objective",
        "--config",
        config.to_str().unwrap(),
        "--theta-grid",
        "-1:1:0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let text = std::fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n_d,pre_snr_db,theta,coherent,noncoherent");
    assert_eq!(lines.len(), 1 + 2 * 5);
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "id = \"bad\"\nkind = \"narrowband-ula\"\nrealizations = 1\nrx = { elements = 8 }\n\
         [narrowband]\npaths = 1\npath_snr_db = [-10]\nn_d = [\"forty\"]\n",
    )
    .unwrap();
    let out = dir.path().join("x.csv");
    let res = onebit(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("narrowband.n_d"), "{err}");
    assert!(!out.exists());
}

#[test]
fn bad_theta_grid_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan.csv");
    let config = smoke_config();
    let res = onebit(&[
        "scan-objective",
        "--config",
        config.to_str().unwrap(),
        "--theta-grid",
        "1:-1:0.1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!res.status.success());
}
