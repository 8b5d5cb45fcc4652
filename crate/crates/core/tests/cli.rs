use std::path::Path;
use std::process::Command;

fn elastmix() -> Command {
    Command::new(env!("CARGO_BIN_EXE_elastmix"))
}

/// CSV with the wall-time column blanked.
fn body_without_time(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let t = header.iter().position(|h| *h == "wall_time_s").unwrap();
    lines
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f[t] = "";
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn identical_runs_give_identical_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut bodies = Vec::new();
    for (k, threads) in ["1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("run{k}.csv"));
        let status = elastmix()
            .args(["--dim", "2", "--levels", "2,4,8", "--solution", "sine", "--output"])
            .arg(&out)
            .env("ELASTMIX_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
        bodies.push(body_without_time(&out));
    }
    assert_eq!(bodies[0], bodies[1]);
    assert!(dir.path().join("run0_rates.csv").exists());
    assert!(dir.path().join("run0.md").exists());
}

#[test]
fn single_level_warns_and_skips_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("one.csv");
    let run = elastmix()
        .args(["--dim", "2", "--levels", "2", "--solution", "polynomial", "-o"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(run.status.success());
    assert!(String::from_utf8_lossy(&run.stderr).contains("warning"));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 2);
    assert!(!dir.path().join("one_rates.csv").exists());
}

#[test]
fn probe_columns_are_added() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("probe.csv");
    let status = elastmix()
        .args(["--probe-infsup", "--dim", "2", "--levels", "2,4,8", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.ends_with("wall_time_s,beta_h,alpha_kernel"));
    for line in text.lines().skip(1) {
        let beta: f64 = line.split(',').nth(14).unwrap().parse().unwrap();
        assert!(beta > 0.05);
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.toml");
    let out = dir.path().join("cfg.csv");
    std::fs::write(
        &cfg,
        format!("dim = 3\nlevels = [1, 2]\nsolution = \"polynomial\"\noutput = {:?}\n", out),
    )
    .unwrap();
    let status = elastmix()
        .arg("--config")
        .arg(&cfg)
        .args(["--dim", "2"])
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    // 2D N=2 has 29 stress unknowns
    assert!(text.lines().nth(2).unwrap().starts_with("1,2,5.000000000000000e-1,29,16,"));
}

#[test]
fn matrices_are_exported() {
    let dir = tempfile::tempdir().unwrap();
    let status = elastmix()
        .args(["--dim", "2", "--levels", "2", "-o"])
        .arg(dir.path().join("x.csv"))
        .arg("--export-dir")
        .arg(dir.path().join("mtx"))
        .status()
        .unwrap();
    assert!(status.success());
    let k = std::fs::read_to_string(dir.path().join("mtx/level0_N2/K.mtx")).unwrap();
    assert!(k.starts_with("%%MatrixMarket matrix coordinate real general\n45 45 "));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bad.csv");
    for args in [
        vec!["--dim", "4"],
        vec!["--levels", "8,4"],
        vec!["--solution", "cosine"],
        vec!["--mu=-1"],
        vec!["--bogus"],
    ] {
        let status = elastmix().args(&args).arg("-o").arg(&out).status().unwrap();
        assert_eq!(status.code(), Some(2), "{args:?}");
    }
    let status = elastmix()
        .args(["--levels", "2", "-o"])
        .arg(&out)
        .env("ELASTMIX_THREADS", "zero")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn numerical_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // no solver reaches a relative residual of 1e-30
    let status = elastmix()
        .args(["--levels", "4", "--tol", "1e-30", "-o"])
        .arg(dir.path().join("t.csv"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}
