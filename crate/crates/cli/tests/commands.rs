use std::fs;
use std::process::{Command, Output};

fn haarlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_haarlab"))
        .args(args)
        .env("HAARLAB_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn wg_prints_exact_rows() {
    let o = haarlab(&["wg", "--n", "2", "--N", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("<1,1>: 1/15"), "{text}");
    assert!(text.contains("<2>: -1/60"), "{text}");
    assert!(stdout(&haarlab(&["wg", "--n", "1", "--N", "7"])).starts_with("<1>: 1/7"));
}

#[test]
fn wg_capacity_and_singularity_exit_2() {
    assert_eq!(haarlab(&["wg", "--n", "7", "--N", "7"]).status.code(), Some(2));
    assert_eq!(haarlab(&["wg", "--n", "3", "--N", "2"]).status.code(), Some(2));
}

#[test]
fn wg_dump_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wg.csv");
    let o = haarlab(&["wg", "--n", "2", "--N", "4", "--dump", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(path).unwrap();
    assert!(csv.starts_with("n,cycle_type,N,numerator,denominator\n"));
    assert!(csv.contains("2,2,4,-1,60"));
}

#[test]
fn moment_examples() {
    for (poly, want) in [("Tr(U)Tr(Uc)", "1"), ("tr(U Ut)", "0"), ("tr(U U*)", "1")] {
        let o = haarlab(&["moment", poly, "--N", "8"]);
        assert_eq!(o.status.code(), Some(0));
        assert_eq!(stdout(&o).lines().next(), Some(want), "{poly}");
    }
}

#[test]
fn moment_parse_errors_exit_1() {
    assert_eq!(haarlab(&["moment", "Tr(U", "--N", "4"]).status.code(), Some(1));
    assert_eq!(haarlab(&["moment", "Tr(U Q)", "--N", "4"]).status.code(), Some(1));
    assert_eq!(haarlab(&["nosuch"]).status.code(), Some(1));
}

#[test]
fn moment_reads_matrix_files_and_cross_checks() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.csv");
    // Traceless diag(1, -1).
    fs::write(&path, "row,col,re_num,re_den,im_num,im_den\n1,1,1,1,0,1\n2,2,-1,1,0,1\n").unwrap();
    let spec = format!("A={}", path.display());
    let o = haarlab(&["moment", "Tr(A) Tr(A^t)", "--N", "2", "--matrix", &spec]);
    assert_eq!(stdout(&o).lines().next(), Some("0"));
    let o = haarlab(&["moment", "Tr(U A U* A)", "--N", "2", "--matrix", &spec, "--mc", "500", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("mc ") && l.contains("seed=3")), "{text}");
    let missing = haarlab(&["moment", "Tr(A)", "--N", "2", "--matrix", "A=/nonexistent.csv"]);
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn figure1_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = haarlab(&["figure1", "--N", "32", "--R", "50", "--seed", "5", "--outdir", out]);
    assert_eq!(o.status.code(), Some(0));
    for tag in ["arcsine", "kesten_mckay"] {
        assert!(fs::read_to_string(dir.path().join(format!("figure1_{tag}.svg"))).unwrap().starts_with("<svg"));
        assert!(fs::read_to_string(dir.path().join(format!("figure1_{tag}_hist.csv")))
            .unwrap()
            .starts_with("bin_left,bin_right,density\n"));
        assert!(dir.path().join(format!("figure1_{tag}_density.csv")).exists());
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("figure1_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["assessed"], false);
    assert!(summary["passed"].is_null());
    assert!(summary["arcsine"]["ks"].as_f64().unwrap() < 1.0);
    assert_eq!(summary["seed"], 5);
}

#[test]
fn figure1_is_byte_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = haarlab(&["figure1", "--N", "32", "--R", "12", "--seed", "9", "--outdir", d.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["figure1_arcsine_hist.csv", "figure1_kesten_mckay_hist.csv", "figure1_summary.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn figure1_requires_existing_outdir_and_large_n() {
    let o = haarlab(&["figure1", "--N", "32", "--R", "2", "--outdir", "/nonexistent/dir"]);
    assert_eq!(o.status.code(), Some(3));
    let dir = tempfile::tempdir().unwrap();
    let o = haarlab(&["figure1", "--N", "16", "--R", "2", "--outdir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_uses_config_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"N": 6, "R": 40, "seed": 1, "observables": ["Tr(U)"], "outdir": "{}"}}"#,
            dir.path().display()
        ),
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let o = haarlab(&["--config", cfg, "simulate", "--R", "30"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["R"], 30);
    assert_eq!(summary["N"], 6);
    let csv = fs::read_to_string(dir.path().join("simulate_traces.csv")).unwrap();
    assert_eq!(csv.lines().count(), 31);
    let again = haarlab(&["--config", cfg, "simulate", "--R", "30"]);
    assert_eq!(stdout(&o), stdout(&again));
}

#[test]
fn simulate_spectrum_and_bad_config() {
    let o = haarlab(&["simulate", "--N", "10", "--R", "3", "--spectrum", "U + U*"]);
    assert_eq!(o.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["spectrum"]["eigenvalues"], 30);
    assert_eq!(haarlab(&["simulate", "--N", "10", "--R", "3", "--spectrum", "U"]).status.code(), Some(2));
    assert_eq!(haarlab(&["simulate", "--N", "10", "--R", "3"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"N": 4, "colour": "red"}"#).unwrap();
    assert_eq!(haarlab(&["--config", cfg.to_str().unwrap(), "wg", "--n", "1"]).status.code(), Some(1));
}

#[test]
fn verify_exact_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let o = haarlab(&["verify", "exact", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.len() >= 5);
    assert!(checks.iter().all(|c| c["tolerance"].is_number() && c["passed"] == true));
}

#[test]
fn verify_records_seed_and_rejects_unknown_suites() {
    let o = haarlab(&["verify", "mc", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["seed"], 7);
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["seed"].is_u64()));
    assert_eq!(haarlab(&["verify", "nosuch"]).status.code(), Some(1));
}

#[test]
fn bad_thread_cap_is_a_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_haarlab"))
        .args(["wg", "--n", "1", "--N", "2"])
        .env("HAARLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}
