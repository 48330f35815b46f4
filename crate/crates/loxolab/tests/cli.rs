//! End-to-end CLI tests: build -> verify -> analyze -> run, exit codes, and
//! byte-identical reruns.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_loxolab"))
}

fn write_p4(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("p4.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&serde_json::json!({
            "vertices": [
                {"name": "a", "group": "Z"},
                {"name": "b", "group": "Z"},
                {"name": "c", "group": "Z"},
                {"name": "d", "group": "Z"}
            ],
            "edges": [["a","b"],["b","c"],["c","d"]]
        }))
        .unwrap(),
    )
    .unwrap();
    path
}

#[test]
fn build_verify_analyze_run_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p4 = write_p4(dir.path());
    let combing = dir.path().join("p4.combing.json");

    let out = bin()
        .args(["build", "--presentation"])
        .arg(&p4)
        .arg("--out")
        .arg(&combing)
        .output()
        .unwrap();
    assert!(out.status.success(), "build failed: {}", String::from_utf8_lossy(&out.stderr));
    assert!(combing.exists());
    assert!(dir.path().join("p4.combing.meta.json").exists());

    let out = bin()
        .args(["verify", "--combing"])
        .arg(&combing)
        .arg("--presentation")
        .arg(&p4)
        .args(["--nmax", "5"])
        .output()
        .unwrap();
    assert!(out.status.success(), "verify failed: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("verify PASS"));

    let analysis = dir.path().join("analysis.json");
    let out = bin()
        .args(["analyze", "--combing"])
        .arg(&combing)
        .args(["--samples", "2000", "--seed", "1", "--out"])
        .arg(&analysis)
        .output()
        .unwrap();
    assert!(out.status.success(), "analyze failed: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&analysis).unwrap()).unwrap();
    assert!((report["lambda"].as_f64().unwrap() - 5.0).abs() < 1e-6);
    assert!(report["row_sum_max_dev"].as_f64().unwrap() <= 1e-9);
    assert!(report["return_tail"]["slope"].as_f64().unwrap() < 0.0);

    // Run an experiment twice; the CSVs must be byte-identical.
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        serde_json::to_string_pretty(&serde_json::json!({
            "presentation": p4,
            "action": {
                "space": {"type": "free_product", "factors": [
                    {"name": "a", "group": "Z"}, {"name": "d", "group": "Z"}
                ]},
                "hom": {"type": "kill_except", "keep": ["a", "d"]}
            },
            "n_values": [4, 6],
            "samples": 1500,
            "seed": 9,
            "drift_horizon": 50
        }))
        .unwrap(),
    )
    .unwrap();
    let csv1 = dir.path().join("r1.csv");
    let csv2 = dir.path().join("r2.csv");
    for out_path in [&csv1, &csv2] {
        let out = bin()
            .args(["run", "translation-genericity", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out_path)
            .output()
            .unwrap();
        assert!(out.status.success(), "run failed: {}", String::from_utf8_lossy(&out.stderr));
    }
    let b1 = std::fs::read(&csv1).unwrap();
    let b2 = std::fs::read(&csv2).unwrap();
    assert_eq!(b1, b2, "reports differ between identical runs");
    let text = String::from_utf8(b1).unwrap();
    assert!(text.starts_with("experiment,n,statistic,value,ci_low,ci_high,mode,seed,config_hash"));
    assert!(text.contains("lox_fraction"));
}

#[test]
fn exit_codes_distinguish_config_and_validation_failures() {
    let dir = tempfile::tempdir().unwrap();
    let p4 = write_p4(dir.path());
    let combing = dir.path().join("p4.combing.json");
    let out = bin()
        .args(["build", "--presentation"])
        .arg(&p4)
        .arg("--out")
        .arg(&combing)
        .output()
        .unwrap();
    assert!(out.status.success());

    // Unknown experiment id: config error, exit 2.
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        serde_json::json!({"presentation": p4, "n_values": [2]}).to_string(),
    )
    .unwrap();
    let out = bin().args(["run", "no-such-experiment", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Corrupted combing (one edge dropped): verification failure, exit 1.
    let mut value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&combing).unwrap()).unwrap();
    let edges = value["edges"].as_array_mut().unwrap();
    let victim = edges.iter().position(|e| e["from"] != "v0").unwrap();
    edges.remove(victim);
    let bad = dir.path().join("bad.combing.json");
    std::fs::write(&bad, value.to_string()).unwrap();
    let out = bin()
        .args(["verify", "--combing"])
        .arg(&bad)
        .arg("--presentation")
        .arg(&p4)
        .args(["--nmax", "4"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    // Malformed presentation JSON: config error, exit 2.
    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{ not json").unwrap();
    let out = bin()
        .args(["build", "--presentation"])
        .arg(&junk)
        .arg("--out")
        .arg(dir.path().join("x.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_exact_growth_emits_window_rows() {
    let dir = tempfile::tempdir().unwrap();
    let p4 = write_p4(dir.path());
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        serde_json::json!({
            "presentation": p4,
            "n_values": [4],
            "verify_nmax": 3,
            "format": "csv"
        })
        .to_string(),
    )
    .unwrap();
    let out = bin().args(["run", "exact-growth", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("sphere_size"));
    assert!(text.contains("sn_over_lambda_n"));
    assert!(text.contains("lambda"));
    // A(P4) sphere sizes follow 9 * 5^(n-1) - 1.
    assert!(text.contains("exact-growth,3,sphere_size,224/1"));
}
