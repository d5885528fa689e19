use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypersimplex"))
        .args(args)
        .output()
        .expect("spawn hypersimplex")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("sweep.json");
    let text = format!(
        r#"{{
  "dataset": "synthetic",
  "synthetic": {{ "classes": 3, "samples": 300, "dims": 6, "separation": 3.0, "seed": 1 }},
  "losses": ["ce", "mse", "hypersimplex"],
  "batches": [16, 64],
  "seeds": [0, 1, 2],
  "lr": 0.1,
  "epochs": 3,
  "hidden": 8{extra}
}}"#
    );
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn project_vertex_at_small_temperature() {
    let out = run(&["project", "--x", "0.1,1.6,1", "--k", "1", "--tau", "1e-9"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["y"], serde_json::json!([0.0, 1.0, 0.0]));
}

#[test]
fn project_reference_instance() {
    let out = run(&["project", "--x", "3,1,0.5,-2", "--k", "2", "--tau", "1"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["y"], serde_json::json!([1.0, 0.75, 0.25, 0.0]));
    assert_eq!(v["theta"], serde_json::json!(0.25));
    assert_eq!(v["active"], serde_json::json!([1, 2]));
}

#[test]
fn project_k_zero_and_hard() {
    let out = run(&["project", "--x", "3,1,0.5,-2", "--k", "0"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["y"], serde_json::json!([0.0, 0.0, 0.0, 0.0]));

    let out = run(&["project", "--x", "3,1,0.5,-2", "--k", "2", "--hard"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["y"], serde_json::json!([1.0, 1.0, 0.0, 0.0]));
}

#[test]
fn project_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.txt");
    fs::write(&path, "3\n1\n0.5\n-2\n").unwrap();
    let out = run(&["project", "--file", path.to_str().unwrap(), "--k", "2"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["y"], serde_json::json!([1.0, 0.75, 0.25, 0.0]));

    fs::write(&path, "3\nabc\n").unwrap();
    let out = run(&["project", "--file", path.to_str().unwrap(), "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn project_usage_errors() {
    assert_eq!(run(&["project", "--x", "1,2", "--k", "3"]).status.code(), Some(2));
    assert_eq!(run(&["project", "--x", "1,2", "--k", "1", "--tau", "0"]).status.code(), Some(2));
    assert_eq!(run(&["project", "--k", "1"]).status.code(), Some(2));
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
}

#[test]
fn verify_passes_on_healthy_build() {
    let out = run(&["verify", "--cases", "100", "--n", "8", "--seed", "3"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    for name in ["oracle agreement", "feasibility", "order preservation", "translation invariance", "lipschitz", "solver agreement"] {
        assert!(text.contains(name), "{name} missing");
    }
    assert!(!text.contains("FAIL"));
}

#[test]
fn verify_oracle_size_limit() {
    let out = run(&["verify", "--n", "13", "--cases", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("size limit"));
}

#[test]
fn verify_detects_corrupted_threshold() {
    let out = run(&["verify", "--cases", "50", "--n", "6", "--corrupt-theta", "0.05"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn gradcheck_reports_worst_error() {
    let out = run(&["gradcheck", "--cases", "100", "--networks", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let line = text.lines().find(|l| l.starts_with("worst relative error:")).unwrap();
    let worst: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(worst < 1e-5, "{worst}");
}

#[test]
fn bench_shape() {
    let out = run(&["bench", "--min-log2", "8", "--max-log2", "10", "--reps", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut sections = text.split("\n\n");
    let timings: Vec<&str> = sections.next().unwrap().lines().collect();
    assert_eq!(timings[0], "n,project_ns,jvp_ns,sort_ns,isotonic_ns");
    assert_eq!(timings.len(), 4);
    let ratios: Vec<&str> = sections.next().unwrap().lines().collect();
    assert_eq!(ratios[0], "n_from,n_to,project_ratio,jvp_ratio");
    assert_eq!(ratios.len(), 3);
    assert_eq!(run(&["bench", "--min-log2", "5", "--max-log2", "4"]).status.code(), Some(2));
}

#[test]
fn sweep_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let csv = dir.path().join("runs.csv");
    let out = run(&["sweep", "--config", &config, "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "dataset,loss,batch,seed,tau,lr,epochs,best_test_acc,final_train_loss");
    assert_eq!(lines.count(), 3 * 2 * 3);

    let out = run(&["report", "--csv", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let table = stdout(&out);
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "Batch,CE,HS,Δ,t-stat,p-val");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("16,") && rows[2].starts_with("64,"));
}

#[test]
fn sweep_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), ",\n  \"momentum\": 0.9");
    assert_eq!(run(&["sweep", "--config", &config]).status.code(), Some(2));
}

#[test]
fn report_on_identical_columns() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("dataset,loss,batch,seed,tau,lr,epochs,best_test_acc,final_train_loss\n");
    for loss in ["ce", "hypersimplex"] {
        for seed in 0..5 {
            text += &format!("d,{loss},128,{seed},1,0.1,3,0.{},0.5\n", 80 + seed);
        }
    }
    let path = dir.path().join("eq.csv");
    fs::write(&path, text).unwrap();
    let out = run(&["report", "--csv", path.to_str().unwrap()]);
    assert!(out.status.success());
    let table = stdout(&out);
    assert!(table.lines().nth(1).unwrap().starts_with("128,0.8200,0.8200,0.0000,"));
    assert!(!table.contains('*'));
}

#[test]
fn report_malformed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "dataset,loss,batch\nd,ce,notanumber\n").unwrap();
    assert_eq!(run(&["report", "--csv", path.to_str().unwrap()]).status.code(), Some(2));
    fs::write(
        &path,
        "dataset,loss,batch,seed,tau,lr,epochs,best_test_acc,final_train_loss\nd,ce,x,0,1,0.1,3,0.5,0.1\n",
    )
    .unwrap();
    let out = run(&["report", "--csv", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at byte 69"));
}

#[test]
fn help_for_every_subcommand() {
    for (cmd, flags) in [
        ("project", &["--x", "--file", "--k", "--tau", "--hard"][..]),
        ("verify", &["--seed", "--cases", "--n"][..]),
        ("gradcheck", &["--seed", "--cases", "--networks"][..]),
        ("bench", &["--min-log2", "--max-log2", "--reps"][..]),
        ("sweep", &["--config", "--out"][..]),
        ("report", &["--csv", "--baseline", "--candidate"][..]),
    ] {
        let out = run(&[cmd, "--help"]);
        assert!(out.status.success(), "{cmd}");
        let text = stdout(&out);
        for flag in flags {
            assert!(text.contains(flag), "{cmd} --help lacks {flag}");
        }
        assert!(!text.contains("corrupt"), "{cmd} --help shows the test hook");
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let first = dir.path().join("a.csv");
    let second = dir.path().join("b.csv");
    assert!(run(&["sweep", "--config", &config, "--out", first.to_str().unwrap()]).status.success());
    assert!(run(&["sweep", "--config", &config, "--out", second.to_str().unwrap()]).status.success());
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());

    let csv = first.to_str().unwrap();
    let commands: [&[&str]; 6] = [
        &["project", "--x", "3,1,0.5,-2", "--k", "2", "--tau", "0.7"],
        &["verify", "--cases", "60", "--n", "7", "--seed", "11"],
        &["gradcheck", "--cases", "60", "--networks", "1", "--seed", "11"],
        &["sweep", "--config", &config],
        &["report", "--csv", csv],
        &["report", "--csv", csv, "--baseline", "mse"],
    ];
    for args in commands {
        let a = run(args);
        let b = run(args);
        assert!(a.status.success(), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert_eq!(a.status.code(), b.status.code());
    }
}
