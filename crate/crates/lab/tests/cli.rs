use std::path::Path;
use std::process::Command;

fn combo(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_combo"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn read(dir: &Path, f: &str) -> Vec<u8> {
    std::fs::read(dir.join(f)).unwrap()
}

#[test]
fn seeded_outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for run in ["a", "b"] {
        let args = [
            vec!["gen-env", "--out"],
            vec!["gen-data", "--seed", "2", "--n-transitions", "300", "--out"],
            vec!["train", "--seeds", "0,1", "--n-transitions", "300", "--no-timing", "--out"],
        ];
        let names = ["env.json", "data.tsv", "results"];
        for (a, n) in args.iter().zip(names) {
            let out = format!("{run}/{n}");
            let mut v = a.clone();
            v.push(&out);
            let o = combo(d, &v);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        }
    }
    for f in ["env.json", "data.tsv", "data.tsv.json", "results.csv", "results.jsonl"] {
        assert_eq!(read(d, &format!("a/{f}")), read(d, &format!("b/{f}")), "{f}");
    }
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("c.toml"),
        r#"
eval_seeds = [0, 1, 2]
record_wall_time = false

[env]
gamma = 0.9
kind = { type = "gridworld", width = 3, height = 3, goal = [2, 2] }

[dataset]
quality = "random"
n_transitions = 150
seed = 1

[algo]
name = "bc"
"#,
    )
    .unwrap();
    let o = combo(d, &["train", "--config", "c.toml", "--seeds", "4", "--algo", "cql", "--out", "r"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = String::from_utf8(read(d, "r.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].contains(",cql,4,"));
    // The written dataset trains to the same record as in-process collection.
    let o = combo(d, &["gen-data", "--config", "c.toml", "--seed", "4", "--out", "d.tsv"]);
    assert!(o.status.success());
    let o = combo(d, &["train", "--config", "c.toml", "--seeds", "4", "--data", "d.tsv", "--out", "r2"]);
    assert!(o.status.success());
    let direct = combo(d, &["train", "--config", "c.toml", "--seeds", "4", "--out", "r3"]);
    assert!(direct.status.success());
    let col = |f: &str| {
        let s = String::from_utf8(read(d, f)).unwrap();
        s.lines().nth(1).unwrap().split(',').nth(3).unwrap().to_string()
    };
    assert_eq!(col("r2.csv"), col("r3.csv"));
}

#[test]
fn failing_runs_and_bad_input_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("c.toml"),
        r#"
eval_seeds = [0]

[env]
gamma = 0.9
kind = { type = "chain", length = 3 }

[dataset]
quality = "random"
n_transitions = 100
seed = 1

[algo]
name = "combo"
config = { max_eval_iters = 1 }
"#,
    )
    .unwrap();
    let o = combo(d, &["train", "--config", "c.toml", "--out", "r"]);
    assert_eq!(o.status.code(), Some(1));
    let o = combo(d, &["report", "--input", "r.jsonl"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!combo(d, &["train", "--quality", "superb"]).status.success());
    assert!(!combo(d, &["train", "--config", "missing.toml"]).status.success());
}

#[test]
fn verify_and_report_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = combo(d, &["verify", "--suite", "fixed-point", "--scale", "0.1", "--out", "v"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = String::from_utf8(read(d, "v/summary.csv")).unwrap();
    assert!(csv.starts_with("check_name,passed,margin,tolerance,seed"));
    assert!(csv.contains("fixed_point_equivalence,true"));

    let o = combo(d, &["train", "--seeds", "0,1", "--n-transitions", "200", "--algo", "bc", "--out", "r"]);
    assert!(o.status.success());
    let o = combo(d, &["report", "--input", "r.jsonl", "--out", "sum.csv"]);
    assert!(o.status.success());
    let sum = String::from_utf8(read(d, "sum.csv")).unwrap();
    assert!(sum.lines().nth(1).unwrap().starts_with("bc,2,0,"));
}
