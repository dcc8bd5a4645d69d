use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_csmab");

const SMALL: &str = r#"
[instance]
cardinality = 2
horizon = 300
means = [0.4, 0.5, 0.7]
availability = [0.9, 0.8, 0.7]
fairness = [0.5, 0.6, 0.4]

[experiment]
policies = ["tscsf-b", "lfg", "opt-nf", "oracle"]
eta = [10, "inf"]
replications = 3
seed = 11
output_dir = "out"
"#;

fn csmab(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("exp.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_writes_csvs_next_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = csmab(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out_dir = dir.path().join("out");
    let regret = fs::read_to_string(out_dir.join("regret_eta_10.csv")).unwrap();
    let mut lines = regret.lines();
    assert_eq!(lines.next(), Some("round,policy,mean,sd"));
    assert_eq!(regret.lines().count(), 1 + 4 * 300);
    assert!(lines.next().unwrap().starts_with("1,tscsf-b,"));
    let fairness = fs::read_to_string(out_dir.join("fairness_eta_inf_lfg.csv")).unwrap();
    assert!(fairness.starts_with("arm,fraction,target,satisfied\n1,"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 11);
    assert_eq!(manifest["replication_seeds"].as_array().unwrap().len(), 3);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn overrides_change_seed_and_reps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let out = csmab(&["run", "--config", &cfg, "--reps", "1", "--seed", "5", "--out", a.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 5);
    assert_eq!(manifest["replication_seeds"].as_array().unwrap().len(), 1);
    let out = csmab(&["run", "--config", &cfg, "--reps", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), &SMALL.replace("seed = 11", "seed = 11\nunknown = 1"));
    assert_eq!(csmab(&["run", "--config", &bad]).status.code(), Some(2));

    let infeasible = write_config(dir.path(), &SMALL.replace("[0.5, 0.6, 0.4]", "[0.9, 0.9, 0.9]"));
    let out = csmab(&["run", "--config", &infeasible]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));

    let missing = dir.path().join("nope.toml");
    assert_eq!(csmab(&["run", "--config", missing.to_str().unwrap()]).status.code(), Some(4));
    let out = csmab(&["ingest", "--ratings", missing.to_str().unwrap(), "--out", "x.trace"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn lp_dump_lists_rows_and_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = csmab(&["lp", "dump", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    // 8 availability sets; the empty action counts in each: 1 + 3*2 + 3*4 + 7 = 26 columns.
    assert!(text.contains("arms 3 cardinality 2 sets 8 columns 26 rows 11"), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("col ")).count(), 26);
    assert_eq!(text.lines().filter(|l| l.starts_with("row ")).count(), 11);
    assert!(text.contains("row 0 fair1 >= "));
}

#[test]
fn bounds_grid_and_empirical_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    assert_eq!(csmab(&["run", "--config", &cfg]).status.code(), Some(0));
    let csv = dir.path().join("b.csv");
    let regret = dir.path().join("out/regret_eta_10.csv");
    let out = csmab(&[
        "bounds",
        "--config",
        &cfg,
        "--tmin",
        "100",
        "--tmax",
        "1000",
        "--points",
        "5",
        "--empirical",
        regret.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(text.lines().next(), Some("T,tscsf_bound,lfg_bound,empirical_regret"));
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0][0], "100");
    assert_eq!(rows[4][0], "1000");
    // Runs have 300 rounds: horizons beyond that carry no empirical value.
    assert!(!rows[0][3].is_empty());
    assert!(rows[4][3].is_empty());
    for r in &rows {
        let (ts, lfg): (f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        assert!(ts < lfg);
    }
    let bounds: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(bounds.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn ingest_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let ratings = dir.path().join("ratings.csv");
    let mut text = String::from("userId,movieId,rating,timestamp\n");
    for user in 1..=60 {
        text.push_str(&format!("{user},{},{}.0,{user}\n", 10 + user % 3, 1 + user % 5));
        if user % 4 == 0 {
            text.push_str(&format!("{user},12,5.0,{user}\n"));
        }
    }
    text.push_str("99,77,4.0,1\n");
    fs::write(&ratings, text).unwrap();
    let trace = dir.path().join("t.trace");
    let out = csmab(&[
        "ingest",
        "--ratings",
        ratings.to_str().unwrap(),
        "--movies",
        "10",
        "11",
        "12",
        "--out",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let body = fs::read_to_string(&trace).unwrap();
    assert!(body.starts_with("# arms=3\n"));
    assert_eq!(body.lines().filter(|l| !l.starts_with('#')).count(), 60);

    let cfg = write_config(
        dir.path(),
        r#"
[instance]
cardinality = 1
fairness = [0.1, 0.1, 0.1]

[experiment]
eta = ["auto"]
replications = 2
seed = 1
"#,
    );
    let out_dir = dir.path().join("replay");
    let out = csmab(&["replay", "--trace", trace.to_str().unwrap(), "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = fs::read_to_string(out_dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"mode\": \"replay\""));
    let regret = fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .find(|n| n.starts_with("regret_eta_"))
        .unwrap();
    assert_eq!(fs::read_to_string(out_dir.join(regret)).unwrap().lines().count(), 1 + 3 * 60);
}
