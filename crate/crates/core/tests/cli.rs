use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_causal-choice"))
}

fn run(args: &[&str]) -> i32 {
    let out = bin().args(args).output().unwrap();
    out.status.code().unwrap()
}

fn simulate(dir: &Path, rows: &str, seed: &str) {
    let out = dir.to_str().unwrap();
    assert_eq!(run(&["simulate", "--seed", seed, "--rows", rows, "--out", out]), 0);
}

fn p(dir: &Path, f: &str) -> String {
    dir.join(f).to_str().unwrap().to_string()
}

#[test]
fn simulate_honours_rows_and_seed() {
    let t = tempfile::tempdir().unwrap();
    let (a, b, c) = (t.path().join("a"), t.path().join("b"), t.path().join("c"));
    simulate(&a, "123", "4");
    simulate(&b, "123", "4");
    simulate(&c, "123", "5");
    let data = fs::read_to_string(a.join("data.csv")).unwrap();
    assert_eq!(data.lines().count(), 124);
    assert_eq!(data, fs::read_to_string(b.join("data.csv")).unwrap());
    assert_ne!(data, fs::read_to_string(c.join("data.csv")).unwrap());
}

#[test]
fn missing_seed_is_a_user_error() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(run(&["simulate", "--out", t.path().to_str().unwrap()]), 1);
    assert_eq!(run(&["no-such-command"]), 1);
    assert_eq!(run(&["--help"]), 0);
}

#[test]
fn config_file_supplies_flags_and_command_line_wins() {
    let t = tempfile::tempdir().unwrap();
    fs::write(t.path().join("run.toml"), "seed = 9\nrows = 50\nout = \"from_file\"\n").unwrap();
    let cfg = p(t.path(), "run.toml");
    assert_eq!(run(&["simulate", "--config", &cfg]), 0);
    assert_eq!(fs::read_to_string(t.path().join("from_file/data.csv")).unwrap().lines().count(), 51);
    let over = p(t.path(), "over");
    assert_eq!(run(&["simulate", "--config", &cfg, "--rows", "20", "--out", &over]), 0);
    assert_eq!(fs::read_to_string(t.path().join("over/data.csv")).unwrap().lines().count(), 21);
    fs::write(t.path().join("bad.toml"), "seeed = 1\n").unwrap();
    assert_eq!(run(&["simulate", "--config", &p(t.path(), "bad.toml")]), 1);
}

#[test]
fn discover_writes_an_admissible_dag() {
    let t = tempfile::tempdir().unwrap();
    let sim = t.path().join("sim");
    simulate(&sim, "800", "2");
    let out = p(t.path(), "disc");
    let code = run(&[
        "discover", "--seed", "2", "--data", &p(&sim, "data.csv"), "--specs", &p(&sim, "specs.toml"),
        "--knowledge", &p(&sim, "knowledge.txt"), "--out", &out,
    ]);
    assert_eq!(code, 0);
    let dag = fs::read_to_string(t.path().join("disc/dag.txt")).unwrap();
    for line in dag.lines().filter(|l| l.contains("->")) {
        let to = line.split("->").nth(1).unwrap().trim();
        assert!(!["gender", "age", "cars"].contains(&to), "edge into exogenous: {line}");
    }
    assert!(fs::read_to_string(t.path().join("disc/trace.log")).unwrap().contains("final_score"));
}

#[test]
fn discover_rejects_empty_data_and_knowledge_conflicts() {
    let t = tempfile::tempdir().unwrap();
    let sim = t.path().join("sim");
    simulate(&sim, "50", "2");
    let header = fs::read_to_string(sim.join("data.csv")).unwrap().lines().next().unwrap().to_string();
    fs::write(t.path().join("empty.csv"), format!("{header}\n")).unwrap();
    let out = p(t.path(), "x");
    let specs = p(&sim, "specs.toml");
    assert_eq!(run(&["discover", "--seed", "1", "--data", &p(t.path(), "empty.csv"), "--specs", &specs, "--out", &out]), 1);
    fs::write(t.path().join("k.txt"), "require gender -> age\nrequire age -> gender\n").unwrap();
    assert_eq!(
        run(&["discover", "--seed", "1", "--data", &p(&sim, "data.csv"), "--specs", &specs, "--knowledge", &p(t.path(), "k.txt"), "--out", &out]),
        1
    );
}

#[test]
fn fit_report_is_internally_consistent() {
    let t = tempfile::tempdir().unwrap();
    let sim = t.path().join("sim");
    simulate(&sim, "600", "3");
    let out = p(t.path(), "fit");
    let code = run(&[
        "fit", "--seed", "3", "--data", &p(&sim, "data.csv"), "--specs", &p(&sim, "specs.toml"),
        "--dag", &p(&sim, "dag.txt"), "--epochs", "5", "--out", &out,
    ]);
    assert_eq!(code, 0);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(t.path().join("fit/report.json")).unwrap()).unwrap();
    let ll = report["train_log_likelihood"].as_f64().unwrap();
    let b = report["parameters"].as_u64().unwrap() as f64;
    assert_eq!(report["aic"].as_f64().unwrap(), -2.0 * ll + 2.0 * b);
    for m in report["mechanisms"].as_array().unwrap() {
        assert!((0.0..=1.0).contains(&m["validation_mpe"].as_f64().unwrap()));
    }
    assert_eq!(report["train_rows"].as_u64().unwrap(), 420);
    assert!(t.path().join("fit/model.cctf").exists());
    assert!(t.path().join("fit/coefficients.csv").exists());
}

#[test]
fn fit_rejects_a_dag_that_does_not_match_the_specs() {
    let t = tempfile::tempdir().unwrap();
    let sim = t.path().join("sim");
    simulate(&sim, "100", "3");
    fs::write(t.path().join("dag.txt"), "gender -> mystery\n").unwrap();
    let code = run(&[
        "fit", "--seed", "3", "--data", &p(&sim, "data.csv"), "--specs", &p(&sim, "specs.toml"),
        "--dag", &p(t.path(), "dag.txt"), "--out", &p(t.path(), "o"),
    ]);
    assert_eq!(code, 1);
}

#[test]
fn search_leaderboard_is_sorted_and_single_trial_wins() {
    let t = tempfile::tempdir().unwrap();
    let sim = t.path().join("sim");
    simulate(&sim, "300", "4");
    let base = [
        "search", "--seed", "4", "--data", &p(&sim, "data.csv"), "--specs", &p(&sim, "specs.toml"),
        "--dag", &p(&sim, "dag.txt"), "--outcome", "wait_time", "--epochs", "3",
    ];
    let many = p(t.path(), "many");
    let mut args = base.to_vec();
    args.extend(["--trials", "3", "--out", &many]);
    assert_eq!(run(&args), 0);
    let board = fs::read_to_string(t.path().join("many/leaderboard.csv")).unwrap();
    let losses: Vec<f64> = board.lines().skip(1).map(|l| l.split(',').nth(8).unwrap().parse().unwrap()).collect();
    assert_eq!(losses.len(), 3);
    assert!(losses.windows(2).all(|w| w[0] <= w[1]));

    let one = p(t.path(), "one");
    let mut args = base.to_vec();
    args.extend(["--trials", "1", "--out", &one]);
    assert_eq!(run(&args), 0);
    let board = fs::read_to_string(t.path().join("one/leaderboard.csv")).unwrap();
    assert_eq!(board.lines().count(), 2);
    assert!(board.lines().nth(1).unwrap().starts_with("1,0,"));
}

#[test]
fn counterfactual_outputs_and_exogenous_rejection() {
    let t = tempfile::tempdir().unwrap();
    let sim = t.path().join("sim");
    simulate(&sim, "300", "6");
    let fit = p(t.path(), "fit");
    assert_eq!(
        run(&[
            "fit", "--seed", "6", "--data", &p(&sim, "data.csv"), "--specs", &p(&sim, "specs.toml"),
            "--dag", &p(&sim, "dag.txt"), "--epochs", "5", "--out", &fit,
        ]),
        0
    );
    let common = [
        "counterfactual", "--seed", "6", "--data", &p(&sim, "data.csv"), "--specs", &p(&sim, "specs.toml"),
        "--model", &p(t.path(), "fit/model.cctf"), "--outcome", "wait_time", "--epochs", "2",
    ];
    let out = p(t.path(), "cf");
    let mut args = common.to_vec();
    args.extend(["--intervene", "stress_level=low", "--out", &out]);
    assert_eq!(run(&args), 0);
    let matrix = fs::read_to_string(t.path().join("cf/transitions.csv")).unwrap();
    let total: usize = matrix
        .lines()
        .skip(1)
        .flat_map(|l| l.split(',').skip(1).map(|x| x.parse::<usize>().unwrap()).collect::<Vec<_>>())
        .sum();
    assert_eq!(total, 300);
    let shares: serde_json::Value = serde_json::from_str(&fs::read_to_string(t.path().join("cf/shares.json")).unwrap()).unwrap();
    assert!(shares["share_deltas"][1].as_f64().unwrap() <= 0.0);

    let out2 = p(t.path(), "cf2");
    let mut args = common.to_vec();
    args.extend(["--intervene", "gender=male", "--out", &out2]);
    assert_eq!(run(&args), 1);
}
