mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{bin, read_ifs, write_inputs};

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn score(dir: &Path) -> Output {
    let p = |n: &str| dir.join(n).display().to_string();
    run(&["score-tables", "--p-values", &p("p_values.csv"), "--loglik", &p("loglik.csv"), "--crps", &p("crps.csv"), "--out", &p("ifs.csv")])
}

#[test]
fn shuffled_rows_give_identical_scores() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_inputs(a.path(), &(0..15).collect::<Vec<_>>());
    let shuffled = [7, 3, 14, 0, 9, 12, 1, 5, 11, 2, 13, 6, 10, 4, 8];
    write_inputs(b.path(), &shuffled);
    assert!(score(a.path()).status.success());
    assert!(score(b.path()).status.success());
    let ra = read_ifs(&a.path().join("ifs.csv"));
    let rb = read_ifs(&b.path().join("ifs.csv"));
    assert_eq!(ra.len(), 15);
    for r in &ra {
        assert_eq!(Some(r), rb.iter().find(|x| x.model == r.model));
    }
    // the output is ordered by IFS rank
    assert_eq!(ra[0].model, "VG");
    assert!(ra.windows(2).all(|w| w[0].ifs_rank <= w[1].ifs_rank));
}

#[test]
fn single_model_has_neutral_gaussian_scores() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path(), &[13]);
    assert!(score(dir.path()).status.success());
    let rows = read_ifs(&dir.path().join("ifs.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].accuracy, rows[0].errors), (0.5, 0.5));
    // VG passes all three tests and is trivially the best in each
    assert_eq!(rows[0].consistency, 1.0);
}

#[test]
fn mismatched_model_names_are_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path(), &[0, 1, 2]);
    std::fs::write(dir.path().join("crps.csv"), "model,entire\nLN-HIS(6m),0\nBTS(6m),0.01\nGARCH-N(5y),0.02\n").unwrap();
    let out = score(dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("GARCH-N(6m)") && err.contains("GARCH-N(5y)"), "{err}");
}

#[test]
fn column_aliases_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path(), &[0, 1, 2]);
    let p = std::fs::read_to_string(dir.path().join("p_values.csv")).unwrap();
    std::fs::write(dir.path().join("p_values.csv"), p.replacen("model,berkowitz,jb,ks", "Model,berkowitz_p,JB_P,ks_p", 1)).unwrap();
    let ll = std::fs::read_to_string(dir.path().join("loglik.csv")).unwrap();
    std::fs::write(dir.path().join("loglik.csv"), ll.replacen("entire", "excess_loglik", 1)).unwrap();
    assert!(score(dir.path()).status.success());
}

fn digests(dir: &Path) -> Vec<Vec<u8>> {
    ["futures.csv", "rates.csv", "options.csv", "truth.json"].iter().map(|f| std::fs::read(dir.join(f)).unwrap()).collect()
}

#[test]
fn synth_is_deterministic_and_validates_cycles() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = run(&["synth", "--world", "lognormal", "--cycles", "60", "--seed", "7", "--out", d.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(digests(&a), digests(&b));
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"].as_object().unwrap().len(), 4);

    let out = run(&["synth", "--cycles", "0", "--out", dir.path().join("c").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["synth", "--world", "sabr"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["synth", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
}

fn synth_dir(dir: &Path, cycles: &str, warmup: &str) -> String {
    let data = dir.join("data");
    let out = run(&["synth", "--cycles", cycles, "--seed", "3", "--warmup", warmup, "--out", data.to_str().unwrap()]);
    assert!(out.status.success());
    data.display().to_string()
}

#[test]
fn backtest_reports_round_trip_through_score_tables() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_dir(dir.path(), "36", "140");
    let rep = dir.path().join("rep");
    let config = dir.path().join("run.cfg");
    std::fs::write(&config, "# small run\nroster = BTS(6m), LN-ATM, BL-MALZ\nn_paths = 10000\nseed = 11\n").unwrap();
    let out = run(&["backtest", "--config", config.to_str().unwrap(), "--data", &data, "--out", rep.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["scoreboard.json", "table1.csv", "table2.csv", "table3.csv", "table4.csv", "table5.csv", "table6.csv", "pit_hist.csv", "fans.csv", "audit.jsonl", "manifest.json"] {
        assert!(rep.join(f).exists(), "{f}");
    }
    assert_eq!(std::fs::read_to_string(rep.join("audit.jsonl")).unwrap().lines().count(), 36 * 3);

    // no LN-HIS(6m) in the roster: the first model stands in and the header says so
    let t4 = std::fs::read_to_string(rep.join("table4.csv")).unwrap();
    assert!(t4.lines().next().unwrap().ends_with("fallback_benchmark"), "{t4}");
    assert!(t4.lines().nth(1).unwrap().starts_with("BTS(6m),0,,0,"), "{t4}");

    let p = |n: &str| rep.join(n).display().to_string();
    let out = run(&["score-tables", "--p-values", &p("table2.csv"), "--loglik", &p("table4.csv"), "--crps", &p("table5.csv"), "--out", &p("again.csv")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (a, b) = (read_ifs(&rep.join("table6.csv")), read_ifs(&rep.join("again.csv")));
    assert_eq!(a.len(), 3);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.model, y.model);
        assert!((x.ifs - y.ifs).abs() < 1e-9 && x.ifs_rank == y.ifs_rank);
    }

    // a flag overrides the config file and changes the digest of the configuration
    let rep2 = dir.path().join("rep2");
    let out = run(&["backtest", "--config", config.to_str().unwrap(), "--data", &data, "--seed", "12", "--out", rep2.to_str().unwrap()]);
    assert!(out.status.success());
    let digest = |d: &Path| {
        let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("manifest.json")).unwrap()).unwrap();
        (m["config_digest"].as_str().unwrap().to_string(), m["seed"].as_u64().unwrap())
    };
    let (d1, s1) = digest(&rep);
    let (d2, s2) = digest(&rep2);
    assert_ne!(d1, d2);
    assert_eq!((s1, s2), (11, 12));
}

#[test]
fn infeasible_window_names_first_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_dir(dir.path(), "4", "300");
    let truth: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(Path::new(&data).join("truth.json")).unwrap()).unwrap();
    let first = truth["cycles"][0]["obs_date"].as_str().unwrap().to_string();
    let out = run(&["backtest", "--data", &data, "--roster", "GARCH-N(5y)", "--out", dir.path().join("r").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(&first) && err.contains("1260"), "{err}");
}

#[test]
fn configuration_problems_exit_before_work() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["backtest", "--data", "/nonexistent", "--roster", "LN-ATM,SABR", "--set", "alpha=2", "--set", "colour=red"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for needle in ["SABR", "alpha", "colour"] {
        assert!(err.contains(needle), "{err}");
    }
    let out = Command::new(bin())
        .env("DENSITYBENCH_THREADS", "many")
        .args(["validate-data", "--data", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn validate_data_writes_moneyness_table() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_dir(dir.path(), "12", "30");
    let out = Command::new(bin())
        .env("DENSITYBENCH_THREADS", "1")
        .args(["validate-data", "--data", &data, "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("table1.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    let total = |group: &str| -> usize {
        rows.iter().filter(|r| &r[0] == group && &r[1] != "Overall").map(|r| r[3].parse::<usize>().unwrap()).sum()
    };
    assert!(total("type") > 0);
    assert_eq!(total("type"), total("moneyness"));
}
