use std::process::{Command, Output};

fn iblt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iblt")).args(args).output().expect("run iblt")
}

fn stdout(args: &[&str]) -> String {
    let out = iblt(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn records(csv_text: &str) -> Vec<csv::StringRecord> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(csv_text.as_bytes())
        .records()
        .map(Result::unwrap)
        .collect()
}

#[test]
fn ztable_single_cell() {
    assert_eq!(stdout(&["ztable", "--lmax", "1", "--nmax", "1"]), "ell,n,z\n1,1,0\n");
}

#[test]
fn ztable_contains_known_row() {
    let out = stdout(&["ztable", "--lmax", "10", "--nmax", "10"]);
    assert_eq!(out.lines().count(), 101);
    assert!(out.lines().any(|l| l == "5,7,7425"));
    assert!(out.lines().any(|l| l == "10,10,81163900"));
}

#[test]
fn ztable_cache_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("z.cache");
    let cache = cache.to_str().unwrap();
    let first = stdout(&["ztable", "--lmax", "6", "--nmax", "6", "--cache", cache]);
    assert!(std::path::Path::new(cache).exists());
    let second = stdout(&["ztable", "--lmax", "6", "--nmax", "6", "--cache", cache]);
    assert_eq!(first, second);
    let larger = stdout(&["ztable", "--lmax", "8", "--nmax", "8", "--cache", cache]);
    assert!(larger.starts_with("ell,n,z\n1,1,0\n"));

    std::fs::write(cache, "garbage\n").unwrap();
    assert_eq!(iblt(&["ztable", "--lmax", "2", "--nmax", "2", "--cache", cache]).status.code(), Some(1));
}

#[test]
fn bound_values() {
    assert_eq!(
        stdout(&["bound", "--ell", "4", "--n", "2", "--k", "3"]),
        "ell,n,k,bound_raw,bound_clamped,p2\n4,2,3,0.015625,0.015625,0.015625\n"
    );
    assert_eq!(
        stdout(&["bound", "--ell", "2", "--n", "3", "--k", "1"]),
        "ell,n,k,bound_raw,bound_clamped,p2\n2,3,1,1.75,1.0,1.5\n"
    );
    let by_m = stdout(&["bound", "--m", "12", "--n", "2", "--k", "3"]);
    assert!(by_m.ends_with("4,2,3,0.015625,0.015625,0.015625\n"));
}

#[test]
fn bound_breakdown_second_term_is_p2() {
    let out = stdout(&["bound", "--ell", "50", "--n", "20", "--k", "3", "--breakdown"]);
    let recs = records(&out);
    assert_eq!(recs[0].iter().collect::<Vec<_>>(), ["ell", "n", "k", "bound_raw", "bound_clamped", "p2"]);
    let p2 = &recs[1][5];
    assert_eq!(recs[2].iter().collect::<Vec<_>>(), ["i", "term", "ln_term"]);
    assert_eq!(&recs[3][0], "2");
    assert_eq!(&recs[3][1], p2);
    assert_eq!(recs.len(), 3 + 19);
    let total: f64 = recs[3..].iter().map(|r| r[1].parse::<f64>().unwrap()).sum();
    let raw: f64 = recs[1][3].parse().unwrap();
    assert!((total - raw).abs() <= 1e-12 * raw);
}

#[test]
fn bound_rejects_bad_divisibility() {
    let out = iblt(&["bound", "--m", "10", "--n", "2", "--k", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("multiple"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(iblt(&[]).status.code(), Some(1));
    assert_eq!(iblt(&["bound", "--n", "2"]).status.code(), Some(1));
    assert_eq!(iblt(&["simulate", "--n", "2", "--sweep", "5:1:1"]).status.code(), Some(1));
    assert_eq!(iblt(&["--help"]).status.code(), Some(0));
}

#[test]
fn oracle_rows() {
    assert_eq!(
        stdout(&["oracle", "--ell", "2", "--n", "2", "--k", "1"]),
        "ell,n,k,exact_num,exact_den,exact_float,bound_clamped\n2,2,1,1,2,0.5,0.5\n"
    );
    assert!(stdout(&["oracle", "--ell", "1", "--n", "2", "--k", "1"]).ends_with("1,2,1,1,1,1.0,1.0\n"));
    for (ell, n, k) in [("2", "3", "2"), ("3", "4", "1"), ("3", "3", "2")] {
        let recs = records(&stdout(&["oracle", "--ell", ell, "--n", n, "--k", k]));
        let exact: f64 = recs[1][5].parse().unwrap();
        let bound: f64 = recs[1][6].parse().unwrap();
        assert!(exact <= bound);
    }
}

#[test]
fn oracle_guard_exits_two() {
    let out = iblt(&["oracle", "--ell", "10", "--n", "5", "--k", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = iblt(&["oracle", "--ell", "2", "--n", "2", "--k", "2", "--guard", "8"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_single_entry_never_fails() {
    let out = stdout(&["simulate", "--n", "1", "--m", "30", "--trials", "500"]);
    let recs = records(&out);
    assert_eq!(
        recs[0].iter().collect::<Vec<_>>(),
        [
            "m", "ell", "n", "k", "b", "scheme", "trials", "failures", "p_hat", "ci_low", "ci_high",
            "bound_clamped", "p2", "seed"
        ]
    );
    assert_eq!(&recs[1][7], "0");
}

#[test]
fn simulate_sweep_rows_follow_grid() {
    let out = stdout(&["simulate", "--n", "20", "--sweep", "30:60:15", "--trials", "300", "--seed", "4"]);
    let ms: Vec<String> = records(&out)[1..].iter().map(|r| r[0].to_string()).collect();
    assert_eq!(ms, ["30", "45", "60"]);
}

#[test]
fn simulate_rejects_invalid_configs() {
    // ss-avoiding needs ell = 2^(b/k)
    let out = iblt(&["simulate", "--n", "5", "--m", "30", "--b", "24", "--scheme", "ss-avoiding"]);
    assert_eq!(out.status.code(), Some(1));
    let out = iblt(&["simulate", "--n", "5", "--m", "31"]);
    assert_eq!(out.status.code(), Some(1));
    let out = iblt(&[
        "simulate", "--n", "5", "--m", "48", "--b", "12", "--scheme", "ss-avoiding", "--key-model", "iid",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_ss_avoiding_runs() {
    let out = stdout(&["simulate", "--n", "20", "--m", "48", "--b", "12", "--scheme", "ss-avoiding", "--trials", "500"]);
    let recs = records(&out);
    assert_eq!(&recs[1][5], "ss-avoiding");
    assert_eq!(&recs[1][1], "16");
}

#[test]
fn simulate_is_byte_identical_across_workers() {
    let args = ["simulate", "--n", "30", "--sweep", "45:90:15", "--trials", "2000", "--seed", "12"];
    let one = stdout(&[&args[..], &["--workers", "1"]].concat());
    let four = stdout(&[&args[..], &["--workers", "4"]].concat());
    let again = stdout(&[&args[..], &["--workers", "1"]].concat());
    assert_eq!(one, four);
    assert_eq!(one, again);
}
