use std::ffi::OsString;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use xnt_cli::args::Command as Sub;
use xnt_cli::{parse_args, Report};
use xnt_core::sieve::ThresholdRule;

fn xnt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xnt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn argv(args: &[&str]) -> Vec<OsString> {
    std::iter::once("xnt")
        .chain(args.iter().copied())
        .map(OsString::from)
        .collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn boxcount_flags_parse() {
    let cli = parse_args(argv(&[
        "boxcount",
        "--f",
        "T^2",
        "--F",
        "X0^2+X1^2+X2^2",
        "--B",
        "20",
    ]))
    .unwrap();
    match cli.command {
        Sub::Boxcount(a) => {
            assert_eq!(a.b, 20);
            assert_eq!(a.form, "X0^2+X1^2+X2^2");
            assert_eq!(a.threshold, ThresholdRule::Lemma);
            assert_eq!(a.primes, "auto");
        }
        other => panic!("parsed as {other:?}"),
    }
}

#[test]
fn threshold_logp_is_selectable() {
    let cli = parse_args(argv(&[
        "boxcount",
        "--f",
        "T^2",
        "--F",
        "X0^2",
        "--B",
        "5",
        "--threshold",
        "logp",
    ]))
    .unwrap();
    let Sub::Boxcount(a) = cli.command else {
        panic!()
    };
    assert_eq!(a.threshold, ThresholdRule::LogP);
    assert!(parse_args(argv(&[
        "boxcount",
        "--f",
        "T^2",
        "--F",
        "X0^2",
        "--B",
        "5",
        "--threshold",
        "log"
    ]))
    .is_err());
}

#[test]
fn malformed_polynomial_names_offset() {
    let o = xnt(&["klsum", "--p", "13", "--F", "X1^^2"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("offset 3"), "{err}");
}

#[test]
fn empty_prime_list_is_explained() {
    let o = xnt(&[
        "boxcount",
        "--f",
        "T^2",
        "--F",
        "X0^2+X1^2+X2^2",
        "--B",
        "10",
        "--primes",
        "list:",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("prime list is empty"), "{err}");
    assert!(err.contains("--primes auto"), "{err}");
}

#[test]
fn unknown_flags_are_rejected() {
    let o = xnt(&["klsum", "--p", "13", "--F", "X1", "--frobnicate", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn klsum_reports_normalized_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("kl.json");
    let o = xnt(&[
        "klsum",
        "--m",
        "2",
        "--p",
        "13",
        "--F",
        "X1^3+X2^3+X3^3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = read_json(&out);
    let r = &v["result"];
    let abs = r["abs"].as_f64().unwrap();
    assert!((r["ratio"].as_f64().unwrap() - abs / 13f64.powf(1.5)).abs() < 1e-12);
    assert!(r["ratio"].as_f64().unwrap() <= 10.0);
    assert_eq!(v["command"], "klsum");
}

#[test]
fn sieve_check_reports_max_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.json");
    let o = xnt(&[
        "sieve-check",
        "--d",
        "3",
        "--p",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = read_json(&out);
    assert!(v["result"]["max_error"].as_f64().unwrap() <= 1e-9);
    assert_eq!(v["result"]["pass"], true);
}

#[test]
fn failed_assertion_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    let o = xnt(&[
        "crt-check",
        "--F",
        "X0^2+X1^3",
        "--u",
        "1,2",
        "--p",
        "5",
        "--q",
        "7",
        "--tp",
        "legendre",
        "--tq",
        "kl:2",
        "--tol",
        "1e-300",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    // The report is still written.
    assert_eq!(read_json(&out)["result"]["pass"], false);
}

#[test]
fn json_round_trips_and_csv_matches_tallies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("box.json");
    let csv_dir = dir.path().join("csv");
    let o = xnt(&[
        "boxcount",
        "--f",
        "T^2",
        "--F",
        "X0^2+X1^2+X2^2",
        "--B",
        "10",
        "--out",
        out.to_str().unwrap(),
        "--csv",
        csv_dir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let report = Report::read(&out).unwrap();
    assert_eq!(report.to_json(), text);
    assert_eq!(report.format_version, 1);
    assert_eq!(report.result["exact_count"], 421);

    let tallies = &report.result["tallies"];
    let mut rdr = csv::Reader::from_path(csv_dir.join("boxcount-tallies.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        let key = match &row[0] {
            "zero-type" => "zero_type",
            other => other,
        };
        assert_eq!(
            row[1].parse::<u64>().unwrap(),
            tallies[key].as_u64().unwrap(),
            "{key}"
        );
    }
    let primes = csv::Reader::from_path(csv_dir.join("boxcount-primes.csv"))
        .unwrap()
        .records()
        .count();
    assert_eq!(primes, report.result["primes"].as_array().unwrap().len());
}

fn without_timings(path: &Path) -> Value {
    let mut v = read_json(path);
    v.as_object_mut().unwrap().remove("timings_ms");
    v
}

#[test]
fn same_seed_gives_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = xnt(&[
            "boxcount",
            "--f",
            "T^3",
            "--F",
            "X0*X1 + X2^2",
            "--B",
            "8",
            "--seed",
            "7",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        out
    };
    let (a, b, c) = (run("a.json", "1"), run("b.json", "1"), run("c.json", "4"));
    assert_eq!(without_timings(&a), without_timings(&b));
    assert_eq!(without_timings(&a), without_timings(&c));
    assert_eq!(read_json(&a)["seed"], 7);
}

#[test]
fn scans_are_disclosed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = xnt(&[
        "boxcount",
        "--f",
        "T^2",
        "--F",
        "X0*X1 + X2^2",
        "--B",
        "10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = read_json(&out);
    let semi = v["semi_decisions"].as_array().unwrap();
    assert!(!semi.is_empty());
    assert!(semi
        .iter()
        .all(|s| s.as_str().unwrap().contains("k_max = 2")));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "f = \"T^2\"\nF = \"X0^2+X1^2+X2^2\"\nB = 5\nthreshold = \"logp\"\nseed = 3\n",
    )
    .unwrap();
    let c = cfg.to_str().unwrap();

    let cli = parse_args(argv(&["boxcount", "--config", c])).unwrap();
    assert_eq!(cli.common.seed, 3);
    let Sub::Boxcount(a) = cli.command else {
        panic!()
    };
    assert_eq!((a.b, a.threshold), (5, ThresholdRule::LogP));

    let cli = parse_args(argv(&[
        "--seed", "9", "boxcount", "--config", c, "--B", "12",
    ]))
    .unwrap();
    assert_eq!(cli.common.seed, 9);
    let Sub::Boxcount(a) = cli.command else {
        panic!()
    };
    assert_eq!(a.b, 12);

    fs::write(&cfg, "B = 5\nnot_a_flag = 1\n").unwrap();
    let o = xnt(&["boxcount", "--config", c, "--f", "T^2", "--F", "X0^2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn fibers_pair_counts_sum_to_single() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.json");
    let o = xnt(&[
        "fibers",
        "--F",
        "X1^2+X2^2+X3^2",
        "--G",
        "X1*X2",
        "--p",
        "7",
        "--a",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = read_json(&out);
    let total = v["result"]["total"].as_u64().unwrap();
    let single = xnt(&["fibers", "--F", "X1^2+X2^2+X3^2", "--p", "7"]);
    let s: Value = serde_json::from_slice(&single.stdout).unwrap();
    assert_eq!(s["result"]["records"][1]["count"].as_u64().unwrap(), total);
}

#[test]
fn every_subcommand_runs() {
    let cases: &[&[&str]] = &[
        &[
            "tracesum",
            "--f",
            "X1^2+X2^2+X3",
            "--g",
            "X1+X2+X3",
            "--p",
            "11",
            "--singular-fibers",
        ],
        &["mixsum", "--F", "X1^3+X2^3", "--G", "X1*X2", "--p", "13"],
        &[
            "sieve-detect",
            "--f",
            "T^3-3*T",
            "--primes",
            "list:7,13,19",
            "--range",
            "1:500",
            "--values",
            "2,52,-7",
            "--alpha",
            "1",
        ],
        &[
            "classify-u",
            "--F",
            "X1^2+X2^2+X3^2",
            "--p",
            "13",
            "--u",
            "3,4,0",
        ],
        &[
            "bound-scan",
            "--f",
            "T^2",
            "--F",
            "X0^2+X1^2+X2^2",
            "--grid",
            "5,10",
        ],
        &[
            "poisson-check",
            "--F",
            "X0^2+X1^2",
            "--B",
            "6",
            "--p",
            "3",
            "--q",
            "5",
            "--tp",
            "legendre",
        ],
        &[
            "klsum",
            "--p",
            "11",
            "--F",
            "X1^2+X2^2+X3^2",
            "--u",
            "1,2,-4",
        ],
    ];
    for args in cases {
        let o = xnt(args);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
        let v: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["format"], "xnt-report");
        assert_eq!(v["command"], args[0]);
    }
}
