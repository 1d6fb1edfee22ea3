use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn exchpoly(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exchpoly"))
        .args(args)
        .output()
        .expect("run exchpoly")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&stdout(&exchpoly(args))).expect("valid JSON")
}

/// Structural equality with a float tolerance.
fn same(a: &Value, b: &Value, path: &str) {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            assert!(
                (x - y).abs() <= 1e-9 * x.abs().max(1.0),
                "{path}: {x} vs {y}"
            );
        }
        (Value::Array(x), Value::Array(y)) => {
            assert_eq!(x.len(), y.len(), "{path}: lengths differ");
            for (i, (u, v)) in x.iter().zip(y).enumerate() {
                same(u, v, &format!("{path}[{i}]"));
            }
        }
        (Value::Object(x), Value::Object(y)) => {
            let keys = |m: &serde_json::Map<String, Value>| m.keys().cloned().collect::<Vec<_>>();
            assert_eq!(keys(x), keys(y), "{path}: keys differ");
            for (k, u) in x {
                same(u, &y[k], &format!("{path}.{k}"));
            }
        }
        _ => assert_eq!(a, b, "{path}"),
    }
}

fn golden(name: &str, args: &[&str]) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    let want: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    same(&json(args), &want, name);
}

#[test]
fn golden_outputs() {
    golden(
        "rays_d3_p0.4.json",
        &["rays", "--d", "3", "--p", "0.4", "--json"],
    );
    golden("bounds_d3_p0.4.json", &["bounds", "--d", "3", "--p", "0.4"]);
    golden(
        "triangulate_d3_p0.4.json",
        &["triangulate", "--d", "3", "--p", "0.4"],
    );
    golden(
        "pex_rays_table.json",
        &[
            "pex-rays", "--d", "4", "--groups", "1,2|3,4", "--means", "0.5,0.25",
        ],
    );
}

#[test]
fn rays_reproduce_the_four_vertices() {
    let v = json(&["rays", "--d", "3", "--p", "0.4"]);
    let rays = v["rays"].as_array().unwrap();
    assert_eq!(rays.len(), 4);
    let r = rays
        .iter()
        .find(|r| r["support"] == serde_json::json!([1, 3]))
        .unwrap();
    assert_eq!(r["mass"], serde_json::json!([0.9, 0.1]));
}

#[test]
fn rays_csv_lists_every_atom() {
    let out = stdout(&exchpoly(&["rays", "--d", "6", "--p", "0.4", "--csv"]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "ray,y,mass");
    assert_eq!(lines.len() - 1, 24);
}

#[test]
fn sum_only_example_at_large_d() {
    let args = [
        "sample",
        "--d",
        "100000",
        "--p",
        "0.4",
        "--rho",
        "-0.0000039",
        "--n",
        "10",
        "--sum-only",
        "--seed",
        "1",
    ];
    let out = stdout(&exchpoly(&args));
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("y,count"));
    let total: u64 = lines
        .map(|l| {
            let (y, c) = l.split_once(',').unwrap();
            assert!(y.parse::<usize>().unwrap() <= 100_000);
            c.parse::<u64>().unwrap()
        })
        .sum();
    assert_eq!(total, 10);
}

#[test]
fn seeded_output_is_identical_across_thread_counts() {
    let run = |threads: &str, args: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_exchpoly"))
            .env("EXCHPOLY_THREADS", threads)
            .args(args)
            .output()
            .unwrap();
        stdout(&out)
    };
    let cases: [&[&str]; 4] = [
        &[
            "sample",
            "--d",
            "12",
            "--p",
            "0.3",
            "--dirichlet",
            "--n",
            "500",
            "--seed",
            "9",
        ],
        &[
            "sample", "--d", "8", "--p", "0.4", "--model", "beta", "--rho", "0.3", "--n", "500",
            "--seed", "9",
        ],
        &[
            "uniform-sample",
            "--d",
            "6",
            "--p",
            "0.4",
            "--n",
            "200",
            "--seed",
            "3",
        ],
        &[
            "measure-dist",
            "--d",
            "4",
            "--measure",
            "entropy",
            "--n",
            "500",
            "--seed",
            "5",
        ],
    ];
    for args in cases {
        let one = run("1", args);
        assert_eq!(one, run("4", args), "{args:?}");
        assert_eq!(one, run("0", args), "{args:?}");
    }
}

#[test]
fn full_rows_have_the_requested_width() {
    let out = stdout(&exchpoly(&[
        "sample", "--d", "5", "--p", "0.4", "--rho", "0.1", "--n", "20", "--seed", "2",
    ]));
    assert_eq!(out.lines().count(), 20);
    assert!(out
        .lines()
        .all(|l| l.split(',').all(|v| v == "0" || v == "1") && l.split(',').count() == 5));
}

#[test]
fn lambda_file_drives_the_mixture() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lambda.json");
    // All weight on the (0, 3) ray: sums are 0 or 3 only.
    fs::write(&path, r#"{"lambda": [0, 1, 0, 0]}"#).unwrap();
    let args = [
        "sample",
        "--d",
        "3",
        "--p",
        "0.4",
        "--lambda",
        path.to_str().unwrap(),
        "--n",
        "200",
        "--seed",
        "4",
    ];
    let out = stdout(&exchpoly(&[&args[..], &["--sum-only"]].concat()));
    for line in out.lines().skip(1) {
        let y = line.split(',').next().unwrap();
        assert!(y == "0" || y == "3", "{line}");
    }
}

/// Writes `rows` as a headerless 0/1 CSV.
fn write_rows(path: &Path, rows: &[Vec<u8>]) {
    let text: String = rows
        .iter()
        .map(|r| r.iter().map(u8::to_string).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    fs::write(path, text).unwrap();
}

#[test]
fn glr_test_on_five_columns_has_27_degrees_of_freedom() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("coins.csv");
    let rows: Vec<Vec<u8>> = (0..400u32)
        .map(|i| (0..5).map(|k| ((i * 7 + k * 3) % 5 < 2) as u8).collect())
        .collect();
    write_rows(&path, &rows);
    let v = json(&[
        "glr-test",
        "--data",
        path.to_str().unwrap(),
        "--h0",
        "exch-p",
        "--p",
        "0.5",
        "--alpha",
        "0.05",
    ]);
    assert_eq!(v["df"], 27);
    assert_eq!(v["h0"], "exch-p");
    for key in [
        "lambda",
        "neg2log",
        "p_value",
        "alpha",
        "reject",
        "min_expected_count",
        "warning",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let v = json(&["glr-test", "--data", path.to_str().unwrap(), "--h0", "exch"]);
    assert_eq!(v["df"], 26);
}

#[test]
fn glr_test_hand_case() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pairs.csv");
    let mut text = String::from("a,b\n");
    for (row, k) in [("0,0", 40), ("0,1", 20), ("1,0", 20), ("1,1", 20)] {
        for _ in 0..k {
            text.push_str(row);
            text.push('\n');
        }
    }
    fs::write(&path, text).unwrap();
    let v = json(&[
        "glr-test",
        "--data",
        path.to_str().unwrap(),
        "--header",
        "--h0",
        "exch-p",
        "--p",
        "0.5",
    ]);
    let hand = 2.0 * (40.0 * (4.0f64 / 3.0).ln() + 20.0 * (2.0f64 / 3.0).ln());
    assert!((v["neg2log"].as_f64().unwrap() - hand).abs() < 1e-9);
    assert_eq!(v["df"], 2);
    // Without --header the letters are rejected as data.
    let out = exchpoly(&["glr-test", "--data", path.to_str().unwrap(), "--h0", "exch"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn mle_reports_weights_when_the_mean_is_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("obs.csv");
    let rows: Vec<Vec<u8>> = [[0u8, 0], [0, 1], [1, 0], [1, 1]]
        .iter()
        .zip([10, 30, 50, 10])
        .flat_map(|(r, k)| std::iter::repeat_n(r.to_vec(), k))
        .collect();
    write_rows(&path, &rows);
    let free = json(&["mle", "--data", path.to_str().unwrap()]);
    let f: Vec<f64> = free["f_hat"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    // f_j = (N_j / n) / C(d, j).
    for (a, b) in f.iter().zip([0.1, 0.4, 0.1]) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(free.get("lambda_hat").is_none());
    let fixed = json(&["mle", "--data", path.to_str().unwrap(), "--p", "0.5"]);
    let total: f64 = fixed["lambda_hat"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["weight"].as_f64().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(fixed["loglik"].as_f64().unwrap() <= free["loglik"].as_f64().unwrap() + 1e-12);
}

#[test]
fn measure_on_a_single_pmf() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pmf.json");
    fs::write(&path, "[0.6, 0.0, 0.0, 0.4]").unwrap();
    let v = json(&[
        "measure",
        "--pmf",
        path.to_str().unwrap(),
        "--measure",
        "correlation",
    ]);
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    fs::write(&path, r#"{"f": [0.6, 0.0, 0.0, 0.4]}"#).unwrap();
    let v = json(&[
        "measure",
        "--pmf",
        path.to_str().unwrap(),
        "--measure",
        "moment:3",
    ]);
    assert!((v["value"].as_f64().unwrap() - 0.4).abs() < 1e-12);
}

#[test]
fn measure_cdf_is_a_monotone_table() {
    let out = stdout(&exchpoly(&[
        "measure-cdf",
        "--d",
        "3",
        "--p",
        "0.4",
        "--measure",
        "moment:2",
        "--grid",
        "50",
        "--pdf",
    ]));
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("t,F,f"));
    let f: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(f.len(), 50);
    assert!(f.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!((f[0], f[49]), (0.0, 1.0));
}

#[test]
fn output_flag_writes_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bounds.json");
    let out = exchpoly(&[
        "bounds",
        "--d",
        "6",
        "--p",
        "0.5",
        "-o",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success() && out.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert!((v["rho_min"].as_f64().unwrap() + 0.2).abs() < 1e-15);
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| exchpoly(args).status.code();
    assert_eq!(code(&["frobnicate"]), Some(2));
    assert_eq!(code(&["rays", "--d", "3"]), Some(2));
    assert_eq!(code(&["rays", "--d", "3", "--p", "1.5"]), Some(2));
    assert_eq!(code(&["rays", "--d", "0", "--p", "0.5"]), Some(2));
    assert_eq!(
        code(&["bounds", "--d", "3", "--p", "0.4", "--measure", "moment:x"]),
        Some(2)
    );
    assert_eq!(
        code(&["sample", "--d", "3", "--p", "0.4", "--n", "5", "--seed", "1"]),
        Some(2)
    );
    assert_eq!(
        code(&["pex-rays", "--d", "4", "--groups", "1,2|3,4", "--means", "0.5"]),
        Some(2)
    );
    // Valid flags, infeasible request.
    assert_eq!(
        code(&["sample", "--d", "3", "--p", "0.4", "--rho", "-0.9", "--n", "5", "--seed", "1"]),
        Some(1)
    );
    assert_eq!(code(&["mle", "--data", "/nonexistent/file.csv"]), Some(1));
    let out = exchpoly(&[
        "sample", "--d", "3", "--p", "0.4", "--rho", "-0.9", "--n", "5", "--seed", "1",
    ]);
    assert!(out.stdout.is_empty() && !out.stderr.is_empty());
}

#[test]
fn every_subcommand_documents_its_flags() {
    let cases: [(&str, &[&str]); 11] = [
        ("rays", &["--d", "--p", "--json", "--csv"]),
        ("triangulate", &["--d", "--p"]),
        (
            "measure-cdf",
            &["--d", "--p", "--measure", "--grid", "--pdf", "--delta"],
        ),
        (
            "measure-dist",
            &["--d", "--p", "--measure", "--n", "--seed"],
        ),
        ("bounds", &["--d", "--p", "--measure"]),
        ("measure", &["--pmf", "--measure"]),
        (
            "sample",
            &[
                "--d",
                "--p",
                "--lambda",
                "--dirichlet",
                "--rho",
                "--model",
                "--n",
                "--seed",
                "--sum-only",
                "--full",
            ],
        ),
        ("uniform-sample", &["--d", "--p", "--n", "--seed"]),
        ("mle", &["--data", "--header", "--p"]),
        (
            "glr-test",
            &["--data", "--header", "--h0", "--p", "--alpha"],
        ),
        ("pex-rays", &["--d", "--groups", "--means"]),
    ];
    for (cmd, flags) in cases {
        let help = stdout(&exchpoly(&[cmd, "--help"]));
        for flag in flags.iter().chain(&["--output"]) {
            assert!(help.contains(flag), "{cmd} --help lacks {flag}");
        }
    }
}
