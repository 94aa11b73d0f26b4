use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lattice-rewrite"))
        .args(args)
        .env_remove("LATTICE_REWRITE_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn field<'a>(text: &'a str, name: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(name).and_then(|r| r.strip_prefix(": ")))
        .unwrap_or_else(|| panic!("no {name} in {text:?}"))
}

const FIG1: [&str; 6] = ["--lattice", "fig1", "--M", "5", "--D", "2"];

#[test]
fn encode_then_decode_recovers_word() {
    for key in ["0", "42", "987654321"] {
        for u in ["0,0", "2,3", "4,4", "1,0"] {
            let enc = run(&[&FIG1[..], &["--key", key, "encode", "--u", u, "--state", "1/4,3/2"]].concat());
            assert!(enc.status.success(), "{enc:?}");
            let text = stdout(&enc);
            let x = field(&text, "codeword").to_string();
            let dec = run(&[&FIG1[..], &["--key", key, "decode", "--x", &x]].concat());
            assert!(dec.status.success(), "{dec:?}");
            let dtext = stdout(&dec);
            assert_eq!(field(&dtext, "u"), u);
            assert_eq!(field(&dtext, "block"), field(&text, "block"));
        }
    }
}

#[test]
fn exit_codes() {
    let full = run(&[&FIG1[..], &["--hash-off", "encode", "--u", "1,1", "--state", "19/2,19/2"]].concat());
    assert_eq!(full.status.code(), Some(3));
    let not_point = run(&[&FIG1[..], &["decode", "--x", "7,2"]].concat());
    assert_eq!(not_point.status.code(), Some(4));
    let outside = run(&[&FIG1[..], &["decode", "--x", "10,0"]].concat());
    assert_eq!(outside.status.code(), Some(4));
    let too_large = run(&["--lattice", "e8", "--M", "16", "--D", "16", "dump"]);
    assert_eq!(too_large.status.code(), Some(5));
    let bad_radix = run(&["--lattice", "e8", "--M", "3", "--D", "2", "info"]);
    assert_eq!(bad_radix.status.code(), Some(2));
    let both = run(&["--lattice", "fig1", "--M", "5", "--D", "2", "--q", "11", "info"]);
    assert_eq!(both.status.code(), Some(2));
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"lattice": "fig1", "M": 5, "D": "2", "hash_off": true}"#).unwrap();
    let cfg = cfg.to_str().unwrap();

    let enc = run(&["--config", cfg, "encode", "--u", "4,1", "--state", "2,4"]);
    assert!(enc.status.success(), "{enc:?}");
    assert_eq!(field(&stdout(&enc), "codeword"), "4,8");

    let info = run(&["--config", cfg, "--D", "3/2", "info", "--json"]);
    assert!(info.status.success(), "{info:?}");
    let json: serde_json::Value = serde_json::from_slice(&info.stdout).unwrap();
    assert_eq!(json["D"], "3/2");
    assert_eq!(json["lattice"], "fig1");
}

#[test]
fn lattice_definition_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("lat.json");
    std::fs::write(&file, r#"{"n": 2, "M": 5, "generator": [["1", "0"], ["1/2", "1"]]}"#).unwrap();
    let out = run(&["--lattice", file.to_str().unwrap(), "--D", "2", "dump"]);
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 101);
}

#[test]
fn sweep_writes_csv_with_infeasible_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let out = run(&[
        "--lattice", "fig1", "--trials", "20", "--seed", "3", "sweep", "--q-values", "11", "--M-values", "5,2,20",
        "--out", csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("q,M,D,rate_bits_per_cell,mean_writes,ci95,trials,seed,strategy,note"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    let five = rows.iter().find(|r| r[1] == "5").unwrap();
    assert_eq!(five[2], "2");
    assert!(five[4].parse::<f64>().unwrap() >= 2.0);
    let twenty = rows.iter().find(|r| r[1] == "20").unwrap();
    assert!(twenty[4].is_empty() && !twenty[9].is_empty());
}
