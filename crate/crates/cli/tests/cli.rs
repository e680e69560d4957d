use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minsphere")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn spectrum_header_and_odd_zero_at_sphere() {
    let o = run(&["spectrum", "--a", "1", "--n-max", "2"]);
    assert!(o.status.success());
    let (h, rows) = csv_rows(&stdout(&o));
    assert_eq!(h, ["parity", "n", "a", "lambda", "zero_count"]);
    assert_eq!(rows.len(), 6);
    let odd0 = rows.iter().find(|r| r[0] == "odd" && r[1] == "0").unwrap();
    assert!(odd0[3].parse::<f64>().unwrap().abs() < 1e-9);
    for r in &rows {
        assert_eq!(r[1], r[4], "zero count equals n");
    }
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("negative_count even 1"));
    assert!(err.contains("negative_count odd 0"));
}

#[test]
fn instants_with_heun() {
    let o = run(&["instants", "--m-max", "4", "--with-heun"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let (h, rows) = csv_rows(&text);
    assert_eq!(h, ["m", "parity", "n", "a_m"]);
    let a2: f64 = rows[1][3].parse().unwrap();
    assert!((a2 - 1.9008845446).abs() < 1e-9);
    let line = text.lines().find(|l| l.starts_with("# crosscheck ")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&line["# crosscheck ".len()..]).unwrap();
    assert!(v["max_diff"].as_f64().unwrap() < 1e-8);
    assert_eq!(v["pairs"].as_array().unwrap().len(), 3);
}

#[test]
fn output_is_deterministic() {
    let args = ["census", "--a", "3", "--jobs", "2"];
    let first = stdout(&run(&args));
    let second = stdout(&run(&args));
    assert_eq!(first, second);
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["count"], 2);
    let ms: Vec<u64> = v["witnesses"].as_array().unwrap().iter().map(|w| w["m"].as_u64().unwrap()).collect();
    assert_eq!(ms, [2, 3]);
}

#[test]
fn branch_ends_at_a_max() {
    let o = run(&["branch", "--m", "2", "--a-max", "2.5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let (h, rows) = csv_rows(&text);
    assert_eq!(h, ["m", "parity", "a", "s", "z_count", "area", "residual", "turn_count"]);
    let a: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(a.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(*a.last().unwrap(), 2.5);
    assert!(rows.iter().all(|r| r[4] == "1"));
    assert!(text.lines().any(|l| l.starts_with("# asymptotics ")));
}

#[test]
fn strip_to_directory_as_json() {
    let dir = std::env::temp_dir().join(format!("minsphere-cli-{}", std::process::id()));
    let o = run(&["strip", "--points", "5", "--format", "json", "--out", dir.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("strip.json")).unwrap()).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0]["c_over_max"], 1e-3);
    let deltas: Vec<f64> = rows.iter().map(|r| r["Delta"].as_f64().unwrap()).collect();
    assert!(deltas.windows(2).all(|w| w[1] > w[0]));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn domain_errors_exit_nonzero() {
    let o = run(&["spectrum", "--a", "-1"]);
    assert!(!o.status.success());
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("semiaxes must be positive"), "{err}");

    let o = run(&["census", "--a", "0.5"]);
    assert!(!o.status.success());
    assert!(String::from_utf8(o.stderr).unwrap().contains("census needs a > d"));
}
