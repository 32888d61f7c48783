use std::f64::consts::PI;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carnot-cut"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("valid JSON on stdout")
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn heisenberg_geodesic_closes_at_two_pi() {
    let o = run(&[
        "geodesic",
        "--covector",
        r#"{"xi":[[1]],"eta":[0],"tau":[1]}"#,
        "--times",
        &format!("{}", 2.0 * PI),
        "--format",
        "csv",
        "--check",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(!text.contains('\r'));
    let (header, rows) = csv_rows(&text);
    assert_eq!(header, ["s", "x_11", "y_1", "t_1"]);
    let v: Vec<f64> = rows[0].iter().map(|c| c.parse().unwrap()).collect();
    assert!(v[1].abs() < 1e-12 && v[2].abs() < 1e-12 && (v[3] - PI).abs() < 1e-12);
    // 17 significant digits.
    assert!(rows[0].iter().all(|c| c.split('e').next().unwrap().trim_start_matches('-').len() == 18));
}

#[test]
fn straight_line_without_tau() {
    let o = run(&["geodesic", "--covector", r#"{"xi":[[1,0]],"eta":[0.5],"tau":[0,0]}"#, "--times", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let row = &json(&o)[0]["point"];
    assert_eq!(row["x"], serde_json::json!([[2.0, 0.0]]));
    assert_eq!(row["y"], serde_json::json!([1.0]));
    assert_eq!(row["t"], serde_json::json!([0.0, 0.0]));
}

#[test]
fn check_failure_exits_three() {
    // An unattainable tolerance makes the flow comparison fail.
    let o = run(&[
        "geodesic",
        "--covector",
        r#"{"xi":[[1,0.3]],"eta":[0.5],"tau":[2,1]}"#,
        "--times",
        "3",
        "--check",
        "--tol",
        "1e-30",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn classify_examples() {
    let o = run(&["classify", "--point", r#"{"q":2,"p":1,"x":[[0,0]],"y":[0],"t":[1,0]}"#]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["verdict"], "cut");
    assert_eq!(v["multiplicity"], "multiple");
    assert!((v["distance"].as_f64().unwrap() - (4.0 * PI).sqrt()).abs() < 1e-12);
    assert!(v["covector"]["tau"].is_array());

    let o = run(&["classify", "--point", r#"{"q":2,"p":1,"x":[[1,0]],"y":[0],"t":[0,0]}"#]);
    assert_eq!(json(&o)["verdict"], "not_cut");
    let o = run(&["classify", "--point", r#"{"q":1,"p":1,"x":[[0]],"y":[1],"t":[1]}"#]);
    assert_eq!(json(&o)["verdict"], "not_cut");
}

#[test]
fn classify_relative_to_a_base_point() {
    let base = r#"{"q":1,"p":1,"x":[[0.5]],"y":[-1],"t":[2]}"#;
    // base · (0, 0, 1) = (0.5, -1, 3).
    let o = run(&["classify", "--point", r#"{"q":1,"p":1,"x":[[0.5]],"y":[-1],"t":[3]}"#, "--from", base]);
    assert_eq!(json(&o)["verdict"], "cut");
}

#[test]
fn exit_codes() {
    let origin = r#"{"q":2,"p":1,"x":[[0,0]],"y":[0],"t":[0,0]}"#;
    assert_eq!(run(&["classify", "--point", origin]).status.code(), Some(4));
    assert_eq!(run(&["classify", "--point", "{not json"]).status.code(), Some(2));
    assert_eq!(run(&["classify", "--point", r#"{"q":2,"p":1,"x":[[0]],"y":[0],"t":[1,0]}"#]).status.code(), Some(2));
    let p = r#"{"q":2,"p":1,"x":[[1,0]],"y":[0],"t":[0,1]}"#;
    assert_eq!(run(&["classify", "--point", p, "--shape", "3,1"]).status.code(), Some(2));
    assert_eq!(run(&["sample", "sigma", "--shape", "2,2"]).status.code(), Some(2));
    assert_eq!(run(&["sample", "sphere"]).status.code(), Some(2));
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    let o = run(&["oracle", "--point", p, "--method", "shoot", "--starts", "1", "--max-iterations", "1", "--tol", "1e-15"]);
    assert_eq!(o.status.code(), Some(5));
    // --compare off the cut locus has no closed form.
    let off = r#"{"q":2,"p":1,"x":[[1,0]],"y":[0.2],"t":[0,1]}"#;
    assert_eq!(run(&["oracle", "--point", off, "--compare", "--starts", "2"]).status.code(), Some(4));
}

#[test]
fn oracle_compare_matches_closed_form_and_is_deterministic() {
    let p = r#"{"q":2,"p":1,"x":[[0.4,0]],"y":[0],"t":[0.1,1.2]}"#;
    let args = ["oracle", "--point", p, "--compare", "--method", "shoot", "--seed", "7"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert!(v["shoot"]["delta"].as_f64().unwrap().abs() < 1e-6, "{v}");
}

#[test]
fn cutlocus_samples_round_trip_through_classify() {
    let o = run(&["sample", "cutlocus", "--shape", "3,2", "--count", "30", "--seed", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(&header[..6], ["x_11", "x_21", "x_31", "x_12", "x_22", "x_32"]);
    let (yi, ti) = (header.iter().position(|h| h == "y_1").unwrap(), header.iter().position(|h| h == "t_1").unwrap());
    let verdict = header.iter().position(|h| h == "verdict").unwrap();
    let mut unique = 0;
    for row in &rows {
        assert_eq!(row[verdict], "cut");
        unique += usize::from(row[verdict + 1] == "unique");
        let f: Vec<f64> = row[..verdict].iter().map(|c| c.parse().unwrap()).collect();
        assert!(f[yi..ti].iter().all(|&y| y == 0.0));
        let point = serde_json::json!({
            "q": 3, "p": 2,
            "x": [f[0..3].to_vec(), f[3..6].to_vec()],
            "y": f[yi..ti].to_vec(),
            "t": f[ti..].to_vec(),
        });
        let c = json(&run(&["classify", "--point", &point.to_string()]));
        assert_eq!(c["verdict"], "cut");
        assert_eq!(c["multiplicity"], row[verdict + 1].as_str());
        let d: f64 = row[verdict + 3].parse().unwrap();
        assert_eq!(c["distance"].as_f64().unwrap(), d);
    }
    assert!(unique > 0);
}

#[test]
fn sphere_samples_on_the_cut_locus_have_unit_distance() {
    let o = run(&["sample", "sphere", "--shape", "2,2", "--count", "40", "--seed", "1", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = json(&o);
    let mut cut = 0;
    for r in rows.as_array().unwrap() {
        if r["verdict"] == "cut" {
            cut += 1;
            assert!((r["distance"].as_f64().unwrap() - 1.0).abs() < 1e-9);
        }
    }
    assert!(cut >= 10);
}

#[test]
fn sigma_samples_lie_on_the_zero_set() {
    let o = run(&["sample", "sigma", "--shape", "3,1", "--count", "50", "--seed", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = csv_rows(&stdout(&o));
    let psi = header.iter().position(|h| h == "psi").unwrap();
    assert_eq!(rows.len(), 50);
    for row in &rows {
        assert!(row[psi].parse::<f64>().unwrap().abs() < 1e-10);
        assert!(row[psi + 1].parse::<f64>().unwrap() < 0.0);
    }
    let again = run(&["sample", "sigma", "--shape", "3,1", "--count", "50", "--seed", "2"]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn output_to_file() {
    let dir = std::env::temp_dir().join(format!("carnot-cut-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("g.json");
    let o = run(&[
        "geodesic",
        "--covector",
        r#"{"xi":[[1]],"eta":[0],"tau":[1]}"#,
        "--times",
        "1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v[0]["s"], 1.0);
    std::fs::remove_dir_all(&dir).unwrap();
}
