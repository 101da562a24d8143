use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn kstc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kstc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// The seven-object coffee/tea example, placed at its tabulated distances
/// from (0.5, 0.5) inside a unit bounding box.
fn fixture_tsv() -> String {
    let dist = [0.25, 0.2, 0.11, 0.18, 0.15, 0.1, 0.19];
    let angle = [45.0f64, 225.0, 0.0, 270.0, 0.0, 90.0, 180.0];
    let docs = [
        "coffee:0.2 tea:0.2",
        "coffee:0.2 tea:0.2",
        "coffee:0.5",
        "pizza:0.5",
        "tea:0.5",
        "coffee:0.5",
        "coffee:0.5 tea:0.5",
    ];
    let mut out = String::from("#bounds 0 0 1 1\n");
    for i in 0..7 {
        let r = dist[i] * std::f64::consts::SQRT_2;
        let t = angle[i].to_radians();
        let (x, y) = (0.5 + r * t.cos(), 0.5 + r * t.sin());
        out.push_str(&format!("p{}\t{x}\t{y}\t{}\n", i + 1, docs[i]));
    }
    out
}

fn write_fixture(dir: &TempDir) -> PathBuf {
    let p = path(dir, "fixture.tsv");
    fs::write(&p, fixture_tsv()).unwrap();
    p
}

fn fixture_query(input: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "query",
        "--input",
        s(input),
        "--lat",
        "0.5",
        "--lon",
        "0.5",
        "--keywords",
        "coffee,tea",
        "--k",
        "1",
        "--epsilon",
        "0.05",
        "--minpts",
        "2",
        "--alpha",
        "0.5",
    ];
    args.extend_from_slice(extra);
    kstc(&args)
}

/// Structural checks on a cluster FeatureCollection; returns the features.
fn features(text: &str) -> Vec<Value> {
    let v: Value = serde_json::from_str(text).expect("valid JSON");
    assert_eq!(v["type"], "FeatureCollection");
    let features = v["features"].as_array().expect("features array").clone();
    for (i, f) in features.iter().enumerate() {
        assert_eq!(f["type"], "Feature");
        assert_eq!(f["geometry"]["type"], "MultiPoint");
        let coords = f["geometry"]["coordinates"].as_array().unwrap();
        assert!(!coords.is_empty());
        for c in coords {
            let c = c.as_array().unwrap();
            assert_eq!(c.len(), 2);
            assert!(c.iter().all(|x| x.as_f64().unwrap().is_finite()));
        }
        let p = &f["properties"];
        assert_eq!(p["rank"].as_u64(), Some(i as u64 + 1));
        assert_eq!(p["size"].as_u64(), Some(coords.len() as u64));
        assert_eq!(p["ids"].as_array().unwrap().len(), coords.len());
        assert!(p["score"].as_f64().unwrap().is_finite());
    }
    let scores: Vec<f64> = features
        .iter()
        .map(|f| f["properties"]["score"].as_f64().unwrap())
        .collect();
    assert!(scores.windows(2).all(|w| w[0] <= w[1]), "{scores:?}");
    features
}

#[test]
fn fixture_query_returns_the_coffee_tea_pair() {
    let dir = TempDir::new().unwrap();
    let input = write_fixture(&dir);
    for variant in ["basic", "adv1", "adv2", "adv3"] {
        let out = fixture_query(&input, &["--scoring", "mean-mean", "--variant", variant]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let f = features(&stdout(&out));
        assert_eq!(f.len(), 1);
        let p = &f[0]["properties"];
        assert!((p["score"].as_f64().unwrap() - 0.315).abs() < 1e-9);
        assert_eq!(p["ids"], serde_json::json!(["p3", "p5"]));
        assert_eq!(f[0]["geometry"]["coordinates"].as_array().unwrap().len(), 2);
    }
    let out = fixture_query(&input, &[]);
    let f = features(&stdout(&out));
    assert!((f[0]["properties"]["score"].as_f64().unwrap() - 0.305).abs() < 1e-9);
}

#[test]
fn csv_output_lists_members() {
    let dir = TempDir::new().unwrap();
    let input = write_fixture(&dir);
    let out = fixture_query(&input, &["--format", "csv", "--scoring", "mean-mean"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "rank,score,object_id,x,y");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1,") && lines[1].contains(",p3,"));
    assert!(lines[2].contains(",p5,"));
}

#[test]
fn unknown_keywords_and_empty_files_give_empty_results() {
    let dir = TempDir::new().unwrap();
    let input = write_fixture(&dir);
    let out = kstc(&[
        "query",
        "--input",
        s(&input),
        "--lat",
        "0.5",
        "--lon",
        "0.5",
        "--keywords",
        "sushi",
    ]);
    assert_eq!(code(&out), 0);
    assert!(features(&stdout(&out)).is_empty());

    let empty = path(&dir, "empty.tsv");
    fs::write(&empty, "").unwrap();
    let out = fixture_query(&empty, &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(features(&stdout(&out)).is_empty());
}

#[test]
fn generate_build_query_round_trip() {
    let dir = TempDir::new().unwrap();
    let (data, queries, index) = (
        path(&dir, "d.tsv"),
        path(&dir, "q.json"),
        path(&dir, "i.json"),
    );
    let out = kstc(&[
        "generate",
        "--objects",
        "3000",
        "--seed",
        "5",
        "--out",
        s(&data),
        "--queries",
        "3",
        "--queries-out",
        s(&queries),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&data).unwrap().lines().count(), 3001);
    let qs: Vec<Value> = serde_json::from_str(&fs::read_to_string(&queries).unwrap()).unwrap();
    assert_eq!(qs.len(), 3);

    let out = kstc(&[
        "build",
        "--input",
        s(&data),
        "--out",
        s(&index),
        "--grid-orders",
        "4,6",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let mut found = 0;
    for q in &qs {
        let words: Vec<&str> = q["keywords"]
            .as_array()
            .unwrap()
            .iter()
            .map(|w| w.as_str().unwrap())
            .collect();
        let (lat, lon) = (q["lat"].to_string(), q["lon"].to_string());
        let kw = words.join(",");
        let common = [
            "--lat",
            lat.as_str(),
            "--lon",
            lon.as_str(),
            "--keywords",
            kw.as_str(),
            "--k",
            "5",
            "--epsilon",
            "0.01",
            "--minpts",
            "5",
        ];
        let run = |source: &[&str], variant: &str| {
            let mut args = vec!["query"];
            args.extend_from_slice(source);
            args.extend_from_slice(&common);
            args.extend_from_slice(&["--variant", variant]);
            let out = kstc(&args);
            assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
            stdout(&out)
        };
        let from_index = run(&["--index", s(&index)], "adv3");
        found += features(&from_index).len();
        assert_eq!(from_index, run(&["--input", s(&data)], "adv3"));
        assert_eq!(from_index, run(&["--index", s(&index)], "basic"));
    }
    assert!(found > 0);
}

#[test]
fn bench_is_deterministic_without_timing() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str| {
        let out_path = path(&dir, name);
        let out = kstc(&[
            "bench",
            "--sweep",
            "k",
            "--values",
            "5,10",
            "--queries",
            "3",
            "--objects",
            "3000",
            "--seed",
            "9",
            "--no-timing",
            "--out",
            s(&out_path),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        fs::read_to_string(out_path).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let lines: Vec<&str> = a.lines().collect();
    assert!(lines[0].starts_with("param,value,variant,queries,mean_range_queries"));
    assert!(!lines[0].contains("elapsed"));
    assert_eq!(lines.len(), 1 + 2 * 4);

    let out = kstc(&[
        "bench",
        "--sweep",
        "epsilon",
        "--values",
        "0.01",
        "--variants",
        "adv3",
        "--queries",
        "2",
        "--objects",
        "2000",
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out)
        .lines()
        .next()
        .unwrap()
        .ends_with(",mean_elapsed_ms"));
}

#[test]
fn exit_codes() {
    assert_eq!(code(&kstc(&["--help"])), 0);
    assert_eq!(code(&kstc(&["--version"])), 0);
    assert_eq!(code(&kstc(&[])), 1);
    assert_eq!(code(&kstc(&["query", "--lat", "0"])), 1);

    let dir = TempDir::new().unwrap();
    let input = write_fixture(&dir);
    // k = 0 and alpha outside [0, 1] are invalid queries
    assert_eq!(code(&fixture_query(&input, &["--k", "0"])), 1);
    assert_eq!(code(&fixture_query(&input, &["--alpha", "1.5"])), 1);
    assert_eq!(code(&fixture_query(&input, &["--epsilon", "-1"])), 1);

    let missing = path(&dir, "missing.tsv");
    assert_eq!(code(&fixture_query(&missing, &[])), 2);
    let bad = path(&dir, "bad.tsv");
    fs::write(&bad, "p1\tnot-a-number\t0.5\tcoffee:1\n").unwrap();
    let out = fixture_query(&bad, &[]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.tsv:1:"));
    let junk = path(&dir, "junk.json");
    fs::write(&junk, "{}").unwrap();
    let out = kstc(&[
        "query",
        "--index",
        s(&junk),
        "--lat",
        "0",
        "--lon",
        "0",
        "--keywords",
        "coffee",
    ]);
    assert_eq!(code(&out), 2);
}
