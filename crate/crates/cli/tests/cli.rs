use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tablestruct::table_model::derive_aligned_boxes;
use tablestruct::TableAnnotation;

fn tablestruct(args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_tablestruct")).args(args).output().unwrap();
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Stage outputs without run reports, which record per-command configuration.
fn outputs(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    files(root)
        .into_iter()
        .filter(|(k, _)| !k.to_str().unwrap().ends_with("_report.json"))
        .collect()
}

fn annotations(corpus: &Path) -> Vec<TableAnnotation<f64>> {
    read_json(&corpus.join("manifest.json"))["members"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| {
            let p = corpus.join(m["name"].as_str().unwrap()).join("annotation.json");
            TableAnnotation::from_json(&std::fs::read_to_string(p).unwrap()).unwrap()
        })
        .collect()
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(tablestruct(&["synth", "--output", s(&a), "--n", "10", "--seed", "7"]), 0);
    assert_eq!(tablestruct(&["synth", "--output", s(&b), "--n", "10", "--seed", "7"]), 0);
    let strip = |m: BTreeMap<PathBuf, Vec<u8>>| -> BTreeMap<PathBuf, Vec<u8>> {
        m.into_iter().filter(|(k, _)| k != Path::new("synth_report.json")).collect()
    };
    assert_eq!(strip(files(&a)), strip(files(&b)));
    assert_eq!(annotations(&a).len(), 10);
}

#[test]
fn synth_without_empty_cells() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c");
    assert_eq!(tablestruct(&["synth", "--output", s(&c), "--n", "25", "--empty-prob", "0"]), 0);
    assert!(annotations(&c).iter().all(|a| a.cells.iter().all(|c| !c.is_empty())));
}

#[test]
fn pipeline_matches_manual_stages() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c");
    let (p, m) = (dir.path().join("p"), dir.path().join("m"));
    assert_eq!(tablestruct(&["synth", "--output", s(&c), "--n", "15", "--seed", "3", "--jitter", "0.1"]), 0);
    assert_eq!(tablestruct(&["pipeline", "--input", s(&c), "--output", s(&p)]), 0);
    for stage in ["targets", "refine", "recover", "eval"] {
        assert_eq!(tablestruct(&[stage, "--input", s(&c), "--output", s(&m)]), 0, "{stage}");
    }
    let (piped, manual) = (outputs(&p), outputs(&m));
    assert_eq!(piped.keys().collect::<Vec<_>>(), manual.keys().collect::<Vec<_>>());
    for (k, v) in &piped {
        assert!(v == &manual[k], "{} differs", k.display());
    }
}

#[test]
fn noiseless_pipeline_scores_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let (c, w) = (dir.path().join("c"), dir.path().join("w"));
    assert_eq!(tablestruct(&["synth", "--output", s(&c), "--n", "20", "--seed", "11"]), 0);
    assert_eq!(tablestruct(&["pipeline", "--input", s(&c), "--output", s(&w), "--format", "html"]), 0);
    let eval = read_json(&w.join("eval.json"));
    assert_eq!(eval["corpus"]["f1"], 1.0);
    assert_eq!(eval["corpus"]["teds_struc"], 1.0);
    assert!(w.join("table_00000").join("grid.html").is_file());
    let report = read_json(&w.join("recover_report.json"));
    assert_eq!(report["config"]["opts"]["merge_ratio"], 0.5);
}

#[test]
fn two_refinement_passes_stay_within_a_pixel() {
    let dir = tempfile::tempdir().unwrap();
    let (c, w) = (dir.path().join("c"), dir.path().join("w"));
    assert_eq!(tablestruct(&["synth", "--output", s(&c), "--n", "10", "--seed", "5", "--jitter", "0.2"]), 0);
    assert_eq!(tablestruct(&["refine", "--input", s(&c), "--output", s(&w), "--iterations", "2"]), 0);
    for (name, ann) in ["table_00000", "table_00001", "table_00002"].iter().zip(annotations(&c)) {
        let aligned = derive_aligned_boxes(&ann).unwrap();
        let refined = read_json(&w.join(name).join("refined.json"));
        for b in refined["boxes"].as_array().unwrap() {
            let truth = aligned[&b["id"].as_u64().unwrap()].to_array();
            let got: Vec<f64> = b["rect"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
            for i in 0..4 {
                assert!((got[i] - truth[i]).abs() <= 1.0, "{name} box {}: {got:?} vs {truth:?}", b["id"]);
            }
        }
    }
}

#[test]
fn recover_single_box() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("boxes.json");
    std::fs::write(&input, r#"{"image_width": 50, "image_height": 30, "boxes": [{"id": 3, "rect": [5, 5, 40, 20]}]}"#).unwrap();
    let out = dir.path().join("grid.json");
    assert_eq!(tablestruct(&["recover", "--input", s(&input), "--output", s(&out)]), 0);
    let grid = read_json(&out);
    assert_eq!(grid["cells"].as_array().unwrap().len(), 1);
    assert_eq!(grid["cells"][0]["row"], serde_json::json!([0, 0]));
    assert!(grid["h_edges"].as_array().unwrap().is_empty());
    assert!(dir.path().join("grid.json.report.json").is_file());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid.json");

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"image_width": 50, "image_height": 30, "boxes": [{"id": 0, "rect": [5, 5, 4, 20]}]}"#).unwrap();
    assert_eq!(tablestruct(&["recover", "--input", s(&bad), "--output", s(&out)]), 1);
    let report = read_json(&dir.path().join("grid.json.report.json"));
    assert_eq!(report["members"][0]["status"], "format-error");

    // two cells claiming the same grid position
    let clash = dir.path().join("clash.json");
    std::fs::write(
        &clash,
        r#"{"image_width": 50, "image_height": 30, "boxes": [{"id": 0, "rect": [5, 5, 20, 20]}, {"id": 1, "rect": [5, 5, 20, 20]}]}"#,
    )
    .unwrap();
    assert_eq!(tablestruct(&["recover", "--input", s(&clash), "--output", s(&out)]), 2);
    assert!(!out.exists());

    assert_eq!(tablestruct(&["recover", "--input", s(&dir.path().join("missing.json")), "--output", s(&out)]), 1);
    assert_eq!(tablestruct(&["refine", "--input", s(&clash), "--output", s(&out), "--iterations", "0"]), 1);
}

#[test]
fn single_file_commands() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c");
    assert_eq!(tablestruct(&["synth", "--output", s(&c), "--n", "1", "--seed", "9"]), 0);
    let member = c.join("table_00000");
    let o = dir.path().join("o");
    let ann = member.join("annotation.json");
    assert_eq!(tablestruct(&["targets", "--input", s(&ann), "--output", s(&o.join("t")), "--pgm"]), 0);
    let index = read_json(&o.join("t").join("index.json"));
    assert!(o.join("t").join(index["global"]["seg"].as_str().unwrap()).is_file());
    assert!(o.join("t").join("global_seg.pgm").is_file());

    let refined = o.join("refined.json");
    assert_eq!(tablestruct(&["refine", "--input", s(&member.join("prediction/bundle.json")), "--output", s(&refined)]), 0);
    let grid = o.join("grid.json");
    let seg = member.join("prediction/global_seg.map");
    assert_eq!(tablestruct(&["recover", "--input", s(&refined), "--seg", s(&seg), "--output", s(&grid)]), 0);
    let html = o.join("grid.html");
    assert_eq!(tablestruct(&["recover", "--input", s(&refined), "--output", s(&html), "--format", "html"]), 0);
    assert!(std::fs::read_to_string(&html).unwrap().starts_with("<table>"));
    let scores = o.join("eval.json");
    assert_eq!(tablestruct(&["eval", "--input", s(&grid), "--gt", s(&ann), "--output", s(&scores)]), 0);
    assert_eq!(read_json(&scores)["corpus"]["f1"], 1.0);
    assert_eq!(tablestruct(&["eval", "--input", s(&grid), "--output", s(&scores)]), 1);
}

#[test]
fn eval_counts_missing_grids_as_failures() {
    let dir = tempfile::tempdir().unwrap();
    let (c, w) = (dir.path().join("c"), dir.path().join("w"));
    assert_eq!(tablestruct(&["synth", "--output", s(&c), "--n", "3", "--seed", "1"]), 0);
    assert_eq!(tablestruct(&["pipeline", "--input", s(&c), "--output", s(&w)]), 0);
    std::fs::remove_file(w.join("table_00001").join("grid.json")).unwrap();
    assert_eq!(tablestruct(&["eval", "--input", s(&c), "--output", s(&w)]), 1);
    let eval = read_json(&w.join("eval.json"));
    assert_eq!(eval["corpus"]["failed"], 1);
    assert!(eval["corpus"]["recall"].as_f64().unwrap() < 1.0);
    assert_eq!(eval["documents"][1]["teds_struc"], 0.0);
}
