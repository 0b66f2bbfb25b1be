//! Runs the `ibr` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ibr::cli_io::SavedModel;

fn ibr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ibr")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_training(dir: &Path) -> std::path::PathBuf {
    let mut s = String::from("y,a,b\n");
    for i in 0..40 {
        let a = i as f64 / 39.0;
        let b = ((i * 17) % 40) as f64 / 40.0;
        let y = (4.0 * a).sin() + 0.5 * b + 0.05 * ((i * 7 % 5) as f64 - 2.0);
        s.push_str(&format!("{y},{a},{b}\n"));
    }
    let p = dir.join("train.csv");
    fs::write(&p, s).unwrap();
    p
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fit_then_predict_reproduces_fitted_values() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_training(dir.path());
    let model = dir.path().join("m.json");
    let o = ibr(&["fit", "--data", path(&data), "--response", "y", "--out", path(&model)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("Residual standard error"));
    assert!(out.contains("Number of iterations:") && out.contains("chosen by gcv"));
    assert!(out.contains("Base smoother: gaussian kernel"));

    let preds = dir.path().join("p.csv");
    let o = ibr(&["predict", "--model", path(&model), "--in", path(&data), "--out", path(&preds)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let saved = SavedModel::load(&model).unwrap();
    let text = fs::read_to_string(&preds).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("a,b,prediction"));
    let values: Vec<f64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(values.len(), 40);
    for (p, f) in values.iter().zip(&saved.fitted) {
        assert!((p - f).abs() < 1e-8);
    }
}

#[test]
fn predict_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_training(dir.path());
    let model = dir.path().join("m.json");
    assert!(ibr(&["fit", "--data", path(&data), "--smoother", "tps", "--out", path(&model)])
        .status
        .success());

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "a,b\n").unwrap();
    let o = ibr(&["predict", "--model", path(&model), "--in", path(&empty)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "a,b,prediction");

    let wrong = dir.path().join("wrong.csv");
    fs::write(&wrong, "q\n1\n").unwrap();
    let o = ibr(&["predict", "--model", path(&model), "--in", path(&wrong)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("a, b"), "{}", stderr(&o));

    let bogus = dir.path().join("bogus.json");
    fs::write(&bogus, r#"{"format": "other"}"#).unwrap();
    let o = ibr(&["predict", "--model", path(&bogus), "--in", path(&empty)]);
    assert!(!o.status.success());
}

#[test]
fn bad_input_is_reported_with_row() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "y,x\n1,2\n3,\n").unwrap();
    let o = ibr(&["fit", "--data", path(&data)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("row 2"), "{}", stderr(&o));
    let o = ibr(&["fit", "--data", path(&data), "--criterion", "nope"]);
    assert!(!o.status.success());
}

#[test]
fn fixed_and_cv_fits() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_training(dir.path());
    let o = ibr(&["fit", "--data", path(&data), "--iter", "7"]);
    assert!(stdout(&o).contains("Number of iterations: 7 (fixed)"), "{}", stdout(&o));
    let o = ibr(&[
        "fit",
        "--data",
        path(&data),
        "--criterion",
        "map",
        "--cv-kfold",
        "5",
        "--cv-type",
        "consecutive",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("chosen by map"));
}

#[test]
fn forward_writes_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_training(dir.path());
    let out = dir.path().join("r.csv");
    let o = ibr(&["forward", "--data", path(&data), "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("Selected variables (in order)"));
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "a,b");
    if rows.len() > 2 {
        // the variable taken at stage 1 is blank afterwards
        assert!(rows[2].starts_with(',') || rows[2].ends_with(','));
    }
}

#[test]
fn wendelberger_surface_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.csv");
    let o = ibr(&["bench", "wendelberger", "--seed", "3", "--out", path(&grid)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("Mean absolute error on the 50x50 grid"));
    let svg = dir.path().join("s.svg");
    let matrix = dir.path().join("z.txt");
    let o = ibr(&["surface", "--in", path(&grid), "--out", path(&svg), "--matrix", path(&matrix)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = fs::read_to_string(&svg).unwrap();
    assert!(first.starts_with("<svg"));
    let z = fs::read_to_string(&matrix).unwrap();
    assert_eq!(z.lines().count(), 50);
    assert!(z.lines().all(|l| l.split(' ').count() == 50));
    // deterministic output
    ibr(&["surface", "--in", path(&grid), "--out", path(&svg)]);
    assert_eq!(fs::read_to_string(&svg).unwrap(), first);

    let ragged = dir.path().join("ragged.csv");
    fs::write(&ragged, "x,y,fit\n0,0,1\n1,0,2\n0,1,3\n").unwrap();
    let o = ibr(&["surface", "--in", path(&ragged), "--out", path(&svg)]);
    assert!(!o.status.success());
}
