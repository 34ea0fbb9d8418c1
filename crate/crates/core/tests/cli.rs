mod common;

use std::path::Path;
use std::process::{Command, Output};

use semm::cli::{pair_metric, AnimationManifest, Metric};
use semm::edit::{EditSession, Keyframe};
use semm::io::{load_displacement, load_distance_field, save_displacement, save_distance_field};
use semm::losses::distance_field_loss;
use semm::mesh::{laplacian_smooth, load_obj, save_obj, uv_sphere};
use semm::model::{evaluate_split_losses, DetailModel, LatentCode};
use semm::structure::{distance_transform, extract_lines, LineEdit, Stroke};
use semm::synth::Corpus;
use tempfile::TempDir;

use common::{fixture, read};

fn semm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semm")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = semm(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn sample() -> (String, std::path::PathBuf) {
    let f = fixture();
    let id = f.corpus.test().next().unwrap().id.clone();
    let png = f.disp_png(&id);
    (id, png)
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = semm(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage"), "{err}");
    assert_eq!(semm(&["edit-age", "--model", "m"]).status.code(), Some(2));
    assert_eq!(semm(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_failures_exit_with_1() {
    let out = semm(&["decode", "--model", "/nonexistent.semm", "--code", "/nonexistent.json", "--out", "/tmp/x.png"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn in_process_runner_reports_exit_codes() {
    assert_eq!(semm::cli::run(["semm", "nope"]), 2);
    assert_eq!(semm::cli::run(["semm", "eval"]), 1);
}

#[test]
fn eval_pair_df_matches_the_library_bit_exactly() {
    let dir = TempDir::new().unwrap();
    let f = fixture();
    let mut samples = f.corpus.test();
    let (a, b) = (samples.next().unwrap(), samples.next().unwrap());
    let (pa, pb) = (dir.path().join("a.df.png"), dir.path().join("b.df.png"));
    save_distance_field(&pa, &a.sample.df).unwrap();
    save_distance_field(&pb, &b.sample.df).unwrap();
    let printed: f64 = ok(&["eval", "--pair", s(&pa), s(&pb), "--metric", "df"]).trim().parse().unwrap();
    let (la, lb) = (load_distance_field(&pa).unwrap(), load_distance_field(&pb).unwrap());
    let lib = distance_field_loss(&la, &lb, la.truncation()).unwrap();
    assert_eq!(printed.to_bits(), lib.to_bits());
    assert_eq!(pair_metric(&pa, &pb, Metric::Df).unwrap().to_bits(), lib.to_bits());

    let (_, disp) = sample();
    let printed: f64 = ok(&["eval", "--pair", s(&disp), s(&disp), "--metric", "perceptual"]).trim().parse().unwrap();
    assert_eq!(printed, 0.0);
}

#[test]
fn train_then_eval_reproduces_recorded_losses() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("train.toml");
    std::fs::write(&cfg, toml::to_string(&common::small_train_config()).unwrap()).unwrap();
    let model = dir.path().join("m.semm");
    ok(&["train", "--corpus", s(&f.corpus_dir()), "--out", s(&model), "--config", s(&cfg)]);
    let printed: serde_json::Value = serde_json::from_str(&ok(&["eval", "--model", s(&model), "--corpus", s(&f.corpus_dir()), "--split", "train"])).unwrap();
    let m = DetailModel::load(&model).unwrap();
    let recorded = m.metadata.final_losses.clone().unwrap();
    for (key, want) in [("total", recorded.total), ("rec", recorded.rec), ("structure", recorded.structure), ("cycle", recorded.cycle)] {
        let got = printed[key].as_f64().unwrap();
        assert!((got - want).abs() <= 1e-6, "{key}: {got} vs {want}");
    }
    // Same seed, same bytes.
    assert_eq!(read(&model), read(f.model_path()));
}

#[test]
fn synth_corpus_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&["synth-corpus", "--out", s(d), "--subjects", "3", "--expressions", "2", "--resolution", "64", "--seed", "9"]);
    }
    let ca = Corpus::load(&a).unwrap();
    assert_eq!(ca, Corpus::load(&b).unwrap());
    let sid = ca.samples[0].subject_id;
    let file = format!("subject_{sid:04}/{}.disp.png", ca.samples[0].id);
    assert_eq!(read(a.join(&file)), read(b.join(&file)));
    assert_eq!(read(a.join("manifest.json")), read(b.join("manifest.json")));
}

#[test]
fn encode_decode_round_trip() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let (_, disp) = sample();
    let code = dir.path().join("z.json");
    ok(&["encode", "--model", s(&f.model_path()), "--disp", s(&disp), "--out", s(&code)]);
    let z: LatentCode = serde_json::from_str(&std::fs::read_to_string(&code).unwrap()).unwrap();
    let d = load_displacement(&disp).unwrap();
    let df = distance_transform(&extract_lines(&d));
    assert_eq!(z, f.model.encode_rasters(d.grid(), df.grid()).unwrap());
    let out = dir.path().join("dec.png");
    ok(&["decode", "--model", s(&f.model_path()), "--code", s(&code), "--out", s(&out)]);
    let lib = dir.path().join("lib.png");
    save_displacement(&lib, &f.model.decode(&z).unwrap().0).unwrap();
    assert_eq!(read(&out), read(&lib));
}

#[test]
fn edit_commands_match_the_library() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let (_, disp) = sample();
    let model = s(&f.model_path()).to_owned();
    let base = ["--model", model.as_str(), "--disp", s(&disp), "--age", "30"];
    let session = || EditSession::from_displacement(f.model.clone(), load_displacement(&disp).unwrap(), 30.0).unwrap();
    let lib_png = |name: &str, d: &semm::raster::DisplacementMap| {
        let p = dir.path().join(name);
        save_displacement(&p, d).unwrap();
        read(p)
    };

    let out = dir.path().join("expr.png");
    ok(&[&["edit-expression"], &base[..], &["--weights", "0,1,0,0,0.5,0,0,0", "--out", s(&out)]].concat());
    let want = session().edit_expression(&[0.0, 1.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0]).unwrap();
    assert_eq!(read(&out), lib_png("expr-lib.png", &want.sample.disp));

    let out = dir.path().join("age.png");
    ok(&[&["edit-age"], &base[..], &["--target", "62", "--out", s(&out)]].concat());
    assert_eq!(read(&out), lib_png("age-lib.png", &session().edit_age(62.0).unwrap().sample.disp));

    let edit = LineEdit::new(vec![Stroke::draw(vec![[4.0, 4.0], [40.0, 20.0]]), Stroke::erase(vec![[0.0, 60.0], [63.0, 60.0]], 3.0)]);
    let edit_path = dir.path().join("edit.json");
    std::fs::write(&edit_path, serde_json::to_string(&edit).unwrap()).unwrap();
    let (out, lines) = (dir.path().join("lines.png"), dir.path().join("lines.lines.png"));
    ok(&[&["edit-lines"], &base[..], &["--edit", s(&edit_path), "--refine-steps", "20", "--out", s(&out), "--lines-out", s(&lines)]].concat());
    let mut sess = session();
    let want = sess.edit_lines(&edit, 20).unwrap();
    assert_eq!(read(&out), lib_png("lines-lib.png", &want.sample.disp));
    assert_eq!(semm::io::load_lines(&lines).unwrap(), *sess.lines());

    let out = dir.path().join("bad.png");
    let bad = semm(&[&["edit-age"], &base[..], &["--target", "90", "--out", s(&out)]].concat());
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn animate_writes_frames_and_manifest() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let (_, disp) = sample();
    let mut key = vec![0.0; 8];
    key[3] = 1.0;
    let kf = serde_json::json!({ "keyframes": [
        Keyframe { time: 0.0, weights: vec![0.0; 8] },
        Keyframe { time: 0.5, weights: key },
    ] });
    let kf_path = dir.path().join("kf.json");
    std::fs::write(&kf_path, kf.to_string()).unwrap();
    let out = dir.path().join("frames");
    ok(&["animate", "--model", s(&f.model_path()), "--disp", s(&disp), "--keyframes", s(&kf_path), "--fps", "10", "--out-dir", s(&out)]);
    let manifest: AnimationManifest = serde_json::from_slice(&read(out.join("manifest.json"))).unwrap();
    assert_eq!(manifest.frames.len(), 6);
    assert_eq!(manifest.weights[5][3], 1.0);
    for name in &manifest.frames {
        assert_eq!(load_displacement(out.join(name)).unwrap().resolution(), 64);
    }
}

#[test]
fn extract_lines_bake_and_apply() {
    let dir = TempDir::new().unwrap();
    let (_, disp) = sample();
    let (lines, df) = (dir.path().join("l.png"), dir.path().join("df.png"));
    ok(&["extract-lines", "--disp", s(&disp), "--out", s(&lines), "--df-out", s(&df)]);
    let want = extract_lines(&load_displacement(&disp).unwrap());
    assert_eq!(semm::io::load_lines(&lines).unwrap(), want);
    assert_eq!(load_distance_field(&df).unwrap().values().len(), 64 * 64);

    let sphere = uv_sphere(24, 48, 1.0);
    let (mesh, smooth) = (dir.path().join("sphere.obj"), dir.path().join("smooth.obj"));
    save_obj(&mesh, &sphere).unwrap();
    save_obj(&smooth, &laplacian_smooth(&sphere, 3, 0.5).unwrap()).unwrap();
    let baked = dir.path().join("baked.png");
    ok(&["bake", "--mesh", s(&mesh), "--smooth", s(&smooth), "--resolution", "64", "--out", s(&baked)]);
    assert_eq!(load_displacement(&baked).unwrap().resolution(), 64);
    let applied = dir.path().join("applied.obj");
    ok(&["apply", "--mesh", s(&smooth), "--disp", s(&baked), "--out", s(&applied)]);
    assert_eq!(load_obj(&applied).unwrap().vertices().len(), sphere.vertices().len());
}

#[test]
fn split_losses_are_reproducible_from_the_library() {
    let f = fixture();
    let samples: Vec<_> = f.corpus.train().collect();
    let cfg = f.model.metadata.train_config.clone().unwrap();
    let a = evaluate_split_losses(&f.model, &samples, &cfg.weights_for(64), cfg.eval_items, cfg.seed).unwrap();
    let recorded = f.model.metadata.final_losses.clone().unwrap();
    assert!((a.total - recorded.total).abs() <= 1e-6);
}
