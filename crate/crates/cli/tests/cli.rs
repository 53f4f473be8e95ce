//! End-to-end tests of the `dyad` binary: artifact determinism, the
//! audio-to-timeline path against simulator ground truth, and error
//! reporting.

use std::path::Path;
use std::process::Command;

use dyad_core::sim::boundary_f1;
use dyad_core::timeline::read_timeline_csv;

fn dyad() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dyad"))
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn simulate_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let status = dyad()
            .args(["simulate", "--preset", "table1", "--seed", "11"])
            .args(["--patients", "6", "--calls-per-patient", "4"])
            .arg("--out-dir")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    for file in
        ["timeline.csv", "meta.csv", "dialogue_features.csv", "rhythm_features.csv", "ground_truth.csv"]
    {
        assert_eq!(
            read(&a.join(file)),
            read(&b.join(file)),
            "{file} differs between identical runs"
        );
    }
}

#[test]
fn analyze_and_classify_are_deterministic_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert!(dyad()
        .args(["simulate", "--preset", "table1", "--seed", "3"])
        .args(["--patients", "12", "--calls-per-patient", "6"])
        .arg("--out-dir")
        .arg(&sim)
        .status()
        .unwrap()
        .success());

    let features = sim.join("dialogue_features.csv");
    let meta = sim.join("meta.csv");
    let rhythm = sim.join("rhythm_features.csv");

    let (a1, a2) = (dir.path().join("an1"), dir.path().join("an2"));
    for out in [&a1, &a2] {
        let status = dyad()
            .arg("analyze")
            .arg("--features")
            .arg(&features)
            .arg("--meta")
            .arg(&meta)
            .arg("--out-dir")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let report = a1.join("analysis_euthymic-vs-depressed.csv");
    let text = String::from_utf8(read(&report)).unwrap();
    assert!(text.starts_with(
        "feature,episode_pair,estimate,std_error,p_value,fdr_significant,interaction_p,diagnostics_flag"
    ));
    assert_eq!(text.lines().count(), 21, "header plus 20 features");
    assert_eq!(read(&report), read(&a2.join("analysis_euthymic-vs-depressed.csv")));

    let (c1, c2) = (dir.path().join("cl1"), dir.path().join("cl2"));
    for out in [&c1, &c2] {
        let status = dyad()
            .arg("classify")
            .arg("--features")
            .arg(&features)
            .arg("--rhythm")
            .arg(&rhythm)
            .arg("--meta")
            .arg(&meta)
            .args(["--task", "depression", "--classifiers", "logreg"])
            .args(["--feature-sets", "both", "--seed", "9"])
            .arg("--out-dir")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let report = String::from_utf8(read(&c1.join("report.csv"))).unwrap();
    assert!(report.starts_with("task,classifier,feature_set,speaker_id,auroc"));
    assert!(report.contains(",MEAN,"));
    assert_eq!(read(&c1.join("report.csv")), read(&c2.join("report.csv")));
}

#[test]
fn segment_matches_rendered_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert!(dyad()
        .args(["simulate", "--seed", "5", "--patients", "2", "--calls-per-patient", "1"])
        .args(["--render-audio", "1"])
        .arg("--out-dir")
        .arg(&sim)
        .status()
        .unwrap()
        .success());

    // Boundary-exact segmentation needs the 10 ms frame grid.
    let config_path = dir.path().join("seg.toml");
    std::fs::write(&config_path, "[segmentation.vad]\nframe_ms = 10\nhop_ms = 10\n").unwrap();

    let truth = read_timeline_csv(sim.join("timeline.csv")).unwrap();
    let call_id = truth[0].call_id.clone();
    let out = dir.path().join("seg");
    assert!(dyad()
        .arg("--config")
        .arg(&config_path)
        .arg("segment")
        .arg("--cellphone")
        .arg(sim.join(format!("{call_id}_cell.wav")))
        .arg("--landline")
        .arg(sim.join(format!("{call_id}_land.wav")))
        .args(["--call-id", &call_id])
        .arg("--out-dir")
        .arg(&out)
        .status()
        .unwrap()
        .success());

    let predicted = read_timeline_csv(out.join("timeline.csv")).unwrap();
    let f1 = boundary_f1(&truth[0], &predicted[0], 10);
    assert!(f1 >= 0.9, "boundary F1 {f1} below 0.9");
}

#[test]
fn missing_input_fails_with_named_path() {
    let dir = tempfile::tempdir().unwrap();
    let output = dyad()
        .arg("align")
        .args(["--cellphone", "/nonexistent/cell.wav"])
        .args(["--landline", "/nonexistent/land.wav"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("/nonexistent/cell.wav"),
        "stderr should name the missing path: {stderr}"
    );
    let _ = dir;
}

#[test]
fn pipeline_runs_from_timeline_csv() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert!(dyad()
        .args(["simulate", "--preset", "table1", "--seed", "8"])
        .args(["--patients", "10", "--calls-per-patient", "6"])
        .arg("--out-dir")
        .arg(&sim)
        .status()
        .unwrap()
        .success());

    let out = dir.path().join("pipe");
    let status = dyad()
        .arg("pipeline")
        .arg("--timeline")
        .arg(sim.join("timeline.csv"))
        .arg("--meta")
        .arg(sim.join("meta.csv"))
        .args(["--task", "depression", "--classifiers", "logreg", "--seed", "4"])
        .arg("--out-dir")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("dialogue_features.csv").exists());
    assert!(out.join("analysis_euthymic-vs-depressed.csv").exists());
    assert!(out.join("report.csv").exists());
    assert!(out.join("manifest_pipeline.json").exists());
}
