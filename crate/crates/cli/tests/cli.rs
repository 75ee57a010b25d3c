use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn antfab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_antfab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes a copy of the bundled patch job on a flat plate into `dir`, with
/// reference paths made absolute.
fn flat_job(dir: &Path, edit: impl Fn(String) -> String) -> PathBuf {
    let text = fs::read_to_string(repo().join("jobs/patch_conformal.job")).unwrap();
    let start = text.find("[surface.shape]").unwrap();
    let end = text.find("[settings]").unwrap();
    let fixtures = repo().join("fixtures");
    let text = format!(
        "{}[surface.shape]\nkind = \"plane\"\nwidth_mm = 80.0\nlength_mm = 80.0\n\n{}",
        &text[..start],
        &text[end..]
    )
    .replace("../fixtures", fixtures.to_str().unwrap());
    let path = dir.join("flat.job");
    fs::write(&path, edit(text)).unwrap();
    path
}

#[test]
fn design_prints_features_and_writes_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let job = repo().join("jobs/uwb_doublecurve.job");
    let o = antfab(&["design", "--job", job.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("feed_gap"));
    assert!(fs::read_to_string(tmp.path().join("layout.svg")).unwrap().contains("<svg"));
}

#[test]
fn zero_target_frequency_exits_with_design_error() {
    let tmp = tempfile::tempdir().unwrap();
    let job = flat_job(tmp.path(), |t| t.replace("f_target_hz = 3.0e9", "f_target_hz = 0.0"));
    let o = antfab(&["pipeline", "--job", job.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("design: f_target_hz must be > 0"), "{}", stderr(&o));
}

#[test]
fn compare_needs_two_curves() {
    let one = repo().join("fixtures/s11/patch_planar_measured.csv");
    let o = antfab(&["compare", one.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));

    let two = repo().join("fixtures/s11/patch_conformal_measured.csv");
    let o = antfab(&["compare", one.to_str().unwrap(), two.to_str().unwrap(), "--labels", "p,c"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("p,c,matched,"));
}

#[test]
fn pipeline_then_verify_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let job = flat_job(tmp.path(), |t| t);
    let out = tmp.path().join("out");
    let o = antfab(&["pipeline", "--job", job.to_str().unwrap(), "--out", out.to_str().unwrap(), "--flavor", "inverse-time"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!stdout(&o).contains("FAIL"));
    let gcode = out.join("conformal.gcode");
    assert!(fs::read_to_string(&gcode).unwrap().contains("\nG93\n"));

    let o = antfab(&["verify", "--job", job.to_str().unwrap(), "--gcode", gcode.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("\"violations\": []"));

    let bad = tmp.path().join("bad.gcode");
    fs::write(&bad, "G21\nG28\nM83\nG1 B95 F600\n").unwrap();
    let o = antfab(&["verify", "--job", job.to_str().unwrap(), "--gcode", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("joint_limit"));
}

#[test]
fn dimcheck_reports_fixture_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let job = repo().join("jobs/uwb_doublecurve.job");
    let o = antfab(&["dimcheck", "--job", job.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("conformal_a: 8 features") && s.contains("(feed_gap)"), "{s}");
    assert!(tmp.path().join("dim_error_table.csv").is_file());
}

#[test]
fn predict_rejects_uwb() {
    let job = repo().join("jobs/uwb_doublecurve.job");
    let tmp = tempfile::tempdir().unwrap();
    let o = antfab(&["predict", "--job", job.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("predict:"), "{}", stderr(&o));
}
