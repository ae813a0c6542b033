use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_motion-cue"));
    c.env("RUST_LOG", "warn");
    c
}

#[test]
fn synth_lap_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let lap = dir.path().join("lap.jsonl");
    let status = bin()
        .args([
            "synth-lap",
            "--profile",
            "default",
            "--duration",
            "10",
            "--rate",
            "62.5",
            "--seed",
            "1",
            "--out",
        ])
        .arg(&lap)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(std::fs::read_to_string(&lap).unwrap().lines().count(), 625);

    let out = dir.path().join("traces");
    let output = bin()
        .args(["replay", "--mode", "threshold", "--in"])
        .arg(&lap)
        .arg("--out-dir")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    let report = String::from_utf8(output.stdout).unwrap();
    assert!(report.contains("mode = threshold"), "{report}");
    assert!(report.contains("frames = 625"), "{report}");
    for f in [
        "cues.csv",
        "targets.csv",
        "joints.csv",
        "timing.csv",
        "report.txt",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("rig.toml");
    std::fs::write(&cfg, "[pipeline]\nmode = \"threshold\"\n").unwrap();
    let run = |extra: &[&str]| {
        let out = bin()
            .args(["bench", "--frames", "100", "--config"])
            .arg(&cfg)
            .args(extra)
            .output()
            .unwrap();
        assert!(out.status.success());
        String::from_utf8(out.stdout).unwrap()
    };
    assert!(run(&[]).contains("mode = threshold"));
    assert!(run(&["--mode", "smoothed"]).contains("mode = smoothed"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[guard]\nenter_g = 0.01\n").unwrap();
    let code = |args: &[&str]| bin().args(args).output().unwrap().status.code();

    assert_eq!(
        code(&[
            "bench",
            "--frames",
            "100",
            "--config",
            bad.to_str().unwrap()
        ]),
        Some(1)
    );
    assert_eq!(
        code(&[
            "bench",
            "--config",
            dir.path().join("missing.toml").to_str().unwrap()
        ]),
        Some(1)
    );
    assert_eq!(
        code(&[
            "replay",
            "--in",
            dir.path().join("missing.jsonl").to_str().unwrap()
        ]),
        Some(2)
    );
    assert_eq!(code(&["bench", "--frames", "10"]), Some(2));
    assert_eq!(
        code(&[
            "synth-lap",
            "--profile",
            "moon",
            "--out",
            dir.path().join("x.jsonl").to_str().unwrap()
        ]),
        Some(2)
    );
}
