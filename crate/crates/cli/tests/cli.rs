use std::path::Path;
use std::process::{Command, Output};

fn greenroom(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_greenroom"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn greenroom")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_log_and_transcript() {
    let tmp = tempfile::tempdir().unwrap();
    let o = greenroom(&["run", "--generations", "2", "--out", "out"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let log = std::fs::read_to_string(tmp.path().join("out/run.jsonl")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("{\"type\":\"header\""));
    assert!(lines[3].starts_with("{\"type\":\"end\""));
    assert!(!log.contains("wall_time_ms"));
    assert!(tmp.path().join("out/transcript.txt").exists());

    let o = greenroom(&["report", "out/run.jsonl"], tmp.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("generations:          2"), "{text}");
    assert!(text.contains("first disagreement:   none"));
    assert!(text.contains("energy consistent:    yes"));

    let o = greenroom(&["report", "--json", "out/run.jsonl"], tmp.path());
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(json["best_ff"].as_array().unwrap().len(), 2);

    let o = greenroom(&["transcript", "out/transcript.txt"], tmp.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("TestBatch"));
}

#[test]
fn report_is_a_pure_function_of_the_log() {
    let tmp = tempfile::tempdir().unwrap();
    greenroom(
        &["run", "--generations", "3", "--out", "out", "--wall-time"],
        tmp.path(),
    );
    let a = greenroom(&["report", "out/run.jsonl"], tmp.path());
    let b = greenroom(&["report", "out/run.jsonl"], tmp.path());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn config_file_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("shift.toml"),
        "[[faults]]\ntemplate_id = 0\nkind = \"boundary-shift\"\nmagnitude = 5.0\n",
    )
    .unwrap();
    std::fs::create_dir(tmp.path().join("conf")).unwrap();
    std::fs::write(
        tmp.path().join("conf/c.toml"),
        "scenario = \"../shift.toml\"\nstop_on_first_disagreement = true\n",
    )
    .unwrap();
    let o = greenroom(
        &[
            "run",
            "--config",
            "conf/c.toml",
            "--mode",
            "random-search",
            "--seed",
            "3",
            "--out",
            "o",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!stdout(&o).contains("first disagreement: none"), "{}", stdout(&o));
    let header = std::fs::read_to_string(tmp.path().join("o/run.jsonl")).unwrap();
    let header: serde_json::Value = serde_json::from_str(header.lines().next().unwrap()).unwrap();
    assert_eq!(header["config"]["mode"], "random-search");
    assert_eq!(header["seeds"]["search"], 3);
    assert_eq!(header["scenario"]["faults"][0]["kind"], "boundary-shift");
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.toml"), "[fitnes]\nalpha_fail = 1.0\n").unwrap();
    let o = greenroom(&["run", "--config", "bad.toml", "--out", "o"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("fitnes"), "{}", stderr(&o));

    std::fs::write(tmp.path().join("s.toml"), "scenario = \"builtin:nope\"\n").unwrap();
    let o = greenroom(&["run", "--config", "s.toml", "--out", "o"], tmp.path());
    assert_eq!(o.status.code(), Some(1));

    let o = greenroom(&["run", "--generations", "0", "--out", "o"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("search.generations"));

    let o = greenroom(&["run", "--bogus"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn dead_link_aborts_with_two_and_leaves_a_valid_log() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("dead.toml"), "[faults]\ndrop_frame_prob = 1.0\n").unwrap();
    let o = greenroom(&["run", "--config", "dead.toml", "--out", "o"], tmp.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("unreachable"));
    let o = greenroom(&["report", "o/run.jsonl"], tmp.path());
    assert!(o.status.success());
    assert!(
        stdout(&o).contains("run status:           aborted"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn catalog_lists_twenty_templates() {
    let tmp = tempfile::tempdir().unwrap();
    let o = greenroom(&["catalog", "--json"], tmp.path());
    assert!(o.status.success());
    let lines: Vec<serde_json::Value> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 20);
    assert_eq!(lines[0]["input_max"], 85.0);
    let o = greenroom(&["catalog"], tmp.path());
    assert!(stdout(&o).contains("sha256"));
}
