use std::path::PathBuf;
use std::process::{Command, Output};

fn program(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("programs")
        .join(name)
        .display()
        .to_string()
}

fn eal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn check_reports_depth_and_failures() {
    let o = eal(&["check", &program("dup_under_bang.eal")]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "well-formed at depth 1");

    let o = eal(&["check", &program("p_bad.eal"), "--json"]);
    assert_eq!(code(&o), 1);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["rule"], "DepthMismatch");

    for f in ["prog_b.eal", "prog_d.eal"] {
        let o = eal(&["check", &program(f)]);
        assert_eq!(code(&o), 1, "{f}");
        assert!(stdout(&o).contains("RegionDepthConflict"), "{f}: {}", stdout(&o));
    }

    let o = eal(&["check", &program("prog_c.eal"), "--json", "--derivation"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["regions"]["r"], 1);
    assert_eq!(v["regions"]["r'"], 2);
    assert!(v["derivation"].is_object());
}

#[test]
fn type_reports_types_and_mismatches() {
    let o = eal(&["type", &program("prog_a.eal")]);
    assert_eq!((code(&o), stdout(&o).trim()), (0, "!1"));
    let o = eal(&["type", &program("example2.eal"), "--json"]);
    assert_eq!(stdout(&o).trim(), r#"{"type":"1"}"#);
    let o = eal(&["type", &program("deadlock.eal")]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).starts_with("TypeError"));
}

#[test]
fn usage_and_input_errors_exit_2() {
    assert_eq!(code(&eal(&["check", "/nonexistent.eal"])), 2);
    assert_eq!(code(&eal(&["frobnicate"])), 2);
    assert_eq!(
        code(&eal(&[
            "run",
            &program("dup_under_bang.eal"),
            "--seed",
            "1",
            "--exhaustive"
        ])),
        2
    );
    let dir = std::env::temp_dir().join(format!("eal-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.eal");
    std::fs::write(&bad, "\\x. (").unwrap();
    assert_eq!(code(&eal(&["check", bad.to_str().unwrap()])), 2);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn run_traces_example_two() {
    let o = eal(&["run", &program("example2.eal"), "--deterministic", "--trace"]);
    assert_eq!(code(&o), 0);
    let lines: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["ruleTag"], "GetCopy");
    assert_eq!(lines[1]["ruleTag"], "SetWrite");

    let o = eal(&["run", &program("example2.eal"), "--trace-measure"]);
    let first: serde_json::Value = serde_json::from_str(stdout(&o).lines().next().unwrap()).unwrap();
    assert!(first["measure"].is_array() && first["tower"].is_string());

    let o = eal(&["run", &program("run.eal"), "--max-steps", "3"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn seeded_traces_are_byte_identical() {
    let a = eal(&["run", &program("run_threads.eal"), "--seed", "7", "--trace"]);
    let b = eal(&["run", &program("run_threads.eal"), "--seed", "7", "--trace"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn exhaustive_run_lists_finals() {
    let o = eal(&["run", &program("run_threads.eal"), "--exhaustive", "--json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["finals"].as_array().unwrap().len(), 1);
}

#[test]
fn bound_and_enumerate() {
    let o = eal(&["bound", &program("dup_under_bang.eal"), "--json"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["alpha"], 1);
    assert_eq!(v["mu"], serde_json::json!([5, 6]));
    assert_eq!(v["tower"], num_bigint::BigUint::from(5u32).pow(64).to_string());
    let o = eal(&["bound", &program("p_bad.eal")]);
    assert_eq!(code(&o), 1);

    let o = eal(&["enumerate", &program("example2.eal"), "--json"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(!v.as_array().unwrap().is_empty());
}

#[test]
fn stdlib_commands() {
    let o = eal(&["stdlib", "list", "--json"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(v.as_array().unwrap().iter().any(|e| e["name"] == "mult"));
    assert_eq!(code(&eal(&["stdlib", "check"])), 0);
    assert!(stdout(&eal(&["stdlib", "show", "succ"])).contains("\\"));
    assert_eq!(code(&eal(&["stdlib", "show", "nope"])), 2);
}

#[test]
fn fuzz_summarises_a_batch() {
    let o = eal(&["fuzz", "--count", "50", "--seed", "3"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["programs"], 50);
    assert_eq!(v["violations"].as_array().unwrap().len(), 0);
    assert_eq!(code(&eal(&["fuzz", "--count", "20", "--typed"])), 0);
}
