use std::path::{Path, PathBuf};
use std::process::Command;

/// Compiles `tests/c/smoke.c` against the generated header and the shared library.
#[test]
fn c_program_links_and_runs() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let profile_dir = tmp
        .parent()
        .expect("target dir")
        .join(if cfg!(debug_assertions) { "debug" } else { "release" });
    let lib = profile_dir.join("libeal_ffi.so");
    if !cfg!(target_os = "linux") || !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or shared library");
        return;
    }
    let exe = tmp.join("eal_smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg("-L")
        .arg(&profile_dir)
        .arg("-leal_ffi")
        .arg(format!("-Wl,-rpath,{}", profile_dir.display()))
        .arg("-o")
        .arg(&exe)
        .status()
        .expect("cc runs");
    assert!(status.success());
    let out = Command::new(&exe).output().expect("smoke binary runs");
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("2 * | r <= "));
}
