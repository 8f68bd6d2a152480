use std::path::Path;
use std::process::Command;

use nsd_ensemble::io::read_csv;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nsd-ensemble"));
    c.env("RUST_LOG", "error");
    c
}

fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn single_run_writes_tables_vtk_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write(
        dir.path(),
        "run.toml",
        "scenario = \"single-run\"\n[scheme]\ndt = 0.125\nt_end = 0.5\n[mesh]\nn = 2\n",
    );
    let status = bin().arg("run").arg(&cfg).arg("--out-dir").arg(&out).arg("--threads").arg("1").output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let errors = read_csv(&out.join("errors.csv")).unwrap();
    assert_eq!(errors.columns, ["realization", "err_u", "err_p", "err_phi"]);
    assert_eq!(errors.rows.len(), 3);
    assert!(errors.rows.iter().flatten().all(|v| v.is_some_and(f64::is_finite)));
    let diag = read_csv(&out.join("diagnostics.csv")).unwrap();
    assert_eq!(diag.rows.len(), 3 * 5);
    assert!(out.join("realization0.vtk").exists());
    let meta = std::fs::read_to_string(out.join("metadata.txt")).unwrap();
    assert!(meta.contains("scenario=\"single-run\""));
    assert!(meta.contains("run.factorizations=2"));
}

#[test]
fn runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        "scenario = \"single-run\"\n[scheme]\ndt = 0.25\nt_end = 0.5\n[mesh]\nn = 2\n[conductivity]\nkind = \"uniform\"\nscale = 1.0\n[output]\nvtk = false\n",
    );
    let read = |name: &str| {
        let out = dir.path().join(name);
        let s = bin().arg("run").arg(&cfg).arg("--out-dir").arg(&out).arg("--seed").arg("9").output().unwrap().status;
        assert!(s.success());
        std::fs::read(out.join("errors.csv")).unwrap()
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn bad_configs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown_key.toml", "scenario = \"single-run\"\n[scheme]\nbogus = 1\n"),
        ("bad_scenario.toml", "scenario = \"nope\"\n"),
        ("bad_value.toml", "scenario = \"single-run\"\n[scheme]\ndt = -1.0\n"),
        ("syntax.toml", "scenario = \n"),
    ];
    for (name, body) in cases {
        let p = write(dir.path(), name, body);
        let out = bin().arg("run").arg(&p).arg("--out-dir").arg(dir.path().join("o")).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let missing = bin().arg("run").arg(dir.path().join("absent.toml")).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}
