use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_steadyscan"));
    for (k, _) in std::env::vars() {
        if k.starts_with("STEADYSCAN_") {
            c.env_remove(k);
        }
    }
    c
}

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn run(c: &mut Command) -> (Option<i32>, String, String) {
    let Output { status, stdout, stderr } = c.output().expect("binary runs");
    (
        status.code(),
        String::from_utf8_lossy(&stdout).into_owned(),
        String::from_utf8_lossy(&stderr).into_owned(),
    )
}

const TOY: &str = "\
modelfile v1
[options]
target = 4

[unknowns]
k in [1e-3, 1e1]
d in [0.1, 1]
x_eq in [0.5, 2]

[states]
x

[odes]
x' = k - d * x

[constraints]
derive-steady-state
level: k / d > 0.6

[events]
stop at 1: k = 0

[stl]
eventually[0, 30] (x < 0.5 * x_eq)
";

fn toy(dir: &Path) -> PathBuf {
    let p = dir.join("toy.model");
    fs::write(&p, TOY).unwrap();
    p
}

#[test]
fn inconsistent_fixture_stops_the_pipeline() {
    let d = tempfile::tempdir().unwrap();
    let (code, out, _) = run(bin()
        .arg("pipeline")
        .arg(repo("fixtures/pre_revision.model"))
        .args(["--seed", "1", "--out-dir"])
        .arg(d.path()));
    assert_eq!(code, Some(3));
    assert!(out.contains("tfr1_stabilization"), "{out}");
    let report = fs::read_to_string(d.path().join("conflicts.json")).unwrap();
    assert!(report.contains("tfr1_stabilization"));
    assert!(!d.path().join("solutions.jsonl").exists());
}

#[test]
fn same_seed_gives_identical_solution_files() {
    let d = tempfile::tempdir().unwrap();
    let m = toy(d.path());
    let mut files = Vec::new();
    for (k, jobs) in ["1", "1", "3"].iter().enumerate() {
        let out = d.path().join(format!("s{k}.jsonl"));
        let (code, _, err) = run(bin()
            .args(["sample", "--seed", "5", "--target", "25"])
            .arg(&m)
            .arg("--out")
            .arg(&out)
            .env("STEADYSCAN_JOBS", jobs));
        assert_eq!(code, Some(0), "{err}");
        files.push(fs::read(&out).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(files[0], files[2]);
    assert_eq!(String::from_utf8_lossy(&files[0]).lines().count(), 25);
}

#[test]
fn settings_precedence() {
    let d = tempfile::tempdir().unwrap();
    let m = toy(d.path());
    let count = |extra: &[&str], env: Option<&str>| {
        let mut c = bin();
        c.args(["sample", "--seed", "2"]).arg(&m).args(extra);
        if let Some(v) = env {
            c.env("STEADYSCAN_TARGET", v);
        }
        let (code, out, err) = run(&mut c);
        assert_eq!(code, Some(0), "{err}");
        out.lines().count()
    };
    assert_eq!(count(&[], None), 4);
    assert_eq!(count(&[], Some("6")), 6);
    assert_eq!(count(&["--target", "3"], Some("6")), 3);
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let m = toy(d.path());

    let (code, _, err) = run(bin().args(["sample"]).arg(&m));
    assert_eq!(code, Some(1), "seed is mandatory: {err}");
    assert_eq!(run(bin().arg("frobnicate")).0, Some(1));
    assert_eq!(run(bin().args(["contract", "no/such/model"])).0, Some(1));

    let bad = d.path().join("bad.model");
    fs::write(&bad, "modelfile v1\n[unknowns]\nk in [1, 0\n").unwrap();
    let (code, _, err) = run(bin().arg("contract").arg(&bad));
    assert_eq!(code, Some(2));
    assert!(err.contains("line 3"), "{err}");

    let (code, _, err) = run(bin()
        .args(["sample", "--seed", "1", "--target", "10", "--max-attempts", "3"])
        .arg(&m));
    assert_eq!(code, Some(4), "{err}");

    assert_eq!(run(bin().args(["explain", "pre_revision"])).0, Some(3));
    assert_eq!(run(bin().args(["explain"]).arg(&m)).0, Some(0));
}

#[test]
fn simulate_then_check() {
    let d = tempfile::tempdir().unwrap();
    let m = toy(d.path());
    let sols = d.path().join("s.jsonl");
    let (code, ..) = run(bin().args(["sample", "--seed", "3"]).arg(&m).arg("--out").arg(&sols));
    assert_eq!(code, Some(0));

    let (csv, svg) = (d.path().join("t.csv"), d.path().join("t.svg"));
    let (code, _, err) = run(bin()
        .arg("simulate")
        .arg(&m)
        .arg("--solutions")
        .arg(&sols)
        .args(["--index", "1", "--csv"])
        .arg(&csv)
        .arg("--svg")
        .arg(&svg));
    assert_eq!(code, Some(0), "{err}");
    assert!(fs::read_to_string(&csv).unwrap().starts_with("time,x"));
    assert!(fs::read_to_string(&svg).unwrap().contains("<svg"));

    let spec = d.path().join("f.stl");
    fs::write(&spec, "eventually[0, 30] (x < 0.5 * x_eq)\n").unwrap();
    let (code, out, err) = run(bin()
        .arg("check")
        .arg("--trace")
        .arg(&csv)
        .arg("--stl")
        .arg(&spec)
        .arg("--model")
        .arg(&m)
        .arg("--solutions")
        .arg(&sols)
        .args(["--index", "1"]));
    assert_eq!(code, Some(0), "{err}");
    assert!(out.contains("satisfied: true"), "{out}");
    let rho: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("robustness: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(rho > 0.0);

    fs::write(&spec, "always[0, 30] (x > 1e9)\n").unwrap();
    let (code, out, _) = run(bin().arg("check").arg("--trace").arg(&csv).arg("--stl").arg(&spec));
    assert_eq!(code, Some(0));
    assert!(out.contains("satisfied: false"));
}

#[test]
fn pipeline_writes_every_artifact() {
    let d = tempfile::tempdir().unwrap();
    let m = toy(d.path());
    let out = d.path().join("out");
    let (code, stdout, err) = run(bin()
        .arg("pipeline")
        .arg(&m)
        .args(["--seed", "9", "--simulate", "2", "--out-dir"])
        .arg(&out));
    assert_eq!(code, Some(0), "{err}");
    assert!(stdout.contains("2 of 2 stable"), "{stdout}");
    for f in [
        "contracted.json",
        "union.jsonl",
        "solutions.jsonl",
        "stats.json",
        "checks.json",
        "traces/solution_0.csv",
        "traces/solution_1.svg",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    assert_eq!(fs::read_to_string(out.join("solutions.jsonl")).unwrap().lines().count(), 4);
}

#[test]
fn builtin_model_pipeline() {
    let d = tempfile::tempdir().unwrap();
    let (code, stdout, err) = run(bin()
        .args(["pipeline", "iron_v2", "--seed", "7", "--target", "50", "--jobs", "2", "--simulate", "1", "--out-dir"])
        .arg(d.path()));
    assert_eq!(code, Some(0), "{err}");
    assert!(stdout.contains("1 of 1 stable"), "{stdout}");
    assert_eq!(fs::read_to_string(d.path().join("solutions.jsonl")).unwrap().lines().count(), 50);
}
