use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fracnodal::config::RunConfig;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fracnodal"));
    cmd.args(args);
    if let Some(n) = threads {
        cmd.env("FRACNODAL_THREADS", n.to_string());
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path
}

fn sorted_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn solve_is_deterministic_across_runs_and_thread_counts() {
    let cfg = configs().join("linear.toml");
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&run(&["solve", "--config", p(&cfg), "--out", p(&a)], Some(1))), 0);
    assert_eq!(code(&run(&["solve", "--config", p(&cfg), "--out", p(&b)], Some(4))), 0);
    let (fa, fb) = (sorted_files(&a), sorted_files(&b));
    let names: Vec<_> = fa.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(names, ["field.json", "solve_report.json", "trace.csv", "trace.svg"]);
    assert_eq!(fa, fb);
}

#[test]
fn every_artifact_carries_the_config_hash() {
    let cfg = configs().join("linear.toml");
    let hash = RunConfig::load(&cfg).unwrap().hash();
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&run(&["solve", "--config", p(&cfg), "--out", p(tmp.path())], None)),
        0
    );
    for (name, bytes) in sorted_files(tmp.path()) {
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains(&hash), "{name} lacks the config hash");
    }
    let csv = fs::read_to_string(tmp.path().join("trace.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), format!("# config_sha256={hash}"));
}

#[test]
fn unknown_keys_are_schema_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let top = write_config(
        tmp.path(),
        "[parameters]\ns = 0.25\nq = 1.0\nlambda_plus = 1.0\nlambda_minus = 1.0\nfoo = 3\n",
    );
    let o = run(&["solve", "--config", p(&top)], None);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("foo"));

    let nested = write_config(
        tmp.path(),
        "[parameters]\ns = 0.25\nq = 1.0\nlambda_plus = 1.0\nlambda_minus = 1.0\n[boundary]\nkind = \"constant\"\nvalue = 1.0\nbar = 2\n",
    );
    let o = run(&["solve", "--config", p(&nested)], None);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bar"));
}

#[test]
fn invalid_parameters_exit_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[parameters]\ns = 1.5\nq = 1.0\nlambda_plus = 1.0\nlambda_minus = 1.0\n",
    );
    assert_eq!(
        code(&run(&["solve", "--config", p(&cfg), "--out", p(tmp.path())], None)),
        2
    );
}

#[test]
fn solve_curve_classify_plot_pipeline() {
    let cfg = configs().join("roundtrip.toml");
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    assert_eq!(code(&run(&["solve", "--config", p(&cfg), "--out", p(out)], None)), 0);
    let field = out.join("field.json");

    let o = run(
        &[
            "curve",
            "--config",
            p(&cfg),
            "--field",
            p(&field),
            "--x0",
            "-0.0",
            "--out",
            p(out),
        ],
        None,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let curve = fs::read_to_string(out.join("curve.csv")).unwrap();
    assert!(curve.lines().nth(1).unwrap().starts_with("r,"));
    assert_eq!(curve.lines().count(), 2 + 61);

    assert_eq!(
        code(&run(
            &["classify", "--config", p(&cfg), "--field", p(&field), "--out", p(out)],
            None
        )),
        0
    );
    let report = fs::read_to_string(out.join("nodal_report.json")).unwrap();
    assert!(report.contains("\"sublinear\""), "{report}");

    let o = run(
        &[
            "plot",
            "--config",
            p(&cfg),
            "--input",
            p(&out.join("curve.csv")),
            "--x",
            "r",
            "--y",
            "H",
            "--log-y",
            "--out",
            p(out),
        ],
        None,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn field_from_other_weight_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    assert_eq!(
        code(&run(
            &["solve", "--config", p(&configs().join("linear.toml")), "--out", p(out)],
            None
        )),
        0
    );
    let o = run(
        &[
            "classify",
            "--config",
            p(&configs().join("roundtrip.toml")),
            "--field",
            p(&out.join("field.json")),
            "--out",
            p(out),
        ],
        None,
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn angular_symmetric_at_q_one_is_numerical_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("roundtrip.toml");
    let o = run(
        &[
            "angular",
            "--config",
            p(&cfg),
            "--profile",
            "symmetric",
            "--out",
            p(tmp.path()),
        ],
        None,
    );
    assert_eq!(code(&o), 3);
    let o = run(&["angular", "--config", p(&cfg), "--out", p(tmp.path())], None);
    assert_eq!(code(&o), 0);
    assert!(tmp.path().join("profile_antisymmetric.csv").exists());
    assert!(tmp.path().join("constants.json").exists());
}

#[test]
fn verify_list_and_subset() {
    let o = run(&["verify", "--list"], None);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 11);

    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["verify", "--only", "1,2,10", "--out", p(tmp.path())], None);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 3);
    let first = fs::read(tmp.path().join("verify.json")).unwrap();
    run(&["verify", "--only", "1,2,10", "--out", p(tmp.path())], None);
    assert_eq!(first, fs::read(tmp.path().join("verify.json")).unwrap());
}

#[test]
fn verify_failure_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[parameters]\ns = 0.25\nq = 1.0\nlambda_plus = 1.0\nlambda_minus = 1.0\n[analysis.tolerances]\neigen_anchor = 1e-20\n",
    );
    let o = run(
        &["verify", "--config", p(&cfg), "--only", "2", "--out", p(tmp.path())],
        None,
    );
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("FAIL [ 2]"));
}
