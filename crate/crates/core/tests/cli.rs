use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ap-psystem"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&bin(&["--help"])), 0);
    assert_eq!(code(&bin(&["run", "--help"])), 0);
}

#[test]
fn run_prints_one_csv_row() {
    let o = bin(&["run", "--scheme", "ap", "--case", "smooth", "--eps", "1e-2", "--nx", "32"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("scheme,case,eps,nx,dt,"));
    assert!(lines[1].starts_with("ap,smooth,0.01,32,0.025,"), "{}", lines[1]);
    assert!(stderr(&o).contains("steps=4"));
}

#[test]
fn usage_errors_exit_one() {
    let cases: [&[&str]; 6] = [
        &["run", "--scheme", "bogus", "--case", "smooth", "--eps", "0.1", "--nx", "8"],
        &["run", "--case", "smooth", "--eps", "0.1", "--nx", "8"],
        &["run", "--scheme", "ap", "--case", "smooth", "--eps", "1.5", "--nx", "8"],
        &["run", "--frobnicate"],
        &["study", "--threads", "0", "--nx", "4,8", "--eps", "0.1"],
        &["verify", "--suite", "nonsense"],
    ];
    for args in cases {
        let o = bin(args);
        assert_eq!(code(&o), 1, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn flagged_run_exits_two_after_writing_its_row() {
    let o = bin(&["run", "--scheme", "ie", "--case", "smooth", "--eps", "1e-8", "--nx", "64"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stdout(&o).trim_end().ends_with("ill_conditioned"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.cfg",
        "# single run\nscheme = imex\ncase = kink\neps = 0.1\nnx = 16\ncfl-hat = 0.5\n",
    );
    let o = bin(&["--config", &cfg, "run"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("imex,kink,0.1,16,0.025,"));

    let o = bin(&["run", "--config", &cfg, "--nx", "8", "--scheme", "ap"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("ap,kink,0.1,8,0.05,"));
}

#[test]
fn bad_config_files_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("dup.cfg", "eps = 0.1\neps = 0.2\n"),
        ("unknown.cfg", "colour = red\n"),
        ("syntax.cfg", "eps 0.1\n"),
    ] {
        let cfg = write(dir.path(), name, text);
        let o = bin(&["--config", &cfg, "run", "--scheme", "ap", "--case", "smooth", "--nx", "8"]);
        assert_eq!(code(&o), 1, "{name}: {}", stderr(&o));
        assert!(stderr(&o).contains(name), "{}", stderr(&o));
    }
    let o = bin(&["--config", "/nonexistent/x.cfg", "verify", "--suite", "splitting"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn study_writes_csv_and_plot_tables_and_tolerates_flags() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "spec.cfg", "scheme = ap, ie\neps = 1e-8\nnx = 16, 32\n");
    let out = dir.path().join("study.csv");
    let tables = dir.path().join("tables");
    let o = bin(&[
        "study",
        "--spec",
        &spec,
        "--out",
        out.to_str().unwrap(),
        "--emit-plot-table",
        tables.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.contains("ill_conditioned"));
    assert!(tables.join("smooth_ap_eps1e-8.dat").exists());
    assert!(tables.join("smooth_implicit_euler_eps1e-8.dat").exists());
}

#[test]
fn study_on_stdout_is_repeatable() {
    let args = ["study", "--scheme", "imex", "--eps", "0.1,0.01", "--nx", "8,16,32"];
    let a = bin(&args);
    let b = bin(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn passing_suite_exits_zero_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verify.csv");
    let o = bin(&["verify", "--suite", "splitting", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("suite,check,value,limit,pass\n"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")), "{csv}");
}
