use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use reflectlab_cli::config::{Command as Cmd, RunConfig};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reflectlab"))
        .args(args)
        .arg("--outdir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn timescales_with_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# defaults otherwise\ncommand = timescales\nD = 1\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_reflectlab"))
        .arg("--config")
        .arg(&cfg)
        .arg("--outdir")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("out");
    let resolved = RunConfig::parse(&fs::read_to_string(dir.join("config.resolved")).unwrap()).unwrap();
    assert_eq!((resolved.m, resolved.p_bar, resolved.hbar, resolved.d), (1.0, 1.0, 1.0, 1.0));
    assert_eq!(resolved.command, Some(Cmd::Timescales));
    assert!(fs::read_to_string(dir.join("VERSION")).unwrap().starts_with("reflectlab "));
    let (header, rows) = read_csv(&dir.join("timescales.csv"));
    assert_eq!(header, ["name", "value", "defining_formula", "inputs"]);
    let t_loc = rows.iter().find(|r| r[0] == "t_loc").unwrap();
    assert_eq!(t_loc[1].parse::<f64>().unwrap(), 1.0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("t_loc"));
}

#[test]
fn flags_override_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "command = timescales\nDp=0.5\n").unwrap();
    let dir = tmp.path().join("out");
    let out = Command::new(env!("CARGO_BIN_EXE_reflectlab"))
        .arg("--config")
        .arg(&cfg)
        .args(["--D_p", "2", "--outdir"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let resolved = RunConfig::parse(&fs::read_to_string(dir.join("config.resolved")).unwrap()).unwrap();
    assert_eq!(resolved.d_p, 2.0);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let code = |args: &[&str], name: &str| run(&tmp.path().join(name), args).status.code();
    assert_eq!(code(&["timescales", "--nonsense", "1"], "a"), Some(2));
    assert_eq!(code(&["timescales", "--m", "heavy"], "b"), Some(2));
    assert_eq!(code(&["figures"], "c"), Some(2));
    assert_eq!(code(&["model1"], "d"), Some(2));
    assert_eq!(code(&["timescales", "--D", "-1"], "e"), Some(2));
    // the density at -8 p_bar is far from negligible for D_p = 1
    assert_eq!(
        code(&["model1", "--coupling", "p", "--D_p", "1", "--range_check", "--n_points", "8"], "f"),
        Some(3)
    );
    let regime = ["model1", "--coupling", "x", "--D", "1", "--n_points", "8", "--sigma", "10"];
    assert_eq!(code(&regime, "g"), Some(0));
    let mut strict = regime.to_vec();
    strict.push("--strict");
    assert_eq!(code(&strict, "h"), Some(4));
}

#[test]
fn figure_three_has_one_curve_per_width() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["figures", "--figure", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&tmp.path().join("fig3_totals.csv"));
    assert_eq!(header, ["a", "D_p", "total"]);
    for a in ["1e-1", "2e-1", "4e-1"] {
        let totals: Vec<f64> = rows.iter().filter(|r| r[0] == a).map(|r| r[2].parse().unwrap()).collect();
        assert_eq!(totals.len(), 13);
        assert!(totals.windows(2).all(|w| w[1] < w[0]));
    }
    let svg = fs::read_to_string(tmp.path().join("fig3_totals.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 3);
}

#[test]
fn figure_five_is_monotone_and_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&a, &["figures", "--figure", "5"]).status.success());
    assert!(run(&b, &["figures", "--figure", "5", "--threads", "2"]).status.success());
    let first = fs::read(a.join("fig5_totals.csv")).unwrap();
    assert_eq!(first, fs::read(b.join("fig5_totals.csv")).unwrap());
    let (header, rows) = read_csv(&a.join("fig5_totals.csv"));
    assert_eq!(header, ["a", "D", "total"]);
    for w in ["1e-1", "2e-1", "4e-1"] {
        let totals: Vec<f64> = rows.iter().filter(|r| r[0] == w).map(|r| r[2].parse().unwrap()).collect();
        assert!(totals.windows(2).all(|w| w[1] < w[0]));
    }
}

#[test]
fn every_figure_writes_csv_and_svg() {
    let tmp = tempfile::tempdir().unwrap();
    for f in ["1", "2", "4"] {
        let dir = tmp.path().join(f);
        let out = run(&dir, &["figures", "--figure", f]);
        assert!(out.status.success(), "figure {f}: {}", String::from_utf8_lossy(&out.stderr));
        let names: Vec<String> = fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        assert!(names.iter().any(|n| n.ends_with(".csv")), "{names:?}");
        assert!(names.iter().any(|n| n.ends_with(".svg")), "{names:?}");
        assert!(names.iter().any(|n| n == "config.resolved") && names.iter().any(|n| n == "VERSION"));
    }
}

#[test]
fn model2_and_unitary_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("m2");
    let out = run(
        &dir,
        &["model2", "--sweep", "0.1,1", "--D", "1", "--steady-target", "--n_points", "16", "--p_min", "-3", "--p_max", "0.5", "--conditional_P", "0"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.join("totals.csv"));
    assert_eq!(header, ["D", "total"]);
    assert_eq!(rows.len(), 2);
    let (header, rows) = read_csv(&dir.join("conditional.csv"));
    assert_eq!(header, ["p", "no_environment", "D=0.1", "D=1"]);
    assert_eq!(rows.len(), 16);
    assert!(dir.join("cutoffs.csv").exists());

    let dir = tmp.path().join("u");
    let out = run(
        &dir,
        &["unitary", "--sigma", "5", "--x_bar", "-40", "--V0", "0.5", "--a", "0.5", "--grid_half_width", "120", "--grid_points", "4096", "--dt", "0.025", "--steps", "3200", "--record_every", "400"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = read_csv(&dir.join("summary.csv"));
    let get = |k: &str| rows.iter().find(|r| r[0] == k).unwrap()[1].parse::<f64>().unwrap();
    assert!((get("reflected") + get("transmitted") - 1.0).abs() < 1e-6);
    assert!(get("reflected") > 0.0);
}
