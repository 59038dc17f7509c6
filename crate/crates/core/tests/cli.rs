use std::ffi::OsString;
use std::fs;
use std::path::Path;
use std::process::Command;

use seriesqr::cli::{self, fit_table, main_with_args, monotonize_table, BandReport, FitConfig, MonotonizeTableConfig};
use seriesqr::io::{read_csv_from, FitArtifact};
use seriesqr::sim::{generate_dgp, DgpSpec};
use seriesqr::{fit_process, make_basis, Dataset, Error};

const FIT: &str = r#"{"fit": {"response": "y", "basis": {"family": "power_poly", "degree": 3}, "grid": {"start": 2, "stop": 18, "denominator": 20}}}"#;

fn write_data(dir: &Path, n: usize, seed: u64) -> std::path::PathBuf {
    let s = generate_dgp(&DgpSpec::calibrated(n), seed).unwrap();
    let mut text = String::from("y,w\n");
    for (y, x) in s.y.iter().zip(&s.covariates) {
        text.push_str(&format!("{y},{}\n", x[0]));
    }
    let path = dir.join("data.csv");
    fs::write(&path, text).unwrap();
    path
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn args(cmd: &str, config: &Path, data: Option<&Path>, out: &Path) -> Vec<OsString> {
    let mut v: Vec<OsString> = vec!["seriesqr".into(), cmd.into(), "--config".into(), config.into(), "--out".into(), out.into()];
    if let Some(d) = data {
        v.push("--data".into());
        v.push(d.into());
    }
    v
}

fn fitted_dir(n: usize) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path(), n, 1);
    let cfg = write_config(dir.path(), "fit.json.cfg", FIT);
    assert_eq!(main_with_args(args("fit", &cfg, Some(&data), dir.path())), 0);
    dir
}

fn band(dir: &Path, body: &str, with_data: bool) -> (i32, Option<BandReport>) {
    let cfg = write_config(dir, "band.cfg", &format!(r#"{{"band": {body}}}"#));
    let data = dir.join("data.csv");
    let code = main_with_args(args("band", &cfg, with_data.then_some(data.as_path()), dir));
    let report = fs::read_to_string(dir.join("band.json")).ok().map(|t| serde_json::from_str(&t).unwrap());
    let _ = fs::remove_file(dir.join("band.json"));
    (code, report)
}

#[test]
fn artifact_round_trip_is_bit_exact() {
    let dir = fitted_dir(150);
    let artifact = FitArtifact::read(&dir.path().join("fit.json")).unwrap();
    let text = fs::read_to_string(dir.path().join("data.csv")).unwrap();
    let table = read_csv_from(text.as_bytes(), "y", None).unwrap();
    let cfg: FitConfig = serde_json::from_value(serde_json::from_str::<serde_json::Value>(FIT).unwrap()["fit"].clone()).unwrap();
    let in_process = fit_table(&table, &cfg).unwrap();
    assert_eq!(artifact, in_process);

    let basis = make_basis(&cfg.basis, &table.covariates).unwrap();
    let data = Dataset::new(table.y.clone(), &basis.design_matrix(&table.covariates)).unwrap();
    let direct = fit_process(&data, Some(&basis), &cfg.grid.build().unwrap()).unwrap();
    let restored = artifact.process().unwrap();
    assert_eq!(restored.betas, direct.betas);
    assert_eq!(restored.jacobians, direct.jacobians);
    assert_eq!(restored.gram, direct.gram);
    assert!(dir.path().join("fit_summary.txt").exists());
}

#[test]
fn bad_cells_report_their_row() {
    let text = "y,w\n1,0.1\n2,0.2\n3,0.3\n4,0.4\n5,0.5\n6,0.6\n7,oops\n";
    match read_csv_from(text.as_bytes(), "y", None) {
        Err(Error::Csv { row, column, .. }) => assert_eq!((row, column.as_str()), (7, "w")),
        other => panic!("unexpected {other:?}"),
    }
    assert!(read_csv_from("y,w\n1,inf\n".as_bytes(), "y", None).is_err());
    assert!(read_csv_from("y,w\n".as_bytes(), "y", None).is_err());
    assert!(read_csv_from("a,w\n1,2\n".as_bytes(), "y", None).is_err());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let cfg = write_config(out, "fit.cfg", FIT);
    // missing --data
    assert_eq!(main_with_args(args("fit", &cfg, None, out)), 1);
    // unknown subcommand, help
    assert_eq!(main_with_args(["seriesqr", "frobnicate"].map(OsString::from)), 1);
    assert_eq!(main_with_args(["seriesqr", "--help"].map(OsString::from)), 0);
    // unknown configuration key
    let bad = write_config(out, "bad.cfg", r#"{"fit": {"response": "y", "basis": {"family": "linear"}, "colour": 1}}"#);
    let data = write_data(out, 50, 2);
    assert_eq!(main_with_args(args("fit", &bad, Some(&data), out)), 1);
    // missing section and missing file
    let empty = write_config(out, "empty.cfg", "{}");
    assert_eq!(main_with_args(args("fit", &empty, Some(&data), out)), 1);
    assert_eq!(main_with_args(args("fit", &out.join("nope.cfg"), Some(&data), out)), 1);
    // collinear covariates are a data problem
    fs::write(out.join("collinear.csv"), "y,a,b\n1,1,2\n2,2,4\n3,3,6\n4,4,8\n5,5,10\n").unwrap();
    let lin = write_config(out, "lin.cfg", r#"{"fit": {"response": "y", "basis": {"family": "linear", "extra_linear_covariates": 1}}}"#);
    assert_eq!(main_with_args(args("fit", &lin, Some(&out.join("collinear.csv")), out)), 1);
    assert_eq!(cli::exit_code(&Error::Config("x".into())), 1);
}

#[test]
fn binary_exit_codes_and_thread_override() {
    let bin = env!("CARGO_BIN_EXE_seriesqr");
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "fit.cfg", FIT);
    let data = write_data(dir.path(), 80, 3);
    let status = Command::new(bin)
        .args(["fit", "--config"])
        .arg(&cfg)
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(dir.path())
        .env(cli::THREADS_ENV, "2")
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    let status = Command::new(bin).args(["fit", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(status.status.code(), Some(1));
    let status = Command::new(bin).arg("--version").output().unwrap();
    assert_eq!(status.status.code(), Some(0));
}

#[test]
fn intercept_only_fit_returns_the_median() {
    let data = Dataset::from_rows(vec![3.0, 1.0, 2.0], vec![1.0; 3], 1).unwrap();
    let fit = seriesqr::solver::solve_qr(&data, 0.5, None).unwrap();
    assert_eq!(fit.beta, vec![2.0]);
}

#[test]
fn bands_from_the_command_line() {
    let dir = fitted_dir(200);
    let d = dir.path();
    let functional = r#"{"kind": "derivative", "points": [[0.1], [0.25], [0.4]], "k": 0}"#;

    let (code, piv) = band(d, &format!(r#"{{"method": "pivotal", "draws": 400, "functional": {functional}, "seed": 3}}"#), false);
    assert_eq!(code, 0);
    let piv = piv.unwrap();
    assert_eq!(piv.rows.len(), 17 * 3);
    assert!(piv.rows.iter().all(|r| r.lower <= r.theta_hat && r.theta_hat <= r.upper));
    let csv = fs::read_to_string(d.join("band.csv")).unwrap();
    assert!(csv.starts_with("# method=pivotal,kind=uniform,draws=400,seed=3,"));
    assert_eq!(csv.lines().nth(1), Some("u,w,theta_hat,sigma_hat,lower,upper,k,c"));

    let (code, gau) = band(d, &format!(r#"{{"method": "gaussian", "draws": 400, "functional": {functional}, "seed": 3}}"#), false);
    assert_eq!(code, 0);
    let gau = gau.unwrap();
    assert!((gau.k_n - piv.k_n).abs() < 0.25 * piv.k_n, "{} vs {}", gau.k_n, piv.k_n);

    // the bootstrap refits and needs the data
    let weighted = format!(r#"{{"method": "weighted", "draws": 20, "functional": {functional}}}"#);
    assert_eq!(band(d, &weighted, false).0, 1);
    assert_eq!(band(d, &weighted, true).0, 0);

    let (code, pw) = band(
        d,
        &format!(r#"{{"method": "gaussian", "kind": "pointwise", "critical": "normal_quantile", "functional": {functional}}}"#),
        false,
    );
    assert_eq!(code, 0);
    assert!(pw.unwrap().rows.iter().all(|r| (r.c - 1.6448536269514722).abs() < 1e-9));
}

#[test]
fn rearranged_band_envelopes_are_monotone_in_u() {
    let dir = fitted_dir(200);
    let body = r#"{"method": "pivotal", "draws": 300, "functional": {"kind": "value", "points": [[0.1], [0.2], [0.3], [0.4]]},
        "monotonize": {"operator": {"type": "rearrange"}}}"#;
    let (code, report) = band(dir.path(), body, false);
    assert_eq!(code, 0);
    let rows = report.unwrap().rows;
    let (lower, upper): (Vec<f64>, Vec<f64>) = rows.iter().map(|r| (r.lower, r.upper)).unzip();
    let grid = |v: &[f64]| seriesqr::monotone::GridFunction::new(vec![(0..17).map(f64::from).collect(), vec![0.1, 0.2, 0.3, 0.4]], v.to_vec()).unwrap();
    assert!(grid(&lower).is_monotone() && grid(&upper).is_monotone());
}

#[test]
fn mc_and_estimand_gap_commands_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(
        d,
        "run.cfg",
        r#"{
            "mc": {"dgp": {"g_coeffs": [1, 0.25, 0.1, 0.25, 0.02, 0.01], "sigma": 0.3, "w_range": [0, 0.5], "n": 100},
                   "bases": [{"name": "linear", "basis": {"family": "linear"}}],
                   "grid": [0.3, 0.7], "methods": [{"method": "pivotal", "draws": 50}], "replications": 10},
            "estimand_gap": {"dgp": {"g_coeffs": [1, 0.25, 0.1, 0.25, 0.02, 0.01], "sigma": 0.3, "w_range": [0, 0.5], "n": 100},
                   "basis": {"family": "linear"}, "repeats": 5, "w_points": [0.1, 0.2]}
        }"#,
    );
    assert_eq!(main_with_args(args("mc", &cfg, None, d)), 0);
    let mc = fs::read_to_string(d.join("mc.csv")).unwrap();
    assert_eq!(mc.lines().next(), Some("basis,method,bias,rmse,se_sd,cover,length,stat"));
    assert_eq!(mc.lines().count(), 2);
    assert_eq!(main_with_args(args("estimand-gap", &cfg, None, d)), 0);
    let gap = fs::read_to_string(d.join("gap.csv")).unwrap();
    assert_eq!(gap.lines().count(), 1 + 9 * 2);
}

#[test]
fn table_monotonization() {
    let cfg: MonotonizeTableConfig = serde_json::from_str(r#"{"axes": ["u"], "operator": {"type": "rearrange"}}"#).unwrap();
    let out = monotonize_table("u,a,b\n0.3,1,5\n0.1,3,4\n0.2,2,6\n", &cfg).unwrap();
    assert_eq!(out, "u,a,b\n0.3,3,6\n0.1,1,4\n0.2,2,5\n");
    let cfg2: MonotonizeTableConfig = serde_json::from_str(r#"{"axes": ["u", "w"], "operator": {"type": "rearrange"}, "mode": "first_axis_first"}"#).unwrap();
    let out = monotonize_table("u,w,v\n0,0,2\n0,1,1\n1,0,0\n1,1,3\n", &cfg2).unwrap();
    assert_eq!(out, "u,w,v\n0,0,0\n0,1,1\n1,0,2\n1,1,3\n");
    // incomplete grid, repeated cell, intersect
    assert!(monotonize_table("u,w,v\n0,0,2\n0,1,1\n1,0,0\n", &cfg2).is_err());
    assert!(monotonize_table("u,v\n0,1\n0,2\n", &cfg).is_err());
    let inter: MonotonizeTableConfig = serde_json::from_str(r#"{"axes": ["u"], "operator": {"type": "isotonic"}, "intersect": true}"#).unwrap();
    assert!(monotonize_table("u,v\n0,1\n1,2\n", &inter).is_err());
}
