use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use eta_forge_cli::report::{render_csv, Section};
use eta_forge_cli::{emit_report, run_config, CliError, RunConfig, Scenario};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eta-forge"))
}

fn run_to(cfg: &RunConfig, dir: &Path) -> (String, String) {
    let cfg = RunConfig { out_dir: Some(dir.to_path_buf()), ..cfg.clone() };
    let rep = run_config(&cfg).unwrap();
    assert_eq!(rep.code, 0, "{}", rep.markdown);
    let stem = cfg.scenario.name();
    (
        fs::read_to_string(dir.join(format!("{stem}.csv"))).unwrap(),
        fs::read_to_string(dir.join(format!("{stem}.md"))).unwrap(),
    )
}

#[test]
fn symbolic_scenario_reports_empty_residual() {
    let out = bin().args(["verify", "eqfe", "--symbolic"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("residual: 0 terms"), "{text}");
}

#[test]
fn trace_ir_dumps_canonical_forms() {
    let out = bin().args(["verify", "eqfe", "--symbolic", "--trace-ir"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("r[1][1] = E(1)"), "{text}");
    assert!(text.contains("residual = 0"));
    let rhs = text.lines().find(|l| l.starts_with("rhs = ")).unwrap();
    let parsed = symtrace::parse_expr(&rhs[6..]).unwrap();
    assert_eq!(parsed, symtrace::eqfe_rhs());
}

#[test]
fn eta_on_diagonal_model_is_one_minus_phase() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { model_path: Some(data("diag_theta.json")), ..RunConfig::new(Scenario::Eta) };
    let (csv, _) = run_to(&cfg, dir.path());
    let row = csv.lines().find(|l| l.starts_with("eta,eta-vs-sign")).unwrap();
    let cols: Vec<&str> = row.split(',').collect();
    let re: f64 = cols[3].parse().unwrap();
    let im: f64 = cols[4].parse().unwrap();
    let th = 2.0 * std::f64::consts::PI / 3.0;
    assert!((re - (1.0 - th.cos())).abs() < 1e-12 && (im + th.sin()).abs() < 1e-12, "{row}");
    // 17 significant digits
    assert_eq!(cols[3].split('e').next().unwrap().len(), 18);
}

#[test]
fn model_file_scenarios_pass() {
    for sc in [
        Scenario::Eta,
        Scenario::EtaGap,
        Scenario::Volterra,
        Scenario::Stability,
        Scenario::Rho,
        Scenario::Decay,
        Scenario::SmallTime,
        Scenario::EqfeNumeric,
    ] {
        let cfg = RunConfig { model_path: Some(data("cyclic_pair.json")), ..RunConfig::new(sc) };
        let rep = run_config(&cfg).unwrap();
        assert_eq!(rep.code, 0, "{sc:?}\n{}", rep.markdown);
    }
}

#[test]
fn non_hermitian_model_fails_first_gate() {
    let out = bin()
        .args(["run", "eta", "--model"])
        .arg(data("not_hermitian.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("input/d-hermitian"), "{err}");
}

#[test]
fn config_errors_exit_three() {
    let out = bin().args(["run", "eta", "--model", "/definitely/missing.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let out = bin().args(["run"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let out = bin().args(["run", "not-a-scenario"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err = run_config(&RunConfig { model_path: Some("/missing".into()), ..RunConfig::new(Scenario::Eta) });
    assert!(matches!(err, Err(CliError::Config(_))));
    let err = run_config(&RunConfig { threads: Some(0), ..RunConfig::new(Scenario::EqfeSymbolic) });
    assert!(matches!(err, Err(CliError::Config(_))));
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    fs::write(&path, r#"{"scenario": "mckean-singer", "seed": 3, "quick": true, "quad": {"nodes": 128}}"#).unwrap();
    let cfg = RunConfig::load(&path).unwrap();
    assert_eq!(cfg.scenario, Scenario::McKeanSinger);
    assert_eq!((cfg.seed, cfg.quick, cfg.quad.nodes), (3, true, Some(128)));
    fs::write(&path, r#"{"scenario": "eta", "sed": 3}"#).unwrap();
    assert!(matches!(RunConfig::load(&path), Err(CliError::Config(_))));
    let out = bin().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn empty_results_are_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let r = emit_report(dir.path(), "x", "x", &[], &[]);
    assert!(matches!(r, Err(CliError::EmptyReport)));
    let r = emit_report(dir.path(), "x", "x", &[], &[Section::new("a", "b")]);
    assert!(matches!(r, Err(CliError::EmptyReport)));
    assert_eq!(render_csv(&[]).lines().count(), 1);
}

fn golden(name: &str, got: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, got).unwrap();
    }
    let want = fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert!(want == got, "{name} differs from the frozen golden file");
}

#[test]
fn seed_zero_outputs_match_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("eqfe-symbolic", RunConfig::new(Scenario::EqfeSymbolic)),
        ("mckean-singer", RunConfig { quick: true, ..RunConfig::new(Scenario::McKeanSinger) }),
        ("eta", RunConfig { model_path: Some(data("diag_theta.json")), ..RunConfig::new(Scenario::Eta) }),
    ];
    for (stem, cfg) in cases {
        let (csv, md) = run_to(&cfg, dir.path());
        golden(&format!("{stem}.csv"), &csv);
        golden(&format!("{stem}.md"), &md);
    }
}

#[test]
fn quick_suite_passes_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = RunConfig { quick: true, dump: true, ..RunConfig::new(Scenario::VerifyAll) };
    let (csv_a, md_a) = run_to(&cfg, a.path());
    let seq = RunConfig { threads: Some(1), ..cfg.clone() };
    let (csv_b, md_b) = run_to(&seq, b.path());
    assert_eq!(csv_a, csv_b);
    assert_eq!(md_a, md_b);
    assert!(a.path().join("verify-all.json").is_file());
    assert!(md_a.contains("checks passed"));
}
