use std::path::Path;

use eta_forge::bcyl::{eqfe_check, key_lemma_check, make_indicial, zeta_sweep};
use eta_forge::eta::{eta_gap_sweep, eta_oracle, eta_perturbed, eta_quadrature, eta_stability_sweep, rho_number};
use eta_forge::funcalc::{contour_projector, decay_profile};
use eta_forge::heatflow::{perturbed_square, small_time_defect, volterra_heat};
use eta_forge::linalg::{self, c, CMat};
use eta_forge::opmodel::{check_equivariance, sign_and_kernel};
use eta_forge::{Exec, OperatorValue};

use crate::config::{LoadedModel, ModelFile, RunConfig, Scenario};
use crate::report::{emit_report, render_markdown, Check, Section};
use crate::suite::{self, Part, Settings};
use crate::CliError;

#[derive(Clone, Debug)]
pub struct ExitReport {
    pub scenario: Scenario,
    pub sections: Vec<Section>,
    /// Extra text for stdout (canonical forms under `--trace-ir`).
    pub trace: Vec<String>,
    pub markdown: String,
    pub code: i32,
}

impl ExitReport {
    pub fn first_failure(&self) -> Option<(&Section, &Check)> {
        self.sections.iter().find_map(|s| s.first_failure().map(|c| (s, c)))
    }
}

pub fn parts_for(scenario: Scenario) -> Vec<Part> {
    use suite::*;
    match scenario {
        Scenario::Eta => vec![eta_oracle_part, symmetric_part, circle_part],
        Scenario::EtaGap => vec![gap_limit_part, projector_part],
        Scenario::Stability => vec![stability_part],
        Scenario::Rho => vec![rho_part],
        Scenario::Volterra => vec![volterra_part],
        Scenario::McKeanSinger => vec![mckean_singer_part],
        Scenario::KeyLemma => vec![key_lemma_part],
        Scenario::EqfeNumeric => vec![eqfe_numeric_part],
        Scenario::EqfeSymbolic => vec![eqfe_symbolic_part],
        Scenario::Zeta => vec![zeta_part],
        Scenario::Decay => vec![decay_part],
        Scenario::SmallTime => vec![small_time_part],
        Scenario::VerifyAll => criteria().into_iter().flat_map(|(_, _, p)| p).collect(),
    }
}

fn settings(cfg: &RunConfig) -> Result<Settings, CliError> {
    let exec = match cfg.threads {
        Some(1) => Exec::Sequential,
        Some(n) => {
            // the global pool can only be set once per process; later calls keep it
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            Exec::Parallel
        }
        None => Exec::Parallel,
    };
    Ok(Settings { seed: cfg.seed, quick: cfg.quick, quad: cfg.quad.apply()?, exec })
}

pub fn run_config(cfg: &RunConfig) -> Result<ExitReport, CliError> {
    cfg.validate()?;
    let s = settings(cfg)?;
    let mut sections = Vec::new();
    let mut trace = Vec::new();
    match &cfg.model_path {
        Some(path) => sections.extend(run_on_model(cfg.scenario, path, &s)?),
        None if cfg.scenario == Scenario::VerifyAll => sections.extend(verify_all(&s)),
        None => {
            for part in parts_for(cfg.scenario) {
                sections.push(part(&s)?);
            }
        }
    }
    if cfg.trace_ir && cfg.scenario == Scenario::EqfeSymbolic {
        trace = trace_ir();
    }
    let header = vec![
        format!("seed: {}", cfg.seed),
        format!("mode: {}", if cfg.quick { "quick" } else { "full" }),
    ];
    let title = cfg.scenario.name();
    let markdown = render_markdown(title, &header, &sections);
    if let Some(dir) = &cfg.out_dir {
        emit_report(dir, title, title, &header, &sections)?;
        if cfg.dump {
            let json = serde_json::to_string_pretty(&sections).expect("sections serialize");
            std::fs::write(dir.join(format!("{title}.json")), json)?;
            if !trace.is_empty() {
                std::fs::write(dir.join(format!("{title}.ir.txt")), trace.join("\n") + "\n")?;
            }
        }
    }
    let mut code = if sections.iter().all(Section::passed) { 0 } else { 2 };
    if sections.iter().any(|s| s.checks.iter().any(|c| c.name == "non-convergence")) {
        code = 4;
    }
    Ok(ExitReport { scenario: cfg.scenario, sections, trace, markdown, code })
}

/// Every acceptance part in order; part errors become failing checks so the
/// remaining parts still run.
pub fn verify_all(s: &Settings) -> Vec<Section> {
    let mut out = Vec::new();
    for (id, title, parts) in suite::criteria() {
        for part in parts {
            match part(s) {
                Ok(sec) => out.push(sec),
                Err(e) => {
                    let mut sec = Section::new(&format!("criterion-{id}"), title);
                    let name = if matches!(e, CliError::NonConvergence(_)) { "non-convergence" } else { "error" };
                    sec.checks.push(Check::flag(name, "run", false));
                    sec.notes.push(e.to_string());
                    out.push(sec);
                }
            }
        }
    }
    out
}

fn trace_ir() -> Vec<String> {
    use symtrace::{differentiate, print_expr, Var};
    let r = symtrace::build_r_symbolic();
    let mut out = Vec::new();
    for (i, row) in r.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            out.push(format!("r[{}][{}] = {}", i + 1, j + 1, print_expr(e)));
            for (tag, var) in [("dt", Var::T), ("dl", Var::Lambda)] {
                let d = differentiate(e, var).expect("r has no d");
                out.push(format!("{tag} r[{}][{}] = {}", i + 1, j + 1, print_expr(&d)));
            }
        }
    }
    match symtrace::verify_eqfe() {
        Ok(rep) => {
            out.push(format!("lhs = {}", print_expr(&rep.lhs)));
            out.push(format!("rhs = {}", print_expr(&rep.rhs)));
            out.push(format!("residual = {}", print_expr(&rep.residual)));
        }
        Err(e) => out.push(e.to_string()),
    }
    out
}

fn gate(sec: &mut Section, name: &str, m: &CMat, lm: &LoadedModel) -> Result<(), CliError> {
    let scale = linalg::fro(m).max(1.0);
    sec.checks.push(Check::bound(&format!("{name}-hermitian"), "input", linalg::hermitian_residual(m), 1e-12 * scale));
    let res = check_equivariance(&lm.model, &OperatorValue::new(m.clone()))?;
    sec.checks.push(Check::bound(&format!("{name}-equivariant"), "input", res, 1e-10 * scale));
    Ok(())
}

fn run_on_model(sc: Scenario, path: &Path, s: &Settings) -> Result<Vec<Section>, CliError> {
    if sc == Scenario::EqfeSymbolic {
        return Ok(vec![suite::eqfe_symbolic_part(s)?]);
    }
    if matches!(sc, Scenario::McKeanSinger | Scenario::VerifyAll) {
        return Err(CliError::Config(format!("{} runs on seeded instances only; drop the model file", sc.name())));
    }
    let lm = ModelFile::load(path)?.build()?;
    let d = lm.d.clone().ok_or_else(|| CliError::Config("model file has no operator `d`".into()))?;
    let n = d.nrows();
    let has_c = lm.c.is_some();
    let cm = lm.c.clone().unwrap_or_else(|| CMat::zeros(n, n));
    let mut gates = Section::new("input", "Input gates");
    gate(&mut gates, "d", &d, &lm)?;
    if has_c {
        gate(&mut gates, "c", &cm, &lm)?;
    }
    if !gates.passed() {
        return Ok(vec![gates]);
    }
    let model = &lm.model;
    let dv = OperatorValue::hermitian(d.clone())?.equivariant_in(model)?;
    let cv = OperatorValue::hermitian(cm.clone())?.equivariant_in(model)?;
    let sum = OperatorValue::hermitian(&d + &cm)?;
    let need_c = || {
        if has_c {
            Ok(())
        } else {
            Err(CliError::Config(format!("{} needs a perturbation `c` in the model file", sc.name())))
        }
    };
    let mut sec = Section::new(sc.name(), "Configured model");
    let inst = "model";
    match sc {
        Scenario::Eta => {
            let r = eta_quadrature(&dv, model, &s.quad)?;
            sec.checks.push(Check::compare("eta-vs-sign", inst, r.value, eta_oracle(&dv, model)?, 1e-8));
            if has_c {
                let p = eta_perturbed(&dv, &cv, model, &s.quad)?;
                sec.checks.push(Check::compare("perturbed-vs-sign", inst, p.value, eta_oracle(&sum, model)?, 1e-8));
            }
        }
        Scenario::EtaGap => {
            let sk = sign_and_kernel(&dv, None)?;
            let g = sk.gap;
            let sw = eta_gap_sweep(&dv, model, &[g / 2.0, g / 10.0, g / 100.0], &s.quad)?;
            let oracle = model.tau_unchecked(sk.sign0.matrix()) + model.tau_unchecked(sk.ker_proj.matrix());
            sec.checks.push(Check::compare("limit-vs-oracle", inst, sw.limit, oracle, 1e-8));
            for row in &sw.rows {
                let budget = (2.0 * (row.error_budget() + sw.eta_d.error_budget())).max(1e-12);
                let th = format!("theta={:.6e}", row.theta.unwrap_or(f64::NAN));
                sec.checks.push(Check::compare("shifted-vs-limit", th, row.value, sw.limit, budget));
            }
            let d2 = OperatorValue::hermitian(&d * &d)?;
            let p = contour_projector(&d2, 0.4 * g * g)?;
            let err = linalg::opnorm(&(p.matrix() - sk.ker_proj.matrix()));
            sec.checks.push(Check::bound("riesz-vs-kernel", inst, err, 1e-8));
        }
        Scenario::Stability => {
            need_c()?;
            let grid: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
            let path = |r: f64| OperatorValue::new(&cm * c(r, 0.0));
            let rows = eta_stability_sweep(&dv, path, model, &grid, &s.quad)?;
            let worst = rows.iter().map(|r| (r.value - rows[0].value).norm()).fold(0.0, f64::max);
            sec.checks.push(Check::bound("path-variation", inst, worst, 1e-8));
        }
        Scenario::Rho => {
            need_c()?;
            let vals = [1e-2, 1e-3, 1e-4]
                .iter()
                .map(|&e| rho_number(&dv, &sum, model, e, &s.quad).map(|r| r.value))
                .collect::<Result<Vec<_>, _>>()?;
            sec.checks.push(Check::compare("eps-1e-3-vs-1e-2", inst, vals[1], vals[0], 1e-8));
            sec.checks.push(Check::compare("eps-1e-4-vs-1e-2", inst, vals[2], vals[0], 1e-8));
        }
        Scenario::Volterra => {
            let (d2, a) = perturbed_square(&dv, &cv)?;
            for t in [0.1, 1.0, 10.0] {
                let r = volterra_heat(&d2, &a, t, 1e-9)?;
                let oracle = linalg::expm(&(sum.matrix() * sum.matrix() * c(-t, 0.0)));
                let err = linalg::opnorm(&(r.value.matrix() - oracle));
                sec.checks.push(Check::bound("series-vs-expm", format!("t={t}"), err, 1e-8));
            }
        }
        Scenario::KeyLemma | Scenario::Zeta | Scenario::EqfeNumeric => {
            let ind = make_indicial(&dv, &cv, None, model)?;
            match sc {
                Scenario::KeyLemma => {
                    let r = key_lemma_check(&ind, model, s_grid(s), &s.quad, s.exec)?;
                    let tol = 1e-3 * (1.0 + r.eta.norm());
                    sec.checks.push(Check::compare("cocycle-vs-half-eta", inst, r.lhs.value, r.rhs, tol));
                }
                Scenario::Zeta => {
                    let r_grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
                    let z = zeta_sweep(&ind, model, &r_grid, s_grid(s), &s.quad, s.exec)?;
                    let tol = 1e-3 * (1.0 + z.zeta0_closed.norm());
                    sec.checks.push(Check::bound("variation", inst, z.variation, tol));
                }
                _ => {
                    for i in 0..5 {
                        for j in 0..5 {
                            let (t, l) = (0.2 + 0.7 * i as f64, -3.0 + 1.5 * j as f64);
                            let r = eqfe_check(&ind, model, t, l);
                            sec.checks.push(Check::compare("residual", format!("t={t} l={l}"), r.lhs, r.rhs, 1e-8));
                        }
                    }
                }
            }
        }
        Scenario::Decay => {
            for r in decay_profile(&dv, &cv, &[0.0, 1.0, 2.0, 4.0, 8.0])? {
                sec.checks.push(Check::bound("norm-vs-exponential", format!("t={}", r.t), r.norm, r.bound));
            }
        }
        Scenario::SmallTime => {
            let k = OperatorValue::new(linalg::identity(n));
            for delta in [1e-1, 1e-2, 1e-3] {
                let r = small_time_defect(&k, &dv, &cv, delta, 1.0)?;
                sec.checks.push(Check::bound("defect-vs-bound", format!("delta={delta}"), r.defect, r.bound));
            }
        }
        Scenario::EqfeSymbolic | Scenario::McKeanSinger | Scenario::VerifyAll => unreachable!(),
    }
    Ok(vec![gates, sec])
}

fn s_grid(s: &Settings) -> eta_forge::bcyl::Grid2d {
    if s.quick {
        eta_forge::bcyl::Grid2d::default().scaled(0.5)
    } else {
        eta_forge::bcyl::Grid2d::default()
    }
}
