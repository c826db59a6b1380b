//! The seeded verification suite.  Each part builds its own instances from
//! the run seed and returns one `Section`; `verify-all` runs them in order.

use std::f64::consts::PI;

use eta_forge::bcyl::{eqfe_check, key_lemma_check, make_indicial, zeta_sweep, Grid2d, IndicialData};
use eta_forge::eta::{
    eta_gap_sweep, eta_oracle, eta_quadrature, eta_stability_sweep, rho_number, symmetric_perturbation_check,
    EtaQuadrature,
};
use eta_forge::funcalc::{contour_projector, decay_profile};
use eta_forge::heatflow::{graded_model, mckean_singer, perturbed_square, small_time_defect, volterra_heat};
use eta_forge::linalg::{self, c, CMat};
use eta_forge::opmodel::{circle_dirac_model, random_equivariant_hermitian, sign_and_kernel, EquivariantModel};
use eta_forge::zoo::{
    random_boundary_pair, random_gapped_with_kernel, random_invertible, random_model, random_model_of_dim,
    random_odd_map,
};
use eta_forge::{Exec, OperatorValue, C64};

use crate::report::{Check, Section};
use crate::CliError;

#[derive(Clone, Copy, Debug)]
pub struct Settings {
    pub seed: u64,
    pub quick: bool,
    pub quad: EtaQuadrature,
    pub exec: Exec,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { seed: 0, quick: false, quad: EtaQuadrature::default(), exec: Exec::Parallel }
    }
}

impl Settings {
    fn count(&self, full: usize, quick: usize) -> usize {
        if self.quick {
            quick
        } else {
            full
        }
    }

    fn grid(&self) -> Grid2d {
        if self.quick {
            Grid2d::default().scaled(0.5)
        } else {
            Grid2d::default()
        }
    }
}

pub type Part = fn(&Settings) -> Result<Section, CliError>;

/// Runs `f` over `n` instance indices under the execution policy, keeping order.
fn per_instance(
    s: &Settings,
    n: usize,
    f: impl Fn(u64) -> Result<Vec<Check>, CliError> + Sync + Send,
) -> Result<Vec<Check>, CliError> {
    let seed = s.seed;
    let rows = s.exec.map_range(n, |i| f(seed + i as u64));
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

pub fn eta_oracle_part(s: &Settings) -> Result<Section, CliError> {
    let mut sec = Section::new("eta", "Eta quadrature against the spectral sign oracle");
    let quad = s.quad;
    sec.checks = per_instance(s, s.count(100, 25), |seed| {
        let model = random_model(seed, 32);
        let d = random_invertible(&model, seed, 1.0 + (seed % 3) as f64, 0.02);
        let r = eta_quadrature(&d, &model, &quad)?;
        let o = eta_oracle(&d, &model)?;
        let inst = format!("seed={seed} dim={}", d.dim());
        Ok(vec![Check::compare("eta-vs-sign", inst, r.value, o, 1e-8)])
    })?;
    Ok(sec)
}

fn heat_pair(seed: u64, max_dim: usize) -> (EquivariantModel, OperatorValue, OperatorValue) {
    let model = random_model(seed, max_dim);
    let d = random_invertible(&model, seed, 1.0, 0.05);
    let cp = random_equivariant_hermitian(&model, seed + 1000, 0.1);
    (model, d, cp)
}

pub fn volterra_part(s: &Settings) -> Result<Section, CliError> {
    let mut sec = Section::new("volterra", "Duhamel series against the dense exponential of the perturbed square");
    sec.checks = per_instance(s, s.count(50, 15), |seed| {
        let (_, d, cp) = heat_pair(seed, 16);
        let (d2, a) = perturbed_square(&d, &cp)?;
        let sum = d.matrix() + cp.matrix();
        let mut out = Vec::new();
        for t in [0.1, 1.0, 10.0] {
            let r = volterra_heat(&d2, &a, t, 1e-9)?;
            let oracle = linalg::expm(&(&sum * &sum * c(-t, 0.0)));
            let err = linalg::opnorm(&(r.value.matrix() - oracle));
            out.push(Check::bound("series-vs-expm", format!("seed={seed} t={t}"), err, 1e-8));
        }
        Ok(out)
    })?;
    Ok(sec)
}

pub fn gap_limit_part(s: &Settings) -> Result<Section, CliError> {
    let mut sec = Section::new("eta-gap", "Gap-shifted eta against eta plus the kernel weight");
    let quad = s.quad;
    sec.checks = per_instance(s, s.count(20, 8), |seed| {
        let model = random_model(seed, 12);
        let d = random_gapped_with_kernel(&model, seed, 1.0, 0.1);
        let sk = sign_and_kernel(&d, None)?;
        let gap = sk.gap;
        let sweep = eta_gap_sweep(&d, &model, &[gap / 2.0, gap / 10.0, gap / 100.0], &quad)?;
        let oracle = model.tau_unchecked(sk.sign0.matrix()) + model.tau_unchecked(sk.ker_proj.matrix());
        let mut out = vec![Check::compare("limit-vs-oracle", format!("seed={seed}"), sweep.limit, oracle, 1e-8)];
        for (k, row) in sweep.rows.iter().enumerate() {
            let budget = (2.0 * (row.error_budget() + sweep.eta_d.error_budget())).max(1e-12);
            let inst = format!("seed={seed} theta=gap/{}", [2, 10, 100][k]);
            out.push(Check::compare("shifted-vs-limit", inst, row.value, sweep.limit, budget));
        }
        out.push(Check::bound("theta-constancy", format!("seed={seed}"), sweep.max_deviation, 1e-8));
        Ok(out)
    })?;
    Ok(sec)
}

pub fn projector_part(s: &Settings) -> Result<Section, CliError> {
    let mut sec = Section::new("contour-projector", "Circle Riesz projector against the kernel projector");
    sec.checks = per_instance(s, s.count(20, 8), |seed| {
        let model = random_model(seed, 12);
        let d = random_gapped_with_kernel(&model, seed, 1.0, 0.2);
        let sk = sign_and_kernel(&d, None)?;
        let d2 = OperatorValue::hermitian(d.matrix() * d.matrix())?;
        let p = contour_projector(&d2, 0.4 * sk.gap * sk.gap)?;
        let err = linalg::opnorm(&(p.matrix() - sk.ker_proj.matrix()));
        Ok(vec![Check::bound("riesz-vs-kernel", format!("seed={seed}"), err, 1e-8)])
    })?;
    Ok(sec)
}

/// Seeded 4×4 boundary pairs with noncommuting D, C.
fn boundary_instance(seed: u64) -> Result<(EquivariantModel, OperatorValue, OperatorValue, IndicialData), CliError> {
    let model = random_model_of_dim(seed, 4);
    let (d, cp) = random_boundary_pair(&model, seed, 0.5, 0.1);
    let ind = make_indicial(&d, &cp, None, &model)?;
    Ok((model, d, cp, ind))
}

fn commutator_norm(d: &OperatorValue, cp: &OperatorValue) -> f64 {
    linalg::fro(&linalg::commutator(d.matrix(), cp.matrix()))
}

pub fn eqfe_numeric_part(s: &Settings) -> Result<Section, CliError> {
    let mut sec = Section::new("eqfe-numeric", "Cocycle integrand identity on a (t, λ) grid");
    let seeds = noncommuting_seeds(s.seed, s.count(10, 4))?;
    let checks = s.exec.map(&seeds, |&seed| -> Result<Vec<Check>, CliError> {
        let (model, d, cp, ind) = boundary_instance(seed)?;
        let mut worst = 0.0_f64;
        for i in 0..5 {
            for j in 0..5 {
                let r = eqfe_check(&ind, &model, 0.2 + 0.7 * i as f64, -3.0 + 1.5 * j as f64);
                worst = worst.max(r.residual);
            }
        }
        let inst = format!("seed={seed}");
        Ok(vec![
            Check::at_least("commutator-norm", inst.clone(), commutator_norm(&d, &cp), 1e-3),
            Check::bound("max-residual", inst, worst, 1e-8),
        ])
    });
    for c in checks {
        sec.checks.extend(c?);
    }
    Ok(sec)
}

/// First `n` seeds from `seed` on whose boundary pair does not commute.
fn noncommuting_seeds(seed: u64, n: usize) -> Result<Vec<u64>, CliError> {
    let mut out = Vec::new();
    let mut k = seed;
    while out.len() < n {
        if k > seed + 10_000 {
            return Err(CliError::ScenarioFailed("no noncommuting boundary pairs".into()));
        }
        let model = random_model_of_dim(k, 4);
        let (d, cp) = random_boundary_pair(&model, k, 0.5, 0.1);
        if commutator_norm(&d, &cp) > 1e-3 {
            out.push(k);
        }
        k += 1;
    }
    Ok(out)
}

pub fn eqfe_symbolic_part(_s: &Settings) -> Result<Section, CliError> {
    let mut sec = Section::new("eqfe-symbolic", "Exact symbolic expansion of the cocycle integrand identity");
    let r = symtrace::build_r_symbolic();
    let defect = symtrace::idempotency_defect(&r).map_err(|e| CliError::ScenarioFailed(e.to_string()))?;
    let idem_terms: usize = defect.iter().flatten().map(|e| e.len()).sum();
    sec.checks.push(Check::bound("r-squared-minus-r-terms", "exact", idem_terms as f64, 0.0));
    match symtrace::verify_eqfe() {
        Ok(rep) => {
            sec.checks.push(Check::bound("residual-terms", "exact", rep.residual.len() as f64, 0.0));
            sec.notes.extend(rep.summary().lines().map(String::from));
        }
        Err(symtrace::SymError::NonzeroResidual(text)) => {
            sec.checks.push(Check::flag("residual-terms", "exact", false));
            sec.notes.push(format!("residual: {text}"));
        }
        Err(e) => return Err(CliError::ScenarioFailed(e.to_string())),
    }
    let m = symtrace::mutation_sweep();
    sec.checks.push(Check::compare(
        "mutations-detected",
        "exact",
        c(m.detected as f64, 0.0),
        c(m.tried as f64, 0.0),
        0.0,
    ));
    sec.notes.push(format!("mutations: {}/{} detected", m.detected, m.tried));
    Ok(sec)
}

/// Boundary instances whose eta is well away from zero.
pub fn key_instances(seed: u64, n: usize) -> Result<Vec<(u64, EquivariantModel, IndicialData)>, CliError> {
    let mut out = Vec::new();
    let mut k = seed;
    while out.len() < n {
        if k > seed + 10_000 {
            return Err(CliError::ScenarioFailed("no usable boundary instances".into()));
        }
        let (model, d, cp, ind) = boundary_instance(k)?;
        let sum = OperatorValue::new(d.matrix() + cp.matrix());
        let eta = eta_oracle(&sum, &model)?;
        if eta.norm() > 0.5 && commutator_norm(&d, &cp) > 0.05 {
            out.push((k, model, ind));
        }
        k += 1;
    }
    Ok(out)
}

pub fn key_lemma_part(s: &Settings) -> Result<Section, CliError> {
    let mut sec = Section::new("key-lemma", "Eta cocycle integral against minus half the boundary eta");
    let (fine_factor, tol, fine_tol) = if s.quick { (2.0, 1e-2, 1e-4) } else { (4.0, 1e-3, 1e-5) };
    for (seed, model, ind) in key_instances(s.seed, s.count(5, 3))? {
        let base = key_lemma_check(&ind, &model, s.grid(), &s.quad, s.exec)?;
        let fine = key_lemma_check(&ind, &model, s.grid().scaled(fine_factor), &s.quad, s.exec)?;
        let scale = 1.0 + base.eta.norm();
        sec.checks.push(Check::compare("cocycle-vs-half-eta", format!("seed={seed}"), base.lhs.value, base.rhs, tol * scale));
        sec.checks.push(Check::compare(
            "refined",
            format!("seed={seed} x{fine_factor}"),
            fine.lhs.value,
            fine.rhs,
            fine_tol * scale,
        ));
    }
    Ok(sec)
}

pub fn zeta_part(s: &Settings) -> Result<Section, CliError> {
    let mut sec = Section::new("zeta", "Constancy of the interpolating zeta function");
    let points = s.count(11, 6);
    let r_grid: Vec<f64> = (0..points).map(|k| k as f64 / (points - 1) as f64).collect();
    for (seed, model, ind) in key_instances(s.seed, s.count(5, 3))? {
        let z = zeta_sweep(&ind, &model, &r_grid, s.grid(), &s.quad, s.exec)?;
        let inst = format!("seed={seed}");
        sec.checks.push(Check::bound(
            "variation",
            inst.clone(),
            z.variation,
            1e-3 * (1.0 + z.zeta0_closed.norm()),
        ));
        sec.checks.push(Check::compare("zeta0-closed-form", inst, z.rows[0].1.value, z.zeta0_closed, 1e-8));
    }
    Ok(sec)
}

fn blocks(model: &EquivariantModel, np: usize) -> (Vec<CMat>, Vec<CMat>) {
    let nm = model.dim() - np;
    model
        .elements()
        .iter()
        .map(|u| (u.view((0, 0), (np, np)).into_owned(), u.view((np, np), (nm, nm)).into_owned()))
        .unzip()
}

pub fn mckean_singer_part(s: &Settings) -> Result<Section, CliError> {
    let mut sec = Section::new("mckean-singer", "Supertrace of the heat operator against the kernel index");
    let t_grid = [0.0, 0.1, 0.5, 1.0, 4.0, 10.0];
    let mut checks = per_instance(s, s.count(20, 8), |seed| {
        let base = random_model(seed, 4);
        let mut plus = vec![linalg::direct_sum(base.g(), base.g())];
        let mut minus = vec![base.g().clone()];
        for u in base.generators() {
            plus.push(linalg::direct_sum(u, u));
            minus.push(u.clone());
        }
        let graded = graded_model(&plus, &minus, 0)?;
        let np = 2 * base.dim();
        let (up, um) = blocks(&graded, np);
        let a_plus = random_odd_map(&up, &um, seed);
        let r = mckean_singer(&a_plus, &graded, &t_grid)?;
        let inst = format!("seed={seed}");
        let worst = r.rows.iter().map(|(_, v)| (v - r.index).norm()).fold(0.0, f64::max);
        Ok(vec![
            Check::bound("t-variation", inst.clone(), r.variation, 1e-10),
            Check::bound("supertrace-vs-index", inst, worst, 1e-10),
        ])
    })?;
    // C² → C with A⁺ = (0 1): kernel spanned by e₁, index one
    let a_plus = linalg::from_real_rows(&[&[0.0, 1.0]]);
    let model = graded_model(&[linalg::diag_real(&[1.0, -1.0])], &[linalg::diag_real(&[-1.0])], 0)?;
    let r = mckean_singer(&a_plus, &model, &t_grid)?;
    checks.push(Check::compare("rectangular-index", "2x1", r.index, c(1.0, 0.0), 1e-10));
    checks.push(Check::bound("t-variation", "2x1", r.variation, 1e-10));
    sec.checks = checks;
    Ok(sec)
}

pub fn stability_part(s: &Settings) -> Result<Section, CliError> {
    let mut sec = Section::new("stability", "Eta along invertible equivariant paths");
    let quad = s.quad;
    let grid: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    sec.checks = per_instance(s, s.count(10, 4), |seed| {
        let model = random_model(seed, 10);
        let d = random_invertible(&model, seed, 1.0, 0.4);
        let b0 = random_equivariant_hermitian(&model, seed + 1, 0.1);
        let b1 = random_equivariant_hermitian(&model, seed + 2, 0.1);
        let path = |r: f64| OperatorValue::new(b0.matrix() * c(1.0 - r, 0.0) + b1.matrix() * c(r, 0.0));
        let rows = eta_stability_sweep(&d, path, &model, &grid, &quad)?;
        let worst = rows.iter().map(|r| (r.value - rows[0].value).norm()).fold(0.0, f64::max);
        Ok(vec![Check::bound("path-variation", format!("seed={seed}"), worst, 1e-8)])
    })?;
    Ok(sec)
}

pub fn rho_part(s: &Settings) -> Result<Section, CliError> {
    let mut sec = Section::new("rho", "Rho number across three decades of the invertibilizing shift");
    let quad = s.quad;
    sec.checks = per_instance(s, s.count(10, 4), |seed| {
        let model = random_model(seed, 8);
        let d1 = random_gapped_with_kernel(&model, seed, 1.0, 0.2);
        let d2 = random_invertible(&model, seed + 5, 1.0, 0.2);
        let vals: Vec<C64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&e| rho_number(&d1, &d2, &model, e, &quad).map(|r| r.value))
            .collect::<Result<_, _>>()?;
        Ok(vec![
            Check::compare("eps-1e-3-vs-1e-2", format!("seed={seed}"), vals[1], vals[0], 1e-8),
            Check::compare("eps-1e-4-vs-1e-2", format!("seed={seed}"), vals[2], vals[0], 1e-8),
        ])
    })?;
    Ok(sec)
}

pub fn symmetric_part(s: &Settings) -> Result<Section, CliError> {
    let mut sec = Section::new("symmetric", "Eta of a symmetrically perturbed direct sum");
    let quad = s.quad;
    sec.checks = per_instance(s, s.count(10, 4), |seed| {
        let base = random_model(seed, 4);
        let nv = base.dim();
        let dv = random_invertible(&base, seed, 1.0, 0.1);
        let m = random_equivariant_hermitian(&base, seed + 3, 1.0).into_matrix() + linalg::identity(nv) * c(2.0, 0.0);
        let n = random_equivariant_hermitian(&base, seed + 4, 0.3).into_matrix();
        let zero = CMat::zeros(nv, nv);
        let dw = OperatorValue::new(linalg::block2(&zero, &m, &m.adjoint(), &zero));
        let b = OperatorValue::new(linalg::block2(&zero, &n, &n.adjoint(), &zero));
        let iw = linalg::direct_sum(&linalg::identity(nv), &(-linalg::identity(nv)));
        let model = base.direct_sum(&base)?.direct_sum(&base)?;
        let r = symmetric_perturbation_check(&dv, &dw, &iw, &b, &model, &quad)?;
        let inst = format!("seed={seed}");
        Ok(vec![
            Check::compare(
                "sum-vs-v-block",
                inst.clone(),
                r.lhs.value,
                r.rhs.value,
                (r.lhs.error_budget() + r.rhs.error_budget()).max(1e-12),
            ),
            Check::bound("pointwise-integrand", inst, r.pointwise, 1e-10),
        ])
    })?;
    Ok(sec)
}

pub fn small_time_part(s: &Settings) -> Result<Section, CliError> {
    let mut sec = Section::new("small-time", "Small-time heat defect against its first-order bound");
    sec.checks = per_instance(s, s.count(8, 4), |seed| {
        let (model, d, cp) = heat_pair(seed, 8);
        let k = random_equivariant_hermitian(&model, seed + 7, 1.0);
        let mut out = Vec::new();
        for delta in [1e-1, 1e-2, 1e-3] {
            let r = small_time_defect(&k, &d, &cp, delta, 1.0)?;
            out.push(Check::bound("defect-vs-bound", format!("seed={seed} delta={delta}"), r.defect, r.bound));
        }
        Ok(out)
    })?;
    Ok(sec)
}

pub fn decay_part(s: &Settings) -> Result<Section, CliError> {
    let mut sec = Section::new("decay", "Large-time heat decay against the spectral-gap exponential");
    sec.checks = per_instance(s, s.count(10, 4), |seed| {
        let (_, d, cp) = heat_pair(seed, 12);
        let rows = decay_profile(&d, &cp, &[0.0, 1.0, 2.0, 4.0, 8.0])?;
        Ok(rows
            .iter()
            .map(|r| {
                // same relative slack as the bound itself allows at t = 0
                let tol = r.bound * (1.0 + 1e-10);
                Check::bound("norm-vs-exponential", format!("seed={seed} t={}", r.t), r.norm, tol)
            })
            .collect())
    })?;
    Ok(sec)
}

/// Abel-regularized `Σ_k (−1)^k sign(k + ½) r^{|k+½|}` as r → 1, by two
/// Richardson levels in 1 − r.  Uses nothing from the eta code path.
pub fn abel_circle_eta() -> f64 {
    let abel = |r: f64| -> f64 {
        let mut s = 0.0;
        for k in -60_000i64..=60_000 {
            let lam = k as f64 + 0.5;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * lam.signum() * r.powf(lam.abs());
        }
        s
    };
    let a: Vec<f64> = [4e-3, 2e-3, 1e-3].iter().map(|h| abel(1.0 - h)).collect();
    let r1 = [2.0 * a[1] - a[0], 2.0 * a[2] - a[1]];
    (4.0 * r1[1] - r1[0]) / 3.0
}

pub fn circle_part(s: &Settings) -> Result<Section, CliError> {
    let mut sec = Section::new("circle-dirac", "Truncated circle Dirac operator under the half-turn rotation");
    let ks = [50usize, 100, 200];
    let mut vals = Vec::new();
    for &k in &ks {
        let (d, model) = circle_dirac_model(k, 0.5, PI)?;
        vals.push(eta_quadrature(&d, &model, &s.quad)?.value);
    }
    // two Richardson levels in 1/K
    let r1 = [vals[1] * 2.0 - vals[0], vals[2] * 2.0 - vals[1]];
    let extrapolated = (r1[1] * 4.0 - r1[0]) / 3.0;
    let oracle = abel_circle_eta();
    for (k, v) in ks.iter().zip(&vals) {
        sec.notes.push(format!("K={k}: {:.12} {:+.3e}i", v.re, v.im));
    }
    sec.notes.push(format!("Abel value: {oracle:.12}"));
    sec.checks.push(Check::compare("extrapolated-vs-abel", "K=50,100,200", extrapolated, c(oracle, 0.0), 1e-3));
    Ok(sec)
}

/// Acceptance parts in their fixed order, grouped by criterion number.
pub fn criteria() -> Vec<(usize, &'static str, Vec<Part>)> {
    vec![
        (1, "eta oracle agreement", vec![eta_oracle_part as Part]),
        (2, "Volterra series vs exponential", vec![volterra_part]),
        (3, "gap-limit formula", vec![gap_limit_part]),
        (4, "contour projector", vec![projector_part]),
        (5, "cocycle identity, numeric", vec![eqfe_numeric_part]),
        (6, "cocycle identity, symbolic", vec![eqfe_symbolic_part]),
        (7, "key lemma", vec![key_lemma_part]),
        (8, "zeta constancy", vec![zeta_part]),
        (9, "McKean-Singer", vec![mckean_singer_part]),
        (10, "stability and rho", vec![stability_part, rho_part]),
        (11, "symmetric perturbation", vec![symmetric_part]),
        (12, "small and large time", vec![small_time_part, decay_part]),
        (13, "circle Dirac", vec![circle_part]),
    ]
}
