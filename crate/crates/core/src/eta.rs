//! Delocalized eta invariants `η_g(D) = (2/√π) ∫_0^∞ τ_g(D e^{-u²D²}) du`
//! and the perturbed, gap-regularized, rho and symmetric variants.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};
use crate::heatflow::{perturbed_square, volterra_heat_squaring};
use crate::linalg::{self, c, CMat, Eigh, C64};
use crate::opmodel::{
    check_equivariance, require_hermitian, sign_and_kernel_from, EquivariantModel, OperatorValue,
    EQUIVARIANCE_TOL,
};
use crate::quad::{graded_edges, Rule};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaQuadrature {
    /// Total Gauss–Legendre nodes on `[0, U]`.
    pub nodes: usize,
    /// `U = u_factor / gap`.
    pub u_factor: f64,
    /// Eigenvalues with `|λ| ≤ kernel_tol` count as kernel (default relative 1e-10).
    pub kernel_tol: Option<f64>,
}

impl Default for EtaQuadrature {
    fn default() -> Self {
        EtaQuadrature {
            nodes: 256,
            u_factor: 8.0,
            kernel_tol: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaReport {
    pub value: C64,
    pub quadrature_error: f64,
    pub tail_bound: f64,
    pub oracle_value: Option<C64>,
    pub theta: Option<f64>,
}

impl EtaReport {
    pub fn error_budget(&self) -> f64 {
        self.quadrature_error + self.tail_bound
    }

    pub fn with_oracle(mut self, oracle: C64) -> Self {
        self.oracle_value = Some(oracle);
        self
    }

    /// `|value − oracle| ≤ quadrature_error + tail_bound` (true when no oracle is attached).
    pub fn consistent(&self) -> bool {
        self.oracle_value
            .is_none_or(|o| (self.value - o).norm() <= self.error_budget())
    }
}

fn require_equivariant(model: &EquivariantModel, d: &OperatorValue) -> Result<()> {
    let residual = check_equivariance(model, d)?;
    let scale = linalg::fro(d.matrix()).max(1.0);
    if residual > EQUIVARIANCE_TOL * scale {
        return Err(ForgeError::NotEquivariant { residual });
    }
    Ok(())
}

/// Spectral data an eta integral needs: eigenvalues and their twisted weights
/// `w_i = ⟨v_i, twist · v_i⟩`, so that `τ_g(f(D)) = Σ w_i f(λ_i)`.
#[derive(Clone, Debug)]
pub struct TwistedSpectrum {
    pub values: Vec<f64>,
    pub weights: Vec<C64>,
    pub kernel_tol: f64,
}

impl TwistedSpectrum {
    pub fn new(model: &EquivariantModel, d: &CMat, kernel_tol: Option<f64>) -> Self {
        let eig = Eigh::new(d);
        let tw = eig.vectors.adjoint() * model.twist() * &eig.vectors;
        let scale = eig.spectral_radius();
        TwistedSpectrum {
            weights: (0..eig.dim()).map(|i| tw[(i, i)]).collect(),
            kernel_tol: kernel_tol.unwrap_or(1e-10 * scale),
            values: eig.values,
        }
    }

    pub fn gap(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.abs())
            .filter(|&a| a > self.kernel_tol)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn top(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// `(2/√π) τ_g(D e^{-u²D²})`.
    pub fn integrand(&self, u: f64) -> C64 {
        let mut acc = c(0.0, 0.0);
        for (&l, &w) in self.values.iter().zip(&self.weights) {
            if l.abs() > self.kernel_tol {
                acc += w * (l * (-(u * l) * (u * l)).exp());
            }
        }
        acc * (2.0 / PI.sqrt())
    }

    pub fn sign_trace(&self) -> C64 {
        self.values
            .iter()
            .zip(&self.weights)
            .filter(|(l, _)| l.abs() > self.kernel_tol)
            .map(|(l, &w)| w * l.signum())
            .sum()
    }

    pub fn kernel_trace(&self) -> C64 {
        self.values
            .iter()
            .zip(&self.weights)
            .filter(|(l, _)| l.abs() <= self.kernel_tol)
            .map(|(_, &w)| w)
            .sum()
    }
}

/// Composite Gauss–Legendre rule on `[0, U]` with dyadically graded panels,
/// the first resolving the fastest decay `1/top`.
fn eta_rule(gap: f64, top: f64, quad: &EtaQuadrature, halve: bool) -> (Rule, f64) {
    let upper = quad.u_factor / gap;
    let panels = ((upper * top).log2().ceil().max(0.0) as usize + 3).max(4);
    let per_panel = (quad.nodes / panels).max(16);
    let per_panel = if halve { per_panel / 2 } else { per_panel };
    (Rule::composite(&graded_edges(upper, panels), per_panel), upper)
}

fn integrate(rule: &Rule, f: impl Fn(f64) -> C64) -> C64 {
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&u, &w)| f(u) * w)
        .sum()
}

/// `η_g` of a Hermitian equivariant operator by quadrature of the heat integrand.
/// The kernel contributes nothing; the reported error is the change under
/// halving the panel order plus a roundoff floor, the tail bound is the
/// analytic `Σ|w| e^{-U²λ²}/(U|λ|√π)`.
pub fn eta_quadrature(d: &OperatorValue, model: &EquivariantModel, quad: &EtaQuadrature) -> Result<EtaReport> {
    require_hermitian(d.matrix())?;
    require_equivariant(model, d)?;
    let spec = TwistedSpectrum::new(model, d.matrix(), quad.kernel_tol);
    Ok(eta_from_spectrum(&spec, quad))
}

pub fn eta_from_spectrum(spec: &TwistedSpectrum, quad: &EtaQuadrature) -> EtaReport {
    let gap = spec.gap();
    if !gap.is_finite() {
        return EtaReport {
            value: c(0.0, 0.0),
            quadrature_error: 0.0,
            tail_bound: 0.0,
            oracle_value: None,
            theta: None,
        };
    }
    let (fine, upper) = eta_rule(gap, spec.top(), quad, false);
    let (coarse, _) = eta_rule(gap, spec.top(), quad, true);
    let value = integrate(&fine, |u| spec.integrand(u));
    let rough = integrate(&coarse, |u| spec.integrand(u));
    let mass: f64 = spec.weights.iter().map(|w| w.norm()).sum();
    let tail_bound = spec
        .values
        .iter()
        .zip(&spec.weights)
        .filter(|(l, _)| l.abs() > spec.kernel_tol)
        .map(|(l, w)| {
            let x = upper * l.abs();
            w.norm() * (-x * x).exp() / (x * PI.sqrt())
        })
        .sum();
    EtaReport {
        value,
        quadrature_error: (value - rough).norm() + 1e-14 * mass.max(1.0),
        tail_bound,
        oracle_value: None,
        theta: None,
    }
}

/// `τ_g(sign₀ D)`, with `sign(0) = 0`.
pub fn eta_oracle(d: &OperatorValue, model: &EquivariantModel) -> Result<C64> {
    require_hermitian(d.matrix())?;
    require_equivariant(model, d)?;
    let sk = sign_and_kernel_from(&Eigh::new(d.matrix()), None);
    Ok(model.tau_unchecked(sk.sign0.matrix()))
}

fn sum_checked(d: &OperatorValue, cpert: &OperatorValue, model: &EquivariantModel) -> Result<OperatorValue> {
    if d.dim() != cpert.dim() {
        return Err(ForgeError::DimensionMismatch {
            expected: d.dim(),
            found: cpert.dim(),
        });
    }
    require_hermitian(cpert.matrix())?;
    require_equivariant(model, cpert)?;
    let s = OperatorValue::hermitian(d.matrix() + cpert.matrix())?;
    let eig = Eigh::new(s.matrix());
    let min_abs = eig.values.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if min_abs <= 1e-10 * eig.spectral_radius().max(1.0) {
        return Err(ForgeError::NotInvertible { min_abs });
    }
    Ok(s)
}

/// `η_g(D + C)` for an equivariant perturbation keeping `D + C` invertible.
pub fn eta_perturbed(
    d: &OperatorValue,
    cpert: &OperatorValue,
    model: &EquivariantModel,
    quad: &EtaQuadrature,
) -> Result<EtaReport> {
    let s = sum_checked(d, cpert, model)?;
    eta_quadrature(&s, model, quad)
}

/// The same integral with the heat operator at each node produced by the
/// Volterra series around `D²` instead of by diagonalizing `D + C`.
/// Returns the report and the largest pointwise integrand deviation from the
/// diagonal route.
pub fn eta_perturbed_volterra(
    d: &OperatorValue,
    cpert: &OperatorValue,
    model: &EquivariantModel,
    quad: &EtaQuadrature,
    tol: f64,
) -> Result<(EtaReport, f64)> {
    let s = sum_checked(d, cpert, model)?;
    let spec = TwistedSpectrum::new(model, s.matrix(), quad.kernel_tol);
    let direct = eta_from_spectrum(&spec, quad);
    let (rule, _) = eta_rule(spec.gap(), spec.top(), quad, false);
    let (d2, a) = perturbed_square(d, cpert)?;
    let mut value = c(0.0, 0.0);
    let mut deviation = 0.0_f64;
    for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
        let f = if u == 0.0 {
            model.tau_unchecked(s.matrix())
        } else {
            let q = volterra_heat_squaring(&d2, &a, u * u, tol)?;
            model.tau_unchecked(&(s.matrix() * q.value.matrix()))
        } * (2.0 / PI.sqrt());
        deviation = deviation.max((f - spec.integrand(u)).norm());
        value += f * w;
    }
    Ok((
        EtaReport {
            value,
            quadrature_error: direct.quadrature_error + (value - direct.value).norm(),
            tail_bound: direct.tail_bound,
            oracle_value: None,
            theta: None,
        },
        deviation,
    ))
}

#[derive(Clone, Debug)]
pub struct GapSweep {
    pub eta_d: EtaReport,
    pub kernel_trace: C64,
    /// `η_g(D) + τ_g(Π_ker D)`.
    pub limit: C64,
    pub rows: Vec<EtaReport>,
    /// Largest `|η_g(Θ) − limit|` over the grid.
    pub max_deviation: f64,
}

/// `η_g(D + Θ)` over `theta_grid ⊂ (0, gap)` against `η_g(D) + τ_g(Π_ker D)`.
pub fn eta_gap_sweep(
    d: &OperatorValue,
    model: &EquivariantModel,
    theta_grid: &[f64],
    quad: &EtaQuadrature,
) -> Result<GapSweep> {
    require_hermitian(d.matrix())?;
    require_equivariant(model, d)?;
    let spec = TwistedSpectrum::new(model, d.matrix(), quad.kernel_tol);
    let gap = spec.gap();
    if let Some(&bad) = theta_grid.iter().find(|&&t| !(t > 0.0 && t < gap)) {
        return Err(ForgeError::GapViolation(format!(
            "theta {bad:.6e} outside (0, {gap:.6e})"
        )));
    }
    let eta_d = eta_from_spectrum(&spec, quad);
    let kernel_trace = spec.kernel_trace();
    let limit = eta_d.value + kernel_trace;
    let n = d.dim();
    let mut rows = Vec::with_capacity(theta_grid.len());
    let mut max_deviation = 0.0_f64;
    for &theta in theta_grid {
        let shifted = d.matrix() + linalg::identity(n) * c(theta, 0.0);
        let sp = TwistedSpectrum::new(model, &shifted, quad.kernel_tol);
        let mut r = eta_from_spectrum(&sp, quad);
        r.theta = Some(theta);
        r.oracle_value = Some(limit);
        max_deviation = max_deviation.max((r.value - limit).norm());
        rows.push(r);
    }
    Ok(GapSweep {
        eta_d,
        kernel_trace,
        limit,
        rows,
        max_deviation,
    })
}

/// `eps · Π_ker D`: the finite-rank perturbation making `D` invertible.
pub fn invertibilize(d: &OperatorValue, model: &EquivariantModel, eps: f64) -> Result<OperatorValue> {
    require_hermitian(d.matrix())?;
    let eig = Eigh::new(d.matrix());
    let sk = sign_and_kernel_from(&eig, None);
    if !(eps > 0.0) || eps >= sk.gap {
        return Err(ForgeError::InvalidArgument(format!(
            "eps {eps:.3e} must lie in (0, {:.3e})",
            sk.gap
        )));
    }
    let m = sk.ker_proj.matrix() * c(eps, 0.0);
    let m = (&m + m.adjoint()) * c(0.5, 0.0);
    OperatorValue::hermitian(m)?.equivariant_in(model)
}

fn inertia(m: &CMat) -> (usize, f64) {
    let e = Eigh::new(m);
    let scale = e.spectral_radius().max(1.0);
    let pos = e.values.iter().filter(|&&v| v > 0.0).count();
    let min_abs = e.values.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    (pos, min_abs / scale)
}

/// `η_g(D + B(r))` along `r_grid`. Each operator must be invertible and the
/// number of positive eigenvalues must not change between grid points; a
/// change is located by bisection and reported as `GapClosed(r)`.
pub fn eta_stability_sweep(
    d: &OperatorValue,
    path: impl Fn(f64) -> OperatorValue,
    model: &EquivariantModel,
    r_grid: &[f64],
    quad: &EtaQuadrature,
) -> Result<Vec<EtaReport>> {
    let at = |r: f64| d.matrix() + path(r).matrix();
    let mut out = Vec::with_capacity(r_grid.len());
    let mut prev: Option<(f64, usize)> = None;
    for &r in r_grid {
        let b = path(r);
        require_hermitian(b.matrix())?;
        require_equivariant(model, &b)?;
        let m = at(r);
        let (pos, rel) = inertia(&m);
        if rel <= 1e-10 {
            return Err(ForgeError::GapClosed { r });
        }
        if let Some((r0, pos0)) = prev {
            if pos != pos0 {
                let (mut lo, mut hi) = (r0, r);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if inertia(&at(mid)).0 == pos0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Err(ForgeError::GapClosed { r: 0.5 * (lo + hi) });
            }
        }
        prev = Some((r, pos));
        let sp = TwistedSpectrum::new(model, &m, quad.kernel_tol);
        let mut rep = eta_from_spectrum(&sp, quad);
        rep.theta = Some(r);
        rep.oracle_value = Some(sp.sign_trace());
        out.push(rep);
    }
    Ok(out)
}

/// `η_g` of the invertibilized difference `(D₁ ⊕ −D₂) + eps Π_ker`.
pub fn rho_number(
    d1: &OperatorValue,
    d2: &OperatorValue,
    model: &EquivariantModel,
    eps: f64,
    quad: &EtaQuadrature,
) -> Result<EtaReport> {
    require_hermitian(d1.matrix())?;
    require_hermitian(d2.matrix())?;
    require_equivariant(model, d1)?;
    require_equivariant(model, d2)?;
    let doubled = model.direct_sum(model)?;
    let diff = OperatorValue::hermitian(linalg::direct_sum(d1.matrix(), &(-d2.matrix())))?;
    let cpert = invertibilize(&diff, &doubled, eps)?;
    let total = OperatorValue::hermitian(diff.matrix() + cpert.matrix())?;
    let sp = TwistedSpectrum::new(&doubled, total.matrix(), quad.kernel_tol);
    let rep = eta_from_spectrum(&sp, quad);
    let oracle = sp.sign_trace();
    Ok(rep.with_oracle(oracle))
}

#[derive(Clone, Debug)]
pub struct SymmetricCheck {
    pub lhs: EtaReport,
    pub rhs: EtaReport,
    /// Largest `|τ_g((D+B)e^{-u²(D+B)²}) − τ_g(D_V e^{-u²D_V²})|` over the quadrature nodes.
    pub pointwise: f64,
}

/// `η_g(D_V ⊕ (D_W + B))` against `η_g(D_V)` when `D_W` and `B` are odd for an
/// equivariant involution `I_W`. `model` acts on `V ⊕ W` preserving the splitting;
/// traces on `V` use the `V`-block of the same twisted trace.
pub fn symmetric_perturbation_check(
    dv: &OperatorValue,
    dw: &OperatorValue,
    iw: &CMat,
    b: &OperatorValue,
    model: &EquivariantModel,
    quad: &EtaQuadrature,
) -> Result<SymmetricCheck> {
    let (nv, nw) = (dv.dim(), dw.dim());
    if model.dim() != nv + nw {
        return Err(ForgeError::DimensionMismatch {
            expected: model.dim(),
            found: nv + nw,
        });
    }
    if iw.nrows() != nw || b.dim() != nw {
        return Err(ForgeError::DimensionMismatch {
            expected: nw,
            found: if iw.nrows() != nw { iw.nrows() } else { b.dim() },
        });
    }
    let square = linalg::dist(&(iw * iw), &linalg::identity(nw));
    let odd_w = linalg::fro(&linalg::anticommutator(iw, dw.matrix()));
    let odd_b = linalg::fro(&linalg::anticommutator(iw, b.matrix()));
    let residual = square.max(odd_w).max(odd_b);
    if residual > 1e-10 {
        return Err(ForgeError::NotOdd { residual });
    }
    let zero_v = CMat::zeros(nv, nv);
    require_equivariant(model, &OperatorValue::new(linalg::direct_sum(&zero_v, iw)))?;
    let full = OperatorValue::hermitian(linalg::direct_sum(dv.matrix(), &(dw.matrix() + b.matrix())))?;
    require_equivariant(model, &full)?;
    let v_only = OperatorValue::hermitian(linalg::direct_sum(dv.matrix(), &CMat::zeros(nw, nw)))?;

    let sp_full = TwistedSpectrum::new(model, full.matrix(), quad.kernel_tol);
    let sp_v = TwistedSpectrum::new(model, v_only.matrix(), quad.kernel_tol);
    if sp_full.values.iter().any(|v| v.abs() <= sp_full.kernel_tol) {
        let min_abs = sp_full.values.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        return Err(ForgeError::NotInvertible { min_abs });
    }
    let lhs = eta_from_spectrum(&sp_full, quad).with_oracle(sp_full.sign_trace());
    let rhs = eta_from_spectrum(&sp_v, quad).with_oracle(sp_v.sign_trace());
    let (rule, _) = eta_rule(sp_full.gap().min(sp_v.gap()), sp_full.top(), quad, false);
    let pointwise = rule
        .nodes
        .iter()
        .map(|&u| (sp_full.integrand(u) - sp_v.integrand(u)).norm())
        .fold(0.0, f64::max);
    Ok(SymmetricCheck { lhs, rhs, pointwise })
}

/// Regularized small-`s` limit: least-squares fit of
/// `Σ_{i<terms} a_i s^{i-(n+1)/2}` (plus a constant when `n` is even) to
/// `(s, value)` samples, returning the `s⁰` coefficient.
pub fn regularized_limit(samples: &[(f64, f64)], n: usize, terms: usize) -> Result<f64> {
    let offset = (n as f64 + 1.0) / 2.0;
    let mut exps: Vec<f64> = (0..terms).map(|i| i as f64 - offset).collect();
    if n.is_multiple_of(2) {
        exps.push(0.0);
    }
    let zero_col = exps
        .iter()
        .position(|&e| e == 0.0)
        .ok_or_else(|| ForgeError::InvalidArgument("expansion has no s^0 term".into()))?;
    if samples.len() < exps.len() {
        return Err(ForgeError::InvalidArgument(format!(
            "need at least {} samples, got {}",
            exps.len(),
            samples.len()
        )));
    }
    // Rescale s to [0, 1]-ish so the normal equations stay tame.
    let smax = samples.iter().fold(0.0_f64, |a, &(s, _)| a.max(s));
    let a = DMatrix::from_fn(samples.len(), exps.len(), |i, j| (samples[i].0 / smax).powf(exps[j]));
    let y = DVector::from_iterator(samples.len(), samples.iter().map(|&(_, v)| v));
    let coef = a
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|e| ForgeError::InvalidArgument(e.to_string()))?;
    Ok(coef[zero_col])
}
