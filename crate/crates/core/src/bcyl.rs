//! Model b-cylinder: the indicial family `B(λ) = D_∂ + ρ̂_ε(λ) C_∂`, the
//! Connes–Moscovici family `r(t, λ)` with exact derivatives, the cyclic
//! 1-cocycle pairing and the eta-cocycle identities built on them.
//!
//! `r(t, λ)` has blocks
//!
//! ```text
//! [ E                 E^{1/2} φ(t²q) t(−iλ + B) ]      q = λ² + B(λ)²
//! [ E^{1/2} t(iλ + B)  1 − E                     ]      E = e^{−t² q}
//! ```
//!
//! Every block is a scalar function of `B(λ)`, so the fast route evaluates
//! them in the eigenbasis of `B(λ)` and differentiates in `λ` with divided
//! differences; the exact route uses augmented block exponentials.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};
use crate::eta::{eta_quadrature, EtaQuadrature};
use crate::exec::Exec;
use crate::funcalc::{phi, phi_prime_real};
use crate::linalg::{self, c, CMat, Eigh, C64, I};
use crate::opmodel::{check_equivariance, require_hermitian, EquivariantModel, OperatorValue, EQUIVARIANCE_TOL};
use crate::quad::{graded_edges, Rule};

/// Gaussian profile `ρ̂_ε(λ) = e^{−ε²λ²/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub eps: f64,
}

impl Profile {
    pub fn evaluate(&self, lambda: f64) -> f64 {
        (-0.5 * self.eps * self.eps * lambda * lambda).exp()
    }

    pub fn derivative(&self, lambda: f64) -> f64 {
        -self.eps * self.eps * lambda * self.evaluate(lambda)
    }

    /// Beyond this |λ| the profile is below 1e-16 and `B(λ) = D_∂` to machine precision.
    pub fn cutoff(&self) -> f64 {
        8.6 / self.eps
    }
}

pub fn make_profile(eps: f64) -> Result<Profile> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(ForgeError::InvalidArgument(format!("profile width {eps} must be positive")));
    }
    Ok(Profile { eps })
}

#[derive(Clone, Debug)]
pub struct IndicialData {
    pub d_boundary: CMat,
    pub c_boundary: CMat,
    pub profile: Profile,
    /// Smallest singular value of `iλ + B(λ)` seen by the admissibility sweep.
    pub min_singular: f64,
    /// `inf_λ σ_min(iλ + B(λ))`, the exponential decay rate in `t`.
    pub decay_rate: f64,
}

impl IndicialData {
    pub fn dim(&self) -> usize {
        self.d_boundary.nrows()
    }

    pub fn b(&self, lambda: f64) -> CMat {
        &self.d_boundary + &self.c_boundary * c(self.profile.evaluate(lambda), 0.0)
    }

    pub fn db(&self, lambda: f64) -> CMat {
        &self.c_boundary * c(self.profile.derivative(lambda), 0.0)
    }

    /// `B(rλ)` and `d/dλ B(rλ) = r ρ̂'(rλ) C_∂`.
    pub fn b_scaled(&self, r: f64, lambda: f64) -> (CMat, CMat) {
        (self.b(r * lambda), self.db(r * lambda) * c(r, 0.0))
    }
}

fn require_equivariant(model: &EquivariantModel, m: &CMat) -> Result<()> {
    let residual = check_equivariance(model, &OperatorValue::new(m.clone()))?;
    if residual > EQUIVARIANCE_TOL * linalg::fro(m).max(1.0) {
        return Err(ForgeError::NotEquivariant { residual });
    }
    Ok(())
}

/// `σ_min(iλ + B)` for Hermitian `B`: `sqrt(λ² + min|eig B|²)`.
fn shifted_min_singular(b: &CMat, lambda: f64) -> f64 {
    let e = Eigh::new(b);
    let m = e.values.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    (lambda * lambda + m * m).sqrt()
}

fn sweep(d: &CMat, cb: &CMat, profile: Profile, upto: f64, points: usize) -> f64 {
    let ind = IndicialData {
        d_boundary: d.clone(),
        c_boundary: cb.clone(),
        profile,
        min_singular: 0.0,
        decay_rate: 0.0,
    };
    (0..=points)
        .map(|k| {
            let l = upto * k as f64 / points as f64;
            shifted_min_singular(&ind.b(l), l)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Indicial data for `(D_∂, C_∂)`. With `eps = None` the width starts at 1 and
/// is halved until `σ_min(iλ + B(λ)) ≥ β₀/2` on `[0, β₀/2]`, where
/// `β₀ = σ_min(D_∂ + C_∂)`; a supplied width must pass the same sweep.
pub fn make_indicial(
    d_b: &OperatorValue,
    c_b: &OperatorValue,
    eps: Option<f64>,
    model: &EquivariantModel,
) -> Result<IndicialData> {
    let (d, cb) = (d_b.matrix(), c_b.matrix());
    if d.shape() != cb.shape() {
        return Err(ForgeError::DimensionMismatch {
            expected: d.nrows(),
            found: cb.nrows(),
        });
    }
    require_hermitian(d)?;
    require_hermitian(cb)?;
    require_equivariant(model, d)?;
    require_equivariant(model, cb)?;
    let b0 = d + cb;
    let beta0 = linalg::min_singular_value(&b0);
    let scale = linalg::opnorm(&b0).max(1.0);
    if beta0 <= 1e-10 * scale {
        return Err(ForgeError::NotInvertible { min_abs: beta0 });
    }
    let admissible = |profile: Profile| sweep(d, cb, profile, 0.5 * beta0, 200);
    let mut eps_now = eps.unwrap_or(1.0);
    let halvings = if eps.is_some() { 0 } else { 20 };
    for _ in 0..=halvings {
        let profile = make_profile(eps_now)?;
        let min_singular = admissible(profile);
        if min_singular >= 0.5 * beta0 {
            // σ_min(iλ + B(λ)) ≥ |λ|, so the infimum is attained on [0, β₀].
            let decay_rate = sweep(d, cb, profile, beta0, 800).min(beta0);
            return Ok(IndicialData {
                d_boundary: d.clone(),
                c_boundary: cb.clone(),
                profile,
                min_singular,
                decay_rate: 0.95 * decay_rate,
            });
        }
        eps_now *= 0.5;
    }
    Err(ForgeError::NoAdmissibleEps { halvings })
}

/// `r(t, λ)` with its partial derivatives.
#[derive(Clone, Debug)]
pub struct RtFamily {
    pub r: CMat,
    pub dr_dt: CMat,
    pub dr_dlambda: CMat,
}

/// Scalar block functions `g_ab(β)` at fixed `(t, λ)`, with `∂_t`, explicit
/// `∂_λ` and `∂_β` derivatives, in the order 11, 12, 21, 22.
#[derive(Clone, Copy, Debug)]
struct BlockScalars {
    g: [C64; 4],
    dt: [C64; 4],
    dl: [C64; 4],
    db: [C64; 4],
}

fn block_scalars(t: f64, lambda: f64, beta: f64) -> BlockScalars {
    let q = lambda * lambda + beta * beta;
    let s = t * t * q;
    let (ds_dt, ds_dl, ds_db) = (2.0 * t * q, 2.0 * t * t * lambda, 2.0 * t * t * beta);
    let e = (-s).exp();
    let h = (-0.5 * s).exp();
    let k = h * phi(c(s, 0.0)).re;
    let kp = h * (phi_prime_real(s) - 0.5 * phi(c(s, 0.0)).re);
    let plus = c(beta, lambda); // iλ + β
    let minus = c(beta, -lambda); // −iλ + β
    let re = |x: f64| c(x, 0.0);

    let g = [re(e), minus * (k * t), plus * (h * t), re(1.0 - e)];
    let d = |ds: f64| [re(-e * ds), minus * (kp * ds * t), plus * (-0.5 * h * ds * t), re(e * ds)];
    let mut dt = d(ds_dt);
    dt[1] += minus * k;
    dt[2] += plus * h;
    let mut dl = d(ds_dl);
    dl[1] += c(0.0, -k * t);
    dl[2] += c(0.0, h * t);
    let mut db = d(ds_db);
    db[1] += re(k * t);
    db[2] += re(h * t);
    BlockScalars { g, dt, dl, db }
}

/// Blocks of `r`, `∂_t r`, `∂_λ r` expressed in the eigenbasis of `B`.
struct EigenBlocks {
    r: CMat,
    dt: CMat,
    dl: CMat,
}

fn eigen_blocks(t: f64, lambda: f64, eig: &Eigh, db_eig: &CMat) -> EigenBlocks {
    let n = eig.dim();
    let sc: Vec<BlockScalars> = eig.values.iter().map(|&b| block_scalars(t, lambda, b)).collect();
    let mut r = CMat::zeros(2 * n, 2 * n);
    let mut dt = CMat::zeros(2 * n, 2 * n);
    let mut dl = CMat::zeros(2 * n, 2 * n);
    let scale = eig.spectral_radius().max(1.0);
    for blk in 0..4 {
        let (ro, co) = ((blk / 2) * n, (blk % 2) * n);
        for j in 0..n {
            r[(ro + j, co + j)] = sc[j].g[blk];
            dt[(ro + j, co + j)] = sc[j].dt[blk];
            dl[(ro + j, co + j)] = sc[j].dl[blk];
            for k in 0..n {
                let (bj, bk) = (eig.values[j], eig.values[k]);
                let divided = if (bj - bk).abs() <= 1e-5 * scale {
                    block_scalars(t, lambda, 0.5 * (bj + bk)).db[blk]
                } else {
                    (sc[j].g[blk] - sc[k].g[blk]) / (bj - bk)
                };
                dl[(ro + j, co + k)] += divided * db_eig[(j, k)];
            }
        }
    }
    EigenBlocks { r, dt, dl }
}

fn doubled(v: &CMat) -> CMat {
    linalg::direct_sum(v, v)
}

/// `r(t, λ)` and its derivatives by the eigenbasis of `B(λ)` (divided
/// differences for the `λ`-derivative).
pub fn rt_family_spectral(ind: &IndicialData, t: f64, lambda: f64) -> RtFamily {
    rt_from_b(t, lambda, &ind.b(lambda), &ind.db(lambda))
}

fn rt_from_b(t: f64, lambda: f64, b: &CMat, db: &CMat) -> RtFamily {
    let eig = Eigh::new(b);
    let v = &eig.vectors;
    let db_eig = v.adjoint() * db * v;
    let blocks = eigen_blocks(t, lambda, &eig, &db_eig);
    let w = doubled(v);
    let back = |m: &CMat| &w * m * w.adjoint();
    RtFamily {
        r: back(&blocks.r),
        dr_dt: back(&blocks.dt),
        dr_dlambda: back(&blocks.dl),
    }
}

/// `(E, φ(X), dE, dφ)` for `X` in direction `Ẋ`, from one exponential of the
/// 4n×4n augmented matrix `[[N, Ṅ], [0, N]]` with `N = [[−X, I], [0, 0]]`.
fn heat_and_phi_derivative(x: &CMat, xdot: &CMat) -> (CMat, CMat, CMat, CMat) {
    let n = x.nrows();
    let mut big = CMat::zeros(4 * n, 4 * n);
    for off in [0, 2 * n] {
        big.view_mut((off, off), (n, n)).copy_from(&(-x));
        big.view_mut((off, off + n), (n, n)).copy_from(&linalg::identity(n));
    }
    big.view_mut((0, 2 * n), (n, n)).copy_from(&(-xdot));
    let ex = linalg::expm(&big);
    let blk = |r: usize, c: usize| ex.view((r, c), (n, n)).into_owned();
    (blk(0, 0), blk(0, n), blk(0, 2 * n), blk(0, 3 * n))
}

/// `r(t, λ)` with exact derivatives from augmented block exponentials.
pub fn rt_family(ind: &IndicialData, t: f64, lambda: f64) -> RtFamily {
    let n = ind.dim();
    let b = ind.b(lambda);
    let bp = ind.db(lambda);
    let id = linalg::identity(n);
    let q = &id * c(lambda * lambda, 0.0) + &b * &b;
    let x = &q * c(t * t, 0.0);
    let x_t = &q * c(2.0 * t, 0.0);
    let x_l = (&id * c(2.0 * lambda, 0.0) + &bp * &b + &b * &bp) * c(t * t, 0.0);

    let (e, ph, e_t, ph_t) = heat_and_phi_derivative(&x, &x_t);
    let (_, _, e_l, ph_l) = heat_and_phi_derivative(&x, &x_l);
    let half = &x * c(-0.5, 0.0);
    let (h, h_t) = linalg::expm_frechet(&half, &(&x_t * c(-0.5, 0.0)));
    let (_, h_l) = linalg::expm_frechet(&half, &(&x_l * c(-0.5, 0.0)));

    let minus = &b - &id * (I * lambda); // −iλ + B
    let plus = &b + &id * (I * lambda); // iλ + B
    let tc = c(t, 0.0);

    let r12 = &h * &ph * &minus * tc;
    let r21 = &h * &plus * tc;
    let r = linalg::block2(&e, &r12, &r21, &(&id - &e));

    let r12_t = (&h_t * &ph * &minus + &h * &ph_t * &minus) * tc + &h * &ph * &minus;
    let r21_t = &h_t * &plus * tc + &h * &plus;
    let dr_dt = linalg::block2(&e_t, &r12_t, &r21_t, &(-&e_t));

    let minus_l = &bp - &id * I;
    let plus_l = &bp + &id * I;
    let r12_l = (&h_l * &ph * &minus + &h * &ph_l * &minus + &h * &ph * &minus_l) * tc;
    let r21_l = (&h_l * &plus + &h * &plus_l) * tc;
    let dr_dl = linalg::block2(&e_l, &r12_l, &r21_l, &(-&e_l));

    RtFamily {
        r,
        dr_dt,
        dr_dlambda: dr_dl,
    }
}

/// `τ_g` on the doubled space `E ⊕ E` carrying the diagonal action.
pub fn tau_doubled(model: &EquivariantModel, m: &CMat) -> C64 {
    let n = model.dim();
    model.tau_unchecked(&m.view((0, 0), (n, n)).into_owned())
        + model.tau_unchecked(&m.view((n, n), (n, n)).into_owned())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EqfeReport {
    pub lhs: C64,
    pub rhs: C64,
    pub residual: f64,
}

/// `τ_g([∂_t r, r] ∂_λ r)` against `−2it τ_g(e^{−t²(λ²+B²)}(B − λ ∂_λB))`, with the
/// left side from exact derivatives.
pub fn eqfe_check(ind: &IndicialData, model: &EquivariantModel, t: f64, lambda: f64) -> EqfeReport {
    let fam = rt_family(ind, t, lambda);
    let lhs = tau_doubled(model, &(linalg::commutator(&fam.dr_dt, &fam.r) * &fam.dr_dlambda));
    let rhs = eqfe_rhs(ind, model, t, lambda);
    EqfeReport {
        lhs,
        rhs,
        residual: (lhs - rhs).norm(),
    }
}

fn eqfe_rhs(ind: &IndicialData, model: &EquivariantModel, t: f64, lambda: f64) -> C64 {
    let b = ind.b(lambda);
    let bp = ind.db(lambda);
    let e = Eigh::new(&b).apply(|x| c((-t * t * (lambda * lambda + x * x)).exp(), 0.0));
    model.tau_unchecked(&(e * (&b - &bp * c(lambda, 0.0)))) * c(0.0, -2.0 * t)
}

/// Central differences of `r` with one Richardson step, for validating derivatives.
pub fn rt_finite_difference(ind: &IndicialData, t: f64, lambda: f64, h: f64) -> (CMat, CMat) {
    let r = |tt: f64, ll: f64| rt_family_spectral(ind, tt, ll).r;
    let central = |h: f64| {
        let dt = (r(t + h, lambda) - r(t - h, lambda)) * c(0.5 / h, 0.0);
        let dl = (r(t, lambda + h) - r(t, lambda - h)) * c(0.5 / h, 0.0);
        (dt, dl)
    };
    let (dt1, dl1) = central(h);
    let (dt2, dl2) = central(0.5 * h);
    let rich = |a: CMat, b: CMat| (b * c(4.0, 0.0) - a) * c(1.0 / 3.0, 0.0);
    (rich(dt1, dt2), rich(dl1, dl2))
}

/// A `λ`-family given by its value and derivative.
pub type Family<'a> = &'a (dyn Fn(f64) -> (CMat, CMat) + Sync);

/// `σ_g(A₀, A₁) = (i/2π) ∫ τ_g(∂_λA₀ · A₁) dλ` over `[−L, L]` by composite
/// Gauss–Legendre, checked against a half-order rule. Both families must have
/// decayed (value and derivative below 1e-10 relative) at `±L`.
pub fn sigma_pairing(
    a0: Family,
    a1: Family,
    model: &EquivariantModel,
    half_width: f64,
    nodes: usize,
) -> Result<C64> {
    let mut peak = 0.0_f64;
    let mut edge = 0.0_f64;
    for k in 0..=64 {
        let l = -half_width + 2.0 * half_width * k as f64 / 64.0;
        for f in [a0, a1] {
            let (v, dv) = f(l);
            let size = linalg::fro(&v).max(linalg::fro(&dv));
            peak = peak.max(size);
            if k == 0 || k == 64 {
                edge = edge.max(size);
            }
        }
    }
    if edge > 1e-10 * peak.max(1e-300) {
        return Err(ForgeError::InvalidArgument(format!(
            "families have not decayed at ±{half_width}: {edge:.3e}"
        )));
    }
    let panels = 16;
    let edges: Vec<f64> = (0..=panels)
        .map(|k| -half_width + 2.0 * half_width * k as f64 / panels as f64)
        .collect();
    let per = (nodes / panels).max(8);
    let eval = |per: usize| -> C64 {
        let rule = Rule::composite(&edges, per);
        let sum: C64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&l, &w)| {
                let (_, d0) = a0(l);
                let (v1, _) = a1(l);
                model.tau_unchecked(&(d0 * v1)) * w
            })
            .sum();
        sum * c(0.0, 1.0 / (2.0 * PI))
    };
    let fine = eval(per);
    let coarse = eval(per / 2);
    let change = (fine - coarse).norm();
    if change > 1e-10 * fine.norm().max(1.0) {
        return Err(ForgeError::QuadratureNotConverged { change });
    }
    Ok(fine)
}

/// Resolution of the `(t, λ)` tensor rule: total `t`-nodes and `λ`-nodes per `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2d {
    pub t: usize,
    pub lambda: usize,
}

impl Default for Grid2d {
    fn default() -> Self {
        Grid2d { t: 128, lambda: 128 }
    }
}

impl Grid2d {
    pub fn scaled(&self, factor: f64) -> Self {
        Grid2d {
            t: ((self.t as f64 * factor).round() as usize).max(16),
            lambda: ((self.lambda as f64 * factor).round() as usize).max(16),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Integral2d {
    pub value: C64,
    /// Change against the half-resolution rule.
    pub error: f64,
    /// `|∫ f(t, λ) dλ|` at the smallest and largest `t`-nodes.
    pub small_t: f64,
    pub large_t: f64,
}

/// Width of the Gaussian window `e^{−t²λ²}`: beyond `6.5/t` it is below 1e-18.
const GAUSS_WIDTH: f64 = 6.5;

fn lambda_rule(t: f64, cut: f64, per_panel: usize) -> Rule {
    let reach = GAUSS_WIDTH / t;
    let inner = reach.min(cut);
    let mut edges: Vec<f64> = (0..=8).map(|k| -inner + inner * k as f64 / 4.0).collect();
    if reach > cut {
        // Outer tails where `B` is constant: graded by the Gaussian width.
        let mut right = vec![cut];
        let mut x = cut;
        let step = 1.0 / t;
        let mut k = 1.0;
        while x < reach {
            x = (cut + step * k).min(reach);
            right.push(x);
            k *= 2.0;
        }
        let left: Vec<f64> = right.iter().rev().map(|v| -v).collect();
        let mut all = left;
        all.pop();
        all.append(&mut edges);
        all.pop();
        all.extend(right);
        edges = all;
    }
    Rule::composite(&edges, per_panel)
}

fn t_rule(upper: f64, fastest: f64, nodes: usize) -> Rule {
    let panels = ((upper * fastest).log2().ceil().max(0.0) as usize + 3).max(6);
    let per = (nodes / panels).max(12);
    Rule::composite(&graded_edges(upper, panels), per)
}

/// `∫_0^T ∫_ℝ f(t, λ) dλ dt` with `T = 6.5/decay` and a `t`-dependent `λ`-rule
/// that resolves both the profile (below `cut`) and the Gaussian window.
/// The `t`-nodes are evaluated through `exec`; sums are reduced in order.
pub fn integrate_2d(
    decay: f64,
    cut: f64,
    top: f64,
    grid: Grid2d,
    exec: Exec,
    f: impl Fn(f64, f64) -> C64 + Sync,
) -> Integral2d {
    let upper = GAUSS_WIDTH / decay;
    let fastest = top.max(1.0 / cut.clamp(1e-300, 1e300)).max(cut.min(1e6) / 8.6).max(1.0);
    let run = |grid: Grid2d| -> (C64, f64, f64) {
        let tr = t_rule(upper, fastest, grid.t);
        let per_l = (grid.lambda / 8).max(8);
        let inner: Vec<C64> = exec.map_range(tr.len(), |i| {
            let t = tr.nodes[i];
            let lr = lambda_rule(t, cut, per_l);
            lr.nodes
                .iter()
                .zip(&lr.weights)
                .map(|(&l, &w)| f(t, l) * w)
                .sum()
        });
        let total = inner.iter().zip(&tr.weights).map(|(v, &w)| v * w).sum();
        (total, inner[0].norm(), inner[inner.len() - 1].norm())
    };
    let (value, small_t, large_t) = run(grid);
    let (rough, _, _) = run(grid.scaled(0.5));
    Integral2d {
        value,
        error: (value - rough).norm(),
        small_t,
        large_t,
    }
}

/// Twisted trace of the doubled action, prepared once per model in the
/// eigenbasis of `B(λ)` inside the integrands.
fn cocycle_integrand(ind: &IndicialData, model: &EquivariantModel, t: f64, lambda: f64) -> C64 {
    let fam = rt_family_spectral(ind, t, lambda);
    tau_doubled(model, &(linalg::commutator(&fam.dr_dt, &fam.r) * &fam.dr_dlambda))
}

/// `(2πi)⁻¹ ∫_0^∞ ∫_ℝ τ_g([∂_t r, r] ∂_λ r) dλ dt`.
///
/// The normalization is fixed by the scalar case `B = 1`, trivial group, where
/// the double integral is `−iπ` and the identity requires `−½`.
pub fn eta_cocycle_integral(ind: &IndicialData, model: &EquivariantModel, grid: Grid2d, exec: Exec) -> Result<Integral2d> {
    check_model(ind, model)?;
    let top = linalg::opnorm(&ind.d_boundary) + linalg::opnorm(&ind.c_boundary);
    let mut out = integrate_2d(ind.decay_rate, ind.profile.cutoff(), top, grid, exec, |t, l| {
        cocycle_integrand(ind, model, t, l)
    });
    out.value /= c(0.0, 2.0 * PI);
    out.error /= 2.0 * PI;
    out.small_t /= 2.0 * PI;
    out.large_t /= 2.0 * PI;
    Ok(out)
}

fn check_model(ind: &IndicialData, model: &EquivariantModel) -> Result<()> {
    if model.dim() != ind.dim() {
        return Err(ForgeError::DimensionMismatch {
            expected: model.dim(),
            found: ind.dim(),
        });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct KeyLemmaReport {
    pub lhs: Integral2d,
    pub rhs: C64,
    pub eta: C64,
    pub gap: f64,
}

/// The eta-cocycle integral against `−½ η_g(D_∂ + C_∂)`.
pub fn key_lemma_check(
    ind: &IndicialData,
    model: &EquivariantModel,
    grid: Grid2d,
    quad: &EtaQuadrature,
    exec: Exec,
) -> Result<KeyLemmaReport> {
    let lhs = eta_cocycle_integral(ind, model, grid, exec)?;
    let b0 = OperatorValue::hermitian(ind.b(0.0))?;
    let eta = eta_quadrature(&b0, model, quad)?.value;
    let rhs = eta * c(-0.5, 0.0);
    Ok(KeyLemmaReport {
        gap: (lhs.value - rhs).norm(),
        lhs,
        rhs,
        eta,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZetaSweep {
    pub rows: Vec<(f64, Integral2d)>,
    /// `½ η_g(D_∂ + C_∂)`, the Gaussian closed form of `ζ(0)`.
    pub zeta0_closed: C64,
    pub variation: f64,
}

/// `ζ(r) = π⁻¹ ∫∫ τ_g(e^{−t²(λ² + B(rλ)²)} t (B(rλ) − λ ∂_λ[B(rλ)])) dλ dt` over `r_grid`.
pub fn zeta_sweep(
    ind: &IndicialData,
    model: &EquivariantModel,
    r_grid: &[f64],
    grid: Grid2d,
    quad: &EtaQuadrature,
    exec: Exec,
) -> Result<ZetaSweep> {
    check_model(ind, model)?;
    if let Some(&bad) = r_grid.iter().find(|&&r| !(0.0..=1.0).contains(&r)) {
        return Err(ForgeError::InvalidArgument(format!("r = {bad} outside [0, 1]")));
    }
    let top = linalg::opnorm(&ind.d_boundary) + linalg::opnorm(&ind.c_boundary);
    let mut rows = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let cut = if r > 0.0 { ind.profile.cutoff() / r } else { f64::INFINITY };
        let mut out = integrate_2d(ind.decay_rate, cut, top, grid, exec, |t, l| {
            let (b, bp) = ind.b_scaled(r, l);
            let e = Eigh::new(&b).apply(|x| c((-t * t * (l * l + x * x)).exp(), 0.0));
            model.tau_unchecked(&(e * (&b - &bp * c(l, 0.0)))) * t
        });
        out.value /= PI;
        out.error /= PI;
        out.small_t /= PI;
        out.large_t /= PI;
        rows.push((r, out));
    }
    let b0 = OperatorValue::hermitian(ind.b(0.0))?;
    let zeta0_closed = eta_quadrature(&b0, model, quad)?.value * c(0.5, 0.0);
    let mut variation = 0.0_f64;
    for (_, a) in &rows {
        for (_, b) in &rows {
            variation = variation.max((a.value - b.value).norm());
        }
    }
    Ok(ZetaSweep {
        rows,
        zeta0_closed,
        variation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::diag_real;

    fn scalar(b0: f64, cb: f64) -> (IndicialData, EquivariantModel) {
        let model = EquivariantModel::trivial(1);
        let ind = make_indicial(
            &OperatorValue::from_real_diag(&[b0]),
            &OperatorValue::from_real_diag(&[cb]),
            None,
            &model,
        )
        .unwrap();
        (ind, model)
    }

    #[test]
    fn profile_basics() {
        let p = make_profile(0.7).unwrap();
        assert_eq!(p.evaluate(0.0), 1.0);
        for k in 0..50 {
            let l = 0.37 * k as f64;
            assert!((p.evaluate(l) - p.evaluate(-l)).abs() <= 1e-15);
        }
        assert!((make_profile(1e-9).unwrap().evaluate(3.0) - 1.0).abs() < 1e-15);
        assert!(p.evaluate(p.cutoff()) < 1e-16);
        assert!(make_profile(0.0).is_err());
    }

    #[test]
    fn indicial_invertible_at_zero() {
        let model = EquivariantModel::trivial(2);
        let ind = make_indicial(
            &OperatorValue::from_real_diag(&[0.0, 2.0]),
            &OperatorValue::from_real_diag(&[1.0, 0.0]),
            None,
            &model,
        )
        .unwrap();
        assert!(linalg::dist(&ind.b(0.0), &diag_real(&[1.0, 2.0])) < 1e-15);
        assert!(ind.min_singular > 0.0 && ind.decay_rate > 0.0);
        let (ind, _) = scalar(1.0, 0.0);
        assert_eq!(ind.profile.eps, 1.0);
    }

    #[test]
    fn scalar_closed_form_blocks() {
        let (ind, _) = scalar(1.3, 0.0);
        let (t, l) = (0.8, 0.4);
        let fam = rt_family_spectral(&ind, t, l);
        let s = t * t * (l * l + 1.69);
        assert!((fam.r[(0, 0)] - c((-s).exp(), 0.0)).norm() < 1e-14);
        assert!((fam.r[(1, 0)] - c(1.3, l) * ((-0.5 * s).exp() * t)).norm() < 1e-14);
        let want12 = c(1.3, -l) * ((-0.5 * s).exp() * (1.0 - (-s).exp()) / s * t);
        assert!((fam.r[(0, 1)] - want12).norm() < 1e-14);
    }

    #[test]
    fn routes_agree_and_are_idempotent() {
        let model = EquivariantModel::trivial(3);
        let d = OperatorValue::from_real_diag(&[0.4, -1.1, 0.9]);
        let cm = linalg::from_real_rows(&[&[0.2, 0.3, 0.0], &[0.3, -0.1, 0.25], &[0.0, 0.25, 0.15]]);
        let ind = make_indicial(&d, &OperatorValue::new(cm), None, &model).unwrap();
        for &(t, l) in &[(0.05, 0.3), (0.7, -1.2), (2.5, 0.0), (1.0, 4.0)] {
            let a = rt_family(&ind, t, l);
            let b = rt_family_spectral(&ind, t, l);
            assert!(linalg::dist(&a.r, &b.r) < 1e-12);
            assert!(linalg::dist(&a.dr_dt, &b.dr_dt) < 1e-10);
            assert!(linalg::dist(&a.dr_dlambda, &b.dr_dlambda) < 1e-10);
            assert!(linalg::opnorm(&(&a.r * &a.r - &a.r)) < 1e-10);
            let (fdt, fdl) = rt_finite_difference(&ind, t, l, 1e-3);
            assert!(linalg::dist(&fdt, &a.dr_dt) < 1e-7);
            assert!(linalg::dist(&fdl, &a.dr_dlambda) < 1e-7);
        }
    }

    #[test]
    fn large_lambda_tends_to_e1() {
        let (ind, _) = scalar(0.8, 0.3);
        let e1 = diag_real(&[0.0, 1.0]);
        let fam = rt_family_spectral(&ind, 1.0, 12.0);
        assert!(linalg::opnorm(&(&fam.r - &e1)) < 1e-12);
    }

    #[test]
    fn eqfe_scalar() {
        let model = EquivariantModel::trivial(1);
        let (ind, _) = scalar(0.9, 0.0);
        for &(t, l) in &[(0.3, 0.2), (1.1, -0.7)] {
            let r = eqfe_check(&ind, &model, t, l);
            let want = c(0.0, -2.0 * t) * (0.9 * (-t * t * (l * l + 0.81f64)).exp());
            assert!((r.rhs - want).norm() < 1e-14);
            assert!(r.residual <= 1e-8 * (1.0 + r.rhs.norm()));
        }
    }

    #[test]
    fn sigma_gaussian_moment_and_antisymmetry() {
        let model = EquivariantModel::trivial(1);
        let (a, b) = (0.8, 1.3);
        let f0 = move |l: f64| {
            let v = (-a * l * l).exp();
            (diag_real(&[v]), diag_real(&[-2.0 * a * l * v]))
        };
        let f1 = move |l: f64| {
            let v = (-b * l * l).exp();
            (diag_real(&[l * v]), diag_real(&[v - 2.0 * b * l * l * v]))
        };
        let s01 = sigma_pairing(&f0, &f1, &model, 8.0, 256).unwrap();
        let want = c(0.0, -a * PI.sqrt() / (2.0 * PI * (a + b).powf(1.5)));
        assert!((s01 - want).norm() < 1e-12);
        let s10 = sigma_pairing(&f1, &f0, &model, 8.0, 256).unwrap();
        assert!((s01 + s10).norm() < 1e-12);
        let s00 = sigma_pairing(&f0, &f0, &model, 8.0, 256).unwrap();
        assert!(s00.norm() < 1e-12);
    }

    #[test]
    fn cocycle_scalar_is_minus_half() {
        let model = EquivariantModel::trivial(1);
        let (ind, _) = scalar(1.0, 0.0);
        let r = eta_cocycle_integral(&ind, &model, Grid2d::default(), Exec::Sequential).unwrap();
        assert!((r.value - c(-0.5, 0.0)).norm() < 1e-6, "{:?}", r.value);
    }
}
