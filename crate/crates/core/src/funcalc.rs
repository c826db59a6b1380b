//! Functional calculus: resolvents, contour-integral heat operators and
//! kernel projectors, the Connes–Moscovici idempotent, and eigendecomposition
//! oracles for all of them.

use std::f64::consts::PI;

use nalgebra::Schur;

use crate::error::{ForgeError, Result};
use crate::linalg::{self, c, CMat, Eigh, C64};
use crate::opmodel::{require_hermitian, OperatorValue};
use crate::quad::Rule;

/// Offset of the wedge vertex on the real axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Offset {
    /// Half the bottom of the spectrum (or -1/2 when the bottom is 0).
    Auto,
    Value(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ContourKind {
    /// Two half-lines `z = b + s e^{±iθ}`, `tan θ = slope`, enclosing `[b, ∞)`.
    Wedge { slope: f64, offset: Offset },
    /// The circle `|z| = radius`.
    Circle { radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourSpec {
    pub kind: ContourKind,
    /// Wedge: Gauss–Legendre nodes per half-line. Circle: trapezoid nodes.
    pub n_nodes: usize,
    pub truncation_tol: f64,
}

impl ContourSpec {
    pub fn wedge(slope: f64, offset: Offset) -> Self {
        ContourSpec {
            kind: ContourKind::Wedge { slope, offset },
            n_nodes: 256,
            truncation_tol: 1e-16,
        }
    }

    pub fn circle(radius: f64) -> Self {
        ContourSpec {
            kind: ContourKind::Circle { radius },
            n_nodes: 64,
            truncation_tol: 1e-16,
        }
    }

    pub fn with_nodes(mut self, n: usize) -> Self {
        self.n_nodes = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 8 {
            return Err(ForgeError::InvalidArgument(format!(
                "contour needs at least 8 nodes, got {}",
                self.n_nodes
            )));
        }
        if !(self.truncation_tol > 0.0) {
            return Err(ForgeError::InvalidArgument("truncation_tol must be positive".into()));
        }
        match self.kind {
            ContourKind::Wedge { slope, offset } => {
                if !(slope > 0.0) {
                    return Err(ForgeError::InvalidArgument("wedge slope must be positive".into()));
                }
                if let Offset::Value(b) = offset {
                    if !(b > 0.0) {
                        return Err(ForgeError::InvalidArgument("wedge offset must be positive".into()));
                    }
                }
            }
            ContourKind::Circle { radius } => {
                if !(radius > 0.0) {
                    return Err(ForgeError::InvalidArgument("circle radius must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

impl Default for ContourSpec {
    fn default() -> Self {
        ContourSpec::wedge(0.5, Offset::Auto)
    }
}

/// `(D² - λ)⁻¹` by LU, refusing spectral parameters too close to the spectrum.
pub fn resolvent(d2: &OperatorValue, lambda: C64) -> Result<OperatorValue> {
    let a = d2.matrix();
    let n = a.nrows();
    let shifted = a - linalg::identity(n) * lambda;
    let scale = linalg::opnorm(a).max(1.0);
    let distance = linalg::min_singular_value(&shifted);
    if distance < 1e-12 * scale {
        return Err(ForgeError::NearSpectrum { distance });
    }
    let inv = shifted
        .lu()
        .try_inverse()
        .ok_or(ForgeError::NearSpectrum { distance })?;
    Ok(OperatorValue::new(inv))
}

/// `f(D)` in an orthonormal eigenbasis. Hermitian input uses the symmetric
/// eigensolver; other normal input goes through a complex Schur form.
pub fn spectral_function(d: &OperatorValue, f: impl Fn(C64) -> C64) -> Result<OperatorValue> {
    let m = d.matrix();
    if require_hermitian(m).is_ok() {
        let e = Eigh::new(m);
        return Ok(OperatorValue::new(e.apply(|x| f(c(x, 0.0)))));
    }
    let scale = linalg::fro(m).max(f64::MIN_POSITIVE);
    let normality = linalg::fro(&(m * m.adjoint() - m.adjoint() * m));
    if normality > 1e-12 * scale * scale {
        return Err(ForgeError::NotDiagonalizable);
    }
    let (q, t) = Schur::new(m.clone()).unpack();
    let n = m.nrows();
    let mut scaled = q.clone();
    for j in 0..n {
        let fj = f(t[(j, j)]);
        for i in 0..n {
            scaled[(i, j)] *= fj;
        }
    }
    Ok(OperatorValue::new(&scaled * q.adjoint()))
}

/// Heat operator `exp(-t A)` of a Hermitian matrix by eigendecomposition.
pub fn heat_spectral(a: &CMat, t: f64) -> CMat {
    Eigh::new(a).apply(|x| c((-t * x).exp(), 0.0))
}

/// Panel edges on `[0, s_max]`: geometric growth by `ratio` from `h0`, each
/// panel no longer than `h_max`.
fn ray_edges(s_max: f64, h0: f64, h_max: f64, ratio: f64) -> Vec<f64> {
    let mut edges = vec![0.0];
    let mut h = h0.min(h_max).max(1e-300);
    let mut s = 0.0;
    while s < s_max {
        s = (s + h).min(s_max);
        edges.push(s);
        h = (ratio * h).min(h_max);
    }
    edges
}

struct WedgeGeometry {
    b: f64,
    theta: f64,
    s_max: f64,
    h0: f64,
    h_max: f64,
    ratio: f64,
}

impl WedgeGeometry {
    fn edges(&self) -> Vec<f64> {
        ray_edges(self.s_max, self.h0, self.h_max, self.ratio)
    }
}

fn wedge_geometry(eig: &Eigh, t: f64, spec: &ContourSpec) -> Result<WedgeGeometry> {
    let ContourKind::Wedge { slope, offset } = spec.kind else {
        return Err(ForgeError::InvalidArgument("expected a wedge contour".into()));
    };
    let bottom = eig.values.first().copied().unwrap_or(0.0);
    let b = match offset {
        Offset::Value(b) => b,
        Offset::Auto if bottom > 1e-12 => 0.5 * bottom,
        Offset::Auto => bottom - 0.5,
    };
    if b >= bottom {
        return Err(ForgeError::ContourHitsSpectrum { offset: b, bottom });
    }
    let theta = slope.atan();
    let gap = bottom - b;
    let dist0 = gap * theta.sin();
    // |e^{-tz}| ‖(z-A)^{-1}‖ ≤ e^{-t(b + s cos θ)} / dist0
    let log_target = -(spec.truncation_tol * dist0).ln();
    let s_max = ((log_target - t * b) / (t * theta.cos())).max(gap);
    Ok(WedgeGeometry {
        b,
        theta,
        s_max,
        // A pole at distance ~ s·sin θ from the ray at arclength s: panels grow
        // like s·sin θ so every pole stays a fixed number of panel widths away.
        h0: 0.5 * dist0,
        h_max: 4.0 / (t * theta.cos()),
        ratio: 1.0 + theta.sin(),
    })
}

fn wedge_integral(a: &CMat, t: f64, geo: &WedgeGeometry, per_panel: usize) -> Result<CMat> {
    let n = a.nrows();
    let edges = geo.edges();
    let rule = Rule::composite(&edges, per_panel);
    let lower = C64::from_polar(1.0, -geo.theta);
    let upper = C64::from_polar(1.0, geo.theta);
    let mut acc = CMat::zeros(n, n);
    for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
        for (dir, sign) in [(lower, 1.0), (upper, -1.0)] {
            let z = c(geo.b, 0.0) + dir * s;
            let shifted = linalg::identity(n) * z - a;
            let inv = shifted
                .lu()
                .try_inverse()
                .ok_or(ForgeError::NearSpectrum { distance: 0.0 })?;
            acc += inv * ((-t * z).exp() * dir * (sign * w));
        }
    }
    Ok(acc / c(0.0, 2.0 * PI))
}

/// `exp(-t D²)` as `(2πi)⁻¹ ∮ e^{-tz} (z - D²)⁻¹ dz` over a wedge enclosing the
/// spectrum, by composite Gauss–Legendre on each half-line. The rule is
/// re-run with doubled panel order and must agree to 1e-8.
pub fn contour_heat(d2: &OperatorValue, t: f64, contour: &ContourSpec) -> Result<OperatorValue> {
    contour.validate()?;
    if !(t > 0.0) {
        return Err(ForgeError::InvalidArgument("heat time must be positive".into()));
    }
    let a = d2.matrix();
    require_hermitian(a)?;
    let eig = Eigh::new(a);
    let geo = wedge_geometry(&eig, t, contour)?;
    let panels = geo.edges().len() - 1;
    let per_panel = (contour.n_nodes / panels.max(1)).clamp(16, 32);
    let coarse = wedge_integral(a, t, &geo, per_panel)?;
    let fine = wedge_integral(a, t, &geo, 2 * per_panel)?;
    let change = linalg::opnorm(&(&fine - &coarse));
    if change > 1e-8 {
        return Err(ForgeError::QuadratureNotConverged { change });
    }
    Ok(OperatorValue::new(fine))
}

/// Kernel projector `(2πi)⁻¹ ∮_{|z|=σ} (z - D²)⁻¹ dz` by the trapezoid rule.
pub fn contour_projector(d2: &OperatorValue, sigma: f64) -> Result<OperatorValue> {
    contour_projector_with(d2, &ContourSpec::circle(sigma))
}

pub fn contour_projector_with(d2: &OperatorValue, contour: &ContourSpec) -> Result<OperatorValue> {
    contour.validate()?;
    let ContourKind::Circle { radius: sigma } = contour.kind else {
        return Err(ForgeError::InvalidArgument("expected a circle contour".into()));
    };
    let a = d2.matrix();
    require_hermitian(a)?;
    let eig = Eigh::new(a);
    let tol = 1e-10 * eig.spectral_radius();
    if let Some(bad) = eig
        .values
        .iter()
        .find(|v| v.abs() > tol && v.abs() < 2.0 * sigma)
    {
        return Err(ForgeError::GapViolation(format!(
            "eigenvalue {bad:.6e} lies within radius {:.6e} of the origin",
            2.0 * sigma
        )));
    }
    let n = a.nrows();
    let nodes = contour.n_nodes;
    let mut acc = CMat::zeros(n, n);
    for k in 0..nodes {
        let z = C64::from_polar(sigma, 2.0 * PI * (k as f64 + 0.5) / nodes as f64);
        let inv = (linalg::identity(n) * z - a)
            .lu()
            .try_inverse()
            .ok_or(ForgeError::NearSpectrum { distance: 0.0 })?;
        acc += inv * z;
    }
    let p = acc / c(nodes as f64, 0.0);
    Ok(OperatorValue::new(p))
}

/// `φ(z) = (1 - e^{-z}) / z`, with a 7-term Taylor branch for |z| < 1e-2.
pub fn phi(z: C64) -> C64 {
    if z.norm() < 1e-2 {
        // Σ_{k=0}^{6} (-z)^k / (k+1)!
        let mut term = c(1.0, 0.0);
        let mut sum = term;
        for k in 1..=6 {
            term *= -z / (k as f64 + 1.0);
            sum += term;
        }
        sum
    } else {
        (c(1.0, 0.0) - (-z).exp()) / z
    }
}

/// Real-argument `φ` and its derivative `φ'(s)`.
pub fn phi_real(s: f64) -> f64 {
    phi(c(s, 0.0)).re
}

// Σ_{k≥1} k (-1)^k s^{k-1} / (k+1)!
fn phi_prime_series(s: f64) -> f64 {
    let mut sum = 0.0;
    let mut fact = 1.0;
    let mut pow = 1.0;
    for k in 1..=8 {
        fact *= (k + 1) as f64;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * k as f64 * pow / fact;
        pow *= s;
    }
    sum
}

pub fn phi_prime_real(s: f64) -> f64 {
    if s.abs() < 1e-2 {
        phi_prime_series(s)
    } else {
        ((-s).exp() * (1.0 + s) - 1.0) / (s * s)
    }
}

/// The Connes–Moscovici idempotent of `tA` for an odd operator with block
/// `A⁺: E⁺ → E⁻` and `A⁻ = (A⁺)*`:
///
/// ```text
/// [ e^{-X}                 e^{-X/2} φ(X) t A⁻ ]     X = t² A⁻A⁺
/// [ e^{-Y/2} t A⁺          I - e^{-Y}         ]     Y = t² A⁺A⁻
/// ```
///
/// It is idempotent but not self-adjoint: the off-diagonal blocks differ by
/// the factor `φ`.
pub fn cm_projector(a_plus: &CMat, t: f64) -> OperatorValue {
    let a_minus = a_plus.adjoint();
    let x = Eigh::new(&(&a_minus * a_plus));
    let y = Eigh::new(&(a_plus * &a_minus));
    let t2 = t * t;
    let v11 = x.apply(|l| c((-t2 * l).exp(), 0.0));
    let v12 = x.apply(|l| c((-0.5 * t2 * l).exp(), 0.0) * phi(c(t2 * l, 0.0))) * &a_minus * c(t, 0.0);
    let v21 = y.apply(|l| c((-0.5 * t2 * l).exp(), 0.0)) * a_plus * c(t, 0.0);
    let v22 = y.apply(|l| c(1.0 - (-t2 * l).exp(), 0.0));
    OperatorValue::new(linalg::block2(&v11, &v12, &v21, &v22))
}

/// `e₁ = diag(0, I)` matching the block sizes of `cm_projector(a_plus, ·)`.
pub fn e1_projector(a_plus: &CMat) -> CMat {
    let (nm, np) = a_plus.shape();
    linalg::direct_sum(&CMat::zeros(np, np), &linalg::identity(nm))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayRow {
    pub t: f64,
    pub norm: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `‖exp(-t(D+C)²)‖` against `e^{-4a²t}`, where `(-2a, 2a)` is free of the spectrum
/// of `D + C`. The heat operator comes from the dense matrix exponential.
pub fn decay_profile(d: &OperatorValue, cpert: &OperatorValue, t_grid: &[f64]) -> Result<Vec<DecayRow>> {
    if d.dim() != cpert.dim() {
        return Err(ForgeError::DimensionMismatch {
            expected: d.dim(),
            found: cpert.dim(),
        });
    }
    let s = d.matrix() + cpert.matrix();
    require_hermitian(&s)?;
    let eig = Eigh::new(&s);
    let min_abs = eig.values.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if min_abs <= 1e-10 * eig.spectral_radius().max(1.0) {
        return Err(ForgeError::NotInvertible { min_abs });
    }
    let a = 0.5 * min_abs;
    let s2 = &s * &s;
    Ok(t_grid
        .iter()
        .map(|&t| {
            let norm = linalg::opnorm(&linalg::expm(&(&s2 * c(-t, 0.0))));
            let bound = (-4.0 * a * a * t).exp();
            DecayRow {
                t,
                norm,
                bound,
                holds: norm <= bound * (1.0 + 1e-10),
            }
        })
        .collect())
}

/// Matrix sign of an invertible matrix by the scaled Newton iteration
/// `X ← (μX + (μX)⁻¹)/2`, independent of any eigensolver.
pub fn newton_sign(s: &CMat) -> Result<CMat> {
    let n = s.nrows();
    let mut x = s.clone();
    for _ in 0..100 {
        let inv = x
            .clone()
            .lu()
            .try_inverse()
            .ok_or(ForgeError::NotInvertible { min_abs: 0.0 })?;
        let mu = (linalg::fro(&inv) / linalg::fro(&x)).sqrt();
        let next = (&x * c(mu, 0.0) + inv * c(1.0 / mu, 0.0)) * c(0.5, 0.0);
        let change = linalg::dist(&next, &x);
        x = next;
        if change <= 1e-14 * (n as f64).sqrt() {
            break;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::diag_real;

    #[test]
    fn resolvent_diagonal_and_hit() {
        let d2 = OperatorValue::from_real_diag(&[1.0, 4.0]);
        let r = resolvent(&d2, c(0.0, 0.0)).unwrap();
        assert!(linalg::dist(r.matrix(), &diag_real(&[1.0, 0.25])) < 1e-15);
        assert!(matches!(
            resolvent(&d2, c(1.0, 0.0)),
            Err(ForgeError::NearSpectrum { .. })
        ));
    }

    #[test]
    fn spectral_function_simple() {
        let d = OperatorValue::from_real_diag(&[0.0, 1.0]);
        let h = spectral_function(&d, |z| (-z).exp()).unwrap();
        assert!(linalg::dist(h.matrix(), &diag_real(&[1.0, (-1.0f64).exp()])) < 1e-15);
        let id = spectral_function(&d, |z| z).unwrap();
        assert!(linalg::dist(id.matrix(), d.matrix()) < 1e-15);
    }

    #[test]
    fn spectral_function_normal_and_non_normal() {
        // rotation by 90°: normal, eigenvalues ±i
        let r = OperatorValue::new(linalg::from_real_rows(&[&[0.0, -1.0], &[1.0, 0.0]]));
        let sq = spectral_function(&r, |z| z * z).unwrap();
        assert!(linalg::dist(sq.matrix(), &(-linalg::identity(2))) < 1e-13);
        let jordan = OperatorValue::new(linalg::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]));
        assert_eq!(
            spectral_function(&jordan, |z| z).unwrap_err(),
            ForgeError::NotDiagonalizable
        );
    }

    #[test]
    fn contour_heat_scalar_and_diagonal() {
        let one = OperatorValue::from_real_diag(&[1.0]);
        let h = contour_heat(&one, 1.0, &ContourSpec::default()).unwrap();
        assert!((h.matrix()[(0, 0)] - c((-1.0f64).exp(), 0.0)).norm() < 1e-10);
        let d2 = OperatorValue::from_real_diag(&[1.0, 4.0]);
        let h = contour_heat(&d2, 0.5, &ContourSpec::default()).unwrap();
        let want = diag_real(&[(-0.5f64).exp(), (-2.0f64).exp()]);
        assert!(linalg::dist(h.matrix(), &want) < 1e-8);
    }

    #[test]
    fn contour_heat_large_time_bound() {
        let d2 = OperatorValue::from_real_diag(&[0.7, 2.0, 3.5]);
        for t in [5.0, 20.0] {
            let h = contour_heat(&d2, t, &ContourSpec::default()).unwrap();
            assert!(linalg::opnorm(h.matrix()) <= (-t * 0.7f64).exp() * (1.0 + 1e-8) + 1e-12);
        }
    }

    #[test]
    fn wedge_rejects_offset_above_spectrum() {
        let d2 = OperatorValue::from_real_diag(&[1.0, 4.0]);
        let spec = ContourSpec::wedge(0.5, Offset::Value(2.0));
        assert!(matches!(
            contour_heat(&d2, 1.0, &spec),
            Err(ForgeError::ContourHitsSpectrum { .. })
        ));
    }

    #[test]
    fn projector_cases() {
        let d2 = OperatorValue::from_real_diag(&[0.0, 1.0, 4.0]);
        let p = contour_projector(&d2, 0.5).unwrap();
        assert!(linalg::dist(p.matrix(), &diag_real(&[1.0, 0.0, 0.0])) < 1e-12);
        let inv = OperatorValue::from_real_diag(&[1.0, 4.0]);
        let p = contour_projector(&inv, 0.25).unwrap();
        assert!(linalg::fro(p.matrix()) < 1e-12);
        assert!(matches!(
            contour_projector(&d2, 0.6),
            Err(ForgeError::GapViolation(_))
        ));
    }

    #[test]
    fn phi_branches_agree() {
        for &r in &[1e-2, -1e-2] {
            let z = c(r, 0.0);
            let series = {
                let mut term = c(1.0, 0.0);
                let mut s = term;
                for k in 1..=6 {
                    term *= -z / (k as f64 + 1.0);
                    s += term;
                }
                s
            };
            let closed = (c(1.0, 0.0) - (-z).exp()) / z;
            assert!((series - closed).norm() < 1e-13);
        }
        assert_eq!(phi(c(0.0, 0.0)), c(1.0, 0.0));
    }

    #[test]
    fn phi_prime_branches_agree() {
        for s in [1.0001e-2f64, -1.0001e-2] {
            let closed = ((-s).exp() * (1.0 + s) - 1.0) / (s * s);
            let series = phi_prime_series(s);
            assert!((closed - series).abs() < 1e-11);
        }
        assert!((phi_prime_real(0.0) + 0.5).abs() < 1e-16);
    }

    #[test]
    fn cm_projector_limits() {
        let a = linalg::identity(2);
        let v0 = cm_projector(&a, 0.0);
        let want0 = linalg::direct_sum(&linalg::identity(2), &CMat::zeros(2, 2));
        assert!(linalg::dist(v0.matrix(), &want0) < 1e-15);
        let vinf = cm_projector(&a, 10.0);
        assert!(linalg::dist(vinf.matrix(), &e1_projector(&a)) < 1e-8);
    }

    #[test]
    fn decay_profile_diagonal() {
        let d = OperatorValue::from_real_diag(&[2.0, -3.0]);
        let z = OperatorValue::from_real_diag(&[0.0, 0.0]);
        let rows = decay_profile(&d, &z, &[0.0, 1.0]).unwrap();
        assert!((rows[0].norm - 1.0).abs() < 1e-14);
        assert!((rows[1].norm - (-4.0f64).exp()).abs() < 1e-14);
        assert!(rows.iter().all(|r| r.holds));
        let sing = OperatorValue::from_real_diag(&[0.0, 1.0]);
        assert!(matches!(
            decay_profile(&sing, &z, &[1.0]),
            Err(ForgeError::NotInvertible { .. })
        ));
    }

    #[test]
    fn newton_sign_diagonal() {
        let s = newton_sign(&diag_real(&[-3.0, 0.2, 7.0])).unwrap();
        assert!(linalg::dist(&s, &diag_real(&[-1.0, 1.0, 1.0])) < 1e-13);
    }
}
