use std::f64::consts::PI;

use eta_forge::eta::{
    eta_gap_sweep, eta_oracle, eta_perturbed, eta_perturbed_volterra, eta_quadrature, eta_stability_sweep,
    invertibilize, rho_number, symmetric_perturbation_check, EtaQuadrature,
};
use eta_forge::funcalc::contour_projector;
use eta_forge::linalg::{self, c, C64};
use eta_forge::opmodel::{
    circle_dirac_model, random_equivariant_hermitian, sign_and_kernel, EquivariantModel, OperatorValue,
};
use eta_forge::zoo::{random_gapped_with_kernel, random_invertible, random_model};

#[test]
fn quadrature_matches_sign_oracle() {
    let q = EtaQuadrature::default();
    for seed in 0..40 {
        let model = random_model(seed, 24);
        let d = random_invertible(&model, seed, 1.0 + (seed % 3) as f64, 0.02);
        let r = eta_quadrature(&d, &model, &q).unwrap();
        let o = eta_oracle(&d, &model).unwrap();
        assert!((r.value - o).norm() <= 1e-8, "seed {seed}");
        assert!(r.with_oracle(o).consistent(), "seed {seed}");
    }
}

#[test]
fn odd_under_reflection() {
    let q = EtaQuadrature::default();
    for seed in 0..10 {
        let model = random_model(seed, 12);
        let d = random_invertible(&model, seed, 1.0, 0.05);
        let minus = OperatorValue::hermitian(-d.matrix()).unwrap();
        let a = eta_quadrature(&d, &model, &q).unwrap().value;
        let b = eta_quadrature(&minus, &model, &q).unwrap().value;
        assert!((a + b).norm() <= 1e-10);
    }
}

#[test]
fn gap_limit_formula_random() {
    let q = EtaQuadrature::default();
    for seed in 0..8 {
        let model = random_model(seed, 12);
        let d = random_gapped_with_kernel(&model, seed, 1.0, 0.1);
        let gap = sign_and_kernel(&d, None).unwrap().gap;
        let s = eta_gap_sweep(&d, &model, &[gap / 2.0, gap / 10.0, gap / 100.0], &q).unwrap();
        let sk = sign_and_kernel(&d, None).unwrap();
        let oracle = model.tau_unchecked(sk.sign0.matrix()) + model.tau_unchecked(sk.ker_proj.matrix());
        for r in &s.rows {
            assert!((r.value - oracle).norm() <= 1e-8);
            let budget = 2.0 * (r.error_budget() + s.eta_d.error_budget());
            assert!((r.value - s.limit).norm() <= budget.max(1e-12));
        }
        assert!(s.max_deviation <= 1e-8);
    }
}

#[test]
fn circle_projector_matches_kernel() {
    for seed in 0..10 {
        let model = random_model(seed, 12);
        let d = random_gapped_with_kernel(&model, seed, 1.0, 0.2);
        let d2 = OperatorValue::hermitian(d.matrix() * d.matrix()).unwrap();
        let sigma = 0.4 * 0.2 * 0.2;
        let p = contour_projector(&d2, sigma).unwrap();
        let sk = sign_and_kernel(&d, None).unwrap();
        assert!(linalg::opnorm(&(p.matrix() - sk.ker_proj.matrix())) <= 1e-8);
        let pm = p.matrix();
        assert!(linalg::opnorm(&(pm * pm - pm)) <= 1e-8);
        assert!(linalg::hermitian_residual(pm) <= 1e-8);
    }
}

#[test]
fn perturbed_matches_sign_of_sum() {
    let q = EtaQuadrature::default();
    for seed in 0..10 {
        let model = random_model(seed, 12);
        let d = random_invertible(&model, seed, 1.0, 0.3);
        let cp = random_equivariant_hermitian(&model, seed + 99, 0.1);
        let r = eta_perturbed(&d, &cp, &model, &q).unwrap();
        let sum = OperatorValue::hermitian(d.matrix() + cp.matrix()).unwrap();
        assert!((r.value - eta_oracle(&sum, &model).unwrap()).norm() <= 1e-8);
    }
    // C = -D + 1 makes D + C the identity
    let model = random_model(1, 6);
    let d = random_invertible(&model, 1, 1.0, 0.1);
    let n = d.dim();
    let cp = OperatorValue::hermitian(linalg::identity(n) - d.matrix()).unwrap();
    let r = eta_perturbed(&d, &cp, &model, &q).unwrap();
    assert!((r.value - model.tau_unchecked(&linalg::identity(n))).norm() < 1e-10);
}

#[test]
fn perturbed_through_volterra_series() {
    let model = random_model(6, 6);
    let d = random_invertible(&model, 6, 1.0, 0.3);
    let cp = random_equivariant_hermitian(&model, 7, 0.1);
    let q = EtaQuadrature { nodes: 128, ..EtaQuadrature::default() };
    let direct = eta_perturbed(&d, &cp, &model, &q).unwrap();
    let (via, deviation) = eta_perturbed_volterra(&d, &cp, &model, &q, 1e-12).unwrap();
    assert!(deviation <= 1e-8, "{deviation:e}");
    assert!((via.value - direct.value).norm() <= 1e-8);
}

#[test]
fn stability_along_invertible_paths() {
    let q = EtaQuadrature::default();
    let grid: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    for seed in 0..6 {
        let model = random_model(seed, 10);
        let d = random_invertible(&model, seed, 1.0, 0.4);
        let b0 = random_equivariant_hermitian(&model, seed + 1, 0.1);
        let b1 = random_equivariant_hermitian(&model, seed + 2, 0.1);
        let path = |r: f64| OperatorValue::new(b0.matrix() * c(1.0 - r, 0.0) + b1.matrix() * c(r, 0.0));
        let rows = eta_stability_sweep(&d, path, &model, &grid, &q).unwrap();
        for r in &rows {
            assert!((r.value - rows[0].value).norm() <= 1e-8);
        }
    }
}

#[test]
fn rho_is_eps_independent() {
    let q = EtaQuadrature::default();
    for seed in 0..6 {
        let model = random_model(seed, 8);
        let d1 = random_gapped_with_kernel(&model, seed, 1.0, 0.2);
        let d2 = random_invertible(&model, seed + 5, 1.0, 0.2);
        let vals: Vec<C64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&e| rho_number(&d1, &d2, &model, e, &q).unwrap().value)
            .collect();
        assert!((vals[0] - vals[1]).norm() <= 1e-8 && (vals[0] - vals[2]).norm() <= 1e-8);
    }
}

#[test]
fn invertibilize_is_equivariant() {
    for seed in 0..10 {
        let model = random_model(seed, 10);
        let d = random_gapped_with_kernel(&model, seed, 1.0, 0.2);
        let cp = invertibilize(&d, &model, 0.05).unwrap();
        let res = eta_forge::opmodel::check_equivariance(&model, &cp).unwrap();
        assert!(res <= 1e-12);
    }
}

#[test]
fn symmetric_blocks_random() {
    let q = EtaQuadrature::default();
    for seed in 0..5 {
        let base = random_model(seed, 4);
        let nv = base.dim();
        let dv = random_invertible(&base, seed, 1.0, 0.1);
        let m = random_equivariant_hermitian(&base, seed + 3, 1.0).into_matrix()
            + linalg::identity(nv) * c(2.0, 0.0);
        let n = random_equivariant_hermitian(&base, seed + 4, 0.3).into_matrix();
        let zero = linalg::CMat::zeros(nv, nv);
        let dw = OperatorValue::new(linalg::block2(&zero, &m, &m.adjoint(), &zero));
        let b = OperatorValue::new(linalg::block2(&zero, &n, &n.adjoint(), &zero));
        let iw = linalg::direct_sum(&linalg::identity(nv), &(-linalg::identity(nv)));
        let model = base.direct_sum(&base).unwrap().direct_sum(&base).unwrap();
        let r = symmetric_perturbation_check(&dv, &dw, &iw, &b, &model, &q).unwrap();
        assert!((r.lhs.value - r.rhs.value).norm() <= r.lhs.error_budget() + r.rhs.error_budget());
        assert!(r.pointwise <= 1e-10);
    }
}

/// Abel-regularized `Σ_k (−1)^k sign(k + ½) r^{|k+½|}`, extrapolated to r → 1.
fn abel_circle_eta() -> f64 {
    let abel = |r: f64| -> f64 {
        let mut s = 0.0;
        for k in -60_000i64..=60_000 {
            let lam = k as f64 + 0.5;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * lam.signum() * r.powf(lam.abs());
        }
        s
    };
    // two Richardson levels in h = 1 - r
    let a: Vec<f64> = [4e-3, 2e-3, 1e-3].iter().map(|h| abel(1.0 - h)).collect();
    let r1 = [2.0 * a[1] - a[0], 2.0 * a[2] - a[1]];
    (4.0 * r1[1] - r1[0]) / 3.0
}

#[test]
fn circle_dirac_converges_to_abel_value() {
    let oracle = abel_circle_eta();
    assert!((oracle - 1.0).abs() < 1e-6);
    let q = EtaQuadrature::default();
    let vals: Vec<f64> = [50usize, 100, 200]
        .iter()
        .map(|&k| {
            let (d, model) = circle_dirac_model(k, 0.5, PI).unwrap();
            eta_quadrature(&d, &model, &q).unwrap().value.re
        })
        .collect();
    assert!((vals[2] - oracle).abs() <= 1e-3);
}

#[test]
fn trivial_group_reduces_to_plain_asymmetry() {
    let model = EquivariantModel::trivial(4);
    let d = OperatorValue::from_real_diag(&[-3.0, -0.5, 1.0, 2.0]);
    let r = eta_quadrature(&d, &model, &EtaQuadrature::default()).unwrap();
    assert!(r.value.norm() < 1e-12);
}
