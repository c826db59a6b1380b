//! Gauss–Legendre rules and composite panels.

use std::f64::consts::PI;

/// A quadrature rule on a fixed interval.
#[derive(Clone, Debug, Default)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// Gauss–Legendre rule with `n` nodes on [-1, 1].
    pub fn gauss_legendre(n: usize) -> Rule {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        for i in 0..m {
            // Tricomi initial guess, refined by Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Rule { nodes, weights }
    }

    /// Affine image of this [-1, 1] rule on [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> Rule {
        let h = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        Rule {
            nodes: self.nodes.iter().map(|x| mid + h * x).collect(),
            weights: self.weights.iter().map(|w| w * h).collect(),
        }
    }

    /// Composite rule: `per_panel` Gauss–Legendre nodes on each panel between
    /// consecutive `edges`.
    pub fn composite(edges: &[f64], per_panel: usize) -> Rule {
        let base = Rule::gauss_legendre(per_panel);
        let mut out = Rule::default();
        for w in edges.windows(2) {
            let r = base.mapped(w[0], w[1]);
            out.nodes.extend(r.nodes);
            out.weights.extend(r.weights);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// Panel edges 0, top/2^{k-1}, ..., top/2, top: geometric grading towards 0.
pub fn graded_edges(top: f64, panels: usize) -> Vec<f64> {
    let panels = panels.max(1);
    let mut edges = vec![0.0];
    for k in (0..panels).rev() {
        edges.push(top / 2f64.powi(k as i32));
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 7, 32, 128, 512] {
            let r = Rule::gauss_legendre(n);
            let s: f64 = r.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} sum={s}");
        }
    }

    #[test]
    fn exact_for_polynomials() {
        let r = Rule::gauss_legendre(5).mapped(0.0, 2.0);
        // degree 9 is exact for 5 nodes
        let v = r.integrate(|x| x.powi(9));
        assert!((v - 2f64.powi(10) / 10.0).abs() < 1e-11);
    }

    #[test]
    fn gaussian_on_graded_panels() {
        let r = Rule::composite(&graded_edges(10.0, 8), 16);
        let v = r.integrate(|x| (-x * x * 100.0).exp());
        assert!((v - PI.sqrt() / 20.0).abs() < 1e-14);
    }
}
