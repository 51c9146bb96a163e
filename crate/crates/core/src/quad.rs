//! Small numerical-integration toolkit shared by the covariance and
//! Kac–Rice computations.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
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
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre rule over `[a, b]` split at `breaks`.
#[derive(Debug, Clone)]
pub struct Composite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Composite {
    pub fn new(a: f64, b: f64, breaks: &[f64], panels: usize, order: usize) -> Self {
        let mut cuts: Vec<f64> = std::iter::once(a)
            .chain(breaks.iter().copied().filter(|&t| t > a && t < b))
            .chain(std::iter::once(b))
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let (gx, gw) = gauss_legendre(order);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let total = b - a;
        for seg in cuts.windows(2) {
            let (lo, hi) = (seg[0], seg[1]);
            let k = ((panels as f64) * (hi - lo) / total).ceil().max(1.0) as usize;
            let step = (hi - lo) / k as f64;
            for p in 0..k {
                let c = lo + (p as f64 + 0.5) * step;
                for (x, w) in gx.iter().zip(&gw) {
                    nodes.push(c + 0.5 * step * x);
                    weights.push(0.5 * step * w);
                }
            }
        }
        Self { nodes, weights }
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Surface area of the unit sphere S^k in R^{k+1}.
pub fn sphere_area(k: usize) -> f64 {
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => sphere_area(k - 2) * 2.0 * PI / (k as f64 - 1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert_relative_eq!(s, 2.0 / 15.0, epsilon = 1e-14);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn composite_gaussian_integral() {
        let rule = Composite::new(-8.0, 8.0, &[0.0], 32, 8);
        let v = rule.integrate(|x| (-x * x).exp());
        assert_relative_eq!(v, PI.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(2), 4.0 * PI, epsilon = 1e-14);
        assert_relative_eq!(sphere_area(3), 2.0 * PI * PI, epsilon = 1e-14);
    }
}
