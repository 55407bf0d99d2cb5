//! Hermite functions and quadrature rules.

use nalgebra::{DMatrix, SymmetricEigen};

/// Orthonormal Hermite functions `psi_0 .. psi_n_max` evaluated at `y`.
///
/// Upward three-term recurrence on the functions themselves, carrying a
/// separate power-of-two scale so that neither the Gaussian factor nor the
/// polynomial growth under/overflows before the final product.
pub fn hermite_functions(y: f64, n_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    // Work with unnormalised values p_k = psi_k * exp(y^2/2) * 2^-scale.
    let mut log_scale = 0.0f64;
    let mut prev = 0.0f64;
    let mut cur = std::f64::consts::PI.powf(-0.25);
    let mut raw = Vec::with_capacity(n_max + 1);
    raw.push((cur, log_scale));
    for k in 0..n_max {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * y * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > 1e150 {
            cur *= 1e-150;
            prev *= 1e-150;
            log_scale += 150.0 * std::f64::consts::LN_10;
        }
        raw.push((cur, log_scale));
    }
    let gauss = -0.5 * y * y;
    for (k, (v, s)) in raw.into_iter().enumerate() {
        out[k] = if v == 0.0 { 0.0 } else { v.signum() * (v.abs().ln() + s + gauss).exp() };
    }
    out
}

/// Gauss-Hermite rule with the weight function folded back into the
/// weights, so that `sum_k w_k f(y_k)` approximates `int f(y) dy` and is
/// exact for `f = psi_i * psi_j` with `i + j < 2 n`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldedHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl UnfoldedHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let off = (k as f64 / 2.0).sqrt();
            jacobi[(k - 1, k)] = off;
            jacobi[(k, k - 1)] = off;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

        // Newton polish on psi_n, whose zeros are the nodes.
        let nf = n as f64;
        for y in nodes.iter_mut() {
            for _ in 0..3 {
                let psi = hermite_functions(*y, n);
                let deriv = (2.0 * nf).sqrt() * psi[n - 1] - *y * psi[n];
                if deriv == 0.0 {
                    break;
                }
                let step = psi[n] / deriv;
                *y -= step;
                if step.abs() < 1e-15 * y.abs().max(1.0) {
                    break;
                }
            }
        }
        // Symmetrise to remove round-off asymmetry.
        for k in 0..n / 2 {
            let s = 0.5 * (nodes[n - 1 - k] - nodes[k]);
            nodes[k] = -s;
            nodes[n - 1 - k] = s;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }

        let weights = nodes
            .iter()
            .map(|&y| {
                let psi = hermite_functions(y, n - 1);
                1.0 / psi.iter().map(|p| p * p).sum::<f64>()
            })
            .collect();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&y, &w)| w * f(y)).sum()
    }
}

/// Gauss-Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let off = kf / (4.0 * kf * kf - 1.0).sqrt();
        jacobi[(k - 1, k)] = off;
        jacobi[(k, k - 1)] = off;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    pairs.into_iter().map(|(t, w)| (mid + half * t, half * w)).unzip()
}

/// Composite Simpson weights for `n` equally spaced samples with spacing
/// `h`; `n` must be odd and at least 3.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 3 && n % 2 == 1, "Simpson's rule needs an odd number (>= 3) of nodes");
    (0..n)
        .map(|i| {
            let c = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}
