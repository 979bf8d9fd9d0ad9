//! Gauss-Hermite quadrature transformed to the standard normal measure.
//!
//! Nodes are the roots of the physicists' Hermite polynomial, found by
//! Newton iteration on the orthonormal three-term recurrence; weights come
//! from the derivative at each root. After the `x -> sqrt(2) x` change of
//! variables the rule computes `E[f(Z)]` for standard normal `Z` with
//! weights summing to one.

use crate::error::{Error, Result};

/// Quadrature rule for expectations under the standard normal law.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Build an `n`-node rule. Exact for polynomials up to degree `2n - 1`.
    pub fn new(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::Usage("quadrature needs at least one node".into()));
        }
        let (mut nodes, mut weights) = hermite_roots(n)?;
        // transform to the standard normal measure
        let sqrt2 = std::f64::consts::SQRT_2;
        for x in nodes.iter_mut() {
            *x *= sqrt2;
        }
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total;
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes in ascending order.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights matching [`nodes`](Self::nodes); they sum to one.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }

    /// `E[f(Z)]` for standard normal `Z`.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.iter().map(|(z, w)| w * f(z)).sum()
    }
}

/// Roots and weights of the physicists' Hermite polynomial of degree `n`.
fn hermite_roots(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    const MAX_ITER: usize = 200;
    const EPS: f64 = 3e-15;
    let pi_m4 = std::f64::consts::PI.powf(-0.25);
    let nf = n as f64;

    let m = n.div_ceil(2);
    let mut roots = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // positive roots found so far, largest first
    let mut found: Vec<f64> = Vec::with_capacity(m);
    let mut z = 0.0f64;

    for i in 0..m {
        // initial guesses, walking down from the largest root
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * found[0],
            3 => 1.91 * z - 0.91 * found[1],
            _ => 2.0 * z - found[i - 2],
        };
        let mut pp = 0.0;
        let mut converged = false;
        for _ in 0..MAX_ITER {
            // orthonormal recurrence for H_n at z
            let mut p1 = pi_m4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= EPS * (1.0 + z.abs()) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Domain(format!(
                "Hermite root {i} of {n} did not converge"
            )));
        }
        // store symmetric pair, ascending order overall
        found.push(z);
        roots[n - 1 - i] = z;
        roots[i] = -z;
        let w = 2.0 / (pp * pp);
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        roots[n / 2] = 0.0;
        // weight at the center from the recurrence value at zero
        let mut p1 = pi_m4;
        let mut p2 = 0.0;
        for j in 0..n {
            let p3 = p2;
            p2 = p1;
            let jf = j as f64;
            p1 = -(jf / (jf + 1.0)).sqrt() * p3;
        }
        let pp = (2.0 * nf).sqrt() * p2;
        weights[n / 2] = 2.0 / (pp * pp);
    }
    Ok((roots, weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn weights_sum_to_one() {
        for n in [1, 2, 3, 7, 16, 64, 96] {
            let q = GaussHermite::new(n).unwrap();
            let s: f64 = q.weights().iter().sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn low_moments_of_standard_normal() {
        let q = GaussHermite::new(64).unwrap();
        assert_abs_diff_eq!(q.expect(|_| 1.0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(q.expect(|z| z), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(q.expect(|z| z * z), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.expect(|z| z.powi(4)), 3.0, epsilon = 1e-11);
        assert_abs_diff_eq!(q.expect(|z| z.powi(6)), 15.0, epsilon = 1e-10);
    }

    #[test]
    fn gaussian_characteristic_function() {
        let q = GaussHermite::new(64).unwrap();
        for s2 in [0.0f64, 0.5, 2.0, 10.0, 40.0] {
            let sigma = s2.sqrt();
            let re = q.expect(|z| (sigma * z).cos());
            let im = q.expect(|z| (sigma * z).sin());
            assert!((re - (-s2 / 2.0).exp()).abs() <= 1e-10, "s2={s2}");
            assert!(im.abs() <= 1e-12);
        }
    }

    #[test]
    fn nodes_are_sorted_and_symmetric() {
        let q = GaussHermite::new(33).unwrap();
        let nodes = q.nodes();
        assert!(nodes.windows(2).all(|p| p[0] < p[1]));
        for i in 0..nodes.len() {
            assert_abs_diff_eq!(nodes[i], -nodes[nodes.len() - 1 - i], epsilon = 1e-13);
        }
        assert_eq!(nodes[16], 0.0);
    }

    #[test]
    fn rejects_zero_nodes() {
        assert!(GaussHermite::new(0).is_err());
    }
}
