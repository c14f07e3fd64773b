//! Independent oracles shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use mated_crt::electrical::Network;
use mated_crt::rng::StreamRng;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Connected multigraph on `n` vertices: a random spanning tree plus extra
/// records, parallel edges allowed, conductances in `[0.5, 2)` or all 1.
pub fn random_multigraph(n: usize, extra: usize, unit: bool, rng: &mut StreamRng) -> Network {
    let mut edges = Vec::new();
    let c = |rng: &mut StreamRng| if unit { 1.0 } else { rng.random_range(0.5..2.0) };
    for v in 1..n {
        let u = rng.random_range(0..v);
        let w = c(rng);
        edges.push((u, v, w));
    }
    for _ in 0..extra {
        let u = rng.random_range(0..n);
        let mut v = rng.random_range(0..n);
        while v == u {
            v = rng.random_range(0..n);
        }
        let w = c(rng);
        edges.push((u, v, w));
    }
    Network::new(n, edges).unwrap()
}

/// Transition matrix of the conductance-weighted walk.
pub fn transition_matrix(net: &Network) -> DMatrix<f64> {
    let n = net.n();
    let mut p = DMatrix::zeros(n, n);
    for &(u, v, c) in net.edges() {
        p[(u, v)] += c / net.degree(u);
        p[(v, u)] += c / net.degree(v);
    }
    p
}

/// `E_x[τ]` for the walk killed on leaving `region`: solves `(I − Q) t = 1`
/// with `Q` the transition matrix restricted to `region`.
pub fn absorbing_exit_times(net: &Network, region: &[usize]) -> Vec<f64> {
    let p = transition_matrix(net);
    let k = region.len();
    let mut m = DMatrix::<f64>::identity(k, k);
    for (i, &u) in region.iter().enumerate() {
        for (j, &v) in region.iter().enumerate() {
            m[(i, j)] -= p[(u, v)];
        }
    }
    let t = m.lu().solve(&DVector::from_element(k, 1.0)).expect("killed chain is transient");
    t.iter().copied().collect()
}

/// Hitting probabilities of each boundary vertex, by one forward solve per target.
pub fn hit_probabilities(net: &Network, boundary: &[bool], root: usize) -> Vec<(usize, f64)> {
    let p = transition_matrix(net);
    let interior: Vec<usize> = (0..net.n()).filter(|&v| !boundary[v]).collect();
    let k = interior.len();
    let mut m = DMatrix::<f64>::identity(k, k);
    for (i, &u) in interior.iter().enumerate() {
        for (j, &v) in interior.iter().enumerate() {
            m[(i, j)] -= p[(u, v)];
        }
    }
    let lu = m.lu();
    (0..net.n())
        .filter(|&b| boundary[b])
        .map(|b| {
            if boundary[root] {
                return (b, if b == root { 1.0 } else { 0.0 });
            }
            let rhs = DVector::from_iterator(k, interior.iter().map(|&u| p[(u, b)]));
            let h = lu.solve(&rhs).unwrap();
            let i = interior.iter().position(|&u| u == root).unwrap();
            (b, h[i])
        })
        .collect()
}

/// `R(a ↔ z)` for single vertices from the Laplacian pseudo-inverse.
pub fn pinv_resistance(net: &Network, a: usize, z: usize) -> f64 {
    let n = net.n();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for &(u, v, c) in net.edges() {
        l[(u, u)] += c;
        l[(v, v)] += c;
        l[(u, v)] -= c;
        l[(v, u)] -= c;
    }
    let pinv = l.pseudo_inverse(1e-12).unwrap();
    pinv[(a, a)] + pinv[(z, z)] - 2.0 * pinv[(a, z)]
}

/// Non-trivial adjacencies by direct scan: `(i, j)`, `j > i + 1`, with
/// `max(m_i, m_j) ≤ min_{i<k<j} m_k`.
pub fn brute_force_edges(m: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..m.len() {
        let mut inner = f64::INFINITY;
        for j in i + 1..m.len() {
            if j > i + 1 {
                if m[i].max(m[j]) <= inner {
                    out.push((i, j));
                }
                inner = inner.min(m[j]);
            } else {
                inner = m[j];
            }
        }
    }
    out
}

/// Minima arrays exercising ties: values drawn from a small integer range.
pub fn tied_minima(n: usize, levels: u32, rng: &mut StreamRng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0..levels) as f64).collect()
}

/// Covariance `2π·L⁻¹` of the zero-boundary field at interior cells, from the
/// sine eigenbasis of the Dirichlet Laplacian on `(M−2)²` cells.
pub fn sine_green(m: usize, p: (usize, usize), q: (usize, usize)) -> f64 {
    let n = m - 2;
    let h = (n + 1) as f64;
    let phi = |k: usize, i: usize| (2.0 / h).sqrt() * (std::f64::consts::PI * k as f64 * i as f64 / h).sin();
    let mut s = 0.0;
    for k in 1..=n {
        for l in 1..=n {
            let lam = 4.0
                - 2.0 * (std::f64::consts::PI * k as f64 / h).cos()
                - 2.0 * (std::f64::consts::PI * l as f64 / h).cos();
            s += phi(k, p.0) * phi(l, p.1) * phi(k, q.0) * phi(l, q.1) / lam;
        }
    }
    2.0 * std::f64::consts::PI * s
}
