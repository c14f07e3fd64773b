//! Tutte embedding of a disk map into the closed unit disk.
//!
//! Boundary vertices `x_1 < … < x_k` go to `e^{2πi p_j}` where `p_j` is the
//! probability that the walk from the root first hits the boundary in
//! `{x_1, …, x_j}`. Interior vertices sit at the conductance-weighted mean of
//! their neighbours.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;

use crate::electrical::{mask_of, KilledSystem, Network};
use crate::error::{Error, Result};
use crate::map::MatedCrtMap;
use crate::rng::StreamRng;

/// Root `⌈t·n⌉` (1-based) for `t` uniform on `(0, 1]`, returned 0-based.
pub fn pick_root(map: &MatedCrtMap, rng: &mut StreamRng) -> usize {
    let n = map.n();
    let t = 1.0 - rng.random::<f64>();
    ((t * n as f64).ceil() as usize).clamp(1, n) - 1
}

fn boundary_mask(map: &MatedCrtMap) -> Result<Vec<bool>> {
    let flags = map.boundary().ok_or(Error::EmptyBoundary)?.to_vec();
    if !flags.iter().any(|&b| b) {
        return Err(Error::EmptyBoundary);
    }
    Ok(flags)
}

/// First-hit distribution on the boundary of the walk from `root`, as
/// `(vertex, probability)` in increasing vertex order.
pub fn hitting_distribution(map: &MatedCrtMap, root: usize) -> Result<Vec<(usize, f64)>> {
    hitting_distribution_net(&Network::from_map(map), &boundary_mask(map)?, root)
}

/// One killed solve `L_II v = e_root`; then `P[hit b] = Σ_y v_y c(y, b)`.
pub fn hitting_distribution_net(net: &Network, boundary: &[bool], root: usize) -> Result<Vec<(usize, f64)>> {
    if root >= net.n() {
        return Err(Error::VertexOutOfRange(root));
    }
    let order: Vec<usize> = (0..net.n()).filter(|&v| boundary[v]).collect();
    if order.is_empty() {
        return Err(Error::EmptyBoundary);
    }
    if boundary[root] {
        return Ok(order.into_iter().map(|b| (b, if b == root { 1.0 } else { 0.0 })).collect());
    }
    let interior: Vec<bool> = boundary.iter().map(|b| !b).collect();
    let reach = net.reachable_within(root, &interior);
    let system = KilledSystem::new(net, &reach).map_err(|e| match e {
        Error::NeverKilled(_) => Error::EmptyBoundary,
        other => other,
    })?;
    let v = system.solve_point(root, net.n())?;
    let mut mass = vec![0.0; net.n()];
    for &y in &reach {
        for s in net.slots(y) {
            if boundary[s.to] {
                mass[s.to] += v[y] * s.conductance;
            }
        }
    }
    Ok(order.into_iter().map(|b| (b, mass[b])).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TutteEmbedding {
    pub positions: Vec<Complex64>,
    pub boundary_order: Vec<usize>,
    /// Cumulative hit probabilities, aligned with `boundary_order`.
    pub hitting_cdf: Vec<f64>,
    pub is_boundary: Vec<bool>,
    pub root: usize,
}

impl TutteEmbedding {
    pub fn position(&self, v: usize) -> Complex64 {
        self.positions[v]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["vertex", "x", "y", "is_boundary"])?;
        for (v, p) in self.positions.iter().enumerate() {
            out.write_record(&[
                v.to_string(),
                p.re.to_string(),
                p.im.to_string(),
                u8::from(self.is_boundary[v]).to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Straight-line drawing of the embedded map.
    pub fn to_svg(&self, net: &Network, size: f64) -> String {
        let half = size / 2.0;
        let scale = half * 0.95;
        let px = |z: Complex64| (half + scale * z.re, half - scale * z.im);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
        );
        let _ = writeln!(
            s,
            r##"<circle cx="{half}" cy="{half}" r="{scale}" fill="none" stroke="#bbb" stroke-width="0.5"/>"##
        );
        let _ = writeln!(s, r##"<g stroke="#246" stroke-width="0.3" stroke-opacity="0.6">"##);
        for &(u, v, _) in net.edges() {
            let (x1, y1) = px(self.positions[u]);
            let (x2, y2) = px(self.positions[v]);
            let _ = writeln!(s, r#"<line x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}"/>"#);
        }
        let _ = writeln!(s, "</g>");
        let (rx, ry) = px(self.positions[self.root]);
        let _ = writeln!(s, r##"<circle cx="{rx:.3}" cy="{ry:.3}" r="2" fill="#c22"/>"##);
        s.push_str("</svg>\n");
        s
    }
}

pub fn tutte_embed(map: &MatedCrtMap, root: usize) -> Result<TutteEmbedding> {
    tutte_embed_net(&Network::from_map(map), &boundary_mask(map)?, root)
}

pub fn tutte_embed_net(net: &Network, boundary: &[bool], root: usize) -> Result<TutteEmbedding> {
    let hits = hitting_distribution_net(net, boundary, root)?;
    let mut positions = vec![Complex64::new(0.0, 0.0); net.n()];
    let mut boundary_order = Vec::with_capacity(hits.len());
    let mut hitting_cdf = Vec::with_capacity(hits.len());
    let mut acc = 0.0;
    for (b, p) in hits {
        acc += p;
        boundary_order.push(b);
        hitting_cdf.push(acc);
        positions[b] = Complex64::from_polar(1.0, 2.0 * PI * acc);
    }
    let interior: Vec<usize> = (0..net.n()).filter(|&v| !boundary[v]).collect();
    if !interior.is_empty() {
        let system = KilledSystem::new(net, &interior).map_err(|e| match e {
            Error::NeverKilled(_) => Error::EmptyBoundary,
            other => other,
        })?;
        let mut rhs_re = vec![0.0; interior.len()];
        let mut rhs_im = vec![0.0; interior.len()];
        for (i, &u) in interior.iter().enumerate() {
            for s in net.slots(u) {
                if boundary[s.to] {
                    rhs_re[i] += s.conductance * positions[s.to].re;
                    rhs_im[i] += s.conductance * positions[s.to].im;
                }
            }
        }
        let re = system.solve(&rhs_re)?;
        let im = system.solve(&rhs_im)?;
        for (i, &u) in interior.iter().enumerate() {
            positions[u] = Complex64::new(re[i], im[i]);
        }
    }
    Ok(TutteEmbedding { positions, boundary_order, hitting_cdf, is_boundary: boundary.to_vec(), root })
}

/// Largest interior deviation from the conductance-weighted neighbour mean.
pub fn harmonicity_residual(embedding: &TutteEmbedding, net: &Network) -> f64 {
    (0..net.n())
        .filter(|&v| !embedding.is_boundary[v] && net.degree(v) > 0.0)
        .map(|v| {
            let mean: Complex64 =
                net.slots(v).iter().map(|s| embedding.positions[s.to] * s.conductance).sum::<Complex64>()
                    / net.degree(v);
            (embedding.positions[v] - mean).norm()
        })
        .fold(0.0, f64::max)
}

/// Boundary mask from a vertex list, for embedding plain networks.
pub fn boundary_from_list(n: usize, list: &[usize]) -> Result<Vec<bool>> {
    mask_of(n, list)
}
