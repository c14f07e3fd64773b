use crate::error::{invalid, Error, Result};

use super::green::{green_function, KilledSystem};
use super::{mask_of, Network};

/// A network with one vertex set identified to a single vertex.
#[derive(Debug, Clone)]
pub struct Glued {
    pub net: Network,
    /// Old vertex to new vertex.
    pub relabel: Vec<usize>,
    pub glued: usize,
}

impl Glued {
    /// Identifies all of `set`; parallel conductances add and self-loops are dropped.
    pub fn new(net: &Network, set: &[usize]) -> Result<Self> {
        let mask = mask_of(net.n(), set)?;
        if set.is_empty() {
            return Err(Error::EmptySet("glued set".into()));
        }
        let glued = 0;
        let mut relabel = vec![0; net.n()];
        let mut next = 1;
        for v in 0..net.n() {
            if !mask[v] {
                relabel[v] = next;
                next += 1;
            }
        }
        let edges = net
            .edges()
            .iter()
            .filter_map(|&(u, v, c)| {
                let (a, b) = (relabel[u], relabel[v]);
                (a != b).then_some((a, b, c))
            })
            .collect();
        Ok(Glued { net: Network::new(next, edges)?, relabel, glued })
    }
}

fn check_disjoint(n: usize, a: &[usize], z: &[usize]) -> Result<Vec<bool>> {
    if a.is_empty() || z.is_empty() {
        return Err(Error::EmptySet("source or sink set".into()));
    }
    let za = mask_of(n, z)?;
    if a.iter().any(|&v| v >= n) {
        return Err(Error::VertexOutOfRange(*a.iter().max().expect("nonempty")));
    }
    if a.iter().any(|&v| za[v]) {
        return Err(invalid("source and sink sets intersect"));
    }
    Ok(za)
}

/// `R(A ↔ Z)`; infinite when no path joins `A` to `Z`.
pub fn effective_resistance(net: &Network, a: &[usize], z: &[usize]) -> Result<f64> {
    let z_mask = check_disjoint(net.n(), a, z)?;
    let glued = Glued::new(net, a)?;
    let mut region = vec![true; glued.net.n()];
    for v in 0..net.n() {
        if z_mask[v] {
            region[glued.relabel[v]] = false;
        }
    }
    let reach = glued.net.reachable_within(glued.glued, &region);
    let system = match KilledSystem::new(&glued.net, &reach) {
        Ok(s) => s,
        Err(Error::NeverKilled(_)) => return Ok(f64::INFINITY),
        Err(e) => return Err(e),
    };
    let gr = system.solve_point(glued.glued, glued.net.n())?;
    Ok(gr[glued.glued])
}

/// Antisymmetric edge function; `flow[e]` is the flow along record `e` from its first to its second endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitFlow {
    pub source: usize,
    pub sinks: Vec<usize>,
    pub flow: Vec<f64>,
}

impl UnitFlow {
    pub fn energy(&self, net: &Network) -> f64 {
        net.edges().iter().zip(&self.flow).map(|(&(_, _, c), f)| f * f / c).sum()
    }

    /// Net outflow at every vertex.
    pub fn divergence(&self, net: &Network) -> Vec<f64> {
        let mut div = vec![0.0; net.n()];
        for (&(u, v, _), f) in net.edges().iter().zip(&self.flow) {
            div[u] += f;
            div[v] -= f;
        }
        div
    }

    /// Flow leaving the vertex set `mask`.
    pub fn cut_flow(&self, net: &Network, mask: &[bool]) -> f64 {
        net.edges()
            .iter()
            .zip(&self.flow)
            .map(|(&(u, v, _), f)| match (mask[u], mask[v]) {
                (true, false) => *f,
                (false, true) => -*f,
                _ => 0.0,
            })
            .sum()
    }
}

/// Unit current flow `θ(u,v) = c(u,v)·(gr(x,u) − gr(x,v))` from `x` to `Z`.
pub fn unit_current_flow(net: &Network, x: usize, z: &[usize]) -> Result<UnitFlow> {
    let z_mask = check_disjoint(net.n(), &[x], z)?;
    let region: Vec<usize> = (0..net.n()).filter(|&v| !z_mask[v]).collect();
    let table = green_function(net, &region, x).map_err(|e| match e {
        Error::NeverKilled(_) => Error::Disconnected(format!("vertex {x} cannot reach the sink set")),
        other => other,
    })?;
    let flow = net.edges().iter().map(|&(u, v, c)| c * (table.gr[u] - table.gr[v])).collect();
    let mut sinks = z.to_vec();
    sinks.sort_unstable();
    sinks.dedup();
    Ok(UnitFlow { source: x, sinks, flow })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichRecord {
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    /// Largest current `c(u,v)·|gr(u) − gr(v)|` on an edge inside `B`; equals `delta` for unit conductances.
    pub max_current: f64,
    pub resistance: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

const REL_SLACK: f64 = 1e-9;

/// Checks `a²/(a+δ) ≤ R(A ↔ V∖B) ≤ b + δ`, with `a`, `b` the extremes of
/// `gr_B(x,·)` on the inner boundary of `A` and `δ` the largest difference of
/// `gr_B(x,·)` across an edge inside `B`. Also checks that no edge carries more
/// than the unit current, which is `δ ≤ 1` on graphs with unit conductances.
pub fn sandwich_check(net: &Network, a_set: &[usize], b_set: &[usize], x: usize) -> Result<SandwichRecord> {
    let a_mask = mask_of(net.n(), a_set)?;
    let b_mask = mask_of(net.n(), b_set)?;
    if !a_mask[x] {
        return Err(invalid("x must lie in A"));
    }
    if (0..net.n()).any(|v| a_mask[v] && !b_mask[v]) {
        return Err(invalid("A must be a subset of B"));
    }
    if (0..net.n()).all(|v| a_mask[v] == b_mask[v]) {
        return Err(invalid("A must be a strict subset of B"));
    }
    let inner: Vec<usize> = (0..net.n()).filter(|&v| a_mask[v] && net.slots(v).iter().any(|s| !a_mask[s.to])).collect();
    if inner.is_empty() {
        return Err(Error::EmptySet("inner boundary of A".into()));
    }
    let gr = green_function(net, b_set, x)?.gr;
    let a = inner.iter().map(|&v| gr[v]).fold(f64::INFINITY, f64::min);
    let b = inner.iter().map(|&v| gr[v]).fold(f64::NEG_INFINITY, f64::max);
    let delta = net
        .edges()
        .iter()
        .filter(|&&(u, v, _)| b_mask[u] && b_mask[v])
        .map(|&(u, v, _)| (gr[u] - gr[v]).abs())
        .fold(0.0, f64::max);
    let max_current = net
        .edges()
        .iter()
        .filter(|&&(u, v, _)| b_mask[u] && b_mask[v])
        .map(|&(u, v, c)| c * (gr[u] - gr[v]).abs())
        .fold(0.0, f64::max);
    let outside: Vec<usize> = (0..net.n()).filter(|&v| !b_mask[v]).collect();
    let resistance = effective_resistance(net, a_set, &outside)?;
    // a = δ = 0 when A reaches past x's piece of B; the bound degenerates to 0
    let lower = if a + delta > 0.0 { a * a / (a + delta) } else { 0.0 };
    let upper = b + delta;
    let pass = lower <= resistance * (1.0 + REL_SLACK)
        && resistance <= upper * (1.0 + REL_SLACK)
        && max_current <= 1.0 + REL_SLACK;
    Ok(SandwichRecord { a, b, delta, max_current, resistance, lower, upper, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Network {
        Network::new(n, (1..n).map(|i| (i - 1, i, 1.0)).collect()).unwrap()
    }

    #[test]
    fn series_parallel_complete() {
        assert!((effective_resistance(&path(3), &[0], &[2]).unwrap() - 2.0).abs() < 1e-12);
        assert!((effective_resistance(&path(4), &[0], &[3]).unwrap() - 3.0).abs() < 1e-12);
        let double = Network::new(2, vec![(0, 1, 1.0), (0, 1, 1.0)]).unwrap();
        assert!((effective_resistance(&double, &[0], &[1]).unwrap() - 0.5).abs() < 1e-12);
        let k4: Vec<(usize, usize, f64)> = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j, 1.0))).collect();
        let k4 = Network::new(4, k4).unwrap();
        assert!((effective_resistance(&k4, &[0], &[1]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gluing_and_infinity() {
        // Gluing both ends of a 3-path leaves two parallel unit edges.
        let net = path(3);
        assert!((effective_resistance(&net, &[0, 2], &[1]).unwrap() - 0.5).abs() < 1e-12);
        let split = Network::new(4, vec![(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert_eq!(effective_resistance(&split, &[0], &[3]).unwrap(), f64::INFINITY);
        assert!(effective_resistance(&net, &[0, 1], &[1]).is_err());
        assert!(effective_resistance(&net, &[], &[1]).is_err());
    }

    #[test]
    fn flows() {
        let single = Network::new(2, vec![(0, 1, 1.0)]).unwrap();
        let f = unit_current_flow(&single, 0, &[1]).unwrap();
        assert!((f.flow[0] - 1.0).abs() < 1e-12);
        let double = Network::new(2, vec![(0, 1, 1.0), (0, 1, 1.0)]).unwrap();
        let f = unit_current_flow(&double, 0, &[1]).unwrap();
        assert!(f.flow.iter().all(|&t| (t - 0.5).abs() < 1e-12));
        assert!((f.energy(&double) - 0.5).abs() < 1e-12);
        let div = f.divergence(&double);
        assert!((div[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sandwich_path_example() {
        let r = sandwich_check(&path(3), &[0], &[0, 1], 0).unwrap();
        assert!((r.a - 2.0).abs() < 1e-12 && (r.b - 2.0).abs() < 1e-12);
        assert!((r.delta - 1.0).abs() < 1e-12);
        assert!((r.resistance - 2.0).abs() < 1e-12);
        assert!((r.lower - 4.0 / 3.0).abs() < 1e-12 && (r.upper - 3.0).abs() < 1e-12);
        assert!(r.pass);
        assert!(sandwich_check(&path(3), &[0, 1], &[0, 1], 0).is_err());
        assert!(sandwich_check(&path(3), &[1], &[0, 1], 0).is_err());
    }

    #[test]
    fn sandwich_with_source_cut_off_inside_b() {
        // x = 0 has no neighbour in B, so gr vanishes on the rest of A
        let net = Network::new(4, vec![(0, 3, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        let r = sandwich_check(&net, &[0, 1], &[0, 1, 2], 0).unwrap();
        assert_eq!((r.a, r.delta, r.lower), (0.0, 0.0, 0.0));
        assert!(r.pass);
    }
}
