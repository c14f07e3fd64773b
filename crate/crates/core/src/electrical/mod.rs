//! Weighted multigraphs viewed as electrical networks.
//!
//! Each edge record carries a positive conductance; parallel records are kept
//! distinct so walks and spanning trees see multiplicities. The walk from `u`
//! steps along an incident record with probability proportional to its
//! conductance, so `deg(u)` below is always the conductance-weighted degree.

mod green;
mod resistance;
mod ust;

pub use green::{
    dirichlet_energy, exit_moment_check, expected_exit_time, green_function, harmonic_extension, GreenTable,
    KilledSystem, MomentCheck,
};
pub use resistance::{effective_resistance, sandwich_check, unit_current_flow, Glued, SandwichRecord, UnitFlow};
pub use ust::{coupled_exit, disconnects, loop_erase, walk_until, wilson_ust, CoupledExit};

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::map::MatedCrtMap;
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slot {
    pub to: usize,
    pub edge: usize,
    pub conductance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    offsets: Vec<usize>,
    slots: Vec<Slot>,
    cumulative: Vec<f64>,
    degree: Vec<f64>,
    component: Vec<usize>,
    n_components: usize,
    unit_weights: bool,
    pub labels: Option<Vec<String>>,
}

impl Network {
    /// Builds a network from `(u, v, conductance)` records. Self-loops are rejected.
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut counts = vec![0usize; n + 1];
        for &(u, v, c) in &edges {
            if u >= n || v >= n {
                return Err(Error::VertexOutOfRange(u.max(v)));
            }
            if u == v {
                return Err(invalid(format!("self-loop at vertex {u}")));
            }
            if !(c > 0.0 && c.is_finite()) {
                return Err(invalid(format!("conductance must be positive and finite, got {c}")));
            }
            counts[u + 1] += 1;
            counts[v + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let offsets = counts;
        let mut fill = offsets.clone();
        let placeholder = Slot { to: 0, edge: 0, conductance: 0.0 };
        let mut slots = vec![placeholder; 2 * edges.len()];
        for (e, &(u, v, c)) in edges.iter().enumerate() {
            slots[fill[u]] = Slot { to: v, edge: e, conductance: c };
            fill[u] += 1;
            slots[fill[v]] = Slot { to: u, edge: e, conductance: c };
            fill[v] += 1;
        }
        Ok(Self::assemble(n, edges, offsets, slots))
    }

    /// Network of a map, with adjacency in rotation order and unit conductances.
    pub fn from_map(map: &MatedCrtMap) -> Self {
        let edges: Vec<(usize, usize, f64)> = map.edges().iter().map(|e| (e.u, e.v, 1.0)).collect();
        let mut offsets = Vec::with_capacity(map.n() + 1);
        let mut slots = Vec::with_capacity(2 * edges.len());
        offsets.push(0);
        for v in 0..map.n() {
            for &d in map.rotation(v) {
                slots.push(Slot { to: map.dart_head(d), edge: d / 2, conductance: 1.0 });
            }
            offsets.push(slots.len());
        }
        Self::assemble(map.n(), edges, offsets, slots)
    }

    fn assemble(n: usize, edges: Vec<(usize, usize, f64)>, offsets: Vec<usize>, slots: Vec<Slot>) -> Self {
        let mut cumulative = Vec::with_capacity(slots.len());
        let mut degree = vec![0.0; n];
        for v in 0..n {
            let mut acc = 0.0;
            for s in &slots[offsets[v]..offsets[v + 1]] {
                acc += s.conductance;
                cumulative.push(acc);
            }
            degree[v] = acc;
        }
        let unit_weights = edges.iter().all(|e| e.2 == 1.0);
        let mut net = Network {
            n,
            edges,
            offsets,
            slots,
            cumulative,
            degree,
            component: vec![usize::MAX; n],
            n_components: 0,
            unit_weights,
            labels: None,
        };
        net.label_components();
        net
    }

    fn label_components(&mut self) {
        let mut queue = VecDeque::new();
        let mut count = 0;
        for s in 0..self.n {
            if self.component[s] != usize::MAX {
                continue;
            }
            self.component[s] = count;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for i in self.offsets[u]..self.offsets[u + 1] {
                    let w = self.slots[i].to;
                    if self.component[w] == usize::MAX {
                        self.component[w] = count;
                        queue.push_back(w);
                    }
                }
            }
            count += 1;
        }
        self.n_components = count;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, v: usize) -> f64 {
        self.degree[v]
    }

    pub fn slots(&self, v: usize) -> &[Slot] {
        &self.slots[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn component(&self, v: usize) -> usize {
        self.component[v]
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn is_connected(&self) -> bool {
        self.n_components <= 1
    }

    /// One walk step from `v`: the chosen slot, picked proportionally to conductance.
    pub fn step(&self, v: usize, rng: &mut StreamRng) -> Slot {
        let (lo, hi) = (self.offsets[v], self.offsets[v + 1]);
        debug_assert!(hi > lo, "walk stuck at isolated vertex {v}");
        if self.unit_weights {
            return self.slots[rng.random_range(lo..hi)];
        }
        let u = rng.random::<f64>() * self.degree[v];
        let k = self.cumulative[lo..hi].partition_point(|&c| c <= u).min(hi - lo - 1);
        self.slots[lo + k]
    }

    /// Copy of the network without edge record `e`.
    pub fn without_edge(&self, e: usize) -> Result<Self> {
        if e >= self.edges.len() {
            return Err(invalid(format!("edge {e} out of range")));
        }
        let mut edges = self.edges.clone();
        edges.remove(e);
        Network::new(self.n, edges)
    }

    /// Vertices reachable from `x` through vertices of `mask` (`x` included when in the mask).
    pub fn reachable_within(&self, x: usize, mask: &[bool]) -> Vec<usize> {
        if !mask[x] {
            return Vec::new();
        }
        let mut seen = vec![false; self.n];
        let mut out = vec![x];
        seen[x] = true;
        let mut head = 0;
        while head < out.len() {
            let u = out[head];
            head += 1;
            for s in self.slots(u) {
                if mask[s.to] && !seen[s.to] {
                    seen[s.to] = true;
                    out.push(s.to);
                }
            }
        }
        out
    }

    /// Graph distances from `x` in edge steps (`usize::MAX` when unreachable).
    pub fn bfs_distances(&self, x: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n];
        let mut queue = VecDeque::from([x]);
        dist[x] = 0;
        while let Some(u) = queue.pop_front() {
            for s in self.slots(u) {
                if dist[s.to] == usize::MAX {
                    dist[s.to] = dist[u] + 1;
                    queue.push_back(s.to);
                }
            }
        }
        dist
    }

    /// Writes the generic edge list: an `n` line then `i j conductance` lines.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n {}", self.n)?;
        for &(u, v, c) in &self.edges {
            writeln!(w, "{u} {v} {c}")?;
        }
        Ok(())
    }

    /// Reads `i j conductance` lines. An optional `n <count>` line fixes the
    /// vertex count, otherwise it is one more than the largest index.
    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self> {
        let mut n = None;
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |msg: &str| Error::Parse { line: idx + 1, msg: msg.to_string() };
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens.as_slice() {
                ["n", count] => n = Some(count.parse().map_err(|_| perr("bad vertex count"))?),
                [u, v, c] => edges.push((
                    u.parse().map_err(|_| perr("bad vertex"))?,
                    v.parse().map_err(|_| perr("bad vertex"))?,
                    c.parse().map_err(|_| perr("bad conductance"))?,
                )),
                [u, v] => edges.push((
                    u.parse().map_err(|_| perr("bad vertex"))?,
                    v.parse().map_err(|_| perr("bad vertex"))?,
                    1.0,
                )),
                _ => return Err(perr("expected `i j conductance`")),
            }
        }
        let n = n.unwrap_or_else(|| edges.iter().map(|&(u, v, _)| u.max(v) + 1).max().unwrap_or(0));
        Network::new(n, edges)
    }
}

/// Boolean membership mask of a vertex list.
pub fn mask_of(n: usize, set: &[usize]) -> Result<Vec<bool>> {
    let mut mask = vec![false; n];
    for &v in set {
        *mask.get_mut(v).ok_or(Error::VertexOutOfRange(v))? = true;
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn degrees_and_components() {
        let net = Network::new(5, vec![(0, 1, 1.0), (1, 2, 2.0), (0, 1, 1.0), (3, 4, 0.5)]).unwrap();
        assert_eq!(net.degree(0), 2.0);
        assert_eq!(net.degree(1), 4.0);
        assert_eq!(net.n_components(), 2);
        assert_eq!(net.component(2), net.component(0));
        assert_ne!(net.component(3), net.component(0));
        assert!(Network::new(2, vec![(0, 0, 1.0)]).is_err());
        assert!(Network::new(2, vec![(0, 1, 0.0)]).is_err());
        assert!(Network::new(2, vec![(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn weighted_step_frequencies() {
        let net = Network::new(3, vec![(0, 1, 1.0), (0, 2, 3.0)]).unwrap();
        let mut rng = stream(1, "test", 0);
        let n = 200_000;
        let hits = (0..n).filter(|_| net.step(0, &mut rng).to == 2).count() as f64 / n as f64;
        let sd = (0.75f64 * 0.25 / n as f64).sqrt();
        assert!((hits - 0.75).abs() < 4.0 * sd, "{hits}");
    }

    #[test]
    fn edge_list_round_trip() {
        let net = Network::new(4, vec![(0, 1, 1.5), (1, 2, 1.0), (0, 1, 2.0)]).unwrap();
        let mut buf = Vec::new();
        net.write_edge_list(&mut buf).unwrap();
        let back = Network::read_edge_list(&buf[..]).unwrap();
        assert_eq!(back, net);
        let implicit = Network::read_edge_list("0 1 1\n1 2\n".as_bytes()).unwrap();
        assert_eq!(implicit.n(), 3);
        assert!(Network::read_edge_list("0 1 x\n".as_bytes()).is_err());
    }

    #[test]
    fn reachable_respects_mask() {
        let net = Network::new(4, vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        let mask = vec![true, true, false, true];
        assert_eq!(net.reachable_within(0, &mask), vec![0, 1]);
        assert!(net.reachable_within(2, &mask).is_empty());
        assert_eq!(net.bfs_distances(0), vec![0, 1, 2, 3]);
    }
}
