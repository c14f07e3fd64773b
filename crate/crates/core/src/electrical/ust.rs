use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::rng::StreamRng;

use super::{mask_of, Network};

/// Walk from `start` until `stop` holds (checked at `start` too); returns the visited vertices.
pub fn walk_until(net: &Network, start: usize, stop: impl Fn(usize) -> bool, rng: &mut StreamRng) -> Vec<usize> {
    let mut path = vec![start];
    let mut v = start;
    while !stop(v) {
        v = net.step(v, rng).to;
        path.push(v);
    }
    path
}

/// Chronological loop erasure.
pub fn loop_erase(path: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(path.len());
    let mut pos = std::collections::HashMap::new();
    for &v in path {
        if let Some(&p) = pos.get(&v) {
            for w in out.drain(p + 1..) {
                pos.remove(&w);
            }
        } else {
            pos.insert(v, out.len());
            out.push(v);
        }
    }
    out
}

/// Spanning tree with probability proportional to the product of its
/// conductances, as edge record ids (Wilson's algorithm rooted at `root`).
pub fn wilson_ust(net: &Network, root: usize, rng: &mut StreamRng) -> Result<Vec<usize>> {
    if root >= net.n() {
        return Err(Error::VertexOutOfRange(root));
    }
    if !net.is_connected() {
        return Err(Error::Disconnected("spanning tree of a disconnected network".into()));
    }
    let n = net.n();
    let mut in_tree = vec![false; n];
    let mut next = vec![(usize::MAX, usize::MAX); n];
    in_tree[root] = true;
    let mut tree = Vec::with_capacity(n.saturating_sub(1));
    for start in 0..n {
        // Overwriting `next` on revisits keeps only the last exit, which is the loop erasure.
        let mut v = start;
        while !in_tree[v] {
            let s = net.step(v, rng);
            next[v] = (s.to, s.edge);
            v = s.to;
        }
        let mut v = start;
        while !in_tree[v] {
            in_tree[v] = true;
            tree.push(next[v].1);
            v = next[v].0;
        }
    }
    Ok(tree)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoupledExit {
    pub exit_x: usize,
    pub exit_y: usize,
    pub coupled: bool,
}

/// Wilson coupling of the exit points of walks from `x` and `y` on `target`.
///
/// The walk from `y` is run to `target` and loop-erased; the walk from `x` then
/// runs until it meets the erasure or `target`. Meeting the erasure means the
/// tree branch from `x` merges into it, so both exit at the erasure's endpoint.
pub fn coupled_exit(net: &Network, target: &[usize], x: usize, y: usize, rng: &mut StreamRng) -> Result<CoupledExit> {
    let a_mask = mask_of(net.n(), target)?;
    if x >= net.n() || y >= net.n() {
        return Err(Error::VertexOutOfRange(x.max(y)));
    }
    for v in [x, y] {
        if !target.iter().any(|&a| net.component(a) == net.component(v)) {
            return Err(Error::Disconnected(format!("vertex {v} cannot reach the target set")));
        }
    }
    let y_path = walk_until(net, y, |v| a_mask[v], rng);
    let erased = loop_erase(&y_path);
    let exit_y = *erased.last().expect("walk has a start");
    let mut on_erasure = vec![false; net.n()];
    for &v in &erased {
        on_erasure[v] = true;
    }
    let x_path = walk_until(net, x, |v| a_mask[v] || on_erasure[v], rng);
    let hit = *x_path.last().expect("walk has a start");
    let exit_x = if on_erasure[hit] { exit_y } else { hit };
    Ok(CoupledExit { exit_x, exit_y, coupled: exit_x == exit_y })
}

/// Whether removing `visited` separates `y` from every vertex of `target`.
pub fn disconnects(net: &Network, visited: &[usize], y: usize, target: &[bool]) -> bool {
    let mut blocked = vec![false; net.n()];
    for &v in visited {
        blocked[v] = true;
    }
    if blocked[y] {
        return true;
    }
    let mut seen = vec![false; net.n()];
    let mut queue = VecDeque::from([y]);
    seen[y] = true;
    while let Some(u) = queue.pop_front() {
        if target[u] {
            return false;
        }
        for s in net.slots(u) {
            if !seen[s.to] && !blocked[s.to] {
                seen[s.to] = true;
                queue.push_back(s.to);
            }
        }
    }
    true
}
