//! Mated-CRT maps: the planar multigraph on cells built from per-cell minima.
//!
//! Vertices are 0-based everywhere, including the text file format. Vertex
//! `i` stands for cell `i`. Each edge record has conductance one, so a pair
//! joined by both an L-edge and an R-edge has multiplicity two.
//!
//! The rotation system is stored as darts. Edge `e` owns darts `2e` (from the
//! lower endpoint to the higher) and `2e + 1` (reverse). Every vertex keeps its
//! outgoing darts in counterclockwise order for the drawing where the
//! trivial chain runs left to right, L-edges arc above it and R-edges arc below.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;

use crate::brownian::{cell_minima, CellMinima, Coord, CorrelatedPath, Topology};
use crate::error::{invalid, Error, Result};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    Trivial,
    L,
    R,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Trivial => "T",
            EdgeKind::L => "L",
            EdgeKind::R => "R",
        })
    }
}

impl FromStr for EdgeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "T" => Ok(EdgeKind::Trivial),
            "L" => Ok(EdgeKind::L),
            "R" => Ok(EdgeKind::R),
            other => Err(invalid(format!("unknown edge kind `{other}`"))),
        }
    }
}

/// Undirected edge record with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub kind: EdgeKind,
}

impl Edge {
    pub fn other(&self, w: usize) -> usize {
        if w == self.u {
            self.v
        } else {
            self.u
        }
    }
}

#[inline]
pub fn twin(dart: usize) -> usize {
    dart ^ 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatedCrtMap {
    n: usize,
    edges: Vec<Edge>,
    rot_offsets: Vec<usize>,
    rot: Vec<usize>,
    dart_pos: Vec<usize>,
    boundary: Option<Vec<bool>>,
    root: Option<usize>,
    pub topology: Topology,
    pub gamma: f64,
    pub seed: u64,
}

impl MatedCrtMap {
    /// Assembles a map from edges and per-vertex counterclockwise dart lists.
    pub fn from_parts(n: usize, edges: Vec<Edge>, rotation: Vec<Vec<usize>>, topology: Topology) -> Result<Self> {
        if rotation.len() != n {
            return Err(Error::LengthMismatch { left: rotation.len(), right: n });
        }
        for e in &edges {
            if e.u >= e.v || e.v >= n {
                return Err(Error::VertexOutOfRange(e.v.max(e.u)));
            }
        }
        let mut rot_offsets = Vec::with_capacity(n + 1);
        let mut rot = Vec::with_capacity(2 * edges.len());
        let mut dart_pos = vec![usize::MAX; 2 * edges.len()];
        rot_offsets.push(0);
        for (v, darts) in rotation.into_iter().enumerate() {
            for d in darts {
                if d >= dart_pos.len() {
                    return Err(Error::InconsistentRotation(format!("dart {d} does not exist")));
                }
                let e = &edges[d / 2];
                let tail = if d % 2 == 0 { e.u } else { e.v };
                if tail != v {
                    return Err(Error::InconsistentRotation(format!("dart {d} listed at vertex {v}")));
                }
                if dart_pos[d] != usize::MAX {
                    return Err(Error::InconsistentRotation(format!("dart {d} listed twice")));
                }
                dart_pos[d] = rot.len();
                rot.push(d);
            }
            rot_offsets.push(rot.len());
        }
        if let Some(d) = dart_pos.iter().position(|&p| p == usize::MAX) {
            return Err(Error::InconsistentRotation(format!("dart {d} missing")));
        }
        Ok(MatedCrtMap {
            n,
            edges,
            rot_offsets,
            rot,
            dart_pos,
            boundary: None,
            root: None,
            topology,
            gamma: f64::NAN,
            seed: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.rot_offsets[v + 1] - self.rot_offsets[v]
    }

    /// Outgoing darts of `v` in counterclockwise order.
    pub fn rotation(&self, v: usize) -> &[usize] {
        &self.rot[self.rot_offsets[v]..self.rot_offsets[v + 1]]
    }

    pub fn dart_tail(&self, d: usize) -> usize {
        let e = &self.edges[d / 2];
        if d % 2 == 0 {
            e.u
        } else {
            e.v
        }
    }

    pub fn dart_head(&self, d: usize) -> usize {
        self.dart_tail(twin(d))
    }

    /// Neighbours of `v` in rotation order, one entry per edge record.
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.rotation(v).iter().map(move |&d| self.dart_head(d))
    }

    /// Face successor: the dart after `twin(d)` in the rotation at the head of `d`.
    pub fn next_in_face(&self, d: usize) -> usize {
        let t = twin(d);
        let w = self.dart_tail(t);
        let (lo, hi) = (self.rot_offsets[w], self.rot_offsets[w + 1]);
        let p = self.dart_pos[t] + 1;
        self.rot[if p == hi { lo } else { p }]
    }

    pub fn boundary(&self) -> Option<&[bool]> {
        self.boundary.as_deref()
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary.as_ref().is_some_and(|b| b[v])
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        match &self.boundary {
            Some(b) => (0..self.n).filter(|&v| b[v]).collect(),
            None => Vec::new(),
        }
    }

    pub fn set_boundary(&mut self, flags: Vec<bool>) -> Result<()> {
        if flags.len() != self.n {
            return Err(Error::LengthMismatch { left: flags.len(), right: self.n });
        }
        self.boundary = Some(flags);
        Ok(())
    }

    pub fn root(&self) -> Option<usize> {
        self.root
    }

    pub fn set_root(&mut self, root: usize) -> Result<()> {
        if root >= self.n {
            return Err(Error::VertexOutOfRange(root));
        }
        self.root = Some(root);
        Ok(())
    }

    pub fn degree_sum(&self) -> usize {
        self.rot.len()
    }

    /// Builds the map of a sampled path. Disk paths also get boundary flags.
    ///
    /// Adjacent cells share a grid point, so their minima tie whenever that
    /// point is the minimum of both. Such ties have probability zero for the
    /// continuum path and make the ≤ condition produce crossing arcs, so each
    /// one is broken by moving one of the two minima down by one ulp, picking
    /// the cell with a seeded fair coin.
    pub fn from_path(path: &CorrelatedPath) -> Result<Self> {
        let mut ml = cell_minima(path, Coord::L)?;
        let mut mr = cell_minima(path, Coord::R)?;
        break_adjacent_ties(&mut ml.values, path.seed, 0);
        break_adjacent_ties(&mut mr.values, path.seed, 1);
        let mut map = build_map(&ml, &mr)?;
        map.topology = path.topology;
        map.gamma = path.gamma;
        map.seed = path.seed;
        if path.topology == Topology::Disk {
            let flags = boundary_flags(&ml);
            map.set_boundary(flags)?;
        }
        Ok(map)
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n {}", self.n)?;
        writeln!(w, "topology {}", self.topology)?;
        match self.root {
            Some(r) => writeln!(w, "root {r}")?,
            None => writeln!(w, "root -")?,
        }
        writeln!(w, "gamma {}", self.gamma)?;
        writeln!(w, "seed {}", self.seed)?;
        if let Some(b) = &self.boundary {
            let list: Vec<String> = (0..self.n).filter(|&v| b[v]).map(|v| v.to_string()).collect();
            writeln!(w, "boundary {}", list.join(" "))?;
        }
        writeln!(w, "edges {}", self.edges.len())?;
        for e in &self.edges {
            writeln!(w, "{} {} {}", e.u, e.v, e.kind)?;
        }
        writeln!(w, "rotation")?;
        for v in 0..self.n {
            let darts: Vec<String> = self.rotation(v).iter().map(|d| d.to_string()).collect();
            writeln!(w, "{v}: {}", darts.join(" "))?;
        }
        Ok(())
    }

    /// Reads the text format written by [`MatedCrtMap::write_text`]. Without a
    /// rotation block the canonical rotation of the edge set is used.
    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut n = None;
        let mut topology = Topology::Plane;
        let mut root = None;
        let mut gamma = f64::NAN;
        let mut seed = 0;
        let mut boundary: Option<Vec<usize>> = None;
        let mut edges = Vec::new();
        let mut expected_edges = None;
        let mut rotation: Option<Vec<Vec<usize>>> = None;
        let perr = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
        for (idx, line) in r.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rot) = rotation.as_mut() {
                let (v, rest) = line.split_once(':').ok_or_else(|| perr(line_no, "expected `v: darts`"))?;
                let v: usize = v.trim().parse().map_err(|_| perr(line_no, "bad vertex"))?;
                if v >= rot.len() {
                    return Err(Error::VertexOutOfRange(v));
                }
                rot[v] = rest
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| perr(line_no, "bad dart")))
                    .collect::<Result<_>>()?;
                continue;
            }
            if expected_edges.is_some_and(|k| edges.len() < k) {
                let mut it = line.split_whitespace();
                let (Some(a), Some(b), Some(k), None) = (it.next(), it.next(), it.next(), it.next()) else {
                    return Err(perr(line_no, "expected `i j kind`"));
                };
                let a: usize = a.parse().map_err(|_| perr(line_no, "bad vertex"))?;
                let b: usize = b.parse().map_err(|_| perr(line_no, "bad vertex"))?;
                edges.push(Edge { u: a.min(b), v: a.max(b), kind: k.parse()? });
                continue;
            }
            let (key, value) = line.split_once(' ').unwrap_or((line, ""));
            match key {
                "n" => n = Some(value.parse().map_err(|_| perr(line_no, "bad n"))?),
                "topology" => topology = value.parse()?,
                "root" => {
                    root = if value == "-" { None } else { Some(value.parse().map_err(|_| perr(line_no, "bad root"))?) }
                }
                "gamma" => gamma = value.parse().map_err(|_| perr(line_no, "bad gamma"))?,
                "seed" => seed = value.parse().map_err(|_| perr(line_no, "bad seed"))?,
                "boundary" => {
                    boundary = Some(
                        value
                            .split_whitespace()
                            .map(|t| t.parse().map_err(|_| perr(line_no, "bad vertex")))
                            .collect::<Result<_>>()?,
                    )
                }
                "edges" => expected_edges = Some(value.parse().map_err(|_| perr(line_no, "bad edge count"))?),
                "rotation" => {
                    let n = n.ok_or_else(|| perr(line_no, "rotation before n"))?;
                    rotation = Some(vec![Vec::new(); n]);
                }
                _ => return Err(perr(line_no, "unknown key")),
            }
        }
        let n = n.ok_or_else(|| perr(0, "missing n"))?;
        if expected_edges.is_some_and(|k| k != edges.len()) {
            return Err(perr(0, "edge list shorter than declared"));
        }
        let mut map = match rotation {
            Some(rot) => MatedCrtMap::from_parts(n, edges, rot, topology)?,
            None => {
                let rot = canonical_rotation(n, &edges);
                MatedCrtMap::from_parts(n, edges, rot, topology)?
            }
        };
        map.gamma = gamma;
        map.seed = seed;
        if let Some(list) = boundary {
            let mut flags = vec![false; n];
            for v in list {
                *flags.get_mut(v).ok_or(Error::VertexOutOfRange(v))? = true;
            }
            map.set_boundary(flags)?;
        }
        if let Some(r) = root {
            map.set_root(r)?;
        }
        Ok(map)
    }
}

fn break_adjacent_ties(values: &mut [f64], seed: u64, coord: u64) {
    let mut rng = stream(seed, "map/ties", coord);
    for i in 1..values.len() {
        if values[i] == values[i - 1] {
            let k = if rng.random::<bool>() { i } else { i - 1 };
            values[k] = values[k].next_down();
        }
    }
}

/// Non-trivial edges `(i, j)`, `j > i + 1`, with `max(m_i, m_j) <= min_{i<k<j} m_k`.
///
/// The stack holds groups of equal values, strictly increasing from bottom to
/// top; it contains exactly the indices `i < j` with no strictly smaller value
/// in `(i, j)`. At step `j` every member of a group with value `>= m_j` is
/// adjacent to `j`, and so is the last member of the nearest group below.
pub fn stack_edges(m: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut stack: Vec<(f64, Vec<usize>)> = Vec::new();
    let emit = |i: usize, j: usize, out: &mut Vec<(usize, usize)>| {
        if i + 1 < j {
            out.push((i, j));
        }
    };
    for (j, &v) in m.iter().enumerate() {
        while stack.last().is_some_and(|(g, _)| *g > v) {
            let (_, members) = stack.pop().expect("nonempty");
            for i in members {
                emit(i, j, &mut out);
            }
        }
        let joined = match stack.last_mut() {
            Some((g, members)) if *g == v => {
                for &i in members.iter() {
                    emit(i, j, &mut out);
                }
                members.push(j);
                true
            }
            _ => false,
        };
        let below = stack.len() - usize::from(joined);
        if below > 0 {
            let i = *stack[below - 1].1.last().expect("groups are nonempty");
            emit(i, j, &mut out);
        }
        if !joined {
            stack.push((v, vec![j]));
        }
    }
    out.sort_unstable();
    out
}

/// Builds the map from per-cell minima of `L` and `R`.
pub fn build_map(ml: &CellMinima, mr: &CellMinima) -> Result<MatedCrtMap> {
    let n = ml.len();
    if mr.len() != n {
        return Err(Error::LengthMismatch { left: n, right: mr.len() });
    }
    if n == 0 {
        return Err(invalid("map needs at least one cell"));
    }
    if ml.values.iter().chain(&mr.values).any(|v| v.is_nan()) {
        return Err(invalid("cell minima contain NaN"));
    }
    let mut edges: Vec<Edge> = (1..n).map(|i| Edge { u: i - 1, v: i, kind: EdgeKind::Trivial }).collect();
    for (values, kind) in [(&ml.values, EdgeKind::L), (&mr.values, EdgeKind::R)] {
        edges.extend(stack_edges(values).into_iter().map(|(u, v)| Edge { u, v, kind }));
    }
    let rotation = canonical_rotation(n, &edges);
    MatedCrtMap::from_parts(n, edges, rotation, Topology::Plane)
}

/// Counterclockwise order at `x`: trivial dart to `x+1`, L-darts by ascending
/// `(y - x) mod n`, trivial dart to `x-1`, R-darts by descending `(y - x) mod n`.
pub fn canonical_rotation(n: usize, edges: &[Edge]) -> Vec<Vec<usize>> {
    let mut right = vec![None; n];
    let mut left = vec![None; n];
    let mut ls: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut rs: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let key = |x: usize, y: usize| (y + n - x) % n;
    for (e, edge) in edges.iter().enumerate() {
        let (du, dv) = (2 * e, 2 * e + 1);
        match edge.kind {
            EdgeKind::Trivial => {
                right[edge.u] = Some(du);
                left[edge.v] = Some(dv);
            }
            EdgeKind::L => {
                ls[edge.u].push((key(edge.u, edge.v), du));
                ls[edge.v].push((key(edge.v, edge.u), dv));
            }
            EdgeKind::R => {
                rs[edge.u].push((key(edge.u, edge.v), du));
                rs[edge.v].push((key(edge.v, edge.u), dv));
            }
        }
    }
    (0..n)
        .map(|x| {
            ls[x].sort_unstable();
            rs[x].sort_unstable_by(|a, b| b.cmp(a));
            let mut out = Vec::with_capacity(ls[x].len() + rs[x].len() + 2);
            out.extend(right[x]);
            out.extend(ls[x].iter().map(|&(_, d)| d));
            out.extend(left[x]);
            out.extend(rs[x].iter().map(|&(_, d)| d));
            out
        })
        .collect()
}

/// Vertex `i` is on the boundary iff `m_i <= min_{k>i} m_k`.
pub fn boundary_flags(ml: &CellMinima) -> Vec<bool> {
    let mut flags = vec![false; ml.len()];
    let mut suffix = f64::INFINITY;
    for i in (0..ml.len()).rev() {
        flags[i] = ml.values[i] <= suffix;
        suffix = suffix.min(ml.values[i]);
    }
    flags
}

pub fn boundary_vertices(ml: &CellMinima) -> Vec<usize> {
    boundary_flags(ml).into_iter().enumerate().filter_map(|(i, b)| b.then_some(i)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceSet {
    /// Dart cycles; each starts at its smallest dart.
    pub faces: Vec<Vec<usize>>,
    pub external_face: usize,
    pub perimeter: usize,
}

impl FaceSet {
    pub fn internal_faces(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.faces.iter().enumerate().filter(move |(i, _)| *i != self.external_face).map(|(_, f)| f)
    }

    /// Vertices on the external face, in face order, with repetitions removed.
    pub fn external_vertices(&self, map: &MatedCrtMap) -> Vec<usize> {
        let mut seen = vec![false; map.n()];
        let mut out = Vec::new();
        for &d in &self.faces[self.external_face] {
            let v = map.dart_tail(d);
            if !seen[v] {
                seen[v] = true;
                out.push(v);
            }
        }
        out
    }
}

pub fn enumerate_faces(map: &MatedCrtMap) -> Result<FaceSet> {
    let n_darts = 2 * map.n_edges();
    if n_darts == 0 {
        return Ok(FaceSet { faces: vec![Vec::new()], external_face: 0, perimeter: 0 });
    }
    let mut visited = vec![false; n_darts];
    let mut faces = Vec::new();
    for start in 0..n_darts {
        if visited[start] {
            continue;
        }
        let mut face = Vec::new();
        let mut d = start;
        loop {
            if visited[d] {
                return Err(Error::InconsistentRotation(format!("orbit of dart {start} revisits dart {d}")));
            }
            visited[d] = true;
            face.push(d);
            d = map.next_in_face(d);
            if d == start {
                break;
            }
        }
        faces.push(face);
    }
    let mut external_face = 0;
    for (i, f) in faces.iter().enumerate() {
        if f.len() > faces[external_face].len() {
            external_face = i;
        }
    }
    let perimeter = faces[external_face].len();
    Ok(FaceSet { faces, external_face, perimeter })
}

/// Induced submap on the inclusive vertex range `[a, b]`, relabelled to start at 0.
///
/// A vertex is on the submap boundary if it has a parent neighbour outside the
/// range or is a parent boundary vertex. When neither applies to any vertex
/// (the range is the whole unflagged map) the external face is used.
pub fn interval_submap(map: &MatedCrtMap, a: usize, b: usize) -> Result<MatedCrtMap> {
    if a > b {
        return Err(Error::EmptySet(format!("interval [{a}, {b}]")));
    }
    if b >= map.n() {
        return Err(Error::VertexOutOfRange(b));
    }
    let n = b - a + 1;
    let mut new_id = vec![usize::MAX; map.n_edges()];
    let mut edges = Vec::new();
    for (e, edge) in map.edges().iter().enumerate() {
        if edge.u >= a && edge.v <= b {
            new_id[e] = edges.len();
            edges.push(Edge { u: edge.u - a, v: edge.v - a, kind: edge.kind });
        }
    }
    let mut flags = vec![false; n];
    let rotation: Vec<Vec<usize>> = (a..=b)
        .map(|v| {
            map.rotation(v)
                .iter()
                .filter_map(|&d| {
                    let ne = new_id[d / 2];
                    if ne == usize::MAX {
                        flags[v - a] = true;
                        None
                    } else {
                        Some(2 * ne + d % 2)
                    }
                })
                .collect()
        })
        .collect();
    for (v, f) in flags.iter_mut().enumerate() {
        *f |= map.is_boundary(v + a);
    }
    let mut sub = MatedCrtMap::from_parts(n, edges, rotation, map.topology)?;
    sub.gamma = map.gamma;
    sub.seed = map.seed;
    if !flags.iter().any(|&f| f) {
        if sub.n_edges() == 0 {
            flags.iter_mut().for_each(|f| *f = true);
        } else {
            let faces = enumerate_faces(&sub)?;
            for v in faces.external_vertices(&sub) {
                flags[v] = true;
            }
        }
    }
    sub.set_boundary(flags)?;
    if let Some(r) = map.root().filter(|r| (a..=b).contains(r)) {
        sub.set_root(r - a)?;
    }
    Ok(sub)
}

/// Multiplicity of each unordered vertex pair, keyed with the smaller vertex first.
pub fn pair_multiplicities(map: &MatedCrtMap) -> HashMap<(usize, usize), usize> {
    let mut out = HashMap::new();
    for e in map.edges() {
        *out.entry((e.u, e.v)).or_insert(0) += 1;
    }
    out
}
