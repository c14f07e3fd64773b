use crate::error::{invalid, Error, Result};
use crate::linalg::{CsrMatrix, SpdSolver};

use super::{mask_of, Network};

/// Killed Laplacian `L_S = D − A_SS` on a vertex set `S`, degrees from the full graph.
#[derive(Debug, Clone)]
pub struct KilledSystem {
    vertices: Vec<usize>,
    index: Vec<usize>,
    solver: SpdSolver,
}

impl KilledSystem {
    /// Fails with `NeverKilled` if some connected piece of `S` has no edge leaving `S`.
    pub fn new(net: &Network, vertices: &[usize]) -> Result<Self> {
        let mut index = vec![usize::MAX; net.n()];
        for (i, &v) in vertices.iter().enumerate() {
            if v >= net.n() {
                return Err(Error::VertexOutOfRange(v));
            }
            index[v] = i;
        }
        let mut leaks = vec![false; vertices.len()];
        let mut triplets = Vec::with_capacity(vertices.len() * 7);
        for (i, &u) in vertices.iter().enumerate() {
            triplets.push((i, i, net.degree(u)));
            for s in net.slots(u) {
                let j = index[s.to];
                if j == usize::MAX {
                    leaks[i] = true;
                } else {
                    triplets.push((i, j, -s.conductance));
                }
            }
        }
        // Every piece of S must leak; otherwise L_S is singular.
        let mut seen = vec![false; vertices.len()];
        for start in 0..vertices.len() {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            seen[start] = true;
            let mut leaky = false;
            while let Some(i) = stack.pop() {
                leaky |= leaks[i];
                for s in net.slots(vertices[i]) {
                    let j = index[s.to];
                    if j != usize::MAX && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            if !leaky {
                return Err(Error::NeverKilled(vertices[start]));
            }
        }
        let solver = SpdSolver::new(CsrMatrix::from_triplets(vertices.len(), triplets))?;
        Ok(KilledSystem { vertices: vertices.to_vec(), index, solver })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    /// Position of `v` in [`KilledSystem::vertices`].
    pub fn index_of(&self, v: usize) -> Option<usize> {
        self.index.get(v).copied().filter(|&i| i != usize::MAX)
    }

    /// Solves `L_S x = rhs`, both indexed like [`KilledSystem::vertices`].
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.solver.solve(rhs)
    }

    /// Solves with a unit source at `v` and scatters to a full-length vector.
    pub fn solve_point(&self, v: usize, n: usize) -> Result<Vec<f64>> {
        let i = self.index_of(v).ok_or(Error::VertexOutOfRange(v))?;
        let mut rhs = vec![0.0; self.vertices.len()];
        rhs[i] = 1.0;
        Ok(self.scatter(&self.solve(&rhs)?, n))
    }

    pub fn scatter(&self, local: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (&v, &x) in self.vertices.iter().zip(local) {
            out[v] = x;
        }
        out
    }
}

/// Green's function of the walk from `source` killed on leaving `region`.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenTable {
    pub region: Vec<usize>,
    pub source: usize,
    /// `gr(source, y)`, zero off the region.
    pub gr: Vec<f64>,
    /// Expected visits `Gr(source, y) = deg(y)·gr(source, y)`.
    pub green: Vec<f64>,
}

impl GreenTable {
    pub fn expected_exit_time(&self) -> f64 {
        self.green.iter().sum()
    }
}

/// Vertices of `region` reachable from `x` inside it, plus the killed system on them.
fn reachable_system(net: &Network, mask: &[bool], x: usize) -> Result<KilledSystem> {
    let reach = net.reachable_within(x, mask);
    KilledSystem::new(net, &reach)
}

pub fn green_function(net: &Network, region: &[usize], x: usize) -> Result<GreenTable> {
    if x >= net.n() {
        return Err(Error::VertexOutOfRange(x));
    }
    let mask = mask_of(net.n(), region)?;
    let mut sorted = region.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if !mask[x] {
        return Ok(GreenTable { region: sorted, source: x, gr: vec![0.0; net.n()], green: vec![0.0; net.n()] });
    }
    let system = reachable_system(net, &mask, x)?;
    let gr = system.solve_point(x, net.n())?;
    let green = gr.iter().enumerate().map(|(y, g)| g * net.degree(y)).collect();
    Ok(GreenTable { region: sorted, source: x, gr, green })
}

/// `E[τ_B]` from `x`, equal to `Σ_y Gr_B(x, y)`.
pub fn expected_exit_time(net: &Network, region: &[usize], x: usize) -> Result<f64> {
    Ok(green_function(net, region, x)?.expected_exit_time())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCheck {
    /// `E[τ_B^N]` from the one-step recursion.
    pub exact: f64,
    /// `N!·Σ Gr(x,y₁)Gr(y₁,y₂)⋯Gr(y_{N−1},y_N)`.
    pub bound: f64,
}

pub const MAX_MOMENT_ORDER: usize = 4;
pub const MAX_MOMENT_REGION: usize = 64;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exact `N`-th exit moment and its nested-Green's-function upper bound.
///
/// Conditioning on the first step gives
/// `L m_N = deg + A Σ_{k<N} C(N,k) m_k` on the killed set.
pub fn exit_moment_check(net: &Network, region: &[usize], x: usize, order: usize) -> Result<MomentCheck> {
    if order == 0 || order > MAX_MOMENT_ORDER {
        return Err(invalid(format!("moment order must be in 1..={MAX_MOMENT_ORDER}")));
    }
    if region.len() > MAX_MOMENT_REGION {
        return Err(invalid(format!("region larger than {MAX_MOMENT_REGION} vertices")));
    }
    let mask = mask_of(net.n(), region)?;
    if x >= net.n() {
        return Err(Error::VertexOutOfRange(x));
    }
    if !mask[x] {
        return Ok(MomentCheck { exact: 0.0, bound: 0.0 });
    }
    let system = reachable_system(net, &mask, x)?;
    let verts = system.vertices().to_vec();
    let k = verts.len();
    let deg: Vec<f64> = verts.iter().map(|&v| net.degree(v)).collect();
    let adj_mul = |w: &[f64]| -> Vec<f64> {
        verts
            .iter()
            .map(|&u| net.slots(u).iter().filter_map(|s| system.index_of(s.to).map(|j| s.conductance * w[j])).sum())
            .collect()
    };
    let mut moments: Vec<Vec<f64>> = Vec::with_capacity(order);
    for nth in 1..=order {
        let mut s = vec![0.0; k];
        for (j, m) in moments.iter().enumerate() {
            let c = binomial(nth, j + 1);
            for i in 0..k {
                s[i] += c * m[i];
            }
        }
        let a_s = adj_mul(&s);
        let rhs: Vec<f64> = (0..k).map(|i| deg[i] + a_s[i]).collect();
        moments.push(system.solve(&rhs)?);
    }
    let mut v = vec![1.0; k];
    for _ in 0..order {
        let rhs: Vec<f64> = (0..k).map(|i| deg[i] * v[i]).collect();
        v = system.solve(&rhs)?;
    }
    let factorial: f64 = (1..=order).map(|i| i as f64).product();
    let ix = system.index_of(x).expect("source is in its own reach");
    Ok(MomentCheck { exact: moments[order - 1][ix], bound: factorial * v[ix] })
}

/// Unique function equal to the given values where they are `Some` and
/// harmonic (zero weighted Laplacian) elsewhere.
pub fn harmonic_extension(net: &Network, boundary: &[Option<f64>]) -> Result<Vec<f64>> {
    if boundary.len() != net.n() {
        return Err(Error::LengthMismatch { left: boundary.len(), right: net.n() });
    }
    let interior: Vec<usize> = (0..net.n()).filter(|&v| boundary[v].is_none()).collect();
    let mut out: Vec<f64> = boundary.iter().map(|b| b.unwrap_or(0.0)).collect();
    if interior.is_empty() {
        return Ok(out);
    }
    let system = KilledSystem::new(net, &interior).map_err(|e| match e {
        Error::NeverKilled(_) => Error::EmptyBoundary,
        other => other,
    })?;
    let rhs: Vec<f64> = interior
        .iter()
        .map(|&u| net.slots(u).iter().filter_map(|s| boundary[s.to].map(|b| s.conductance * b)).sum())
        .collect();
    for (&v, x) in interior.iter().zip(system.solve(&rhs)?) {
        out[v] = x;
    }
    Ok(out)
}

/// `Σ_e c(e)·(f(u) − f(v))²` over edge records.
pub fn dirichlet_energy(f: &[f64], net: &Network) -> f64 {
    net.edges().iter().map(|&(u, v, c)| c * (f[u] - f[v]).powi(2)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Network {
        Network::new(3, vec![(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn path_examples() {
        let t = green_function(&path3(), &[0, 1], 0).unwrap();
        assert!((t.green[0] - 2.0).abs() < 1e-12);
        assert!((t.green[1] - 2.0).abs() < 1e-12);
        assert!((t.gr[0] - 2.0).abs() < 1e-12 && (t.gr[1] - 1.0).abs() < 1e-12);
        assert!((t.expected_exit_time() - 4.0).abs() < 1e-12);
        let outside = green_function(&path3(), &[0, 1], 2).unwrap();
        assert!(outside.green.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn never_killed_rejected() {
        assert!(matches!(green_function(&path3(), &[0, 1, 2], 0), Err(Error::NeverKilled(_))));
    }

    #[test]
    fn single_step_exit() {
        let star = Network::new(4, vec![(0, 1, 1.0), (0, 2, 1.0), (0, 3, 2.0)]).unwrap();
        assert!((expected_exit_time(&star, &[0], 0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn first_moment_is_green_sum() {
        let net = Network::new(5, vec![(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0), (3, 4, 1.0), (0, 2, 1.0)]).unwrap();
        let m = exit_moment_check(&net, &[0, 1, 2, 3], 1, 1).unwrap();
        let e = expected_exit_time(&net, &[0, 1, 2, 3], 1).unwrap();
        assert!((m.exact - e).abs() < 1e-10 && (m.bound - e).abs() < 1e-10);
        let m2 = exit_moment_check(&path3(), &[0, 1], 0, 2).unwrap();
        assert!(m2.exact <= m2.bound);
        assert!(exit_moment_check(&path3(), &[0, 1], 0, 5).is_err());
    }

    #[test]
    fn harmonic_examples() {
        let f = harmonic_extension(&path3(), &[Some(0.0), None, Some(1.0)]).unwrap();
        assert!((f[1] - 0.5).abs() < 1e-12);
        let c = harmonic_extension(&path3(), &[Some(3.0), None, None]).unwrap();
        assert!(c.iter().all(|&v| (v - 3.0).abs() < 1e-12));
        let lonely = Network::new(4, vec![(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert!(matches!(harmonic_extension(&lonely, &[Some(0.0), None, None, None]), Err(Error::EmptyBoundary)));
    }

    #[test]
    fn energy_examples() {
        let net = Network::new(2, vec![(0, 1, 1.0)]).unwrap();
        assert_eq!(dirichlet_energy(&[1.0, 0.0], &net), 1.0);
        assert_eq!(dirichlet_energy(&[2.0, 2.0], &net), 0.0);
    }
}
