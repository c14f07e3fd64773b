//! Random walks on Tutte-embedded disk maps and the scans built on them.
//!
//! Geometric vertex sets are taken through embedded positions: `V(B_r(z))`
//! is the set of vertices whose embedded position lies in `B_r(z)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::brownian::{sample_disk_excursion, ExcursionMethod, PathParams};
use crate::electrical::{effective_resistance, green_function, Network};
use crate::error::{Error, Result};
use crate::map::MatedCrtMap;
use crate::rng::{derive_seed, stream, StreamRng};
use crate::stats::{ks_one_sample, linear_fit, median, LinearFit};
use crate::tutte::{pick_root, tutte_embed, TutteEmbedding};

/// A disk map with its walk network and Tutte embedding from an interior root.
#[derive(Debug, Clone)]
pub struct EmbeddedMap {
    pub map: MatedCrtMap,
    pub net: Network,
    pub embedding: TutteEmbedding,
}

impl EmbeddedMap {
    pub fn pos(&self, v: usize) -> Complex64 {
        self.embedding.positions[v]
    }

    pub fn root(&self) -> usize {
        self.embedding.root
    }

    /// Vertices with embedded position in the open ball `B_r(z)`.
    pub fn ball(&self, z: Complex64, r: f64) -> Vec<usize> {
        (0..self.net.n()).filter(|&v| (self.pos(v) - z).norm() < r).collect()
    }

    /// Vertex whose embedded position is nearest to `z`.
    pub fn nearest(&self, z: Complex64) -> usize {
        (0..self.net.n())
            .min_by(|&a, &b| (self.pos(a) - z).norm().total_cmp(&(self.pos(b) - z).norm()))
            .expect("nonempty map")
    }
}

pub const ROOT_RETRIES: usize = 64;

/// Samples a disk map and embeds it from a uniform root, resampling the root
/// until it is interior with embedded position in `B_{1/4}`.
pub fn sample_embedded_map(gamma: f64, n_cells: usize, substeps: usize, seed: u64) -> Result<EmbeddedMap> {
    let params = PathParams::disk(gamma, n_cells, seed).with_substeps(substeps);
    let (path, _) = sample_disk_excursion(&params, ExcursionMethod::local())?;
    let mut map = MatedCrtMap::from_path(&path)?;
    let net = Network::from_map(&map);
    let mut rng = stream(seed, "walk/root", 0);
    for _ in 0..ROOT_RETRIES {
        let root = pick_root(&map, &mut rng);
        if map.is_boundary(root) {
            continue;
        }
        let embedding = tutte_embed(&map, root)?;
        if embedding.positions[root].norm() < 0.25 {
            map.set_root(root)?;
            return Ok(EmbeddedMap { map, net, embedding });
        }
    }
    Err(Error::RetryBudgetExhausted(format!("no interior root embedded in B_1/4 after {ROOT_RETRIES} draws")))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    Steps(usize),
    /// First vertex at embedded distance `≥ r` from `z`.
    ExitBall {
        z: Complex64,
        r: f64,
    },
    HitBoundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkTrace {
    pub vertices: Vec<usize>,
    pub points: Vec<Complex64>,
    /// Unit step times, possibly rescaled.
    pub times: Vec<f64>,
    /// The stop rule was not met within the step budget.
    pub truncated: bool,
}

impl WalkTrace {
    pub fn steps(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn rescale(&mut self, factor: f64) {
        self.times.iter_mut().for_each(|t| *t /= factor);
    }
}

/// Conductance-weighted walk; multi-edges count with multiplicity.
pub fn run_walk(
    net: &Network,
    positions: &[Complex64],
    boundary: Option<&[bool]>,
    start: usize,
    stop: StopRule,
    max_steps: usize,
    rng: &mut StreamRng,
) -> Result<WalkTrace> {
    if start >= net.n() {
        return Err(Error::VertexOutOfRange(start));
    }
    let done = |v: usize, k: usize| match stop {
        StopRule::Steps(n) => k >= n,
        StopRule::ExitBall { z, r } => (positions[v] - z).norm() >= r,
        StopRule::HitBoundary => boundary.is_some_and(|b| b[v]),
    };
    if stop == StopRule::HitBoundary && !boundary.is_some_and(|b| b.iter().any(|&x| x)) {
        return Err(Error::EmptyBoundary);
    }
    let mut vertices = vec![start];
    let mut v = start;
    let mut truncated = false;
    while !done(v, vertices.len() - 1) {
        if vertices.len() > max_steps || net.degree(v) == 0.0 {
            truncated = true;
            break;
        }
        v = net.step(v, rng).to;
        vertices.push(v);
    }
    let points = vertices.iter().map(|&u| positions[u]).collect();
    let times = (0..vertices.len()).map(|k| k as f64).collect();
    Ok(WalkTrace { vertices, points, times, truncated })
}

/// Steps until the walk from `start` first sits at embedded distance `≥ r` from `z`.
pub fn exit_steps(
    em: &EmbeddedMap,
    start: usize,
    z: Complex64,
    r: f64,
    max_steps: usize,
    rng: &mut StreamRng,
) -> Option<usize> {
    let mut v = start;
    for k in 0..=max_steps {
        if (em.pos(v) - z).norm() >= r {
            return Some(k);
        }
        v = em.net.step(v, rng).to;
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MEps {
    pub n_cells: usize,
    pub median: f64,
    pub per_map_median: Vec<f64>,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

/// Annealed median over `maps × walks` of the steps for the walk from the root
/// to leave the embedded `B_{1/2}` around the root's position.
pub fn estimate_m_eps(
    gamma: f64,
    n_cells: usize,
    substeps: usize,
    maps: usize,
    walks: usize,
    seed: u64,
) -> Result<MEps> {
    let per_map: Vec<Vec<f64>> = (0..maps)
        .map(|k| {
            let map_seed = derive_seed(seed, "m_eps/map", k as u64);
            let em = sample_embedded_map(gamma, n_cells, substeps, map_seed)?;
            let z = em.pos(em.root());
            let budget = 1000 * n_cells.max(100);
            (0..walks)
                .into_par_iter()
                .map(|w| {
                    let mut rng = stream(map_seed, "m_eps/walk", w as u64);
                    exit_steps(&em, em.root(), z, 0.5, budget, &mut rng)
                        .map(|s| s as f64)
                        .ok_or_else(|| Error::RetryBudgetExhausted("walk did not leave B_1/2".into()))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let samples: Vec<f64> = per_map.iter().flatten().copied().collect();
    Ok(MEps { n_cells, median: median(&samples), per_map_median: per_map.iter().map(|s| median(s)).collect(), samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnnulusRow {
    pub s: f64,
    pub r: f64,
    pub resistance: f64,
    pub inner: usize,
    pub outer: usize,
}

/// `R(V(B_s(z)) ↔ {v : |pos(v) − z| ≥ r})` for each `(s, r)`.
pub fn annulus_resistance_scan(em: &EmbeddedMap, z: Complex64, radii: &[(f64, f64)]) -> Result<Vec<AnnulusRow>> {
    radii
        .iter()
        .map(|&(s, r)| {
            let inner = em.ball(z, s);
            let outer: Vec<usize> = (0..em.net.n()).filter(|&v| (em.pos(v) - z).norm() >= r).collect();
            if inner.is_empty() || outer.is_empty() {
                return Err(Error::EmptySet(format!("annulus vertex sets for s = {s}, r = {r}")));
            }
            let resistance = if s >= r { 0.0 } else { effective_resistance(&em.net, &inner, &outer)? };
            Ok(AnnulusRow { s, r, resistance, inner: inner.len(), outer: outer.len() })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreenScan {
    /// `(|pos(y) − pos(x)|, gr_B(x, y))` over the inner third of the ball.
    pub pairs: Vec<(f64, f64)>,
    /// Log-binned means `(log(1/d), mean gr)` used by the fit.
    pub binned: Vec<(f64, f64)>,
    pub fit: LinearFit,
    pub gr_at_x: f64,
    pub gr_max: f64,
    pub gr_min: f64,
}

/// Green's function of the walk from `x` killed on leaving `V(B_r(pos(x)))`,
/// regressed against `log(1/distance)` over one decade `[r/30, r/3]`.
pub fn green_log_scan(em: &EmbeddedMap, x: usize, r: f64) -> Result<GreenScan> {
    let z = em.pos(x);
    let region = em.ball(z, r);
    let table = green_function(&em.net, &region, x)?;
    let mut pairs = Vec::new();
    for &y in &region {
        let d = (em.pos(y) - z).norm();
        if y != x && d <= r / 3.0 {
            pairs.push((d, table.gr[y]));
        }
    }
    let (lo, hi) = ((r / 30.0).ln(), (r / 3.0).ln());
    const BINS: usize = 10;
    let mut sums = [(0.0f64, 0usize); BINS];
    for &(d, g) in &pairs {
        if d < r / 30.0 {
            continue;
        }
        let b = (((d.ln() - lo) / (hi - lo) * BINS as f64) as usize).min(BINS - 1);
        sums[b].0 += g;
        sums[b].1 += 1;
    }
    let binned: Vec<(f64, f64)> = sums
        .iter()
        .enumerate()
        .filter(|(_, s)| s.1 > 0)
        .map(|(b, s)| {
            let centre = lo + (b as f64 + 0.5) / BINS as f64 * (hi - lo);
            (-centre, s.0 / s.1 as f64)
        })
        .collect();
    if binned.len() < 3 {
        return Err(Error::EmptySet("distance bins of the Green's function scan".into()));
    }
    let (bx, by): (Vec<f64>, Vec<f64>) = binned.iter().copied().unzip();
    let in_region = region.iter().map(|&v| table.gr[v]);
    Ok(GreenScan {
        fit: linear_fit(&bx, &by),
        gr_at_x: table.gr[x],
        gr_max: in_region.clone().fold(f64::NEG_INFINITY, f64::max),
        gr_min: in_region.fold(f64::INFINITY, f64::min),
        pairs,
        binned,
    })
}

/// `max/min` of `gr_{B_r(z)}(x_z, ·)` over the inner boundary of `V(B_s(z))`,
/// where `x_z` is the vertex embedded nearest to `z`.
pub fn harnack_ratio(em: &EmbeddedMap, z: Complex64, s: f64, r: f64) -> Result<f64> {
    if 3.0 * s > r {
        return Err(Error::InvalidParameter("Harnack ratio needs 3s ≤ r".into()));
    }
    let x = em.nearest(z);
    let region = em.ball(z, r);
    let table = green_function(&em.net, &region, x)?;
    let inside = |v: usize| (em.pos(v) - z).norm() < s;
    let circle: Vec<usize> =
        (0..em.net.n()).filter(|&v| inside(v) && em.net.slots(v).iter().any(|sl| !inside(sl.to))).collect();
    if circle.is_empty() {
        return Err(Error::EmptySet("circle vertex set".into()));
    }
    let vals = circle.iter().map(|&v| table.gr[v]);
    let max = vals.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.fold(f64::INFINITY, f64::min);
    Ok(max / min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitRow {
    pub r: f64,
    pub mean: f64,
    pub median: f64,
    pub second_moment: f64,
    pub moment_ratio: f64,
    /// Vertices embedded in the concentric ball of radius `fraction · r`.
    pub cell_count: usize,
    pub truncated: usize,
}

/// Exit step statistics from embedded balls around `x`.
pub fn exit_time_scan(
    em: &EmbeddedMap,
    x: usize,
    radii: &[f64],
    fraction: f64,
    replicates: usize,
    seed: u64,
) -> Result<Vec<ExitRow>> {
    let z = em.pos(x);
    let budget = 1000 * em.net.n().max(100);
    radii
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let runs: Vec<Option<usize>> = (0..replicates)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream(seed, "exit_time", (k * replicates + i) as u64);
                    exit_steps(em, x, z, r, budget, &mut rng)
                })
                .collect();
            let t: Vec<f64> = runs.iter().flatten().map(|&s| s as f64).collect();
            if t.is_empty() {
                return Err(Error::RetryBudgetExhausted("no walk left the ball".into()));
            }
            let mean = crate::stats::mean(&t);
            let second = t.iter().map(|v| v * v).sum::<f64>() / t.len() as f64;
            Ok(ExitRow {
                r,
                mean,
                median: median(&t),
                second_moment: second,
                moment_ratio: second / (mean * mean),
                cell_count: em.ball(z, fraction * r).len(),
                truncated: replicates - t.len(),
            })
        })
        .collect()
}

/// Walk from the root until it leaves `B_ρ`, with time rescaled by `m_eps`.
pub fn rescaled_trace(em: &EmbeddedMap, rho: f64, m_eps: f64, rng: &mut StreamRng) -> Result<WalkTrace> {
    let mut t = run_walk(
        &em.net,
        &em.embedding.positions,
        None,
        em.root(),
        StopRule::ExitBall { z: Complex64::new(0.0, 0.0), r: rho },
        1000 * em.net.n().max(100),
        rng,
    )?;
    t.rescale(m_eps);
    Ok(t)
}

/// Largest displacement of the linearly interpolated trace over time windows of length `w`.
pub fn max_window_displacement(trace: &WalkTrace, w: f64) -> f64 {
    let p = &trace.points;
    let t = &trace.times;
    let n = p.len();
    if n < 2 {
        return 0.0;
    }
    let at = |s: f64| -> Complex64 {
        let k = t.partition_point(|&u| u <= s).clamp(1, n - 1);
        let (t0, t1) = (t[k - 1], t[k]);
        let f = if t1 > t0 { ((s - t0) / (t1 - t0)).clamp(0.0, 1.0) } else { 1.0 };
        p[k - 1] + (p[k] - p[k - 1]) * f
    };
    let mut best = 0.0f64;
    let mut j = 0;
    for i in 0..n {
        // Window [t_i, t_i + w]: knots inside, plus the interpolated endpoint.
        while j + 1 < n && t[j + 1] <= t[i] + w {
            j += 1;
        }
        for k in i..=j {
            best = best.max((p[k] - p[i]).norm());
        }
        if t[i] + w < t[n - 1] {
            best = best.max((at(t[i] + w) - p[i]).norm());
        }
        // Windows ending at a knot and starting between knots.
        if t[i] >= w {
            best = best.max((p[i] - at(t[i] - w)).norm());
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModulusRow {
    pub delta: f64,
    pub window: f64,
    pub max_displacement: f64,
    pub violations: usize,
    pub traces: usize,
    pub frequency: f64,
}

/// For each `δ`: traces whose displacement over some window of rescaled length `δ^χ` exceeds `2δ`.
pub fn modulus_statistic(traces: &[WalkTrace], deltas: &[f64], chi: f64) -> Vec<ModulusRow> {
    deltas
        .iter()
        .map(|&delta| {
            let window = delta.powf(chi);
            let disp: Vec<f64> = traces.iter().map(|t| max_window_displacement(t, window)).collect();
            let violations = disp.iter().filter(|&&d| d > 2.0 * delta).count();
            ModulusRow {
                delta,
                window,
                max_displacement: disp.iter().copied().fold(0.0, f64::max),
                violations,
                traces: traces.len(),
                frequency: if traces.is_empty() { 0.0 } else { violations as f64 / traces.len() as f64 },
            }
        })
        .collect()
}

/// Exponent `2(2+γ)/(2−γ) + 1/2` used by the modulus statistic.
pub fn modulus_exponent(gamma: f64) -> f64 {
    2.0 * (2.0 + gamma) / (2.0 - gamma) + 0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallKs {
    pub start: usize,
    pub radius: f64,
    pub ks: f64,
    pub walks: usize,
}

/// KS distance between exit angles from `B_r(pos(x))` and the uniform law.
pub fn bm_comparison(em: &EmbeddedMap, starts: &[usize], radius: f64, walks: usize, seed: u64) -> Result<Vec<BallKs>> {
    let budget = 1000 * em.net.n().max(100);
    starts
        .iter()
        .map(|&x| {
            let z = em.pos(x);
            let angles: Vec<f64> = (0..walks)
                .into_par_iter()
                .filter_map(|w| {
                    let mut rng = stream(seed, "bm_comparison", ((x as u64) << 20) + w as u64);
                    let mut v = x;
                    for _ in 0..budget {
                        if (em.pos(v) - z).norm() >= radius {
                            let d = em.pos(v) - z;
                            return Some(d.im.atan2(d.re).rem_euclid(std::f64::consts::TAU));
                        }
                        v = em.net.step(v, &mut rng).to;
                    }
                    None
                })
                .collect();
            if angles.is_empty() {
                return Err(Error::RetryBudgetExhausted("no walk left the ball".into()));
            }
            let ks = ks_one_sample(&angles, |a| a / std::f64::consts::TAU);
            Ok(BallKs { start: x, radius, ks, walks: angles.len() })
        })
        .collect()
}
