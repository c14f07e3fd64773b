//! Correlated Brownian pairs `(L, R)` driving the mated-CRT map.
//!
//! Paths live on a uniform grid with `substeps` points per cell. The
//! whole-plane variant is an unconditioned correlated walk started at the
//! origin; the disk variant is a discretized quadrant excursion from `(0, 0)`
//! to `(1, 0)` over unit time.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{stream, StreamRng};

pub const DEFAULT_SUBSTEPS: usize = 16;
const PATH_MAGIC: &str = "MCRTPATH";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Plane,
    Disk,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topology::Plane => f.write_str("plane"),
            Topology::Disk => f.write_str("disk"),
        }
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plane" => Ok(Topology::Plane),
            "disk" => Ok(Topology::Disk),
            other => Err(invalid(format!("unknown topology `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coord {
    L,
    R,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathParams {
    pub gamma: f64,
    pub n_cells: usize,
    pub substeps: usize,
    pub seed: u64,
    pub topology: Topology,
    /// Cell duration for whole-plane paths. Disk paths always use `1 / n_cells`.
    pub cell_duration: f64,
}

impl PathParams {
    pub fn plane(gamma: f64, n_cells: usize, seed: u64) -> Self {
        PathParams { gamma, n_cells, substeps: DEFAULT_SUBSTEPS, seed, topology: Topology::Plane, cell_duration: 1.0 }
    }

    pub fn disk(gamma: f64, n_cells: usize, seed: u64) -> Self {
        PathParams { topology: Topology::Disk, ..Self::plane(gamma, n_cells, seed) }
    }

    pub fn with_substeps(mut self, substeps: usize) -> Self {
        self.substeps = substeps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        correlation_of(self.gamma)?;
        if self.n_cells == 0 {
            return Err(invalid("n_cells must be positive"));
        }
        if self.substeps == 0 {
            return Err(invalid("substeps must be positive"));
        }
        if self.topology == Topology::Plane && !(self.cell_duration > 0.0) {
            return Err(invalid("cell duration must be positive"));
        }
        Ok(())
    }

    /// Cell duration ε.
    pub fn epsilon(&self) -> f64 {
        match self.topology {
            Topology::Plane => self.cell_duration,
            Topology::Disk => 1.0 / self.n_cells as f64,
        }
    }

    pub fn dt(&self) -> f64 {
        self.epsilon() / self.substeps as f64
    }

    pub fn grid_len(&self) -> usize {
        self.n_cells * self.substeps + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatedPath {
    pub dt: f64,
    pub l: Vec<f64>,
    pub r: Vec<f64>,
    pub gamma: f64,
    pub topology: Topology,
    pub n_cells: usize,
    pub substeps: usize,
    pub seed: u64,
}

impl CorrelatedPath {
    pub fn len(&self) -> usize {
        self.l.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l.is_empty()
    }

    pub fn coord(&self, coord: Coord) -> &[f64] {
        match coord {
            Coord::L => &self.l,
            Coord::R => &self.r,
        }
    }

    /// Writes the 8-line text header followed by `L` then `R` as little-endian f64.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{PATH_MAGIC}")?;
        writeln!(w, "version 1")?;
        writeln!(w, "gamma {}", self.gamma)?;
        writeln!(w, "dt {}", self.dt)?;
        writeln!(w, "n_cells {}", self.n_cells)?;
        writeln!(w, "substeps {}", self.substeps)?;
        writeln!(w, "topology {}", self.topology)?;
        writeln!(w, "seed {}", self.seed)?;
        for v in self.l.iter().chain(&self.r) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: BufRead>(mut r: R) -> Result<Self> {
        let mut fields = Vec::with_capacity(8);
        for line_no in 1..=8 {
            let mut line = String::new();
            r.read_line(&mut line)?;
            fields.push((line_no, line.trim_end().to_string()));
        }
        if fields[0].1 != PATH_MAGIC {
            return Err(Error::Parse { line: 1, msg: "bad magic".into() });
        }
        let value = |idx: usize, key: &str| -> Result<String> {
            let (line, text) = &fields[idx];
            text.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| Error::Parse { line: *line, msg: format!("expected `{key}`") })
        };
        fn parse_err<E>(line: usize) -> impl Fn(E) -> Error {
            move |_| Error::Parse { line, msg: "bad number".into() }
        }
        if value(1, "version")? != "1" {
            return Err(Error::Parse { line: 2, msg: "unsupported version".into() });
        }
        let gamma: f64 = value(2, "gamma")?.parse().map_err(parse_err(3))?;
        let dt: f64 = value(3, "dt")?.parse().map_err(parse_err(4))?;
        let n_cells: usize = value(4, "n_cells")?.parse().map_err(parse_err(5))?;
        let substeps: usize = value(5, "substeps")?.parse().map_err(parse_err(6))?;
        let topology: Topology = value(6, "topology")?.parse()?;
        let seed: u64 = value(7, "seed")?.parse().map_err(parse_err(8))?;
        let len = n_cells * substeps + 1;
        let mut buf = vec![0u8; 16 * len];
        r.read_exact(&mut buf)?;
        let floats: Vec<f64> =
            buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        let (l, rr) = floats.split_at(len);
        Ok(CorrelatedPath { dt, l: l.to_vec(), r: rr.to_vec(), gamma, topology, n_cells, substeps, seed })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "L", "R"])?;
        for (i, (l, r)) in self.l.iter().zip(&self.r).enumerate() {
            out.write_record(&[(i as f64 * self.dt).to_string(), l.to_string(), r.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellMinima {
    pub values: Vec<f64>,
    pub coord: Coord,
}

impl CellMinima {
    pub fn new(values: Vec<f64>, coord: Coord) -> Self {
        CellMinima { values, coord }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Correlation `-cos(πγ²/4)` of the two coordinates.
pub fn correlation_of(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(invalid(format!("gamma must lie in (0, 2), got {gamma}")));
    }
    Ok(-(PI * gamma * gamma / 4.0).cos())
}

#[inline]
fn correlated_increment(rng: &mut StreamRng, sd: f64, rho: f64, rho_c: f64) -> (f64, f64) {
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    (sd * z1, sd * (rho * z1 + rho_c * z2))
}

pub fn sample_plane(params: &PathParams) -> Result<CorrelatedPath> {
    params.validate()?;
    if params.topology != Topology::Plane {
        return Err(invalid("sample_plane needs plane topology"));
    }
    let rho = correlation_of(params.gamma)?;
    let rho_c = (1.0 - rho * rho).sqrt();
    let dt = params.dt();
    let sd = dt.sqrt();
    let len = params.grid_len();
    let mut rng = stream(params.seed, "brownian/plane", 0);
    let mut l = Vec::with_capacity(len);
    let mut r = Vec::with_capacity(len);
    let (mut x, mut y) = (0.0, 0.0);
    l.push(x);
    r.push(y);
    for _ in 1..len {
        let (dx, dy) = correlated_increment(&mut rng, sd, rho, rho_c);
        x += dx;
        y += dy;
        l.push(x);
        r.push(y);
    }
    Ok(CorrelatedPath {
        dt,
        l,
        r,
        gamma: params.gamma,
        topology: Topology::Plane,
        n_cells: params.n_cells,
        substeps: params.substeps,
        seed: params.seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExcursionMethod {
    /// Resample whole bridges until one stays in the quadrant.
    Rejection { max_attempts: u64 },
    /// Multiscale local bridge resampling; one sweep is one window proposal.
    /// `None` runs the default of `50 · n_cells` sweeps.
    LocalResample { sweeps: Option<usize> },
}

impl ExcursionMethod {
    pub fn rejection() -> Self {
        ExcursionMethod::Rejection { max_attempts: 10_000_000 }
    }

    pub fn local() -> Self {
        ExcursionMethod::LocalResample { sweeps: None }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExcursionReport {
    /// Whole-bridge attempts (rejection sampler).
    pub attempts: u64,
    /// Window proposals (local sampler).
    pub proposals: u64,
    pub accepted: u64,
}

impl ExcursionReport {
    pub fn acceptance_rate(&self) -> f64 {
        let tried = self.attempts.max(self.proposals);
        if tried == 0 {
            0.0
        } else {
            self.accepted as f64 / tried as f64
        }
    }
}

/// Scratch space for one bridge proposal over `len` steps.
struct BridgeScratch {
    l: Vec<f64>,
    r: Vec<f64>,
}

impl BridgeScratch {
    fn new(cap: usize) -> Self {
        BridgeScratch { l: Vec::with_capacity(cap + 1), r: Vec::with_capacity(cap + 1) }
    }

    /// Fills a correlated bridge with `len` steps from `from` to `to`.
    /// Returns false as soon as an interior point leaves the quadrant.
    #[allow(clippy::too_many_arguments)]
    fn propose(
        &mut self,
        rng: &mut StreamRng,
        len: usize,
        from: (f64, f64),
        to: (f64, f64),
        sd: f64,
        rho: f64,
        rho_c: f64,
    ) -> bool {
        self.l.clear();
        self.r.clear();
        let (mut x, mut y) = (0.0, 0.0);
        self.l.push(0.0);
        self.r.push(0.0);
        for _ in 0..len {
            let (dx, dy) = correlated_increment(rng, sd, rho, rho_c);
            x += dx;
            y += dy;
            self.l.push(x);
            self.r.push(y);
        }
        let (gap_l, gap_r) = (x - (to.0 - from.0), y - (to.1 - from.1));
        let inv = 1.0 / len as f64;
        for k in 0..=len {
            let s = k as f64 * inv;
            self.l[k] = from.0 + self.l[k] - s * gap_l;
            self.r[k] = from.1 + self.r[k] - s * gap_r;
        }
        self.l[len] = to.0;
        self.r[len] = to.1;
        self.l[1..len].iter().all(|&v| v >= 0.0) && self.r[1..len].iter().all(|&v| v >= 0.0)
    }
}

/// Discretized quadrant excursion from `(0, 0)` to `(1, 0)` over unit time.
pub fn sample_disk_excursion(
    params: &PathParams,
    method: ExcursionMethod,
) -> Result<(CorrelatedPath, ExcursionReport)> {
    params.validate()?;
    if params.topology != Topology::Disk {
        return Err(invalid("sample_disk_excursion needs disk topology"));
    }
    let rho = correlation_of(params.gamma)?;
    let rho_c = (1.0 - rho * rho).sqrt();
    let dt = params.dt();
    let sd = dt.sqrt();
    let steps = params.grid_len() - 1;
    let mut report = ExcursionReport::default();
    let (l, r) = match method {
        ExcursionMethod::Rejection { max_attempts } => {
            let mut rng = stream(params.seed, "brownian/disk-rejection", 0);
            let mut scratch = BridgeScratch::new(steps);
            loop {
                if report.attempts >= max_attempts {
                    return Err(Error::RejectionBudgetExhausted { attempts: report.attempts });
                }
                report.attempts += 1;
                if scratch.propose(&mut rng, steps, (0.0, 0.0), (1.0, 0.0), sd, rho, rho_c) {
                    report.accepted = 1;
                    break (scratch.l, scratch.r);
                }
            }
        }
        ExcursionMethod::LocalResample { sweeps } => {
            let sweeps = sweeps.unwrap_or(50 * params.n_cells);
            let mut rng = stream(params.seed, "brownian/disk-local", 0);
            let (mut l, mut r) = seed_excursion(steps, sd, &mut rng);
            let mut scratch = BridgeScratch::new(steps);
            for _ in 0..sweeps {
                // Window lengths have P(len >= w) ~ 2/w, so every scale gets
                // proposals while the mean cost stays logarithmic in the path length.
                let u: f64 = 1.0 - rng.random::<f64>();
                let len = ((2.0 / u).ceil() as usize).clamp(2, steps.max(2)).min(steps);
                if len < 2 {
                    break;
                }
                let start = rng.random_range(0..=steps - len);
                let end = start + len;
                report.proposals += 1;
                if scratch.propose(&mut rng, len, (l[start], r[start]), (l[end], r[end]), sd, rho, rho_c) {
                    report.accepted += 1;
                    l[start + 1..end].copy_from_slice(&scratch.l[1..len]);
                    r[start + 1..end].copy_from_slice(&scratch.r[1..len]);
                }
            }
            (l, r)
        }
    };
    Ok((
        CorrelatedPath {
            dt,
            l,
            r,
            gamma: params.gamma,
            topology: Topology::Disk,
            n_cells: params.n_cells,
            substeps: params.substeps,
            seed: params.seed,
        },
        report,
    ))
}

/// Deterministic feasible profile plus floored noise; the starting state of
/// the local sampler.
fn seed_excursion(steps: usize, sd: f64, rng: &mut StreamRng) -> (Vec<f64>, Vec<f64>) {
    let mut l = vec![0.0; steps + 1];
    let mut r = vec![0.0; steps + 1];
    for k in 1..steps {
        let t = k as f64 / steps as f64;
        let bump = (t * (1.0 - t)).sqrt();
        let nl: f64 = rng.sample(StandardNormal);
        let nr: f64 = rng.sample(StandardNormal);
        l[k] = (t + bump + 0.5 * sd * nl).max(0.5 * (t + bump));
        r[k] = (bump + 0.5 * sd * nr).max(0.5 * bump);
    }
    l[steps] = 1.0;
    r[steps] = 0.0;
    (l, r)
}

/// Per-cell minima of one coordinate. Cell `i` (0-based) covers grid indices
/// `[i·K, (i+1)·K]`; neighbouring cells share their common endpoint.
pub fn cell_minima(path: &CorrelatedPath, coord: Coord) -> Result<CellMinima> {
    let values = path.coord(coord);
    if values.len() != path.n_cells * path.substeps + 1 {
        return Err(Error::LengthMismatch { left: values.len(), right: path.n_cells * path.substeps + 1 });
    }
    Ok(CellMinima::new(window_minima(values, path.n_cells, path.substeps)?, coord))
}

/// Cell minima of a raw grid function with `n_cells · substeps + 1` points.
pub fn window_minima(values: &[f64], n_cells: usize, substeps: usize) -> Result<Vec<f64>> {
    if substeps == 0 || values.len() != n_cells * substeps + 1 {
        return Err(Error::LengthMismatch { left: values.len(), right: n_cells * substeps + 1 });
    }
    Ok((0..n_cells)
        .map(|i| values[i * substeps..=(i + 1) * substeps].iter().copied().fold(f64::INFINITY, f64::min))
        .collect())
}
