//! Liouville Brownian motion as a time change of planar Brownian motion.
//!
//! The base path is an Euler-sampled Brownian motion with step `dt`. Its
//! clock is the left Riemann sum `φ_i = Σ_{j<i} f(B_j)·dt` of a density `f`,
//! frozen once the path leaves the density's domain.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::field::LqgMeasure;
use crate::rng::{stream, StreamRng};
use crate::stats::{bootstrap_median_ci, chi_square_two_sample, median, tv_distance};

/// Density of the Liouville clock on a bounded domain.
pub trait Density: Sync {
    fn at(&self, x: f64, y: f64) -> f64;

    fn inside(&self, x: f64, y: f64) -> bool {
        x.abs() <= 1.0 && y.abs() <= 1.0
    }
}

impl Density for LqgMeasure {
    fn at(&self, x: f64, y: f64) -> f64 {
        self.density_at(x, y)
    }

    fn inside(&self, x: f64, y: f64) -> bool {
        (-1.0..1.0).contains(&x) && (-1.0..1.0).contains(&y)
    }
}

/// Constant density on `[−1, 1]²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDensity(pub f64);

impl Density for ConstantDensity {
    fn at(&self, _: f64, _: f64) -> f64 {
        self.0
    }
}

/// Density given by a closure on `[−1, 1]²`.
pub struct FnDensity<F>(pub F);

impl<F: Fn(f64, f64) -> f64 + Sync> Density for FnDensity<F> {
    fn at(&self, x: f64, y: f64) -> f64 {
        (self.0)(x, y)
    }
}

/// Density scaled by a constant factor.
pub struct Scaled<'a, D: ?Sized>(pub &'a D, pub f64);

impl<D: Density + ?Sized> Density for Scaled<'_, D> {
    fn at(&self, x: f64, y: f64) -> f64 {
        self.1 * self.0.at(x, y)
    }

    fn inside(&self, x: f64, y: f64) -> bool {
        self.0.inside(x, y)
    }
}

/// Default Brownian step for grid spacing `a`.
pub fn default_dt(a: f64) -> f64 {
    a * a / 4.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub dt: f64,
    pub positions: Vec<(f64, f64)>,
}

impl BrownianPath {
    pub fn sample(start: (f64, f64), dt: f64, steps: usize, rng: &mut StreamRng) -> Self {
        let sd = dt.sqrt();
        let mut positions = Vec::with_capacity(steps + 1);
        let mut p = start;
        positions.push(p);
        for _ in 0..steps {
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            p = (p.0 + sd * dx, p.1 + sd * dy);
            positions.push(p);
        }
        BrownianPath { dt, positions }
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }
}

/// Clock values at every knot; nondecreasing, with `φ_0 = 0`.
pub fn liouville_clock<D: Density + ?Sized>(path: &BrownianPath, density: &D) -> Vec<f64> {
    let mut clock = Vec::with_capacity(path.positions.len());
    clock.push(0.0);
    let mut acc = 0.0;
    let mut alive = true;
    if let Some(&(x, y)) = path.positions.first() {
        if !density.inside(x, y) {
            log::warn!("Brownian path starts outside the density domain; clock is zero");
            alive = false;
        }
    }
    for &(x, y) in path.positions.iter().take(path.positions.len().saturating_sub(1)) {
        if alive && !density.inside(x, y) {
            alive = false;
        }
        if alive {
            acc += density.at(x, y) * path.dt;
        }
        clock.push(acc);
    }
    clock
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbmPath {
    pub base: BrownianPath,
    pub clock: Vec<f64>,
    /// Time-change constant.
    pub c: f64,
    /// Global rescaling constant.
    pub m0: f64,
}

impl LbmPath {
    pub fn new<D: Density + ?Sized>(base: BrownianPath, density: &D, c: f64, m0: f64) -> Self {
        let clock = liouville_clock(&base, density);
        LbmPath { base, clock, c, m0 }
    }

    /// Largest quantum time covered by the simulation.
    pub fn horizon(&self) -> f64 {
        self.clock.last().copied().unwrap_or(0.0) / (self.m0 * self.c)
    }

    /// CSV trace with columns `t_quantum, x, y` at the clock knots.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t_quantum", "x", "y"])?;
        for (phi, &(x, y)) in self.clock.iter().zip(&self.base.positions) {
            out.write_record(&[(phi / (self.m0 * self.c)).to_string(), x.to_string(), y.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Base position at `φ^{-1}(t·m₀·c)`, interpolated linearly between clock knots.
pub fn time_change(lbm: &LbmPath, t: f64) -> Result<(f64, f64)> {
    let target = t * lbm.m0 * lbm.c;
    let last = *lbm.clock.last().ok_or_else(|| invalid("empty path"))?;
    // relative slack absorbs rounding in `φ / (m₀c) · m₀c`
    if !(t >= 0.0) || target > last * (1.0 + 1e-12) {
        return Err(Error::BeyondHorizon(t));
    }
    let target = target.min(last);
    let k = lbm.clock.partition_point(|&v| v < target);
    let pos = &lbm.base.positions;
    if k == 0 {
        return Ok(pos[0]);
    }
    let (c0, c1) = (lbm.clock[k - 1], lbm.clock[k]);
    let w = if c1 > c0 { (target - c0) / (c1 - c0) } else { 1.0 };
    let (a, b) = (pos[k - 1], pos[k]);
    Ok((a.0 + w * (b.0 - a.0), a.1 + w * (b.1 - a.1)))
}

/// Clock value when the Brownian motion from `start` first sits at distance
/// `≥ radius` from the origin at a knot, or `None` past `max_steps`.
pub fn quantum_exit_time<D: Density + ?Sized>(
    density: &D,
    start: (f64, f64),
    radius: f64,
    dt: f64,
    max_steps: usize,
    rng: &mut StreamRng,
) -> Option<f64> {
    let sd = dt.sqrt();
    let r2 = radius * radius;
    let (mut x, mut y) = start;
    let mut clock = 0.0;
    for _ in 0..=max_steps {
        if x * x + y * y >= r2 {
            return Some(clock);
        }
        clock += density.at(x, y) * dt;
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        x += sd * dx;
        y += sd * dy;
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct M0Estimate {
    pub median: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub samples: usize,
    pub failed: usize,
    #[serde(skip)]
    pub exit_times: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct M0Options {
    pub dt: f64,
    pub radius: f64,
    pub max_steps: usize,
    /// Largest tolerated fraction of paths that never exit.
    pub max_failed_fraction: f64,
    pub bootstrap: usize,
}

impl M0Options {
    pub fn with_dt(dt: f64) -> Self {
        let max_steps = (50.0 / dt).ceil() as usize;
        M0Options { dt, radius: 0.5, max_steps, max_failed_fraction: 0.01, bootstrap: 200 }
    }
}

/// Quenched median of the quantum exit time from `B_{radius}` for paths started at 0.
pub fn estimate_m0<D: Density + ?Sized>(
    density: &D,
    n_samples: usize,
    opts: &M0Options,
    seed: u64,
) -> Result<M0Estimate> {
    if n_samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let results: Vec<Option<f64>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, "lbm/m0", i as u64);
            quantum_exit_time(density, (0.0, 0.0), opts.radius, opts.dt, opts.max_steps, &mut rng)
        })
        .collect();
    let exit_times: Vec<f64> = results.iter().flatten().copied().collect();
    let failed = n_samples - exit_times.len();
    if exit_times.is_empty() || failed as f64 > opts.max_failed_fraction * n_samples as f64 {
        return Err(Error::InsufficientHorizon { failed, total: n_samples });
    }
    let med = median(&exit_times);
    let (ci_lo, ci_hi) = if opts.bootstrap > 0 {
        bootstrap_median_ci(&exit_times, opts.bootstrap, &mut stream(seed, "lbm/m0/bootstrap", 0))
    } else {
        (med, med)
    };
    Ok(M0Estimate { median: med, ci_lo, ci_hi, samples: n_samples, failed, exit_times })
}

/// Annealed median: the median of the pooled exit times of several fields.
pub fn annealed_m0(estimates: &[M0Estimate]) -> f64 {
    let pooled: Vec<f64> = estimates.iter().flat_map(|e| e.exit_times.iter().copied()).collect();
    median(&pooled)
}

/// Sixteen equal-area bins of `B_ρ`: four annuli at radii `ρ√(k/4)` times four quadrants.
pub fn polar_bin(x: f64, y: f64, rho: f64) -> Option<usize> {
    let r2 = (x * x + y * y) / (rho * rho);
    if r2 >= 1.0 {
        return None;
    }
    let ring = ((r2 * 4.0).floor() as usize).min(3);
    let angle = y.atan2(x).rem_euclid(2.0 * PI);
    let quadrant = ((angle / (PI / 2.0)).floor() as usize).min(3);
    Some(ring * 4 + quadrant)
}

/// Sixteen square bins of the torus `[−1, 1)²`.
pub fn torus_bin(x: f64, y: f64) -> usize {
    let i = (((x + 1.0) * 2.0).floor() as usize).min(3);
    let j = (((y + 1.0) * 2.0).floor() as usize).min(3);
    j * 4 + i
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceRecord {
    pub t: f64,
    pub n: usize,
    pub survivors: usize,
    pub tv: f64,
    pub chi_square: f64,
    pub p_value: f64,
    pub start_hist: Vec<u64>,
    pub end_hist: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvarianceOptions {
    pub rho: f64,
    pub dt: f64,
    pub max_steps: usize,
}

/// Position where the clock first reaches `t_quantum`, or `None` when the
/// path leaves `B_ρ` first (checked at knots).
fn run_to_quantum_time<D: Density + ?Sized>(
    density: &D,
    start: (f64, f64),
    t_quantum: f64,
    opts: &InvarianceOptions,
    rng: &mut StreamRng,
) -> Option<(f64, f64)> {
    let sd = opts.dt.sqrt();
    let r2 = opts.rho * opts.rho;
    let (mut x, mut y) = start;
    let mut clock = 0.0;
    for _ in 0..opts.max_steps {
        if clock >= t_quantum {
            return Some((x, y));
        }
        clock += density.at(x, y) * opts.dt;
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        x += sd * dx;
        y += sd * dy;
        if x * x + y * y >= r2 {
            return None;
        }
    }
    None
}

/// Start points drawn from the normalized measure restricted to cells with centre in `B_ρ`.
fn sample_starts(measure: &LqgMeasure, rho: f64, n: usize, rng: &mut StreamRng) -> Result<Vec<(f64, f64)>> {
    let a = measure.a;
    let mut cells = Vec::new();
    let mut cdf = Vec::new();
    let mut acc = 0.0;
    for j in 0..measure.m {
        for i in 0..measure.m {
            let (cx, cy) = (-1.0 + a * (i as f64 + 0.5), -1.0 + a * (j as f64 + 0.5));
            if cx.hypot(cy) + a < rho {
                acc += measure.masses[j * measure.m + i];
                cells.push((cx, cy));
                cdf.push(acc);
            }
        }
    }
    if cells.is_empty() || acc <= 0.0 {
        return Err(Error::EmptySet("cells inside B_rho".into()));
    }
    Ok((0..n)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            let k = cdf.partition_point(|&c| c <= u).min(cells.len() - 1);
            let (cx, cy) = cells[k];
            (cx + a * (rng.random::<f64>() - 0.5), cy + a * (rng.random::<f64>() - 0.5))
        })
        .collect())
}

/// Reversibility check of the killed process on `B_ρ`.
///
/// Under a reversible law, surviving paths have the same start and end
/// distributions: both equal the measure reweighted by survival probability.
/// The record compares the two binned histograms of survivors.
pub fn invariance_test(
    measure: &LqgMeasure,
    t: f64,
    n: usize,
    opts: &InvarianceOptions,
    seed: u64,
) -> Result<InvarianceRecord> {
    if !(t >= 0.0) {
        return Err(invalid("quantum time must be nonnegative"));
    }
    let starts = sample_starts(measure, opts.rho, n, &mut stream(seed, "lbm/invariance/starts", 0))?;
    let ends: Vec<Option<(f64, f64)>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, &z)| {
            let mut rng = stream(seed, "lbm/invariance/path", i as u64);
            run_to_quantum_time(measure, z, t, opts, &mut rng)
        })
        .collect();
    let mut start_hist = vec![0u64; 16];
    let mut end_hist = vec![0u64; 16];
    let mut survivors = 0;
    for (s, e) in starts.iter().zip(&ends) {
        if let Some(e) = e {
            let (Some(bs), Some(be)) = (polar_bin(s.0, s.1, opts.rho), polar_bin(e.0, e.1, opts.rho)) else {
                continue;
            };
            survivors += 1;
            start_hist[bs] += 1;
            end_hist[be] += 1;
        }
    }
    if survivors < 100 {
        return Err(Error::TooFewSurvivors(survivors));
    }
    let (chi_square, p_value) = chi_square_two_sample(&start_hist, &end_hist);
    Ok(InvarianceRecord {
        t,
        n,
        survivors,
        tv: tv_distance(&start_hist, &end_hist),
        chi_square,
        p_value,
        start_hist,
        end_hist,
    })
}

/// Torus variant with constant density: uniform starts, Brownian motion run
/// for time `t / density` with wrap-around; end histogram against the exact
/// uniform law on sixteen square bins.
pub fn torus_invariance_test(density: f64, t: f64, n: usize, dt: f64, seed: u64) -> Result<InvarianceRecord> {
    if !(density > 0.0) || !(t >= 0.0) {
        return Err(invalid("density must be positive and time nonnegative"));
    }
    let euclid = t / density;
    let steps = (euclid / dt).ceil() as usize;
    let sd = if steps > 0 { (euclid / steps as f64).sqrt() } else { 0.0 };
    let wrap = |v: f64| (v + 1.0).rem_euclid(2.0) - 1.0;
    let ends: Vec<((f64, f64), (f64, f64))> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, "lbm/torus", i as u64);
            let start = (rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0);
            let (mut x, mut y) = start;
            for _ in 0..steps {
                let dx: f64 = rng.sample(StandardNormal);
                let dy: f64 = rng.sample(StandardNormal);
                x = wrap(x + sd * dx);
                y = wrap(y + sd * dy);
            }
            (start, (x, y))
        })
        .collect();
    let mut start_hist = vec![0u64; 16];
    let mut end_hist = vec![0u64; 16];
    for (s, e) in &ends {
        start_hist[torus_bin(s.0, s.1)] += 1;
        end_hist[torus_bin(e.0, e.1)] += 1;
    }
    let (chi_square, p_value) = crate::stats::chi_square_gof(&end_hist, &[1.0 / 16.0; 16]);
    let tv = 0.5 * end_hist.iter().map(|&c| (c as f64 / n as f64 - 1.0 / 16.0).abs()).sum::<f64>();
    let tv = if t == 0.0 { tv_distance(&start_hist, &end_hist) } else { tv };
    Ok(InvarianceRecord { t, n, survivors: n, tv, chi_square, p_value, start_hist, end_hist })
}
