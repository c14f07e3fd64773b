//! Lattice Gaussian free fields on `[−1, 1]²` and their γ-LQG measures.
//!
//! The grid has `M × M` cells of side `a = 2/M`; value `(i, j)` lives at the
//! cell centre `(−1 + a(i + ½), −1 + a(j + ½))`, stored row-major by `j`.
//! Covariances are `2π·L⁻¹` for the unit-spacing graph Laplacian `L`, so the
//! field has the `log(1/|x − y|)` normalization.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Zero on the outer ring of cells; exact discrete Dirichlet GFF inside.
    ZeroBoundary,
    /// Zero-mean torus field, shifted to have zero unit-circle average.
    TorusProjected,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::ZeroBoundary => "zero",
            Boundary::TorusProjected => "torus",
        })
    }
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Boundary::ZeroBoundary),
            "torus" => Ok(Boundary::TorusProjected),
            other => Err(invalid(format!("unknown boundary condition `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GffGrid {
    pub m: usize,
    pub a: f64,
    pub values: Vec<f64>,
    pub bc: Boundary,
    pub seed: u64,
}

pub const MIN_SIDE: usize = 8;

impl GffGrid {
    /// Field identically equal to `value`.
    pub fn constant(m: usize, value: f64, bc: Boundary) -> Self {
        GffGrid { m, a: 2.0 / m as f64, values: vec![value; m * m], bc, seed: 0 }
    }

    /// Field sampled from a function of the cell centre.
    pub fn from_fn(m: usize, bc: Boundary, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut g = Self::constant(m, 0.0, bc);
        for j in 0..m {
            for i in 0..m {
                let (x, y) = g.center(i, j);
                g.values[j * m + i] = f(x, y);
            }
        }
        g
    }

    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        (-1.0 + self.a * (i as f64 + 0.5), -1.0 + self.a * (j as f64 + 0.5))
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.m + i]
    }

    /// Cell containing `(x, y)`, or `None` outside `[−1, 1)²`.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let i = ((x + 1.0) / self.a).floor();
        let j = ((y + 1.0) / self.a).floor();
        let m = self.m as f64;
        (i >= 0.0 && j >= 0.0 && i < m && j < m).then_some((i as usize, j as usize))
    }

    /// Bilinear interpolation between cell centres; clamped at the edges for
    /// zero-boundary fields, periodic for torus fields.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        let m = self.m as isize;
        let u = (x + 1.0) / self.a - 0.5;
        let v = (y + 1.0) / self.a - 0.5;
        let (i0, j0) = (u.floor(), v.floor());
        let (fx, fy) = (u - i0, v - j0);
        let (i0, j0) = (i0 as isize, j0 as isize);
        let idx = |i: isize, j: isize| -> f64 {
            let (i, j) = match self.bc {
                Boundary::ZeroBoundary => (i.clamp(0, m - 1), j.clamp(0, m - 1)),
                Boundary::TorusProjected => (i.rem_euclid(m), j.rem_euclid(m)),
            };
            self.values[(j * m + i) as usize]
        };
        (1.0 - fx) * (1.0 - fy) * idx(i0, j0)
            + fx * (1.0 - fy) * idx(i0 + 1, j0)
            + (1.0 - fx) * fy * idx(i0, j0 + 1)
            + fx * fy * idx(i0 + 1, j0 + 1)
    }

    /// Mean of the interpolated field at `⌈2πr/a⌉` equally spaced points of the circle.
    pub fn circle_mean_unchecked(&self, x: f64, y: f64, r: f64) -> f64 {
        let k = ((2.0 * PI * r / self.a).ceil() as usize).max(1);
        let step = 2.0 * PI / k as f64;
        (0..k)
            .map(|t| {
                let th = t as f64 * step;
                self.interpolate(x + r * th.cos(), y + r * th.sin())
            })
            .sum::<f64>()
            / k as f64
    }

    pub fn write_binary<W: Write>(&self, w: W, gamma: Option<f64>, eps_c: Option<f64>) -> Result<()> {
        write_grid(w, "MCRTFIELD", self.m, self.a, self.bc, gamma, eps_c, self.seed, &self.values)
    }

    pub fn read_binary<R: BufRead>(r: R) -> Result<Self> {
        let (header, values) = read_grid(r, "MCRTFIELD")?;
        Ok(GffGrid { m: header.m, a: header.a, values, bc: header.bc, seed: header.seed })
    }
}

#[allow(clippy::too_many_arguments)]
fn write_grid<W: Write>(
    mut w: W,
    magic: &str,
    m: usize,
    a: f64,
    bc: Boundary,
    gamma: Option<f64>,
    eps_c: Option<f64>,
    seed: u64,
    values: &[f64],
) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| x.to_string());
    writeln!(w, "{magic}")?;
    writeln!(w, "M {m}")?;
    writeln!(w, "a {a}")?;
    writeln!(w, "bc {bc}")?;
    writeln!(w, "gamma {}", opt(gamma))?;
    writeln!(w, "eps_c {}", opt(eps_c))?;
    writeln!(w, "seed {seed}")?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

struct GridHeader {
    m: usize,
    a: f64,
    bc: Boundary,
    gamma: Option<f64>,
    eps_c: Option<f64>,
    seed: u64,
}

fn read_grid<R: BufRead>(mut r: R, magic: &str) -> Result<(GridHeader, Vec<f64>)> {
    let mut lines = Vec::with_capacity(7);
    for _ in 0..7 {
        let mut line = String::new();
        r.read_line(&mut line)?;
        lines.push(line.trim_end().to_string());
    }
    if lines[0] != magic {
        return Err(Error::Parse { line: 1, msg: "bad magic".into() });
    }
    let field = |i: usize, key: &str| -> Result<&str> {
        lines[i]
            .strip_prefix(key)
            .and_then(|s| s.strip_prefix(' '))
            .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected `{key}`") })
    };
    let bad = |i: usize| Error::Parse { line: i + 1, msg: "bad value".into() };
    let opt = |i: usize, key: &str| -> Result<Option<f64>> {
        match field(i, key)? {
            "-" => Ok(None),
            s => s.parse().map(Some).map_err(|_| bad(i)),
        }
    };
    let header = GridHeader {
        m: field(1, "M")?.parse().map_err(|_| bad(1))?,
        a: field(2, "a")?.parse().map_err(|_| bad(2))?,
        bc: field(3, "bc")?.parse()?,
        gamma: opt(4, "gamma")?,
        eps_c: opt(5, "eps_c")?,
        seed: field(6, "seed")?.parse().map_err(|_| bad(6))?,
    };
    let mut buf = vec![0u8; 8 * header.m * header.m];
    r.read_exact(&mut buf)?;
    let values = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    Ok((header, values))
}

/// DST-I of every row of a `rows × n` block in place: `S_k = Σ_j x_j sin(πjk/(n+1))`.
fn dst1_rows(data: &mut [f64], n: usize, planner: &mut FftPlanner<f64>) {
    let len = 2 * (n + 1);
    let fft = planner.plan_fft_forward(len);
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for row in data.chunks_exact_mut(n) {
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (j, &x) in row.iter().enumerate() {
            buf[j + 1] = Complex64::new(x, 0.0);
            buf[len - 1 - j] = Complex64::new(-x, 0.0);
        }
        fft.process(&mut buf);
        for (k, out) in row.iter_mut().enumerate() {
            *out = -buf[k + 1].im / 2.0;
        }
    }
}

fn transpose(data: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            out[i * n + j] = data[j * n + i];
        }
    }
    out
}

pub fn sample_gff(m: usize, bc: Boundary, seed: u64) -> Result<GffGrid> {
    if m < MIN_SIDE {
        return Err(invalid(format!("grid side must be at least {MIN_SIDE}")));
    }
    let mut rng = stream(seed, "field/gff", 0);
    let mut grid = GffGrid::constant(m, 0.0, bc);
    grid.seed = seed;
    let mut planner = FftPlanner::new();
    match bc {
        Boundary::ZeroBoundary => {
            let n = m - 2;
            let h = PI / (n + 1) as f64;
            let eig: Vec<f64> = (1..=n).map(|k| 2.0 - 2.0 * (h * k as f64).cos()).collect();
            // Orthonormal sine basis: coefficient of mode (p, q) is
            // sqrt(2π/λ)·ξ, and each 1-D basis vector carries sqrt(2/(n+1)).
            let norm = 2.0 / (n + 1) as f64;
            let mut coef = vec![0.0; n * n];
            for q in 0..n {
                for p in 0..n {
                    let z: f64 = rng.sample(StandardNormal);
                    coef[q * n + p] = norm * (2.0 * PI / (eig[p] + eig[q])).sqrt() * z;
                }
            }
            dst1_rows(&mut coef, n, &mut planner);
            let mut t = transpose(&coef, n);
            dst1_rows(&mut t, n, &mut planner);
            let inner = transpose(&t, n);
            for j in 0..n {
                for i in 0..n {
                    grid.values[(j + 1) * m + i + 1] = inner[j * n + i];
                }
            }
        }
        Boundary::TorusProjected => {
            let fft = planner.plan_fft_inverse(m);
            let h = 2.0 * PI / m as f64;
            let mut spec = vec![Complex64::new(0.0, 0.0); m * m];
            for q in 0..m {
                for p in 0..m {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    if p == 0 && q == 0 {
                        continue;
                    }
                    let lambda = 4.0 - 2.0 * (h * p as f64).cos() - 2.0 * (h * q as f64).cos();
                    spec[q * m + p] = Complex64::new(re, im) * (2.0 * PI / lambda).sqrt();
                }
            }
            for row in spec.chunks_exact_mut(m) {
                fft.process(row);
            }
            let mut cols = vec![Complex64::new(0.0, 0.0); m * m];
            for q in 0..m {
                for p in 0..m {
                    cols[p * m + q] = spec[q * m + p];
                }
            }
            for col in cols.chunks_exact_mut(m) {
                fft.process(col);
            }
            for p in 0..m {
                for q in 0..m {
                    grid.values[q * m + p] = cols[p * m + q].re / m as f64;
                }
            }
            let shift = grid.circle_mean_unchecked(0.0, 0.0, 1.0);
            grid.values.iter_mut().for_each(|v| *v -= shift);
        }
    }
    Ok(grid)
}

/// Adds `γ·log(1/|z|)` at cell centres, with `|z|` floored at `a/2`.
pub fn add_cone_singularity(field: &GffGrid, gamma: f64) -> Result<GffGrid> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(invalid("gamma must lie in (0, 2)"));
    }
    let mut out = field.clone();
    let floor = field.a / 2.0;
    for j in 0..field.m {
        for i in 0..field.m {
            let (x, y) = field.center(i, j);
            out.values[j * field.m + i] += gamma * (1.0 / x.hypot(y).max(floor)).ln();
        }
    }
    Ok(out)
}

/// Circle average `h_r(z)`; the circle must lie in the grid square and `r ≥ 2a`.
pub fn circle_average(field: &GffGrid, z: (f64, f64), r: f64) -> Result<f64> {
    let reach = z.0.abs().max(z.1.abs()) + r;
    if r < 2.0 * field.a * (1.0 - 1e-12) || reach > 1.0 + 1e-12 {
        return Err(Error::CircleOutsideGrid { x: z.0, y: z.1, r });
    }
    Ok(field.circle_mean_unchecked(z.0, z.1, r))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqgMeasure {
    pub m: usize,
    pub a: f64,
    pub masses: Vec<f64>,
    pub gamma: f64,
    pub eps_c: f64,
    pub bc: Boundary,
    pub seed: u64,
}

impl LqgMeasure {
    /// Lebesgue measure on the grid.
    pub fn lebesgue(m: usize) -> Self {
        let a = 2.0 / m as f64;
        LqgMeasure { m, a, masses: vec![a * a; m * m], gamma: 0.0, eps_c: 0.0, bc: Boundary::ZeroBoundary, seed: 0 }
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.masses.iter_mut().for_each(|m| *m *= factor);
        out
    }

    /// Piecewise-constant density `mass / a²` of the cell containing `(x, y)`; zero outside.
    pub fn density_at(&self, x: f64, y: f64) -> f64 {
        let i = ((x + 1.0) / self.a).floor();
        let j = ((y + 1.0) / self.a).floor();
        let m = self.m as f64;
        if i < 0.0 || j < 0.0 || i >= m || j >= m {
            return 0.0;
        }
        self.masses[j as usize * self.m + i as usize] / (self.a * self.a)
    }

    /// `μ(B_δ(z))`; cells cut by the circle are resolved on an 8×8 sub-grid.
    pub fn ball_mass(&self, z: (f64, f64), delta: f64) -> f64 {
        ball_mass_rows(self, None, z, delta)
    }

    /// Per-row prefix sums of the masses (`m + 1` entries per row).
    pub fn row_prefix(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.m * (self.m + 1));
        for row in self.masses.chunks_exact(self.m) {
            let mut acc = 0.0;
            out.push(0.0);
            for v in row {
                acc += v;
                out.push(acc);
            }
        }
        out
    }

    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        write_grid(
            w,
            "MCRTMEASURE",
            self.m,
            self.a,
            self.bc,
            Some(self.gamma),
            Some(self.eps_c),
            self.seed,
            &self.masses,
        )
    }

    pub fn read_binary<R: BufRead>(r: R) -> Result<Self> {
        let (h, masses) = read_grid(r, "MCRTMEASURE")?;
        Ok(LqgMeasure {
            m: h.m,
            a: h.a,
            masses,
            gamma: h.gamma.unwrap_or(0.0),
            eps_c: h.eps_c.unwrap_or(0.0),
            bc: h.bc,
            seed: h.seed,
        })
    }
}

/// `μ(B_δ(z))` row by row: cells whose square lies inside the disk are summed
/// whole (through `prefix` when given), cells cut by the circle are resolved
/// on an 8×8 sub-grid.
fn ball_mass_rows(mu: &LqgMeasure, prefix: Option<&[f64]>, z: (f64, f64), delta: f64) -> f64 {
    const SUB: usize = 8;
    let a = mu.a;
    let m = mu.m;
    let col = |x: f64| ((x + 1.0) / a).clamp(0.0, m as f64);
    let lo_j = col(z.1 - delta).floor() as usize;
    let hi_j = col(z.1 + delta).ceil() as usize;
    let mut total = 0.0;
    for j in lo_j..hi_j {
        let (y0, y1) = (-1.0 + a * j as f64, -1.0 + a * (j + 1) as f64);
        let near = if z.1 < y0 {
            y0 - z.1
        } else if z.1 > y1 {
            z.1 - y1
        } else {
            0.0
        };
        let far = (y0 - z.1).abs().max((y1 - z.1).abs());
        if near >= delta {
            continue;
        }
        let w_out = (delta * delta - near * near).sqrt();
        let w_in = if far < delta { (delta * delta - far * far).sqrt() } else { 0.0 };
        let touch_lo = col(z.0 - w_out).floor() as usize;
        let touch_hi = col(z.0 + w_out).ceil() as usize;
        let mut full_lo = col(z.0 - w_in).ceil() as usize;
        let mut full_hi = col(z.0 + w_in).floor() as usize;
        if full_lo >= full_hi {
            full_lo = touch_lo;
            full_hi = touch_lo;
        }
        let row = j * m;
        total += match prefix {
            Some(p) => p[j * (m + 1) + full_hi] - p[j * (m + 1) + full_lo],
            None => mu.masses[row + full_lo..row + full_hi].iter().sum(),
        };
        for i in (touch_lo..full_lo).chain(full_hi.max(touch_lo)..touch_hi) {
            let (x0, y0c) = (-1.0 + a * i as f64, y0);
            let mut inside = 0;
            for sj in 0..SUB {
                for si in 0..SUB {
                    let px = x0 + a * (si as f64 + 0.5) / SUB as f64;
                    let py = y0c + a * (sj as f64 + 0.5) / SUB as f64;
                    if (px - z.0).hypot(py - z.1) < delta {
                        inside += 1;
                    }
                }
            }
            total += mu.masses[row + i] * inside as f64 / (SUB * SUB) as f64;
        }
    }
    total
}

/// Cell mass `a²·ε_c^{γ²/2}·exp(γ·h_{ε_c}(centre))`.
pub fn build_lqg_measure(field: &GffGrid, gamma: f64, eps_c: f64) -> Result<LqgMeasure> {
    if !(gamma >= 0.0 && gamma < 2.0) {
        return Err(invalid("gamma must lie in [0, 2)"));
    }
    if eps_c < 2.0 * field.a * (1.0 - 1e-12) {
        return Err(invalid("regularization radius must be at least two cells"));
    }
    let prefactor = field.a * field.a * eps_c.powf(gamma * gamma / 2.0);
    let mut masses = Vec::with_capacity(field.m * field.m);
    for j in 0..field.m {
        for i in 0..field.m {
            let (x, y) = field.center(i, j);
            masses.push(prefactor * (gamma * field.circle_mean_unchecked(x, y, eps_c)).exp());
        }
    }
    Ok(LqgMeasure { m: field.m, a: field.a, masses, gamma, eps_c, bc: field.bc, seed: field.seed })
}

/// Ordinary least-squares slope and intercept.
pub fn ls_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallMassScan {
    pub deltas: Vec<f64>,
    pub min_mass: Vec<f64>,
    pub max_mass: Vec<f64>,
    pub min_exponent: f64,
    pub max_exponent: f64,
}

/// Extremes of `μ(B_δ(z))` over `centers` for each `δ`, with log-log slopes.
pub fn ball_mass_scan(measure: &LqgMeasure, centers: &[(f64, f64)], deltas: &[f64]) -> Result<BallMassScan> {
    if centers.is_empty() || deltas.len() < 2 {
        return Err(invalid("need at least one centre and two radii"));
    }
    for &(x, y) in centers {
        for &d in deltas {
            if x.abs().max(y.abs()) + d > 1.0 + 1e-12 {
                return Err(Error::CircleOutsideGrid { x, y, r: d });
            }
        }
    }
    let prefix = measure.row_prefix();
    let mut min_mass = Vec::with_capacity(deltas.len());
    let mut max_mass = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let masses: Vec<f64> = centers.iter().map(|&z| ball_mass_rows(measure, Some(&prefix), z, d)).collect();
        min_mass.push(masses.iter().copied().fold(f64::INFINITY, f64::min));
        max_mass.push(masses.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    let ld: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let lmin: Vec<f64> = min_mass.iter().map(|m| m.ln()).collect();
    let lmax: Vec<f64> = max_mass.iter().map(|m| m.ln()).collect();
    Ok(BallMassScan {
        deltas: deltas.to_vec(),
        min_exponent: ls_slope(&ld, &lmin).0,
        max_exponent: ls_slope(&ld, &lmax).0,
        min_mass,
        max_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dst_matches_direct_sum() {
        let n = 7;
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() + 0.1 * i as f64).collect();
        let mut y = x.clone();
        dst1_rows(&mut y, n, &mut FftPlanner::new());
        for k in 1..=n {
            let direct: f64 = (1..=n).map(|j| x[j - 1] * (PI * (j * k) as f64 / (n + 1) as f64).sin()).sum();
            assert!((direct - y[k - 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_boundary_ring_vanishes() {
        let g = sample_gff(32, Boundary::ZeroBoundary, 1).unwrap();
        for k in 0..32 {
            assert_eq!(g.at(k, 0), 0.0);
            assert_eq!(g.at(k, 31), 0.0);
            assert_eq!(g.at(0, k), 0.0);
            assert_eq!(g.at(31, k), 0.0);
        }
        assert!(g.values.iter().all(|v| v.is_finite()));
        assert_eq!(g, sample_gff(32, Boundary::ZeroBoundary, 1).unwrap());
        assert!(sample_gff(4, Boundary::ZeroBoundary, 1).is_err());
    }

    #[test]
    fn torus_field_is_recentred() {
        let g = sample_gff(64, Boundary::TorusProjected, 5).unwrap();
        assert!(g.circle_mean_unchecked(0.0, 0.0, 1.0).abs() < 1e-12);
        assert!(circle_average(&g, (0.0, 0.0), 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn singularity_values() {
        let zero = GffGrid::constant(64, 0.0, Boundary::ZeroBoundary);
        let s = add_cone_singularity(&zero, 1.5).unwrap();
        let (x, y) = s.center(40, 37);
        assert!((s.at(40, 37) - 1.5 * (1.0 / x.hypot(y)).ln()).abs() < 1e-12);
        // Radially decreasing along the diagonal.
        let diag: Vec<f64> = (32..64).map(|k| s.at(k, k)).collect();
        assert!(diag.windows(2).all(|w| w[0] > w[1]));
        let f = GffGrid::from_fn(512, Boundary::ZeroBoundary, |x, y| (1.0 / x.hypot(y)).ln());
        assert!((f.interpolate(1.0 / std::f64::consts::E, 0.0) - 1.0).abs() < 1e-2);
    }

    #[test]
    fn circle_average_examples() {
        let c = GffGrid::constant(64, 2.5, Boundary::ZeroBoundary);
        assert!((circle_average(&c, (0.1, -0.2), 0.3).unwrap() - 2.5).abs() < 1e-12);
        let affine = GffGrid::from_fn(64, Boundary::ZeroBoundary, |x, y| 1.0 + 2.0 * x - 3.0 * y);
        let v = circle_average(&affine, (0.2, 0.1), 0.4).unwrap();
        assert!((v - (1.0 + 0.4 - 0.3)).abs() < 1e-12);
        let g = 1.0;
        let log = GffGrid::from_fn(512, Boundary::ZeroBoundary, |x, y| g * (1.0 / x.hypot(y)).ln());
        for r in [0.05, 0.2, 0.5] {
            let v = circle_average(&log, (0.0, 0.0), r).unwrap();
            assert!((v - g * (1.0 / r).ln()).abs() <= 1e-3, "r = {r}: {v}");
        }
        assert!(circle_average(&c, (0.9, 0.0), 0.2).is_err());
        assert!(circle_average(&c, (0.0, 0.0), c.a).is_err());
    }

    #[test]
    fn measure_examples() {
        let zero = GffGrid::constant(32, 0.0, Boundary::ZeroBoundary);
        let eps = 4.0 * zero.a;
        let mu = build_lqg_measure(&zero, 1.0, eps).unwrap();
        let expect = zero.a * zero.a * eps.powf(0.5);
        assert!(mu.masses.iter().all(|m| (m - expect).abs() < 1e-15));
        let shifted = GffGrid::constant(32, 0.7, Boundary::ZeroBoundary);
        let mu2 = build_lqg_measure(&shifted, 1.0, eps).unwrap();
        for (a, b) in mu.masses.iter().zip(&mu2.masses) {
            assert!((b / a - 0.7f64.exp()).abs() < 1e-12);
        }
        assert!((mu.total() - mu.masses.iter().sum::<f64>()).abs() == 0.0);
        assert!(build_lqg_measure(&zero, 1.0, zero.a).is_err());
    }

    #[test]
    fn lebesgue_ball_exponent_is_two() {
        let leb = LqgMeasure::lebesgue(256);
        let centers = [(0.0, 0.0), (0.13, -0.2), (-0.3, 0.25)];
        let deltas = [0.05, 0.1, 0.2, 0.4];
        let scan = ball_mass_scan(&leb, &centers, &deltas).unwrap();
        assert!((scan.min_exponent - 2.0).abs() < 0.01);
        assert!((scan.max_exponent - 2.0).abs() < 0.01);
        let doubled = ball_mass_scan(&leb.scaled(2.0), &centers, &deltas).unwrap();
        assert!((doubled.min_exponent - scan.min_exponent).abs() < 1e-12);
        assert!((leb.ball_mass((0.0, 0.0), 0.5) - PI * 0.25).abs() < 1e-3);
    }

    #[test]
    fn binary_round_trip() {
        let g = sample_gff(16, Boundary::TorusProjected, 3).unwrap();
        let mut buf = Vec::new();
        g.write_binary(&mut buf, Some(1.0), None).unwrap();
        assert_eq!(GffGrid::read_binary(&buf[..]).unwrap(), g);
        let mu = build_lqg_measure(&g, 1.0, 4.0 * g.a).unwrap();
        let mut buf = Vec::new();
        mu.write_binary(&mut buf).unwrap();
        assert_eq!(LqgMeasure::read_binary(&buf[..]).unwrap(), mu);
    }

    #[test]
    fn row_ball_mass_matches_cellwise_oracle() {
        let g = sample_gff(64, Boundary::ZeroBoundary, 11).unwrap();
        let mu = build_lqg_measure(&g, 1.0, 4.0 * g.a).unwrap();
        let prefix = mu.row_prefix();
        for &(z, d) in &[((0.0, 0.0), 0.3), ((0.123, -0.31), 0.07), ((-0.5, 0.4), 0.5), ((0.01, 0.02), 0.02)] {
            let mut oracle = 0.0;
            for j in 0..mu.m {
                for i in 0..mu.m {
                    let mut inside = 0;
                    for sj in 0..8 {
                        for si in 0..8 {
                            let px = -1.0 + mu.a * (i as f64 + (si as f64 + 0.5) / 8.0);
                            let py = -1.0 + mu.a * (j as f64 + (sj as f64 + 0.5) / 8.0);
                            if (px - z.0).hypot(py - z.1) < d {
                                inside += 1;
                            }
                        }
                    }
                    oracle += mu.masses[j * mu.m + i] * inside as f64 / 64.0;
                }
            }
            let fast = ball_mass_rows(&mu, Some(&prefix), z, d);
            assert!((fast - oracle).abs() <= 1e-12 * oracle.max(1e-300), "{fast} vs {oracle}");
            assert!((mu.ball_mass(z, d) - oracle).abs() <= 1e-12 * oracle);
        }
    }
}
