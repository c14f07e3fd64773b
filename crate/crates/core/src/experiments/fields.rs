//! Field, measure and Liouville Brownian motion studies.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{
    add_cone_singularity, ball_mass_scan, build_lqg_measure, circle_average, sample_gff, Boundary, LqgMeasure,
};
use crate::lbm::{default_dt, estimate_m0, quantum_exit_time, M0Estimate, M0Options};
use crate::rng::{derive_seed, stream};
use crate::stats::{log_log_fit, mean, LinearFit};

/// Interior grid cells `(i, j)` of an `M × M` zero-boundary grid used as covariance probes.
pub fn probe_pairs(m: usize) -> Vec<((usize, usize), (usize, usize))> {
    let c = m / 2;
    vec![((c, c), (c, c)), ((c, c), (c + 1, c)), ((c, c), (c + 2, c + 2)), ((2, 3), (2, 3)), ((3, c), (m - 4, c))]
}

/// `2π·L⁻¹` on the interior `(M−2)²` cells, as a dense matrix indexed by `(j−1)(M−2) + (i−1)`.
pub fn dense_green(m: usize) -> Result<DMatrix<f64>> {
    let n = m - 2;
    let mut l = DMatrix::<f64>::zeros(n * n, n * n);
    for j in 0..n {
        for i in 0..n {
            let k = j * n + i;
            l[(k, k)] = 4.0;
            if i + 1 < n {
                l[(k, k + 1)] = -1.0;
                l[(k + 1, k)] = -1.0;
            }
            if j + 1 < n {
                l[(k, k + n)] = -1.0;
                l[(k + n, k)] = -1.0;
            }
        }
    }
    let inv = l.cholesky().ok_or(Error::NotPositiveDefinite)?.inverse();
    Ok(inv * (2.0 * std::f64::consts::PI))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovarianceRow {
    pub i1: usize,
    pub j1: usize,
    pub i2: usize,
    pub j2: usize,
    pub empirical: f64,
    pub std_error: f64,
    pub green: f64,
}

/// Empirical covariances of the zero-boundary sampler at the probe pairs.
pub fn covariance_check(m: usize, samples: usize, seed: u64) -> Result<Vec<CovarianceRow>> {
    let pairs = probe_pairs(m);
    let green = dense_green(m)?;
    let n = m - 2;
    let idx = |(i, j): (usize, usize)| (j - 1) * n + (i - 1);
    let draws: Vec<Vec<(f64, f64)>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let g = sample_gff(m, Boundary::ZeroBoundary, derive_seed(seed, "covariance", s as u64))?;
            Ok(pairs.iter().map(|&(p, q)| (g.at(p.0, p.1), g.at(q.0, q.1))).collect())
        })
        .collect::<Result<_>>()?;
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(k, &(p, q))| {
            let prods: Vec<f64> = draws.iter().map(|d| d[k].0 * d[k].1).collect();
            let cov = mean(&prods);
            let (sxx, syy, sxy) = (green[(idx(p), idx(p))], green[(idx(q), idx(q))], green[(idx(p), idx(q))]);
            // Var(XY) = σ_xx σ_yy + σ_xy² for a centred Gaussian pair.
            let std_error = ((sxx * syy + sxy * sxy) / samples as f64).sqrt();
            CovarianceRow { i1: p.0, j1: p.1, i2: q.0, j2: q.1, empirical: cov, std_error, green: sxy }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassExponent {
    pub deltas: Vec<f64>,
    /// `E[μ(B_δ(0))·e^{−γ h_δ(0)}]`.
    pub normalized: Vec<f64>,
    /// `E[μ(B_δ(0))]`.
    pub raw: Vec<f64>,
    pub normalized_fit: LinearFit,
    pub raw_fit: LinearFit,
}

/// Ball masses at the origin of zero-boundary fields, averaged over `samples` fields.
pub fn mass_exponent(m: usize, gamma: f64, deltas: &[f64], samples: usize, seed: u64) -> Result<MassExponent> {
    let per: Vec<Vec<(f64, f64)>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let f = sample_gff(m, Boundary::ZeroBoundary, derive_seed(seed, "gmc/mass", s as u64))?;
            let mu = build_lqg_measure(&f, gamma, 4.0 * f.a)?;
            deltas
                .iter()
                .map(|&d| {
                    let b = mu.ball_mass((0.0, 0.0), d);
                    let h = circle_average(&f, (0.0, 0.0), d)?;
                    Ok((b * (-gamma * h).exp(), b))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let col = |k: usize, pick: fn(&(f64, f64)) -> f64| per.iter().map(|v| pick(&v[k])).sum::<f64>() / samples as f64;
    let normalized: Vec<f64> = (0..deltas.len()).map(|k| col(k, |p| p.0)).collect();
    let raw: Vec<f64> = (0..deltas.len()).map(|k| col(k, |p| p.1)).collect();
    Ok(MassExponent {
        normalized_fit: log_log_fit(deltas, &normalized),
        raw_fit: log_log_fit(deltas, &raw),
        deltas: deltas.to_vec(),
        normalized,
        raw,
    })
}

/// Cone-like field on `[−1, 1]²`: recentred torus GFF plus `γ log(1/|·|)`.
pub fn cone_measure(m: usize, gamma: f64, seed: u64) -> Result<LqgMeasure> {
    let f = sample_gff(m, Boundary::TorusProjected, seed)?;
    let f = add_cone_singularity(&f, gamma)?;
    build_lqg_measure(&f, gamma, 4.0 * f.a)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeRow {
    pub field: usize,
    pub min_exponent: f64,
    pub max_exponent: f64,
}

/// Grid of ball centres in `B_ρ` with spacing `step`, avoiding the capped origin cells.
pub fn envelope_centers(rho: f64, step: f64, a: f64) -> Vec<(f64, f64)> {
    let k = (rho / step).floor() as i64;
    let mut out = Vec::new();
    for j in -k..=k {
        for i in -k..=k {
            let (x, y) = (i as f64 * step, j as f64 * step);
            let r = x.hypot(y);
            if r <= rho && r >= 2.0 * a {
                out.push((x, y));
            }
        }
    }
    out
}

/// Dyadic radii from `16a` up to `max`.
pub fn envelope_deltas(a: f64, max: f64) -> Vec<f64> {
    (0..).map(|k| 16.0 * a * 2f64.powi(k)).take_while(|&d| d <= max * (1.0 + 1e-12)).collect()
}

/// Min/max envelope exponents of `μ(B_δ(z))` over `z ∈ B_ρ`, one row per field.
pub fn ball_envelopes(m: usize, gamma: f64, fields: usize, rho: f64, step: f64, seed: u64) -> Result<Vec<EnvelopeRow>> {
    (0..fields)
        .map(|k| {
            let mu = cone_measure(m, gamma, derive_seed(seed, "gmc/envelope", k as u64))?;
            let centers = envelope_centers(rho, step, mu.a);
            let deltas = envelope_deltas(mu.a, 1.0 - rho);
            let scan = ball_mass_scan(&mu, &centers, &deltas)?;
            Ok(EnvelopeRow { field: k, min_exponent: scan.min_exponent, max_exponent: scan.max_exponent })
        })
        .collect()
}

/// Exit quantum times of Brownian motion from `B_{1/2}` against constant density,
/// i.e. plain Brownian exit times scaled by the density.
pub fn bm_exit_times(n: usize, dt: f64, seed: u64) -> Result<Vec<f64>> {
    let opts = M0Options { bootstrap: 0, ..M0Options::with_dt(dt) };
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, "bm_exit", i as u64);
            quantum_exit_time(
                &crate::lbm::ConstantDensity(1.0),
                (0.0, 0.0),
                opts.radius,
                opts.dt,
                opts.max_steps,
                &mut rng,
            )
            .ok_or(Error::InsufficientHorizon { failed: 1, total: n })
        })
        .collect()
}

/// Quenched estimates of `m₀` for `fields` cone-like measures.
pub fn quenched_m0(m: usize, gamma: f64, fields: usize, samples: usize, seed: u64) -> Result<Vec<M0Estimate>> {
    (0..fields)
        .map(|k| {
            let mu = cone_measure(m, gamma, derive_seed(seed, "lbm/field", k as u64))?;
            let opts = M0Options::with_dt(default_dt(mu.a));
            estimate_m0(&mu, samples, &opts, derive_seed(seed, "lbm/m0", k as u64))
        })
        .collect()
}
