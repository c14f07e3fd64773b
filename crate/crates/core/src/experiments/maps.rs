//! Degree, perimeter and record-count statistics of mated-CRT maps.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::brownian::{sample_plane, PathParams};
use crate::error::{Error, Result};
use crate::map::{enumerate_faces, interval_submap, MatedCrtMap};
use crate::rng::{derive_seed, stream};
use crate::stats::{log_log_fit, mean, LinearFit};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeStats {
    pub bulk: usize,
    pub mean_bulk_degree: f64,
    pub max_degree: usize,
    /// `histogram[d]` counts bulk vertices of degree `d`.
    pub histogram: Vec<usize>,
}

/// Degrees of vertices at index distance `≥ margin` from both ends; the
/// maximum is taken over the whole map.
pub fn degree_statistics(map: &MatedCrtMap, margin: usize) -> Result<DegreeStats> {
    let n = map.n();
    if 2 * margin >= n {
        return Err(Error::EmptySet("bulk vertices".into()));
    }
    let bulk: Vec<usize> = (margin..n - margin).map(|v| map.degree(v)).collect();
    let max_degree = (0..n).map(|v| map.degree(v)).max().unwrap_or(0);
    let mut histogram = vec![0; bulk.iter().copied().max().unwrap_or(0) + 1];
    for &d in &bulk {
        histogram[d] += 1;
    }
    Ok(DegreeStats {
        bulk: bulk.len(),
        mean_bulk_degree: bulk.iter().sum::<usize>() as f64 / bulk.len() as f64,
        max_degree,
        histogram,
    })
}

/// Whole-plane map on `n_cells` cells of unit duration.
pub fn plane_map(gamma: f64, n_cells: usize, substeps: usize, seed: u64) -> Result<MatedCrtMap> {
    let path = sample_plane(&PathParams::plane(gamma, n_cells, seed).with_substeps(substeps))?;
    MatedCrtMap::from_path(&path)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerimeterRow {
    pub n: usize,
    pub mean_perimeter: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerimeterScan {
    pub rows: Vec<PerimeterRow>,
    pub fit: LinearFit,
}

/// External-face degree of the interval submap on the middle `n` vertices of
/// a whole-plane map with `2n` cells.
pub fn submap_perimeter(gamma: f64, n: usize, substeps: usize, seed: u64) -> Result<usize> {
    let map = plane_map(gamma, 2 * n, substeps, seed)?;
    let a = n / 2;
    let sub = interval_submap(&map, a, a + n - 1)?;
    Ok(enumerate_faces(&sub)?.perimeter)
}

pub fn perimeter_scan(
    gamma: f64,
    sizes: &[usize],
    replicates: usize,
    substeps: usize,
    seed: u64,
) -> Result<PerimeterScan> {
    let rows = sizes
        .iter()
        .map(|&n| {
            let per: Vec<f64> = (0..replicates)
                .into_par_iter()
                .map(|k| {
                    submap_perimeter(gamma, n, substeps, derive_seed(seed, "perimeter", (n as u64) << 20 | k as u64))
                        .map(|p| p as f64)
                })
                .collect::<Result<_>>()?;
            Ok(PerimeterRow { n, mean_perimeter: mean(&per), replicates })
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.mean_perimeter).collect();
    Ok(PerimeterScan { fit: log_log_fit(&x, &y), rows })
}

/// Number of unit intervals `[k−1, k]`, `1 ≤ k ≤ n`, containing a running
/// minimum of a standard linear Brownian motion, sampled with `substeps`
/// points per interval.
pub fn record_interval_count(n: usize, substeps: usize, seed: u64) -> usize {
    let mut rng = stream(seed, "k_n", 0);
    let sd = (1.0 / substeps as f64).sqrt();
    let (mut b, mut running_min) = (0.0f64, 0.0f64);
    let mut count = 0;
    for _ in 0..n {
        let mut hit = false;
        for _ in 0..substeps {
            let z: f64 = rng.sample(StandardNormal);
            b += sd * z;
            if b <= running_min {
                running_min = b;
                hit = true;
            }
        }
        count += usize::from(hit);
    }
    count
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordRow {
    pub n: usize,
    pub mean_count: f64,
    pub replicates: usize,
}

pub fn record_count_scan(
    sizes: &[usize],
    replicates: usize,
    substeps: usize,
    seed: u64,
) -> (Vec<RecordRow>, LinearFit) {
    let rows: Vec<RecordRow> = sizes
        .iter()
        .map(|&n| {
            let counts: Vec<f64> = (0..replicates)
                .into_par_iter()
                .map(|k| {
                    record_interval_count(n, substeps, derive_seed(seed, "k_n", (n as u64) << 20 | k as u64)) as f64
                })
                .collect();
            RecordRow { n, mean_count: mean(&counts), replicates }
        })
        .collect();
    let x: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.mean_count).collect();
    let fit = log_log_fit(&x, &y);
    (rows, fit)
}
