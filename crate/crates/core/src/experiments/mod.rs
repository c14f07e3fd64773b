//! Scaling studies on mated-CRT maps, lattice fields and Liouville Brownian motion.
//!
//! Each experiment is a pure function of its [`ExperimentConfig`]: it writes
//! one table per file (CSV or JSON), an SVG plot per scan and a JSON run
//! manifest into the configured output directory.

mod config;
pub mod fields;
pub mod maps;
mod output;
pub mod walk;

pub use config::ExperimentConfig;
pub use output::{cell, svg_plot, Format, Manifest, Series, Table};

use std::fs;
use std::time::Instant;

use rand::Rng;
use serde_json::json;

use crate::error::{invalid, Result};
use crate::lbm::{
    annealed_m0, default_dt, estimate_m0, invariance_test, torus_invariance_test, BrownianPath, ConstantDensity,
    InvarianceOptions, LbmPath, M0Options,
};
use crate::rng::{derive_seed, stream};
use crate::stats::{ks_two_sample, ks_two_sample_p, linear_fit, log_log_fit, median, quantile_sorted, LinearFit};

/// Registry entry with the default parameters of an experiment.
#[derive(Debug, Clone, Copy)]
pub struct ExperimentSpec {
    pub name: &'static str,
    pub description: &'static str,
    pub gammas: &'static [f64],
    pub sizes: &'static [usize],
    pub replicates: usize,
    pub walks: usize,
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

pub const EXPERIMENTS: &[ExperimentSpec] = &[
    ExperimentSpec {
        name: "degree",
        description: "bulk mean degree at the largest size; max-degree growth over sizes",
        gammas: &[0.5, SQRT2, 1.7],
        sizes: &[1 << 10, 1 << 11, 1 << 12, 1 << 13, 1 << 14, 1 << 15, 1 << 16, 100_000],
        replicates: 4,
        walks: 0,
    },
    ExperimentSpec {
        name: "perimeter",
        description: "interval-submap perimeters and Brownian record-interval counts",
        gammas: &[1.0],
        sizes: &[1 << 8, 1 << 9, 1 << 10, 1 << 11, 1 << 12, 1 << 13, 1 << 14],
        replicates: 32,
        walks: 100,
    },
    ExperimentSpec {
        name: "m_eps",
        description: "median exit steps of the embedded walk from B_1/2",
        gammas: &[1.0],
        sizes: &[1 << 10, 1 << 11, 1 << 12, 1 << 13],
        replicates: 12,
        walks: 50,
    },
    ExperimentSpec {
        name: "resistance",
        description: "annulus effective resistance against log(r/s)",
        gammas: &[1.0],
        sizes: &[1 << 14],
        replicates: 4,
        walks: 0,
    },
    ExperimentSpec {
        name: "green",
        description: "Green's function log fit and Harnack ratios",
        gammas: &[1.0],
        sizes: &[1 << 12],
        replicates: 4,
        walks: 50,
    },
    ExperimentSpec {
        name: "exit_time",
        description: "exit step statistics from embedded balls",
        gammas: &[1.0],
        sizes: &[1 << 12],
        replicates: 4,
        walks: 200,
    },
    ExperimentSpec {
        name: "modulus",
        description: "violation frequency of the walk modulus of continuity",
        gammas: &[1.0],
        sizes: &[1 << 14],
        replicates: 4,
        walks: 50,
    },
    ExperimentSpec {
        name: "bm_comparison",
        description: "KS distance of exit angles from embedded balls to the uniform law",
        gammas: &[1.0],
        sizes: &[1 << 12, 1 << 13, 1 << 14],
        replicates: 20,
        walks: 400,
    },
    ExperimentSpec {
        name: "lbm_walk",
        description: "rescaled walk exit times against rescaled LBM exit times",
        gammas: &[1.0],
        sizes: &[1 << 10, 1 << 12, 1 << 14],
        replicates: 8,
        walks: 100,
    },
    ExperimentSpec {
        name: "gmc",
        description: "GFF covariance, GMC ball-mass exponent and ball-mass envelopes",
        gammas: &[1.0],
        sizes: &[16, 512, 1024],
        replicates: 200,
        walks: 4,
    },
    ExperimentSpec {
        name: "lbm",
        description: "Liouville clock identities, m0 calibration and reversibility",
        gammas: &[1.0],
        sizes: &[256],
        replicates: 4,
        walks: 2000,
    },
];

pub fn find(name: &str) -> Result<&'static ExperimentSpec> {
    EXPERIMENTS.iter().find(|e| e.name == name).ok_or_else(|| {
        let names: Vec<&str> = EXPERIMENTS.iter().map(|e| e.name).collect();
        invalid(format!("unknown experiment `{name}`; known: {}", names.join(", ")))
    })
}

/// Median exit time of planar Brownian motion from `B_{1/2}` under the
/// default Euler discretization, fixed by a brute-force run before the build.
pub const BM_MEDIAN_EXIT: f64 = 0.1008;

/// Tables, plots and headline numbers of a run.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub plots: Vec<(String, String)>,
    pub summary: serde_json::Value,
}

fn fit_row(table: &mut Table, label: &str, fit: &LinearFit) {
    table.push(vec![
        cell(label),
        cell(fit.slope),
        cell(fit.intercept),
        cell(fit.r2),
        cell(fit.slope_lo),
        cell(fit.slope_hi),
        cell(fit.n),
    ]);
}

fn fit_table(name: &str) -> Table {
    Table::new(name, &["label", "slope", "intercept", "r2", "slope_lo", "slope_hi", "points"])
}

/// Runs an experiment and writes its artifacts.
pub fn run_experiment(cfg: &ExperimentConfig, format: Format) -> Result<Manifest> {
    cfg.validate()?;
    let start = Instant::now();
    let outcome = match cfg.name.as_str() {
        "degree" => run_degree(cfg)?,
        "perimeter" => run_perimeter(cfg)?,
        "m_eps" => run_m_eps(cfg)?,
        "resistance" => run_resistance(cfg)?,
        "green" => run_green(cfg)?,
        "exit_time" => run_exit_time(cfg)?,
        "modulus" => run_modulus(cfg)?,
        "bm_comparison" => run_bm_comparison(cfg)?,
        "lbm_walk" => run_lbm_walk(cfg)?,
        "gmc" => run_gmc(cfg)?,
        "lbm" => run_lbm(cfg)?,
        other => return Err(invalid(format!("unknown experiment `{other}`"))),
    };
    fs::create_dir_all(&cfg.out)?;
    let mut tables = Vec::new();
    for t in &outcome.tables {
        let path = t.write(&cfg.out, format)?;
        tables.push(path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default());
    }
    let mut plots = Vec::new();
    for (name, svg) in &outcome.plots {
        let file = format!("{name}.svg");
        fs::write(cfg.out.join(&file), svg)?;
        plots.push(file);
    }
    let manifest = Manifest {
        experiment: cfg.name.clone(),
        config: cfg.clone(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
        tables,
        plots,
        summary: outcome.summary,
    };
    manifest.write(&cfg.out)?;
    Ok(manifest)
}

fn run_degree(cfg: &ExperimentConfig) -> Result<Outcome> {
    let margin = cfg.tolerance("margin", 1000.0) as usize;
    let mut bulk = Table::new("degree_bulk", &["gamma", "n", "margin", "bulk", "mean_bulk_degree", "max_degree"]);
    let mut maxes = Table::new("degree_max", &["gamma", "n", "mean_max_degree"]);
    let mut hist = Table::new("degree_hist", &["gamma", "degree", "count"]);
    let mut fits = fit_table("degree_fit");
    let mut series = Vec::new();
    let largest = *cfg.sizes.last().expect("validated");
    for &gamma in &cfg.gammas {
        let mut points = Vec::new();
        for &n in &cfg.sizes {
            let mut max_sum = 0.0;
            for k in 0..cfg.replicates {
                let seed = derive_seed(cfg.seed, "degree", ((n as u64) << 8) | k as u64);
                let map = maps::plane_map(gamma, n, cfg.substeps, seed ^ gamma.to_bits())?;
                let stats = maps::degree_statistics(&map, margin.min(n / 4))?;
                max_sum += stats.max_degree as f64;
                if n == largest && k == 0 {
                    bulk.push(vec![
                        cell(gamma),
                        cell(n),
                        cell(margin),
                        cell(stats.bulk),
                        cell(stats.mean_bulk_degree),
                        cell(stats.max_degree),
                    ]);
                    for (d, c) in stats.histogram.iter().enumerate().filter(|(_, c)| **c > 0) {
                        hist.push(vec![cell(gamma), cell(d), cell(c)]);
                    }
                }
            }
            let m = max_sum / cfg.replicates as f64;
            maxes.push(vec![cell(gamma), cell(n), cell(m)]);
            points.push((n as f64, m));
        }
        let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
        fit_row(&mut fits, &format!("max_degree_gamma_{gamma}"), &log_log_fit(&x, &y));
        series.push(Series::new(&format!("gamma {gamma:.3}"), points));
    }
    Ok(Outcome {
        plots: vec![("degree_max".into(), svg_plot("maximum degree", "n", "max degree", &series, true, true))],
        summary: json!({ "largest_size": largest, "margin": margin }),
        tables: vec![bulk, maxes, hist, fits],
    })
}

fn run_perimeter(cfg: &ExperimentConfig) -> Result<Outcome> {
    let gamma = cfg.gammas[0];
    let scan = maps::perimeter_scan(gamma, &cfg.sizes, cfg.replicates, cfg.substeps, cfg.seed)?;
    let mut per = Table::new("perimeter", &["gamma", "n", "mean_perimeter", "replicates"]);
    for r in &scan.rows {
        per.push(vec![cell(gamma), cell(r.n), cell(r.mean_perimeter), cell(r.replicates)]);
    }
    // Record counts run over the perimeter sizes extended by two doublings.
    let first = cfg.sizes[0];
    let last = 4 * *cfg.sizes.last().expect("validated");
    let k_sizes: Vec<usize> = std::iter::successors(Some(first), |&n| (2 * n <= last).then_some(2 * n)).collect();
    let (rows, k_fit) = maps::record_count_scan(&k_sizes, cfg.walks.max(1), 8, cfg.seed);
    let mut rec = Table::new("record_count", &["n", "mean_count", "replicates"]);
    for r in &rows {
        rec.push(vec![cell(r.n), cell(r.mean_count), cell(r.replicates)]);
    }
    let mut fits = fit_table("perimeter_fit");
    fit_row(&mut fits, "perimeter", &scan.fit);
    fit_row(&mut fits, "record_count", &k_fit);
    let series = vec![
        Series::new("mean perimeter", scan.rows.iter().map(|r| (r.n as f64, r.mean_perimeter)).collect()),
        Series::new("mean K_n", rows.iter().map(|r| (r.n as f64, r.mean_count)).collect()),
    ];
    Ok(Outcome {
        plots: vec![("perimeter".into(), svg_plot("perimeter and record counts", "n", "mean", &series, true, true))],
        summary: json!({ "perimeter_slope": scan.fit.slope, "record_slope": k_fit.slope }),
        tables: vec![per, rec, fits],
    })
}

fn run_m_eps(cfg: &ExperimentConfig) -> Result<Outcome> {
    let gamma = cfg.gammas[0];
    let mut table = Table::new("m_eps", &["gamma", "n", "median", "median_over_n", "samples"]);
    let mut per_map = Table::new("m_eps_maps", &["n", "map", "median"]);
    let mut points = Vec::new();
    for &n in &cfg.sizes {
        let est = walk::estimate_m_eps(
            gamma,
            n,
            cfg.substeps,
            cfg.replicates,
            cfg.walks,
            derive_seed(cfg.seed, "m_eps", n as u64),
        )?;
        table.push(vec![cell(gamma), cell(n), cell(est.median), cell(est.median / n as f64), cell(est.samples.len())]);
        for (k, m) in est.per_map_median.iter().enumerate() {
            per_map.push(vec![cell(n), cell(k), cell(m)]);
        }
        points.push((n as f64, est.median));
    }
    let ratios: Vec<f64> = points.iter().map(|(n, m)| m / n).collect();
    let spread =
        ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max) / ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let fit = log_log_fit(&x, &y);
    let mut fits = fit_table("m_eps_fit");
    fit_row(&mut fits, "m_eps", &fit);
    Ok(Outcome {
        plots: vec![(
            "m_eps".into(),
            svg_plot("median exit steps from B_1/2", "n", "m_eps", &[Series::new("m_eps", points)], true, true),
        )],
        summary: json!({ "ratio_spread": spread, "slope": fit.slope }),
        tables: vec![table, per_map, fits],
    })
}

fn run_resistance(cfg: &ExperimentConfig) -> Result<Outcome> {
    let gamma = cfg.gammas[0];
    let n = *cfg.sizes.last().expect("validated");
    let s = cfg.tolerance("inner_radius", 0.02);
    let radii: Vec<(f64, f64)> = (1..=5).map(|k| (s, s * 2f64.powi(k))).collect();
    let mut table = Table::new("resistance", &["map", "s", "r", "log_ratio", "resistance", "inner", "outer"]);
    let mut sums = vec![0.0; radii.len()];
    for k in 0..cfg.replicates {
        let em = walk::sample_embedded_map(gamma, n, cfg.substeps, derive_seed(cfg.seed, "resistance/map", k as u64))?;
        let rows = walk::annulus_resistance_scan(&em, em.pos(em.root()), &radii)?;
        for (i, r) in rows.iter().enumerate() {
            sums[i] += r.resistance / cfg.replicates as f64;
            table.push(vec![
                cell(k),
                cell(r.s),
                cell(r.r),
                cell((r.r / r.s).ln()),
                cell(r.resistance),
                cell(r.inner),
                cell(r.outer),
            ]);
        }
    }
    let x: Vec<f64> = radii.iter().map(|(s, r)| (r / s).ln()).collect();
    let fit = linear_fit(&x, &sums);
    let mut mean_t = Table::new("resistance_mean", &["log_ratio", "mean_resistance"]);
    for (a, b) in x.iter().zip(&sums) {
        mean_t.push(vec![cell(a), cell(b)]);
    }
    let mut fits = fit_table("resistance_fit");
    fit_row(&mut fits, "mean_resistance_vs_log_ratio", &fit);
    let pts: Vec<(f64, f64)> = x.iter().copied().zip(sums.iter().copied()).collect();
    Ok(Outcome {
        plots: vec![(
            "resistance".into(),
            svg_plot("annulus resistance", "log(r/s)", "R", &[Series::new("mean R", pts)], false, false),
        )],
        summary: json!({ "slope": fit.slope, "r2": fit.r2 }),
        tables: vec![table, mean_t, fits],
    })
}

fn run_green(cfg: &ExperimentConfig) -> Result<Outcome> {
    let gamma = cfg.gammas[0];
    let n = *cfg.sizes.last().expect("validated");
    let mut fits = fit_table("green_fit");
    let mut binned = Table::new("green_binned", &["map", "log_inv_distance", "mean_gr"]);
    let mut harnack = Table::new("harnack", &["map", "draw", "x", "y", "s", "r", "ratio"]);
    let mut pooled: std::collections::BTreeMap<i64, (f64, usize)> = Default::default();
    let mut ratios = Vec::new();
    for k in 0..cfg.replicates {
        let em = walk::sample_embedded_map(gamma, n, cfg.substeps, derive_seed(cfg.seed, "green/map", k as u64))?;
        let scan = walk::green_log_scan(&em, em.root(), 0.5)?;
        fit_row(&mut fits, &format!("map_{k}"), &scan.fit);
        for &(lx, g) in &scan.binned {
            binned.push(vec![cell(k), cell(lx), cell(g)]);
            let key = (lx * 1e6).round() as i64;
            let e = pooled.entry(key).or_insert((0.0, 0));
            e.0 += g;
            e.1 += 1;
        }
        let mut rng = stream(cfg.seed, "green/harnack", k as u64);
        let interior: Vec<usize> =
            (0..em.net.n()).filter(|&v| !em.map.is_boundary(v) && em.pos(v).norm() < 0.5).collect();
        for d in 0..cfg.walks {
            let v = interior[rng.random_range(0..interior.len())];
            let s = rng.random_range(0.02..0.1);
            let z = em.pos(v);
            if let Ok(ratio) = walk::harnack_ratio(&em, z, s, 0.3) {
                harnack.push(vec![cell(k), cell(d), cell(z.re), cell(z.im), cell(s), cell(0.3), cell(ratio)]);
                ratios.push(ratio);
            }
        }
    }
    let (px, py): (Vec<f64>, Vec<f64>) = pooled.iter().map(|(k, (s, c))| (*k as f64 / 1e6, s / *c as f64)).unzip();
    let fit = linear_fit(&px, &py);
    fit_row(&mut fits, "pooled", &fit);
    ratios.sort_by(f64::total_cmp);
    let p95 = if ratios.is_empty() { f64::NAN } else { quantile_sorted(&ratios, 0.95) };
    let pts: Vec<(f64, f64)> = px.iter().copied().zip(py.iter().copied()).collect();
    Ok(Outcome {
        plots: vec![(
            "green".into(),
            svg_plot("Green's function", "log(1/distance)", "mean gr", &[Series::new("pooled", pts)], false, false),
        )],
        summary: json!({ "pooled_slope": fit.slope, "pooled_r2": fit.r2, "harnack_p95": p95 }),
        tables: vec![fits, binned, harnack],
    })
}

fn run_exit_time(cfg: &ExperimentConfig) -> Result<Outcome> {
    let gamma = cfg.gammas[0];
    let n = *cfg.sizes.last().expect("validated");
    let radii = [0.05, 0.1, 0.2, 0.4];
    let fraction = cfg.tolerance("fraction", 0.1);
    let mut table = Table::new(
        "exit_time",
        &["map", "start", "r", "mean", "median", "second_moment", "moment_ratio", "cell_count", "truncated"],
    );
    let (mut covered, mut total, mut shape_ok) = (0, 0, 0);
    for k in 0..cfg.replicates {
        let seed = derive_seed(cfg.seed, "exit_time/map", k as u64);
        let em = walk::sample_embedded_map(gamma, n, cfg.substeps, seed)?;
        let mut rng = stream(seed, "exit_time/starts", 0);
        let interior: Vec<usize> = (0..em.net.n()).filter(|&v| em.pos(v).norm() < 0.5).collect();
        for _ in 0..5 {
            let x = interior[rng.random_range(0..interior.len())];
            let rows = walk::exit_time_scan(
                &em,
                x,
                &radii,
                fraction,
                cfg.walks,
                derive_seed(seed, "exit_time/walks", x as u64),
            )?;
            for r in rows {
                total += 1;
                covered += usize::from(r.mean >= r.cell_count as f64);
                shape_ok += usize::from(r.moment_ratio <= 4.0);
                table.push(vec![
                    cell(k),
                    cell(x),
                    cell(r.r),
                    cell(r.mean),
                    cell(r.median),
                    cell(r.second_moment),
                    cell(r.moment_ratio),
                    cell(r.cell_count),
                    cell(r.truncated),
                ]);
            }
        }
    }
    Ok(Outcome {
        summary: json!({
            "fraction_mean_above_cell_count": covered as f64 / total as f64,
            "fraction_moment_ratio_within_4": shape_ok as f64 / total as f64,
        }),
        tables: vec![table],
        plots: vec![],
    })
}

fn run_modulus(cfg: &ExperimentConfig) -> Result<Outcome> {
    let gamma = cfg.gammas[0];
    let n = *cfg.sizes.last().expect("validated");
    let est = walk::estimate_m_eps(
        gamma,
        n,
        cfg.substeps,
        cfg.replicates,
        cfg.walks,
        derive_seed(cfg.seed, "modulus/m_eps", n as u64),
    )?;
    let chi = walk::modulus_exponent(gamma);
    let mut traces = Vec::new();
    for k in 0..cfg.replicates {
        let seed = derive_seed(derive_seed(cfg.seed, "modulus/m_eps", n as u64), "m_eps/map", k as u64);
        let em = walk::sample_embedded_map(gamma, n, cfg.substeps, seed)?;
        for w in 0..cfg.walks {
            let mut rng = stream(seed, "modulus/trace", w as u64);
            traces.push(walk::rescaled_trace(&em, 0.75, est.median, &mut rng)?);
        }
    }
    let deltas = [0.2, 0.1, 0.05];
    let rows = walk::modulus_statistic(&traces, &deltas, chi);
    let mut table =
        Table::new("modulus", &["delta", "chi", "window", "max_displacement", "violations", "traces", "frequency"]);
    for r in &rows {
        table.push(vec![
            cell(r.delta),
            cell(chi),
            cell(r.window),
            cell(r.max_displacement),
            cell(r.violations),
            cell(r.traces),
            cell(r.frequency),
        ]);
    }
    Ok(Outcome { summary: json!({ "m_eps": est.median, "chi": chi }), tables: vec![table], plots: vec![] })
}

fn run_bm_comparison(cfg: &ExperimentConfig) -> Result<Outcome> {
    let gamma = cfg.gammas[0];
    let mut table = Table::new("bm_comparison", &["n", "ball", "start", "radius", "ks", "walks"]);
    let mut med = Table::new("bm_comparison_median", &["n", "median_ks"]);
    let mut points = Vec::new();
    for &n in &cfg.sizes {
        let seed = derive_seed(cfg.seed, "bm_comparison/map", n as u64);
        let em = walk::sample_embedded_map(gamma, n, cfg.substeps, seed)?;
        let mut rng = stream(seed, "bm_comparison/starts", 0);
        let interior: Vec<usize> = (0..em.net.n()).filter(|&v| em.pos(v).norm() < 0.5).collect();
        let starts: Vec<usize> = (0..cfg.replicates).map(|_| interior[rng.random_range(0..interior.len())]).collect();
        let rows = walk::bm_comparison(&em, &starts, 0.25, cfg.walks, seed)?;
        for (b, r) in rows.iter().enumerate() {
            table.push(vec![cell(n), cell(b), cell(r.start), cell(r.radius), cell(r.ks), cell(r.walks)]);
        }
        let m = median(&rows.iter().map(|r| r.ks).collect::<Vec<_>>());
        med.push(vec![cell(n), cell(m)]);
        points.push((n as f64, m));
    }
    Ok(Outcome {
        plots: vec![(
            "bm_comparison".into(),
            svg_plot("exit-angle KS distance", "n", "median KS", &[Series::new("median KS", points)], true, true),
        )],
        summary: json!({}),
        tables: vec![table, med],
    })
}

fn normalized_by_median(xs: &[f64]) -> Vec<f64> {
    let m = median(xs);
    xs.iter().map(|x| x / m).collect()
}

fn run_lbm_walk(cfg: &ExperimentConfig) -> Result<Outcome> {
    let gamma = cfg.gammas[0];
    let m = cfg.tolerance("grid", 256.0) as usize;
    let quenched = fields::quenched_m0(m, gamma, cfg.replicates.min(8), 500, derive_seed(cfg.seed, "lbm_walk/lbm", 0))?;
    let lbm_samples: Vec<f64> = quenched.iter().flat_map(|e| e.exit_times.iter().copied()).collect();
    let lbm_norm = normalized_by_median(&lbm_samples);
    let mut table = Table::new(
        "lbm_walk",
        &["n", "walk_samples", "lbm_samples", "ks", "p_value", "walk_normalized_median", "lbm_normalized_median"],
    );
    let mut points = Vec::new();
    for &n in &cfg.sizes {
        let est = walk::estimate_m_eps(
            gamma,
            n,
            cfg.substeps,
            cfg.replicates,
            cfg.walks,
            derive_seed(cfg.seed, "lbm_walk/walk", n as u64),
        )?;
        let walk_norm = normalized_by_median(&est.samples);
        let ks = ks_two_sample(&walk_norm, &lbm_norm);
        table.push(vec![
            cell(n),
            cell(walk_norm.len()),
            cell(lbm_norm.len()),
            cell(ks),
            cell(ks_two_sample_p(ks, walk_norm.len(), lbm_norm.len())),
            cell(median(&walk_norm)),
            cell(median(&lbm_norm)),
        ]);
        points.push((n as f64, ks));
    }
    let non_increasing = points.windows(2).filter(|w| w[1].1 <= w[0].1).count();
    Ok(Outcome {
        plots: vec![(
            "lbm_walk".into(),
            svg_plot("walk vs LBM exit times", "n", "KS", &[Series::new("KS", points)], true, false),
        )],
        summary: json!({ "non_increasing_steps": non_increasing, "annealed_m0": annealed_m0(&quenched) }),
        tables: vec![table],
    })
}

fn run_gmc(cfg: &ExperimentConfig) -> Result<Outcome> {
    let gamma = cfg.gammas[0];
    let [m_cov, m_mass, m_env] = match cfg.sizes.as_slice() {
        [a, b, c] => [*a, *b, *c],
        _ => return Err(invalid("gmc expects three grid sizes: covariance, mass exponent, envelopes")),
    };
    let cov_samples = cfg.tolerance("covariance_samples", 10_000.0) as usize;
    let mut cov = Table::new("gmc_covariance", &["i1", "j1", "i2", "j2", "empirical", "std_error", "green"]);
    for r in fields::covariance_check(m_cov, cov_samples, derive_seed(cfg.seed, "gmc/cov", 0))? {
        cov.push(vec![
            cell(r.i1),
            cell(r.j1),
            cell(r.i2),
            cell(r.j2),
            cell(r.empirical),
            cell(r.std_error),
            cell(r.green),
        ]);
    }
    let deltas = [0.05, 0.1, 0.2, 0.4];
    let mass = fields::mass_exponent(m_mass, gamma, &deltas, cfg.replicates, derive_seed(cfg.seed, "gmc/mass", 0))?;
    let mut mass_t = Table::new("gmc_mass", &["delta", "mean_normalized_mass", "mean_mass"]);
    for k in 0..deltas.len() {
        mass_t.push(vec![cell(deltas[k]), cell(mass.normalized[k]), cell(mass.raw[k])]);
    }
    let mut fits = fit_table("gmc_fit");
    fit_row(&mut fits, "normalized_mass", &mass.normalized_fit);
    fit_row(&mut fits, "raw_mass", &mass.raw_fit);
    let env = fields::ball_envelopes(m_env, gamma, cfg.walks.max(1), 0.75, 0.01, derive_seed(cfg.seed, "gmc/env", 0))?;
    let mut env_t = Table::new("gmc_envelope", &["field", "min_exponent", "max_exponent"]);
    for r in &env {
        env_t.push(vec![cell(r.field), cell(r.min_exponent), cell(r.max_exponent)]);
    }
    let mean_min = env.iter().map(|r| r.min_exponent).sum::<f64>() / env.len() as f64;
    let mean_max = env.iter().map(|r| r.max_exponent).sum::<f64>() / env.len() as f64;
    let mut env_s = Table::new("gmc_envelope_mean", &["gamma", "mean_min_exponent", "mean_max_exponent"]);
    env_s.push(vec![cell(gamma), cell(mean_min), cell(mean_max)]);
    // Regularization diagnostic: total mass drift when ε_c doubles.
    let f =
        crate::field::sample_gff(m_mass, crate::field::Boundary::ZeroBoundary, derive_seed(cfg.seed, "gmc/drift", 0))?;
    let t1 = crate::field::build_lqg_measure(&f, gamma, 4.0 * f.a)?.total();
    let t2 = crate::field::build_lqg_measure(&f, gamma, 8.0 * f.a)?.total();
    let mut drift = Table::new("gmc_eps_drift", &["eps_c", "total_mass", "relative_drift"]);
    drift.push(vec![cell(4.0 * f.a), cell(t1), cell(0.0)]);
    drift.push(vec![cell(8.0 * f.a), cell(t2), cell((t2 - t1).abs() / t1)]);
    let series = vec![
        Series::new("E[mu e^(-gamma h)]", deltas.iter().copied().zip(mass.normalized.iter().copied()).collect()),
        Series::new("E[mu]", deltas.iter().copied().zip(mass.raw.iter().copied()).collect()),
    ];
    Ok(Outcome {
        plots: vec![(
            "gmc_mass".into(),
            svg_plot("ball masses at the origin", "delta", "mean mass", &series, true, true),
        )],
        summary: json!({
            "normalized_exponent": mass.normalized_fit.slope,
            "raw_exponent": mass.raw_fit.slope,
            "mean_min_exponent": mean_min,
            "mean_max_exponent": mean_max,
        }),
        tables: vec![cov, mass_t, fits, env_t, env_s, drift],
    })
}

fn run_lbm(cfg: &ExperimentConfig) -> Result<Outcome> {
    let gamma = cfg.gammas[0];
    let m = *cfg.sizes.last().expect("validated");
    let a = 2.0 / m as f64;
    let dt = default_dt(a);
    let opts = M0Options::with_dt(dt);
    let bm_samples = cfg.tolerance("bm_samples", 20_000.0) as usize;
    let invariance_n = cfg.tolerance("invariance_samples", 100_000.0) as usize;

    let one = estimate_m0(&ConstantDensity(1.0), bm_samples, &opts, derive_seed(cfg.seed, "lbm/bm", 0))?;
    let mut calib =
        Table::new("lbm_m0_bm", &["samples", "dt", "median", "ci_lo", "ci_hi", "reference", "relative_error"]);
    calib.push(vec![
        cell(bm_samples),
        cell(dt),
        cell(one.median),
        cell(one.ci_lo),
        cell(one.ci_hi),
        cell(BM_MEDIAN_EXIT),
        cell((one.median - BM_MEDIAN_EXIT).abs() / BM_MEDIAN_EXIT),
    ]);

    // Exact identities: clock linearity and the time-change round trip.
    let lin_opts = M0Options { bootstrap: 0, ..opts };
    let base = estimate_m0(&ConstantDensity(1.0), 500, &lin_opts, derive_seed(cfg.seed, "lbm/linearity", 0))?;
    let doubled = estimate_m0(&ConstantDensity(2.0), 500, &lin_opts, derive_seed(cfg.seed, "lbm/linearity", 0))?;
    let linear = base.exit_times.iter().zip(&doubled.exit_times).all(|(x, y)| *y == 2.0 * x)
        && doubled.median == 2.0 * base.median;
    let mu = fields::cone_measure(m, gamma, derive_seed(cfg.seed, "lbm/field", 0))?;
    let path = BrownianPath::sample((0.0, 0.0), dt, 20_000, &mut stream(cfg.seed, "lbm/roundtrip", 0));
    let lbm = LbmPath::new(path, &mu, 1.0, 1.0);
    let mut round_trip = 0.0f64;
    for k in (0..lbm.clock.len()).step_by(97) {
        if let Ok(p) = crate::lbm::time_change(&lbm, lbm.clock[k]) {
            let q = lbm.base.positions[k];
            if k == 0 || lbm.clock[k] > lbm.clock[k - 1] {
                round_trip = round_trip.max((p.0 - q.0).hypot(p.1 - q.1));
            }
        }
    }
    let monotone = lbm.clock.windows(2).all(|w| w[1] >= w[0]);
    let mut ident = Table::new("lbm_identities", &["check", "value", "pass"]);
    ident.push(vec![cell("clock_linearity"), cell(u8::from(linear)), cell(linear)]);
    ident.push(vec![cell("round_trip_max_error"), cell(round_trip), cell(round_trip <= 1e-12)]);
    ident.push(vec![cell("clock_monotone"), cell(u8::from(monotone)), cell(monotone)]);

    let quenched = fields::quenched_m0(m, gamma, cfg.replicates, cfg.walks, derive_seed(cfg.seed, "lbm/quenched", 0))?;
    let mut m0_t = Table::new("lbm_m0", &["field", "median", "ci_lo", "ci_hi", "samples", "failed"]);
    for (k, e) in quenched.iter().enumerate() {
        m0_t.push(vec![cell(k), cell(e.median), cell(e.ci_lo), cell(e.ci_hi), cell(e.samples), cell(e.failed)]);
    }
    let annealed = annealed_m0(&quenched);
    m0_t.push(vec![
        cell("annealed"),
        cell(annealed),
        cell(""),
        cell(""),
        cell(quenched.iter().map(|e| e.samples).sum::<usize>()),
        cell(""),
    ]);

    let field0 = fields::cone_measure(m, gamma, derive_seed(derive_seed(cfg.seed, "lbm/quenched", 0), "lbm/field", 0))?;
    let t = 0.1 * quenched[0].median;
    let inv_opts = InvarianceOptions { rho: 0.75, dt, max_steps: 2_000_000 };
    let inv = invariance_test(&field0, t, invariance_n, &inv_opts, derive_seed(cfg.seed, "lbm/invariance", 0))?;
    let torus = torus_invariance_test(1.0, 0.05, invariance_n, dt, derive_seed(cfg.seed, "lbm/torus", 0))?;
    let bm_other = fields::bm_exit_times(10_000, dt / 4.0, derive_seed(cfg.seed, "lbm/bm_reference", 0))?;
    let lbm_one: Vec<f64> = one.exit_times.iter().take(10_000).copied().collect();
    let ks_deg = ks_two_sample(&normalized_by_median(&lbm_one), &normalized_by_median(&bm_other));
    let mut inv_t = Table::new("lbm_invariance", &["variant", "t", "n", "survivors", "tv", "chi_square", "p_value"]);
    for (label, r) in [("gamma_field", &inv), ("torus_constant", &torus)] {
        inv_t.push(vec![
            cell(label),
            cell(r.t),
            cell(r.n),
            cell(r.survivors),
            cell(r.tv),
            cell(r.chi_square),
            cell(r.p_value),
        ]);
    }
    let mut deg = Table::new("lbm_degenerate", &["samples", "ks"]);
    deg.push(vec![cell(lbm_one.len()), cell(ks_deg)]);
    Ok(Outcome {
        summary: json!({
            "bm_median": one.median,
            "annealed_m0": annealed,
            "invariance_tv": inv.tv,
            "torus_tv": torus.tv,
        }),
        tables: vec![calib, ident, m0_t, inv_t, deg],
        plots: vec![],
    })
}
