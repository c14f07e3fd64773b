use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use mated_crt::brownian::{sample_disk_excursion, sample_plane, CorrelatedPath, ExcursionMethod, PathParams};
use mated_crt::electrical::{effective_resistance, Network};
use mated_crt::experiments::{cell, run_experiment, walk, ExperimentConfig, Format, Table};
use mated_crt::field::{add_cone_singularity, build_lqg_measure, sample_gff, Boundary, GffGrid, LqgMeasure};
use mated_crt::lbm::{default_dt, estimate_m0, BrownianPath, LbmPath, M0Options};
use mated_crt::map::{enumerate_faces, MatedCrtMap};
use mated_crt::rng::stream;
use mated_crt::tutte::{harmonicity_residual, pick_root, tutte_embed};

#[derive(Parser)]
#[command(name = "mcrt", version, about = "Mated-CRT maps, random walks and Liouville Brownian motion")]
struct Cli {
    /// Master seed [default: 1].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Experiment config file (flat `key = value`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyArg {
    Plane,
    Disk,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Local,
    Rejection,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Zero,
    Torus,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Zero => Boundary::ZeroBoundary,
            BoundaryArg::Torus => Boundary::TorusProjected,
        }
    }
}

#[derive(Args, Clone)]
struct PathArgs {
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Number of cells.
    #[arg(long, short, default_value_t = 1024)]
    n: usize,
    #[arg(long, value_enum, default_value_t = TopologyArg::Disk)]
    topology: TopologyArg,
    #[arg(long, default_value_t = 16)]
    substeps: usize,
    /// Quadrant excursion sampler for disk paths.
    #[arg(long, value_enum, default_value_t = MethodArg::Local)]
    method: MethodArg,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a correlated Brownian path; writes path.bin and a path table.
    SamplePath(PathArgs),
    /// Build a mated-CRT map from a path file or a fresh sample; writes map.txt.
    BuildMap {
        #[arg(long)]
        path: Option<PathBuf>,
        #[command(flatten)]
        sample: PathArgs,
    },
    /// Tutte-embed a disk map; writes embedding table and embedding.svg.
    Tutte {
        #[arg(long)]
        map: PathBuf,
        /// Root vertex; a uniform interior vertex when omitted.
        #[arg(long)]
        root: Option<usize>,
    },
    /// Run a random walk on an embedded disk map; writes the trace table.
    Walk {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        start: Option<usize>,
        /// Stop after this many steps.
        #[arg(long, conflicts_with_all = ["exit_radius", "hit_boundary"])]
        steps: Option<usize>,
        /// Stop on leaving the embedded ball of this radius around the start.
        #[arg(long, conflicts_with = "hit_boundary")]
        exit_radius: Option<f64>,
        #[arg(long)]
        hit_boundary: bool,
        #[arg(long, default_value_t = 10_000_000)]
        max_steps: usize,
    },
    /// Effective resistance between two vertex sets of a map.
    Resistance {
        #[arg(long)]
        map: PathBuf,
        /// Comma-separated vertices of the first set.
        #[arg(long, value_delimiter = ',', required = true)]
        a: Vec<usize>,
        /// Comma-separated vertices of the second set.
        #[arg(long, value_delimiter = ',', required = true)]
        z: Vec<usize>,
    },
    /// Sample a lattice Gaussian free field; writes field.bin.
    Gff {
        #[arg(long, short, default_value_t = 256)]
        m: usize,
        #[arg(long, value_enum, default_value_t = BoundaryArg::Zero)]
        bc: BoundaryArg,
    },
    /// Build a GMC measure from a field file or a fresh sample; writes measure.bin.
    Lqg {
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long, short, default_value_t = 256)]
        m: usize,
        #[arg(long, value_enum, default_value_t = BoundaryArg::Torus)]
        bc: BoundaryArg,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Circle-average radius; defaults to four cell widths.
        #[arg(long)]
        eps_c: Option<f64>,
        /// Add the `γ log(1/|z|)` singularity before exponentiating.
        #[arg(long)]
        cone: bool,
    },
    /// Liouville Brownian motion against a measure file; writes the path table
    /// and optionally estimates the median exit time from B_1/2.
    Lbm {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        steps: usize,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        m0: f64,
        /// Number of exit-time samples for an m0 estimate; 0 skips it.
        #[arg(long, default_value_t = 0)]
        m0_samples: usize,
    },
    /// Run a named experiment.
    Experiment { name: String },
    /// List the available experiments with their defaults.
    List,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn sample_path(p: &PathArgs, seed: u64) -> Result<CorrelatedPath> {
    Ok(match p.topology {
        TopologyArg::Plane => sample_plane(&PathParams::plane(p.gamma, p.n, seed).with_substeps(p.substeps))?,
        TopologyArg::Disk => {
            let method = match p.method {
                MethodArg::Local => ExcursionMethod::local(),
                MethodArg::Rejection => ExcursionMethod::rejection(),
            };
            sample_disk_excursion(&PathParams::disk(p.gamma, p.n, seed).with_substeps(p.substeps), method)?.0
        }
    })
}

fn read_map(path: &Path) -> Result<MatedCrtMap> {
    MatedCrtMap::read_text(open(path)?).with_context(|| format!("reading map {}", path.display()))
}

/// A uniformly chosen interior vertex, deterministic in `seed`.
fn interior_vertex(map: &MatedCrtMap, seed: u64) -> Result<usize> {
    let mut rng = stream(seed, "cli/root", 0);
    (0..64).map(|_| pick_root(map, &mut rng)).find(|&v| !map.is_boundary(v)).context("no interior vertex found")
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let format: Format = cli.format.into();
    let seed = cli.seed.unwrap_or(1);
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let out = out_dir.as_path();
    match &cli.command {
        Command::SamplePath(p) => {
            let path = sample_path(p, seed)?;
            path.write_binary(create(out, "path.bin")?)?;
            let mut t = Table::new("path", &["t", "l", "r"]);
            for (k, (l, r)) in path.l.iter().zip(&path.r).enumerate() {
                t.push(vec![cell(k as f64 * path.dt), cell(l), cell(r)]);
            }
            let written = t.write(out, format)?;
            println!("{} grid points -> {}", path.len(), written.display());
        }
        Command::BuildMap { path, sample } => {
            let path = match path {
                Some(f) => CorrelatedPath::read_binary(open(f)?)?,
                None => sample_path(sample, seed)?,
            };
            let map = MatedCrtMap::from_path(&path)?;
            map.write_text(create(out, "map.txt")?)?;
            let faces = enumerate_faces(&map)?;
            println!("vertices {} edges {} perimeter {}", map.n(), map.n_edges(), faces.perimeter);
        }
        Command::Tutte { map, root } => {
            let map = read_map(map)?;
            let root = match root {
                Some(r) => *r,
                None => interior_vertex(&map, seed)?,
            };
            let emb = tutte_embed(&map, root)?;
            let net = Network::from_map(&map);
            let mut t = Table::new("embedding", &["vertex", "x", "y", "boundary"]);
            for (v, z) in emb.positions.iter().enumerate() {
                t.push(vec![cell(v), cell(z.re), cell(z.im), cell(map.is_boundary(v))]);
            }
            t.write(out, format)?;
            fs::write(out.join("embedding.svg"), emb.to_svg(&net, 800.0))?;
            println!("root {root} harmonicity residual {:.3e}", harmonicity_residual(&emb, &net));
        }
        Command::Walk { map, start, steps, exit_radius, hit_boundary, max_steps } => {
            let map = read_map(map)?;
            let net = Network::from_map(&map);
            let start = match start {
                Some(v) => *v,
                None if map.boundary().is_some() => interior_vertex(&map, seed)?,
                None => map.root().unwrap_or(0),
            };
            let positions: Vec<Complex64> = if map.boundary().is_some() {
                let root = if map.is_boundary(start) { interior_vertex(&map, seed)? } else { start };
                tutte_embed(&map, root)?.positions
            } else {
                vec![Complex64::new(0.0, 0.0); map.n()]
            };
            let stop = match (steps, exit_radius, hit_boundary) {
                (Some(n), _, _) => walk::StopRule::Steps(*n),
                (_, Some(r), _) => walk::StopRule::ExitBall { z: positions[start], r: *r },
                (_, _, true) => walk::StopRule::HitBoundary,
                _ => bail!("give one of --steps, --exit-radius, --hit-boundary"),
            };
            let mut rng = stream(seed, "cli/walk", 0);
            let trace = walk::run_walk(&net, &positions, map.boundary(), start, stop, *max_steps, &mut rng)?;
            let mut t = Table::new("walk", &["step", "vertex", "x", "y"]);
            for (k, (v, z)) in trace.vertices.iter().zip(&trace.points).enumerate() {
                t.push(vec![cell(k), cell(v), cell(z.re), cell(z.im)]);
            }
            t.write(out, format)?;
            println!("steps {} truncated {}", trace.steps(), trace.truncated);
        }
        Command::Resistance { map, a, z } => {
            let net = Network::from_map(&read_map(map)?);
            println!("{}", effective_resistance(&net, a, z)?);
        }
        Command::Gff { m, bc } => {
            let f = sample_gff(*m, (*bc).into(), seed)?;
            f.write_binary(create(out, "field.bin")?, None, None)?;
            println!("M {} a {} bc {}", f.m, f.a, f.bc);
        }
        Command::Lqg { field, m, bc, gamma, eps_c, cone } => {
            let f = match field {
                Some(p) => GffGrid::read_binary(open(p)?)?,
                None => sample_gff(*m, (*bc).into(), seed)?,
            };
            let f = if *cone { add_cone_singularity(&f, *gamma)? } else { f };
            let mu = build_lqg_measure(&f, *gamma, eps_c.unwrap_or(4.0 * f.a))?;
            mu.write_binary(create(out, "measure.bin")?)?;
            println!("M {} total mass {}", mu.m, mu.total());
        }
        Command::Lbm { measure, steps, dt, m0, m0_samples } => {
            let mu = LqgMeasure::read_binary(open(measure)?)?;
            let dt = dt.unwrap_or(default_dt(mu.a));
            let path = BrownianPath::sample((0.0, 0.0), dt, *steps, &mut stream(seed, "cli/lbm", 0));
            let lbm = LbmPath::new(path, &mu, 1.0, *m0);
            lbm.write_csv(create(out, "lbm.csv")?)?;
            println!("quantum horizon {}", lbm.horizon());
            if *m0_samples > 0 {
                let est = estimate_m0(&mu, *m0_samples, &M0Options::with_dt(dt), seed)?;
                println!("m0 median {} CI [{}, {}] failed {}", est.median, est.ci_lo, est.ci_hi, est.failed);
            }
        }
        Command::Experiment { name } => {
            let mut cfg = match &cli.config {
                Some(p) => ExperimentConfig::parse(&fs::read_to_string(p)?, Some(name))?,
                None => ExperimentConfig::defaults(name)?,
            };
            if cfg.name != *name {
                bail!("config names experiment `{}` but `{name}` was requested", cfg.name);
            }
            // Explicit flags override the config file.
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if cli.config.is_none() || cli.out.is_some() {
                cfg.out = out_dir.clone();
            }
            let manifest = run_experiment(&cfg, format)?;
            println!("{} finished in {:.1} s -> {}", manifest.experiment, manifest.wall_time_s, cfg.out.display());
            println!("{}", serde_json::to_string_pretty(&manifest.summary)?);
        }
        Command::List => {
            for e in mated_crt::experiments::EXPERIMENTS {
                println!("{:<14} {}", e.name, e.description);
            }
        }
    }
    Ok(())
}
