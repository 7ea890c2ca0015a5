use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use mdsclt::clt::{
    bound_checks, decompose, growth_check, theory_cov_at, BoundTable, DecompositionSummary,
    GrowthCheck, TheoryCov,
};
use mdsclt::cmds::{embed_with, EmbedOptions, EmbeddingFlags, SCREE_EXTRA};
use mdsclt::harness::{run, ExperimentConfig, McReport};
use mdsclt::io::{read_matrix_csv, read_symmetric_csv, write_json, write_matrix_csv};
use mdsclt::linalg::double_center;
use mdsclt::noise::NoiseSpec;
use mdsclt::points::{sample, DistributionSpec, PointCloud, DEFAULT_MC_DRAWS};
use mdsclt::rawstress::{minimize_stress, StressInit, StressOptions};
use mdsclt::rng::derive_seed;
use mdsclt::serde_rows::to_rows;
use mdsclt::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::plot::plot_registry;

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

/// `X.csv` gets its metadata in `X.csv.json`.
fn sidecar(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start thread pool: {e}")))
}

#[derive(Debug, Args)]
pub struct GenPointsArgs {
    /// Distribution JSON file, e.g. {"gaussian": {"mean": [0, 0], "covariance": [[1, 0], [0, 1]]}}.
    #[arg(long)]
    distribution: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Points CSV, one row per point.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct GenPointsMeta<'a> {
    command: &'static str,
    distribution: &'a DistributionSpec,
    n: usize,
    seed: u64,
    labels: Option<&'a [usize]>,
}

pub fn gen_points(a: GenPointsArgs) -> Result<()> {
    let spec: DistributionSpec = read_json(&a.distribution)?;
    spec.validate()?;
    let cloud = sample(&spec, a.n, a.seed)?;
    write_matrix_csv(&a.out, &cloud.points)?;
    write_json(
        &sidecar(&a.out),
        &GenPointsMeta {
            command: "gen-points",
            distribution: &spec,
            n: a.n,
            seed: a.seed,
            labels: cloud.labels.as_deref(),
        },
    )
}

#[derive(Debug, Args)]
pub struct DistmatArgs {
    /// Points CSV.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Write squared distances instead.
    #[arg(long)]
    squared: bool,
}

pub fn distmat(a: DistmatArgs) -> Result<()> {
    let points = read_matrix_csv(&a.input)?;
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{}: non-finite coordinate", a.input.display())));
    }
    let cloud = PointCloud::new(points, None)?;
    let m = if a.squared {
        cloud.squared_distances()
    } else {
        cloud.distances()
    };
    write_matrix_csv(&a.out, m.as_matrix())
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    /// Distance matrix CSV (not squared).
    #[arg(long = "in")]
    input: PathBuf,
    /// Noise JSON, e.g. {"model": "model2", "law": {"uniform": {"a": 4}}}.
    #[arg(long)]
    noise: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Squared dissimilarities, ready for `embed`.
    #[arg(long)]
    out: PathBuf,
    /// Dissimilarities, for models that produce them.
    #[arg(long)]
    delta_out: Option<PathBuf>,
}

#[derive(Serialize)]
struct PerturbMeta<'a> {
    command: &'static str,
    noise: &'a NoiseSpec,
    seed: u64,
}

pub fn perturb(a: PerturbArgs) -> Result<()> {
    let d = read_symmetric_csv(&a.input)?;
    let spec: NoiseSpec = read_json(&a.noise)?;
    let model = spec.build()?;
    let p = model.perturb(&d, a.seed)?;
    if let Some(path) = &a.delta_out {
        let delta = p.delta.as_ref().ok_or_else(|| {
            Error::Unsupported(format!(
                "noise model `{}` perturbs squared distances only; drop --delta-out",
                spec.model
            ))
        })?;
        write_matrix_csv(path, delta.as_matrix())?;
    }
    write_matrix_csv(&a.out, p.delta_sq.as_matrix())?;
    write_json(
        &sidecar(&a.out),
        &PerturbMeta {
            command: "perturb",
            noise: &spec,
            seed: a.seed,
        },
    )
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Squared-dissimilarity CSV.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    out: PathBuf,
    /// Zero-fill columns whose eigenvalue is not positive instead of failing.
    #[arg(long)]
    allow_deficient: bool,
}

#[derive(Serialize)]
struct EmbedMeta<'a> {
    command: &'static str,
    d: usize,
    eigenvalues: &'a [f64],
    all_top_eigenvalues: &'a [f64],
    flags: &'a EmbeddingFlags,
}

pub fn embed(a: EmbedArgs) -> Result<()> {
    let sq = read_symmetric_csv(&a.input)?;
    sq.check_hollow()?;
    let extra = SCREE_EXTRA.min(sq.n().saturating_sub(a.d));
    let e = embed_with(
        &sq,
        a.d,
        &EmbedOptions {
            allow_deficient: a.allow_deficient,
            extra_eigenvalues: extra,
        },
    )?;
    if !e.flags.deficient.is_empty() {
        eprintln!("warning: zero-filled columns {:?}", e.flags.deficient);
    }
    write_matrix_csv(&a.out, &e.config)?;
    write_json(
        &sidecar(&a.out),
        &EmbedMeta {
            command: "embed",
            d: a.d,
            eigenvalues: &e.eigenvalues,
            all_top_eigenvalues: &e.all_top_eigenvalues,
            flags: &e.flags,
        },
    )
}

#[derive(Debug, Args)]
pub struct SelectDimArgs {
    /// Squared-dissimilarity CSV.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    max_d: usize,
    /// Selection JSON.
    #[arg(long)]
    out: PathBuf,
}

pub fn select_dim(a: SelectDimArgs) -> Result<()> {
    let sq = read_symmetric_csv(&a.input)?;
    sq.check_hollow()?;
    write_json(&a.out, &mdsclt::cmds::select_dim(&sq, a.max_d)?)
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InitKind {
    Cmds,
    Random,
}

#[derive(Debug, Args)]
pub struct RawstressArgs {
    /// Dissimilarity CSV (not squared).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "cmds")]
    init: InitKind,
    /// Seed for random initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Serialize)]
struct RawstressMeta<'a> {
    command: &'static str,
    d: usize,
    options: &'a StressOptions,
    seed: u64,
    stress: f64,
    iterations: usize,
    converged: bool,
    coincident_points: bool,
    history: &'a [f64],
}

pub fn rawstress(a: RawstressArgs) -> Result<()> {
    let delta = read_symmetric_csv(&a.input)?;
    delta.check_hollow()?;
    let options = StressOptions {
        init: match a.init {
            InitKind::Cmds => StressInit::Cmds,
            InitKind::Random => StressInit::Random { seed: a.seed },
        },
        max_iter: a.max_iter,
        tol: a.tol,
        ..Default::default()
    };
    let st = minimize_stress(&delta, a.d, &options)?;
    write_matrix_csv(&a.out, &st.config)?;
    write_json(
        &sidecar(&a.out),
        &RawstressMeta {
            command: "rawstress",
            d: a.d,
            options: &options,
            seed: a.seed,
            stress: st.stress,
            iterations: st.iteration,
            converged: st.converged,
            coincident_points: st.coincident_points,
            history: &st.history,
        },
    )
}

#[derive(Debug, Args)]
pub struct TheoryCovArgs {
    #[arg(long)]
    distribution: PathBuf,
    #[arg(long)]
    noise: PathBuf,
    /// CSV of locations, one per row. Defaults to the mixture locations.
    #[arg(long)]
    at: Option<PathBuf>,
    /// Draws for expectations over continuous distributions.
    #[arg(long, default_value_t = DEFAULT_MC_DRAWS)]
    mc_draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct TheoryOutput<'a> {
    command: &'static str,
    distribution: &'a DistributionSpec,
    noise: &'a NoiseSpec,
    mc_draws: usize,
    seed: u64,
    theory: &'a TheoryCov,
}

pub fn theory_cov(a: TheoryCovArgs) -> Result<()> {
    let spec: DistributionSpec = read_json(&a.distribution)?;
    spec.validate()?;
    let noise_spec: NoiseSpec = read_json(&a.noise)?;
    let noise = noise_spec.build()?;
    let zs: Vec<Vec<f64>> = match (&a.at, spec.locations()) {
        (Some(path), _) => to_rows(&read_matrix_csv(path)?),
        (None, Some(locs)) => locs.to_vec(),
        (None, None) => vec![vec![0.0; spec.dim()]],
    };
    if zs.iter().any(|z| z.len() != spec.dim()) {
        return Err(Error::Dimension(format!("locations must have {} coordinates", spec.dim())));
    }
    let theory = theory_cov_at(&spec, noise.as_ref(), &zs, a.mc_draws, a.seed)?;
    write_json(
        &a.out,
        &TheoryOutput {
            command: "theory-cov",
            distribution: &spec,
            noise: &noise_spec,
            mc_draws: a.mc_draws,
            seed: a.seed,
            theory: &theory,
        },
    )
}

#[derive(Debug, Args)]
pub struct McRunArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Report JSON.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the machine's parallelism.
    #[arg(long, env = "MDSCLT_THREADS")]
    threads: Option<usize>,
}

pub fn mc_run(a: McRunArgs) -> Result<()> {
    let mut cfg: ExperimentConfig = read_json(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let report = thread_pool(a.threads)?.install(|| run(&cfg))?;
    for s in &report.per_n {
        if !s.valid {
            eprintln!(
                "warning: n = {}: {} of {} replicates failed",
                s.n,
                s.failed_replicates.len(),
                cfg.replicates
            );
        }
    }
    write_json(&a.out, &report)
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    distribution: PathBuf,
    #[arg(long)]
    noise: PathBuf,
    /// Ascending sizes, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "100,200,400,800")]
    n_grid: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "MDSCLT_THREADS")]
    threads: Option<usize>,
}

#[derive(Serialize)]
struct SizeDiagnostics {
    n: usize,
    growth: GrowthCheck,
    decomposition: DecompositionSummary,
}

#[derive(Serialize)]
struct DiagnoseOutput<'a> {
    command: &'static str,
    distribution: &'a DistributionSpec,
    noise: &'a NoiseSpec,
    d: usize,
    replicates: usize,
    seed: u64,
    bounds: BoundTable,
    per_n: Vec<SizeDiagnostics>,
}

pub fn diagnose(a: DiagnoseArgs) -> Result<()> {
    let spec: DistributionSpec = read_json(&a.distribution)?;
    spec.validate()?;
    let noise_spec: NoiseSpec = read_json(&a.noise)?;
    let noise = noise_spec.build()?;
    let pool = thread_pool(a.threads)?;
    let bounds = pool.install(|| bound_checks(&spec, noise.as_ref(), &a.n_grid, a.replicates, a.d, a.seed))?;
    let mut per_n = Vec::with_capacity(a.n_grid.len());
    for &n in &a.n_grid {
        let cloud = sample(&spec, n, derive_seed(&[a.seed, n as u64, 2]))?;
        let dist = cloud.distances();
        let p = noise.perturb(&dist, derive_seed(&[a.seed, n as u64, 3]))?;
        let b = double_center(&cloud.squared_distances())?;
        let b_hat = double_center(&p.delta_sq)?;
        per_n.push(SizeDiagnostics {
            n,
            growth: growth_check(&dist),
            decomposition: decompose(&b, &b_hat, a.d)?.summary(),
        });
    }
    write_json(
        &a.out,
        &DiagnoseOutput {
            command: "diagnose",
            distribution: &spec,
            noise: &noise_spec,
            d: a.d,
            replicates: a.replicates,
            seed: a.seed,
            bounds,
            per_n,
        },
    )
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Report JSON written by `mc-run`.
    #[arg(long)]
    report: PathBuf,
    /// One of: ellipses, scree, bias-trend, bound-ratios.
    #[arg(long)]
    kind: String,
    /// Size to plot; defaults to the largest in the report.
    #[arg(long)]
    n: Option<usize>,
    /// Probability mass inside the ellipses.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long)]
    out: PathBuf,
}

pub fn plot(a: PlotArgs) -> Result<()> {
    let report: McReport = read_json(&a.report)?;
    let kind = plot_registry().build(&a.kind, &serde_json::json!({ "level": a.level }))?;
    let svg = kind.render(&report, a.n)?;
    mdsclt::io::atomic_write(&a.out, svg.as_bytes())
}
