use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::normality::{normality_check, NormalityResult, MIN_NORMALITY_SAMPLES};
use crate::clt::{
    align, bound_checks, decompose, hetero_theory_cov, integrated_cov, principal_frame, theory_cov,
    BoundTable, DecompositionSummary,
};
use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::linalg::double_center;
use crate::noise::{CltKernel, NoiseModel};
use crate::points::{moments, sample};
use crate::rng::derive_seed;
use crate::serde_rows::{from_rows, to_rows};

/// Matrix stored as an array of rows.
pub type Rows = Vec<Vec<f64>>;

/// Per-class aggregates at one `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: usize,
    /// Rows per replicate in this class.
    pub count: usize,
    /// `center_scale · (x_k − Z̄)`, the value aligned rows concentrate around.
    pub location: Vec<f64>,
    /// Average over replicates of the class mean of aligned rows.
    pub empirical_mean: Vec<f64>,
    /// `√n · (empirical_mean − location)`.
    pub mean_deviation: Vec<f64>,
    /// `‖empirical_mean − location‖`.
    pub bias: f64,
    /// `√(tr(pooled_cov) / (n · count))`: spread of one replicate's class mean
    /// if its rows fluctuated independently at the limiting rate.
    pub clt_se: f64,
    /// Standard error of `empirical_mean` from the spread across replicates.
    pub mc_se: f64,
    /// Average over replicates of the within-class covariance of `√n`-scaled rows.
    pub empirical_cov: Rows,
    /// Across-replicate variance of each upper-triangle entry of the within-class covariance.
    pub cov_entry_variances: Vec<f64>,
    /// Covariance of `√n`-scaled deviations pooled over replicates.
    pub pooled_cov: Rows,
    /// Covariance across replicates of the first row of the class.
    pub designated_row_cov: Rows,
    pub theoretical_cov: Option<Rows>,
    /// `‖pooled_cov − theoretical_cov‖_F / ‖theoretical_cov‖_F`.
    pub theory_rel_error: Option<f64>,
    pub normality: Option<NormalityResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedReplicate {
    pub replicate: usize,
    pub error: String,
}

/// First-class covariance in the principal-axes frame of the latent covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Block {
    pub class: usize,
    pub rotation: Rows,
    pub empirical_cov: Rows,
    pub cov_entry_variances: Vec<f64>,
    pub theoretical_cov: Option<Rows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressSummary {
    pub max_relative_increase: f64,
    pub mean_iterations: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub n: usize,
    pub replicates: usize,
    pub failed_replicates: Vec<FailedReplicate>,
    /// At most 1% of replicates failed.
    pub valid: bool,
    pub center_scale: f64,
    pub per_class: Vec<ClassReport>,
    /// Leading eigenvalues from the first replicate.
    pub scree: Option<Vec<f64>>,
    pub decomposition: Option<DecompositionSummary>,
    pub table1: Option<Table1Block>,
    pub stress: Option<StressSummary>,
    pub warning_count: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub n: usize,
    pub biases: Vec<f64>,
    pub clt_se: Vec<f64>,
    pub ratios: Vec<f64>,
    pub mean_bias: f64,
}

/// Whether class-mean bias persists as `n` grows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroBiasReport {
    pub per_n: Vec<BiasRow>,
    pub threshold: f64,
    /// Every class at the largest `n` has bias above `threshold` standard errors.
    pub exceeds_threshold: bool,
    /// The class-averaged bias at the largest `n` exceeds half its value at the smallest.
    pub persists: bool,
}

pub const BIAS_SE_THRESHOLD: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub config: ExperimentConfig,
    pub per_n: Vec<SizeReport>,
    pub bounds: Option<BoundTable>,
    pub hetero_bias: Option<HeteroBiasReport>,
}

impl McReport {
    pub fn size(&self, n: usize) -> Option<&SizeReport> {
        self.per_n.iter().find(|s| s.n == n)
    }
}

struct Outcome {
    aligned: DMatrix<f64>,
    deviations: DMatrix<f64>,
    labels: Vec<usize>,
    scree: Option<Vec<f64>>,
    decomposition: Option<DecompositionSummary>,
    stress: Option<(f64, usize)>,
    warnings: Vec<String>,
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    noise: &'a dyn NoiseModel,
    estimator: &'a dyn Estimator,
}

/// Seed for one stage of one replicate.
pub fn replicate_seed(seed: u64, n: usize, replicate: usize, stage: u64) -> u64 {
    derive_seed(&[seed, n as u64, replicate as u64, stage])
}

fn run_replicate(ctx: &Context, n: usize, r: usize) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let cloud = sample(&cfg.distribution, n, replicate_seed(cfg.seed, n, r, 0))?;
    let dist = cloud.distances();
    let pert = ctx.noise.perturb(&dist, replicate_seed(cfg.seed, n, r, 1))?;
    let est = ctx.estimator.estimate(&pert, cfg.d, r == 0)?;
    let target = cloud.centered() * ctx.noise.center_scale();
    let alignment = align(&est.config, &target)?;
    let aligned = &est.config * &alignment.rotation;
    let deviations = (&aligned - &target) * (n as f64).sqrt();
    let mut warnings = est.warnings.clone();
    if alignment.degenerate {
        warnings.push("degenerate alignment".to_owned());
    }
    let decomposition = if cfg.checks.decomposition && r == 0 {
        let b = double_center(&cloud.squared_distances())?;
        let b_hat = double_center(&pert.delta_sq)?;
        Some(decompose(&b, &b_hat, cfg.d)?.summary())
    } else {
        None
    };
    let stress = est.stress_history.as_ref().map(|h| {
        let inc = h
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0].abs().max(1.0))
            .fold(0.0, f64::max);
        (inc, h.len().saturating_sub(1))
    });
    Ok(Outcome {
        aligned,
        deviations,
        labels: cloud.labels.unwrap_or_else(|| vec![0; n]),
        scree: if r == 0 { est.eigenvalues } else { None },
        decomposition,
        stress,
        warnings,
    })
}

/// Runs every size in `cfg.n_list`.
pub fn run(cfg: &ExperimentConfig) -> Result<McReport> {
    cfg.validate()?;
    let noise = cfg.noise_model()?;
    let estimator = cfg.estimator()?;
    let ctx = Context {
        cfg,
        noise: noise.as_ref(),
        estimator: estimator.as_ref(),
    };
    let mut per_n = Vec::with_capacity(cfg.n_list.len());
    for &n in &cfg.n_list {
        per_n.push(run_size(&ctx, n)?);
    }
    let bounds = if cfg.checks.bounds {
        Some(bound_checks(
            &cfg.distribution,
            noise.as_ref(),
            &cfg.n_list,
            cfg.replicates,
            cfg.d,
            derive_seed(&[cfg.seed, 0x626f_756e_6473]),
        )?)
    } else {
        None
    };
    let hetero_bias = cfg.checks.hetero_bias.then(|| bias_report(&per_n));
    Ok(McReport {
        config: cfg.clone(),
        per_n,
        bounds,
        hetero_bias,
    })
}

/// Runs the configuration with the bias check enabled and returns only that section.
pub fn hetero_bias_experiment(cfg: &ExperimentConfig) -> Result<HeteroBiasReport> {
    let mut cfg = cfg.clone();
    cfg.checks.hetero_bias = true;
    Ok(run(&cfg)?.hetero_bias.expect("bias check enabled"))
}

fn bias_report(per_n: &[SizeReport]) -> HeteroBiasReport {
    let rows: Vec<BiasRow> = per_n
        .iter()
        .map(|s| {
            let biases: Vec<f64> = s.per_class.iter().map(|c| c.bias).collect();
            let clt_se: Vec<f64> = s.per_class.iter().map(|c| c.clt_se).collect();
            let ratios = biases.iter().zip(&clt_se).map(|(b, se)| b / se).collect();
            let mean_bias = biases.iter().sum::<f64>() / biases.len().max(1) as f64;
            BiasRow {
                n: s.n,
                biases,
                clt_se,
                ratios,
                mean_bias,
            }
        })
        .collect();
    let exceeds_threshold = rows
        .last()
        .is_some_and(|r| !r.ratios.is_empty() && r.ratios.iter().all(|&x| x > BIAS_SE_THRESHOLD));
    let persists = match (rows.first(), rows.last()) {
        (Some(f), Some(l)) => l.mean_bias > 0.5 * f.mean_bias,
        _ => false,
    };
    HeteroBiasReport {
        per_n: rows,
        threshold: BIAS_SE_THRESHOLD,
        exceeds_threshold,
        persists,
    }
}

fn covariance(rows: &[DVector<f64>]) -> DMatrix<f64> {
    let d = rows.first().map_or(0, |r| r.len());
    let m = rows.len();
    if m < 2 {
        return DMatrix::zeros(d, d);
    }
    let mean = rows.iter().fold(DVector::zeros(d), |acc, r| acc + r) / m as f64;
    let mut acc = DMatrix::zeros(d, d);
    for r in rows {
        let v = r - &mean;
        acc += &v * v.transpose();
    }
    crate::linalg::symmetrize(&(acc / (m as f64 - 1.0)))
}

fn upper_entries(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect()
}

fn entry_variances(mats: &[DMatrix<f64>]) -> Vec<f64> {
    let entries: Vec<Vec<f64>> = mats.iter().map(upper_entries).collect();
    let k = entries.first().map_or(0, Vec::len);
    let r = entries.len() as f64;
    (0..k)
        .map(|e| {
            let mean = entries.iter().map(|v| v[e]).sum::<f64>() / r;
            entries.iter().map(|v| (v[e] - mean).powi(2)).sum::<f64>() / (r - 1.0).max(1.0)
        })
        .collect()
}

/// Limiting covariance per class at size `n`, when one is available.
fn class_theory(
    cfg: &ExperimentConfig,
    noise: &dyn NoiseModel,
    labels: &[usize],
    n: usize,
) -> Result<Vec<Option<DMatrix<f64>>>> {
    let k = cfg.distribution.num_classes();
    let mixture = cfg.distribution.locations().is_some();
    if let Some(rule) = noise.sigma_rule() {
        let mut out = Vec::with_capacity(k);
        for class in 0..k {
            let rows: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
            let step = (rows.len() / 32).max(1);
            let picks: Vec<usize> = rows.iter().copied().step_by(step).collect();
            let mut acc = DMatrix::zeros(cfg.d, cfg.d);
            for &i in &picks {
                let h = hetero_theory_cov(&cfg.distribution, &|a, b| rule.sigma(a, b, n), i, n)?;
                acc += h.implied;
            }
            out.push(Some(acc / picks.len().max(1) as f64));
        }
        return Ok(out);
    }
    match noise.clt_kernel() {
        CltKernel::Unavailable => Ok(vec![None; k]),
        _ if mixture => Ok(theory_cov(&cfg.distribution, noise)?
            .per_class
            .into_iter()
            .map(|c| Some(c.sigma))
            .collect()),
        _ => Ok(vec![Some(integrated_cov(
            &cfg.distribution,
            noise,
            cfg.mc_draws,
            derive_seed(&[cfg.seed, 0x7468_656f_7279]),
        )?)]),
    }
}

fn run_size(ctx: &Context, n: usize) -> Result<SizeReport> {
    let cfg = ctx.cfg;
    let outcomes: Vec<Result<Outcome>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| run_replicate(ctx, n, r))
        .collect();

    let mut ok: Vec<(usize, Outcome)> = Vec::with_capacity(outcomes.len());
    let mut failed = Vec::new();
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(o) => ok.push((r, o)),
            Err(e) => failed.push(FailedReplicate {
                replicate: r,
                error: e.to_string(),
            }),
        }
    }
    let valid = failed.len() * 100 <= cfg.replicates && !ok.is_empty();
    let mut warnings: Vec<String> = Vec::new();
    let mut warning_count = 0;
    for (r, o) in &ok {
        if !o.warnings.is_empty() {
            warning_count += 1;
            if warnings.len() < 10 {
                warnings.push(format!("replicate {r}: {}", o.warnings.join("; ")));
            }
        }
    }
    let center_scale = ctx.noise.center_scale();

    if let Some(dir) = &cfg.sample_dump_dir {
        dump_samples(dir, n, &ok)?;
    }

    let mut report = SizeReport {
        n,
        replicates: ok.len(),
        failed_replicates: failed,
        valid,
        center_scale,
        per_class: Vec::new(),
        scree: ok.iter().find(|(r, _)| *r == 0).and_then(|(_, o)| o.scree.clone()),
        decomposition: ok.iter().find_map(|(_, o)| o.decomposition.clone()),
        table1: None,
        stress: None,
        warning_count,
        warnings,
    };
    if ok.len() < 2 {
        return Ok(report);
    }
    if ok[0].1.stress.is_some() {
        let incs: Vec<(f64, usize)> = ok.iter().filter_map(|(_, o)| o.stress).collect();
        report.stress = Some(StressSummary {
            max_relative_increase: incs.iter().map(|s| s.0).fold(0.0, f64::max),
            mean_iterations: incs.iter().map(|s| s.1 as f64).sum::<f64>() / incs.len() as f64,
        });
    }

    let d = cfg.d;
    let nf = n as f64;
    let reps = ok.len() as f64;
    let labels = ok[0].1.labels.clone();
    let k = cfg.distribution.num_classes();
    let theory = if cfg.checks.clt || cfg.checks.table1 {
        class_theory(cfg, ctx.noise, &labels, n)?
    } else {
        vec![None; k]
    };
    let z_bar = match cfg.distribution.locations() {
        Some(locs) => {
            let mut acc = DVector::zeros(d);
            for &l in &labels {
                acc += DVector::from_column_slice(&locs[l]);
            }
            acc / nf
        }
        None => DVector::zeros(d),
    };

    let mut within_by_class: Vec<Vec<DMatrix<f64>>> = vec![Vec::new(); k];
    for class in 0..k {
        let members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            return Err(Error::invalid(format!("class {class} is empty at n = {n}")));
        }
        let location = match cfg.distribution.locations() {
            Some(locs) => (DVector::from_column_slice(&locs[class]) - &z_bar) * center_scale,
            None => DVector::zeros(d),
        };
        let mut class_means = Vec::with_capacity(ok.len());
        let mut within = Vec::with_capacity(ok.len());
        let mut designated = Vec::with_capacity(ok.len());
        let mut pooled = DMatrix::zeros(ok.len() * members.len(), d);
        let mut row = 0;
        for (_, o) in &ok {
            let mut mean = DVector::zeros(d);
            let mut devs = Vec::with_capacity(members.len());
            for &i in &members {
                mean += o.aligned.row(i).transpose();
                let dev = o.deviations.row(i).transpose();
                pooled.row_mut(row).copy_from(&dev.transpose());
                row += 1;
                devs.push(dev);
            }
            class_means.push(mean / members.len() as f64);
            within.push(covariance(&devs));
            designated.push(devs[0].clone());
        }
        let empirical_mean = class_means.iter().fold(DVector::zeros(d), |a, m| a + m) / reps;
        let mean_cov = covariance(&class_means);
        let mc_se = (mean_cov.trace() / reps).sqrt();
        let pooled_rows: Vec<DVector<f64>> = pooled.row_iter().map(|r| r.transpose()).collect();
        let pooled_cov = covariance(&pooled_rows);
        let empirical_cov = within.iter().fold(DMatrix::zeros(d, d), |a, m| a + m) / reps;
        let th = theory[class].clone();
        let theory_rel_error = th.as_ref().map(|t| {
            let tn = t.norm();
            (&pooled_cov - t).norm() / if tn > 0.0 { tn } else { 1.0 }
        });
        let normality = if cfg.checks.clt && pooled.nrows() >= MIN_NORMALITY_SAMPLES {
            normality_check(&pooled).ok()
        } else {
            None
        };
        let bias = (&empirical_mean - &location).norm();
        report.per_class.push(ClassReport {
            class,
            count: members.len(),
            location: location.as_slice().to_vec(),
            empirical_mean: empirical_mean.as_slice().to_vec(),
            mean_deviation: ((&empirical_mean - &location) * nf.sqrt()).as_slice().to_vec(),
            bias,
            clt_se: (pooled_cov.trace() / (nf * members.len() as f64)).sqrt(),
            mc_se,
            empirical_cov: to_rows(&empirical_cov),
            cov_entry_variances: entry_variances(&within),
            pooled_cov: to_rows(&pooled_cov),
            designated_row_cov: to_rows(&covariance(&designated)),
            theoretical_cov: th.as_ref().map(to_rows),
            theory_rel_error,
            normality,
        });
        within_by_class[class] = within;
    }

    if cfg.checks.table1 {
        let mom = moments(&cfg.distribution)?;
        let reference = cfg
            .table1_reference
            .as_ref()
            .map(|r| from_rows(r).map_err(Error::invalid))
            .transpose()?;
        let th0 = theory[0].clone();
        let frame_theory = th0.clone().unwrap_or_else(|| mom.xi.clone());
        let rot = principal_frame(&mom.xi, &frame_theory, reference.as_ref())?;
        let rotated: Vec<DMatrix<f64>> = within_by_class[0]
            .iter()
            .map(|c| &rot * c * rot.transpose())
            .collect();
        let mean = rotated.iter().fold(DMatrix::zeros(d, d), |a, m| a + m) / reps;
        report.table1 = Some(Table1Block {
            class: 0,
            rotation: to_rows(&rot),
            empirical_cov: to_rows(&mean),
            cov_entry_variances: entry_variances(&rotated),
            theoretical_cov: th0.map(|t| to_rows(&(&rot * t * rot.transpose()))),
        });
    }
    Ok(report)
}

fn dump_samples(dir: &std::path::Path, n: usize, ok: &[(usize, Outcome)]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let d = ok.first().map_or(0, |(_, o)| o.aligned.ncols());
    let mut out = String::from("replicate,row,class");
    for c in 0..d {
        let _ = write!(out, ",x{}", c + 1);
    }
    out.push('\n');
    for (r, o) in ok {
        for i in 0..o.aligned.nrows() {
            let _ = write!(out, "{r},{i},{}", o.labels[i]);
            for c in 0..d {
                let _ = write!(out, ",{:?}", o.aligned[(i, c)]);
            }
            out.push('\n');
        }
    }
    crate::io::atomic_write(&dir.join(format!("aligned_n{n}.csv")), out.as_bytes())
}
