//! Raw-stress MDS by iterative majorization.
//!
//! Non-negative dissimilarities use the Guttman transform. A negative
//! dissimilarity turns its pair term into `+2|δ|‖x_i − x_j‖`, which is majorized
//! by `|δ|(‖x_i − x_j‖² + d_ij(Y)²) / d_ij(Y)`. The resulting quadratic surrogate
//! is minimized approximately by preconditioned conjugate gradients started from
//! the current configuration, so every update still lowers the surrogate.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cmds::{embed_with, EmbedOptions};
use crate::error::{Error, Result};
use crate::linalg::{center_columns, SymmetricMatrix};
use crate::rng::CounterRng;
use crate::serde_rows;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StressInit {
    Cmds,
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StressOptions {
    pub init: StressInit,
    pub max_iter: usize,
    /// Stop once the relative stress decrease falls below this.
    pub tol: f64,
    /// Conjugate-gradient steps per update when some dissimilarities are negative.
    pub inner_iter: usize,
}

impl Default for StressOptions {
    fn default() -> Self {
        Self {
            init: StressInit::Cmds,
            max_iter: 500,
            tol: 1e-8,
            inner_iter: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressState {
    #[serde(with = "serde_rows::matrix")]
    pub config: DMatrix<f64>,
    pub stress: f64,
    pub iteration: usize,
    /// Stress of the initial configuration followed by one value per update.
    pub history: Vec<f64>,
    pub converged: bool,
    /// Some update met two coincident points.
    pub coincident_points: bool,
}

impl StressState {
    /// Largest relative increase between consecutive history entries (0 when monotone).
    pub fn max_relative_increase(&self) -> f64 {
        self.history
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0].abs().max(1.0))
            .fold(0.0, f64::max)
    }
}

/// `Σ_{i<j} (δ_ij − ‖X_i − X_j‖)²`.
pub fn raw_stress(config: &DMatrix<f64>, delta: &SymmetricMatrix) -> Result<f64> {
    if config.nrows() != delta.n() {
        return Err(Error::dim(format!(
            "configuration has {} rows, dissimilarities have order {}",
            config.nrows(),
            delta.n()
        )));
    }
    let n = delta.n();
    let mut acc = Compensated::default();
    for j in 0..n {
        for i in 0..j {
            let r = delta.get(i, j) - row_distance(config, i, j);
            acc.add(r * r);
        }
    }
    Ok(acc.value())
}

fn row_distance(x: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    (0..x.ncols()).map(|c| (x[(i, c)] - x[(j, c)]).powi(2)).sum::<f64>().sqrt()
}

/// Neumaier summation.
#[derive(Default)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Row-major configuration with cached pairwise distances.
struct Workspace {
    n: usize,
    d: usize,
    delta: Vec<f64>,
    has_negative: bool,
    dist: Vec<f64>,
    floor: f64,
}

impl Workspace {
    fn new(delta: &SymmetricMatrix, d: usize) -> Self {
        let n = delta.n();
        let mut flat = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                flat[i * n + j] = delta.get(i, j);
            }
        }
        let scale = flat.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        Self {
            n,
            d,
            has_negative: flat.iter().any(|&v| v < 0.0),
            delta: flat,
            dist: vec![0.0; n * n],
            floor: 1e-12 * scale.max(f64::MIN_POSITIVE),
        }
    }

    fn update_distances(&mut self, x: &[f64]) -> f64 {
        let (n, d) = (self.n, self.d);
        let mut acc = Compensated::default();
        for i in 0..n {
            for j in i + 1..n {
                let mut s = 0.0;
                for c in 0..d {
                    let t = x[i * d + c] - x[j * d + c];
                    s += t * t;
                }
                let dij = s.sqrt();
                self.dist[i * n + j] = dij;
                self.dist[j * n + i] = dij;
                let r = self.delta[i * n + j] - dij;
                acc.add(r * r);
            }
        }
        acc.value()
    }

    /// `B(Y) Y`; also reports whether some positive-weight pair had coincident points.
    fn guttman_rhs(&self, y: &[f64]) -> (Vec<f64>, bool) {
        let (n, d) = (self.n, self.d);
        let mut out = vec![0.0; n * d];
        let mut coincident = false;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let pos = self.delta[i * n + j].max(0.0);
                if pos == 0.0 {
                    continue;
                }
                let dij = self.dist[i * n + j];
                if dij <= self.floor {
                    coincident = true;
                    continue;
                }
                let w = pos / dij;
                for c in 0..d {
                    out[i * d + c] += w * (y[i * d + c] - y[j * d + c]);
                }
            }
        }
        (out, coincident)
    }

    /// Pair weights `1 + |δ⁻| / d_ij(Y)` of the surrogate's quadratic term.
    fn quadratic_weights(&self) -> (Vec<f64>, bool) {
        let n = self.n;
        let mut a = vec![1.0; n * n];
        let mut coincident = false;
        for i in 0..n {
            a[i * n + i] = 0.0;
            for j in 0..n {
                let neg = (-self.delta[i * n + j]).max(0.0);
                if i != j && neg > 0.0 {
                    let dij = self.dist[i * n + j];
                    if dij <= self.floor {
                        coincident = true;
                    }
                    a[i * n + j] += neg / dij.max(self.floor);
                }
            }
        }
        (a, coincident)
    }
}

fn laplacian_apply(a: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for i in 0..n {
        let row = &a[i * n..(i + 1) * n];
        let xi = x[i];
        let mut s = 0.0;
        for j in 0..n {
            s += row[j] * (xi - x[j]);
        }
        out[i] = s;
    }
    out
}

/// A few Jacobi-preconditioned CG steps on `L x = b` from `x0`.
fn pcg(a: &[f64], n: usize, b: &[f64], x0: &[f64], steps: usize) -> Vec<f64> {
    let diag: Vec<f64> = (0..n).map(|i| a[i * n..(i + 1) * n].iter().sum()).collect();
    let mut x = x0.to_vec();
    let lx = laplacian_apply(a, n, &x);
    let mut r: Vec<f64> = b.iter().zip(&lx).map(|(bi, li)| bi - li).collect();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for _ in 0..steps {
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm <= 1e-12 * b_norm.max(f64::MIN_POSITIVE) {
            break;
        }
        let lp = laplacian_apply(a, n, &p);
        let plp: f64 = p.iter().zip(&lp).map(|(a, b)| a * b).sum();
        if !(plp > 0.0) {
            break;
        }
        let alpha = rz / plp;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * lp[i];
        }
        z = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    x
}

fn center_flat(x: &mut [f64], n: usize, d: usize) {
    for c in 0..d {
        let mean = (0..n).map(|i| x[i * d + c]).sum::<f64>() / n as f64;
        for i in 0..n {
            x[i * d + c] -= mean;
        }
    }
}

fn initial_config(delta: &SymmetricMatrix, d: usize, init: StressInit) -> Result<DMatrix<f64>> {
    let n = delta.n();
    match init {
        StressInit::Cmds => {
            let opts = EmbedOptions {
                allow_deficient: true,
                extra_eigenvalues: 0,
            };
            Ok(embed_with(&delta.squared(), d, &opts)?.config)
        }
        StressInit::Random { seed } => {
            let scale = delta.as_matrix().iter().map(|v| v.abs()).sum::<f64>()
                / ((n * n.saturating_sub(1)).max(1) as f64);
            let mut rng = CounterRng::new(seed);
            let mut x = DMatrix::zeros(n, d);
            for i in 0..n {
                rng.seek(i as u64, 0);
                for c in 0..d {
                    x[(i, c)] = scale * (2.0 * rng.next_draw().uniform(0) - 1.0);
                }
            }
            Ok(center_columns(&x))
        }
    }
}

/// Minimizes raw stress in `d` dimensions.
pub fn minimize_stress(delta: &SymmetricMatrix, d: usize, opts: &StressOptions) -> Result<StressState> {
    delta.check_hollow()?;
    if !delta.is_finite() {
        return Err(Error::invalid("dissimilarities must be finite"));
    }
    let n = delta.n();
    if d == 0 || d >= n {
        return Err(Error::invalid(format!("d must be in 1..{n}, got {d}")));
    }
    let init = initial_config(delta, d, opts.init)?;
    let mut ws = Workspace::new(delta, d);
    let mut y: Vec<f64> = (0..n * d).map(|k| init[(k / d, k % d)]).collect();
    center_flat(&mut y, n, d);
    let mut stress = ws.update_distances(&y);
    let mut history = vec![stress];
    let mut coincident_points = false;
    let mut converged = stress == 0.0;
    let mut iteration = 0;

    while !converged && iteration < opts.max_iter {
        iteration += 1;
        let (rhs, hit) = ws.guttman_rhs(&y);
        coincident_points |= hit;
        let mut x = if ws.has_negative {
            let (a, hit) = ws.quadratic_weights();
            coincident_points |= hit;
            let mut x = vec![0.0; n * d];
            for c in 0..d {
                let b: Vec<f64> = (0..n).map(|i| rhs[i * d + c]).collect();
                let x0: Vec<f64> = (0..n).map(|i| y[i * d + c]).collect();
                let sol = pcg(&a, n, &b, &x0, opts.inner_iter);
                for i in 0..n {
                    x[i * d + c] = sol[i];
                }
            }
            x
        } else {
            rhs.iter().map(|v| v / n as f64).collect()
        };
        center_flat(&mut x, n, d);
        let next = ws.update_distances(&x);
        history.push(next);
        let decrease = (stress - next) / stress.max(f64::MIN_POSITIVE);
        y = x;
        stress = next;
        if decrease < opts.tol || stress == 0.0 {
            converged = true;
        }
    }

    Ok(StressState {
        config: DMatrix::from_fn(n, d, |i, c| y[i * d + c]),
        stress,
        iteration,
        history,
        converged,
        coincident_points,
    })
}
