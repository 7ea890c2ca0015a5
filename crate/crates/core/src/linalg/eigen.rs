use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::SymmetricMatrix;
use crate::error::{Error, Result};

/// Leading eigenpairs of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPair {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, one per value.
    pub vectors: DMatrix<f64>,
    /// Set when two returned eigenvalues, or the last returned and the next one,
    /// are closer than `1e-10 · ‖m‖`.
    pub degenerate: bool,
}

impl SpectralPair {
    pub fn k(&self) -> usize {
        self.values.len()
    }

    /// The first `k` pairs.
    pub fn truncate(&self, k: usize) -> SpectralPair {
        let k = k.min(self.k());
        SpectralPair {
            values: self.values[..k].to_vec(),
            vectors: self.vectors.columns(0, k).into_owned(),
            degenerate: self.degenerate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Relative residual target for the iterative solver.
    pub tol: f64,
    /// Matrices up to this order are decomposed densely.
    pub dense_cutoff: usize,
    /// Matrix-vector product budget; `None` means `10 · n`.
    pub max_matvecs: Option<usize>,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            dense_cutoff: 256,
            max_matvecs: None,
        }
    }
}

const DEGENERACY_RTOL: f64 = 1e-10;
const START_SEED: u64 = 0x6d64_735f_6c61_6e63;

/// The `k` algebraically largest eigenpairs of `m`.
pub fn top_eigs(m: &SymmetricMatrix, k: usize) -> Result<SpectralPair> {
    top_eigs_with(m, k, &EigenOptions::default())
}

pub fn top_eigs_with(m: &SymmetricMatrix, k: usize, opts: &EigenOptions) -> Result<SpectralPair> {
    let n = m.n();
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "requested {k} eigenpairs of a {n}x{n} matrix"
        )));
    }
    if !m.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let scale = m.frobenius_norm();
    let a = m.as_matrix();
    let (values, mut vectors, next) = if n <= opts.dense_cutoff || 4 * k > n {
        dense_top(a, k)
    } else {
        let budget = opts.max_matvecs.unwrap_or(10 * n);
        let op = |x: &DVector<f64>| a * x;
        lanczos_top(&op, n, k, opts.tol, budget)?
    };
    fix_signs(&mut vectors);
    let degenerate = is_degenerate(&values, next, scale);
    Ok(SpectralPair {
        values,
        vectors,
        degenerate,
    })
}

/// `max |λ|` of a symmetric matrix.
pub fn spectral_radius(m: &SymmetricMatrix) -> f64 {
    let n = m.n();
    if n == 0 {
        return 0.0;
    }
    let a = m.as_matrix();
    if n <= EigenOptions::default().dense_cutoff {
        return SymmetricEigen::new(a.clone())
            .eigenvalues
            .iter()
            .fold(0.0, |acc: f64, v| acc.max(v.abs()));
    }
    let budget = 10 * n;
    let top = lanczos_top(&|x: &DVector<f64>| a * x, n, 1, 1e-12, budget);
    let bottom = lanczos_top(&|x: &DVector<f64>| -(a * x), n, 1, 1e-12, budget);
    match (top, bottom) {
        (Ok(t), Ok(b)) => t.0[0].abs().max(b.0[0].abs()),
        _ => SymmetricEigen::new(a.clone())
            .eigenvalues
            .iter()
            .fold(0.0, |acc: f64, v| acc.max(v.abs())),
    }
}

fn is_degenerate(values: &[f64], next: Option<f64>, scale: f64) -> bool {
    let gap_tol = DEGENERACY_RTOL * scale;
    let within = values.windows(2).any(|w| (w[0] - w[1]).abs() < gap_tol);
    let beyond = match (values.last(), next) {
        (Some(&last), Some(nx)) => (last - nx).abs() < gap_tol,
        _ => false,
    };
    within || beyond
}

/// Makes the largest-magnitude entry of each column non-negative (first index on ties).
pub fn fix_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

type Partial = (Vec<f64>, DMatrix<f64>, Option<f64>);

fn descending_order(values: &DVector<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

fn dense_top(a: &DMatrix<f64>, k: usize) -> Partial {
    let eig = SymmetricEigen::new(a.clone());
    let order = descending_order(&eig.eigenvalues);
    let values = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.nrows(), k, |r, c| eig.eigenvectors[(r, order[c])]);
    let next = order.get(k).map(|&i| eig.eigenvalues[i]);
    (values, vectors, next)
}

/// Thick-restart Lanczos with full reorthogonalization.
///
/// Keeps both the basis `V` and its image `AV`, so the projected matrix and the
/// Ritz residuals are computed exactly rather than through the three-term recurrence.
fn lanczos_top(
    op: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    n: usize,
    k: usize,
    tol: f64,
    budget: usize,
) -> Result<Partial> {
    let m = n.min((2 * k + 24).max(48));
    let keep = (k + 8).max(m / 2).min(m - 2).max(k);
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut v = DMatrix::<f64>::zeros(n, m);
    let mut av = DMatrix::<f64>::zeros(n, m);

    let start = random_unit(&mut rng, n);
    v.set_column(0, &start);
    let mut filled = 0usize;
    let mut matvecs = 0usize;

    loop {
        // Extend the basis to m columns.
        let mut j = filled;
        while j < m {
            let col = op(&v.column(j).into_owned());
            matvecs += 1;
            av.set_column(j, &col);
            j += 1;
            if j == m {
                break;
            }
            let next = next_basis_vector(&v, j, col, &mut rng);
            match next {
                Some(x) => v.set_column(j, &x),
                None => {
                    // Invariant subspace of full dimension n: the basis is complete.
                    break;
                }
            }
        }
        let width = j;

        let basis = v.columns(0, width);
        let image = av.columns(0, width);
        let h = basis.tr_mul(&image);
        let h = (&h + h.transpose()) * 0.5;
        let h_norm = h.norm();
        let eig = SymmetricEigen::new(h);
        let order = descending_order(&eig.eigenvalues);
        let want = k.min(width);
        let sel = DMatrix::from_fn(width, want.max(keep.min(width)), |r, c| {
            eig.eigenvectors[(r, order[c])]
        });
        let y = basis * &sel;
        let ay = image * &sel;

        let mut converged = true;
        let mut worst_residual = 0.0f64;
        for (c, &k) in order.iter().take(want).enumerate() {
            let theta = eig.eigenvalues[k];
            let r = (ay.column(c) - y.column(c) * theta).norm();
            let target = (tol * theta.abs().max(1.0)).max(1e-13 * h_norm);
            worst_residual = worst_residual.max(r / theta.abs().max(1.0));
            if r > target {
                converged = false;
            }
        }
        if converged || width == n {
            let values = (0..k).map(|c| eig.eigenvalues[order[c]]).collect();
            let vectors = y.columns(0, k).into_owned();
            let next = order.get(k).map(|&i| eig.eigenvalues[i]);
            return Ok((values, vectors, next));
        }
        if matvecs >= budget {
            return Err(Error::NoConvergence {
                matvecs,
                residual: worst_residual,
            });
        }

        // Thick restart: keep the leading Ritz vectors plus the continuation direction.
        let keep_now = keep.min(width - 1);
        let residual = orthogonalize(&v, width, av.column(width - 1).into_owned());
        v.columns_mut(0, keep_now).copy_from(&y.columns(0, keep_now));
        av.columns_mut(0, keep_now).copy_from(&ay.columns(0, keep_now));
        let cont = next_basis_vector(&v, keep_now, residual, &mut rng)
            .unwrap_or_else(|| random_orthogonal(&v, keep_now, &mut rng, n));
        v.set_column(keep_now, &cont);
        filled = keep_now;
    }
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    let x = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    let norm = x.norm();
    x / norm
}

/// Orthogonalizes `w` against the first `j` basis columns (twice) and normalizes.
/// Returns `None` when nothing is left and no fresh direction exists.
fn next_basis_vector(
    v: &DMatrix<f64>,
    j: usize,
    w: DVector<f64>,
    rng: &mut ChaCha8Rng,
) -> Option<DVector<f64>> {
    let n = v.nrows();
    let before = w.norm();
    let w = orthogonalize(v, j, w);
    let after = w.norm();
    if after > 1e-10 * before.max(f64::MIN_POSITIVE) && after > 0.0 {
        return Some(w / after);
    }
    if j >= n {
        return None;
    }
    Some(random_orthogonal(v, j, rng, n))
}

fn random_orthogonal(v: &DMatrix<f64>, j: usize, rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let w = orthogonalize(v, j, random_unit(rng, n));
        let norm = w.norm();
        if norm > 1e-8 {
            return w / norm;
        }
    }
}

fn orthogonalize(v: &DMatrix<f64>, j: usize, mut w: DVector<f64>) -> DVector<f64> {
    if j == 0 {
        return w;
    }
    let basis = v.columns(0, j);
    for _ in 0..2 {
        let h = basis.tr_mul(&w);
        w -= basis * h;
    }
    w
}
