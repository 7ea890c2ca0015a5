use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense symmetric matrix whose storage is exactly symmetric.
///
/// Every constructor mirrors one triangle onto the other, so `get(i, j)`
/// and `get(j, i)` are bit-identical. The `hollow` flag records that the
/// diagonal is known to be zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    data: DMatrix<f64>,
    hollow: bool,
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            data: DMatrix::zeros(n, n),
            hollow: true,
        }
    }

    /// Builds the matrix from `f(i, j)` evaluated on the upper triangle (`i <= j`).
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let v = f(i, j);
                data[(i, j)] = v;
                data[(j, i)] = v;
            }
        }
        Self {
            data,
            hollow: false,
        }
    }

    /// Builds a hollow matrix from `f(i, j)` evaluated for `i < j`.
    pub fn hollow_from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..j {
                let v = f(i, j);
                data[(i, j)] = v;
                data[(j, i)] = v;
            }
        }
        Self { data, hollow: true }
    }

    /// Copies the upper triangle of a square matrix onto the lower one.
    pub fn from_upper(m: &DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dim(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self::from_upper_fn(m.nrows(), |i, j| m[(i, j)]))
    }

    /// Accepts a square matrix whose asymmetry is at most `rel_tol` relative to its
    /// largest entry, then symmetrizes by averaging.
    pub fn from_dense(m: DMatrix<f64>, rel_tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dim(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        let n = m.nrows();
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..j {
                worst = worst.max((m[(i, j)] - m[(j, i)]).abs() / scale);
            }
        }
        if worst > rel_tol {
            return Err(Error::NotSymmetric(worst));
        }
        Ok(Self::from_upper_fn(n, |i, j| {
            if i == j {
                m[(i, i)]
            } else {
                0.5 * (m[(i, j)] + m[(j, i)])
            }
        }))
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn is_hollow(&self) -> bool {
        self.hollow
    }

    /// Verifies a zero diagonal and sets the hollow flag.
    pub fn into_hollow(mut self) -> Result<Self> {
        self.check_hollow()?;
        self.hollow = true;
        Ok(self)
    }

    /// Errors unless every diagonal entry is exactly zero.
    pub fn check_hollow(&self) -> Result<()> {
        for i in 0..self.n() {
            let v = self.data[(i, i)];
            if v != 0.0 {
                return Err(Error::NotHollow { index: i, value: v });
            }
        }
        Ok(())
    }

    /// Applies `f` to every entry. The hollow flag survives when `f(0) == 0`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let hollow = self.hollow && f(0.0) == 0.0;
        Self {
            data: self.data.map(f),
            hollow,
        }
    }

    /// Entrywise square.
    pub fn squared(&self) -> Self {
        self.map(|v| v * v)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            data: &self.data - &other.data,
            hollow: self.hollow && other.hollow,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            data: &self.data + &other.data,
            hollow: self.hollow && other.hollow,
        })
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.n() != other.n() {
            return Err(Error::dim(format!(
                "matrices of order {} and {}",
                self.n(),
                other.n()
            )));
        }
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.norm()
    }

    pub fn row_sums(&self) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.data.row_iter().map(|r| r.sum()))
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.data * x
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Returns `B = -1/2 P S P` with `P = I - 11ᵀ/n`.
pub fn double_center(sq: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let n = sq.n();
    if n < 2 {
        return Err(Error::invalid(format!(
            "double centering needs at least 2 rows, got {n}"
        )));
    }
    let m = sq.as_matrix();
    let nf = n as f64;
    let row_means: Vec<f64> = m.column_iter().map(|c| c.sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    Ok(SymmetricMatrix::from_upper_fn(n, |i, j| {
        -0.5 * (m[(i, j)] - row_means[i] - row_means[j] + grand)
    }))
}

/// Norms of a general real matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub spectral: f64,
    pub frobenius: f64,
    pub two_to_inf: f64,
}

pub fn norms(m: &DMatrix<f64>) -> Norms {
    Norms {
        spectral: spectral_norm(m),
        frobenius: m.norm(),
        two_to_inf: two_to_inf_norm(m),
    }
}

/// Largest row Euclidean norm.
pub fn two_to_inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.norm()).fold(0.0, f64::max)
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.nrows().min(m.ncols()) <= 64 {
        return m.singular_values().max();
    }
    let gram = if m.nrows() <= m.ncols() {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    let gram = SymmetricMatrix::from_upper(&gram).expect("gram matrix is square");
    super::eigen::spectral_radius(&gram).max(0.0).sqrt()
}
