use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest order accepted by [`svd_small`].
pub const MAX_SMALL_ORDER: usize = 32;

/// `m = left · diag(singular_values) · rightᵀ` for a small square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallSvd {
    pub left: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub right: DMatrix<f64>,
}

impl SmallSvd {
    /// The orthogonal polar factor `left · rightᵀ`.
    pub fn polar(&self) -> DMatrix<f64> {
        &self.left * self.right.transpose()
    }
}

pub fn svd_small(m: &DMatrix<f64>) -> Result<SmallSvd> {
    let d = m.nrows();
    if !m.is_square() || d == 0 || d > MAX_SMALL_ORDER {
        return Err(Error::dim(format!(
            "svd_small expects a square matrix of order 1..={MAX_SMALL_ORDER}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left vectors requested");
    let vt = svd.v_t.expect("right vectors requested");
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let left = DMatrix::from_fn(d, d, |r, c| u[(r, order[c])]);
    let right = DMatrix::from_fn(d, d, |r, c| vt[(order[c], r)]);
    let singular_values = order.iter().map(|&i| s[i].max(0.0)).collect();
    Ok(SmallSvd {
        left,
        singular_values,
        right,
    })
}
