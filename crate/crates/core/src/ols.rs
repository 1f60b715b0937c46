//! Least-squares point models.

use nalgebra::{DMatrix, DVector};

use crate::design::{DesignMatrix, ModelSpec};
use crate::error::{Error, Result};

const RANK_TOL: f64 = 1e-10;

/// Estimated coefficients of one specification on one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSet {
    pub spec: ModelSpec,
    pub labels: Vec<String>,
    pub beta: Vec<f64>,
    /// Number of observations used.
    pub observations: usize,
}

/// Solves `min ||y - X b||`. Rank-deficient designs fall back to the
/// minimum-norm solution.
pub fn ols_fit(x: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if n < 2 * p {
        return Err(Error::TooFewRows { rows: n, cols: p });
    }
    if let Some(j) = (0..p).find(|&j| x.column(j).iter().all(|&v| v == 0.0)) {
        return Err(Error::DegenerateDesign(format!("column {j} is identically zero")));
    }
    let y = DVector::from_column_slice(y);

    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let full_rank = (0..p).all(|i| r[(i, i)].abs() > RANK_TOL * scale);
    let beta = if full_rank {
        let mut qty = y.clone();
        qr.q_tr_mul(&mut qty);
        let qty = qty.rows(0, p).into_owned();
        r.solve_upper_triangular(&qty)
            .ok_or_else(|| Error::DegenerateDesign("singular triangular factor".into()))?
    } else {
        let svd = x.clone().svd(true, true);
        let eps = RANK_TOL * svd.singular_values.max();
        svd.solve(&y, eps)
            .map_err(|e| Error::DegenerateDesign(e.to_string()))?
    };
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::DegenerateDesign("non-finite coefficients".into()));
    }
    Ok(beta.iter().copied().collect())
}

/// Fits a specification on the given sample days.
pub fn fit_spec(design: &DesignMatrix, days: &[usize]) -> Result<CoefficientSet> {
    design.check_days(days)?;
    let x = design.matrix(days);
    let y = design.targets(days);
    Ok(CoefficientSet {
        spec: design.spec(),
        labels: design.labels(),
        beta: ols_fit(&x, &y)?,
        observations: days.len(),
    })
}

pub fn point_forecast(coef: &CoefficientSet, row: &[f64]) -> Result<f64> {
    dot(&coef.beta, row)
}

pub(crate) fn dot(beta: &[f64], row: &[f64]) -> Result<f64> {
    if beta.len() != row.len() {
        return Err(Error::ShapeMismatch {
            expected: beta.len(),
            got: row.len(),
        });
    }
    Ok(beta.iter().zip(row).map(|(b, x)| b * x).sum())
}
