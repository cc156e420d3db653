//! Collinearity and heteroskedasticity diagnostics.
//!
//! All three are built on auxiliary least-squares fits. Those use an
//! orthonormal basis grown column by column, which drops exactly collinear
//! terms instead of failing on them.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::stats::chi2_sf;
use super::RegressionError;

const COLLINEAR_TOL: f64 = 1e-9;

/// Orthonormal basis of the span of the accepted columns.
struct Basis {
    vectors: Vec<DVector<f64>>,
}

impl Basis {
    fn new() -> Self {
        Self { vectors: Vec::new() }
    }

    /// Adds `column` unless it lies in the current span. Returns whether it was kept.
    fn push(&mut self, column: &DVector<f64>) -> bool {
        let norm = column.norm();
        if norm == 0.0 {
            return false;
        }
        let mut v = column.clone();
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for q in &self.vectors {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let rest = v.norm();
        if rest <= COLLINEAR_TOL * norm {
            return false;
        }
        self.vectors.push(v / rest);
        true
    }

    fn len(&self) -> usize {
        self.vectors.len()
    }

    /// Centered R² of `y` projected onto the basis. The basis must contain
    /// the constant vector for the centering to be meaningful.
    fn r_squared(&self, y: &DVector<f64>) -> f64 {
        let mut fitted = DVector::zeros(y.len());
        for q in &self.vectors {
            fitted.axpy(q.dot(y), q, 1.0);
        }
        let mean = y.mean();
        let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
        if sst <= f64::MIN_POSITIVE {
            return 0.0;
        }
        let ssr: f64 = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    }
}

fn is_constant(col: &DVector<f64>) -> bool {
    let first = col[0];
    col.iter().all(|&v| v == first)
}

fn columns(x: &DMatrix<f64>) -> Vec<DVector<f64>> {
    x.column_iter().map(|c| c.into_owned()).collect()
}

/// Variance inflation factor of every non-intercept column: `1/(1-R²)` from
/// regressing the column on the other non-intercept columns plus a constant.
/// Perfectly collinear columns get `f64::INFINITY`.
pub fn vif(x: &DMatrix<f64>) -> Result<Vec<f64>, RegressionError> {
    let cols = columns(x);
    let regressors: Vec<usize> = (0..cols.len()).filter(|&j| !is_constant(&cols[j])).collect();
    if regressors.len() < 2 {
        return Err(RegressionError::TooFewRegressors { found: regressors.len() });
    }
    let ones = DVector::from_element(x.nrows(), 1.0);
    let mut out = Vec::with_capacity(regressors.len());
    for &j in &regressors {
        let mut basis = Basis::new();
        basis.push(&ones);
        for &o in regressors.iter().filter(|&&o| o != j) {
            basis.push(&cols[o]);
        }
        let r2 = basis.r_squared(&cols[j]);
        out.push(if 1.0 - r2 < 1e-12 { f64::INFINITY } else { 1.0 / (1.0 - r2) });
    }
    Ok(out)
}

/// A term of the White auxiliary regression, by design-column index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AuxTerm {
    Linear(usize),
    Product(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HetTest {
    /// Lagrange-multiplier statistic `n·R²` of the auxiliary regression.
    pub statistic: f64,
    pub p_value: f64,
    pub df: usize,
    /// Auxiliary terms dropped as collinear with earlier ones.
    pub dropped: Vec<AuxTerm>,
}

fn lm_test(u: &DVector<f64>, terms: &[(AuxTerm, DVector<f64>)]) -> Result<HetTest, RegressionError> {
    let n = u.len();
    let mut basis = Basis::new();
    basis.push(&DVector::from_element(n, 1.0));
    let mut dropped = Vec::new();
    for (term, col) in terms {
        if !basis.push(col) {
            dropped.push(*term);
        }
    }
    let df = basis.len() - 1;
    if n <= basis.len() {
        return Err(RegressionError::TooFewRows { found: n, needed: basis.len() + 1 });
    }
    let statistic = n as f64 * basis.r_squared(u);
    Ok(HetTest {
        statistic,
        p_value: chi2_sf(statistic, df),
        df,
        dropped,
    })
}

fn check_dims(x: &DMatrix<f64>, residuals: &DVector<f64>) -> Result<(), RegressionError> {
    if x.nrows() != residuals.len() {
        return Err(RegressionError::DimensionMismatch {
            rows: x.nrows(),
            residuals: residuals.len(),
        });
    }
    Ok(())
}

/// Breusch–Pagan test: squared residuals regressed on the design columns.
pub fn breusch_pagan(x: &DMatrix<f64>, residuals: &DVector<f64>) -> Result<HetTest, RegressionError> {
    check_dims(x, residuals)?;
    let u = residuals.map(|e| e * e);
    let cols = columns(x);
    let terms: Vec<_> = (0..cols.len())
        .filter(|&j| !is_constant(&cols[j]))
        .map(|j| (AuxTerm::Linear(j), cols[j].clone()))
        .collect();
    lm_test(&u, &terms)
}

/// White test: squared residuals regressed on the design columns, their
/// squares and pairwise products.
pub fn white_test(x: &DMatrix<f64>, residuals: &DVector<f64>) -> Result<HetTest, RegressionError> {
    check_dims(x, residuals)?;
    let u = residuals.map(|e| e * e);
    let cols = columns(x);
    let vars: Vec<usize> = (0..cols.len()).filter(|&j| !is_constant(&cols[j])).collect();
    let mut terms: Vec<_> = vars.iter().map(|&j| (AuxTerm::Linear(j), cols[j].clone())).collect();
    for (a, &i) in vars.iter().enumerate() {
        for &j in &vars[a..] {
            terms.push((AuxTerm::Product(i, j), cols[i].component_mul(&cols[j])));
        }
    }
    lm_test(&u, &terms)
}
