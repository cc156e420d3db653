//! Linear regression of early citations on dataset features.
//!
//! Predictors are standardized (population standard deviation), optional
//! quadratic terms are squares of the standardized column, and the intercept
//! is the last design column. Inference uses the normal approximation with
//! HC1 heteroskedasticity-consistent standard errors.

mod diagnostics;
mod report;
pub mod stats;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::corpus::Snapshot;
use crate::metrics::{Feature, FeatureExtractor, FeatureVector};

pub use diagnostics::{breusch_pagan, vif, white_test, AuxTerm, HetTest};
pub use report::{regression_to_csv, regression_to_json, regression_to_markdown};

/// Two-sided 95% normal quantile.
pub const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error, PartialEq)]
pub enum RegressionError {
    #[error("need at least {needed} complete observations, found {found}")]
    TooFewRows { found: usize, needed: usize },
    #[error("feature {feature} has zero variance")]
    Degenerate { feature: String },
    #[error("log(x+1) of negative value {value} at position {index}")]
    NegativeInput { index: usize, value: f64 },
    #[error("design matrix is rank deficient at column {column} ({name})")]
    RankDeficient { column: usize, name: String },
    #[error("invalid design: {0}")]
    InvalidSpec(String),
    #[error("need at least two non-intercept regressors, found {found}")]
    TooFewRegressors { found: usize },
    #[error("design has {rows} rows but {residuals} residuals")]
    DimensionMismatch { rows: usize, residuals: usize },
}

/// Subtract the mean, divide by the population standard deviation.
pub fn standardize(values: &[f64]) -> Result<Vec<f64>, RegressionError> {
    standardize_named(values, "input")
}

fn standardize_named(values: &[f64], name: &str) -> Result<Vec<f64>, RegressionError> {
    if values.len() < 2 {
        return Err(RegressionError::TooFewRows { found: values.len(), needed: 2 });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !sd.is_finite() || sd <= 1e-12 * scale || sd == 0.0 {
        return Err(RegressionError::Degenerate { feature: name.to_owned() });
    }
    Ok(values.iter().map(|v| (v - mean) / sd).collect())
}

/// Elementwise `ln(1 + x)`.
pub fn log1p(values: &[f64]) -> Result<Vec<f64>, RegressionError> {
    values
        .iter()
        .enumerate()
        .map(|(index, &value)| {
            if value < 0.0 {
                Err(RegressionError::NegativeInput { index, value })
            } else {
                Ok(value.ln_1p())
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Standardize,
    Log1p,
    Log1pStandardize,
}

impl Transform {
    fn apply(self, values: &[f64], name: &str) -> Result<Vec<f64>, RegressionError> {
        match self {
            Transform::Identity => Ok(values.to_vec()),
            Transform::Standardize => standardize_named(values, name),
            Transform::Log1p => log1p(values),
            Transform::Log1pStandardize => standardize_named(&log1p(values)?, name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignSpec {
    pub regressors: Vec<(Feature, Transform)>,
    /// Regressors whose transformed column is also entered squared.
    pub quadratic_terms: Vec<Feature>,
    pub intercept: bool,
    pub dependent: (Feature, Transform),
}

impl DesignSpec {
    /// Early-citation model: five standardized predictors, a quadratic
    /// attention term, intercept; the dependent is `log(1 + n_cit3)`
    /// evaluated one year after publication.
    pub fn paper() -> Self {
        Self {
            regressors: vec![
                (Feature::RefH3, Transform::Standardize),
                (Feature::AutMuH3, Transform::Standardize),
                (Feature::APub, Transform::Standardize),
                (Feature::NSensors, Transform::Standardize),
                (Feature::Aas3m, Transform::Standardize),
            ],
            quadratic_terms: vec![Feature::Aas3m],
            intercept: true,
            dependent: (Feature::NCit3, Transform::Log1p),
        }
    }

    pub fn validate(&self) -> Result<(), RegressionError> {
        for (i, (f, _)) in self.regressors.iter().enumerate() {
            if self.regressors[..i].iter().any(|(g, _)| g == f) {
                return Err(RegressionError::InvalidSpec(format!("duplicate regressor {f}")));
            }
        }
        for q in &self.quadratic_terms {
            if !self.regressors.iter().any(|(f, _)| f == q) {
                return Err(RegressionError::InvalidSpec(format!("quadratic term {q} is not a regressor")));
            }
        }
        Ok(())
    }

    fn features(&self) -> impl Iterator<Item = Feature> + '_ {
        self.regressors
            .iter()
            .map(|(f, _)| *f)
            .chain(std::iter::once(self.dependent.0))
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.regressors.iter().map(|(f, _)| f.name().to_owned()).collect();
        names.extend(self.quadratic_terms.iter().map(|f| format!("{f}^2")));
        if self.intercept {
            names.push("intercept".into());
        }
        names
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub columns: Vec<String>,
    /// Per input vector: whether it was a complete case.
    pub row_mask: Vec<bool>,
    pub dataset_ids: Vec<String>,
}

impl Design {
    pub fn n_obs(&self) -> usize {
        self.x.nrows()
    }
}

pub fn build_design(vectors: &[FeatureVector], spec: &DesignSpec) -> Result<Design, RegressionError> {
    spec.validate()?;
    let row_mask: Vec<bool> = vectors
        .iter()
        .map(|v| spec.features().all(|f| v.get(f).is_some()))
        .collect();
    let rows: Vec<&FeatureVector> = vectors
        .iter()
        .zip(&row_mask)
        .filter(|(_, &keep)| keep)
        .map(|(v, _)| v)
        .collect();
    if rows.len() < 2 {
        return Err(RegressionError::TooFewRows { found: rows.len(), needed: 2 });
    }
    let raw = |f: Feature| -> Vec<f64> { rows.iter().map(|v| v.get(f).unwrap()).collect() };

    let mut cols = Vec::new();
    for &(f, t) in &spec.regressors {
        cols.push(t.apply(&raw(f), f.name())?);
    }
    for q in &spec.quadratic_terms {
        let base = spec.regressors.iter().position(|(f, _)| f == q).unwrap();
        cols.push(cols[base].iter().map(|v| v * v).collect());
    }
    if spec.intercept {
        cols.push(vec![1.0; rows.len()]);
    }
    let (dep, dep_t) = spec.dependent;
    let y = DVector::from_vec(dep_t.apply(&raw(dep), dep.name())?);
    let x = DMatrix::from_fn(rows.len(), cols.len(), |i, j| cols[j][i]);
    Ok(Design {
        x,
        y,
        columns: spec.column_names(),
        row_mask,
        dataset_ids: rows.iter().map(|v| v.dataset_id.clone()).collect(),
    })
}

/// Least-squares fit through a Householder QR factorization.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
    xtx_inv: DMatrix<f64>,
}

impl OlsFit {
    pub fn n_obs(&self) -> usize {
        self.residuals.len()
    }

    pub fn n_params(&self) -> usize {
        self.coefficients.len()
    }

    /// `(X'X)^-1`.
    pub fn xtx_inv(&self) -> &DMatrix<f64> {
        &self.xtx_inv
    }

    /// Homoskedastic standard errors `sqrt(s² diag((X'X)^-1))`.
    pub fn classical_se(&self) -> DVector<f64> {
        let dof = (self.n_obs() - self.n_params()) as f64;
        let s2 = self.residuals.norm_squared() / dof;
        self.xtx_inv.diagonal().map(|d| (s2 * d).sqrt())
    }

    /// HC1 sandwich standard errors.
    pub fn robust_se(&self, x: &DMatrix<f64>) -> DVector<f64> {
        hc1(x, &self.residuals, &self.xtx_inv)
    }
}

fn hc1(x: &DMatrix<f64>, residuals: &DVector<f64>, bread: &DMatrix<f64>) -> DVector<f64> {
    let (n, k) = x.shape();
    let mut meat = DMatrix::zeros(k, k);
    for (i, row) in x.row_iter().enumerate() {
        let e2 = residuals[i] * residuals[i];
        if e2 != 0.0 {
            meat.ger(e2, &row.transpose(), &row.transpose(), 1.0);
        }
    }
    let cov = bread * meat * bread * (n as f64 / (n - k) as f64);
    cov.diagonal().map(|d| d.max(0.0).sqrt())
}

fn factor(x: &DMatrix<f64>) -> Result<(nalgebra::linalg::QR<f64, nalgebra::Dyn, nalgebra::Dyn>, DMatrix<f64>), RegressionError> {
    let (n, k) = x.shape();
    if n <= k {
        return Err(RegressionError::TooFewRows { found: n, needed: k + 1 });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..k {
        let norm = x.column(j).norm();
        if norm == 0.0 || r[(j, j)].abs() <= 1e-10 * norm {
            return Err(RegressionError::RankDeficient { column: j, name: format!("column {j}") });
        }
    }
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .expect("diagonal checked nonzero");
    let xtx_inv = &r_inv * r_inv.transpose();
    Ok((qr, xtx_inv))
}

pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit, RegressionError> {
    if x.nrows() != y.len() {
        return Err(RegressionError::DimensionMismatch { rows: x.nrows(), residuals: y.len() });
    }
    let (qr, xtx_inv) = factor(x)?;
    let qty = qr.q().transpose() * y;
    let coefficients = qr
        .r()
        .solve_upper_triangular(&qty)
        .expect("diagonal checked nonzero");
    let residuals = y - x * &coefficients;
    Ok(OlsFit { coefficients, residuals, xtx_inv })
}

/// HC1 standard errors for a fitted design.
pub fn robust_se(x: &DMatrix<f64>, residuals: &DVector<f64>) -> Result<DVector<f64>, RegressionError> {
    if x.nrows() != residuals.len() {
        return Err(RegressionError::DimensionMismatch { rows: x.nrows(), residuals: residuals.len() });
    }
    let (_, xtx_inv) = factor(x)?;
    Ok(hc1(x, residuals, &xtx_inv))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeKind {
    Classical,
    Hc1,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermEstimate {
    pub name: String,
    pub coef: f64,
    pub std_err: f64,
    pub z: f64,
    pub p: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl TermEstimate {
    fn new(name: String, coef: f64, std_err: f64) -> Self {
        let z = if std_err > 0.0 {
            coef / std_err
        } else if coef == 0.0 {
            0.0
        } else {
            coef.signum() * f64::INFINITY
        };
        let p = if z.is_infinite() { 0.0 } else { stats::normal_two_sided_p(z) };
        Self {
            name,
            coef,
            std_err,
            z,
            p,
            ci_low: coef - Z_975 * std_err,
            ci_high: coef + Z_975 * std_err,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    /// One entry per non-intercept column, in design order.
    pub vif: Vec<(String, f64)>,
    pub breusch_pagan: HetTest,
    pub white: HetTest,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionResult {
    pub terms: Vec<TermEstimate>,
    pub n_obs: usize,
    pub se_kind: SeKind,
    pub diagnostics: Option<Diagnostics>,
    pub notes: Vec<String>,
}

impl RegressionResult {
    pub fn term(&self, name: &str) -> Option<&TermEstimate> {
        self.terms.iter().find(|t| t.name == name)
    }
}

/// Estimates with the given standard errors, one term per design column.
pub fn summarize(fit: &OlsFit, std_errs: &DVector<f64>, names: &[String], se_kind: SeKind) -> RegressionResult {
    let terms = names
        .iter()
        .enumerate()
        .map(|(j, name)| TermEstimate::new(name.clone(), fit.coefficients[j], std_errs[j]))
        .collect();
    RegressionResult {
        terms,
        n_obs: fit.n_obs(),
        se_kind,
        diagnostics: None,
        notes: Vec::new(),
    }
}

/// Fit with robust errors and all diagnostics.
pub fn fit_design(design: &Design) -> Result<RegressionResult, RegressionError> {
    let fit = ols_fit(&design.x, &design.y).map_err(|e| match e {
        RegressionError::RankDeficient { column, .. } => RegressionError::RankDeficient {
            column,
            name: design.columns[column].clone(),
        },
        other => other,
    })?;
    let se = fit.robust_se(&design.x);
    let mut result = summarize(&fit, &se, &design.columns, SeKind::Hc1);

    let non_intercept: Vec<&String> = design.columns.iter().filter(|c| *c != "intercept").collect();
    let vifs = vif(&design.x)?;
    let bp = breusch_pagan(&design.x, &fit.residuals)?;
    let white = white_test(&design.x, &fit.residuals)?;
    result.diagnostics = Some(Diagnostics {
        vif: non_intercept.into_iter().cloned().zip(vifs).collect(),
        breusch_pagan: bp,
        white,
    });
    result.notes.push("standardization uses the population standard deviation".into());
    result.notes.push("standard errors: HC1; intervals and p-values: normal approximation".into());
    Ok(result)
}

/// Feature vectors evaluated one year after each dataset's publication, for
/// datasets whose following year is covered by the snapshot.
pub fn paper_regression_table(snapshot: &Snapshot) -> Vec<FeatureVector> {
    let extractor = FeatureExtractor::new(snapshot);
    snapshot
        .datasets()
        .filter_map(|d| {
            let a_pub = snapshot.dataset_year(d)?;
            (a_pub < snapshot.coverage_year()).then(|| {
                extractor
                    .extract_features(&d.dataset_id, a_pub + 1)
                    .expect("dataset key from snapshot")
            })
        })
        .collect()
}

/// Early-citation regression over a feature table.
pub fn run_paper_regression(table: &[FeatureVector]) -> Result<RegressionResult, RegressionError> {
    let design = build_design(table, &DesignSpec::paper())?;
    fit_design(&design)
}
