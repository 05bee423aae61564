//! Ordinary least squares through a Householder QR factorization.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::tdist::t_two_sided_p;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub model: String,
    /// Column names, intercept first.
    pub predictors: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_raw: Vec<f64>,
    /// BH-adjusted p-values; `None` for columns outside the adjustment set
    /// (the intercept) or before adjustment.
    pub p_adj: Vec<Option<f64>>,
    pub r2: f64,
    pub rss: f64,
    pub n: usize,
    pub df: usize,
    /// Rows removed by listwise deletion before fitting.
    pub n_dropped: usize,
}

/// Relative size below which an R diagonal marks a dependent column.
const RANK_TOL: f64 = 1e-10;

/// Fits `y ~ X` where `X` already contains the intercept column.
pub fn ols_fit(model: &str, names: &[String], x: &DMatrix<f64>, y: &DVector<f64>) -> Result<RegressionResult> {
    let (n, p) = x.shape();
    if names.len() != p {
        return Err(Error::Config(format!("{} names for {p} columns", names.len())));
    }
    if y.len() != n {
        return Err(Error::Config(format!("response has {} rows, design has {n}", y.len())));
    }
    if n <= p {
        return Err(Error::Config(format!("need more rows ({n}) than columns ({p})")));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let dependent: Vec<String> = (0..p)
        .filter(|&j| {
            let norm = x.column(j).norm();
            norm == 0.0 || r[(j, j)].abs() <= RANK_TOL * norm
        })
        .map(|j| names[j].clone())
        .collect();
    if !dependent.is_empty() {
        return Err(Error::Collinear(dependent));
    }
    let qty = qr.q().transpose() * y;
    let b = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Collinear(names.to_vec()))?;
    let resid = y - x * &b;
    let rss = resid.norm_squared();
    let mean = y.mean();
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r2 = if tss > 0.0 { (1.0 - rss / tss).clamp(0.0, 1.0) } else { 0.0 };
    let df = n - p;
    let sigma2 = rss / df as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::Collinear(names.to_vec()))?;
    let mut se = Vec::with_capacity(p);
    let mut tvals = Vec::with_capacity(p);
    let mut pvals = Vec::with_capacity(p);
    for j in 0..p {
        let s = (sigma2 * r_inv.row(j).norm_squared()).sqrt();
        let t = if s > 0.0 {
            b[j] / s
        } else if b[j] == 0.0 {
            0.0
        } else {
            b[j].signum() * f64::INFINITY
        };
        se.push(s);
        tvals.push(t);
        pvals.push(t_two_sided_p(t, df as f64));
    }
    Ok(RegressionResult {
        model: model.to_string(),
        predictors: names.to_vec(),
        coefficients: b.iter().copied().collect(),
        std_errors: se,
        t_stats: tvals,
        p_raw: pvals,
        p_adj: vec![None; p],
        r2,
        rss,
        n,
        df,
        n_dropped: 0,
    })
}
