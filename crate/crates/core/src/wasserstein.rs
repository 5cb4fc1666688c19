//! Empirical Wasserstein-1 estimators between equal-size uniform samples, and
//! the two-sample Kolmogorov-Smirnov test used for marginal fidelity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::ConstantsReport;
use crate::{invalid, Error, Result};

/// Largest sample handled by the exact assignment solver.
pub const ASSIGNMENT_CAP: usize = 2048;

/// n points in ℝ^dim with uniform weights, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSample {
    dim: usize,
    points: Vec<f64>,
}

impl EmpiricalSample {
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(invalid(
                "points",
                "need at least one point of positive dimension",
            ));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(invalid("points", "coordinates must be finite"));
        }
        Ok(Self { dim, points })
    }

    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(1, values.to_vec())
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

#[derive(Debug, Clone, Copy)]
pub enum GroundMetric<'a> {
    Euclidean,
    /// ρ over states laid out as (x, y) ∈ ℝ^{2d}.
    Rho(&'a ConstantsReport),
}

impl GroundMetric<'_> {
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            GroundMetric::Euclidean => euclidean(a, b),
            GroundMetric::Rho(c) => c.rho_metric(a, b),
        }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn check_pair(a: &EmpiricalSample, b: &EmpiricalSample) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.dim != b.dim {
        return Err(invalid("dim", format!("{} vs {}", a.dim, b.dim)));
    }
    Ok(())
}

/// Quantile coupling: (1/n) Σ |a_(i) - b_(i)|, exact in one dimension.
pub fn w1_sorted_1d(a: &EmpiricalSample, b: &EmpiricalSample) -> Result<f64> {
    check_pair(a, b)?;
    if a.dim != 1 {
        return Err(invalid("dim", "sorted estimator needs scalar samples"));
    }
    let mut x = a.points.clone();
    let mut y = b.points.clone();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let s: f64 = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).sum();
    Ok(s / x.len() as f64)
}

fn cost_matrix(a: &EmpiricalSample, b: &EmpiricalSample, metric: GroundMetric) -> Vec<f64> {
    let n = a.len();
    let mut cost = vec![0.0; n * n];
    cost.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let p = a.point(i);
        for (j, c) in row.iter_mut().enumerate() {
            *c = metric.distance(p, b.point(j));
        }
    });
    cost
}

/// Optimal assignment cost / n by shortest augmenting paths.
pub fn w1_assignment(
    a: &EmpiricalSample,
    b: &EmpiricalSample,
    metric: GroundMetric,
) -> Result<f64> {
    check_pair(a, b)?;
    let n = a.len();
    if n > ASSIGNMENT_CAP {
        return Err(Error::SizeCap {
            n,
            cap: ASSIGNMENT_CAP,
        });
    }
    let cost = cost_matrix(a, b, metric);
    let col_of_row = solve_assignment(&cost, n);
    let total: f64 = col_of_row
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum();
    Ok(total / n as f64)
}

/// Minimum-cost perfect matching of a dense n × n matrix. Returns the column
/// assigned to each row. O(n^3) Hungarian method with row/column potentials.
pub fn solve_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    // 1-based bookkeeping; column 0 is the virtual source
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of_row = vec![0; n];
    for j in 1..=n {
        col_of_row[row_of[j] - 1] = j - 1;
    }
    col_of_row
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkhornEstimate {
    /// ⟨P, C⟩ for the entropic plan P; biased upward relative to W1.
    pub value: f64,
    pub regularization: f64,
    pub iterations: usize,
    pub converged: bool,
    /// final L1 violation of the row marginals
    pub marginal_error: f64,
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn iterations without debiasing.
pub fn w1_sinkhorn(
    a: &EmpiricalSample,
    b: &EmpiricalSample,
    metric: GroundMetric,
    regularization: f64,
    max_iterations: usize,
    tol: f64,
) -> Result<SinkhornEstimate> {
    check_pair(a, b)?;
    if !(regularization > 0.0) {
        return Err(invalid("regularization", "must be positive"));
    }
    let n = a.len();
    let eps = regularization;
    let cost = cost_matrix(a, b, metric);
    let ln_w = -(n as f64).ln();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut iterations = 0;
    let mut marginal_error = f64::INFINITY;
    while iterations < max_iterations {
        iterations += 1;
        f.par_iter_mut().enumerate().for_each(|(i, fi)| {
            let row = &cost[i * n..(i + 1) * n];
            *fi = eps * ln_w - eps * log_sum_exp(row.iter().zip(&g).map(|(c, gj)| (gj - c) / eps));
        });
        g.par_iter_mut().enumerate().for_each(|(j, gj)| {
            *gj = eps * ln_w - eps * log_sum_exp((0..n).map(|i| (f[i] - cost[i * n + j]) / eps));
        });
        // columns are exact after the g update; measure the rows
        marginal_error = (0..n)
            .into_par_iter()
            .map(|i| {
                let row = &cost[i * n..(i + 1) * n];
                let s: f64 = row
                    .iter()
                    .zip(&g)
                    .map(|(c, gj)| ((f[i] + gj - c) / eps).exp())
                    .sum();
                (s - 1.0 / n as f64).abs()
            })
            .sum();
        if marginal_error < tol {
            break;
        }
    }
    let value: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = &cost[i * n..(i + 1) * n];
            row.iter()
                .zip(&g)
                .map(|(c, gj)| ((f[i] + gj - c) / eps).exp() * c)
                .sum::<f64>()
        })
        .sum();
    Ok(SinkhornEstimate {
        value,
        regularization,
        iterations,
        converged: marginal_error < tol,
        marginal_error,
    })
}

/// Median of the pairwise ground distances between the two samples.
pub fn median_distance(
    a: &EmpiricalSample,
    b: &EmpiricalSample,
    metric: GroundMetric,
) -> Result<f64> {
    check_pair(a, b)?;
    let mut c = cost_matrix(a, b, metric);
    let mid = c.len() / 2;
    let (_, m, _) = c.select_nth_unstable_by(mid, f64::total_cmp);
    Ok(*m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub statistic: f64,
    pub threshold: f64,
    pub alpha: f64,
    pub pass: bool,
}

/// sup |F_a - F_b| over the pooled sample.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic threshold c(α) √((n + m)/(n m)), c(α) = √(-ln(α/2)/2).
pub fn ks_threshold(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

pub fn ks_test(a: &[f64], b: &[f64], alpha: f64) -> KsTest {
    let statistic = ks_statistic(a, b);
    let threshold = ks_threshold(a.len(), b.len(), alpha);
    KsTest {
        statistic,
        threshold,
        alpha,
        pass: statistic <= threshold,
    }
}
