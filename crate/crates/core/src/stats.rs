//! Order-fixed reductions for Monte Carlo summaries.

use serde::{Deserialize, Serialize};

/// Pairwise summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
                n,
            };
        }
        let mean = pairwise_sum(xs) / n as f64;
        let stderr = if n > 1 {
            let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
            (pairwise_sum(&dev) / ((n - 1) * n) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, n }
    }
}

/// Mean of `num / den` by the delta method, for paired per-replica samples.
pub fn ratio_of_means(num: &[f64], den: &[f64]) -> Summary {
    let a = Summary::of(num);
    let b = Summary::of(den);
    let n = num.len();
    let r = a.mean / b.mean;
    let resid: Vec<f64> = num
        .iter()
        .zip(den)
        .map(|(x, y)| (x - r * y) * (x - r * y))
        .collect();
    let var = if n > 1 {
        pairwise_sum(&resid) / (n - 1) as f64
    } else {
        0.0
    };
    Summary {
        mean: r,
        stderr: (var / n as f64).sqrt() / b.mean.abs(),
        n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

/// Ordinary least squares y = intercept + slope x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let slope_stderr = if x.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    LinearFit {
        slope,
        intercept,
        slope_stderr,
    }
}
