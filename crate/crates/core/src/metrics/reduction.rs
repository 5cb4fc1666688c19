//! Extremes of r_s / r_l over all nonzero (v, w).
//!
//! Both distances depend on (v, w) only through a = |v|, b = |w| and
//! c = cos∠(v, w), and both are positively homogeneous of degree one, so it
//! suffices to search a = cos φ, b = sin φ with φ ∈ [0, π/2] and c ∈ [-1, 1]
//! (c ∈ {-1, 1} in dimension one).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricShape {
    pub alpha: f64,
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl MetricShape {
    pub fn r_s(&self, va: f64, wb: f64, cos: f64) -> f64 {
        let g = self.gamma;
        let q2 = va * va + 2.0 * va * wb * cos / g + wb * wb / (g * g);
        self.alpha * va + q2.max(0.0).sqrt()
    }

    pub fn r_l(&self, va: f64, wb: f64, cos: f64) -> f64 {
        (self.a * va * va + self.b * va * wb * cos + self.c * wb * wb)
            .max(0.0)
            .sqrt()
    }

    fn ratio(&self, phi: f64, cos: f64) -> f64 {
        let (b, a) = phi.sin_cos();
        self.r_s(a, b, cos) / self.r_l(a, b, cos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioExtremes {
    pub inf_rs_over_rl: f64,
    pub sup_rs_over_rl: f64,
}

impl RatioExtremes {
    pub fn inf_rl_over_rs(&self) -> f64 {
        1.0 / self.sup_rs_over_rl
    }

    pub fn sup_rl_over_rs(&self) -> f64 {
        1.0 / self.inf_rs_over_rl
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

fn golden<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    // minimises f on [lo, hi]; endpoints are compared at the end so that
    // boundary extremes are returned exactly
    let (flo, fhi) = (f(lo), f(hi));
    let (elo, ehi) = (lo, hi);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let mut best = if f1 < f2 { (x1, f1) } else { (x2, f2) };
    if flo < best.1 {
        best = (elo, flo);
    }
    if fhi < best.1 {
        best = (ehi, fhi);
    }
    best
}

/// Grid search over (φ, c) followed by alternating golden-section refinement.
pub fn ratio_extremes(shape: &MetricShape, dim: usize, grid: usize, tol: f64) -> RatioExtremes {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let phis: Vec<f64> = (0..grid)
        .map(|i| half_pi * i as f64 / (grid - 1) as f64)
        .collect();
    let coss: Vec<f64> = if dim == 1 {
        vec![-1.0, 1.0]
    } else {
        (0..grid)
            .map(|j| -1.0 + 2.0 * j as f64 / (grid - 1) as f64)
            .collect()
    };
    let dphi = half_pi / (grid - 1) as f64;
    let dcos = 2.0 / (grid - 1) as f64;

    let search = |sign: f64| -> f64 {
        let f = |phi: f64, c: f64| sign * shape.ratio(phi, c);
        let mut best = (0usize, 0usize, f64::INFINITY);
        for (i, &p) in phis.iter().enumerate() {
            for (j, &c) in coss.iter().enumerate() {
                let v = f(p, c);
                if v < best.2 {
                    best = (i, j, v);
                }
            }
        }
        let (mut phi, mut c, mut val) = (phis[best.0], coss[best.1], best.2);
        for _ in 0..8 {
            let (p, v) = golden(
                |x| f(x, c),
                (phi - dphi).max(0.0),
                (phi + dphi).min(half_pi),
                tol,
            );
            phi = p;
            val = val.min(v);
            if dim > 1 {
                let (cc, v) = golden(
                    |x| f(phi, x),
                    (c - dcos).max(-1.0),
                    (c + dcos).min(1.0),
                    tol,
                );
                c = cc;
                val = val.min(v);
            }
        }
        sign * val
    };

    RatioExtremes {
        inf_rs_over_rl: search(1.0),
        sup_rs_over_rl: search(-1.0),
    }
}
