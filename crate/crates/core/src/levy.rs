//! Pure-jump Lévy measures: densities, truncated sampling, overlap masses,
//! the jump-overlap profile J and the power σ-envelope built from it.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::quadrature::integrate;
use crate::{invalid, Error, Result};

/// Radius of the support of the built-in family.
pub const SUPPORT_RADIUS: f64 = 1.0;

/// Absolute tolerance used by every overlap and moment quadrature.
pub const QUADRATURE_TOL: f64 = 1e-8;

/// Number of logarithmic grid points the σ-envelope is validated on.
pub const ENVELOPE_GRID: usize = 64;

/// Lower end of the σ-envelope validation grid.
pub const ENVELOPE_R_MIN: f64 = 1e-4;

const PROFILE_GRID: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum LevyFamily {
    /// f(z) = c0 |z|^(-1-beta) on 0 < |z| <= 1.
    BoundedStableLike { beta: f64, c0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyModel {
    pub dim: usize,
    pub family: LevyFamily,
    pub kappa: f64,
    pub trunc_delta: f64,
}

/// Power envelope σ(r) = c1 r^(1-beta).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaEnvelope {
    pub c1: f64,
    pub beta: f64,
    pub r_min: f64,
    pub r_cap: f64,
}

impl SigmaEnvelope {
    pub fn eval(&self, r: f64) -> f64 {
        self.c1 * r.powf(1.0 - self.beta)
    }

    /// ∫_0^r σ(s)^(-1) ds.
    pub fn reciprocal_integral(&self, r: f64) -> f64 {
        r.powf(self.beta) / (self.c1 * self.beta)
    }
}

impl LevyModel {
    pub fn bounded_stable_like(beta: f64, c0: f64, kappa: f64, trunc_delta: f64) -> Result<Self> {
        Self::new(
            1,
            LevyFamily::BoundedStableLike { beta, c0 },
            kappa,
            trunc_delta,
        )
    }

    pub fn new(dim: usize, family: LevyFamily, kappa: f64, trunc_delta: f64) -> Result<Self> {
        if dim != 1 {
            return Err(Error::UnsupportedDimension { dim });
        }
        let LevyFamily::BoundedStableLike { beta, c0 } = family;
        if !(beta > 0.0 && beta < 1.0) {
            return Err(invalid("beta", format!("{beta} is outside (0, 1)")));
        }
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(invalid("c0", format!("{c0} must be positive")));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(invalid("kappa", format!("{kappa} must be positive")));
        }
        if !(trunc_delta > 0.0 && trunc_delta <= SUPPORT_RADIUS) {
            return Err(invalid(
                "trunc_delta",
                format!("{trunc_delta} must lie in (0, {SUPPORT_RADIUS}]"),
            ));
        }
        Ok(Self {
            dim,
            family,
            kappa,
            trunc_delta,
        })
    }

    pub fn beta(&self) -> f64 {
        let LevyFamily::BoundedStableLike { beta, .. } = self.family;
        beta
    }

    pub fn c0(&self) -> f64 {
        let LevyFamily::BoundedStableLike { c0, .. } = self.family;
        c0
    }

    /// Same measure with a different small-jump truncation.
    pub fn with_trunc_delta(&self, trunc_delta: f64) -> Result<Self> {
        Self::new(self.dim, self.family, self.kappa, trunc_delta)
    }

    pub fn density(&self, z: &[f64]) -> f64 {
        self.density_1d(z[0])
    }

    #[inline]
    pub fn density_1d(&self, z: f64) -> f64 {
        let a = z.abs();
        if a > 0.0 && a <= SUPPORT_RADIUS {
            self.c0() * a.powf(-1.0 - self.beta())
        } else {
            0.0
        }
    }

    // Density with its limit value +inf at the origin; the overlap integrand
    // min(f(z), f(z - x)) is then continuous inside the common support.
    #[inline]
    fn density_closure(&self, z: f64) -> f64 {
        let a = z.abs();
        if a <= SUPPORT_RADIUS {
            self.c0() * a.powf(-1.0 - self.beta())
        } else {
            0.0
        }
    }

    pub fn overlap_ratio(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        self.overlap_ratio_1d(x[0], z[0])
    }

    /// min(1, f(z - x) / f(z)), the density of ν ∧ (δ_x * ν) against ν.
    #[inline]
    pub fn overlap_ratio_1d(&self, x: f64, z: f64) -> Result<f64> {
        let fz = self.density_1d(z);
        if fz <= 0.0 {
            return Err(Error::OutsideSupport { z });
        }
        if x == 0.0 {
            return Ok(1.0);
        }
        Ok((self.density_1d(z - x) / fz).min(1.0))
    }

    /// Total mass of ν ∧ (δ_x * ν); `f64::INFINITY` at x = 0.
    pub fn overlap_mass(&self, x: &[f64]) -> Result<f64> {
        self.overlap_mass_1d(x[0])
    }

    pub fn overlap_mass_1d(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(f64::INFINITY);
        }
        let lo = (-SUPPORT_RADIUS).max(x - SUPPORT_RADIUS);
        let hi = SUPPORT_RADIUS.min(x + SUPPORT_RADIUS);
        if hi <= lo {
            return Ok(0.0);
        }
        integrate(
            |z| self.density_closure(z).min(self.density_closure(z - x)),
            lo,
            hi,
            &[0.0, 0.5 * x, x],
            QUADRATURE_TOL,
        )
    }

    /// J(s) = inf over |x| <= s of the overlap mass, by grid minimisation.
    pub fn jump_overlap_profile(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(invalid("s", format!("{s} must be positive")));
        }
        let mut best = self.overlap_mass_1d(s)?;
        for k in 1..PROFILE_GRID {
            let x = s * k as f64 / PROFILE_GRID as f64;
            best = best.min(self.overlap_mass_1d(x)?);
        }
        Ok(best)
    }

    /// Largest c1 with c1 r^(1-beta) 2r <= J(γ(κ∧r)) (κ∧r)^2 on the
    /// logarithmic grid over [`ENVELOPE_R_MIN`, r_cap].
    pub fn fit_sigma_envelope(&self, gamma: f64, r_cap: f64) -> Result<SigmaEnvelope> {
        let beta = self.beta();
        let grid = log_grid(ENVELOPE_R_MIN, r_cap, ENVELOPE_GRID);
        let mut profile: HashMap<u64, f64> = HashMap::new();
        let mut c1 = f64::INFINITY;
        for &r in &grid {
            let k = self.kappa.min(r);
            let s = gamma * k;
            let j = match profile.get(&s.to_bits()) {
                Some(&j) => j,
                None => {
                    let j = self.jump_overlap_profile(s)?;
                    profile.insert(s.to_bits(), j);
                    j
                }
            };
            let bound = j * k * k / (2.0 * r);
            if !(bound > 0.0) {
                return Err(Error::EnvelopeInfeasible { r });
            }
            c1 = c1.min(bound / r.powf(1.0 - beta));
        }
        Ok(SigmaEnvelope {
            c1,
            beta,
            r_min: ENVELOPE_R_MIN,
            r_cap,
        })
    }

    pub fn sample_truncated_jump<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        out[0] = self.sample_jump_1d(rng);
    }

    /// Inverse-CDF draw of the radial law r^(-1-beta) on (δ, 1] with a random sign.
    #[inline]
    pub fn sample_jump_1d<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let beta = self.beta();
        let top = self.trunc_delta.powf(-beta);
        let u: f64 = rng.gen();
        let r = (top - u * (top - 1.0)).powf(-1.0 / beta);
        if rng.gen::<bool>() {
            r
        } else {
            -r
        }
    }

    /// ν(|z| > δ).
    pub fn truncated_rate(&self) -> f64 {
        if self.trunc_delta >= SUPPORT_RADIUS {
            return 0.0;
        }
        let beta = self.beta();
        2.0 * self.c0() * (self.trunc_delta.powf(-beta) - 1.0) / beta
    }

    /// ∫|z|^2 ν(dz).
    pub fn second_moment(&self) -> f64 {
        2.0 * self.c0() / (2.0 - self.beta())
    }

    /// ∫_{|z|>δ} |z|^2 ν(dz), the variance rate of the simulated jumps.
    pub fn truncated_second_moment(&self) -> f64 {
        let beta = self.beta();
        let d = self.trunc_delta.min(SUPPORT_RADIUS);
        2.0 * self.c0() * (1.0 - d.powf(2.0 - beta)) / (2.0 - beta)
    }

    /// ∫_{|z|>1} |z| ν(dz); zero for families supported in the unit ball.
    pub fn large_jump_first_moment(&self) -> f64 {
        0.0
    }
}

pub(crate) fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}
