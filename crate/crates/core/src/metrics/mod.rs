//! Distances r_s, r_l and ρ, and the constants pipeline that fixes the
//! contraction rate, the prefactor, the interaction threshold and the
//! second-moment bound.

pub mod model;
pub mod psi;
pub mod reduction;

use serde::{Deserialize, Serialize};

use crate::levy::LevyModel;
use crate::{invalid, Error, Result};

pub use model::{
    validate_assumptions, Check, Drift, DynamicsModel, Interaction, KernelKind, ValidationReport,
    Witness,
};
pub use psi::Psi;
pub use reduction::{ratio_extremes, MetricShape, RatioExtremes};

/// mantissa · e^exponent. Rates and prefactors carry factors e^(±Λ) with Λ in
/// the tens of thousands, far outside the f64 exponent range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpScaled {
    pub mantissa: f64,
    pub exponent: f64,
}

impl ExpScaled {
    pub fn new(mantissa: f64, exponent: f64) -> Self {
        Self { mantissa, exponent }
    }

    pub fn ln(&self) -> f64 {
        self.mantissa.ln() + self.exponent
    }

    /// The plain value; may be 0 or +inf when out of range.
    pub fn value(&self) -> f64 {
        self.mantissa * self.exponent.exp()
    }

    pub fn finite_value(&self) -> Option<f64> {
        let v = self.ln().exp();
        v.is_finite().then_some(v)
    }

    fn min_by_ln(items: &[ExpScaled]) -> ExpScaled {
        *items
            .iter()
            .min_by(|a, b| a.ln().total_cmp(&b.ln()))
            .expect("non-empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    /// grid points per axis of the ratio search
    pub grid: usize,
    /// golden-section refinement tolerance in the angle parameters
    pub refine_tol: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            grid: 2001,
            refine_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityPoint {
    pub k0: f64,
    pub ln_lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentBound {
    pub initial_second_moment: f64,
    pub c_tilde: f64,
    pub c_hat: f64,
    pub c3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub dim: usize,
    pub gamma: f64,
    pub l_b: f64,
    pub theta: f64,
    pub r0: f64,
    pub ln_l_b_tilde: Option<f64>,
    pub kappa: f64,
    pub k0: f64,
    pub alpha: f64,
    pub tau: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub inf_rs_over_rl: f64,
    pub sup_rs_over_rl: f64,
    pub sup_rl_over_rs: f64,
    /// largest admissible values are used for both comparison constants
    pub eps_small: f64,
    pub eps_bar: f64,
    pub script_r: f64,
    pub d_gamma: f64,
    pub r1: f64,
    pub sigma_c1: f64,
    pub sigma_beta: f64,
    pub sigma_r_cap: f64,
    /// g(r) = g_coefficient · r^beta
    pub g_coefficient: f64,
    pub cap_lambda_1: f64,
    pub cap_lambda_2: f64,
    pub lambda: ExpScaled,
    pub c1: ExpScaled,
    pub c_b_tilde: ExpScaled,
    pub m1: ExpScaled,
    pub m2: f64,
    pub c1_local: ExpScaled,
    pub c2_local: f64,
    pub interaction_within_threshold: bool,
    pub lambda_sensitivity: Vec<SensitivityPoint>,
    pub moment: Option<MomentBound>,
    pub psi: Psi,
}

pub fn alpha(model: &DynamicsModel) -> f64 {
    2.0 * model.drift.lipschitz() / (model.gamma * model.gamma)
}

pub fn tau(model: &DynamicsModel) -> f64 {
    let g2 = model.gamma * model.gamma;
    let l = model.drift.lipschitz();
    (0.125f64).min(model.drift.theta() / g2 - 4.0 * l * l / (3.0 * g2 * g2))
}

pub fn r_s(v: &[f64], w: &[f64], alpha: f64, gamma: f64) -> f64 {
    let mut vv = 0.0;
    let mut qq = 0.0;
    for (&a, &b) in v.iter().zip(w) {
        let q = a + b / gamma;
        vv += a * a;
        qq += q * q;
    }
    alpha * vv.sqrt() + qq.sqrt()
}

/// (ϵ, ε) = (min(1/2, inf r_s/r_l / 2), min(1/2, inf r_l/r_s)).
pub fn epsilon_pair(ext: &RatioExtremes) -> Result<(f64, f64)> {
    let eps_small = (0.5f64).min(0.5 * ext.inf_rs_over_rl);
    let eps_bar = (0.5f64).min(ext.inf_rl_over_rs());
    if !(eps_small > 0.0) || !(eps_bar > 0.0) {
        return Err(Error::DegenerateMetric("a comparison infimum vanished"));
    }
    Ok((eps_small, eps_bar))
}

pub fn script_r(model: &DynamicsModel, tau: f64) -> f64 {
    let g2 = model.gamma * model.gamma;
    (1.0 - 2.0 * tau) * (model.drift.lipschitz() + model.drift.theta()) * model.drift.r0().powi(2)
        / (tau * g2)
}

/// sup of r_s - ϵ r_l over {r_l^2 <= ℛ}: by homogeneity the supremum sits on
/// r_l = √ℛ in the direction maximising r_s/r_l, giving √ℛ (S - ϵ).
pub fn d_gamma(script_r: f64, eps_small: f64, sup_rs_over_rl: f64) -> f64 {
    script_r.sqrt() * (sup_rs_over_rl - eps_small)
}

/// sup of r_s over {r_s - ϵ r_l <= D_Γ}: along a direction with r_l = t r_s
/// the constraint reads r_s (1 - ϵ t) <= D_Γ, maximal at t = T.
pub fn r1(d_gamma: f64, eps_small: f64, sup_rl_over_rs: f64) -> f64 {
    d_gamma / (1.0 - eps_small * sup_rl_over_rs)
}

/// Second-moment bound C3 = 8 Ĉ / (1 - 2τ)^2 for an initial law with
/// E(|X0|^2 + |Y0|^2) = `initial_second_moment`.
pub fn moment_bound(
    model: &DynamicsModel,
    levy: &LevyModel,
    tau: f64,
    initial_second_moment: f64,
) -> MomentBound {
    let g = model.gamma;
    let d = model.dim;
    let zero = vec![0.0; d];
    let mut b0 = vec![0.0; d];
    model.drift.eval(&zero, &mut b0);
    let b0_sq: f64 = b0.iter().map(|a| a * a).sum();
    let mut k0 = vec![0.0; d];
    model.interaction.eval(&zero, &zero, &mut k0);
    let k0_sq: f64 = k0.iter().map(|a| a * a).sum();
    let big = levy.large_jump_first_moment();
    let one = 1.0 - 2.0 * tau;
    let c_tilde = 4.0 / (tau * g.powi(3)) * (k0_sq + b0_sq + big * big)
        + one / g * (model.drift.lipschitz() + model.drift.theta()) * model.drift.r0().powi(2)
        + levy.second_moment() / (g * g);
    let weight = (one * one / 2.0 + one / (2.0 * g)).max(1.0 / (g * g) + one / (2.0 * g));
    let c_hat = weight * initial_second_moment + c_tilde / (tau * g);
    MomentBound {
        initial_second_moment,
        c_tilde,
        c_hat,
        c3: 8.0 * c_hat / (one * one),
    }
}

pub fn derive_constants(
    model: &DynamicsModel,
    levy: &LevyModel,
    k0: f64,
) -> Result<ConstantsReport> {
    derive_constants_with(model, levy, k0, &PipelineOptions::default())
}

struct Tail {
    m: f64,
    k: f64,
    cap_lambda_1: f64,
    cap_lambda_2: f64,
}

fn tail_for(alpha: f64, gamma: f64, k0: f64, c1: f64, beta: f64, r1: f64) -> Tail {
    let m = 1.0 + k0 * alpha;
    let k = 2.0 * alpha * gamma * m.powf(2.0 - beta) / (c1 * beta);
    Tail {
        m,
        k,
        cap_lambda_1: k * r1.powf(beta),
        cap_lambda_2: k * (2.0 * r1).powf(beta),
    }
}

fn rate(alpha: f64, gamma: f64, tau: f64, eps: (f64, f64), k0: f64, t: &Tail) -> ExpScaled {
    ExpScaled::min_by_ln(&[
        ExpScaled::new(alpha * gamma, -t.cap_lambda_1),
        ExpScaled::new(alpha * gamma * (k0 - 4.0) / (4.0 * t.m), -t.cap_lambda_1),
        ExpScaled::new(tau * gamma * eps.0 * eps.1 / 4.0, -t.cap_lambda_2),
    ])
}

/// Runs the pipeline in dependency order: friction condition, α/τ/A/B/C,
/// comparison constants, ℛ, D_Γ, R1, σ-envelope, Λ1/Λ2, then the derived
/// rate, prefactor, threshold and metric-equivalence constants.
pub fn derive_constants_with(
    model: &DynamicsModel,
    levy: &LevyModel,
    k0: f64,
    opts: &PipelineOptions,
) -> Result<ConstantsReport> {
    if !(k0 > 4.0) {
        return Err(invalid("k0", format!("{k0} must exceed 4")));
    }
    model.check_friction()?;
    let gamma = model.gamma;
    let l_b = model.drift.lipschitz();
    let alpha = alpha(model);
    let tau = tau(model);
    let one = 1.0 - 2.0 * tau;
    let shape = MetricShape {
        alpha,
        gamma,
        a: one * one / 2.0,
        b: one / gamma,
        c: 1.0 / (gamma * gamma),
    };

    let ext = ratio_extremes(&shape, model.dim, opts.grid, opts.refine_tol);
    let (eps_small, eps_bar) = epsilon_pair(&ext)?;
    let script_r = script_r(model, tau);
    let d_gamma = d_gamma(script_r, eps_small, ext.sup_rs_over_rl);
    let r1 = r1(d_gamma, eps_small, ext.sup_rl_over_rs());
    if !(r1 >= d_gamma * (1.0 - 1e-12) && r1 <= 2.0 * d_gamma * (1.0 + 1e-9)) {
        return Err(Error::DegenerateMetric("R1 left the interval [D_Γ, 2 D_Γ]"));
    }

    let r_cap = (2.0 * r1).max(10.0);
    let env = levy.fit_sigma_envelope(gamma, r_cap)?;
    let tail = tail_for(alpha, gamma, k0, env.c1, env.beta, r1);
    let psi = Psi::new(tail.k, env.beta, 2.0 * r1);

    let lambda = rate(alpha, gamma, tau, (eps_small, eps_bar), k0, &tail);
    let norm_min = (one / (2.0 * std::f64::consts::SQRT_2)).min(1.0 / (gamma * 3f64.sqrt()));
    let m2 = std::f64::consts::SQRT_2 * (alpha + 1.0).max(1.0 / gamma);
    let c1 = ExpScaled::new(m2 / (eps_small * norm_min), tail.cap_lambda_2);
    let m1 = ExpScaled::new(eps_small * norm_min, -tail.cap_lambda_2);
    let c_b_tilde = ExpScaled::min_by_ln(&[
        ExpScaled::new(l_b / 4.0, -tail.cap_lambda_1),
        ExpScaled::new(
            eps_small * gamma * gamma * tau * one / (8.0 * std::f64::consts::SQRT_2),
            -tail.cap_lambda_2,
        ),
    ]);
    let c1_local = ExpScaled::new(
        (1.0f64).min((k0 - 4.0) / (4.0 * tail.m)) * alpha * gamma,
        -tail.cap_lambda_1,
    );
    let interaction_within_threshold = model
        .interaction
        .ln_lipschitz()
        .is_none_or(|l| l <= c_b_tilde.ln());

    let lambda_sensitivity = [0.6, 0.8, 1.0, 1.5, 2.0]
        .iter()
        .map(|f| k0 * f)
        .filter(|&k| k > 4.0)
        .map(|k| {
            let t = tail_for(alpha, gamma, k, env.c1, env.beta, r1);
            SensitivityPoint {
                k0: k,
                ln_lambda: rate(alpha, gamma, tau, (eps_small, eps_bar), k, &t).ln(),
            }
        })
        .collect();

    Ok(ConstantsReport {
        dim: model.dim,
        gamma,
        l_b,
        theta: model.drift.theta(),
        r0: model.drift.r0(),
        ln_l_b_tilde: model.interaction.ln_lipschitz(),
        kappa: levy.kappa,
        k0,
        alpha,
        tau,
        a: shape.a,
        b: shape.b,
        c: shape.c,
        inf_rs_over_rl: ext.inf_rs_over_rl,
        sup_rs_over_rl: ext.sup_rs_over_rl,
        sup_rl_over_rs: ext.sup_rl_over_rs(),
        eps_small,
        eps_bar,
        script_r,
        d_gamma,
        r1,
        sigma_c1: env.c1,
        sigma_beta: env.beta,
        sigma_r_cap: env.r_cap,
        g_coefficient: tail.k,
        cap_lambda_1: tail.cap_lambda_1,
        cap_lambda_2: tail.cap_lambda_2,
        lambda,
        c1,
        c_b_tilde,
        m1,
        m2,
        c1_local,
        c2_local: tau * gamma / 2.0,
        interaction_within_threshold,
        lambda_sensitivity,
        moment: None,
        psi,
    })
}

impl ConstantsReport {
    pub fn shape(&self) -> MetricShape {
        MetricShape {
            alpha: self.alpha,
            gamma: self.gamma,
            a: self.a,
            b: self.b,
            c: self.c,
        }
    }

    pub fn bind_initial_moment(&mut self, model: &DynamicsModel, levy: &LevyModel, e0: f64) {
        self.moment = Some(moment_bound(model, levy, self.tau, e0));
    }

    pub fn c3(&self) -> Option<f64> {
        self.moment.map(|m| m.c3)
    }

    pub fn g_eval(&self, r: f64) -> f64 {
        self.psi.g(r)
    }

    pub fn psi_eval(&self, r: f64) -> f64 {
        self.psi.eval(r)
    }

    pub fn psi_prime(&self, r: f64) -> f64 {
        self.psi.prime(r)
    }

    pub fn r_s(&self, v: &[f64], w: &[f64]) -> f64 {
        r_s(v, w, self.alpha, self.gamma)
    }

    pub fn r_l(&self, v: &[f64], w: &[f64]) -> f64 {
        let mut s = 0.0;
        for (&a, &b) in v.iter().zip(w) {
            s += self.a * a * a + self.b * a * b + self.c * b * b;
        }
        s.max(0.0).sqrt()
    }

    /// Δ = r_s - ϵ r_l, in the units of (v, w).
    pub fn delta(&self, v: &[f64], w: &[f64]) -> f64 {
        self.r_s(v, w) - self.eps_small * self.r_l(v, w)
    }

    /// Whether Δ(e^ln_s v, e^ln_s w) <= D_Γ.
    pub fn in_refined_region(&self, v: &[f64], w: &[f64], ln_s: f64) -> bool {
        let d = self.delta(v, w);
        d <= 0.0 || d.ln() + ln_s <= self.d_gamma.ln()
    }

    /// Whether |Δ - D_Γ| < frac · D_Γ at absolute scale e^ln_s.
    pub fn near_switch(&self, v: &[f64], w: &[f64], ln_s: f64, frac: f64) -> bool {
        let d = self.delta(v, w);
        if d <= 0.0 {
            return false;
        }
        let rel = (d.ln() + ln_s - self.d_gamma.ln()).exp();
        (rel - 1.0).abs() < frac
    }

    /// ρ between two states in ℝ^{2d} laid out as (x, y).
    pub fn rho_metric(&self, p1: &[f64], p2: &[f64]) -> f64 {
        let d = p1.len() / 2;
        let v: Vec<f64> = p1[..d].iter().zip(&p2[..d]).map(|(a, b)| a - b).collect();
        let w: Vec<f64> = p1[d..].iter().zip(&p2[d..]).map(|(a, b)| a - b).collect();
        self.rho_deviation(&v, &w, 0.0)
    }

    /// ρ(e^ln_s v, e^ln_s w) / e^ln_s for a deviation (v, w).
    pub fn rho_deviation(&self, v: &[f64], w: &[f64], ln_s: f64) -> f64 {
        let rs = self.r_s(v, w);
        let rl = self.r_l(v, w);
        let delta = rs - self.eps_small * rl;
        let arg = if delta <= 0.0 || delta.ln() + ln_s <= self.d_gamma.ln() {
            rs
        } else {
            self.d_gamma * (-ln_s).exp() + self.eps_small * rl
        };
        self.psi.eval_scaled(arg, ln_s)
    }

    /// Particle average of ρ over paired states, each of length N · 2d.
    pub fn rho_n(&self, states1: &[f64], states2: &[f64]) -> Result<f64> {
        paired(states1, states2, 2 * self.dim, |a, b| self.rho_metric(a, b))
    }
}

/// Particle average of Euclidean distances over paired states.
pub fn l1_n(states1: &[f64], states2: &[f64], point_len: usize) -> Result<f64> {
    paired(states1, states2, point_len, |a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    })
}

fn paired<F: Fn(&[f64], &[f64]) -> f64>(
    states1: &[f64],
    states2: &[f64],
    point_len: usize,
    f: F,
) -> Result<f64> {
    if states1.len() != states2.len()
        || !states1.len().is_multiple_of(point_len)
        || states1.is_empty()
    {
        return Err(Error::LengthMismatch {
            left: states1.len(),
            right: states2.len(),
        });
    }
    let n = states1.len() / point_len;
    let sum: f64 = states1
        .chunks_exact(point_len)
        .zip(states2.chunks_exact(point_len))
        .map(|(a, b)| f(a, b))
        .sum();
    Ok(sum / n as f64)
}

#[cfg(test)]
mod tests;
