//! The concave distance transform ψ(r) = ∫_0^r exp(-g(s)) ds with a linear tail.
//!
//! For the power envelope g(r) = K r^beta, so the integral has the closed form
//! K^(-1/beta) Γ(1/beta) P(1/beta, K r^beta) / beta with P the regularised
//! lower incomplete gamma function. Near the origin a power series in
//! x = K r^beta is used instead, which also gives ψ(r)/r without forming r.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_lr};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Psi {
    /// g(r) = k r^beta
    pub k: f64,
    pub beta: f64,
    /// ψ is linear beyond this point (2 R1)
    pub r_switch: f64,
    pub value_switch: f64,
    /// ln ψ'(r_switch) = -g(r_switch)
    pub ln_tail_slope: f64,
}

impl Psi {
    pub fn new(k: f64, beta: f64, r_switch: f64) -> Self {
        let mut psi = Self {
            k,
            beta,
            r_switch,
            value_switch: 0.0,
            ln_tail_slope: -k * r_switch.powf(beta),
        };
        psi.value_switch = psi.integral(r_switch);
        psi
    }

    pub fn g(&self, r: f64) -> f64 {
        self.k * r.powf(self.beta)
    }

    fn series_ratio(&self, x: f64) -> f64 {
        // ψ(r)/r = Σ (-x)^n / (n! (1 + n beta)), x = K r^beta < 1
        let mut term = 1.0;
        let mut sum = 1.0;
        for n in 1..60 {
            term *= -x / n as f64;
            let t = term / (1.0 + n as f64 * self.beta);
            sum += t;
            if t.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    }

    fn integral(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let x = self.g(r);
        if x < 1.0 {
            return r * self.series_ratio(x);
        }
        let a = 1.0 / self.beta;
        self.k.powf(-a) * gamma(a) * gamma_lr(a, x) / self.beta
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= self.r_switch {
            self.integral(r)
        } else {
            self.value_switch + self.ln_tail_slope.exp() * (r - self.r_switch)
        }
    }

    pub fn prime(&self, r: f64) -> f64 {
        if r <= self.r_switch {
            (-self.g(r)).exp()
        } else {
            self.ln_tail_slope.exp()
        }
    }

    /// ψ''(r) = -g'(r) exp(-g(r)) inside [0, r_switch], zero on the tail.
    pub fn second(&self, r: f64) -> f64 {
        if r <= 0.0 || r > self.r_switch {
            return if r > self.r_switch {
                0.0
            } else {
                f64::NEG_INFINITY
            };
        }
        -self.k * self.beta * r.powf(self.beta - 1.0) * (-self.g(r)).exp()
    }

    /// ψ(e^ln_s a) / e^ln_s, usable when e^ln_s underflows.
    pub fn eval_scaled(&self, a: f64, ln_s: f64) -> f64 {
        if ln_s == 0.0 {
            return self.eval(a);
        }
        if a <= 0.0 {
            return 0.0;
        }
        let ln_r = ln_s + a.ln();
        let x = (self.k.ln() + self.beta * ln_r).exp();
        if x < 1.0 {
            return a * self.series_ratio(x);
        }
        self.eval(ln_r.exp()) * (-ln_s).exp()
    }
}
