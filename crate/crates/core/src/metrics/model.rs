//! Confinement drifts, interaction kernels and Monte Carlo falsification of
//! their declared constants.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{invalid, Error, Result};

/// Confinement drift b, acting coordinate-wise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Drift {
    /// b(x) = -k x; L_b = theta = k.
    Linear { strength: f64, r0: f64 },
    /// x - x^3 on |x| <= clip, continued linearly with the boundary slope.
    ClippedDoubleWell {
        clip: f64,
        l_b: f64,
        theta: f64,
        r0: f64,
    },
}

impl Drift {
    pub fn linear(strength: f64, r0: f64) -> Self {
        Drift::Linear { strength, r0 }
    }

    /// Registry defaults: clip 1, slope range [-2, 1], dissipative beyond 4.5.
    pub fn double_well() -> Self {
        Drift::ClippedDoubleWell {
            clip: 1.0,
            l_b: 2.0,
            theta: 1.0,
            r0: 4.5,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            Drift::Linear { strength, .. } => strength,
            Drift::ClippedDoubleWell { l_b, .. } => l_b,
        }
    }

    pub fn theta(&self) -> f64 {
        match *self {
            Drift::Linear { strength, .. } => strength,
            Drift::ClippedDoubleWell { theta, .. } => theta,
        }
    }

    pub fn r0(&self) -> f64 {
        match *self {
            Drift::Linear { r0, .. } | Drift::ClippedDoubleWell { r0, .. } => r0,
        }
    }

    #[inline]
    pub fn coord(&self, u: f64) -> f64 {
        match *self {
            Drift::Linear { strength, .. } => -strength * u,
            Drift::ClippedDoubleWell { clip, .. } => {
                if u.abs() <= clip {
                    u - u * u * u
                } else {
                    let edge = clip.copysign(u);
                    edge - edge * edge * edge + (1.0 - 3.0 * clip * clip) * (u - edge)
                }
            }
        }
    }

    #[inline]
    pub fn slope(&self, u: f64) -> f64 {
        match *self {
            Drift::Linear { strength, .. } => -strength,
            Drift::ClippedDoubleWell { clip, .. } => {
                let c = u.abs().min(clip);
                1.0 - 3.0 * c * c
            }
        }
    }

    /// (b(x) - b(x - s v)) / s for one coordinate, stable as s -> 0.
    #[inline]
    pub fn increment_quotient(&self, x: f64, v: f64, s: f64) -> f64 {
        match *self {
            Drift::Linear { strength, .. } => -strength * v,
            Drift::ClippedDoubleWell { .. } => {
                let h = s * v;
                if h.abs() > 1e-7 * (1.0 + x.abs()) {
                    (self.coord(x) - self.coord(x - h)) / s
                } else {
                    // midpoint slope is exact to O(h^2) for the cubic branch
                    self.slope(x - 0.5 * h) * v
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        for (o, &u) in out.iter_mut().zip(x) {
            *o = self.coord(u);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Zero,
    /// k(x, z) = sin(z - x) coordinate-wise.
    Sine,
    /// k(x, z) = z - x.
    Attraction,
    /// k(x, z) = sin(x); no dependence on the second argument.
    Local,
}

/// Interaction b~(x, z) = eta k(x, z). The strength is stored as ln eta
/// because thresholds of interest are far below the f64 range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub kind: KernelKind,
    pub ln_eta: f64,
}

impl Interaction {
    pub fn zero() -> Self {
        Self {
            kind: KernelKind::Zero,
            ln_eta: 0.0,
        }
    }

    pub fn new(kind: KernelKind, eta: f64) -> Self {
        if eta == 0.0 {
            return Self::zero();
        }
        Self {
            kind,
            ln_eta: eta.ln(),
        }
    }

    pub fn with_ln_eta(kind: KernelKind, ln_eta: f64) -> Self {
        Self { kind, ln_eta }
    }

    pub fn is_zero(&self) -> bool {
        self.kind == KernelKind::Zero
    }

    pub fn eta(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            self.ln_eta.exp()
        }
    }

    /// Joint Lipschitz constant of k (eta = 1).
    pub fn unit_lipschitz(&self) -> f64 {
        match self.kind {
            KernelKind::Zero => 0.0,
            _ => 1.0,
        }
    }

    /// ln L_b~; `None` for the zero kernel.
    pub fn ln_lipschitz(&self) -> Option<f64> {
        (!self.is_zero()).then(|| self.ln_eta + self.unit_lipschitz().ln())
    }

    pub fn lipschitz(&self) -> f64 {
        self.eta() * self.unit_lipschitz()
    }

    /// k(x, z) for one coordinate.
    #[inline]
    pub fn unit_coord(&self, x: f64, z: f64) -> f64 {
        match self.kind {
            KernelKind::Zero => 0.0,
            KernelKind::Sine => (z - x).sin(),
            KernelKind::Attraction => z - x,
            KernelKind::Local => x.sin(),
        }
    }

    pub fn eval(&self, x: &[f64], z: &[f64], out: &mut [f64]) {
        let eta = self.eta();
        for ((o, &a), &b) in out.iter_mut().zip(x).zip(z) {
            *o = eta * self.unit_coord(a, b);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsModel {
    pub dim: usize,
    pub gamma: f64,
    pub drift: Drift,
    pub interaction: Interaction,
}

impl DynamicsModel {
    pub fn new(dim: usize, gamma: f64, drift: Drift, interaction: Interaction) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid("gamma", format!("{gamma} must be positive")));
        }
        if !(drift.lipschitz() > 0.0 && drift.theta() > 0.0 && drift.r0() >= 0.0) {
            return Err(invalid("drift", "declared constants must be positive"));
        }
        Ok(Self {
            dim,
            gamma,
            drift,
            interaction,
        })
    }

    /// L_b^2 / gamma^2 < 3 theta / 4.
    pub fn check_friction(&self) -> Result<()> {
        let lhs = self.drift.lipschitz().powi(2) / (self.gamma * self.gamma);
        let rhs = 0.75 * self.drift.theta();
        if lhs < rhs {
            Ok(())
        } else {
            Err(Error::FrictionCondition { lhs, rhs })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

/// Outcome of one falsification battery. `worst` is the extreme observed
/// ratio against the declared constant; a pass means it never crossed 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub worst: f64,
    pub pass: bool,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub samples: usize,
    /// max |b(x) - b(x')| / (L_b |x - x'|)
    pub drift_lipschitz: Check,
    /// min -<b(x) - b(x'), x - x'> / (theta |x - x'|^2) over |x - x'| > R0
    pub dissipativity: Check,
    /// max |k(x,z) - k(x',z')| / (L_k (|x - x'| + |z - z'|)), eta factored out
    pub kernel_lipschitz: Check,
    pub friction_lhs: f64,
    pub friction_rhs: f64,
    pub friction_pass: bool,
    /// 1 + L_b + L_b~, the monotonicity constant of the well-posedness argument
    pub monotone_constant: f64,
    /// |b(0)| and |b~(0, 0)|, the growth-condition intercepts
    pub drift_at_origin: f64,
    pub kernel_at_origin: f64,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.drift_lipschitz.pass
            && self.dissipativity.pass
            && self.kernel_lipschitz.pass
            && self.friction_pass
    }
}

const SLACK: f64 = 1e-9;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn random_point<R: Rng + ?Sized>(rng: &mut R, dim: usize, half_width: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| rng.gen_range(-half_width..half_width))
        .collect()
}

fn random_direction<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v = random_point(rng, dim, 1.0);
        let n = norm(&v);
        if n > 1e-3 && n <= 1.0 {
            return v.iter().map(|a| a / n).collect();
        }
    }
}

/// Random pair at log-uniform separation in [1e-6, max_sep].
fn random_pair<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    half_width: f64,
    min_sep: f64,
    max_sep: f64,
) -> (Vec<f64>, Vec<f64>) {
    let x = random_point(rng, dim, half_width);
    let dir = random_direction(rng, dim);
    let sep = (min_sep.ln() + rng.gen::<f64>() * (max_sep.ln() - min_sep.ln())).exp();
    let y = x.iter().zip(&dir).map(|(a, d)| a + sep * d).collect();
    (x, y)
}

/// Falsifies the declared drift and kernel constants on random pairs.
pub fn validate_assumptions<R: Rng + ?Sized>(
    model: &DynamicsModel,
    samples: usize,
    rng: &mut R,
) -> ValidationReport {
    let d = model.dim;
    let drift = model.drift;
    let l_b = drift.lipschitz();
    let theta = drift.theta();
    let r0 = drift.r0();
    let box_half = 4.0 * r0.max(2.0);
    let mut bx = vec![0.0; d];
    let mut by = vec![0.0; d];

    let mut lip = Check {
        worst: 0.0,
        pass: true,
        witness: None,
    };
    let mut diss = Check {
        worst: f64::INFINITY,
        pass: true,
        witness: None,
    };
    let mut ker = Check {
        worst: 0.0,
        pass: true,
        witness: None,
    };

    for _ in 0..samples {
        let (x, y) = random_pair(rng, d, box_half, 1e-6, 2.0 * box_half);
        drift.eval(&x, &mut bx);
        drift.eval(&y, &mut by);
        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let db: Vec<f64> = bx.iter().zip(&by).map(|(a, b)| a - b).collect();
        let ratio = norm(&db) / (l_b * norm(&diff));
        if ratio > lip.worst {
            lip.worst = ratio;
            if ratio > 1.0 + SLACK {
                lip.pass = false;
                lip.witness = Some(Witness {
                    first: x.clone(),
                    second: y.clone(),
                });
            }
        }

        let (x, y) = random_pair(
            rng,
            d,
            box_half,
            r0.max(1e-6) * (1.0 + 1e-9),
            4.0 * box_half,
        );
        drift.eval(&x, &mut bx);
        drift.eval(&y, &mut by);
        let mut inner = 0.0;
        let mut sq = 0.0;
        for k in 0..d {
            let v = x[k] - y[k];
            inner += (bx[k] - by[k]) * v;
            sq += v * v;
        }
        let ratio = -inner / (theta * sq);
        if ratio < diss.worst {
            diss.worst = ratio;
            if ratio < 1.0 - SLACK {
                diss.pass = false;
                diss.witness = Some(Witness {
                    first: x.clone(),
                    second: y.clone(),
                });
            }
        }

        let unit = model.interaction.unit_lipschitz();
        if unit > 0.0 {
            let (x, x2) = random_pair(rng, d, box_half, 1e-6, box_half);
            let (z, z2) = random_pair(rng, d, box_half, 1e-6, box_half);
            let mut num = 0.0;
            for k in 0..d {
                let a = model.interaction.unit_coord(x[k], z[k]);
                let b = model.interaction.unit_coord(x2[k], z2[k]);
                num += (a - b) * (a - b);
            }
            let sep = norm(&x.iter().zip(&x2).map(|(a, b)| a - b).collect::<Vec<_>>())
                + norm(&z.iter().zip(&z2).map(|(a, b)| a - b).collect::<Vec<_>>());
            let ratio = num.sqrt() / (unit * sep);
            if ratio > ker.worst {
                ker.worst = ratio;
                if ratio > 1.0 + SLACK {
                    ker.pass = false;
                    let mut first = x.clone();
                    first.extend(&z);
                    let mut second = x2.clone();
                    second.extend(&z2);
                    ker.witness = Some(Witness { first, second });
                }
            }
        }
    }
    if !diss.worst.is_finite() {
        diss.worst = 0.0;
    }

    let friction_lhs = l_b * l_b / (model.gamma * model.gamma);
    let friction_rhs = 0.75 * theta;
    let zero = vec![0.0; d];
    let mut b0 = vec![0.0; d];
    drift.eval(&zero, &mut b0);
    let k0: f64 = (0..d)
        .map(|_| model.interaction.eta() * model.interaction.unit_coord(0.0, 0.0))
        .map(|a| a * a)
        .sum::<f64>()
        .sqrt();
    ValidationReport {
        samples,
        drift_lipschitz: lip,
        dissipativity: diss,
        kernel_lipschitz: ker,
        friction_lhs,
        friction_rhs,
        friction_pass: friction_lhs < friction_rhs,
        monotone_constant: 1.0 + l_b + model.interaction.lipschitz(),
        drift_at_origin: norm(&b0),
        kernel_at_origin: k0,
    }
}
