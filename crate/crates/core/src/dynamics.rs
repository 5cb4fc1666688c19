//! Event-driven simulation of the mean-field particle system and of law-proxy
//! clouds for the McKean-Vlasov dynamic.
//!
//! Jump times are exact: every particle carries its own exponential clock at
//! the truncated rate Λ_δ. Between jumps the drift is integrated with explicit
//! midpoint steps no longer than `dt_max`. The interaction only enters through
//! per-coordinate averages of the other positions (a [`FieldSummary`]); these
//! are frozen over one macro step, taken at the predicted midpoint positions.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::levy::LevyModel;
use crate::metrics::{DynamicsModel, KernelKind};
use crate::stats::Summary;
use crate::{invalid, Error, Result};

/// Smallest law-proxy cloud accepted by [`simulate_mckv_law`].
pub const MIN_CLOUD: usize = 64;

pub const DEFAULT_RECORD_TIMES: [f64; 7] = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0];

/// Initial law on ℝ^{2d}; parameters apply to every coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialLaw {
    Point {
        x: f64,
        y: f64,
    },
    Gaussian {
        mean_x: f64,
        mean_y: f64,
        std: f64,
    },
    /// Uniform on the ball of the given radius in ℝ^{2d}.
    UniformBall {
        center_x: f64,
        center_y: f64,
        radius: f64,
    },
}

impl InitialLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            InitialLaw::Point { x, y } => x.is_finite() && y.is_finite(),
            InitialLaw::Gaussian {
                mean_x,
                mean_y,
                std,
            } => mean_x.is_finite() && mean_y.is_finite() && std >= 0.0 && std.is_finite(),
            InitialLaw::UniformBall {
                center_x,
                center_y,
                radius,
            } => {
                center_x.is_finite() && center_y.is_finite() && radius >= 0.0 && radius.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(
                "initial",
                format!("{self:?} has invalid parameters"),
            ))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, x: &mut [f64], y: &mut [f64]) {
        match *self {
            InitialLaw::Point { x: px, y: py } => {
                x.fill(px);
                y.fill(py);
            }
            InitialLaw::Gaussian {
                mean_x,
                mean_y,
                std,
            } => {
                for u in x.iter_mut() {
                    *u = mean_x + std * rng.sample::<f64, _>(StandardNormal);
                }
                for u in y.iter_mut() {
                    *u = mean_y + std * rng.sample::<f64, _>(StandardNormal);
                }
            }
            InitialLaw::UniformBall {
                center_x,
                center_y,
                radius,
            } => {
                let n = x.len() + y.len();
                let mut g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                let r = radius * rng.gen::<f64>().powf(1.0 / n as f64) / norm;
                g.iter_mut().for_each(|v| *v *= r);
                for (u, v) in x.iter_mut().zip(&g) {
                    *u = center_x + v;
                }
                for (u, v) in y.iter_mut().zip(&g[x.len()..]) {
                    *u = center_y + v;
                }
            }
        }
    }

    /// E(|X|^2 + |Y|^2) under the law.
    pub fn second_moment(&self, dim: usize) -> f64 {
        let d = dim as f64;
        match *self {
            InitialLaw::Point { x, y } => d * (x * x + y * y),
            InitialLaw::Gaussian {
                mean_x,
                mean_y,
                std,
            } => d * (mean_x * mean_x + mean_y * mean_y + 2.0 * std * std),
            InitialLaw::UniformBall {
                center_x,
                center_y,
                radius,
            } => {
                d * (center_x * center_x + center_y * center_y)
                    + radius * radius * 2.0 * d / (2.0 * d + 2.0)
            }
        }
    }

    /// E|X|^2 under the law.
    pub fn second_moment_x(&self, dim: usize) -> f64 {
        let d = dim as f64;
        match *self {
            InitialLaw::Point { x, .. } => d * x * x,
            InitialLaw::Gaussian { mean_x, std, .. } => d * (mean_x * mean_x + std * std),
            InitialLaw::UniformBall {
                center_x, radius, ..
            } => {
                // each of the 2d coordinates has variance R^2 / (2d + 2)
                d * (center_x * center_x + radius * radius / (2.0 * d + 2.0))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationParams {
    /// Longest drift substep.
    pub dt_max: f64,
    pub t_end: f64,
    pub record_times: Vec<f64>,
    pub seed: u64,
}

impl SimulationParams {
    pub fn new(dt_max: f64, t_end: f64, record_times: Vec<f64>, seed: u64) -> Result<Self> {
        let p = Self {
            dt_max,
            t_end,
            record_times,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return Err(invalid("dt_max", "must be positive"));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(invalid("t_end", "must be nonnegative"));
        }
        if self.record_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("record_times", "must be strictly increasing"));
        }
        if self
            .record_times
            .iter()
            .any(|&t| !(0.0..=self.t_end).contains(&t))
        {
            return Err(invalid("record_times", "must lie in [0, t_end]"));
        }
        Ok(())
    }
}

/// Macro-step boundaries shared by every simulation of one experiment. Each
/// gap between consecutive knots (0, record times, t_end) is cut into equal
/// steps no longer than dt_max, so record times are hit exactly and clouds
/// and their consumers step in lockstep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub times: Vec<f64>,
    /// index into `times` of each record time
    pub record_steps: Vec<usize>,
}

impl TimeGrid {
    pub fn new(params: &SimulationParams) -> Result<Self> {
        params.validate()?;
        let mut knots = vec![0.0];
        knots.extend(params.record_times.iter().copied().filter(|&t| t > 0.0));
        if params.t_end > *knots.last().unwrap() {
            knots.push(params.t_end);
        }
        let mut times = vec![0.0];
        for w in knots.windows(2) {
            let gap = w[1] - w[0];
            let n = (gap / params.dt_max).ceil().max(1.0) as usize;
            for k in 1..n {
                times.push(w[0] + gap * k as f64 / n as f64);
            }
            times.push(w[1]);
        }
        let record_steps = params
            .record_times
            .iter()
            .map(|&t| {
                times
                    .iter()
                    .position(|&s| s == t)
                    .expect("record time is a knot")
            })
            .collect();
        Ok(Self {
            times,
            record_steps,
        })
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn step_len(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }
}

/// Per-coordinate averages of a point cloud that determine the interaction
/// field of every coordinate-wise kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub mean: Vec<f64>,
    pub sin: Vec<f64>,
    pub cos: Vec<f64>,
}

impl FieldSummary {
    pub fn of(points: &[f64], dim: usize, kind: KernelKind) -> Self {
        Self::predicted(points, points, dim, 0.0, kind)
    }

    /// Summary of the positions x + lead · y.
    pub fn predicted(x: &[f64], y: &[f64], dim: usize, lead: f64, kind: KernelKind) -> Self {
        let n = (x.len() / dim) as f64;
        let mut s = Self {
            mean: vec![0.0; dim],
            sin: vec![0.0; dim],
            cos: vec![0.0; dim],
        };
        match kind {
            KernelKind::Zero | KernelKind::Local => {}
            KernelKind::Attraction => {
                for (i, (&p, &v)) in x.iter().zip(y).enumerate() {
                    s.mean[i % dim] += p + lead * v;
                }
            }
            KernelKind::Sine => {
                for (i, (&p, &v)) in x.iter().zip(y).enumerate() {
                    let (sn, cs) = (p + lead * v).sin_cos();
                    s.sin[i % dim] += sn;
                    s.cos[i % dim] += cs;
                }
            }
        }
        for k in 0..dim {
            s.mean[k] /= n;
            s.sin[k] /= n;
            s.cos[k] /= n;
        }
        s
    }

    /// ∫ k(u, z) μ(dz) in coordinate `k` for the unit-strength kernel.
    #[inline]
    pub fn unit(&self, kind: KernelKind, k: usize, u: f64) -> f64 {
        match kind {
            KernelKind::Zero => 0.0,
            KernelKind::Sine => {
                let (s, c) = u.sin_cos();
                self.sin[k] * c - self.cos[k] * s
            }
            KernelKind::Attraction => self.mean[k] - u,
            KernelKind::Local => u.sin(),
        }
    }
}

/// N particles (X^i, Y^i) in ℝ^d × ℝ^d, coordinates stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    dim: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    t: f64,
    next_jump: Vec<f64>,
    jumps: u64,
}

impl ParticleEnsemble {
    pub fn new(dim: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if dim == 0 || x.is_empty() || !x.len().is_multiple_of(dim) || x.len() != y.len() {
            return Err(invalid(
                "ensemble",
                "need N >= 1 particles with matching X and Y",
            ));
        }
        let e = Self {
            dim,
            x,
            y,
            t: 0.0,
            next_jump: Vec::new(),
            jumps: 0,
        };
        e.check_finite()?;
        Ok(e)
    }

    pub fn sample<R: Rng + ?Sized>(
        law: &InitialLaw,
        n: usize,
        dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        law.validate()?;
        let mut x = vec![0.0; n * dim];
        let mut y = vec![0.0; n * dim];
        for i in 0..n {
            law.sample(
                rng,
                &mut x[i * dim..(i + 1) * dim],
                &mut y[i * dim..(i + 1) * dim],
            );
        }
        Self::new(dim, x, y)
    }

    pub fn n(&self) -> usize {
        self.x.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Jumps applied since construction.
    pub fn jumps(&self) -> u64 {
        self.jumps
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.y[i * self.dim..(i + 1) * self.dim]
    }

    /// States (x, y) ∈ ℝ^{2d} concatenated particle by particle.
    pub fn states(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.x.len());
        for i in 0..self.n() {
            out.extend_from_slice(self.position(i));
            out.extend_from_slice(self.velocity(i));
        }
        out
    }

    /// Per-particle |X^i|^2 and |Y^i|^2.
    pub fn squared_norms(&self) -> (Vec<f64>, Vec<f64>) {
        let sq = |v: &[f64]| -> Vec<f64> {
            v.chunks(self.dim)
                .map(|c| c.iter().map(|u| u * u).sum())
                .collect()
        };
        (sq(&self.x), sq(&self.y))
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.x.iter().chain(&self.y).all(|u| u.is_finite()) {
            Ok(())
        } else {
            Err(Error::BlowUp { t: self.t })
        }
    }

    fn arm_clocks<R: Rng + ?Sized>(&mut self, rate: f64, rng: &mut R) {
        if self.next_jump.len() != self.n() {
            let t = self.t;
            self.next_jump = (0..self.n()).map(|_| t + waiting_time(rate, rng)).collect();
        }
    }
}

#[inline]
pub(crate) fn waiting_time<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    if rate > 0.0 {
        Exp::new(rate).expect("positive rate").sample(rng)
    } else {
        f64::INFINITY
    }
}

pub(crate) fn check_dims(model: &DynamicsModel, levy: &LevyModel) -> Result<()> {
    if model.dim != levy.dim {
        return Err(invalid(
            "dim",
            format!(
                "dynamics in dimension {} but jumps in {}",
                model.dim, levy.dim
            ),
        ));
    }
    Ok(())
}

/// (Y^i, b(X^i) + N^-1 Σ_j b~(X^i, X^j) - γ Y^i), the sum including j = i.
pub fn drift_meanfield(i: usize, ensemble: &ParticleEnsemble, model: &DynamicsModel) -> Vec<f64> {
    let d = ensemble.dim;
    let n = ensemble.n();
    let xi = ensemble.position(i);
    let yi = ensemble.velocity(i);
    let mut out = vec![0.0; 2 * d];
    out[..d].copy_from_slice(yi);
    let mut field = vec![0.0; d];
    let mut tmp = vec![0.0; d];
    for j in 0..n {
        model.interaction.eval(xi, ensemble.position(j), &mut tmp);
        for (f, t) in field.iter_mut().zip(&tmp) {
            *f += t;
        }
    }
    for k in 0..d {
        out[d + k] = model.drift.coord(xi[k]) + field[k] / n as f64 - model.gamma * yi[k];
    }
    out
}

#[inline]
pub(crate) fn accel(
    model: &DynamicsModel,
    eta: f64,
    field: &FieldSummary,
    k: usize,
    x: f64,
    y: f64,
) -> f64 {
    let mut a = model.drift.coord(x) - model.gamma * y;
    if eta != 0.0 {
        a += eta * field.unit(model.interaction.kind, k, x);
    }
    a
}

// Integrates one coordinate over `span` under a frozen field.
#[inline]
fn drift_span(
    model: &DynamicsModel,
    eta: f64,
    field: &FieldSummary,
    k: usize,
    x: &mut f64,
    y: &mut f64,
    span: f64,
    dt_max: f64,
) {
    if span <= 0.0 {
        return;
    }
    let n = (span / dt_max).ceil().max(1.0);
    let h = span / n;
    for _ in 0..n as usize {
        let a0 = accel(model, eta, field, k, *x, *y);
        let xm = *x + 0.5 * h * *y;
        let ym = *y + 0.5 * h * a0;
        let am = accel(model, eta, field, k, xm, ym);
        *x += h * ym;
        *y += h * am;
    }
}

/// Advances every particle by `h` under the frozen `field`, applying each
/// particle's jumps at their exact times.
pub fn macro_step<R: Rng + ?Sized>(
    ensemble: &mut ParticleEnsemble,
    h: f64,
    dt_max: f64,
    model: &DynamicsModel,
    levy: &LevyModel,
    field: &FieldSummary,
    rng: &mut R,
) -> Result<()> {
    let rate = levy.truncated_rate();
    ensemble.arm_clocks(rate, rng);
    let d = ensemble.dim;
    let eta = model.interaction.eta();
    let (t0, t1) = (ensemble.t, ensemble.t + h);
    for i in 0..ensemble.n() {
        let mut t = t0;
        loop {
            let te = ensemble.next_jump[i].min(t1);
            for k in 0..d {
                let j = i * d + k;
                let (mut x, mut y) = (ensemble.x[j], ensemble.y[j]);
                drift_span(model, eta, field, k, &mut x, &mut y, te - t, dt_max);
                ensemble.x[j] = x;
                ensemble.y[j] = y;
            }
            t = te;
            if ensemble.next_jump[i] > t1 {
                break;
            }
            // the built-in families are one-dimensional, so d = 1 here
            ensemble.y[i * d] += levy.sample_jump_1d(rng);
            ensemble.jumps += 1;
            ensemble.next_jump[i] += waiting_time(rate, rng);
        }
    }
    ensemble.t = t1;
    ensemble.check_finite()
}

/// One global event: an exponential time at rate N Λ_δ (capped at t_end),
/// exact mean-field drift up to it, then a jump of a uniformly chosen
/// particle. Returns the index that jumped, or `None` once t_end is reached.
pub fn step_ensemble<R: Rng + ?Sized>(
    ensemble: &mut ParticleEnsemble,
    model: &DynamicsModel,
    levy: &LevyModel,
    params: &SimulationParams,
    rng: &mut R,
) -> Result<Option<usize>> {
    check_dims(model, levy)?;
    let n = ensemble.n();
    let t_event = ensemble.t + waiting_time(n as f64 * levy.truncated_rate(), rng);
    let target = t_event.min(params.t_end);
    let span = target - ensemble.t;
    if span > 0.0 {
        let steps = (span / params.dt_max).ceil().max(1.0);
        let h = span / steps;
        for _ in 0..steps as usize {
            system_midpoint(ensemble, model, h);
        }
    }
    ensemble.t = target;
    ensemble.check_finite()?;
    if t_event > params.t_end {
        return Ok(None);
    }
    let i = rng.gen_range(0..n);
    ensemble.y[i * ensemble.dim] += levy.sample_jump_1d(rng);
    ensemble.jumps += 1;
    Ok(Some(i))
}

// Midpoint step of the full interacting system, field re-evaluated at both stages.
fn system_midpoint(e: &mut ParticleEnsemble, model: &DynamicsModel, h: f64) {
    let d = e.dim;
    let kind = model.interaction.kind;
    let eta = model.interaction.eta();
    let f0 = FieldSummary::of(&e.x, d, kind);
    let xm: Vec<f64> = e.x.iter().zip(&e.y).map(|(x, y)| x + 0.5 * h * y).collect();
    let ym: Vec<f64> =
        e.x.iter()
            .zip(&e.y)
            .enumerate()
            .map(|(j, (&x, &y))| y + 0.5 * h * accel(model, eta, &f0, j % d, x, y))
            .collect();
    let fm = FieldSummary::of(&xm, d, kind);
    for j in 0..e.x.len() {
        e.x[j] += h * ym[j];
        e.y[j] += h * accel(model, eta, &fm, j % d, xm[j], ym[j]);
    }
}

/// Where the interaction field of an evolving ensemble comes from.
#[derive(Debug, Clone, Copy)]
pub enum Drive<'a> {
    /// The ensemble's own empirical measure, as in the particle system.
    MeanField,
    /// A precomputed law proxy, as in the decoupled dynamic.
    Proxy(&'a LawProxy),
}

/// Positions and velocities at a record time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub jumps: u64,
}

impl Snapshot {
    fn of(e: &ParticleEnsemble) -> Self {
        Self {
            t: e.t,
            x: e.x.clone(),
            y: e.y.clone(),
            jumps: e.jumps,
        }
    }
}

/// Runs an ensemble along the grid and snapshots it at every record time.
pub fn evolve<R: Rng + ?Sized>(
    ensemble: &mut ParticleEnsemble,
    grid: &TimeGrid,
    dt_max: f64,
    model: &DynamicsModel,
    levy: &LevyModel,
    drive: Drive,
    rng: &mut R,
) -> Result<(Vec<FieldSummary>, Vec<Snapshot>)> {
    check_dims(model, levy)?;
    if let Drive::Proxy(p) = drive {
        if p.grid != *grid {
            return Err(invalid(
                "proxy",
                "law proxy was simulated on a different time grid",
            ));
        }
    }
    let kind = model.interaction.kind;
    let d = ensemble.dim;
    let mut fields = Vec::with_capacity(grid.steps());
    let mut snaps = Vec::with_capacity(grid.record_steps.len());
    let mut next_record = 0;
    let mut record = |k: usize, e: &ParticleEnsemble, snaps: &mut Vec<Snapshot>| {
        while next_record < grid.record_steps.len() && grid.record_steps[next_record] == k {
            snaps.push(Snapshot::of(e));
            next_record += 1;
        }
    };
    record(0, ensemble, &mut snaps);
    for k in 0..grid.steps() {
        let h = grid.step_len(k);
        let field = match drive {
            Drive::MeanField => FieldSummary::predicted(&ensemble.x, &ensemble.y, d, 0.5 * h, kind),
            Drive::Proxy(p) => p.fields[k].clone(),
        };
        macro_step(ensemble, h, dt_max, model, levy, &field, rng)?;
        ensemble.t = grid.times[k + 1];
        fields.push(field);
        record(k + 1, ensemble, &mut snaps);
    }
    Ok((fields, snaps))
}

/// An M-particle cloud standing in for the McKean-Vlasov law: its field
/// summary at every macro step plus snapshots at the record times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawProxy {
    pub grid: TimeGrid,
    pub fields: Vec<FieldSummary>,
    pub snapshots: Vec<Snapshot>,
}

pub fn simulate_mckv_law<R: Rng + ?Sized>(
    initial: &InitialLaw,
    m: usize,
    model: &DynamicsModel,
    levy: &LevyModel,
    params: &SimulationParams,
    rng: &mut R,
) -> Result<LawProxy> {
    if m < MIN_CLOUD {
        return Err(invalid("M", format!("cloud size {m} is below {MIN_CLOUD}")));
    }
    let grid = TimeGrid::new(params)?;
    let mut cloud = ParticleEnsemble::sample(initial, m, model.dim, rng)?;
    let (fields, snapshots) = evolve(
        &mut cloud,
        &grid,
        params.dt_max,
        model,
        levy,
        Drive::MeanField,
        rng,
    )?;
    Ok(LawProxy {
        grid,
        fields,
        snapshots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub t: f64,
    pub x2: Summary,
    pub y2: Summary,
    pub exceeds_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTrace {
    pub bound: f64,
    pub rows: Vec<MomentRow>,
    pub violations: usize,
}

/// E|X_t|^2 and E|Y_t|^2 at each snapshot, flagged against the bound C3.
pub fn second_moment_trace(snapshots: &[Snapshot], dim: usize, c3: f64) -> MomentTrace {
    let sq = |v: &[f64]| -> Vec<f64> {
        v.chunks(dim)
            .map(|c| c.iter().map(|u| u * u).sum())
            .collect()
    };
    let rows: Vec<MomentRow> = snapshots
        .iter()
        .map(|s| {
            let x2 = Summary::of(&sq(&s.x));
            MomentRow {
                t: s.t,
                x2,
                y2: Summary::of(&sq(&s.y)),
                exceeds_bound: x2.mean > c3,
            }
        })
        .collect();
    let violations = rows.iter().filter(|r| r.exceeds_bound).count();
    MomentTrace {
        bound: c3,
        rows,
        violations,
    }
}

fn discrepancy_with(
    xi: &[f64],
    copies: &FieldSummary,
    cloud: &FieldSummary,
    kind: KernelKind,
) -> f64 {
    xi.iter()
        .enumerate()
        .map(|(k, &u)| {
            let diff = cloud.unit(kind, k, u) - copies.unit(kind, k, u);
            diff * diff
        })
        .sum::<f64>()
        .sqrt()
}

/// A^i = |∫ k(X^i, z) μ(dz) - N^-1 Σ_j k(X^i, X^j)| for the unit-strength
/// kernel, μ approximated by the cloud. The quantity is linear in the
/// interaction strength, so the bound can be checked at η = 1.
pub fn interaction_discrepancy(
    i: usize,
    copies_x: &[f64],
    cloud_x: &[f64],
    dim: usize,
    kind: KernelKind,
) -> f64 {
    let copies = FieldSummary::of(copies_x, dim, kind);
    let cloud = FieldSummary::of(cloud_x, dim, kind);
    discrepancy_with(&copies_x[i * dim..(i + 1) * dim], &copies, &cloud, kind)
}

/// A^i for every i at once.
pub fn discrepancy_batch(
    copies_x: &[f64],
    cloud_x: &[f64],
    dim: usize,
    kind: KernelKind,
) -> Vec<f64> {
    let copies = FieldSummary::of(copies_x, dim, kind);
    let cloud = FieldSummary::of(cloud_x, dim, kind);
    copies_x
        .chunks(dim)
        .map(|xi| discrepancy_with(xi, &copies, &cloud, kind))
        .collect()
}

/// L (√2/√N + 2/N) (E|X|^2)^(1/2).
pub fn discrepancy_bound(lipschitz: f64, n: usize, second_moment: f64) -> f64 {
    let n = n as f64;
    lipschitz * (2f64.sqrt() / n.sqrt() + 2.0 / n) * second_moment.sqrt()
}
