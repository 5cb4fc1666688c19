//! The refined basic / synchronous switching coupling.
//!
//! A coupled pair is stored as the first marginal (x, y) together with the
//! deviation (v, w) = ((x - x̄), (y - ȳ)) / s for a fixed scale s = e^ln_s.
//! With s = 1 this is the plain pair. Chaos runs use s = η: the deviations
//! there are proportional to the interaction strength, which can sit far
//! below the f64 range, and storing them divided by s keeps them O(1).
//!
//! Both marginals share one Poisson clock per pair. At a jump the first
//! marginal moves by z; in the refined region (Δ ≤ D_Γ at the left limit)
//! the second one moves by z ± γ(q)_κ or z according to the thinning
//! probabilities ½ρ(∓x*, z), and by z otherwise.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    check_dims, evolve, waiting_time, Drive, FieldSummary, InitialLaw, LawProxy, ParticleEnsemble,
    SimulationParams, TimeGrid,
};
use crate::levy::LevyModel;
use crate::metrics::{ConstantsReport, DynamicsModel};
use crate::rng::{stream, Purpose};
use crate::stats::{linear_fit, ratio_of_means, LinearFit, Summary};
use crate::wasserstein::{
    ks_test, w1_assignment, EmpiricalSample, GroundMetric, KsTest, ASSIGNMENT_CAP,
};
use crate::{invalid, Result};

/// Relative width of the band around D_Γ counted by the boundary diagnostic.
pub const BOUNDARY_BAND: f64 = 0.05;

/// (1 ∧ κ/|q|) q, and 0 for q = 0.
pub fn kappa_clip(q: &[f64], kappa: f64) -> Vec<f64> {
    let norm = q.iter().map(|u| u * u).sum::<f64>().sqrt();
    if norm == 0.0 {
        return vec![0.0; q.len()];
    }
    let f = (kappa / norm).min(1.0);
    q.iter().map(|u| f * u).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// second marginal jumps by z + x*
    Plus,
    /// second marginal jumps by z - x*
    Minus,
    Sync,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingMode {
    #[default]
    Faithful,
    /// Deliberately broken: the -x* branch falls through to synchronous.
    SkipMinusBranch,
}

/// Thinning of one jump z with uniform u, for the 1D displacement x*.
pub fn select_branch(levy: &LevyModel, x_star: f64, z: f64, u: f64, mode: CouplingMode) -> Branch {
    let p_plus = 0.5 * ratio(levy, -x_star, z);
    let p_minus = 0.5 * ratio(levy, x_star, z);
    assert!(
        p_plus + p_minus <= 1.0,
        "thinning probabilities exceed one at x* = {x_star}, z = {z}"
    );
    if u <= p_plus {
        Branch::Plus
    } else if u <= p_plus + p_minus {
        match mode {
            CouplingMode::Faithful => Branch::Minus,
            CouplingMode::SkipMinusBranch => Branch::Sync,
        }
    } else {
        Branch::Sync
    }
}

#[inline]
fn ratio(levy: &LevyModel, x: f64, z: f64) -> f64 {
    levy.overlap_ratio_1d(x, z)
        .expect("jumps are drawn inside the support")
}

/// Jumps (z_first, z_second) of the two marginals for one event.
pub fn coupled_jump(
    q: &[f64],
    z: &[f64],
    u: f64,
    in_refined_region: bool,
    levy: &LevyModel,
    gamma: f64,
) -> (Vec<f64>, Vec<f64>) {
    coupled_jump_with(
        q,
        z,
        u,
        in_refined_region,
        levy,
        gamma,
        CouplingMode::Faithful,
    )
}

pub fn coupled_jump_with(
    q: &[f64],
    z: &[f64],
    u: f64,
    in_refined_region: bool,
    levy: &LevyModel,
    gamma: f64,
    mode: CouplingMode,
) -> (Vec<f64>, Vec<f64>) {
    let first = z.to_vec();
    if !in_refined_region {
        return (first, z.to_vec());
    }
    let x_star: Vec<f64> = kappa_clip(q, levy.kappa)
        .iter()
        .map(|c| gamma * c)
        .collect();
    let second = match select_branch(levy, x_star[0], z[0], u, mode) {
        Branch::Plus => z.iter().zip(&x_star).map(|(a, b)| a + b).collect(),
        Branch::Minus => z.iter().zip(&x_star).map(|(a, b)| a - b).collect(),
        Branch::Sync => z.to_vec(),
    };
    (first, second)
}

/// γ(q)_κ / s and the absolute x* = γ(q)_κ for q = s (v + w/γ); `None` when q = 0.
pub fn scaled_displacement(
    v: f64,
    w: f64,
    gamma: f64,
    kappa: f64,
    ln_s: f64,
) -> Option<(f64, f64)> {
    let q = v + w / gamma;
    if q == 0.0 {
        return None;
    }
    if q.abs().ln() + ln_s <= kappa.ln() {
        Some((gamma * q, gamma * q * ln_s.exp()))
    } else {
        let clipped = gamma * kappa.copysign(q);
        Some((clipped * (-ln_s).exp(), clipped))
    }
}

/// One pair in absolute coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledState {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub t: f64,
}

impl CoupledState {
    pub fn v(&self) -> f64 {
        self.first[0] - self.second[0]
    }

    pub fn w(&self) -> f64 {
        self.first[1] - self.second[1]
    }

    pub fn q(&self, gamma: f64) -> f64 {
        self.v() + self.w() / gamma
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventStats {
    pub events: u64,
    pub refined: u64,
    pub plus: u64,
    pub minus: u64,
    /// events with |Δ - D_Γ| < 0.05 D_Γ
    pub near_switch: u64,
}

impl EventStats {
    pub fn merge(&mut self, o: &EventStats) {
        self.events += o.events;
        self.refined += o.refined;
        self.plus += o.plus;
        self.minus += o.minus;
        self.near_switch += o.near_switch;
    }

    pub fn boundary_fraction(&self) -> f64 {
        if self.events == 0 {
            0.0
        } else {
            self.near_switch as f64 / self.events as f64
        }
    }
}

/// Field driving the second marginal.
#[derive(Debug, Clone, Copy)]
pub enum SecondDrive<'a> {
    Proxy(&'a LawProxy),
    /// The second marginals form an interacting particle system.
    MeanField,
}

/// N coupled pairs in dimension one.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSystem {
    ln_scale: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    t: f64,
    next_jump: Vec<f64>,
    pub stats: EventStats,
}

struct PairCtx<'a> {
    model: &'a DynamicsModel,
    eta: f64,
    /// e^(ln η - ln s)
    rel: f64,
    s: f64,
}

impl PairCtx<'_> {
    #[inline]
    fn accel(
        &self,
        fa: &FieldSummary,
        fb: &FieldSummary,
        x: f64,
        y: f64,
        v: f64,
        w: f64,
    ) -> (f64, f64) {
        let m = self.model;
        let kind = m.interaction.kind;
        let mut ax = m.drift.coord(x) - m.gamma * y;
        let mut aw = m.drift.increment_quotient(x, v, self.s) - m.gamma * w;
        if self.eta != 0.0 {
            ax += self.eta * fa.unit(kind, 0, x);
        }
        if self.rel != 0.0 {
            aw += self.rel * (fa.unit(kind, 0, x) - fb.unit(kind, 0, x - self.s * v));
        }
        (ax, aw)
    }
}

impl PairSystem {
    /// Pairs from absolute states of both marginals (scale 1).
    pub fn from_states(x: Vec<f64>, y: Vec<f64>, xb: &[f64], yb: &[f64]) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() || x.len() != xb.len() || x.len() != yb.len() {
            return Err(invalid(
                "pairs",
                "need equally many first and second states",
            ));
        }
        let v = x.iter().zip(xb).map(|(a, b)| a - b).collect();
        let w = y.iter().zip(yb).map(|(a, b)| a - b).collect();
        Ok(Self::raw(0.0, x, y, v, w))
    }

    /// Pairs whose marginals start at the same points, deviations measured in
    /// units of e^ln_scale.
    pub fn coincident(x: Vec<f64>, y: Vec<f64>, ln_scale: f64) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(invalid("pairs", "need at least one state"));
        }
        let n = x.len();
        Ok(Self::raw(ln_scale, x, y, vec![0.0; n], vec![0.0; n]))
    }

    fn raw(ln_scale: f64, x: Vec<f64>, y: Vec<f64>, v: Vec<f64>, w: Vec<f64>) -> Self {
        Self {
            ln_scale,
            x,
            y,
            v,
            w,
            t: 0.0,
            next_jump: Vec::new(),
            stats: EventStats::default(),
        }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn ln_scale(&self) -> f64 {
        self.ln_scale
    }

    pub fn second_x(&self) -> Vec<f64> {
        let s = self.ln_scale.exp();
        self.x.iter().zip(&self.v).map(|(x, v)| x - s * v).collect()
    }

    pub fn second_y(&self) -> Vec<f64> {
        let s = self.ln_scale.exp();
        self.y.iter().zip(&self.w).map(|(y, w)| y - s * w).collect()
    }

    pub fn pair(&self, i: usize) -> CoupledState {
        let s = self.ln_scale.exp();
        CoupledState {
            first: vec![self.x[i], self.y[i]],
            second: vec![self.x[i] - s * self.v[i], self.y[i] - s * self.w[i]],
            t: self.t,
        }
    }

    /// |(v_i, w_i)| in units of e^ln_scale.
    pub fn deviation_norms(&self) -> Vec<f64> {
        self.v
            .iter()
            .zip(&self.w)
            .map(|(v, w)| v.hypot(*w))
            .collect()
    }

    /// ρ(e^ln_s v_i, e^ln_s w_i) / e^ln_s.
    pub fn rho_values(&self, consts: &ConstantsReport) -> Vec<f64> {
        self.v
            .iter()
            .zip(&self.w)
            .map(|(&v, &w)| consts.rho_deviation(&[v], &[w], self.ln_scale))
            .collect()
    }

    fn check_finite(&self) -> Result<()> {
        let ok = [&self.x, &self.y, &self.v, &self.w]
            .iter()
            .all(|a| a.iter().all(|u| u.is_finite()));
        if ok {
            Ok(())
        } else {
            Err(crate::Error::BlowUp { t: self.t })
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn drift_span(
        &mut self,
        i: usize,
        ctx: &PairCtx,
        fa: &FieldSummary,
        fb: &FieldSummary,
        span: f64,
        dt_max: f64,
    ) {
        if span <= 0.0 {
            return;
        }
        let n = (span / dt_max).ceil().max(1.0);
        let h = span / n;
        let (mut x, mut y, mut v, mut w) = (self.x[i], self.y[i], self.v[i], self.w[i]);
        for _ in 0..n as usize {
            let (ax, aw) = ctx.accel(fa, fb, x, y, v, w);
            let (xm, ym, vm, wm) = (
                x + 0.5 * h * y,
                y + 0.5 * h * ax,
                v + 0.5 * h * w,
                w + 0.5 * h * aw,
            );
            let (bx, bw) = ctx.accel(fa, fb, xm, ym, vm, wm);
            x += h * ym;
            y += h * bx;
            v += h * wm;
            w += h * bw;
        }
        self.x[i] = x;
        self.y[i] = y;
        self.v[i] = v;
        self.w[i] = w;
    }

    fn jump<R: Rng + ?Sized>(
        &mut self,
        i: usize,
        consts: &ConstantsReport,
        levy: &LevyModel,
        mode: CouplingMode,
        rng: &mut R,
    ) {
        // the region is decided at the left limit
        let (v, w) = (self.v[i], self.w[i]);
        let refined = consts.in_refined_region(&[v], &[w], self.ln_scale);
        self.stats.events += 1;
        if consts.near_switch(&[v], &[w], self.ln_scale, BOUNDARY_BAND) {
            self.stats.near_switch += 1;
        }
        let z = levy.sample_jump_1d(rng);
        let u: f64 = rng.gen();
        self.y[i] += z;
        if !refined {
            return;
        }
        self.stats.refined += 1;
        let Some((disp, x_star)) =
            scaled_displacement(v, w, consts.gamma, levy.kappa, self.ln_scale)
        else {
            return;
        };
        match select_branch(levy, x_star, z, u, mode) {
            Branch::Plus => {
                self.w[i] -= disp;
                self.stats.plus += 1;
            }
            Branch::Minus => {
                self.w[i] += disp;
                self.stats.minus += 1;
            }
            Branch::Sync => {}
        }
    }

    /// Advances all pairs by `h` under frozen fields for both marginals.
    #[allow(clippy::too_many_arguments)]
    pub fn macro_step<R: Rng + ?Sized>(
        &mut self,
        h: f64,
        dt_max: f64,
        model: &DynamicsModel,
        levy: &LevyModel,
        consts: &ConstantsReport,
        fa: &FieldSummary,
        fb: &FieldSummary,
        mode: CouplingMode,
        rng: &mut R,
    ) -> Result<()> {
        let rate = levy.truncated_rate();
        if self.next_jump.len() != self.n() {
            let t = self.t;
            self.next_jump = (0..self.n()).map(|_| t + waiting_time(rate, rng)).collect();
        }
        let ctx = PairCtx {
            model,
            eta: model.interaction.eta(),
            rel: if model.interaction.is_zero() {
                0.0
            } else {
                (model.interaction.ln_eta - self.ln_scale).exp()
            },
            s: self.ln_scale.exp(),
        };
        let (t0, t1) = (self.t, self.t + h);
        for i in 0..self.n() {
            let mut t = t0;
            loop {
                let te = self.next_jump[i].min(t1);
                self.drift_span(i, &ctx, fa, fb, te - t, dt_max);
                t = te;
                if self.next_jump[i] > t1 {
                    break;
                }
                self.jump(i, consts, levy, mode, rng);
                self.next_jump[i] += waiting_time(rate, rng);
            }
        }
        self.t = t1;
        self.check_finite()
    }
}

/// Runs pairs along the grid; the first marginal follows `first`, the second
/// follows `second`. `on_record` sees the system at every record time.
#[allow(clippy::too_many_arguments)]
pub fn evolve_pairs<R: Rng + ?Sized>(
    system: &mut PairSystem,
    grid: &TimeGrid,
    dt_max: f64,
    model: &DynamicsModel,
    levy: &LevyModel,
    consts: &ConstantsReport,
    first: &LawProxy,
    second: SecondDrive,
    mode: CouplingMode,
    rng: &mut R,
    mut on_record: impl FnMut(&PairSystem),
) -> Result<()> {
    check_dims(model, levy)?;
    if model.dim != 1 {
        return Err(invalid(
            "dim",
            "coupled pairs are simulated in dimension one",
        ));
    }
    if first.grid != *grid || matches!(second, SecondDrive::Proxy(p) if p.grid != *grid) {
        return Err(invalid(
            "proxy",
            "law proxy was simulated on a different time grid",
        ));
    }
    let kind = model.interaction.kind;
    let mut next_record = 0;
    let mut record = |k: usize, sys: &PairSystem| {
        while next_record < grid.record_steps.len() && grid.record_steps[next_record] == k {
            on_record(sys);
            next_record += 1;
        }
    };
    record(0, system);
    for k in 0..grid.steps() {
        let h = grid.step_len(k);
        let fa = &first.fields[k];
        let own;
        let fb = match second {
            SecondDrive::Proxy(p) => &p.fields[k],
            SecondDrive::MeanField => {
                own = FieldSummary::predicted(
                    &system.second_x(),
                    &system.second_y(),
                    1,
                    0.5 * h,
                    kind,
                );
                &own
            }
        };
        system.macro_step(h, dt_max, model, levy, consts, fa, fb, mode, rng)?;
        system.t = grid.times[k + 1];
        record(k + 1, system);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialCoupling {
    /// independent draws from the two initial laws
    #[default]
    Product,
    /// both samples sorted by position and matched in order
    Comonotone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionSetup {
    pub first: InitialLaw,
    pub second: InitialLaw,
    pub cloud_size: usize,
    pub replicas: usize,
    pub initial_coupling: InitialCoupling,
    /// drive both marginals with one proxy cloud (started from `first`)
    pub shared_proxy: bool,
    /// record times at which the assignment W1 between the marginals is computed
    pub w1_times: Vec<f64>,
    pub mode: CouplingMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct W1Check {
    /// optimal assignment cost between the two marginal samples
    pub assignment: f64,
    /// mean distance of the coupled pairs in the same subsample
    pub coupled: f64,
    pub sample_size: usize,
    /// the coupled matching is feasible, so assignment <= coupled
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionRow {
    pub t: f64,
    pub rho: Summary,
    /// E ρ(t) / E ρ(0), delta-method stderr
    pub rho_ratio: Summary,
    /// paired change of ρ since the previous record time
    pub rho_change: Option<Summary>,
    pub l1: Summary,
    pub w1: Option<W1Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionResult {
    pub rows: Vec<ContractionRow>,
    pub stats: EventStats,
    pub replicas: usize,
}

impl ContractionResult {
    pub fn boundary_fraction(&self) -> f64 {
        self.stats.boundary_fraction()
    }
}

struct PairRecord {
    rho: f64,
    l1: f64,
    first: [f64; 2],
    second: [f64; 2],
}

fn proxies(
    setup_first: &InitialLaw,
    setup_second: &InitialLaw,
    shared: bool,
    m: usize,
    model: &DynamicsModel,
    levy: &LevyModel,
    params: &SimulationParams,
) -> Result<(LawProxy, Option<LawProxy>)> {
    let sim = |law: &InitialLaw, idx: u64| {
        crate::dynamics::simulate_mckv_law(
            law,
            m,
            model,
            levy,
            params,
            &mut stream(params.seed, Purpose::Cloud, idx),
        )
    };
    if shared {
        return Ok((sim(setup_first, 0)?, None));
    }
    let (a, b) = rayon::join(|| sim(setup_first, 0), || sim(setup_second, 1));
    Ok((a?, Some(b?)))
}

fn initial_pairs(setup: &ContractionSetup, seed: u64) -> Result<Vec<([f64; 2], [f64; 2])>> {
    setup.first.validate()?;
    setup.second.validate()?;
    let draw = |law: &InitialLaw, idx: u64| -> Vec<[f64; 2]> {
        let mut rng = stream(seed, Purpose::Initial, idx);
        (0..setup.replicas)
            .map(|_| {
                let (mut x, mut y) = ([0.0], [0.0]);
                law.sample(&mut rng, &mut x, &mut y);
                [x[0], y[0]]
            })
            .collect()
    };
    let mut a = draw(&setup.first, 0);
    let mut b = draw(&setup.second, 1);
    if setup.initial_coupling == InitialCoupling::Comonotone {
        a.sort_by(|p, q| p[0].total_cmp(&q[0]));
        b.sort_by(|p, q| p[0].total_cmp(&q[0]));
    }
    Ok(a.into_iter().zip(b).collect())
}

/// Coupled pairs from (μ0, μ̄0) with independent law-proxy clouds; Eρ(t) and
/// E|(V, W)|(t) at the record times.
pub fn simulate_contraction(
    setup: &ContractionSetup,
    model: &DynamicsModel,
    levy: &LevyModel,
    consts: &ConstantsReport,
    params: &SimulationParams,
) -> Result<ContractionResult> {
    if setup.replicas < 2 {
        return Err(invalid("replicas", "need at least two replicas"));
    }
    let grid = TimeGrid::new(params)?;
    let (proxy_a, proxy_b) = proxies(
        &setup.first,
        &setup.second,
        setup.shared_proxy,
        setup.cloud_size,
        model,
        levy,
        params,
    )?;
    let proxy_b = proxy_b.as_ref().unwrap_or(&proxy_a);
    let starts = initial_pairs(setup, params.seed)?;

    let traces: Vec<(Vec<PairRecord>, EventStats)> = starts
        .par_iter()
        .enumerate()
        .map(|(r, (p, pb))| {
            let mut rng = stream(params.seed, Purpose::Replica, r as u64);
            let mut sys = PairSystem::from_states(vec![p[0]], vec![p[1]], &[pb[0]], &[pb[1]])?;
            let mut recs = Vec::with_capacity(grid.record_steps.len());
            evolve_pairs(
                &mut sys,
                &grid,
                params.dt_max,
                model,
                levy,
                consts,
                &proxy_a,
                SecondDrive::Proxy(proxy_b),
                setup.mode,
                &mut rng,
                |s| {
                    let c = s.pair(0);
                    recs.push(PairRecord {
                        rho: s.rho_values(consts)[0],
                        l1: s.deviation_norms()[0],
                        first: [c.first[0], c.first[1]],
                        second: [c.second[0], c.second[1]],
                    })
                },
            )?;
            Ok((recs, sys.stats))
        })
        .collect::<Result<_>>()?;

    let mut stats = EventStats::default();
    for (_, s) in &traces {
        stats.merge(s);
    }
    let column = |k: usize, f: &dyn Fn(&PairRecord) -> f64| -> Vec<f64> {
        traces.iter().map(|(r, _)| f(&r[k])).collect()
    };
    let rho0 = column(0, &|r| r.rho);
    let mut rows = Vec::with_capacity(params.record_times.len());
    for (k, &t) in params.record_times.iter().enumerate() {
        let rho = column(k, &|r| r.rho);
        let l1 = column(k, &|r| r.l1);
        let rho_change = (k > 0).then(|| {
            let prev = column(k - 1, &|r| r.rho);
            let d: Vec<f64> = rho.iter().zip(&prev).map(|(a, b)| a - b).collect();
            Summary::of(&d)
        });
        let w1 = if setup.w1_times.contains(&t) {
            let n = traces.len().min(ASSIGNMENT_CAP);
            let pts = |g: &dyn Fn(&PairRecord) -> [f64; 2]| -> Vec<f64> {
                traces[..n].iter().flat_map(|(r, _)| g(&r[k])).collect()
            };
            let a = EmpiricalSample::new(2, pts(&|r| r.first))?;
            let b = EmpiricalSample::new(2, pts(&|r| r.second))?;
            let assignment = w1_assignment(&a, &b, GroundMetric::Euclidean)?;
            let coupled = l1[..n].iter().sum::<f64>() / n as f64;
            Some(W1Check {
                assignment,
                coupled,
                sample_size: n,
                feasible: assignment <= coupled * (1.0 + 1e-12) + 1e-300,
            })
        } else {
            None
        };
        rows.push(ContractionRow {
            t,
            rho: Summary::of(&rho),
            rho_ratio: ratio_of_means(&rho, &rho0),
            rho_change,
            l1: Summary::of(&l1),
            w1,
        });
    }
    Ok(ContractionResult {
        rows,
        stats,
        replicas: setup.replicas,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosSetup {
    pub initial: InitialLaw,
    pub cloud_size: usize,
    pub n_list: Vec<usize>,
    /// independent systems per N, at least
    pub min_replicas: usize,
    /// systems per N are raised until N · replicas reaches this
    pub particle_budget: usize,
    pub mode: CouplingMode,
}

impl ChaosSetup {
    pub fn replicas_for(&self, n: usize) -> usize {
        self.min_replicas.max(self.particle_budget.div_ceil(n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaosRow {
    pub n: usize,
    pub t: f64,
    /// E l1_N(t) in units of e^ln_scale
    pub l1: Summary,
    /// E ρ_N(t) in units of e^ln_scale
    pub rho: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosResult {
    pub ln_scale: f64,
    pub rows: Vec<ChaosRow>,
    pub stats: EventStats,
}

impl ChaosResult {
    pub fn rows_at(&self, t: f64) -> Vec<ChaosRow> {
        self.rows.iter().filter(|r| r.t == t).copied().collect()
    }

    /// Least-squares slope of ln E l1_N(t) against ln N; `None` if some mean vanishes.
    pub fn slope_at(&self, t: f64) -> Option<LinearFit> {
        let rows = self.rows_at(t);
        if rows.len() < 2 || rows.iter().any(|r| !(r.l1.mean > 0.0)) {
            return None;
        }
        let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.l1.mean.ln()).collect();
        Some(linear_fit(&x, &y))
    }
}

/// Scale used for deviations between the particle system and independent copies.
pub fn chaos_scale(model: &DynamicsModel) -> f64 {
    if model.interaction.is_zero() {
        0.0
    } else {
        model.interaction.ln_eta.min(0.0)
    }
}

/// N-particle systems coupled to N independent copies started from the same
/// draws; the copies follow one shared law-proxy cloud.
pub fn simulate_chaos(
    setup: &ChaosSetup,
    model: &DynamicsModel,
    levy: &LevyModel,
    consts: &ConstantsReport,
    params: &SimulationParams,
) -> Result<ChaosResult> {
    if setup.n_list.contains(&0) || setup.min_replicas < 2 {
        return Err(invalid(
            "n_list",
            "particle counts must be positive and replicas at least two",
        ));
    }
    setup.initial.validate()?;
    let grid = TimeGrid::new(params)?;
    let proxy = crate::dynamics::simulate_mckv_law(
        &setup.initial,
        setup.cloud_size,
        model,
        levy,
        params,
        &mut stream(params.seed, Purpose::Cloud, 0),
    )?;
    let ln_scale = chaos_scale(model);
    let mut rows = Vec::new();
    let mut stats = EventStats::default();
    for &n in &setup.n_list {
        let replicas = setup.replicas_for(n);
        let traces: Vec<(Vec<(f64, f64)>, EventStats)> = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let id = ((n as u64) << 24) | r as u64;
                let mut init = stream(params.seed, Purpose::Initial, id);
                let mut rng = stream(params.seed, Purpose::Replica, id);
                let e = ParticleEnsemble::sample(&setup.initial, n, 1, &mut init)?;
                let mut sys = PairSystem::coincident(e.x, e.y, ln_scale)?;
                let mut recs = Vec::new();
                evolve_pairs(
                    &mut sys,
                    &grid,
                    params.dt_max,
                    model,
                    levy,
                    consts,
                    &proxy,
                    SecondDrive::MeanField,
                    setup.mode,
                    &mut rng,
                    |s| {
                        let l1 = s.deviation_norms().iter().sum::<f64>() / n as f64;
                        let rho = s.rho_values(consts).iter().sum::<f64>() / n as f64;
                        recs.push((l1, rho));
                    },
                )?;
                Ok((recs, sys.stats))
            })
            .collect::<Result<_>>()?;
        for (_, s) in &traces {
            stats.merge(s);
        }
        for (k, &t) in params.record_times.iter().enumerate() {
            let l1: Vec<f64> = traces.iter().map(|(r, _)| r[k].0).collect();
            let rho: Vec<f64> = traces.iter().map(|(r, _)| r[k].1).collect();
            rows.push(ChaosRow {
                n,
                t,
                l1: Summary::of(&l1),
                rho: Summary::of(&rho),
            });
        }
    }
    Ok(ChaosResult {
        ln_scale,
        rows,
        stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Functional {
    X,
    Y,
    XSquared,
    YSquared,
}

impl Functional {
    pub const ALL: [Functional; 4] = [
        Functional::X,
        Functional::Y,
        Functional::XSquared,
        Functional::YSquared,
    ];

    pub fn apply(&self, x: f64, y: f64) -> f64 {
        match self {
            Functional::X => x,
            Functional::Y => y,
            Functional::XSquared => x * x,
            Functional::YSquared => y * y,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Functional::X => "X",
            Functional::Y => "Y",
            Functional::XSquared => "|X|^2",
            Functional::YSquared => "|Y|^2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelitySetup {
    pub first: InitialLaw,
    pub second: InitialLaw,
    pub cloud_size: usize,
    pub replicas: usize,
    /// must be record times
    pub times: Vec<f64>,
    /// family-wise level, split evenly over the tests
    pub alpha: f64,
    pub mode: CouplingMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityTest {
    pub t: f64,
    pub functional: Functional,
    pub ks: KsTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub tests: Vec<FidelityTest>,
    pub per_test_alpha: f64,
    pub stats: EventStats,
}

impl FidelityReport {
    pub fn all_pass(&self) -> bool {
        self.tests.iter().all(|t| t.ks.pass)
    }
}

/// KS battery comparing the second marginal of coupled pairs with a
/// stand-alone simulation of the same decoupled dynamic.
pub fn marginal_fidelity(
    setup: &FidelitySetup,
    model: &DynamicsModel,
    levy: &LevyModel,
    consts: &ConstantsReport,
    params: &SimulationParams,
) -> Result<FidelityReport> {
    let steps: Vec<usize> = setup
        .times
        .iter()
        .map(|t| {
            params
                .record_times
                .iter()
                .position(|s| s == t)
                .ok_or_else(|| invalid("times", format!("{t} is not a record time")))
        })
        .collect::<Result<_>>()?;
    let cs = ContractionSetup {
        first: setup.first,
        second: setup.second,
        cloud_size: setup.cloud_size,
        replicas: setup.replicas,
        initial_coupling: InitialCoupling::Product,
        shared_proxy: false,
        w1_times: Vec::new(),
        mode: setup.mode,
    };
    let grid = TimeGrid::new(params)?;
    let (proxy_a, proxy_b) = proxies(
        &cs.first,
        &cs.second,
        false,
        cs.cloud_size,
        model,
        levy,
        params,
    )?;
    let proxy_b = proxy_b.expect("independent proxies");
    let starts = initial_pairs(&cs, params.seed)?;

    let coupled: Vec<(Vec<[f64; 2]>, EventStats)> = starts
        .par_iter()
        .enumerate()
        .map(|(r, (p, pb))| {
            let mut rng = stream(params.seed, Purpose::Replica, r as u64);
            let mut sys = PairSystem::from_states(vec![p[0]], vec![p[1]], &[pb[0]], &[pb[1]])?;
            let mut recs = Vec::new();
            evolve_pairs(
                &mut sys,
                &grid,
                params.dt_max,
                model,
                levy,
                consts,
                &proxy_a,
                SecondDrive::Proxy(&proxy_b),
                setup.mode,
                &mut rng,
                |s| {
                    let c = s.pair(0);
                    recs.push([c.second[0], c.second[1]]);
                },
            )?;
            Ok((recs, sys.stats))
        })
        .collect::<Result<_>>()?;

    let mut alone = ParticleEnsemble::sample(
        &setup.second,
        setup.replicas,
        1,
        &mut stream(params.seed, Purpose::Reference, 0),
    )?;
    let (_, snaps) = evolve(
        &mut alone,
        &grid,
        params.dt_max,
        model,
        levy,
        Drive::Proxy(&proxy_b),
        &mut stream(params.seed, Purpose::Reference, 1),
    )?;

    let per_test_alpha = setup.alpha / (setup.times.len() * Functional::ALL.len()) as f64;
    let mut tests = Vec::new();
    for (&t, &k) in setup.times.iter().zip(&steps) {
        for f in Functional::ALL {
            let a: Vec<f64> = coupled
                .iter()
                .map(|(r, _)| f.apply(r[k][0], r[k][1]))
                .collect();
            let b: Vec<f64> = snaps[k]
                .x
                .iter()
                .zip(&snaps[k].y)
                .map(|(&x, &y)| f.apply(x, y))
                .collect();
            tests.push(FidelityTest {
                t,
                functional: f,
                ks: ks_test(&a, &b, per_test_alpha),
            });
        }
    }
    let mut stats = EventStats::default();
    for (_, s) in &coupled {
        stats.merge(s);
    }
    Ok(FidelityReport {
        tests,
        per_test_alpha,
        stats,
    })
}
