//! The five experiments behind the CLI subcommands.

use std::fmt::Write;
use std::path::Path;

use rayon::prelude::*;
use serde_json::json;

use levy_mkv_core::coupling::{
    marginal_fidelity, simulate_chaos, simulate_contraction, ChaosSetup, ContractionSetup,
    FidelitySetup,
};
use levy_mkv_core::dynamics::{
    discrepancy_batch, discrepancy_bound, evolve, second_moment_trace, simulate_mckv_law, Drive,
    ParticleEnsemble, SimulationParams, TimeGrid,
};
use levy_mkv_core::metrics::{validate_assumptions, KernelKind, ValidationReport};
use levy_mkv_core::rng::{stream, Purpose};
use levy_mkv_core::stats::{linear_fit, Summary};

use crate::config::{Resolved, RunConfig};
use crate::error::{HarnessError, Result};
use crate::output::{CheckLine, ExperimentOutput, Row};
use crate::plot::{Plot, Series, Style};
use crate::snapshot::write_snapshot;

/// A config with its model resolved and its declared constants falsified.
pub struct Context<'a> {
    pub cfg: &'a RunConfig,
    pub resolved: Resolved,
    pub validation: ValidationReport,
}

impl<'a> Context<'a> {
    /// Fails with an assumption error when the declared drift or kernel
    /// constants are contradicted or the friction condition does not hold.
    pub fn prepare(cfg: &'a RunConfig) -> Result<Self> {
        let resolved = cfg.resolve()?;
        let mut rng = stream(cfg.seed, Purpose::Validation, 0);
        let validation =
            validate_assumptions(&resolved.model, cfg.metrics.validation_samples, &mut rng);
        if !validation.all_pass() {
            let mut failed = Vec::new();
            for (name, c) in [
                ("drift Lipschitz constant", &validation.drift_lipschitz),
                ("dissipativity constant", &validation.dissipativity),
                ("kernel Lipschitz constant", &validation.kernel_lipschitz),
            ] {
                if !c.pass {
                    failed.push(format!("{name} (worst ratio {:.4})", c.worst));
                }
            }
            if !validation.friction_pass {
                failed.push(format!(
                    "friction condition L_b^2/gamma^2 < 3 theta/4 ({} vs {})",
                    validation.friction_lhs, validation.friction_rhs
                ));
            }
            return Err(HarnessError::Assumption(failed.join("; ")));
        }
        Ok(Self {
            cfg,
            resolved,
            validation,
        })
    }

    pub fn constants_hash(&self) -> String {
        crate::config::sha256_json(&self.resolved.constants)
    }
}

fn lambda(ctx: &Context) -> f64 {
    ctx.resolved.constants.lambda.value()
}

pub fn constants(ctx: &Context) -> Result<ExperimentOutput> {
    let c = &ctx.resolved.constants;
    let mut rows = vec![
        Row::exact("tau", c.tau),
        Row::exact("alpha", c.alpha),
        Row::exact("script_r", c.script_r),
        Row::exact("a", c.a),
        Row::exact("b", c.b),
        Row::exact("c", c.c),
        Row::exact("inf_rs_over_rl", c.inf_rs_over_rl),
        Row::exact("sup_rs_over_rl", c.sup_rs_over_rl),
        Row::exact("eps_small", c.eps_small),
        Row::exact("eps_bar", c.eps_bar),
        Row::exact("d_gamma", c.d_gamma),
        Row::exact("r1", c.r1),
        Row::exact("sigma_c1", c.sigma_c1),
        Row::exact("sigma_beta", c.sigma_beta),
        Row::exact("g_coefficient", c.g_coefficient),
        Row::exact("cap_lambda_1", c.cap_lambda_1),
        Row::exact("cap_lambda_2", c.cap_lambda_2),
        Row::exact("ln_lambda", c.lambda.ln()),
        Row::exact("ln_c1", c.c1.ln()),
        Row::exact("ln_c_b_tilde", c.c_b_tilde.ln()),
        Row::exact("ln_m1", c.m1.ln()),
        Row::exact("m2", c.m2),
        Row::exact("ln_c1_local", c.c1_local.ln()),
        Row::exact("c2_local", c.c2_local),
    ];
    if let Some(m) = &c.moment {
        rows.push(Row::exact("c3", m.c3));
    }
    for p in &c.lambda_sensitivity {
        rows.push(Row::exact(format!("ln_lambda_k0={}", p.k0), p.ln_lambda));
    }

    let mut text = String::new();
    let _ = writeln!(text, "{:<24} {:>24}", "constant", "value");
    for r in &rows {
        let _ = writeln!(text, "{:<24} {:>24}", r.stat, fmt_value(r.value));
    }
    let _ = writeln!(
        text,
        "interaction within threshold: {}",
        if c.interaction_within_threshold {
            "yes"
        } else {
            "no"
        }
    );
    for w in &ctx.resolved.warnings {
        let _ = writeln!(text, "warning: {w}");
    }

    let rs: Vec<f64> = (0..=160)
        .map(|k| 10f64.powf(-12.0 + k as f64 * 0.1))
        .collect();
    let psi_ratio: Vec<(f64, f64)> = rs.iter().map(|&r| (r, c.psi_eval(r) / r)).collect();
    let psi_prime: Vec<(f64, f64)> = rs.iter().map(|&r| (r, c.psi_prime(r))).collect();
    let plot = Plot {
        title: "distance transform".into(),
        x_label: "r".into(),
        y_label: "value".into(),
        x_log: true,
        y_log: true,
        series: vec![
            Series::new("psi(r)/r", psi_ratio, Style::Line),
            Series::new("psi'(r)", psi_prime, Style::Dashed),
        ],
        footer: Vec::new(),
    };
    Ok(ExperimentOutput {
        id: "constants",
        report: json!({
            "constants": c,
            "validation": ctx.validation,
            "warnings": ctx.resolved.warnings,
        }),
        rows,
        checks: vec![CheckLine::new(
            "assumptions",
            ctx.validation.all_pass(),
            "declared constants survive falsification",
        )],
        plot,
        text,
    })
}

fn fmt_value(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e6) {
        format!("{v:.10e}")
    } else {
        format!("{v:.12}")
    }
}

pub fn contraction(ctx: &Context) -> Result<ExperimentOutput> {
    let cfg = ctx.cfg;
    let sec = &cfg.contraction;
    let params = cfg.params(sec.t_end)?;
    let w1_times = if sec.w1_times.is_empty() {
        params
            .record_times
            .iter()
            .copied()
            .filter(|&t| t > 0.0)
            .collect()
    } else {
        sec.w1_times.clone()
    };
    let setup = ContractionSetup {
        first: cfg.initial.first,
        second: cfg.initial.second,
        cloud_size: cfg.simulation.cloud_size,
        replicas: cfg.simulation.replicas,
        initial_coupling: sec.initial_coupling,
        shared_proxy: sec.shared_proxy,
        w1_times,
        mode: cfg.fidelity.mode,
    };
    let r = &ctx.resolved;
    let res = simulate_contraction(&setup, &r.model, &r.levy, &r.constants, &params)?;
    let lam = lambda(ctx);

    let mut rows = Vec::new();
    for row in &res.rows {
        let t = Some(row.t);
        rows.push(Row::new(t, "rho", row.rho.mean, row.rho.stderr, row.rho.n));
        rows.push(Row::new(
            t,
            "rho_ratio",
            row.rho_ratio.mean,
            row.rho_ratio.stderr,
            row.rho_ratio.n,
        ));
        rows.push(Row::new(t, "l1", row.l1.mean, row.l1.stderr, row.l1.n));
        rows.push(Row::new(t, "bound", (-lam * row.t).exp(), 0.0, 0));
        if let Some(w) = &row.w1 {
            rows.push(Row::new(
                t,
                "w1_assignment",
                w.assignment,
                0.0,
                w.sample_size,
            ));
            rows.push(Row::new(t, "w1_coupled", w.coupled, 0.0, w.sample_size));
        }
    }
    rows.push(Row::new(
        None,
        "boundary_fraction",
        res.boundary_fraction(),
        0.0,
        res.replicas,
    ));
    rows.push(Row::new(
        None,
        "events",
        res.stats.events as f64,
        0.0,
        res.replicas,
    ));

    let mut checks = Vec::new();
    for &t in &sec.bound_times {
        let Some(row) = res.rows.iter().find(|r| r.t == t) else {
            checks.push(CheckLine::new(
                format!("bound t={t}"),
                false,
                "not a record time",
            ));
            continue;
        };
        let rhs = (-lam * t).exp() + 3.0 * row.rho_ratio.stderr;
        checks.push(CheckLine::new(
            format!("bound t={t}"),
            row.rho_ratio.mean <= rhs,
            format!(
                "E rho ratio {:.6} <= e^(-lambda t) + 3 se = {:.6}",
                row.rho_ratio.mean, rhs
            ),
        ));
    }
    let worst = res
        .rows
        .iter()
        .filter_map(|r| r.rho_change.map(|c| (r.t, c)))
        .map(|(t, c)| (t, c.mean - 2.0 * c.stderr, c))
        .max_by(|a, b| a.1.total_cmp(&b.1));
    if let Some((t, excess, c)) = worst {
        checks.push(CheckLine::new(
            "non-increasing",
            excess <= 0.0,
            format!(
                "largest increase {:.3e} (2 se = {:.3e}) at t={t}",
                c.mean,
                2.0 * c.stderr
            ),
        ));
    }
    for row in res.rows.iter().filter(|r| r.w1.is_some()) {
        let w = row.w1.unwrap();
        checks.push(CheckLine::new(
            format!("w1 feasibility t={}", row.t),
            w.feasible,
            format!("assignment {:.6} <= coupled {:.6}", w.assignment, w.coupled),
        ));
    }
    let fit_rows: Vec<_> = res
        .rows
        .iter()
        .filter(|r| r.t >= sec.fit_window[0] && r.t <= sec.fit_window[1] && r.rho.mean > 0.0)
        .collect();
    let fit = (fit_rows.len() >= 3).then(|| {
        let x: Vec<f64> = fit_rows.iter().map(|r| r.t).collect();
        let y: Vec<f64> = fit_rows.iter().map(|r| r.rho.mean.ln()).collect();
        linear_fit(&x, &y)
    });
    match fit {
        Some(f) => {
            rows.push(Row::new(
                None,
                "log_rho_slope",
                f.slope,
                f.slope_stderr,
                fit_rows.len(),
            ));
            checks.push(CheckLine::new(
                "decay slope",
                f.slope <= -lam + 2.0 * f.slope_stderr,
                format!(
                    "slope {:.4e} <= -lambda + 2 se = {:.4e}",
                    f.slope,
                    -lam + 2.0 * f.slope_stderr
                ),
            ));
        }
        None => checks.push(CheckLine::new(
            "decay slope",
            false,
            "fewer than three usable record times",
        )),
    }

    let rho0 = res.rows[0].rho.mean;
    let l10 = res.rows[0].l1.mean;
    let ratio: Vec<(f64, f64)> = res.rows.iter().map(|r| (r.t, r.rho_ratio.mean)).collect();
    let band: Vec<(f64, f64)> = res
        .rows
        .iter()
        .map(|r| {
            (
                r.rho_ratio.mean - r.rho_ratio.stderr,
                r.rho_ratio.mean + r.rho_ratio.stderr,
            )
        })
        .collect();
    let bound: Vec<(f64, f64)> = res.rows.iter().map(|r| (r.t, (-lam * r.t).exp())).collect();
    let l1: Vec<(f64, f64)> = res.rows.iter().map(|r| (r.t, r.l1.mean / l10)).collect();
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:>6} {:>14} {:>12} {:>12} {:>12}",
        "t", "E rho", "ratio", "stderr", "E l1"
    );
    for r in &res.rows {
        let _ = writeln!(
            text,
            "{:>6} {:>14.6e} {:>12.6} {:>12.2e} {:>12.6}",
            r.t, r.rho.mean, r.rho_ratio.mean, r.rho_ratio.stderr, r.l1.mean
        );
    }
    let _ = writeln!(
        text,
        "lambda = {:.6e} x e^({})",
        r.constants.lambda.mantissa, r.constants.lambda.exponent
    );
    let _ = writeln!(
        text,
        "events near the switching boundary: {:.4}",
        res.boundary_fraction()
    );
    Ok(ExperimentOutput {
        id: "contraction",
        report: json!({
            "result": res,
            "lambda": r.constants.lambda,
            "rho_at_zero": rho0,
            "fit": fit,
        }),
        rows,
        checks,
        plot: Plot {
            title: "contraction in the rho metric".into(),
            x_label: "t".into(),
            y_label: "E rho(t) / E rho(0)".into(),
            y_log: true,
            series: vec![
                Series::new("Monte Carlo", ratio, Style::Line).with_band(band),
                Series::new("exp(-lambda t)", bound, Style::Dashed),
                Series::new("E l1 (normalised)", l1, Style::Line),
            ],
            ..Default::default()
        },
        text,
    })
}

pub fn chaos(ctx: &Context) -> Result<ExperimentOutput> {
    let cfg = ctx.cfg;
    let sec = &cfg.chaos;
    let params = cfg.params(None)?;
    let setup = ChaosSetup {
        initial: cfg.initial.first,
        cloud_size: sec.cloud_size,
        n_list: cfg.simulation.n_list.clone(),
        min_replicas: sec.min_replicas,
        particle_budget: sec.particle_budget,
        mode: cfg.fidelity.mode,
    };
    let r = &ctx.resolved;
    let res = simulate_chaos(&setup, &r.model, &r.levy, &r.constants, &params)?;
    let rows: Vec<Row> = res
        .rows
        .iter()
        .flat_map(|row| {
            [
                Row::new(
                    Some(row.t),
                    "l1_scaled",
                    row.l1.mean,
                    row.l1.stderr,
                    row.l1.n,
                )
                .with_n(row.n),
                Row::new(
                    Some(row.t),
                    "rho_scaled",
                    row.rho.mean,
                    row.rho.stderr,
                    row.rho.n,
                )
                .with_n(row.n),
            ]
        })
        .collect();

    let mut checks = Vec::new();
    let zero_case = res.rows.iter().all(|r| r.l1.mean == 0.0);
    let fit = res.slope_at(sec.fit_time);
    if zero_case {
        checks.push(CheckLine::new(
            "slope",
            true,
            "all deviations are exactly zero; slope undefined",
        ));
    } else {
        match fit {
            Some(f) => checks.push(CheckLine::new(
                format!("slope t={}", sec.fit_time),
                f.slope >= sec.slope_range[0] && f.slope <= sec.slope_range[1],
                format!(
                    "slope {:.4} (95% CI {:.4} .. {:.4}) in [{}, {}]",
                    f.slope,
                    f.slope - 1.96 * f.slope_stderr,
                    f.slope + 1.96 * f.slope_stderr,
                    sec.slope_range[0],
                    sec.slope_range[1]
                ),
            )),
            None => checks.push(CheckLine::new("slope", false, "no positive means to fit")),
        }
        let find = |t: f64| res.rows.iter().find(|r| r.t == t && r.n == sec.probe_n);
        match (find(sec.fit_time), find(sec.probe_time)) {
            (Some(a), Some(b)) => checks.push(CheckLine::new(
                format!("uniformity N={}", sec.probe_n),
                b.l1.mean <= 2.0 * a.l1.mean,
                format!(
                    "E l1(t={}) = {:.4e} <= 2 E l1(t={}) = {:.4e}",
                    sec.probe_time,
                    b.l1.mean,
                    sec.fit_time,
                    2.0 * a.l1.mean
                ),
            )),
            _ => checks.push(CheckLine::new(
                "uniformity",
                false,
                "probe time or N not simulated",
            )),
        }
    }

    let mut series = Vec::new();
    for t in [sec.fit_time, sec.probe_time] {
        let pts: Vec<_> = res.rows_at(t);
        if pts.is_empty() {
            continue;
        }
        series.push(
            Series::new(
                format!("t = {t}"),
                pts.iter().map(|r| (r.n as f64, r.l1.mean)).collect(),
                Style::Markers,
            )
            .with_band(
                pts.iter()
                    .map(|r| (r.l1.mean - r.l1.stderr, r.l1.mean + r.l1.stderr))
                    .collect(),
            ),
        );
    }
    if let Some(f) = fit {
        let line = cfg
            .simulation
            .n_list
            .iter()
            .map(|&n| (n as f64, (f.intercept + f.slope * (n as f64).ln()).exp()))
            .collect();
        series.push(Series::new(
            format!("fit slope {:.3}", f.slope),
            line,
            Style::Dashed,
        ));
    }
    let mut text = String::new();
    let _ = writeln!(text, "deviations in units of e^({:.6})", res.ln_scale);
    let _ = writeln!(
        text,
        "{:>6} {:>6} {:>14} {:>12}",
        "N", "t", "E l1_N", "stderr"
    );
    for row in &res.rows {
        let _ = writeln!(
            text,
            "{:>6} {:>6} {:>14.6e} {:>12.2e}",
            row.n, row.t, row.l1.mean, row.l1.stderr
        );
    }
    if let Some(f) = fit {
        let _ = writeln!(
            text,
            "slope at t={}: {:.4} +- {:.4}",
            sec.fit_time, f.slope, f.slope_stderr
        );
    }
    Ok(ExperimentOutput {
        id: "chaos",
        report: json!({
            "result": res,
            "fit": fit,
            "fit_time": sec.fit_time,
            "exact_zero": zero_case,
        }),
        rows,
        checks,
        plot: Plot {
            title: "propagation of chaos".into(),
            x_label: "N".into(),
            y_label: "E l1_N (scaled)".into(),
            x_log: true,
            y_log: true,
            series,
            footer: Vec::new(),
        },
        text,
    })
}

pub fn moments(ctx: &Context, snapshot_dir: Option<&Path>) -> Result<ExperimentOutput> {
    let cfg = ctx.cfg;
    let sec = &cfg.moments;
    let params = cfg.params(None)?;
    let r = &ctx.resolved;
    let c3 = r.constants.c3().expect("bound bound at resolve time");
    let cloud = simulate_mckv_law(
        &cfg.initial.first,
        sec.cloud_size,
        &r.model,
        &r.levy,
        &params,
        &mut stream(cfg.seed, Purpose::Cloud, 0),
    )?;
    let trace = second_moment_trace(&cloud.snapshots, 1, c3);
    if let Some(dir) = snapshot_dir {
        for s in &cloud.snapshots {
            write_snapshot(dir, &format!("cloud_t{}", s.t), s, 1, cfg.seed)?;
        }
    }
    let disc = discrepancy_table(cfg, r, &params, &cloud)?;

    let mut rows = vec![Row::exact("c3", c3)];
    for m in &trace.rows {
        rows.push(Row::new(Some(m.t), "x2", m.x2.mean, m.x2.stderr, m.x2.n));
        rows.push(Row::new(Some(m.t), "y2", m.y2.mean, m.y2.stderr, m.y2.n));
    }
    let mut disc_ok = true;
    let mut worst = (f64::NEG_INFINITY, 0usize, 0.0);
    for d in &disc {
        rows.push(Row::new(Some(d.t), "discrepancy", d.a.mean, d.a.stderr, d.a.n).with_n(d.n));
        rows.push(Row::new(Some(d.t), "discrepancy_bound", d.bound, 0.0, 0).with_n(d.n));
        let excess = d.a.mean - d.bound - 3.0 * d.a.stderr;
        disc_ok &= excess <= 0.0;
        if excess > worst.0 {
            worst = (excess, d.n, d.t);
        }
    }
    let sup = trace.rows.iter().map(|m| m.x2.mean).fold(0.0, f64::max);
    let checks = vec![
        CheckLine::new(
            "second moment bound",
            trace.violations == 0,
            format!(
                "sup_t E|X_t|^2 = {sup:.4} vs C3 = {c3:.4}, {} violations",
                trace.violations
            ),
        ),
        CheckLine::new(
            "discrepancy bound",
            disc_ok,
            format!(
                "largest excess over bound + 3 se: {:.3e} (N={}, t={})",
                worst.0, worst.1, worst.2
            ),
        ),
    ];
    let mut text = String::new();
    let _ = writeln!(text, "C3 = {c3:.6}");
    let _ = writeln!(text, "{:>6} {:>12} {:>12}", "t", "E|X|^2", "E|Y|^2");
    for m in &trace.rows {
        let _ = writeln!(text, "{:>6} {:>12.6} {:>12.6}", m.t, m.x2.mean, m.y2.mean);
    }
    let _ = writeln!(text, "{:>6} {:>6} {:>12} {:>12}", "N", "t", "E A", "bound");
    for d in &disc {
        let _ = writeln!(
            text,
            "{:>6} {:>6} {:>12.4e} {:>12.4e}",
            d.n, d.t, d.a.mean, d.bound
        );
    }
    let pts = |f: &dyn Fn(&levy_mkv_core::dynamics::MomentRow) -> Summary| -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
        trace
            .rows
            .iter()
            .map(|m| {
                let s = f(m);
                ((m.t, s.mean), (s.mean - s.stderr, s.mean + s.stderr))
            })
            .unzip()
    };
    let (x2, x2b) = pts(&|m| m.x2);
    let (y2, y2b) = pts(&|m| m.y2);
    let c3_line = trace.rows.iter().map(|m| (m.t, c3)).collect();
    Ok(ExperimentOutput {
        id: "moments",
        report: json!({
            "trace": trace,
            "discrepancy": disc.iter().map(|d| json!({"n": d.n, "t": d.t, "mean": d.a.mean, "stderr": d.a.stderr, "groups": d.a.n, "bound": d.bound})).collect::<Vec<_>>(),
            "kernel_scale": "unit strength; the discrepancy is linear in eta",
        }),
        rows,
        checks,
        plot: Plot {
            title: "second moments against C3".into(),
            x_label: "t".into(),
            y_label: "second moment".into(),
            y_log: true,
            series: vec![
                Series::new("E|X_t|^2", x2, Style::Line).with_band(x2b),
                Series::new("E|Y_t|^2", y2, Style::Line).with_band(y2b),
                Series::new("C3", c3_line, Style::Dashed),
            ],
            ..Default::default()
        },
        text,
    })
}

pub struct DiscrepancyRow {
    pub n: usize,
    pub t: f64,
    /// over groups of the group-mean A^i
    pub a: Summary,
    pub bound: f64,
}

/// E A^i_t for groups of N independent copies driven by the cloud, against
/// L (√2/√N + 2/N) (E|X_t|^2)^(1/2) with L the unit-kernel constant.
fn discrepancy_table(
    cfg: &RunConfig,
    r: &Resolved,
    params: &SimulationParams,
    cloud: &levy_mkv_core::dynamics::LawProxy,
) -> Result<Vec<DiscrepancyRow>> {
    let sec = &cfg.moments;
    let grid = TimeGrid::new(params)?;
    let kind = r.model.interaction.kind;
    let lip = r.model.interaction.unit_lipschitz();
    let per_n: Vec<Vec<DiscrepancyRow>> = sec
        .n_list
        .par_iter()
        .map(|&n| -> Result<Vec<DiscrepancyRow>> {
            let mut init = stream(cfg.seed, Purpose::Initial, n as u64);
            let mut copies =
                ParticleEnsemble::sample(&cfg.initial.first, n * sec.groups, 1, &mut init)?;
            let mut rng = stream(cfg.seed, Purpose::Replica, n as u64);
            let (_, snaps) = evolve(
                &mut copies,
                &grid,
                params.dt_max,
                &r.model,
                &r.levy,
                Drive::Proxy(cloud),
                &mut rng,
            )?;
            Ok(snaps
                .iter()
                .zip(&cloud.snapshots)
                .map(|(s, c)| {
                    let means: Vec<f64> = s
                        .x
                        .chunks(n)
                        .map(|g| {
                            if kind == KernelKind::Zero {
                                0.0
                            } else {
                                discrepancy_batch(g, &c.x, 1, kind).iter().sum::<f64>() / n as f64
                            }
                        })
                        .collect();
                    let m2 = c.x.iter().map(|u| u * u).sum::<f64>() / c.x.len() as f64;
                    DiscrepancyRow {
                        n,
                        t: s.t,
                        a: Summary::of(&means),
                        bound: discrepancy_bound(lip, n, m2),
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_n.into_iter().flatten().collect())
}

pub fn fidelity(ctx: &Context) -> Result<ExperimentOutput> {
    let cfg = ctx.cfg;
    let sec = &cfg.fidelity;
    let mut record: Vec<f64> = sec.times.clone();
    record.push(0.0);
    record.sort_by(f64::total_cmp);
    record.dedup();
    let t_end = *record.last().expect("non-empty");
    let params = SimulationParams::new(cfg.simulation.dt_max, t_end, record, cfg.seed)?;
    let setup = FidelitySetup {
        first: cfg.initial.first,
        second: cfg.initial.second,
        cloud_size: cfg.simulation.cloud_size,
        replicas: sec.replicas,
        times: sec.times.clone(),
        alpha: sec.alpha,
        mode: sec.mode,
    };
    let r = &ctx.resolved;
    let rep = marginal_fidelity(&setup, &r.model, &r.levy, &r.constants, &params)?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:>6} {:>8} {:>10} {:>10} {:>6}",
        "t", "stat", "KS", "threshold", "pass"
    );
    for t in &rep.tests {
        let name = t.functional.name();
        rows.push(Row::new(
            Some(t.t),
            format!("ks {name}"),
            t.ks.statistic,
            0.0,
            sec.replicas,
        ));
        rows.push(Row::new(
            Some(t.t),
            format!("ks_threshold {name}"),
            t.ks.threshold,
            0.0,
            sec.replicas,
        ));
        checks.push(CheckLine::new(
            format!("KS {name} t={}", t.t),
            t.ks.pass,
            format!(
                "D = {:.5} vs {:.5} at alpha {:.2e}",
                t.ks.statistic, t.ks.threshold, t.ks.alpha
            ),
        ));
        let _ = writeln!(
            text,
            "{:>6} {:>8} {:>10.5} {:>10.5} {:>6}",
            t.t,
            name,
            t.ks.statistic,
            t.ks.threshold,
            if t.ks.pass { "yes" } else { "no" }
        );
    }
    let mut series = Vec::new();
    for f in levy_mkv_core::coupling::Functional::ALL {
        let pts = rep
            .tests
            .iter()
            .filter(|t| t.functional == f)
            .map(|t| (t.t, t.ks.statistic))
            .collect();
        series.push(Series::new(f.name(), pts, Style::Markers));
    }
    let thr = rep.tests.first().map(|t| t.ks.threshold).unwrap_or(0.0);
    series.push(Series::new(
        "threshold",
        sec.times.iter().map(|&t| (t, thr)).collect(),
        Style::Dashed,
    ));
    Ok(ExperimentOutput {
        id: "fidelity",
        report: json!({ "fidelity": rep, "mode": sec.mode }),
        rows,
        checks,
        plot: Plot {
            title: "marginal fidelity of the coupling".into(),
            x_label: "t".into(),
            y_label: "KS statistic".into(),
            series,
            ..Default::default()
        },
        text,
    })
}
