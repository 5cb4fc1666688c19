//! Adaptive Simpson quadrature with explicit breakpoints.

use crate::{Error, Result};

const MAX_DEPTH: u32 = 48;

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// The interval is first split at `breaks` (points outside `(a, b)` are
/// ignored) so that kinks and jump discontinuities fall on panel edges.
pub fn integrate<F>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(b > a) {
        return Ok(0.0);
    }
    let mut knots: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    knots.push(a);
    knots.extend(breaks.iter().copied().filter(|&p| p > a && p < b));
    knots.push(b);
    knots.sort_by(f64::total_cmp);
    knots.dedup();

    let panels = (knots.len() - 1) as f64;
    let mut total = 0.0;
    let mut worst = 0.0_f64;
    for w in knots.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let flo = f(lo);
        let fhi = f(hi);
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        let mut err = 0.0;
        total += simpson(
            &f,
            lo,
            hi,
            flo,
            fmid,
            fhi,
            whole,
            tol / panels,
            MAX_DEPTH,
            &mut err,
        );
        worst = worst.max(err);
    }
    if worst > tol {
        return Err(Error::Quadrature {
            achieved: worst,
            target: tol,
        });
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    err: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || depth == 0 || (b - a) < 1e-300 {
        if depth == 0 {
            *err += delta.abs() / 15.0;
        }
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, err)
        + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, err)
}
