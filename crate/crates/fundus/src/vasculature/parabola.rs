//! Parabola fitting to main-course vessel points and the 2.5-diameter
//! fovea rule.
//!
//! In the frame translated to the optic-disc center and rotated by `phi`,
//! the model is `y' = x'^2 / (4 p)`. For a fixed orientation the focal
//! coefficient has a closed-form least-squares solution, so the fit runs a
//! 64-seed grid with golden-section refinement over the orientation and a
//! final Gauss-Newton polish over both parameters.

use crate::error::{FundusError, Result};
use crate::vasculature::MainCoursePoints;
use rayon::prelude::*;

const PHI_SEEDS: usize = 64;
const GOLDEN_ITERS: usize = 48;
const GN_MAX_ITERS: usize = 60;
const DEGENERATE_CURVATURE: f64 = 1e-12;

/// Fitted parabola: vertex pinned at the optic-disc center, focal parameter
/// `p` (curve `y' = x'^2 / (4p)` in the rotated frame), axis orientation
/// `phi`, and the residual sum of squares. Canonical form has `p > 0`, with
/// the opening direction carried by `phi`.
#[derive(Debug, Clone, Copy)]
pub struct ParabolaFit {
    pub vertex: (f64, f64),
    pub p: f64,
    pub phi: f64,
    pub rss: f64,
}

/// Point on the parabola at rotated-frame abscissa `xp`, in image
/// coordinates. Shared by the synthetic generator and the fit tests.
pub fn parabola_point(vertex: (f64, f64), p: f64, phi: f64, xp: f64) -> (f64, f64) {
    let yp = xp * xp / (4.0 * p);
    let (s, c) = phi.sin_cos();
    (vertex.0 + c * xp - s * yp, vertex.1 + s * xp + c * yp)
}

#[inline]
fn rotate_into_frame(dx: f64, dy: f64, phi: f64) -> (f64, f64) {
    let (s, c) = phi.sin_cos();
    (c * dx + s * dy, -s * dx + c * dy)
}

/// Closed-form least-squares curvature and residual at one orientation.
fn solve_at_phi(offsets: &[(f64, f64)], phi: f64) -> (f64, f64) {
    let mut su2 = 0.0;
    let mut suy = 0.0;
    for &(dx, dy) in offsets {
        let (xp, yp) = rotate_into_frame(dx, dy, phi);
        let u = xp * xp;
        su2 += u * u;
        suy += u * yp;
    }
    let a = if su2 > 1e-300 { suy / su2 } else { 0.0 };
    let mut rss = 0.0;
    for &(dx, dy) in offsets {
        let (xp, yp) = rotate_into_frame(dx, dy, phi);
        let r = yp - a * xp * xp;
        rss += r * r;
    }
    (a, rss)
}

/// Golden-section minimization of the per-orientation residual.
fn golden_refine(offsets: &[(f64, f64)], mut lo: f64, mut hi: f64) -> (f64, f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = solve_at_phi(offsets, x1).1;
    let mut f2 = solve_at_phi(offsets, x2).1;
    for _ in 0..GOLDEN_ITERS {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = solve_at_phi(offsets, x1).1;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = solve_at_phi(offsets, x2).1;
        }
    }
    let phi = 0.5 * (lo + hi);
    let (a, rss) = solve_at_phi(offsets, phi);
    (phi, a, rss)
}

/// Gauss-Newton refinement over (curvature, orientation) with step halving;
/// the returned trace of residual values is non-increasing.
pub(crate) fn gauss_newton_polish(
    offsets: &[(f64, f64)],
    mut a: f64,
    mut phi: f64,
) -> (f64, f64, Vec<f64>) {
    let rss_of = |a: f64, phi: f64| -> f64 {
        offsets
            .iter()
            .map(|&(dx, dy)| {
                let (xp, yp) = rotate_into_frame(dx, dy, phi);
                let r = yp - a * xp * xp;
                r * r
            })
            .sum()
    };
    let mut trace = vec![rss_of(a, phi)];
    for _ in 0..GN_MAX_ITERS {
        // Normal equations for residuals r = y' - a x'^2 with
        // dr/da = -x'^2 and dr/dphi = -x' - 2 a x' y'
        // (since dx'/dphi = y' and dy'/dphi = -x').
        let mut jtj = [[0.0f64; 2]; 2];
        let mut jtr = [0.0f64; 2];
        for &(dx, dy) in offsets {
            let (xp, yp) = rotate_into_frame(dx, dy, phi);
            let r = yp - a * xp * xp;
            let ja = -xp * xp;
            let jp = -xp - 2.0 * a * xp * yp;
            jtj[0][0] += ja * ja;
            jtj[0][1] += ja * jp;
            jtj[1][1] += jp * jp;
            jtr[0] += ja * r;
            jtr[1] += jp * r;
        }
        jtj[1][0] = jtj[0][1];
        let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        if det.abs() < 1e-300 {
            break;
        }
        let da = (-jtr[0] * jtj[1][1] + jtr[1] * jtj[0][1]) / det;
        let dphi = (-jtr[1] * jtj[0][0] + jtr[0] * jtj[1][0]) / det;
        let current = *trace.last().unwrap();
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = rss_of(a + step * da, phi + step * dphi);
            if cand < current {
                a += step * da;
                phi += step * dphi;
                trace.push(cand);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        let len = trace.len();
        if len >= 2 && (trace[len - 2] - trace[len - 1]).abs() <= 1e-14 * trace[len - 2].abs() {
            break;
        }
    }
    (a, phi, trace)
}

/// Fits the parabola over all orientations, returning the global best by
/// residual (ties resolved by the lowest seed index).
pub fn fit_parabola(points: &MainCoursePoints, od_center: (f64, f64)) -> Result<ParabolaFit> {
    if points.len() < 6 {
        return Err(FundusError::invalid(format!(
            "parabola fit needs at least 6 points, got {}",
            points.len()
        )));
    }
    let offsets: Vec<(f64, f64)> = points
        .points
        .iter()
        .map(|p| (p.x as f64 - od_center.0, p.y as f64 - od_center.1))
        .collect();

    let cell = 2.0 * std::f64::consts::PI / PHI_SEEDS as f64;
    let seeds: Vec<(usize, f64, f64, f64)> = (0..PHI_SEEDS)
        .into_par_iter()
        .map(|s| {
            let center = s as f64 * cell;
            let (phi, a, rss) = golden_refine(&offsets, center - 0.5 * cell, center + 0.5 * cell);
            (s, phi, a, rss)
        })
        .collect();
    let mut best = &seeds[0];
    for cand in &seeds[1..] {
        if cand.3 < best.3 {
            best = cand;
        }
    }
    let (_, phi0, a0, _) = *best;
    let (a, phi, trace) = gauss_newton_polish(&offsets, a0, phi0);
    if a.abs() < DEGENERATE_CURVATURE {
        return Err(FundusError::Degenerate(
            "vessel points are collinear through the vertex; parabola unidentifiable".into(),
        ));
    }
    let mut p = 1.0 / (4.0 * a);
    let mut phi = phi;
    if p < 0.0 {
        p = -p;
        phi += std::f64::consts::PI;
    }
    phi = phi.rem_euclid(2.0 * std::f64::consts::PI);
    Ok(ParabolaFit { vertex: od_center, p, phi, rss: *trace.last().unwrap() })
}

/// The fovea sits 2.5 optic-disc diameters from the vertex along the
/// parabola's symmetry axis, on the side the curve opens toward.
pub fn locate_fovea(fit: &ParabolaFit, od_diameter: f64) -> Result<(f64, f64)> {
    if od_diameter <= 0.0 {
        return Err(FundusError::invalid("optic-disc diameter must be positive"));
    }
    if fit.p == 0.0 {
        return Err(FundusError::Degenerate("focal parameter is zero".into()));
    }
    let side = fit.p.signum();
    let (s, c) = fit.phi.sin_cos();
    let ux = -s * side;
    let uy = c * side;
    Ok((fit.vertex.0 + 2.5 * od_diameter * ux, fit.vertex.1 + 2.5 * od_diameter * uy))
}
