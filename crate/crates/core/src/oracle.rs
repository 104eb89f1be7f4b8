//! Brute-force reference path: chord sums, shoelace areas, non-uniform
//! centered differences, trapezoid quadrature, and a forward-Euler stepper.
//!
//! Nothing in this module touches the Fourier toolbox, interpolates
//! globally, or calls into the spectral pipeline; the duplicated formulas
//! are deliberate. These values exist to cross-check the spectral results
//! through unrelated arithmetic, so they favour transparency over speed.

use crate::error::{Error, Result};
use crate::flow::FlowKind;
use crate::spectral::Diagnostics;
use std::f64::consts::PI;

const TAU: f64 = 2.0 * PI;

/// Minimum polyline density the finite-difference formulas are trusted at.
pub const MIN_ORACLE_POINTS: usize = 1024;

/// Adaptive Simpson quadrature of `f` over [a, b] to absolute tolerance.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), tol, 48)
}

/// Perimeter of the ellipse (a cos, b sin) by adaptive quadrature of the
/// speed integrand.
pub fn ellipse_perimeter(a: f64, b: f64) -> f64 {
    adaptive_simpson(
        &|theta: f64| ((a * theta.sin()).powi(2) + (b * theta.cos()).powi(2)).sqrt(),
        0.0,
        TAU,
        1e-13,
    )
}

/// Chord-length sum of a closed polyline (first point not repeated).
pub fn polyline_length(points: &[[f64; 2]]) -> f64 {
    let m = points.len();
    (0..m)
        .map(|j| {
            let p = points[j];
            let q = points[(j + 1) % m];
            ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt()
        })
        .sum()
}

/// Signed shoelace area of a closed polyline; counts multiplicity for
/// multiply-covered curves.
pub fn polyline_area(points: &[[f64; 2]]) -> f64 {
    let m = points.len();
    0.5 * (0..m)
        .map(|j| {
            let p = points[j];
            let q = points[(j + 1) % m];
            p[0] * q[1] - p[1] * q[0]
        })
        .sum::<f64>()
}

/// Per-node differential geometry of a closed polyline: non-uniform
/// centered differences in the chord-length parameter. The curvature
/// formula is parametrization-invariant, so chord length standing in for
/// arc length costs only the O(h^2) truncation already present.
struct ChainGeometry {
    /// Trapezoid weight ds_j = (|p_j - p_{j-1}| + |p_{j+1} - p_j|)/2.
    ds: Vec<f64>,
    normal: Vec<[f64; 2]>,
    kappa: Vec<f64>,
    length: f64,
    area: f64,
    winding: f64,
}

impl ChainGeometry {
    fn new(points: &[[f64; 2]]) -> Result<Self> {
        let m = points.len();
        let mut chord = Vec::with_capacity(m);
        for j in 0..m {
            let p = points[j];
            let q = points[(j + 1) % m];
            let c = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
            if !(c > 0.0) {
                return Err(Error::NonImmersed { speed: 0.0, at: j as f64 / m as f64, floor: 0.0 });
            }
            chord.push(c);
        }
        let mut ds = Vec::with_capacity(m);
        let mut tangent = Vec::with_capacity(m);
        let mut normal = Vec::with_capacity(m);
        let mut kappa = Vec::with_capacity(m);
        for j in 0..m {
            let a = chord[(j + m - 1) % m];
            let b = chord[j];
            let pm = points[(j + m - 1) % m];
            let p = points[j];
            let pp = points[(j + 1) % m];
            let scale = a * b * (a + b);
            let a2 = a * a;
            let b2 = b * b;
            let d1 = [
                (a2 * pp[0] - b2 * pm[0] - (a2 - b2) * p[0]) / scale,
                (a2 * pp[1] - b2 * pm[1] - (a2 - b2) * p[1]) / scale,
            ];
            let d2 = [
                2.0 * (a * pp[0] + b * pm[0] - (a + b) * p[0]) / scale,
                2.0 * (a * pp[1] + b * pm[1] - (a + b) * p[1]) / scale,
            ];
            let speed = (d1[0] * d1[0] + d1[1] * d1[1]).sqrt();
            let tau = [d1[0] / speed, d1[1] / speed];
            tangent.push(tau);
            normal.push([-tau[1], tau[0]]);
            kappa.push((d1[0] * d2[1] - d1[1] * d2[0]) / (speed * speed * speed));
            ds.push(0.5 * (a + b));
        }
        let mut winding = 0.0;
        for j in 0..m {
            let t0 = tangent[j];
            let t1 = tangent[(j + 1) % m];
            winding += (t0[0] * t1[1] - t0[1] * t1[0]).atan2(t0[0] * t1[0] + t0[1] * t1[1]);
        }
        Ok(ChainGeometry {
            ds,
            normal,
            kappa,
            length: chord.iter().sum(),
            area: polyline_area(points),
            winding: winding / TAU,
        })
    }

    fn oint(&self, values: impl Fn(usize) -> f64) -> f64 {
        self.ds.iter().enumerate().map(|(j, &w)| values(j) * w).sum()
    }
}

/// Every scalar the two computation routes are compared on.
#[derive(Debug, Clone, Copy)]
struct RawFields {
    length: f64,
    area: f64,
    total_curvature: f64,
    bending: f64,
    i0: f64,
    i1: f64,
    i_m1: f64,
    tilde_i_m1: f64,
    j3: f64,
    j4: f64,
}

fn assemble(points: &[[f64; 2]], rotation: u32) -> Result<RawFields> {
    let chain = ChainGeometry::new(points)?;
    let m = points.len();
    let length = chain.length;
    let n = rotation as f64;

    let total_curvature = chain.oint(|j| chain.kappa[j]);
    let bending = chain.oint(|j| chain.kappa[j] * chain.kappa[j]);
    let kappa_mean = total_curvature / length;
    let i0 = length * chain.oint(|j| (chain.kappa[j] - kappa_mean).powi(2));
    let j3 = length * length * chain.oint(|j| (chain.kappa[j] - kappa_mean).powi(3));
    let j4 = length.powi(3) * chain.oint(|j| (chain.kappa[j] - kappa_mean).powi(4));

    // kappa' by the same non-uniform centered difference, this time on the
    // scalar curvature samples over the raw chord spacings.
    let mut chords = Vec::with_capacity(m);
    for j in 0..m {
        let p = points[j];
        let q = points[(j + 1) % m];
        chords.push(((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt());
    }
    let dkappa: Vec<f64> = (0..m)
        .map(|j| {
            let a = chords[(j + m - 1) % m];
            let b = chords[j];
            let km = chain.kappa[(j + m - 1) % m];
            let kp = chain.kappa[(j + 1) % m];
            let k = chain.kappa[j];
            (a * a * kp - b * b * km - (a * a - b * b) * k) / (a * b * (a + b))
        })
        .collect();
    let i1 = length.powi(3) * chain.oint(|j| dkappa[j] * dkappa[j]);

    let area = chain.area;
    let i_m1 = 1.0 - 4.0 * n * PI * area / (length * length);

    let mean = {
        let mut mx = 0.0;
        let mut my = 0.0;
        for j in 0..m {
            mx += points[j][0] * chain.ds[j];
            my += points[j][1] * chain.ds[j];
        }
        [mx / length, my / length]
    };
    let scale = TAU * n / length;
    let tilde_i_m1 = chain.oint(|j| {
        let hx = scale * (points[j][0] - mean[0]) + chain.normal[j][0];
        let hy = scale * (points[j][1] - mean[1]) + chain.normal[j][1];
        hx * hx + hy * hy
    }) / length;

    Ok(RawFields {
        length,
        area,
        total_curvature,
        bending,
        i0,
        i1,
        i_m1,
        tilde_i_m1,
        j3,
        j4,
    })
}

fn richardson(fine: RawFields, coarse: RawFields) -> RawFields {
    let combine = |f: f64, c: f64| (4.0 * f - c) / 3.0;
    RawFields {
        length: combine(fine.length, coarse.length),
        area: combine(fine.area, coarse.area),
        total_curvature: combine(fine.total_curvature, coarse.total_curvature),
        bending: combine(fine.bending, coarse.bending),
        i0: combine(fine.i0, coarse.i0),
        i1: combine(fine.i1, coarse.i1),
        i_m1: combine(fine.i_m1, coarse.i_m1),
        tilde_i_m1: combine(fine.tilde_i_m1, coarse.tilde_i_m1),
        j3: combine(fine.j3, coarse.j3),
        j4: combine(fine.j4, coarse.j4),
    }
}

fn subsample(points: &[[f64; 2]], stride: usize) -> Vec<[f64; 2]> {
    points.iter().step_by(stride).copied().collect()
}

/// Extremes of smooth cyclic samples with the winning sample sharpened by the
/// vertex of the parabola through it and its neighbours; grid extremes alone
/// undershoot the continuum sup by O(h^2). A vertex outside the bracket means
/// the data is not locally parabolic and the raw sample is kept.
fn chain_extremes(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    let (mut lo, mut hi) = (0usize, 0usize);
    for j in 1..m {
        if values[j] < values[lo] {
            lo = j;
        }
        if values[j] > values[hi] {
            hi = j;
        }
    }
    let vertex = |j: usize| -> f64 {
        let y0 = values[j];
        let ym = values[(j + m - 1) % m];
        let yp = values[(j + 1) % m];
        let den = yp - 2.0 * y0 + ym;
        let t = (ym - yp) / (2.0 * den);
        if den != 0.0 && t.abs() <= 1.0 {
            y0 - (yp - ym) * (yp - ym) / (8.0 * den)
        } else {
            y0
        }
    };
    (vertex(lo), vertex(hi))
}

fn measured_rotation(points: &[[f64; 2]]) -> Result<u32> {
    let chain = ChainGeometry::new(points)?;
    let nearest = chain.winding.round();
    let residual = (chain.winding - nearest).abs();
    if residual >= 0.1 || nearest < 1.0 {
        return Err(Error::RotationResidual { winding: chain.winding, residual });
    }
    Ok(nearest as u32)
}

/// All diagnostics plus the forcing g of `flow`, from a dense closed
/// polyline.
///
/// `refinement` = 1 applies one level of Richardson extrapolation against
/// the stride-2 subsampled polyline (leading O(h^2) errors cancel);
/// 0 returns the raw second-order values. The polyline must keep at least
/// [`MIN_ORACLE_POINTS`] after the coarsest subsampling.
pub fn oracle_functionals(
    points: &[[f64; 2]],
    refinement: usize,
    flow: FlowKind,
) -> Result<Diagnostics> {
    let refinement = refinement.min(1);
    let minimum = MIN_ORACLE_POINTS << refinement;
    if points.len() < minimum {
        return Err(Error::TooCoarse { points: points.len(), minimum });
    }

    let rotation = measured_rotation(points)?;
    let fine = assemble(points, rotation)?;
    let fields = if refinement == 1 {
        richardson(fine, assemble(&subsample(points, 2), rotation)?)
    } else {
        fine
    };

    let chain = ChainGeometry::new(points)?;
    // Pointwise curvature carries the same O(h^2) bias as the integrals, so
    // the extremes get their own extrapolation against the stride-2 chain
    // (on the shared nodes) before the vertex refinement.
    let kappa_nodes: Vec<f64> = if refinement == 1 {
        let coarse = ChainGeometry::new(&subsample(points, 2))?;
        coarse
            .kappa
            .iter()
            .enumerate()
            .map(|(j, &kc)| (4.0 * chain.kappa[2 * j] - kc) / 3.0)
            .collect()
    } else {
        chain.kappa.clone()
    };
    let (kappa_min, kappa_max) = chain_extremes(&kappa_nodes);

    let g = match flow {
        FlowKind::Ap => 0.0,
        FlowKind::Lp => fields.i0 / fields.total_curvature,
        FlowKind::Jp => {
            if fields.area <= 0.0 {
                return Err(Error::NonPositiveArea { area: fields.area });
            }
            fields.length * fields.length / (2.0 * fields.area) - fields.total_curvature
        }
    };

    let diagnostics = Diagnostics {
        t: 0.0,
        length: fields.length,
        area: fields.area,
        rotation,
        total_curvature: fields.total_curvature,
        bending: fields.bending,
        i_m1: fields.i_m1,
        i0: fields.i0,
        i1: fields.i1,
        tilde_i_m1: fields.tilde_i_m1,
        j3: fields.j3,
        j4: fields.j4,
        g,
        kappa_max,
        kappa_min,
    };
    Ok(diagnostics)
}

/// One forward-Euler step of the flow on a raw polyline: p += dt (kappa -
/// mean - g/L) nu with every ingredient from finite differences.
///
/// The polyline stays raw (no reparametrization) so repeated steps remain
/// independent of the spectral machinery; the non-uniform differences absorb
/// the slow node drift. Refuses steps beyond the explicit stability limit
/// min(1e-5 r_min^2, 0.5 h_min^2) with r_min the tightest curvature radius
/// and h_min the smallest chord.
pub fn oracle_step_explicit(
    points: &[[f64; 2]],
    flow: FlowKind,
    dt: f64,
) -> Result<Vec<[f64; 2]>> {
    if points.len() < MIN_ORACLE_POINTS {
        return Err(Error::TooCoarse { points: points.len(), minimum: MIN_ORACLE_POINTS });
    }
    let chain = ChainGeometry::new(points)?;
    let kappa_abs_max = chain.kappa.iter().fold(0.0f64, |m, k| m.max(k.abs()));
    let h_min = chain.ds.iter().copied().fold(f64::MAX, f64::min);
    let r_min_sq = if kappa_abs_max > 0.0 { 1.0 / (kappa_abs_max * kappa_abs_max) } else { f64::MAX };
    let limit = (1e-5 * r_min_sq).min(0.5 * h_min * h_min);
    if dt > limit {
        return Err(Error::StabilityViolation { dt, limit });
    }

    let length = chain.length;
    let total_curvature = chain.oint(|j| chain.kappa[j]);
    let kappa_mean = total_curvature / length;
    let g = match flow {
        FlowKind::Ap => 0.0,
        FlowKind::Lp => {
            let i0 = length * chain.oint(|j| (chain.kappa[j] - kappa_mean).powi(2));
            i0 / total_curvature
        }
        FlowKind::Jp => {
            if chain.area <= 0.0 {
                return Err(Error::NonPositiveArea { area: chain.area });
            }
            length * length / (2.0 * chain.area) - total_curvature
        }
    };

    Ok((0..points.len())
        .map(|j| {
            let v = chain.kappa[j] - kappa_mean - g / length;
            [
                points[j][0] + dt * v * chain.normal[j][0],
                points[j][1] + dt * v * chain.normal[j][1],
            ]
        })
        .collect())
}

/// Repeated [`oracle_step_explicit`].
pub fn oracle_evolve(
    points: &[[f64; 2]],
    flow: FlowKind,
    dt: f64,
    steps: usize,
) -> Result<Vec<[f64; 2]>> {
    let mut current = points.to_vec();
    for _ in 0..steps {
        current = oracle_step_explicit(&current, flow, dt)?;
    }
    Ok(current)
}

/// Sup over `from` nodes of the distance to the polyline `to` (point to
/// nearest segment). Parametrization-free curve comparison for the
/// convergence studies.
pub fn polyline_sup_distance(from: &[[f64; 2]], to: &[[f64; 2]]) -> f64 {
    let m = to.len();
    let mut worst = 0.0f64;
    for p in from {
        let mut best = f64::MAX;
        for j in 0..m {
            let a = to[j];
            let b = to[(j + 1) % m];
            let ab = [b[0] - a[0], b[1] - a[1]];
            let ap = [p[0] - a[0], p[1] - a[1]];
            let len_sq = ab[0] * ab[0] + ab[1] * ab[1];
            let t = if len_sq > 0.0 {
                ((ap[0] * ab[0] + ap[1] * ab[1]) / len_sq).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let dx = ap[0] - t * ab[0];
            let dy = ap[1] - t * ab[1];
            best = best.min(dx * dx + dy * dy);
            if best == 0.0 {
                break;
            }
        }
        worst = worst.max(best.sqrt());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_points(m: usize, radius: f64, turns: f64) -> Vec<[f64; 2]> {
        (0..m)
            .map(|j| {
                let theta = TAU * turns * j as f64 / m as f64;
                [radius * theta.cos(), radius * theta.sin()]
            })
            .collect()
    }

    #[test]
    fn simpson_integrates_smooth_functions() {
        let s = adaptive_simpson(&|x: f64| x.sin(), 0.0, PI, 1e-13);
        assert!((s - 2.0).abs() < 1e-12);
        let g = adaptive_simpson(&|x: f64| (-x * x).exp(), -6.0, 6.0, 1e-13);
        assert!((g - PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn ellipse_perimeter_matches_references() {
        let p = ellipse_perimeter(2.0, 1.0);
        // 4 a E(1 - b^2/a^2) evaluated independently.
        assert!((p - 9.688448220547675).abs() < 1e-10, "p = {p}");
        // Ramanujan's second approximation as an order-of-magnitude sanity bound.
        let h = ((2.0f64 - 1.0) / (2.0 + 1.0)).powi(2);
        let ramanujan = PI * 3.0 * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()));
        assert!((p - ramanujan).abs() < 1e-4 * p);
        assert!((ellipse_perimeter(1.0, 1.0) - TAU).abs() < 1e-12);
    }

    #[test]
    fn circle_functionals_are_exact() {
        let d = oracle_functionals(&circle_points(4096, 1.0, 1.0), 1, FlowKind::Lp).unwrap();
        assert!((d.length - TAU).abs() < 1e-8);
        assert!((d.area - PI).abs() < 1e-8);
        assert_eq!(d.rotation, 1);
        assert!((d.total_curvature - TAU).abs() < 1e-7);
        assert!((d.bending - TAU).abs() < 1e-7);
        assert!(d.i0.abs() < 1e-8 && d.i_m1.abs() < 1e-8 && d.tilde_i_m1.abs() < 1e-8);
        assert!(d.g.abs() < 1e-8);
        assert!((d.kappa_max - 1.0).abs() < 1e-6 && (d.kappa_min - 1.0).abs() < 1e-6);
    }

    #[test]
    fn double_circle_counts_area_twice() {
        let d = oracle_functionals(&circle_points(4096, 1.0, 2.0), 1, FlowKind::Ap).unwrap();
        assert!((d.area - 2.0 * PI).abs() < 1e-8, "A = {}", d.area);
        assert_eq!(d.rotation, 2);
        assert!((d.total_curvature - 2.0 * TAU).abs() < 1e-7);
    }

    #[test]
    fn coarse_polylines_are_refused() {
        match oracle_functionals(&circle_points(512, 1.0, 1.0), 1, FlowKind::Ap) {
            Err(Error::TooCoarse { points: 512, minimum }) => assert_eq!(minimum, 2048),
            other => panic!("expected TooCoarse, got {other:?}"),
        }
    }

    #[test]
    fn explicit_step_keeps_circles_still() {
        let pts = circle_points(2048, 1.0, 1.0);
        for flow in FlowKind::ALL {
            let next = oracle_step_explicit(&pts, flow, 1e-7).unwrap();
            let drift = pts
                .iter()
                .zip(&next)
                .map(|(p, q)| ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt())
                .fold(0.0, f64::max);
            assert!(drift < 1e-10, "{flow}: drift {drift:e}");
        }
    }

    #[test]
    fn explicit_step_rejects_unstable_dt() {
        let pts = circle_points(1024, 1.0, 1.0);
        match oracle_step_explicit(&pts, FlowKind::Ap, 1e-3) {
            Err(Error::StabilityViolation { limit, .. }) => assert!(limit < 1e-3),
            other => panic!("expected StabilityViolation, got {other:?}"),
        }
    }

    #[test]
    fn sup_distance_sees_radial_offsets() {
        let a = circle_points(512, 1.0, 1.0);
        let b = circle_points(1024, 1.01, 1.0);
        let d = polyline_sup_distance(&a, &b);
        assert!((d - 0.01).abs() < 1e-4, "d = {d}");
    }
}
