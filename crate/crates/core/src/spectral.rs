//! Fourier coefficients of the position and the scalar functionals built
//! from them.
//!
//! Coefficients use the normalization fhat(k) = L^{-1/2} int_0^L f e^{-2 pi
//! i k s / L} ds, i.e. fhat(k) = sqrt(L) c_k with c_k the normalized DFT of
//! the node values. This is the unique scaling under which the power sums
//! below hold together with |fhat(n)| = sqrt(L) r on the n-fold circle:
//!
//!   sum k   |fhat|^2 = L A / pi
//!   sum k^2 |fhat|^2 = L^3 / 4 pi^2          (unit-speed encoding)
//!   sum k^3 |fhat|^2 = (L/2pi)^3 oint kappa ds
//!   sum k^4 |fhat|^2 = (L/2pi)^4 oint kappa^2 ds
//!   sum k^5 |fhat|^2 = (L/2pi)^5 oint kappa^3 ds
//!   sum k^6 |fhat|^2 = (L/2pi)^6 oint (kappa^4 + kappa'^2) ds
//!
//! Every functional is also computed in physical space (spectral derivatives
//! plus oversampled quadrature); [`verify_identities`] pits the two routes
//! against each other.

use crate::error::{Error, Result};
use crate::flow::FlowKind;
use crate::fourier::{bin_frequency, Cx, Series};
use crate::geometry::ArcLengthCurve;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const TAU: f64 = 2.0 * PI;

/// Oversampling factor for nonlinear integrands (products up to kappa^4).
const DEALIAS: usize = 4;

/// Relative residual accepted for an identity to count as passing.
pub const IDENTITY_TOL: f64 = 1e-7;

/// Absolute slack accepted below zero for the inequality suite.
pub const INEQUALITY_SLACK: f64 = 1e-10;

/// One snapshot of every scalar the analysis tracks.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Simulation time of the snapshot (0 for standalone evaluations).
    pub t: f64,
    pub length: f64,
    pub area: f64,
    pub rotation: u32,
    /// R = oint kappa ds = 2 pi n.
    pub total_curvature: f64,
    /// W = oint kappa^2 ds.
    pub bending: f64,
    /// Isoperimetric deficit 1 - 4 n pi A / L^2.
    pub i_m1: f64,
    /// L oint (kappa - mean)^2 ds.
    pub i0: f64,
    /// L^3 oint kappa'^2 ds.
    pub i1: f64,
    /// L^-1 || (2 pi n / L)(f - mean) + nu ||^2.
    pub tilde_i_m1: f64,
    /// L^2 oint (kappa - mean)^3 ds.
    pub j3: f64,
    /// L^3 oint (kappa - mean)^4 ds.
    pub j4: f64,
    /// Non-local forcing of the flow the snapshot was taken under.
    pub g: f64,
    pub kappa_max: f64,
    pub kappa_min: f64,
}

/// Physical-space integrals shared by the functionals and the identity suite.
pub(crate) struct PhysicalIntegrals {
    pub length: f64,
    pub area: f64,
    pub rotation: u32,
    /// oint kappa^p ds for p = 1..4 (index 0 unused).
    pub kappa_moments: [f64; 5],
    /// oint kappa'^2 ds and oint kappa''^2 ds (arc-length derivatives).
    pub grad_sq: f64,
    pub grad2_sq: f64,
    /// Centered moments oint (kappa - mean)^p ds for p = 2..4.
    pub centered: [f64; 5],
    /// oint |f - mean|^2 ds.
    pub spread_sq: f64,
    /// oint |(2 pi n / L)(f - mean) + nu|^2 ds.
    pub tilde_norm_sq: f64,
    pub kappa_max: f64,
    pub kappa_min: f64,
}

impl PhysicalIntegrals {
    pub(crate) fn new(curve: &ArcLengthCurve) -> Self {
        let series = curve.series();
        let f = series.values_oversampled(DEALIAS);
        let d1 = series.derivative(1).values_oversampled(DEALIAS);
        let d2 = series.derivative(2).values_oversampled(DEALIAS);
        let m = f.len();
        let length = curve.length();
        let rotation = curve.rotation();

        let w: Vec<f64> = d1.iter().map(|v| v.norm()).collect();
        let kappa: Vec<f64> = (0..m)
            .map(|j| (d2[j] * d1[j].conj()).im / (w[j] * w[j] * w[j]))
            .collect();

        // Arc-length derivatives of kappa by spectral differentiation of its
        // own fine-grid samples: d/ds = (1/w) d/du.
        let kappa_series = Series::from_values(&kappa.iter().map(|&k| Cx::new(k, 0.0)).collect::<Vec<_>>());
        let dkdu = kappa_series.derivative(1).values();
        let kappa_s: Vec<f64> = (0..m).map(|j| dkdu[j].re / w[j]).collect();
        let ks_series = Series::from_values(&kappa_s.iter().map(|&k| Cx::new(k, 0.0)).collect::<Vec<_>>());
        let dksdu = ks_series.derivative(1).values();
        let kappa_ss: Vec<f64> = (0..m).map(|j| dksdu[j].re / w[j]).collect();

        // oint F ds = int_0^1 F w du; the mean over the fine grid is the
        // spectrally accurate quadrature for periodic integrands.
        let oint = |vals: &dyn Fn(usize) -> f64| -> f64 {
            (0..m).map(|j| vals(j) * w[j]).sum::<f64>() / m as f64
        };

        let area = 0.5 * (0..m).map(|j| (f[j].conj() * d1[j]).im).sum::<f64>() / m as f64;
        let mut kappa_moments = [0.0; 5];
        for p in 1..=4 {
            kappa_moments[p] = oint(&|j| kappa[j].powi(p as i32));
        }
        let grad_sq = oint(&|j| kappa_s[j] * kappa_s[j]);
        let grad2_sq = oint(&|j| kappa_ss[j] * kappa_ss[j]);

        let kappa_mean = kappa_moments[1] / length;
        let mut centered = [0.0; 5];
        for p in 2..=4 {
            centered[p] = oint(&|j| (kappa[j] - kappa_mean).powi(p as i32));
        }

        let mean_point = {
            let s: Cx = (0..m).map(|j| f[j] * w[j]).sum();
            s / (m as f64 * length)
        };
        let spread_sq = oint(&|j| (f[j] - mean_point).norm_sqr());
        let scale = TAU * rotation as f64 / length;
        let tilde_norm_sq = oint(&|j| {
            let nu = Cx::new(0.0, 1.0) * d1[j] / w[j];
            (scale * (f[j] - mean_point) + nu).norm_sqr()
        });

        // Grid extremes undershoot the continuum sup by O(h^2); evaluate the
        // curvature interpolant on a further-refined grid and sharpen the
        // winning sample with a parabola vertex.
        let dense: Vec<f64> =
            kappa_series.values_oversampled(4).iter().map(|v| v.re).collect();
        let (kappa_min, kappa_max) = refined_extremes(&dense);

        PhysicalIntegrals {
            length,
            area,
            rotation,
            kappa_moments,
            grad_sq,
            grad2_sq,
            centered,
            spread_sq,
            tilde_norm_sq,
            kappa_max,
            kappa_min,
        }
    }

    pub(crate) fn i0(&self) -> f64 {
        self.length * self.centered[2]
    }

    pub(crate) fn i1(&self) -> f64 {
        self.length.powi(3) * self.grad_sq
    }

    /// L^5 oint (kappa - mean)''^2 ds; needed by the (j, 2) interpolation pairs.
    pub(crate) fn i2(&self) -> f64 {
        self.length.powi(5) * self.grad2_sq
    }

    pub(crate) fn i_m1(&self) -> f64 {
        1.0 - 4.0 * self.rotation as f64 * PI * self.area / (self.length * self.length)
    }

    pub(crate) fn tilde_i_m1(&self) -> f64 {
        self.tilde_norm_sq / self.length
    }
}

/// The per-step subset of the diagnostics: enough to evaluate the non-local
/// forcing and the step-size control, measured from an arbitrary (not
/// necessarily unit-speed) immersed periodic map.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FlowData {
    pub length: f64,
    pub area: f64,
    pub i0: f64,
    pub kappa_max: f64,
    pub kappa_min: f64,
}

impl FlowData {
    pub(crate) fn from_series(series: &Series, dealias: usize) -> Self {
        let f = series.values_oversampled(dealias);
        let d1 = series.derivative(1).values_oversampled(dealias);
        let d2 = series.derivative(2).values_oversampled(dealias);
        let m = f.len();
        let mut length = 0.0;
        let mut area = 0.0;
        let mut kappa_mean_acc = 0.0;
        let mut kappa = Vec::with_capacity(m);
        for j in 0..m {
            let w = d1[j].norm();
            let k = (d2[j] * d1[j].conj()).im / (w * w * w);
            length += w;
            area += (f[j].conj() * d1[j]).im;
            kappa_mean_acc += k * w;
            kappa.push((k, w));
        }
        length /= m as f64;
        area = 0.5 * area / m as f64;
        let kappa_mean = kappa_mean_acc / (m as f64 * length);
        let mut i0 = 0.0;
        let mut kappa_max = f64::MIN;
        let mut kappa_min = f64::MAX;
        for &(k, w) in &kappa {
            let dev = k - kappa_mean;
            i0 += dev * dev * w;
            kappa_max = kappa_max.max(k);
            kappa_min = kappa_min.min(k);
        }
        i0 = length * i0 / m as f64;
        FlowData { length, area, i0, kappa_max, kappa_min }
    }
}

/// Extremes of smooth uniform cyclic samples, refined by the vertex of the
/// parabola through the winning sample and its neighbours. At a discrete
/// extreme the bracket curves the right way by construction; a vertex landing
/// outside the bracket means the data is not locally parabolic, and the raw
/// sample is kept.
fn refined_extremes(values: &[f64]) -> (f64, f64) {
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

/// Curvature extremes on the dealiased grid.
pub fn kappa_extremes(curve: &ArcLengthCurve) -> (f64, f64) {
    let fd = FlowData::from_series(&curve.series(), DEALIAS);
    (fd.kappa_min, fd.kappa_max)
}

/// All diagnostics of a curve, in physical space, with the forcing of `flow`.
pub fn functionals(curve: &ArcLengthCurve, flow: FlowKind) -> Diagnostics {
    let p = PhysicalIntegrals::new(curve);
    let mut d = Diagnostics {
        t: 0.0,
        length: p.length,
        area: p.area,
        rotation: p.rotation,
        total_curvature: p.kappa_moments[1],
        bending: p.kappa_moments[2],
        i_m1: p.i_m1(),
        i0: p.i0(),
        i1: p.i1(),
        tilde_i_m1: p.tilde_i_m1(),
        j3: p.length * p.length * p.centered[3],
        j4: p.length.powi(3) * p.centered[4],
        g: 0.0,
        kappa_max: p.kappa_max,
        kappa_min: p.kappa_min,
    };
    d.g = crate::flow::nonlocal_forcing(&d, flow).unwrap_or(f64::NAN);
    d
}

// ---------------------------------------------------------------------------
// Coefficient table
// ---------------------------------------------------------------------------

/// Fourier coefficients fhat(k), |k| <= bandwidth, in the sqrt(L)-weighted
/// normalization described in the module docs.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    fhat: Vec<Cx>,
    bandwidth: i64,
    length: f64,
    rotation: u32,
}

/// Build the coefficient table with bandwidth min(k_max, N/2 - 1).
///
/// Fails with `BandwidthTooLow` when the discarded tail carries more than
/// 1e-8 of the derivative energy, and with `UnitSpeed` when the k^2 power sum
/// disagrees with L^3/4pi^2 (the coefficient-side footprint of unit speed).
pub fn fourier_coefficients(curve: &ArcLengthCurve, k_max: usize) -> Result<CoefficientTable> {
    let series = curve.series();
    let n = series.len();
    let bandwidth = (k_max).min(n / 2 - 1) as i64;

    let coeffs = series.coeffs();
    let mut kept = 0.0;
    let mut total = 0.0;
    for (i, c) in coeffs.iter().enumerate() {
        let k = bin_frequency(i, n);
        let e = (k * k) as f64 * c.norm_sqr();
        total += e;
        if k.abs() <= bandwidth {
            kept += e;
        }
    }
    let tail_fraction = if total > 0.0 { 1.0 - kept / total } else { 0.0 };
    if tail_fraction > 1e-8 {
        return Err(Error::BandwidthTooLow { bandwidth: bandwidth as usize, tail_fraction });
    }

    let sqrt_l = curve.length().sqrt();
    let fhat: Vec<Cx> =
        (-bandwidth..=bandwidth).map(|k| series.coeff(k) * sqrt_l).collect();
    let table =
        CoefficientTable { fhat, bandwidth, length: curve.length(), rotation: curve.rotation() };

    let ser2 = table.power_sum(&[0.0, 0.0, 1.0]);
    let expected = curve.length().powi(3) / (4.0 * PI * PI);
    let dev = (ser2 - expected).abs() / expected;
    if dev > 1e-6 {
        return Err(Error::UnitSpeed { max_dev: dev });
    }
    Ok(table)
}

/// Table without the tail and unit-speed validations, for diagnostics on
/// under-resolved curves late in blow-up runs where the checked constructor
/// would refuse.
pub(crate) fn coefficient_table_lossy(curve: &ArcLengthCurve, k_max: usize) -> CoefficientTable {
    let series = curve.series();
    let bandwidth = k_max.min(series.len() / 2 - 1) as i64;
    let sqrt_l = curve.length().sqrt();
    let fhat: Vec<Cx> = (-bandwidth..=bandwidth).map(|k| series.coeff(k) * sqrt_l).collect();
    CoefficientTable { fhat, bandwidth, length: curve.length(), rotation: curve.rotation() }
}

impl CoefficientTable {
    pub fn bandwidth(&self) -> i64 {
        self.bandwidth
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn rotation(&self) -> u32 {
        self.rotation
    }

    /// fhat(k); zero outside the stored band.
    pub fn fhat(&self, k: i64) -> Cx {
        if k.abs() <= self.bandwidth {
            self.fhat[(k + self.bandwidth) as usize]
        } else {
            Cx::new(0.0, 0.0)
        }
    }

    /// sum_k weight(k) |fhat(k)|^2 for a polynomial weight given by its
    /// coefficients (weight[p] multiplies k^p), degree <= 6.
    pub fn power_sum(&self, weight: &[f64]) -> f64 {
        assert!(weight.len() <= 7, "power sums are used up to k^6");
        self.weighted_sum(
            |k| {
                let kf = k as f64;
                weight.iter().rev().fold(0.0, |acc, &w| acc * kf + w)
            },
            false,
        )
    }

    /// sum_k weight(k) |fhat(k)|^2, optionally excluding k = 0.
    pub fn weighted_sum(&self, weight: impl Fn(i64) -> f64, skip_zero: bool) -> f64 {
        let mut acc = 0.0;
        for k in -self.bandwidth..=self.bandwidth {
            if skip_zero && k == 0 {
                continue;
            }
            acc += weight(k) * self.fhat(k).norm_sqr();
        }
        acc
    }
}

// ---------------------------------------------------------------------------
// Identity suite
// ---------------------------------------------------------------------------

/// One identity: a coefficient-side value against its physical-space partner.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    /// |lhs - rhs| / (1 + |rhs|).
    pub residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.residual).fold(0.0, f64::max)
    }

    pub fn residual(&self, name: &str) -> Option<f64> {
        self.checks.iter().find(|c| c.name == name).map(|c| c.residual)
    }
}

/// Pit every coefficient-space expression against its physical-space value.
pub fn verify_identities(curve: &ArcLengthCurve) -> Result<IdentityReport> {
    let table = fourier_coefficients(curve, curve.node_count() / 2 - 1)?;
    let p = PhysicalIntegrals::new(curve);
    let l = p.length;
    let n = p.rotation as f64;
    let four_pi_sq = 4.0 * PI * PI;
    let l3 = l * l * l;

    let mut checks = Vec::with_capacity(13);
    let mut push = |name: &'static str, lhs: f64, rhs: f64| {
        let residual = (lhs - rhs).abs() / (1.0 + rhs.abs());
        checks.push(IdentityCheck { name, lhs, rhs, residual, pass: residual <= IDENTITY_TOL });
    };

    push("power_sum_area", table.power_sum(&[0.0, 1.0]), l * p.area / PI);
    push("power_sum_length", table.power_sum(&[0.0, 0.0, 1.0]), l3 / four_pi_sq);
    push(
        "power_sum_total_curvature",
        table.power_sum(&[0.0, 0.0, 0.0, 1.0]),
        (l / TAU).powi(3) * p.kappa_moments[1],
    );
    push(
        "power_sum_bending",
        table.power_sum(&[0.0, 0.0, 0.0, 0.0, 1.0]),
        (l / TAU).powi(4) * p.kappa_moments[2],
    );
    push(
        "power_sum_cubic",
        table.weighted_sum(|k| (k as f64).powi(5), false),
        (l / TAU).powi(5) * p.kappa_moments[3],
    );
    push(
        "power_sum_quartic_gradient",
        table.weighted_sum(|k| (k as f64).powi(6), false),
        (l / TAU).powi(6) * (p.kappa_moments[4] + p.grad_sq),
    );
    // sum k^2 (k - n) |fhat|^2 = 0; normalized by 4 pi^2 / L^3 so the
    // residual is scale-free.
    push(
        "mean_mode_balance",
        four_pi_sq / l3 * table.weighted_sum(|k| (k * k) as f64 * (k as f64 - n), false),
        0.0,
    );

    let i0_phys = p.i0();
    push(
        "i0_cubic_form",
        four_pi_sq * four_pi_sq / l3 * table.weighted_sum(|k| (k as f64).powi(3) * (k as f64 - n), false),
        i0_phys,
    );
    push(
        "i0_quadratic_form",
        four_pi_sq * four_pi_sq / l3
            * table.weighted_sum(|k| (k * k) as f64 * (k as f64 - n).powi(2), false),
        i0_phys,
    );

    let i_m1_def = p.i_m1();
    push(
        "i_m1_spectral",
        four_pi_sq / l3 * table.weighted_sum(|k| k as f64 * (k as f64 - n), false),
        i_m1_def,
    );
    push(
        "i_m1_shifted_form",
        -four_pi_sq / (n * l3) * table.weighted_sum(|k| k as f64 * (k as f64 - n).powi(2), true),
        i_m1_def,
    );

    let tilde_phys = p.tilde_i_m1();
    push(
        "tilde_i_m1_spectral",
        four_pi_sq / l3 * table.weighted_sum(|k| (k as f64 - n).powi(2), true),
        tilde_phys,
    );
    push(
        "tilde_i_m1_area_form",
        1.0 - 8.0 * PI * n * p.area / (l * l) + four_pi_sq * n * n * p.spread_sq / l3,
        tilde_phys,
    );

    Ok(IdentityReport { checks })
}

// ---------------------------------------------------------------------------
// Inequality suite
// ---------------------------------------------------------------------------

/// One inequality lhs <= rhs, or one recorded interpolation ratio.
#[derive(Debug, Clone, Serialize)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Signed slack rhs - lhs for inequalities; the ratio itself for ratio
    /// records.
    pub value: f64,
    /// True when the denominator degenerates (exact n-fold circle); the
    /// record is then informational and passes vacuously.
    pub degenerate: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub checks: Vec<InequalityCheck>,
}

impl InequalityReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.checks.iter().find(|c| c.name == name).map(|c| c.value)
    }
}

/// Threshold below which tilde I_{-1} marks an exact n-fold circle.
pub const CIRCLE_TILDE_FLOOR: f64 = 1e-12;

/// ratio(j, l) = I_j / (tilde^{(l-j)/2} I_l + tilde^{(l-j)/(l+1)} I_l^{(j+1)/(l+1)}).
///
/// Errors with `DegenerateDenominator` on exact n-fold circles, where both
/// denominator terms vanish.
pub fn interpolation_ratio(tilde: f64, i: [f64; 3], j: usize, l: usize) -> Result<f64> {
    assert!(j < l && l <= 2, "supported pairs: (0,1), (0,2), (1,2)");
    let jf = j as f64;
    let lf = l as f64;
    let denom = tilde.powf((lf - jf) / 2.0) * i[l]
        + tilde.powf((lf - jf) / (lf + 1.0)) * i[l].powf((jf + 1.0) / (lf + 1.0));
    if !(denom > CIRCLE_TILDE_FLOOR) {
        return Err(Error::DegenerateDenominator {
            context: "interpolation ratio denominator",
            value: denom,
        });
    }
    Ok(i[j] / denom)
}

/// Signed slacks of the static inequalities plus the interpolation ratios
/// for the requested (j, l) pairs.
pub fn check_inequalities(curve: &ArcLengthCurve, pairs: &[(usize, usize)]) -> InequalityReport {
    let p = PhysicalIntegrals::new(curve);
    let l = p.length;
    let n = p.rotation as f64;
    let four_pi_sq = 4.0 * PI * PI;
    let i = [p.i0(), p.i1(), p.i2()];
    let i_m1 = p.i_m1();
    let tilde = p.tilde_i_m1();

    let mut checks = Vec::new();
    let mut slack = |name: &str, lhs: f64, rhs: f64| {
        let value = rhs - lhs;
        checks.push(InequalityCheck {
            name: name.to_string(),
            lhs,
            rhs,
            value,
            degenerate: false,
            pass: value >= -INEQUALITY_SLACK,
        });
    };

    slack("isoperimetric", 4.0 * PI * p.area, l * l);
    slack("wirtinger_gap", four_pi_sq * n * i_m1.abs(), i[0]);
    slack("tilde_wirtinger_gap", four_pi_sq * tilde, i[0]);

    let bracket = l * l * l * (p.kappa_moments[4] + p.grad_sq);
    slack("schwarz_sqrt_reading", i[0], (tilde * bracket).sqrt());
    // The same estimate without the square root on the bracket; implied by
    // the sqrt reading whenever bracket >= 1 (it is >= 16 pi^4 here).
    slack("schwarz_linear_reading", i[0], tilde.sqrt() * bracket);

    for &(j, el) in pairs {
        let name = format!("interpolation_ratio_{j}_{el}");
        match interpolation_ratio(tilde, i, j, el) {
            Ok(ratio) => checks.push(InequalityCheck {
                name,
                lhs: i[j],
                rhs: ratio,
                value: ratio,
                degenerate: false,
                pass: ratio.is_finite() && ratio > 0.0,
            }),
            Err(Error::DegenerateDenominator { value, .. }) => checks.push(InequalityCheck {
                name,
                lhs: i[j],
                rhs: f64::NAN,
                value,
                degenerate: true,
                pass: true,
            }),
            Err(_) => unreachable!("interpolation_ratio only fails on degeneracy"),
        }
    }

    InequalityReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_test_curve, CurveSpec};

    fn circle(radius: f64, rotation: u32) -> ArcLengthCurve {
        make_test_curve(&CurveSpec::Circle { radius, rotation, center: [0.0, 0.0] }, 256).unwrap()
    }

    fn perturbed(rotation: u32, mode: u32, amplitude: f64) -> ArcLengthCurve {
        make_test_curve(
            &CurveSpec::PerturbedNCircle { radius: 1.0, rotation, mode, amplitude, phase: 0.4 },
            512,
        )
        .unwrap()
    }

    #[test]
    fn circle_coefficients_are_single_mode() {
        let c = make_test_curve(
            &CurveSpec::Circle { radius: 3.0, rotation: 2, center: [1.0, 2.0] },
            256,
        )
        .unwrap();
        let table = fourier_coefficients(&c, 127).unwrap();
        let sqrt_l = c.length().sqrt();
        assert!((table.fhat(0) - Cx::new(1.0, 2.0) * sqrt_l).norm() < 1e-9);
        assert!((table.fhat(2).norm() - 3.0 * sqrt_l).abs() < 1e-9);
        for k in -20..=20i64 {
            if k != 0 && k != 2 {
                assert!(table.fhat(k).norm() < 1e-10, "fhat({k}) = {}", table.fhat(k));
            }
        }
        // Power sum with weight k^3 on the 2-fold unit-radius circle is 32 pi.
        let c2 = circle(1.0, 2);
        let t2 = fourier_coefficients(&c2, 127).unwrap();
        let ser3 = t2.power_sum(&[0.0, 0.0, 0.0, 1.0]);
        assert!((ser3 - 32.0 * PI).abs() < 1e-9, "ser3 = {ser3}");
    }

    #[test]
    fn identities_hold_on_analytic_curves() {
        for (spec, tol) in [
            (CurveSpec::Circle { radius: 1.0, rotation: 1, center: [0.0, 0.0] }, 1e-10),
            (CurveSpec::Circle { radius: 0.7, rotation: 3, center: [0.3, -0.4] }, 1e-10),
            (CurveSpec::Ellipse { a: 2.0, b: 1.0 }, IDENTITY_TOL),
            (CurveSpec::Limacon { a: 1.5, b: 1.0 }, IDENTITY_TOL),
            (
                CurveSpec::PerturbedNCircle {
                    radius: 1.0,
                    rotation: 2,
                    mode: 5,
                    amplitude: 0.05,
                    phase: 0.0,
                },
                IDENTITY_TOL,
            ),
        ] {
            let curve = make_test_curve(&spec, 512).unwrap();
            let report = verify_identities(&curve).unwrap();
            assert_eq!(report.checks.len(), 13);
            assert!(
                report.max_residual() <= tol,
                "{spec:?}: max residual {} from {:?}",
                report.max_residual(),
                report.checks.iter().max_by(|a, b| a.residual.total_cmp(&b.residual)).unwrap()
            );
        }
    }

    #[test]
    fn ellipse_diagnostics_match_frozen_values() {
        let c = make_test_curve(&CurveSpec::Ellipse { a: 2.0, b: 1.0 }, 512).unwrap();
        let d = functionals(&c, FlowKind::Ap);
        // 1 - 4 pi A / L^2 with A = 2 pi and L the quadrature perimeter.
        assert!((d.i_m1 - 0.1588).abs() < 2e-4, "I_m1 = {}", d.i_m1);
        assert!((d.total_curvature - TAU).abs() < 1e-9);
        assert!(d.i0 > 0.0 && d.i1 > 0.0 && d.tilde_i_m1 > 0.0);
        assert_eq!(d.g, 0.0);
        assert!((d.kappa_max - 2.0).abs() < 1e-9);
        assert!((d.kappa_min - 0.25).abs() < 1e-9);
    }

    #[test]
    fn circle_functionals_vanish() {
        for rotation in 1..=3u32 {
            let c = circle(0.8, rotation);
            let d = functionals(&c, FlowKind::Jp);
            assert!(d.i0.abs() < 1e-10);
            assert!(d.i_m1.abs() < 1e-12);
            assert!(d.tilde_i_m1.abs() < 1e-10);
            assert!(d.j3.abs() < 1e-10 && d.j4.abs() < 1e-10);
            let w_expected = TAU * rotation as f64 / 0.8;
            assert!((d.bending - w_expected).abs() < 1e-9);
            assert!(d.g.abs() < 1e-10);
        }
    }

    #[test]
    fn functionals_are_scale_invariant() {
        let c = perturbed(2, 3, 0.08);
        let d1 = functionals(&c, FlowKind::Lp);
        let d2 = functionals(&c.scaled(2.0), FlowKind::Lp);
        for (a, b) in [
            (d1.i_m1, d2.i_m1),
            (d1.i0, d2.i0),
            (d1.i1, d2.i1),
            (d1.tilde_i_m1, d2.tilde_i_m1),
            (d1.j3, d2.j3),
            (d1.j4, d2.j4),
            (d1.g, d2.g),
            (d1.total_curvature, d2.total_curvature),
        ] {
            assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn radial_ripple_deficit_matches_second_order_prediction() {
        // For r (1 + eps cos(k u)) e^{i n u}: I_m1 = (eps^2/2)(k^2 - n^2)/n^2 + O(eps^4).
        let eps = 0.01;
        for (rotation, mode) in [(2u32, 1u32), (2, 5), (1, 3), (3, 2)] {
            let c = perturbed(rotation, mode, eps);
            let d = functionals(&c, FlowKind::Ap);
            let n = rotation as f64;
            let k = mode as f64;
            let predicted = 0.5 * eps * eps * (k * k - n * n) / (n * n);
            // The next term is O(eps^4) with a mode-dependent constant; 1e-6 clears it
            // at eps = 0.01 while still pinning the quadratic coefficient.
            assert!(
                (d.i_m1 - predicted).abs() < 1e-6,
                "n={rotation} k={mode}: I_m1 = {}, predicted {predicted}",
                d.i_m1
            );
        }
    }

    #[test]
    fn inequalities_have_nonnegative_slack() {
        let pairs = [(0, 1), (0, 2), (1, 2)];
        for seed in 0..5u64 {
            for rotation in 1..=3u32 {
                let c = make_test_curve(
                    &CurveSpec::RandomBandLimited { rotation, seed, max_mode: 8, amplitude: 0.1 },
                    512,
                )
                .unwrap();
                let report = check_inequalities(&c, &pairs);
                assert!(report.all_pass(), "seed {seed} n {rotation}: {:?}", report.checks);
                for check in &report.checks {
                    if check.name.starts_with("interpolation_ratio") {
                        assert!(!check.degenerate);
                        assert!(check.value.is_finite() && check.value > 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn circle_degenerates_the_interpolation_ratio() {
        let c = circle(1.0, 2);
        let report = check_inequalities(&c, &[(0, 1)]);
        let ratio = report.checks.iter().find(|c| c.name == "interpolation_ratio_0_1").unwrap();
        assert!(ratio.degenerate && ratio.pass);
        // L^2 - 4 pi A = 4 pi^2 n (n - 1) r^2 on an n-fold circle: positive for n >= 2.
        let iso = report.checks.iter().find(|c| c.name == "isoperimetric").unwrap();
        assert!(iso.pass && (iso.value - 8.0 * PI * PI).abs() < 1e-8, "iso slack {}", iso.value);
        // The Wirtinger-type slacks are genuine equality cases here.
        for check in &report.checks {
            if !check.degenerate
                && check.name != "schwarz_linear_reading"
                && check.name != "isoperimetric"
            {
                assert!(
                    check.value.abs() < 1e-8 * (1.0 + check.rhs.abs()),
                    "{}: slack {}",
                    check.name,
                    check.value
                );
            }
        }
    }

    #[test]
    fn near_circle_has_small_modes_iff_tilde_small() {
        let c = perturbed(2, 5, 1e-7);
        let d = functionals(&c, FlowKind::Ap);
        let table = fourier_coefficients(&c, 255).unwrap();
        if d.tilde_i_m1 <= CIRCLE_TILDE_FLOOR {
            for k in -(table.bandwidth())..=table.bandwidth() {
                if k != 0 && k != 2 {
                    assert!(table.fhat(k).norm() / c.length().sqrt() < 1e-6);
                }
            }
        } else {
            // Amplitude 1e-7 ripples stay above the detection floor.
            assert!(d.tilde_i_m1 > CIRCLE_TILDE_FLOOR);
        }
    }
}
