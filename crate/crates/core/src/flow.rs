//! Time evolution of dt f = (kappa - mean - g/L) nu for the three flows.
//!
//! Using kappa nu = dss f and oint kappa ds = 2 pi n, the velocity is
//! rewritten as dt f = dss f - ((2 pi n + g)/L) nu, whose linear part is
//! diagonal in Fourier space at frozen L: dss maps fhat(k) to -mu_k^2
//! fhat(k) and nu maps it to -mu_k fhat(k) with mu_k = 2 pi k / L.
//!
//! One step is a two-stage IMEX midpoint rule:
//!  1. predictor: half step of backward Euler on the frozen diagonal;
//!  2. corrector: Crank-Nicolson on dss (still at frozen L) plus an explicit
//!     midpoint evaluation of everything the diagonal misses: the forcing
//!     term with re-measured g and L, and the parametrization correction
//!     D = dss f - L^{-2} duu f of the (slightly non-unit-speed) predictor.
//! The result is reparametrized to arc length once per step. The local error
//! is O(dt^3); exact n-fold circles are fixed points to round-off, which the
//! stiff diagonal alone would not give.

use crate::error::{Error, Result};
use crate::fourier::{bin_frequency, Cx, Series};
use crate::geometry::{remesh_points, ArcLengthCurve};
use crate::spectral::{self, Diagnostics, FlowData};
use crate::theorems::{self, CircleFit};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

const TAU: f64 = 2.0 * PI;

/// Oversampling used for the stepper's own quadratures.
const STEP_DEALIAS: usize = 4;

/// In-step remesh oversampling (interpolation error ~1e-12 for resolved
/// curves; the one-shot constructors use 8).
const STEP_REMESH_FACTOR: usize = 4;

/// A step is rejected when the stepped map's speed dips below this fraction
/// of its mean (local parametrization collapse).
const SPEED_COLLAPSE: f64 = 0.2;

/// A step is rejected when curvature outruns the mesh: more than this many
/// radians of turning per node spacing cannot be represented spectrally.
const RESOLUTION_LIMIT: f64 = 0.9;

/// Double the mesh when turning per node (kappa_max L / N) exceeds this.
/// The remesh unit-speed contract starts failing near 0.37 rad/node, so the
/// trigger sits at half that to stay ahead of rejection.
const REFINE_TRIGGER: f64 = 0.18;

/// Turning per node beyond which a remesh failure is attributed to the mesh
/// rather than the step size. With no refinement headroom left this is the
/// end of the resolvable evolution, and the run stops instead of limping
/// through a dt-halving cascade at frozen curvature.
const MESH_EXHAUSTED: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    /// Area-preserving: g = 0.
    Ap,
    /// Length-preserving: g = I0 / R.
    Lp,
    /// Isoperimetric-ratio flow: g = L^2/2A - R.
    Jp,
}

impl FlowKind {
    pub const ALL: [FlowKind; 3] = [FlowKind::Ap, FlowKind::Lp, FlowKind::Jp];

    pub fn name(self) -> &'static str {
        match self {
            FlowKind::Ap => "ap",
            FlowKind::Lp => "lp",
            FlowKind::Jp => "jp",
        }
    }
}

impl std::fmt::Display for FlowKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Non-local forcing g of the flow, from a diagnostics snapshot.
pub fn nonlocal_forcing(d: &Diagnostics, flow: FlowKind) -> Result<f64> {
    forcing_from(d.length, d.area, d.i0, d.total_curvature, flow)
}

fn forcing_from(length: f64, area: f64, i0: f64, total_curvature: f64, flow: FlowKind) -> Result<f64> {
    match flow {
        FlowKind::Ap => Ok(0.0),
        FlowKind::Lp => Ok(i0 / total_curvature),
        FlowKind::Jp => {
            if area <= 0.0 {
                return Err(Error::NonPositiveArea { area });
            }
            Ok(length * length / (2.0 * area) - total_curvature)
        }
    }
}

/// Max relative change of g under spatial scaling by 0.5 and 2.
pub fn scale_invariance_check(curve: &ArcLengthCurve, flow: FlowKind) -> Result<f64> {
    let g = nonlocal_forcing(&spectral::functionals(curve, flow), flow)?;
    let mut worst = 0.0f64;
    for lambda in [0.5, 2.0] {
        let scaled = curve.scaled(lambda);
        let g_scaled = nonlocal_forcing(&spectral::functionals(&scaled, flow), flow)?;
        worst = worst.max((g_scaled - g).abs() / (1.0 + g.abs()));
    }
    Ok(worst)
}

/// Step-size control and termination thresholds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct StoppingPolicy {
    pub t_max: f64,
    /// Declare blow-up when rejection halving pushes dt below this.
    pub dt_min: f64,
    /// Declare blow-up when W = oint kappa^2 ds exceeds this at a sample.
    pub w_max: f64,
    pub max_steps: u64,
    /// dt_cfl = c_cfl / (1 + kappa_max^2).
    pub c_cfl: f64,
    pub dt_max: f64,
    /// Max growth of dt between accepted steps.
    pub dt_growth: f64,
    /// Ceiling for adaptive node doubling as curvature localizes (0 keeps
    /// the mesh fixed).
    pub n_max: usize,
}

impl Default for StoppingPolicy {
    fn default() -> Self {
        StoppingPolicy {
            t_max: 1.0,
            dt_min: 1e-10,
            w_max: 1e6,
            max_steps: 400_000,
            c_cfl: 0.2,
            dt_max: 0.05,
            dt_growth: 1.5,
            n_max: 8192,
        }
    }
}

impl StoppingPolicy {
    fn validate(&self) -> Result<()> {
        if self.t_max > 0.0
            && self.dt_min > 0.0
            && self.w_max > 0.0
            && self.max_steps > 0
            && self.c_cfl > 0.0
            && self.dt_max > 0.0
            && self.dt_growth > 1.0
        {
            if self.n_max != 0 && (!self.n_max.is_power_of_two() || self.n_max < 64) {
                return Err(Error::InvalidNodeCount { n: self.n_max });
            }
            Ok(())
        } else {
            Err(Error::Format("stopping policy fields must be positive (growth > 1)".into()))
        }
    }
}

/// A curve in mid-evolution.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub curve: ArcLengthCurve,
    pub t: f64,
    pub step_index: u64,
    pub dt_last: f64,
    kappa_max: f64,
}

impl FlowState {
    pub fn new(curve: ArcLengthCurve) -> Self {
        let (_, kappa_max) = spectral::kappa_extremes(&curve);
        FlowState { curve, t: 0.0, step_index: 0, dt_last: 0.0, kappa_max }
    }

    pub fn kappa_max(&self) -> f64 {
        self.kappa_max
    }
}

/// Largest admissible step from this state: explicit-term CFL, growth cap,
/// and the policy ceiling.
pub fn adaptive_dt(state: &FlowState, policy: &StoppingPolicy) -> f64 {
    let mut dt = policy.c_cfl / (1.0 + state.kappa_max * state.kappa_max);
    if state.dt_last > 0.0 {
        dt = dt.min(policy.dt_growth * state.dt_last);
    }
    dt.min(policy.dt_max)
}

/// One IMEX midpoint step of size dt. Errors with `RemeshFailed` when the
/// stepped curve cannot be trusted (parametrization collapse, curvature
/// outrunning the mesh, rotation change); the caller treats that as a step
/// rejection. `NonPositiveArea` (JP only) is a hard abort.
pub fn step(state: &FlowState, flow: FlowKind, dt: f64) -> Result<FlowState> {
    assert!(dt > 0.0, "step size must be positive");
    let curve = &state.curve;
    let n_nodes = curve.node_count();
    let rotation = curve.rotation();
    let n = rotation as f64;
    let l0 = curve.length();
    let series0 = curve.series();

    let fd0 = FlowData::from_series(&series0, STEP_DEALIAS);
    let g0 = forcing_from(fd0.length, fd0.area, fd0.i0, TAU * n, flow)?;
    let c0 = (TAU * n + g0) / l0;

    // Predictor: half step, backward Euler on the diagonal. On the (unit
    // speed) current curve both dss f and nu are exactly diagonal.
    let half = 0.5 * dt;
    let coeffs0 = series0.coeffs();
    let predicted: Vec<Cx> = coeffs0
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let mu = TAU * bin_frequency(i, n_nodes) as f64 / l0;
            c * ((1.0 + half * c0 * mu) / (1.0 + half * mu * mu))
        })
        .collect();
    let star = Series::from_coeffs(predicted);

    // Midpoint quantities, measured on the predictor map (which is no longer
    // unit speed; all formulas below carry the true speed w).
    let fd_star = FlowData::from_series(&star, STEP_DEALIAS);
    let g_star = forcing_from(fd_star.length, fd_star.area, fd_star.i0, TAU * n, flow)?;
    let c0_star = (TAU * n + g_star) / fd_star.length;

    let f_u = star.derivative(1).values();
    let f_uu = star.derivative(2).values();
    let w: Vec<f64> = f_u.iter().map(|v| v.norm()).collect();
    let w_u = Series::from_values(&w.iter().map(|&x| Cx::new(x, 0.0)).collect::<Vec<_>>())
        .derivative(1)
        .values();
    let inv_l0_sq = 1.0 / (l0 * l0);
    let explicit: Vec<Cx> = (0..n_nodes)
        .map(|j| {
            let wj = w[j];
            let correction = (1.0 / (wj * wj) - inv_l0_sq) * f_uu[j]
                - (w_u[j].re / (wj * wj * wj)) * f_u[j];
            let nu = Cx::new(0.0, 1.0) * f_u[j] / wj;
            correction - c0_star * nu
        })
        .collect();
    let explicit_hat = Series::from_values(&explicit);

    // Corrector: Crank-Nicolson on the diagonal plus the midpoint remainder.
    let new_coeffs: Vec<Cx> = coeffs0
        .iter()
        .zip(explicit_hat.coeffs())
        .enumerate()
        .map(|(i, (&c, &h))| {
            let mu = TAU * bin_frequency(i, n_nodes) as f64 / l0;
            let x = half * mu * mu;
            (c * (1.0 - x) + dt * h) / (1.0 + x)
        })
        .collect();
    let stepped = Series::from_coeffs(new_coeffs);

    let speeds: Vec<f64> =
        stepped.derivative(1).values_oversampled(STEP_DEALIAS).iter().map(|v| v.norm()).collect();
    let mean_speed = speeds.iter().sum::<f64>() / speeds.len() as f64;
    let min_speed = speeds.iter().copied().fold(f64::MAX, f64::min);
    if min_speed <= SPEED_COLLAPSE * mean_speed {
        return Err(Error::RemeshFailed {
            t: state.t,
            reason: format!("speed collapsed to {:.3} of mean", min_speed / mean_speed),
        });
    }

    let new_curve = remesh_points(&stepped.values(), STEP_REMESH_FACTOR).map_err(|e| {
        Error::RemeshFailed { t: state.t, reason: e.to_string() }
    })?;
    if new_curve.rotation() != rotation {
        return Err(Error::RemeshFailed {
            t: state.t,
            reason: format!("rotation changed {} -> {}", rotation, new_curve.rotation()),
        });
    }
    let (_, kappa_max) = spectral::kappa_extremes(&new_curve);
    let turning_per_node = kappa_max.abs() * new_curve.length() / n_nodes as f64;
    if turning_per_node > RESOLUTION_LIMIT {
        return Err(Error::RemeshFailed {
            t: state.t,
            reason: format!("{turning_per_node:.2} rad of turning per node exceeds the mesh"),
        });
    }

    Ok(FlowState {
        curve: new_curve,
        t: state.t + dt,
        step_index: state.step_index + 1,
        dt_last: dt,
        kappa_max,
    })
}

/// One recorded snapshot.
#[derive(Debug, Clone, Serialize)]
pub struct Sample {
    pub diagnostics: Diagnostics,
    pub fit: CircleFit,
    /// Step size in effect when the sample was taken (0 for the initial one).
    pub dt: f64,
}

/// Why a trajectory stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    ReachedTmax,
    /// Numerical blow-up: t_num is the last accepted time.
    BlowUpDeclared { t_num: f64, cause: String },
    StepLimit,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub flow: FlowKind,
    pub samples: Vec<Sample>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn initial(&self) -> &Diagnostics {
        &self.samples[0].diagnostics
    }

    pub fn terminal(&self) -> &Diagnostics {
        &self.samples[self.samples.len() - 1].diagnostics
    }

    pub fn t_num(&self) -> Option<f64> {
        match &self.termination {
            Termination::BlowUpDeclared { t_num, .. } => Some(*t_num),
            _ => None,
        }
    }
}

fn take_sample(state: &FlowState, flow: FlowKind, dt: f64) -> Sample {
    let mut diagnostics = spectral::functionals(&state.curve, flow);
    diagnostics.t = state.t;
    let fit = theorems::trajectory_circle_fit(&state.curve);
    Sample { diagnostics, fit, dt }
}

/// Advance until t_max, blow-up, or the step budget runs out, recording a
/// sample every `sample_every` accepted steps (plus the initial and final
/// states). Rejected steps retry with dt halved; halving below
/// `policy.dt_min` declares blow-up with t_num = last accepted time.
pub fn evolve(
    state0: FlowState,
    flow: FlowKind,
    policy: &StoppingPolicy,
    sample_every: u64,
) -> Result<Trajectory> {
    policy.validate()?;
    let sample_every = sample_every.max(1);
    let mut state = state0;
    let first = take_sample(&state, flow, 0.0);
    if first.diagnostics.area <= 0.0 {
        return Err(Error::NonPositiveArea { area: first.diagnostics.area });
    }
    // The forcing must be evaluable at the start for the chosen flow.
    nonlocal_forcing(&first.diagnostics, flow)?;
    let mut samples = vec![first];
    let mut retry_dt: Option<f64> = None;

    let termination = loop {
        if state.t >= policy.t_max * (1.0 - 1e-12) {
            break Termination::ReachedTmax;
        }
        if state.step_index >= policy.max_steps {
            break Termination::StepLimit;
        }
        let dt = retry_dt
            .take()
            .unwrap_or_else(|| adaptive_dt(&state, policy))
            .min(policy.t_max - state.t);
        match step(&state, flow, dt) {
            Ok(next) => {
                state = next;
                if state.step_index % sample_every == 0 {
                    let sample = take_sample(&state, flow, dt);
                    let w = sample.diagnostics.bending;
                    samples.push(sample);
                    if w > policy.w_max {
                        break Termination::BlowUpDeclared {
                            t_num: state.t,
                            cause: format!("curvature energy {w:.3e} exceeded the cap"),
                        };
                    }
                }
                // Localizing curvature exhausts a fixed mesh long before the
                // step control does; double the nodes while the policy allows.
                while policy.n_max > state.curve.node_count()
                    && state.kappa_max * state.curve.length()
                        > REFINE_TRIGGER * state.curve.node_count() as f64
                {
                    state.curve = state.curve.refined(2);
                }
            }
            Err(Error::RemeshFailed { reason, .. }) => {
                // A rejection at saturated resolution is spatial, not temporal:
                // shrinking dt only creeps forward at frozen curvature, so stop
                // here instead of grinding dt down to the floor.
                let nodes = state.curve.node_count();
                let saturated =
                    state.kappa_max * state.curve.length() >= MESH_EXHAUSTED * nodes as f64;
                if saturated && policy.n_max <= nodes {
                    break Termination::BlowUpDeclared {
                        t_num: state.t,
                        cause: format!("mesh exhausted at {nodes} nodes: {reason}"),
                    };
                }
                let halved = 0.5 * dt;
                if halved < policy.dt_min {
                    break Termination::BlowUpDeclared {
                        t_num: state.t,
                        cause: format!("step size collapsed: {reason}"),
                    };
                }
                retry_dt = Some(halved);
            }
            Err(e) => return Err(e),
        }
    };

    if samples.last().map(|s| s.diagnostics.t) != Some(state.t) {
        samples.push(take_sample(&state, flow, state.dt_last));
    }
    Ok(Trajectory { flow, samples, termination })
}

/// Column order of the trajectory CSV.
pub const TRAJECTORY_HEADER: &str = "t,dt,L,A,n,R,W,I_m1,I0,I1,tildeI_m1,J3,J4,g,\
kappa_max,kappa_min,c_x,c_y,r,sigma_over_L,rho_L2,rho_C0";

pub fn write_trajectory_csv(traj: &Trajectory, out: &mut impl Write) -> Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for s in &traj.samples {
        let d = &s.diagnostics;
        let f = &s.fit;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            d.t,
            s.dt,
            d.length,
            d.area,
            d.rotation,
            d.total_curvature,
            d.bending,
            d.i_m1,
            d.i0,
            d.i1,
            d.tilde_i_m1,
            d.j3,
            d.j4,
            d.g,
            d.kappa_max,
            d.kappa_min,
            f.center.re,
            f.center.im,
            f.radius,
            f.sigma_over_l,
            f.rho_l2,
            f.rho_c0,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_test_curve, CurveSpec};
    use crate::oracle;

    fn ellipse(n_nodes: usize) -> ArcLengthCurve {
        make_test_curve(&CurveSpec::Ellipse { a: 2.0, b: 1.0 }, n_nodes).unwrap()
    }

    fn circle(radius: f64, rotation: u32) -> ArcLengthCurve {
        make_test_curve(&CurveSpec::Circle { radius, rotation, center: [0.0, 0.0] }, 256).unwrap()
    }

    #[test]
    fn forcing_vanishes_on_circles() {
        for rotation in 1..=3 {
            let d = spectral::functionals(&circle(0.7, rotation), FlowKind::Ap);
            for flow in FlowKind::ALL {
                let g = nonlocal_forcing(&d, flow).unwrap();
                assert!(g.abs() < 1e-9, "{flow}: g = {g}");
            }
        }
    }

    #[test]
    fn jp_forcing_matches_quadrature_values() {
        let c = ellipse(512);
        let d = spectral::functionals(&c, FlowKind::Jp);
        let od = oracle::oracle_functionals(&c.dense_vertices(8), 1, FlowKind::Jp).unwrap();
        let expected = od.length * od.length / (2.0 * od.area) - od.total_curvature;
        assert!((d.g - expected).abs() < 1e-6 * (1.0 + expected.abs()), "{} vs {expected}", d.g);
        assert!((od.g - expected).abs() < 1e-12);
        assert!(d.g > 1.0, "ellipse is far from round, g = {}", d.g);
    }

    #[test]
    fn forcing_is_scale_invariant() {
        let c = make_test_curve(
            &CurveSpec::RandomBandLimited { rotation: 2, seed: 11, max_mode: 8, amplitude: 0.1 },
            512,
        )
        .unwrap();
        for flow in FlowKind::ALL {
            let residual = scale_invariance_check(&c, flow).unwrap();
            assert!(residual <= 1e-8, "{flow}: residual {residual}");
        }
    }

    #[test]
    fn adaptive_dt_follows_curvature() {
        let policy = StoppingPolicy::default();
        let state = FlowState::new(circle(1.0, 1));
        assert!((adaptive_dt(&state, &policy) - 0.05).abs() < 1e-12); // dt_max caps 0.1

        let relaxed = StoppingPolicy { dt_max: 1.0, ..policy };
        assert!((adaptive_dt(&state, &relaxed) - 0.1).abs() < 1e-12);

        let mut grown = state.clone();
        grown.dt_last = 1e-6;
        let dt = adaptive_dt(&grown, &relaxed);
        assert!((dt - 1.5e-6).abs() < 1e-18, "growth cap, dt = {dt}");
    }

    #[test]
    fn circles_are_fixed_points() {
        for flow in FlowKind::ALL {
            let c = circle(1.0, 2);
            let reference = c.clone();
            let mut state = FlowState::new(c);
            for _ in 0..50 {
                state = step(&state, flow, 0.01).unwrap();
            }
            let drift = state
                .curve
                .points()
                .iter()
                .zip(reference.points())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(drift < 1e-11, "{flow}: drift {drift:e} after 50 steps");
        }
    }

    #[test]
    fn single_step_conservation() {
        let c = ellipse(256);
        let (l0, a0, _) = c.length_area_rotation();
        let state = FlowState::new(c);

        let ap = step(&state, FlowKind::Ap, 1e-4).unwrap();
        let (l1, a1, _) = ap.curve.length_area_rotation();
        assert!((a1 - a0).abs() <= 1e-8 * a0, "AP area drift {:e}", (a1 - a0) / a0);
        assert!(l1 < l0, "AP must shorten: {l1} vs {l0}");

        let lp = step(&state, FlowKind::Lp, 1e-4).unwrap();
        let (l1, a1, _) = lp.curve.length_area_rotation();
        assert!((l1 - l0).abs() <= 1e-8 * l0, "LP length drift {:e}", (l1 - l0) / l0);
        assert!(a1 > a0, "LP must grow area: {a1} vs {a0}");

        let jp = step(&state, FlowKind::Jp, 1e-4).unwrap();
        let (l1, a1, _) = jp.curve.length_area_rotation();
        assert!(l1 * l1 / a1 <= l0 * l0 / a0 + 1e-8, "JP isoperimetric ratio rose");
    }

    #[test]
    fn evolve_records_monotone_time_and_final_state() {
        let policy = StoppingPolicy { t_max: 0.02, dt_max: 5e-4, ..Default::default() };
        let state = FlowState::new(ellipse(256));
        let traj = evolve(state, FlowKind::Ap, &policy, 5).unwrap();
        assert_eq!(traj.termination, Termination::ReachedTmax);
        assert!(traj.samples.len() >= 3);
        for pair in traj.samples.windows(2) {
            assert!(pair[1].diagnostics.t > pair[0].diagnostics.t);
        }
        let last = traj.terminal();
        assert!((last.t - 0.02).abs() < 1e-12);
        // Splitting error in the conserved area is O(dt^2) per unit time.
        let drift = (last.area - traj.initial().area).abs() / traj.initial().area;
        assert!(drift < 1e-7, "area drift {drift:e}");
    }

    #[test]
    fn trajectory_csv_has_the_fixed_columns() {
        let policy = StoppingPolicy { t_max: 5e-3, dt_max: 1e-3, ..Default::default() };
        let traj = evolve(FlowState::new(ellipse(256)), FlowKind::Lp, &policy, 2).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("t,dt,L,A,n,R,W,I_m1,I0,I1,tildeI_m1,J3,J4,g,kappa_max"));
        assert_eq!(header.split(',').count(), 22);
        for line in lines {
            assert_eq!(line.split(',').count(), 22, "row: {line}");
        }
    }
}
