//! The zeta-decreasing deformation flow
//! `∂α/∂τ = −α(Λα) + (Hα)(Dα)`.
//!
//! The right-hand side is the degree-preserving quadratic form `B`, so a
//! trigonometric-polynomial initial factor evolves inside its own
//! finite-mode space and the PDE reduces to a Riccati-type ODE system for
//! the Fourier coefficients. Classical RK4 integrates that system; the
//! conserved normalization `∫α^{−1} = 2π`, the nonincreasing mean, the
//! nonincreasing zeta probes and the bounded compactness snapshot are
//! *monitored*, never re-imposed — their drift is the integrator's error
//! meter, and a persistent violation fails the run.

use crate::dtn::{smoothing_difference, spectrum};
use crate::harmonics::{ConformalFactor, HarmonicsError, TrigPoly};
use crate::zeta::{
    compact_set_snapshot, first_variation_flow_from_parts, zeta_diff_from_spectrum,
    CompactSetSnapshot, ZetaError,
};
use std::f64::consts::PI;
use std::fmt;

/// Tolerance for the per-step monotonicity of the mean and the zeta probes.
pub const MONOTONICITY_TOLERANCE: f64 = 1e-9;

/// Tolerance for componentwise growth of the compactness snapshot.
pub const SNAPSHOT_TOLERANCE: f64 = 1e-7;

/// Maximum number of step halvings before the run collapses.
pub const MAX_HALVINGS: u32 = 20;

#[derive(Debug, Clone, PartialEq)]
pub enum FlowError {
    /// The stepped factor dipped to or below zero; retry with a smaller step.
    PositivityLost { tau: f64 },
    /// Normalization drifted beyond tolerance; the integrator is at fault.
    NormalizationLost { tau: f64, residual: f64 },
    /// Twenty halvings were not enough to restore the monitored invariants.
    StepCollapse { tau: f64, detail: String },
    Zeta(ZetaError),
    Harmonics(HarmonicsError),
}

impl fmt::Display for FlowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowError::PositivityLost { tau } => {
                write!(f, "factor lost positivity at tau = {tau}")
            }
            FlowError::NormalizationLost { tau, residual } => {
                write!(f, "normalization residual {residual:e} at tau = {tau}")
            }
            FlowError::StepCollapse { tau, detail } => {
                write!(f, "step collapsed at tau = {tau}: {detail}")
            }
            FlowError::Zeta(e) => write!(f, "{e}"),
            FlowError::Harmonics(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for FlowError {}

impl From<ZetaError> for FlowError {
    fn from(e: ZetaError) -> Self {
        FlowError::Zeta(e)
    }
}

impl From<HarmonicsError> for FlowError {
    fn from(e: HarmonicsError) -> Self {
        FlowError::Harmonics(e)
    }
}

/// The quadratic form `B(b) = −b(Λb) + (Hb)(Db)`, computed through the
/// analytic-part formula `B(b) = −4 Re(b_+ (Λ conj(b_+)))` and (in debug
/// builds) verified against the direct definition on every call.
///
/// `B` is degree-preserving: modes beyond `deg b` cancel exactly.
pub fn quadratic_form_b(b: &TrigPoly) -> TrigPoly {
    let d = b.degree() as i64;
    // b_+ has modes 0..d with the half-mean at 0; Λ conj(b_+) has modes −d..−1
    let mut result = vec![num_complex::Complex64::new(0.0, 0.0); (2 * d + 1) as usize];
    for k in 0..=d {
        let bk = if k == 0 { b.coeff(0) * 0.5 } else { b.coeff(k) };
        if bk.norm_sqr() == 0.0 {
            continue;
        }
        for m in 1..=d {
            let bm = b.coeff(m).conj() * m as f64;
            if bm.norm_sqr() == 0.0 {
                continue;
            }
            // term of b_+ (Λ conj(b_+)) at mode k − m; −4 Re spreads it onto
            // the pair ±(k − m)
            let term = bk * bm * -2.0;
            result[(k - m + d) as usize] += term;
            result[(m - k + d) as usize] += term.conj();
        }
    }
    let out = TrigPoly::from_two_sided(result);

    #[cfg(debug_assertions)]
    {
        let direct = b
            .multiply(&b.lambda())
            .scale(-1.0)
            .add(&b.hilbert().multiply(&b.derivative_d()));
        let defect = out.sub(&direct).sup_norm(crate::harmonics::default_grid_size(
            2 * b.degree(),
            32,
        ));
        debug_assert!(
            defect < 1e-10 * (1.0 + out.sup_norm(32)),
            "analytic-part form disagrees with the direct definition by {defect:e}"
        );
        // degree preservation: the direct product form has no mass beyond deg b
        for k in (d + 1)..=(2 * d) {
            debug_assert!(direct.coeff(k).norm() < 1e-12, "mode {k} should cancel");
        }
    }

    out
}

/// `⟨b_+, Λ b_+⟩ = 2π Σ_{k≥1} k |b̂_k|²`; the mean-decrease rate of the flow.
pub fn analytic_part_energy(b: &TrigPoly) -> f64 {
    let d = b.degree() as i64;
    2.0 * PI
        * (1..=d)
            .map(|k| k as f64 * b.coeff(k).norm_sqr())
            .sum::<f64>()
}

/// Per-state diagnostics recorded along a trajectory.
#[derive(Debug, Clone)]
pub struct FlowDiagnostics {
    pub mean_integral: f64,
    pub normalization_residual: f64,
    pub snapshot: CompactSetSnapshot,
    /// `(s, ζ_α(s) − 2ζ_R(s))` for each probe.
    pub zeta_probes: Vec<(f64, f64)>,
}

/// A time-stamped state of the flow.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub tau: f64,
    pub factor: ConformalFactor,
    pub diagnostics: FlowDiagnostics,
}

/// Integration options; `Default` matches the CLI defaults.
#[derive(Debug, Clone)]
pub struct FlowOptions {
    pub dt: f64,
    pub tau_max: f64,
    pub convergence_tol: f64,
    /// Real arguments at which `ζ_α(s) − 2ζ_R(s)` is monitored.
    pub zeta_probes: Vec<f64>,
    /// Operator truncation used for the zeta probes.
    pub truncation: usize,
    /// Number of RK4 micro-steps between recorded (fully diagnosed) states.
    pub record_stride: usize,
    /// Number of algebraic invariants in the compactness snapshot.
    pub snapshot_invariants: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            dt: 1e-3,
            tau_max: 100.0,
            convergence_tol: 1e-6,
            zeta_probes: vec![-2.0, 2.0],
            truncation: 64,
            record_stride: 100,
            snapshot_invariants: 2,
        }
    }
}

/// A time-ordered sequence of recorded flow states.
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub states: Vec<FlowState>,
    pub converged: bool,
    /// `‖α_final − 1‖_∞` on the sampling grid.
    pub final_distance: f64,
}

fn diagnostics_for(
    series: &TrigPoly,
    opts: &FlowOptions,
) -> Result<(ConformalFactor, FlowDiagnostics), FlowError> {
    let factor = ConformalFactor::new(series.clone(), 0).map_err(|e| match e {
        HarmonicsError::NonPositiveSample { .. } => FlowError::PositivityLost { tau: f64::NAN },
        HarmonicsError::NotNormalized { residual } => {
            FlowError::NormalizationLost { tau: f64::NAN, residual }
        }
        other => FlowError::Harmonics(other),
    })?;
    let snapshot = compact_set_snapshot(&factor, opts.snapshot_invariants)?;
    let mut zeta_probes = Vec::with_capacity(opts.zeta_probes.len());
    if !opts.zeta_probes.is_empty() {
        let spec = spectrum(&factor, opts.truncation).map_err(ZetaError::from)?;
        for &s in &opts.zeta_probes {
            zeta_probes.push((s, zeta_diff_from_spectrum(&spec, s).diff));
        }
    }
    let diagnostics = FlowDiagnostics {
        mean_integral: factor.series().mean_integral(),
        normalization_residual: factor.normalization_residual(),
        snapshot,
        zeta_probes,
    };
    Ok((factor, diagnostics))
}

/// Builds the initial [`FlowState`] of a factor.
pub fn initial_state(a: &ConformalFactor, opts: &FlowOptions) -> Result<FlowState, FlowError> {
    let (factor, diagnostics) = diagnostics_for(a.series(), opts)?;
    Ok(FlowState { tau: 0.0, factor, diagnostics })
}

/// The flow's right-hand side at a state, truncated to the working degree
/// (a no-op while the degree bound holds, which `B` guarantees).
pub fn flow_rhs(state: &FlowState) -> TrigPoly {
    let degree = state.factor.series().degree();
    quadratic_form_b(state.factor.series()).truncated(degree)
}

/// Step-size ceiling `0.5/‖α‖_{C¹}`.
pub fn dt_max(state: &FlowState) -> f64 {
    0.5 / state.factor.series().c1_norm(state.factor.grid_size())
}

/// One classical RK4 step on the coefficient system.
fn rk4_series(series: &TrigPoly, dt: f64) -> TrigPoly {
    let k1 = quadratic_form_b(series);
    let k2 = quadratic_form_b(&series.add(&k1.scale(dt / 2.0)));
    let k3 = quadratic_form_b(&series.add(&k2.scale(dt / 2.0)));
    let k4 = quadratic_form_b(&series.add(&k3.scale(dt)));
    series.add(
        &k1.add(&k2.scale(2.0)).add(&k3.scale(2.0)).add(&k4).scale(dt / 6.0),
    )
}

/// One RK4 step with positivity and normalization re-validated and the full
/// diagnostics recomputed.
pub fn step_rk4(state: &FlowState, dt: f64, opts: &FlowOptions) -> Result<FlowState, FlowError> {
    assert!(dt > 0.0);
    debug_assert!(dt <= dt_max(state) * (1.0 + 1e-12), "step above the C¹ ceiling");
    let stepped = rk4_series(state.factor.series(), dt);
    let tau = state.tau + dt;
    match diagnostics_for(&stepped, opts) {
        Ok((factor, diagnostics)) => Ok(FlowState { tau, factor, diagnostics }),
        Err(FlowError::PositivityLost { .. }) => Err(FlowError::PositivityLost { tau }),
        Err(FlowError::NormalizationLost { residual, .. }) => {
            Err(FlowError::NormalizationLost { tau, residual })
        }
        Err(other) => Err(other),
    }
}

fn positivity_and_convergence(series: &TrigPoly, grid: usize) -> (f64, f64) {
    let samples = series.sample(grid);
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let dist = samples.iter().map(|&x| (x - 1.0).abs()).fold(0.0, f64::max);
    (min, dist)
}

/// Checks the monitored monotonicity between two recorded states; returns a
/// violation description if any monitor grew beyond its tolerance.
fn monotonicity_violation(prev: &FlowState, next: &FlowState) -> Option<String> {
    let mean_grew = next.diagnostics.mean_integral - prev.diagnostics.mean_integral;
    if mean_grew > MONOTONICITY_TOLERANCE {
        return Some(format!("mean integral grew by {mean_grew:e}"));
    }
    for ((s, before), (_, after)) in prev
        .diagnostics
        .zeta_probes
        .iter()
        .zip(next.diagnostics.zeta_probes.iter())
    {
        if after - before > MONOTONICITY_TOLERANCE {
            return Some(format!("zeta probe at s = {s} grew by {:e}", after - before));
        }
    }
    let snap_grew = next
        .diagnostics
        .snapshot
        .max_increase_from(&prev.diagnostics.snapshot);
    if snap_grew > SNAPSHOT_TOLERANCE {
        return Some(format!("snapshot component grew by {snap_grew:e}"));
    }
    None
}

/// Integrates the flow from `a` until `‖α − 1‖_∞ < convergence_tol`
/// (converged) or `τ ≥ tau_max` (not converged).
///
/// The step is halved — at most [`MAX_HALVINGS`] times — whenever positivity
/// fails mid-segment or a recorded state violates a monotonicity monitor;
/// the violating segment is then re-integrated from its start.
pub fn integrate(a: &ConformalFactor, opts: &FlowOptions) -> Result<FlowTrajectory, FlowError> {
    let mut dt = opts.dt;
    let mut halvings = 0u32;
    let grid = a.grid_size();

    let first = initial_state(a, opts)?;
    let (_, dist) = positivity_and_convergence(first.factor.series(), grid);
    let mut states = vec![first];
    let mut converged = dist < opts.convergence_tol;

    'outer: while !converged {
        let last = states.last().unwrap();
        if last.tau >= opts.tau_max {
            break;
        }
        let dt_ceiling = dt_max(last);
        let step = dt.min(dt_ceiling);

        // advance one recorded segment on raw coefficients
        let mut series = last.factor.series().clone();
        let mut tau = last.tau;
        let mut reached_convergence = false;
        for _ in 0..opts.record_stride {
            if tau >= opts.tau_max {
                break;
            }
            series = rk4_series(&series, step);
            tau += step;
            let (min, dist) = positivity_and_convergence(&series, grid);
            if min <= 0.0 {
                halvings += 1;
                if halvings > MAX_HALVINGS {
                    return Err(FlowError::StepCollapse {
                        tau,
                        detail: "positivity unrecoverable".to_string(),
                    });
                }
                dt = step / 2.0;
                continue 'outer;
            }
            if dist < opts.convergence_tol {
                reached_convergence = true;
                break;
            }
        }

        // full diagnostics at the segment end
        let (factor, diagnostics) = match diagnostics_for(&series, opts) {
            Ok(pair) => pair,
            Err(FlowError::PositivityLost { .. }) | Err(FlowError::NormalizationLost { .. }) => {
                halvings += 1;
                if halvings > MAX_HALVINGS {
                    return Err(FlowError::StepCollapse {
                        tau,
                        detail: "state validation unrecoverable".to_string(),
                    });
                }
                dt = step / 2.0;
                continue;
            }
            Err(other) => return Err(other),
        };
        let candidate = FlowState { tau, factor, diagnostics };

        if let Some(detail) = monotonicity_violation(states.last().unwrap(), &candidate) {
            halvings += 1;
            if halvings > MAX_HALVINGS {
                return Err(FlowError::StepCollapse { tau, detail });
            }
            dt = step / 2.0;
            continue;
        }

        states.push(candidate);
        converged = reached_convergence;
    }

    let final_distance = states.last().unwrap().factor.distance_to_one();
    Ok(FlowTrajectory { states, converged, final_distance })
}

/// Aggregate monitors over a trajectory.
#[derive(Debug, Clone)]
pub struct MonitorReport {
    pub max_normalization_drift: f64,
    pub max_mean_increase: f64,
    pub max_zeta_probe_increase: f64,
    pub max_snapshot_increase: f64,
    /// Largest centered-difference residual of
    /// `d/dτ ∫α + 4⟨α_+, Λα_+⟩ = 0` over interior recorded states.
    pub mean_identity_residual: f64,
}

/// Evaluates every conservation and monotonicity monitor over the recorded
/// states of a trajectory.
pub fn monitor_report(traj: &FlowTrajectory) -> MonitorReport {
    let states = &traj.states;
    assert!(!states.is_empty());

    let mut max_normalization_drift = 0.0f64;
    let mut max_mean_increase = 0.0f64;
    let mut max_zeta_probe_increase = 0.0f64;
    let mut max_snapshot_increase = 0.0f64;
    for state in states {
        max_normalization_drift =
            max_normalization_drift.max(state.diagnostics.normalization_residual);
    }
    for pair in states.windows(2) {
        max_mean_increase = max_mean_increase
            .max(pair[1].diagnostics.mean_integral - pair[0].diagnostics.mean_integral);
        for ((_, before), (_, after)) in pair[0]
            .diagnostics
            .zeta_probes
            .iter()
            .zip(pair[1].diagnostics.zeta_probes.iter())
        {
            max_zeta_probe_increase = max_zeta_probe_increase.max(after - before);
        }
        max_snapshot_increase = max_snapshot_increase.max(
            pair[1]
                .diagnostics
                .snapshot
                .max_increase_from(&pair[0].diagnostics.snapshot),
        );
    }

    let mut mean_identity_residual = 0.0f64;
    for window in states.windows(3) {
        let dt_left = window[1].tau - window[0].tau;
        let dt_right = window[2].tau - window[1].tau;
        if dt_left <= 0.0 || dt_right <= 0.0 || (dt_left - dt_right).abs() > 1e-12 {
            continue;
        }
        let derivative = (window[2].diagnostics.mean_integral
            - window[0].diagnostics.mean_integral)
            / (dt_left + dt_right);
        let energy = analytic_part_energy(window[1].factor.series());
        mean_identity_residual = mean_identity_residual.max((derivative + 4.0 * energy).abs());
    }

    MonitorReport {
        max_normalization_drift,
        max_mean_increase,
        max_zeta_probe_increase,
        max_snapshot_increase,
        mean_identity_residual,
    }
}

/// Derivative of the zeta probe along the flow at a state:
/// `s · Tr[(Λ_α + P_0)^{−s−1}(Λ_α² − D_α²)]`.
pub fn zeta_descent_rate(state: &FlowState, s: f64, n: usize) -> Result<f64, FlowError> {
    let spec = spectrum(&state.factor, n).map_err(ZetaError::from)?;
    let delta = smoothing_difference(&state.factor, n).map_err(ZetaError::from)?;
    Ok(first_variation_flow_from_parts(&spec, &delta, s))
}
