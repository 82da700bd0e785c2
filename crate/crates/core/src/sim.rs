//! Fixed-step simulation of the closed loop: classical RK4 on the stacked
//! `(q, v, zeta)` states of all vehicles, with per-vehicle disturbances and
//! mass mismatch, plus error metrics and bound verification.
//!
//! A single run is sequential in time; independent runs (seed batches,
//! string-length sweeps) fan out over the parallel map.

use serde::{Deserialize, Serialize};

use crate::bounds::{BoundInputs, BoundKind, DssBound};
use crate::conditions::check_conditions;
use crate::controller::{control_input, integral_rate, GainSet, Gaps, NeighborView, Variant};
use crate::error::{Error, Result};
use crate::model::{
    sample_scenario, AugmentedState, DisturbanceSpec, PlatoonConfig, ScenarioTemplate,
    VehicleState,
};
use crate::par::par_map;

/// Divergence guard: any state beyond this magnitude aborts the run.
const DIVERGENCE_LIMIT: f64 = 1e9;

/// How the scalar disturbance enters the acceleration equation.
///
/// `Acceleration` adds `d` to `v_dot` directly. `Force` treats `d` as a force
/// per unit *nominal* mass, so the plant sees `d * m_nominal / m_true`; the
/// two coincide on the nominal plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisturbanceChannel {
    #[serde(rename = "accel")]
    Acceleration,
    Force,
}

/// Integration options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub dt: f64,
    pub t_end: f64,
    pub channel: DisturbanceChannel,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { dt: 0.01, t_end: 100.0, channel: DisturbanceChannel::Acceleration }
    }
}

/// Time series for one vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleSeries {
    pub states: Vec<AugmentedState>,
    /// control force u (N)
    pub control: Vec<f64>,
    /// commanded acceleration u / m_true (m/s^2), excludes the disturbance
    pub accel: Vec<f64>,
    /// disturbance value (m/s^2)
    pub disturbance: Vec<f64>,
}

/// Full platoon run on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub leader: Vec<VehicleState>,
    pub vehicles: Vec<VehicleSeries>,
}

impl Trajectory {
    pub fn n_vehicles(&self) -> usize {
        self.vehicles.len()
    }
}

/// Error metrics computed alongside a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMetrics {
    /// `sup_i |x_i(t) - x_i*(t)|` over the (q, v) states
    pub sup_err: Vec<f64>,
    /// same supremum over the augmented (q, v, xi) states; absent for runs
    /// without integral action, where xi is undefined
    pub sup_err_augmented: Option<Vec<f64>>,
    /// per-vehicle gap error series `e_{i,i-1}(t)`
    pub gap_err: Vec<Vec<f64>>,
    /// gap errors at the final grid point
    pub terminal_gap_err: Vec<f64>,
    /// per-vehicle maximum absolute gap error over the run
    pub peak_gap_err: Vec<f64>,
}

/// Derivative of the stacked closed-loop state, layout `[q, v, zeta] * N`.
///
/// The plant integrates with the true mass while the control force was built
/// with the nominal one; the disturbance enters per `channel`. Variant `C1`
/// freezes the integral states at their current value.
pub fn closed_loop_rhs(
    t: f64,
    state: &[f64],
    cfg: &PlatoonConfig,
    gains: &GainSet,
    variant: Variant,
    channel: DisturbanceChannel,
    out: &mut [f64],
) -> Result<()> {
    let n = cfg.n_vehicles();
    if state.len() != 3 * n || out.len() != 3 * n {
        return Err(Error::Dimension {
            context: format!("state length {} for {} vehicles", state.len(), n),
        });
    }
    for (idx, x) in state.iter().enumerate() {
        if !x.is_finite() || x.abs() > DIVERGENCE_LIMIT {
            return Err(Error::Divergence {
                vehicle: idx / 3 + 1,
                time: t,
                detail: format!("state component {} is {}", idx % 3, x),
            });
        }
    }

    let leader = cfg.leader_state(t);
    for i in 0..n {
        let q = state[3 * i];
        let v = state[3 * i + 1];
        let zeta = state[3 * i + 2];
        let own = VehicleState { q, v };

        let pred = if i == 0 {
            leader
        } else {
            VehicleState { q: state[3 * (i - 1)], v: state[3 * (i - 1) + 1] }
        };
        let foll = if i + 1 < n {
            Some(VehicleState { q: state[3 * (i + 1)], v: state[3 * (i + 1) + 1] })
        } else {
            None
        };
        let view = NeighborView {
            pred,
            foll,
            leader,
            gaps: Gaps {
                pred: cfg.spacing[i],
                foll: if i + 1 < n { cfg.spacing[i + 1] } else { 0.0 },
                leader: cfg.spacing[..=i].iter().sum(),
            },
        };

        let setup = &cfg.per_vehicle[i];
        let u = control_input(gains, &own, &view, zeta, setup.params.mass_nominal, variant);
        let d = setup.disturbance.value(t);
        let disturbance_accel = match channel {
            DisturbanceChannel::Acceleration => d,
            DisturbanceChannel::Force => d * setup.params.mass_nominal / setup.params.mass_true,
        };

        out[3 * i] = v;
        out[3 * i + 1] = u / setup.params.mass_true + disturbance_accel;
        out[3 * i + 2] = match variant {
            Variant::C1 => 0.0,
            Variant::C2 => integral_rate(gains, &own, &view),
        };
    }
    Ok(())
}

/// Classical fixed-step fourth-order integration on the grid
/// `{0, dt, ..., round(t_end/dt) * dt}`. Returns the times and the state at
/// every grid point.
pub fn integrate_rk4<F>(
    mut rhs: F,
    initial: &[f64],
    dt: f64,
    t_end: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidConfig { reason: format!("dt must be positive, got {dt}") });
    }
    if t_end < dt {
        return Err(Error::InvalidConfig {
            reason: format!("t_end {t_end} must be at least one step dt {dt}"),
        });
    }
    let n_steps = (t_end / dt).round() as usize;
    let dim = initial.len();

    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut state = initial.to_vec();
    times.push(0.0);
    states.push(state.clone());

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];

    for step in 0..n_steps {
        let t = step as f64 * dt;
        rhs(t, &state, &mut k1)?;
        for i in 0..dim {
            scratch[i] = state[i] + 0.5 * dt * k1[i];
        }
        rhs(t + 0.5 * dt, &scratch, &mut k2)?;
        for i in 0..dim {
            scratch[i] = state[i] + 0.5 * dt * k2[i];
        }
        rhs(t + 0.5 * dt, &scratch, &mut k3)?;
        for i in 0..dim {
            scratch[i] = state[i] + dt * k3[i];
        }
        rhs(t + dt, &scratch, &mut k4)?;
        for i in 0..dim {
            state[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        times.push((step + 1) as f64 * dt);
        states.push(state.clone());
    }
    Ok((times, states))
}

/// Runs one scenario and computes its error metrics.
pub fn run_scenario(
    cfg: &PlatoonConfig,
    gains: &GainSet,
    variant: Variant,
    opts: &SimOptions,
) -> Result<(Trajectory, ErrorMetrics)> {
    cfg.validate()?;
    gains.validate()?;
    let n = cfg.n_vehicles();

    let mut initial = Vec::with_capacity(3 * n);
    for v in &cfg.per_vehicle {
        initial.extend_from_slice(&[v.initial.q, v.initial.v, v.initial.zeta]);
    }

    let (times, states) = integrate_rk4(
        |t, state, out| closed_loop_rhs(t, state, cfg, gains, variant, opts.channel, out),
        &initial,
        opts.dt,
        opts.t_end,
    )?;

    // reconstruct per-step controls and disturbances from the saved states
    let leader: Vec<VehicleState> = times.iter().map(|&t| cfg.leader_state(t)).collect();
    let mut vehicles: Vec<VehicleSeries> = (0..n)
        .map(|_| VehicleSeries {
            states: Vec::with_capacity(times.len()),
            control: Vec::with_capacity(times.len()),
            accel: Vec::with_capacity(times.len()),
            disturbance: Vec::with_capacity(times.len()),
        })
        .collect();

    for (step, state) in states.iter().enumerate() {
        let t = times[step];
        for i in 0..n {
            let own = AugmentedState {
                q: state[3 * i],
                v: state[3 * i + 1],
                zeta: state[3 * i + 2],
            };
            let pred = if i == 0 {
                leader[step]
            } else {
                VehicleState { q: state[3 * (i - 1)], v: state[3 * (i - 1) + 1] }
            };
            let foll = if i + 1 < n {
                Some(VehicleState { q: state[3 * (i + 1)], v: state[3 * (i + 1) + 1] })
            } else {
                None
            };
            let view = NeighborView {
                pred,
                foll,
                leader: leader[step],
                gaps: Gaps {
                    pred: cfg.spacing[i],
                    foll: if i + 1 < n { cfg.spacing[i + 1] } else { 0.0 },
                    leader: cfg.spacing[..=i].iter().sum(),
                },
            };
            let setup = &cfg.per_vehicle[i];
            let u = control_input(
                gains,
                &VehicleState { q: own.q, v: own.v },
                &view,
                own.zeta,
                setup.params.mass_nominal,
                variant,
            );
            let series = &mut vehicles[i];
            series.states.push(own);
            series.control.push(u);
            series.accel.push(u / setup.params.mass_true);
            series.disturbance.push(setup.disturbance.value(t));
        }
    }

    let trajectory = Trajectory { times, leader, vehicles };
    let metrics = compute_metrics(&trajectory, cfg, gains, variant)?;
    Ok((trajectory, metrics))
}

fn compute_metrics(
    traj: &Trajectory,
    cfg: &PlatoonConfig,
    gains: &GainSet,
    variant: Variant,
) -> Result<ErrorMetrics> {
    let n = cfg.n_vehicles();
    let steps = traj.times.len();
    let mut sup_err = Vec::with_capacity(steps);
    let mut sup_err_augmented =
        if variant == Variant::C2 { Some(Vec::with_capacity(steps)) } else { None };
    let mut gap_err: Vec<Vec<f64>> = vec![Vec::with_capacity(steps); n];

    for step in 0..steps {
        let t = traj.times[step];
        let mut worst_x = 0.0f64;
        let mut worst_z = 0.0f64;
        for i in 0..n {
            let state = traj.vehicles[i].states[step];
            let desired = cfg.desired_state(i + 1, t)?;
            let dq = state.q - desired.q;
            let dv = state.v - desired.v;
            worst_x = worst_x.max(dq.hypot(dv));
            if sup_err_augmented.is_some() {
                let xi = state.zeta + cfg.per_vehicle[i].disturbance.w_bar / gains.k_int;
                worst_z = worst_z.max((dq * dq + dv * dv + xi * xi).sqrt());
            }

            let pred_q = if i == 0 { traj.leader[step].q } else { traj.vehicles[i - 1].states[step].q };
            gap_err[i].push(pred_q - state.q - cfg.spacing[i]);
        }
        sup_err.push(worst_x);
        if let Some(series) = sup_err_augmented.as_mut() {
            series.push(worst_z);
        }
    }

    let terminal_gap_err: Vec<f64> = gap_err.iter().map(|s| *s.last().unwrap()).collect();
    let peak_gap_err: Vec<f64> =
        gap_err.iter().map(|s| s.iter().fold(0.0f64, |acc, e| acc.max(e.abs()))).collect();

    Ok(ErrorMetrics { sup_err, sup_err_augmented, gap_err, terminal_gap_err, peak_gap_err })
}

/// Which measured error series a bound is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorNorm {
    OriginalX,
    AugmentedZ,
}

/// Outcome of comparing a measured error series against a bound curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub holds: bool,
    /// largest `measured - bound` over the grid (negative when dominated)
    pub max_violation: f64,
    /// grid time attaining the extreme
    pub argmax_t: f64,
}

/// Tolerance used by bound checks: comparison slack plus an integration
/// allowance that scales with the fourth-order step error.
pub fn default_bound_tolerance(dt: f64) -> f64 {
    1e-6 + 10.0 * dt.powi(4)
}

/// Pointwise comparison of a measured sup-error series against a bound.
pub fn verify_bound(
    times: &[f64],
    metrics: &ErrorMetrics,
    bound: &DssBound,
    norm: ErrorNorm,
    tol: f64,
) -> Result<BoundCheck> {
    let series = match norm {
        ErrorNorm::OriginalX => &metrics.sup_err,
        ErrorNorm::AugmentedZ => metrics.sup_err_augmented.as_ref().ok_or_else(|| {
            Error::InvalidConfig {
                reason: "augmented error norm is not defined for runs without integral action"
                    .into(),
            }
        })?,
    };
    if times.len() != series.len() {
        return Err(Error::GridMismatch {
            context: format!("{} times vs {} samples", times.len(), series.len()),
        });
    }
    let mut max_violation = f64::NEG_INFINITY;
    let mut argmax_t = 0.0;
    for (&t, &measured) in times.iter().zip(series) {
        let violation = measured - bound.eval(t)?;
        if violation > max_violation {
            max_violation = violation;
            argmax_t = t;
        }
    }
    Ok(BoundCheck { holds: max_violation <= tol, max_violation, argmax_t })
}

/// One row of a string-length sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub worst_sup_err: f64,
    pub bound_envelope: f64,
}

/// Deterministic worst-case scenario at the template's envelope: every
/// vehicle sits at the full initial-condition spread and carries the full
/// disturbance amplitude and constant disturbance, signs alternating along
/// the string, masses nominal. Every string length built this way shares the
/// same disturbance norms and the same worst initial error, which is what a
/// string-length comparison needs.
pub fn envelope_scenario(template: &ScenarioTemplate, n: usize) -> Result<PlatoonConfig> {
    let mut t = template.clone();
    t.n_vehicles = n;
    t.mass_spread = 0.0;
    // sample to get the right shape, then overwrite the draws
    let mut cfg = sample_scenario(&t, t.seed)?;
    for (idx, vehicle) in cfg.per_vehicle.iter_mut().enumerate() {
        let sign = if idx % 2 == 0 { 1.0 } else { -1.0 };
        let slot = template.leader_initial_position - template.gap * (idx + 1) as f64;
        vehicle.initial.q = slot + sign * template.init_position_spread;
        vehicle.initial.v = template.leader_speed - sign * template.init_velocity_spread;
        vehicle.initial.zeta = 0.0;
        vehicle.disturbance.amp = sign * template.disturbance_amp_spread;
        vehicle.disturbance.w_bar = template.wbar_base + template.wbar_spread;
        vehicle.params.mass_true = template.nominal_mass;
    }
    Ok(cfg)
}

/// The scenario-independent bound envelope for a template: the supremum over
/// time of the original-states bound fed with the template's worst-case
/// initial errors and disturbance norms.
pub fn sweep_envelope(template: &ScenarioTemplate, gains: &GainSet) -> Result<f64> {
    let report = check_conditions(gains)?;
    if !report.feasible() || report.cbar_sq <= 0.0 {
        return Err(Error::CertificateInvalid { cbar_sq: report.cbar_sq });
    }
    let worst_spec = DisturbanceSpec {
        w_bar: template.wbar_base + template.wbar_spread.abs(),
        amp: template.disturbance_amp_spread.abs(),
        decay: template.disturbance_decay,
        freq: template.disturbance_freq,
    };
    let inputs = BoundInputs {
        cbar_sq: report.cbar_sq,
        gain_k: report.gain_k,
        init_err: template.init_position_spread.hypot(template.init_velocity_spread),
        init_integral_err: (template.wbar_base.abs() + template.wbar_spread.abs())
            / gains.k_int.abs(),
        sup_w: worst_spec.sup_time_varying(),
        sup_w_total: worst_spec.sup_total(),
    };
    DssBound::new(BoundKind::Original, inputs).sup_over_time()
}

/// Runs the envelope scenario at every requested string length and reports
/// the worst error norm per length next to the shared bound envelope.
/// Lengths run concurrently.
pub fn string_sweep(
    template: &ScenarioTemplate,
    gains: &GainSet,
    variant: Variant,
    n_list: &[usize],
    opts: &SimOptions,
) -> Result<Vec<SweepRow>> {
    let envelope = sweep_envelope(template, gains)?;
    let jobs: Vec<usize> = n_list.to_vec();
    let results = par_map(jobs, |n| -> Result<SweepRow> {
        let cfg = envelope_scenario(template, n)?;
        let (_, metrics) = run_scenario(&cfg, gains, variant, opts)?;
        let worst = metrics.sup_err.iter().fold(0.0f64, |acc, e| acc.max(*e));
        Ok(SweepRow { n, worst_sup_err: worst, bound_envelope: envelope })
    });
    results.into_iter().collect()
}

/// One seeded scenario result.
#[derive(Debug, Clone)]
pub struct SeededRun {
    pub seed: u64,
    pub trajectory: Trajectory,
    pub metrics: ErrorMetrics,
}

/// Samples and runs one scenario per seed, concurrently.
pub fn run_seeded_batch(
    template: &ScenarioTemplate,
    gains: &GainSet,
    variant: Variant,
    seeds: &[u64],
    opts: &SimOptions,
) -> Result<Vec<SeededRun>> {
    let jobs: Vec<u64> = seeds.to_vec();
    let results = par_map(jobs, |seed| -> Result<SeededRun> {
        let cfg = sample_scenario(template, seed)?;
        let (trajectory, metrics) = run_scenario(&cfg, gains, variant, opts)?;
        Ok(SeededRun { seed, trajectory, metrics })
    });
    results.into_iter().collect()
}
