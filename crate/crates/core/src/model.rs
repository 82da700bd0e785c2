//! Platoon data model: vehicles, disturbances, desired configuration and the
//! constant-speed virtual leader, plus seeded scenario sampling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Position/velocity pair of one vehicle (or the leader reference).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// position (m)
    pub q: f64,
    /// velocity (m/s)
    pub v: f64,
}

/// Per-vehicle simulation state: position, velocity and the controller's
/// integral state. The shifted coordinate `xi = zeta + w_bar / k` used by the
/// error estimates is derived from this, not stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentedState {
    /// position (m)
    pub q: f64,
    /// velocity (m/s)
    pub v: f64,
    /// integral state (m/s)
    pub zeta: f64,
}

/// Disturbance acting on one vehicle's acceleration channel:
/// `d(t) = w_bar + amp * sin(freq * t) * exp(-decay * t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSpec {
    /// constant component (m/s^2)
    pub w_bar: f64,
    /// amplitude of the time-varying component (m/s^2), may be negative
    pub amp: f64,
    /// exponential decay rate (1/s), >= 0
    pub decay: f64,
    /// angular frequency (rad/s)
    pub freq: f64,
}

impl DisturbanceSpec {
    /// Disturbance value at time `t`.
    pub fn value(&self, t: f64) -> f64 {
        self.w_bar + self.amp * (self.freq * t).sin() * (-self.decay * t).exp()
    }

    /// `sup_{t>=0} |amp * sin(freq t) * exp(-decay t)|`, the infinity norm of
    /// the time-varying component alone.
    ///
    /// For positive decay the supremum sits on the first arch of the sine and
    /// is located by golden-section search to 1e-9; the degenerate cases are
    /// handled in closed form.
    pub fn sup_time_varying(&self) -> f64 {
        if self.amp == 0.0 || self.freq == 0.0 {
            return 0.0;
        }
        if self.decay == 0.0 {
            return self.amp.abs();
        }
        self.amp.abs() * self.first_arch_peak()
    }

    /// `sup_{t>=0} |w_bar + amp * sin(freq t) * exp(-decay t)|`, the infinity
    /// norm of the full disturbance.
    pub fn sup_total(&self) -> f64 {
        if self.amp == 0.0 || self.freq == 0.0 {
            return self.w_bar.abs();
        }
        if self.decay == 0.0 {
            return self.w_bar.abs() + self.amp.abs();
        }
        let peak = self.first_arch_peak();
        // Successive arches scale by exp(-decay * pi / freq) exactly, so the
        // largest positive and largest negative excursions are on the first
        // two arches, whichever way `amp` points.
        let damp = (-self.decay * std::f64::consts::PI / self.freq.abs()).exp();
        let (up, down) = if self.amp >= 0.0 {
            (self.amp * peak, self.amp * peak * damp)
        } else {
            (-self.amp * peak * damp, -self.amp * peak)
        };
        self.w_bar
            .abs()
            .max((self.w_bar + up).abs())
            .max((self.w_bar - down).abs())
    }

    /// Maximum of `sin(freq t) exp(-decay t)` on the first arch `[0, pi/freq]`.
    fn first_arch_peak(&self) -> f64 {
        let w = self.freq.abs();
        let l = self.decay;
        golden_section_max(|t| (w * t).sin() * (-l * t).exp(), 0.0, std::f64::consts::PI / w)
    }
}

/// Golden-section maximization of a unimodal function on `[a, b]`.
fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    const TOL: f64 = 1e-9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > TOL {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

/// True and nominal vehicle mass; the controller only ever sees the nominal
/// value, the plant integrates with the true one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// true mass used by the plant (kg), > 0
    pub mass_true: f64,
    /// nominal mass used by the controller (kg), > 0
    pub mass_nominal: f64,
}

/// Everything the simulator needs to know about one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleSetup {
    pub params: VehicleParams,
    pub disturbance: DisturbanceSpec,
    pub initial: AugmentedState,
}

/// A fully sampled platoon scenario: desired gaps, leader trajectory and one
/// `VehicleSetup` per vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatoonConfig {
    /// desired inter-vehicle gaps, `spacing[i-1]` is the gap between vehicle
    /// `i` and its predecessor (m), one entry per vehicle
    pub spacing: Vec<f64>,
    /// constant leader speed (m/s)
    pub leader_speed: f64,
    /// leader position at t = 0 (m)
    pub leader_initial_position: f64,
    /// seed the per-vehicle draws were generated from
    pub seed: u64,
    pub per_vehicle: Vec<VehicleSetup>,
}

impl PlatoonConfig {
    pub fn n_vehicles(&self) -> usize {
        self.per_vehicle.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.per_vehicle.is_empty() {
            return Err(Error::InvalidConfig { reason: "platoon needs at least one vehicle".into() });
        }
        if self.spacing.len() != self.per_vehicle.len() {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "{} spacing entries for {} vehicles",
                    self.spacing.len(),
                    self.per_vehicle.len()
                ),
            });
        }
        if self.spacing.iter().any(|g| !g.is_finite() || *g <= 0.0) {
            return Err(Error::InvalidConfig { reason: "spacings must be positive".into() });
        }
        if !self.leader_speed.is_finite() || !self.leader_initial_position.is_finite() {
            return Err(Error::InvalidConfig { reason: "leader state must be finite".into() });
        }
        for (idx, v) in self.per_vehicle.iter().enumerate() {
            let i = idx + 1;
            if !(v.params.mass_true > 0.0) || !(v.params.mass_nominal > 0.0) {
                return Err(Error::InvalidConfig {
                    reason: format!("vehicle {i}: masses must be positive"),
                });
            }
            if v.disturbance.decay < 0.0 {
                return Err(Error::InvalidConfig {
                    reason: format!("vehicle {i}: disturbance decay must be >= 0"),
                });
            }
            let fields = [
                v.params.mass_true,
                v.params.mass_nominal,
                v.disturbance.w_bar,
                v.disturbance.amp,
                v.disturbance.decay,
                v.disturbance.freq,
                v.initial.q,
                v.initial.v,
                v.initial.zeta,
            ];
            if fields.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { context: format!("vehicle {i} setup") });
            }
        }
        Ok(())
    }

    /// Virtual leader state at time `t`: constant-speed motion from the
    /// initial position.
    pub fn leader_state(&self, t: f64) -> VehicleState {
        VehicleState {
            q: self.leader_initial_position + self.leader_speed * t,
            v: self.leader_speed,
        }
    }

    /// Cumulative desired distance from the leader to vehicle `i` (1-based).
    pub fn spacing_to_leader(&self, i: usize) -> Result<f64> {
        if i == 0 || i > self.n_vehicles() {
            return Err(Error::VehicleIndex { index: i, n: self.n_vehicles() });
        }
        Ok(self.spacing[..i].iter().sum())
    }

    /// Desired state of vehicle `i` (1-based) at time `t`: the leader slot
    /// shifted back by the cumulative gap, moving at leader speed.
    pub fn desired_state(&self, i: usize, t: f64) -> Result<VehicleState> {
        let delta = self.spacing_to_leader(i)?;
        let leader = self.leader_state(t);
        Ok(VehicleState { q: leader.q - delta, v: leader.v })
    }
}

/// Scenario template: the deterministic part of a study plus the spreads the
/// seeded draws multiply. `sample_scenario` turns it into a `PlatoonConfig`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioTemplate {
    /// label used for output file naming
    pub name: String,
    pub n_vehicles: usize,
    /// uniform desired inter-vehicle gap (m)
    pub gap: f64,
    pub leader_speed: f64,
    pub leader_initial_position: f64,
    /// default RNG seed for the per-vehicle draws
    pub seed: u64,
    pub nominal_mass: f64,
    /// true mass = nominal + spread * r, r in [-1, 1)
    pub mass_spread: f64,
    /// initial position = desired slot + spread * r
    pub init_position_spread: f64,
    /// initial velocity = leader speed + spread * r
    pub init_velocity_spread: f64,
    /// time-varying disturbance amplitude = spread * r
    pub disturbance_amp_spread: f64,
    /// constant disturbance = base + spread * r
    pub wbar_base: f64,
    pub wbar_spread: f64,
    pub disturbance_freq: f64,
    pub disturbance_decay: f64,
}

impl Default for ScenarioTemplate {
    /// The bundled five-vehicle reference scenario: 10 m gaps behind a
    /// 20 m/s leader, unit initial-condition and disturbance spreads,
    /// constant disturbance in [0, 2] m/s^2 and +-200 kg mass uncertainty
    /// around 1000 kg.
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            n_vehicles: 5,
            gap: 10.0,
            leader_speed: 20.0,
            leader_initial_position: 0.0,
            seed: 1,
            nominal_mass: 1000.0,
            mass_spread: 200.0,
            init_position_spread: 1.0,
            init_velocity_spread: 1.0,
            disturbance_amp_spread: 1.0,
            wbar_base: 1.0,
            wbar_spread: 1.0,
            disturbance_freq: 1.0,
            disturbance_decay: 0.1,
        }
    }
}

impl ScenarioTemplate {
    pub fn validate(&self) -> Result<()> {
        if self.n_vehicles == 0 {
            return Err(Error::InvalidConfig { reason: "n_vehicles must be >= 1".into() });
        }
        if !(self.gap > 0.0) || !self.gap.is_finite() {
            return Err(Error::InvalidConfig { reason: "gap must be positive".into() });
        }
        if !(self.nominal_mass > 0.0) {
            return Err(Error::InvalidConfig { reason: "nominal_mass must be positive".into() });
        }
        if self.mass_spread.abs() >= self.nominal_mass {
            return Err(Error::InvalidConfig {
                reason: "mass_spread must be smaller than nominal_mass".into(),
            });
        }
        if self.disturbance_decay < 0.0 {
            return Err(Error::InvalidConfig { reason: "disturbance_decay must be >= 0".into() });
        }
        let fields = [
            self.gap,
            self.leader_speed,
            self.leader_initial_position,
            self.nominal_mass,
            self.mass_spread,
            self.init_position_spread,
            self.init_velocity_spread,
            self.disturbance_amp_spread,
            self.wbar_base,
            self.wbar_spread,
            self.disturbance_freq,
            self.disturbance_decay,
        ];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { context: "scenario template".into() });
        }
        Ok(())
    }
}

/// Samples a concrete scenario from a template.
///
/// Each vehicle consumes exactly five draws `r` uniform in `[-1, 1)`,
/// in this order: initial position offset, initial velocity offset,
/// disturbance amplitude, constant disturbance, mass. Integral states start
/// at zero. The result is a pure function of `(template, seed)`.
pub fn sample_scenario(template: &ScenarioTemplate, seed: u64) -> Result<PlatoonConfig> {
    template.validate()?;
    let mut rng = SplitMix64::new(seed);
    let mut per_vehicle = Vec::with_capacity(template.n_vehicles);
    for i in 1..=template.n_vehicles {
        let r_pos = rng.next_symmetric();
        let r_vel = rng.next_symmetric();
        let r_amp = rng.next_symmetric();
        let r_wbar = rng.next_symmetric();
        let r_mass = rng.next_symmetric();
        let slot = template.leader_initial_position - template.gap * i as f64;
        per_vehicle.push(VehicleSetup {
            params: VehicleParams {
                mass_true: template.nominal_mass + template.mass_spread * r_mass,
                mass_nominal: template.nominal_mass,
            },
            disturbance: DisturbanceSpec {
                w_bar: template.wbar_base + template.wbar_spread * r_wbar,
                amp: template.disturbance_amp_spread * r_amp,
                decay: template.disturbance_decay,
                freq: template.disturbance_freq,
            },
            initial: AugmentedState {
                q: slot + template.init_position_spread * r_pos,
                v: template.leader_speed + template.init_velocity_spread * r_vel,
                zeta: 0.0,
            },
        });
    }
    let cfg = PlatoonConfig {
        spacing: vec![template.gap; template.n_vehicles],
        leader_speed: template.leader_speed,
        leader_initial_position: template.leader_initial_position,
        seed,
        per_vehicle,
    };
    cfg.validate()?;
    Ok(cfg)
}
