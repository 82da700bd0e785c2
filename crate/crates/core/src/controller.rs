//! Dynamic control law for one vehicle: saturated nonlinear position
//! coupling and linear velocity coupling to both neighbours, linear coupling
//! to the virtual leader, and an integral state that rejects constant
//! disturbances.
//!
//! All functions are pure; the integral state is owned by the simulator's
//! state vector and passed in.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::VehicleState;

/// Controller variant selector.
///
/// `C1` is the static baseline: no integral action (`k * zeta` dropped, the
/// integral dynamics frozen at zero). `C2` is the full dynamic controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    C1,
    C2,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::C1 => write!(f, "c1"),
            Variant::C2 => write!(f, "c2"),
        }
    }
}

/// The full controller parameterization: coupling gains, integral gain, the
/// integral-shaping gains, the transform constants and the symmetry weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSet {
    /// position coupling saturation level (m/s^2), > 0
    pub kp1: f64,
    /// position coupling slope shape (1/m), > 0
    pub kp2: f64,
    /// velocity coupling gain (1/s)
    pub kv: f64,
    /// leader position coupling gain (1/s^2)
    pub kp0: f64,
    /// leader velocity coupling gain (1/s)
    pub kv0: f64,
    /// integral action gain (1/s), nonzero
    pub k_int: f64,
    /// integral position-shaping saturation level, > 0
    pub gp1: f64,
    /// integral position-shaping slope shape, > 0
    pub gp2: f64,
    /// integral velocity-shaping gain
    pub gv: f64,
    /// integral leader-position gain
    pub gp0: f64,
    /// integral leader-velocity gain
    pub gv0: f64,
    /// transform constant mixing position and velocity
    pub alpha: f64,
    /// transform constant mixing velocity and integral state
    pub beta: f64,
    /// symmetry weight on the follower coupling, in [0, 1]
    pub eps: f64,
}

impl GainSet {
    /// Published gain set for the five-vehicle reference case study.
    pub fn reference() -> Self {
        Self {
            kp1: 0.1188,
            kp2: 0.1188,
            kv: 0.0121,
            kp0: 0.6,
            kv0: 0.6,
            k_int: 0.2508,
            gp1: 0.01,
            gp2: 0.01,
            gv: 0.01,
            gp0: 0.2881,
            gv0: 0.3420,
            alpha: 0.3,
            beta: -0.4,
            eps: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.kp1, self.kp2, self.kv, self.kp0, self.kv0, self.k_int, self.gp1, self.gp2,
            self.gv, self.gp0, self.gv0, self.alpha, self.beta, self.eps,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGains { reason: "all gains must be finite".into() });
        }
        if !(self.kp1 > 0.0 && self.kp2 > 0.0 && self.gp1 > 0.0 && self.gp2 > 0.0) {
            return Err(Error::InvalidGains {
                reason: "kp1, kp2, gp1, gp2 must be positive".into(),
            });
        }
        if self.k_int == 0.0 {
            return Err(Error::InvalidGains { reason: "k_int must be nonzero".into() });
        }
        if !(0.0..=1.0).contains(&self.eps) {
            return Err(Error::InvalidGains { reason: "eps must lie in [0, 1]".into() });
        }
        Ok(())
    }

    /// Saturated position coupling `kp1 * tanh(kp2 * x)`.
    pub fn hp(&self, x: f64) -> f64 {
        self.kp1 * (self.kp2 * x).tanh()
    }

    /// Saturated integral position shaping `gp1 * tanh(gp2 * x)`.
    pub fn gp(&self, x: f64) -> f64 {
        self.gp1 * (self.gp2 * x).tanh()
    }

    /// Largest slope of `hp`, attained at zero argument.
    pub fn hp_slope_max(&self) -> f64 {
        self.kp1 * self.kp2
    }

    /// Largest slope of `gp`, attained at zero argument.
    pub fn gp_slope_max(&self) -> f64 {
        self.gp1 * self.gp2
    }
}

/// Desired gaps around one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaps {
    /// desired gap to the predecessor (m)
    pub pred: f64,
    /// desired gap between the follower and this vehicle (m)
    pub foll: f64,
    /// cumulative desired distance to the leader (m)
    pub leader: f64,
}

/// What one vehicle's controller can see: predecessor (the virtual leader for
/// the first vehicle), optional follower (absent for the last vehicle), the
/// leader reference and the desired gaps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborView {
    pub pred: VehicleState,
    pub foll: Option<VehicleState>,
    pub leader: VehicleState,
    pub gaps: Gaps,
}

/// Coupling to the predecessor: saturated position term plus linear velocity
/// term, zero at the desired configuration.
pub fn coupling_pred(gains: &GainSet, own: &VehicleState, view: &NeighborView) -> f64 {
    gains.hp(view.pred.q - own.q - view.gaps.pred) + gains.kv * (view.pred.v - own.v)
}

/// Coupling to the follower; identically zero for the last vehicle.
pub fn coupling_foll(gains: &GainSet, own: &VehicleState, view: &NeighborView) -> f64 {
    match view.foll {
        Some(foll) => gains.hp(foll.q - own.q + view.gaps.foll) + gains.kv * (foll.v - own.v),
        None => 0.0,
    }
}

/// Linear coupling to the virtual leader.
pub fn coupling_leader(gains: &GainSet, own: &VehicleState, view: &NeighborView) -> f64 {
    gains.kp0 * (view.leader.q - own.q - view.gaps.leader) + gains.kv0 * (view.leader.v - own.v)
}

/// Integral state rate: the same coupling structure as the force terms, with
/// the integral-shaping gains.
pub fn integral_rate(gains: &GainSet, own: &VehicleState, view: &NeighborView) -> f64 {
    let g_pred = gains.gp(view.pred.q - own.q - view.gaps.pred) + gains.gv * (view.pred.v - own.v);
    let g_foll = match view.foll {
        Some(foll) => gains.gp(foll.q - own.q + view.gaps.foll) + gains.gv * (foll.v - own.v),
        None => 0.0,
    };
    let g_leader =
        gains.gp0 * (view.leader.q - own.q - view.gaps.leader) + gains.gv0 * (view.leader.v - own.v);
    g_pred + gains.eps * g_foll + g_leader
}

/// Control force (N). The controller multiplies by the nominal mass; the
/// plant divides by the true one. Variant `C1` drops the integral term.
pub fn control_input(
    gains: &GainSet,
    own: &VehicleState,
    view: &NeighborView,
    zeta: f64,
    mass_nominal: f64,
    variant: Variant,
) -> f64 {
    let coupling = coupling_pred(gains, own, view)
        + gains.eps * coupling_foll(gains, own, view)
        + coupling_leader(gains, own, view);
    let integral = match variant {
        Variant::C1 => 0.0,
        Variant::C2 => gains.k_int * zeta,
    };
    mass_nominal * (coupling + integral)
}
