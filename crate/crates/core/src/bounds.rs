//! Evaluable right-hand sides of the certified error estimates.
//!
//! All four share the shape `decay * initial errors + saturating * sup of a
//! disturbance norm`, with `exp(-cbar_sq * t)` decay; they differ in which
//! coordinates they bound, whether the transform conditioning `K` appears,
//! and which disturbance norm feeds the saturating term.

use serde::{Deserialize, Serialize};

use crate::conditions::ConditionReport;
use crate::controller::GainSet;
use crate::error::{Error, Result};
use crate::model::PlatoonConfig;

/// Which estimate to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    /// Bound for the integral-free controller on the original states; no
    /// transform conditioning, driven by the full disturbance including its
    /// constant part.
    Baseline,
    /// Bound on the augmented (q, v, xi) error norm; driven by the
    /// time-varying disturbance only.
    Augmented,
    /// Bound on the original (q, v) error norm, carrying the initial
    /// integral-state deviation as a separate decaying term.
    Original,
    /// Comparison bound for a controller without disturbance rejection: like
    /// `Original` but without the integral term and driven by the full
    /// disturbance including its constant part.
    Comparison,
}

impl BoundKind {
    pub const ALL: [BoundKind; 4] =
        [BoundKind::Baseline, BoundKind::Augmented, BoundKind::Original, BoundKind::Comparison];

    pub fn name(&self) -> &'static str {
        match self {
            BoundKind::Baseline => "baseline",
            BoundKind::Augmented => "augmented",
            BoundKind::Original => "original",
            BoundKind::Comparison => "comparison",
        }
    }
}

impl std::str::FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(BoundKind::Baseline),
            "augmented" => Ok(BoundKind::Augmented),
            "original" => Ok(BoundKind::Original),
            "comparison" => Ok(BoundKind::Comparison),
            other => Err(Error::UnknownParameter { name: other.into() }),
        }
    }
}

/// The scenario-level suprema every estimate is built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// certified contraction margin (1/s), must be positive
    pub cbar_sq: f64,
    /// transform conditioning ratio, >= 1
    pub gain_k: f64,
    /// worst initial error of the original states over vehicles,
    /// `sup_i |x_i(0) - x_i*(0)|`
    pub init_err: f64,
    /// worst initial deviation of the shifted integral state,
    /// `sup_i |zeta_i(0) + w_bar_i / k|`
    pub init_integral_err: f64,
    /// worst infinity norm of the time-varying disturbance component
    pub sup_w: f64,
    /// worst infinity norm of the full disturbance including its constant
    /// part
    pub sup_w_total: f64,
}

impl BoundInputs {
    /// Collects the suprema for a concrete scenario from its certificate.
    pub fn from_scenario(
        cfg: &PlatoonConfig,
        gains: &GainSet,
        report: &ConditionReport,
    ) -> Result<Self> {
        cfg.validate()?;
        gains.validate()?;
        let mut init_err = 0.0f64;
        let mut init_integral_err = 0.0f64;
        let mut sup_w = 0.0f64;
        let mut sup_w_total = 0.0f64;
        for (idx, vehicle) in cfg.per_vehicle.iter().enumerate() {
            let desired = cfg.desired_state(idx + 1, 0.0)?;
            let dq = vehicle.initial.q - desired.q;
            let dv = vehicle.initial.v - desired.v;
            init_err = init_err.max(dq.hypot(dv));
            init_integral_err = init_integral_err
                .max((vehicle.initial.zeta + vehicle.disturbance.w_bar / gains.k_int).abs());
            sup_w = sup_w.max(vehicle.disturbance.sup_time_varying());
            sup_w_total = sup_w_total.max(vehicle.disturbance.sup_total());
        }
        Ok(Self {
            cbar_sq: report.cbar_sq,
            gain_k: report.gain_k,
            init_err,
            init_integral_err,
            sup_w,
            sup_w_total,
        })
    }

    /// Worst initial error of the augmented (q, v, xi) state.
    pub fn init_err_augmented(&self) -> f64 {
        (self.init_err * self.init_err + self.init_integral_err * self.init_integral_err).sqrt()
    }
}

/// A bound kind together with its scenario inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DssBound {
    pub kind: BoundKind,
    pub inputs: BoundInputs,
}

impl DssBound {
    pub fn new(kind: BoundKind, inputs: BoundInputs) -> Self {
        Self { kind, inputs }
    }

    /// Evaluates the bound at time `t >= 0`. Fails when the certificate is
    /// invalid (non-positive contraction margin).
    pub fn eval(&self, t: f64) -> Result<f64> {
        let i = &self.inputs;
        if !(i.cbar_sq > 0.0) {
            return Err(Error::CertificateInvalid { cbar_sq: i.cbar_sq });
        }
        let decay = (-i.cbar_sq * t).exp();
        let saturate = (1.0 - decay) / i.cbar_sq;
        let k = i.gain_k;
        let value = match self.kind {
            BoundKind::Baseline => decay * i.init_err + saturate * i.sup_w_total,
            BoundKind::Augmented => {
                // initial error measured in the augmented coordinates, where
                // the shifted integral state absorbs the constant disturbance
                k * decay * i.init_err_augmented() + k * saturate * i.sup_w
            }
            BoundKind::Original => {
                k * decay * i.init_err + k * decay * i.init_integral_err + k * saturate * i.sup_w
            }
            BoundKind::Comparison => k * decay * i.init_err + k * saturate * i.sup_w_total,
        };
        Ok(value)
    }

    /// The supremum of the bound over all `t >= 0`; the curve is monotone in
    /// `t`, so this is the larger of the initial value and the asymptote.
    pub fn sup_over_time(&self) -> Result<f64> {
        let at_zero = self.eval(0.0)?;
        let i = &self.inputs;
        let k = match self.kind {
            BoundKind::Baseline => 1.0,
            _ => i.gain_k,
        };
        let sup_disturbance = match self.kind {
            BoundKind::Baseline | BoundKind::Comparison => i.sup_w_total,
            _ => i.sup_w,
        };
        Ok(at_zero.max(k * sup_disturbance / i.cbar_sq))
    }
}

/// Samples a bound on an ascending time grid.
pub fn bound_curve(bound: &DssBound, t_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    t_grid.iter().map(|&t| Ok((t, bound.eval(t)?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn inputs() -> BoundInputs {
        BoundInputs {
            cbar_sq: 0.0156,
            gain_k: 1.65,
            init_err: 1.2,
            init_integral_err: 5.3,
            sup_w: 0.81,
            sup_w_total: 2.0,
        }
    }

    #[test]
    fn original_bound_at_zero_and_infinity() {
        let b = DssBound::new(BoundKind::Original, inputs());
        let i = inputs();
        assert_relative_eq!(
            b.eval(0.0).unwrap(),
            i.gain_k * (i.init_err + i.init_integral_err),
            epsilon = 1e-12
        );
        let asymptote = i.gain_k * i.sup_w / i.cbar_sq;
        assert_relative_eq!(b.eval(1e9).unwrap(), asymptote, epsilon = 1e-9);
    }

    #[test]
    fn comparison_keeps_a_positive_floor() {
        // the comparison bound saturates at the full-disturbance level even
        // when the time-varying part vanishes; the rejection bound goes to 0
        let mut quiet = inputs();
        quiet.sup_w = 0.0;
        let comparison = DssBound::new(BoundKind::Comparison, quiet);
        let original = DssBound::new(BoundKind::Original, quiet);
        let t = 1e9;
        assert!(comparison.eval(t).unwrap() > 1.0);
        assert!(original.eval(t).unwrap() < 1e-6);
    }

    #[test]
    fn augmented_reduces_to_baseline_for_identity_transform() {
        let mut i = inputs();
        i.gain_k = 1.0;
        i.init_integral_err = 0.0;
        i.sup_w_total = i.sup_w; // feed the baseline with the same norm
        let augmented = DssBound::new(BoundKind::Augmented, i);
        let baseline = DssBound::new(BoundKind::Baseline, i);
        for t in [0.0, 0.5, 3.0, 40.0, 500.0] {
            assert_relative_eq!(
                augmented.eval(t).unwrap(),
                baseline.eval(t).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn bounds_are_continuous_and_nonnegative() {
        for kind in BoundKind::ALL {
            let b = DssBound::new(kind, inputs());
            let mut prev = b.eval(0.0).unwrap();
            let dt = 0.37;
            for step in 1..300 {
                let t = step as f64 * dt;
                let v = b.eval(t).unwrap();
                assert!(v >= 0.0);
                // bounded slope, crude continuity check
                assert!((v - prev).abs() < 10.0 * dt);
                prev = v;
            }
        }
    }

    #[test]
    fn invalid_certificate_is_rejected() {
        let mut i = inputs();
        i.cbar_sq = 0.0;
        let b = DssBound::new(BoundKind::Original, i);
        assert!(matches!(b.eval(1.0), Err(Error::CertificateInvalid { .. })));
        i.cbar_sq = -0.4;
        let b = DssBound::new(BoundKind::Augmented, i);
        assert!(matches!(b.eval(1.0), Err(Error::CertificateInvalid { .. })));
    }

    #[test]
    fn curve_matches_pointwise_eval() {
        let b = DssBound::new(BoundKind::Original, inputs());
        let grid = [0.0, 2.5];
        let curve = bound_curve(&b, &grid).unwrap();
        assert_eq!(curve.len(), 2);
        for (t, v) in curve {
            assert_eq!(v, b.eval(t).unwrap());
        }
    }

    #[test]
    fn quiet_scenario_curve_decays_exponentially() {
        let mut i = inputs();
        i.sup_w = 0.0;
        let b = DssBound::new(BoundKind::Original, i);
        let e0 = i.gain_k * (i.init_err + i.init_integral_err);
        for t in [0.0, 1.0, 10.0, 100.0] {
            assert_relative_eq!(
                b.eval(t).unwrap(),
                e0 * (-i.cbar_sq * t).exp(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn sup_over_time_dominates_samples() {
        for kind in BoundKind::ALL {
            let b = DssBound::new(kind, inputs());
            let sup = b.sup_over_time().unwrap();
            for step in 0..2000 {
                let t = step as f64 * 0.25;
                assert!(b.eval(t).unwrap() <= sup + 1e-9);
            }
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in BoundKind::ALL {
            assert_eq!(kind.name().parse::<BoundKind>().unwrap(), kind);
        }
        assert!("nonsense".parse::<BoundKind>().is_err());
    }
}
