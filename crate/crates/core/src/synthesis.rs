//! Gain synthesis by certified direct search: multi-start coordinate pattern
//! search maximizing the contraction margin, where every point is scored
//! through the full condition check and nothing uncertified is ever
//! returned.

use serde::{Deserialize, Serialize};

use crate::conditions::{check_conditions, ConditionReport};
use crate::controller::GainSet;
use crate::error::{Error, Result};
use crate::par::par_map;
use crate::rng::SplitMix64;

/// Names of the searchable controller parameters, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainParam {
    Kp1,
    Kp2,
    Kv,
    Kp0,
    Kv0,
    KInt,
    Gp1,
    Gp2,
    Gv,
    Gp0,
    Gv0,
    Alpha,
    Beta,
    Eps,
}

impl GainParam {
    pub const ALL: [GainParam; 14] = [
        GainParam::Kp1,
        GainParam::Kp2,
        GainParam::Kv,
        GainParam::Kp0,
        GainParam::Kv0,
        GainParam::KInt,
        GainParam::Gp1,
        GainParam::Gp2,
        GainParam::Gv,
        GainParam::Gp0,
        GainParam::Gv0,
        GainParam::Alpha,
        GainParam::Beta,
        GainParam::Eps,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            GainParam::Kp1 => "kp1",
            GainParam::Kp2 => "kp2",
            GainParam::Kv => "kv",
            GainParam::Kp0 => "kp0",
            GainParam::Kv0 => "kv0",
            GainParam::KInt => "k_int",
            GainParam::Gp1 => "gp1",
            GainParam::Gp2 => "gp2",
            GainParam::Gv => "gv",
            GainParam::Gp0 => "gp0",
            GainParam::Gv0 => "gv0",
            GainParam::Alpha => "alpha",
            GainParam::Beta => "beta",
            GainParam::Eps => "eps",
        }
    }

    fn index(&self) -> usize {
        Self::ALL.iter().position(|p| p == self).expect("param is in ALL")
    }
}

impl std::str::FromStr for GainParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GainParam::ALL
            .iter()
            .find(|p| p.name() == s)
            .copied()
            .ok_or_else(|| Error::UnknownParameter { name: s.into() })
    }
}

pub fn get_param(gains: &GainSet, param: GainParam) -> f64 {
    match param {
        GainParam::Kp1 => gains.kp1,
        GainParam::Kp2 => gains.kp2,
        GainParam::Kv => gains.kv,
        GainParam::Kp0 => gains.kp0,
        GainParam::Kv0 => gains.kv0,
        GainParam::KInt => gains.k_int,
        GainParam::Gp1 => gains.gp1,
        GainParam::Gp2 => gains.gp2,
        GainParam::Gv => gains.gv,
        GainParam::Gp0 => gains.gp0,
        GainParam::Gv0 => gains.gv0,
        GainParam::Alpha => gains.alpha,
        GainParam::Beta => gains.beta,
        GainParam::Eps => gains.eps,
    }
}

pub fn set_param(gains: &mut GainSet, param: GainParam, value: f64) {
    match param {
        GainParam::Kp1 => gains.kp1 = value,
        GainParam::Kp2 => gains.kp2 = value,
        GainParam::Kv => gains.kv = value,
        GainParam::Kp0 => gains.kp0 = value,
        GainParam::Kv0 => gains.kv0 = value,
        GainParam::KInt => gains.k_int = value,
        GainParam::Gp1 => gains.gp1 = value,
        GainParam::Gp2 => gains.gp2 = value,
        GainParam::Gv => gains.gv = value,
        GainParam::Gp0 => gains.gp0 = value,
        GainParam::Gv0 => gains.gv0 = value,
        GainParam::Alpha => gains.alpha = value,
        GainParam::Beta => gains.beta = value,
        GainParam::Eps => gains.eps = value,
    }
}

/// Search configuration: per-parameter boxes, pinned values and the pattern
/// search budget.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpec {
    /// inclusive (lo, hi) box per parameter, indexed like `GainParam::ALL`
    pub boxes: [(f64, f64); 14],
    /// parameters pinned to fixed values, exempt from the boxes
    pub fixed: Vec<(GainParam, f64)>,
    pub n_starts: usize,
    /// pattern search iteration cap per start; zero means evaluate the start
    /// point only
    pub max_iters: usize,
    pub seed: u64,
    /// step contraction factor applied when no coordinate move improves
    pub shrink: f64,
    /// initial step as a fraction of each box width
    pub init_step: f64,
}

impl Default for SearchSpec {
    fn default() -> Self {
        let mut boxes = [(1e-4, 10.0); 14];
        boxes[GainParam::Alpha.index()] = (-2.0, 2.0);
        boxes[GainParam::Beta.index()] = (-2.0, 2.0);
        boxes[GainParam::Eps.index()] = (0.0, 1.0);
        Self {
            boxes,
            fixed: vec![(GainParam::Eps, 1.0)],
            n_starts: 8,
            max_iters: 200,
            seed: 0,
            shrink: 0.5,
            init_step: 0.25,
        }
    }
}

impl SearchSpec {
    pub fn validate(&self) -> Result<()> {
        for (param, &(lo, hi)) in GainParam::ALL.iter().zip(&self.boxes) {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::InvalidConfig {
                    reason: format!("empty or non-finite box for {}", param.name()),
                });
            }
            if self.is_free(*param) {
                match param {
                    GainParam::Kp1 | GainParam::Kp2 | GainParam::Gp1 | GainParam::Gp2
                        if lo <= 0.0 =>
                    {
                        return Err(Error::InvalidConfig {
                            reason: format!("box for {} must be strictly positive", param.name()),
                        });
                    }
                    GainParam::KInt if lo <= 0.0 && hi >= 0.0 => {
                        return Err(Error::InvalidConfig {
                            reason: "box for k_int must exclude zero".into(),
                        });
                    }
                    GainParam::Eps if lo < 0.0 || hi > 1.0 => {
                        return Err(Error::InvalidConfig {
                            reason: "box for eps must lie within [0, 1]".into(),
                        });
                    }
                    _ => {}
                }
            }
        }
        if self.n_starts == 0 {
            return Err(Error::InvalidConfig { reason: "n_starts must be >= 1".into() });
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidConfig { reason: "shrink must lie in (0, 1)".into() });
        }
        if !(self.init_step > 0.0) {
            return Err(Error::InvalidConfig { reason: "init_step must be positive".into() });
        }
        Ok(())
    }

    pub fn fixed_value(&self, param: GainParam) -> Option<f64> {
        self.fixed.iter().find(|(p, _)| *p == param).map(|(_, v)| *v)
    }

    fn is_free(&self, param: GainParam) -> bool {
        self.fixed_value(param).is_none()
    }

    fn free_params(&self) -> Vec<GainParam> {
        GainParam::ALL.iter().copied().filter(|p| self.is_free(*p)).collect()
    }
}

/// Result of a synthesis run; an exhausted budget without a certified point
/// is a reported outcome, not an error.
#[derive(Debug, Clone, PartialEq)]
pub enum SynthesisOutcome {
    Feasible { gains: GainSet, report: ConditionReport, evaluations: usize },
    Infeasible { gains: GainSet, report: ConditionReport, penalty: f64, evaluations: usize },
}

impl SynthesisOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, SynthesisOutcome::Feasible { .. })
    }

    pub fn gains(&self) -> &GainSet {
        match self {
            SynthesisOutcome::Feasible { gains, .. } => gains,
            SynthesisOutcome::Infeasible { gains, .. } => gains,
        }
    }

    pub fn report(&self) -> &ConditionReport {
        match self {
            SynthesisOutcome::Feasible { report, .. } => report,
            SynthesisOutcome::Infeasible { report, .. } => report,
        }
    }

    pub fn evaluations(&self) -> usize {
        match self {
            SynthesisOutcome::Feasible { evaluations, .. } => *evaluations,
            SynthesisOutcome::Infeasible { evaluations, .. } => *evaluations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Score {
    feasible: bool,
    /// contraction margin when feasible, minus the constraint penalty
    /// otherwise
    value: f64,
}

/// Penalty for infeasible points: distance of c^2 from positive plus the
/// overshoot of eps past its admissible ceiling. Guides the search toward
/// feasibility before the margin is maximized.
fn score(report: &ConditionReport, eps: f64) -> Score {
    if report.feasible() {
        Score { feasible: true, value: report.cbar_sq }
    } else {
        let margin_deficit = (-report.c_sq).max(0.0);
        let overshoot = if report.eps_max_allowed.is_finite() {
            (eps - report.eps_max_allowed).max(0.0)
        } else {
            0.0
        };
        Score { feasible: false, value: -(margin_deficit + overshoot) }
    }
}

fn better(a: Score, b: Score) -> bool {
    match (a.feasible, b.feasible) {
        (true, false) => true,
        (false, true) => false,
        _ => a.value > b.value,
    }
}

#[derive(Clone)]
struct Evaluated {
    gains: GainSet,
    report: ConditionReport,
    score: Score,
}

fn evaluate(gains: GainSet) -> Result<Evaluated> {
    let report = check_conditions(&gains)?;
    let score = score(&report, gains.eps);
    Ok(Evaluated { gains, report, score })
}

fn clamp(value: f64, (lo, hi): (f64, f64)) -> f64 {
    value.clamp(lo, hi)
}

fn pattern_search(
    spec: &SearchSpec,
    free: &[GainParam],
    start: GainSet,
    evaluations: &mut usize,
) -> Result<Evaluated> {
    let mut current = evaluate(start)?;
    *evaluations += 1;
    if free.is_empty() {
        return Ok(current);
    }

    let widths: Vec<f64> = free
        .iter()
        .map(|p| {
            let (lo, hi) = spec.boxes[p.index()];
            (hi - lo).max(f64::MIN_POSITIVE)
        })
        .collect();
    let mut steps: Vec<f64> = widths.iter().map(|w| w * spec.init_step).collect();

    for _ in 0..spec.max_iters {
        let converged = steps.iter().zip(&widths).all(|(s, w)| s / w < 1e-4);
        if converged {
            break;
        }
        let mut best_move: Option<Evaluated> = None;
        for (k, &param) in free.iter().enumerate() {
            for direction in [1.0, -1.0] {
                let proposal = clamp(
                    get_param(&current.gains, param) + direction * steps[k],
                    spec.boxes[param.index()],
                );
                if proposal == get_param(&current.gains, param) {
                    continue;
                }
                let mut gains = current.gains;
                set_param(&mut gains, param, proposal);
                let candidate = evaluate(gains)?;
                *evaluations += 1;
                let beats_current = better(candidate.score, current.score);
                let beats_best = best_move
                    .as_ref()
                    .map_or(true, |b| better(candidate.score, b.score));
                if beats_current && beats_best {
                    best_move = Some(candidate);
                }
            }
        }
        match best_move {
            Some(candidate) => current = candidate,
            None => {
                for s in &mut steps {
                    *s *= spec.shrink;
                }
            }
        }
    }
    Ok(current)
}

fn lexicographically_before(a: &GainSet, b: &GainSet) -> bool {
    for param in GainParam::ALL {
        let (x, y) = (get_param(a, param), get_param(b, param));
        match x.total_cmp(&y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => continue,
        }
    }
    false
}

/// Multi-start certified search for the gain set with the largest
/// contraction margin.
///
/// Start points are drawn from the boxes with the seeded generator before
/// any search runs, so the result is a pure function of the spec regardless
/// of how the starts are scheduled. Ties between starts break by
/// lexicographic parameter order.
pub fn synthesize(spec: &SearchSpec) -> Result<SynthesisOutcome> {
    spec.validate()?;
    let free = spec.free_params();

    let mut rng = SplitMix64::new(spec.seed);
    let mut starts = Vec::with_capacity(spec.n_starts);
    for _ in 0..spec.n_starts {
        let mut gains = GainSet::reference();
        for param in GainParam::ALL {
            match spec.fixed_value(param) {
                Some(v) => set_param(&mut gains, param, v),
                None => {
                    let (lo, hi) = spec.boxes[param.index()];
                    set_param(&mut gains, param, rng.next_in(lo, hi));
                }
            }
        }
        starts.push(gains);
    }

    let results = par_map(starts, |start| {
        let mut evaluations = 0usize;
        pattern_search(spec, &free, start, &mut evaluations).map(|e| (e, evaluations))
    });

    let mut best: Option<Evaluated> = None;
    let mut total_evaluations = 0usize;
    for result in results {
        let (candidate, evaluations) = result?;
        total_evaluations += evaluations;
        let replace = match &best {
            None => true,
            Some(incumbent) => {
                better(candidate.score, incumbent.score)
                    || (candidate.score == incumbent.score
                        && lexicographically_before(&candidate.gains, &incumbent.gains))
            }
        };
        if replace {
            best = Some(candidate);
        }
    }

    let best = best.expect("n_starts >= 1 guarantees at least one result");
    if best.score.feasible {
        Ok(SynthesisOutcome::Feasible {
            gains: best.gains,
            report: best.report,
            evaluations: total_evaluations,
        })
    } else {
        Ok(SynthesisOutcome::Infeasible {
            gains: best.gains,
            report: best.report,
            penalty: -best.score.value,
            evaluations: total_evaluations,
        })
    }
}

/// One sample of a one-dimensional margin sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapePoint {
    pub value: f64,
    pub cbar_sq: f64,
    pub feasible: bool,
}

/// Certified margin along a one-parameter grid around a base gain set.
pub fn margin_landscape(
    gains: &GainSet,
    param: GainParam,
    grid: &[f64],
) -> Result<Vec<LandscapePoint>> {
    grid.iter()
        .map(|&value| {
            let mut candidate = *gains;
            set_param(&mut candidate, param, value);
            let report = check_conditions(&candidate)?;
            Ok(LandscapePoint { value, cbar_sq: report.cbar_sq, feasible: report.feasible() })
        })
        .collect()
}
