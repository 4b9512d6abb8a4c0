//! Closed-form feasibility planning: the useful-coincidence fraction `alpha`,
//! the run time needed for significant statistics, and significance
//! projections, with presets for three published experiments.
//!
//! `alpha` is the fraction of coincidences carrying an internal intervention
//! at both ends. The linear form `n_a * n_b * r_human^2 * tau_a * tau_b` is
//! the rare-event limit; the exact form under the Poisson pulse model is the
//! product of the per-end probabilities of at least one internal pulse,
//! `(1 - exp(-n_a * r_human * tau_a)) * (1 - exp(-n_b * r_human * tau_b))`.
//! Both are always reported; the linear form is flagged unreliable once
//! `r_end * tau_end` exceeds 0.1.
//!
//! Published feasibility tables round `alpha` to its order of magnitude and
//! derive the human-switched run time from the rounded value, so reports
//! carry that decade-rounded view alongside the precise numbers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    self, average_internal_window, separation_times, LineGeometry, SeparationTimes,
};

/// Inputs of a feasibility calculation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub label: String,
    pub geometry: LineGeometry,
    /// Humans at each end.
    pub n_a: u32,
    pub n_b: u32,
    /// Template-passing pulse rate per human, Hz.
    pub r_human: f64,
    /// Raw coincidence rate, Hz, when known.
    pub r_coinc: Option<f64>,
    /// Effective internal windows after delays, seconds.
    pub tau_a: f64,
    pub tau_b: f64,
    /// Time the raw experiment needs for the baseline significance, seconds.
    pub t_exp_baseline: f64,
    /// Significance (standard deviations) reached after `t_exp_baseline`.
    pub baseline_sigma: f64,
}

/// Errors from planning.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("degenerate plan: alpha is zero, no useful coincidences accrue")]
    DegeneratePlan,
    #[error("unknown sweep parameter {0:?}; known: n_a, n_b, r_human, tau_a, tau_b, t_exp_baseline")]
    UnknownParameter(String),
    #[error("plan invariant violated: tau_{end} = {tau:.3e} s exceeds the geometry separation window {tau_sep:.3e} s")]
    WindowExceedsSeparation { end: char, tau: f64, tau_sep: f64 },
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
}

impl ExperimentPlan {
    /// Validate the plan against its geometry.
    pub fn validate(&self) -> Result<SeparationTimes, PlanError> {
        self.geometry.validate()?;
        let sep = separation_times(&self.geometry, 0.0)?;
        if self.tau_a > sep.tau_a_sep {
            return Err(PlanError::WindowExceedsSeparation {
                end: 'a',
                tau: self.tau_a,
                tau_sep: sep.tau_a_sep,
            });
        }
        if self.tau_b > sep.tau_b_sep {
            return Err(PlanError::WindowExceedsSeparation {
                end: 'b',
                tau: self.tau_b,
                tau_sep: sep.tau_b_sep,
            });
        }
        Ok(sep)
    }

    /// Derive the effective windows from geometry and placements: the plain
    /// average of per-human internal windows at each end.
    pub fn from_geometry(
        label: impl Into<String>,
        geometry: LineGeometry,
        placements: &[geometry::HumanPlacement],
        r_human: f64,
        r_coinc: Option<f64>,
        t_exp_baseline: f64,
        baseline_sigma: f64,
    ) -> Result<Self, PlanError> {
        geometry.validate()?;
        let sep = separation_times(&geometry, 0.0)?;
        let tau_a = average_internal_window(&geometry, placements, &sep, geometry::End::A);
        let tau_b = average_internal_window(&geometry, placements, &sep, geometry::End::B);
        let n_a = placements.iter().filter(|p| p.end == geometry::End::A).count() as u32;
        let n_b = placements.iter().filter(|p| p.end == geometry::End::B).count() as u32;
        Ok(ExperimentPlan {
            label: label.into(),
            geometry,
            n_a,
            n_b,
            r_human,
            r_coinc,
            tau_a,
            tau_b,
            t_exp_baseline,
            baseline_sigma,
        })
    }
}

/// Useful-coincidence fraction: `(alpha_linear, alpha_exact)`.
///
/// The linear form is capped at 1.
pub fn alpha(plan: &ExperimentPlan) -> (f64, f64) {
    let mu_a = plan.n_a as f64 * plan.r_human * plan.tau_a;
    let mu_b = plan.n_b as f64 * plan.r_human * plan.tau_b;
    let linear = (mu_a * mu_b).min(1.0);
    let exact = (1.0 - (-mu_a).exp()) * (1.0 - (-mu_b).exp());
    (linear, exact)
}

/// Whether the rare-event linear form is unreliable for this plan
/// (`r_end * tau_end > 0.1` at either end).
pub fn linear_form_unreliable(plan: &ExperimentPlan) -> bool {
    plan.n_a as f64 * plan.r_human * plan.tau_a > 0.1
        || plan.n_b as f64 * plan.r_human * plan.tau_b > 0.1
}

/// Run times needed for the baseline significance with human switching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanRunTime {
    /// `t_exp_baseline / alpha_linear`, seconds.
    pub linear: f64,
    /// `t_exp_baseline / alpha_exact`, seconds.
    pub exact: f64,
}

/// `t_exp_baseline / alpha`, for both alpha variants.
pub fn t_exp_human(plan: &ExperimentPlan) -> Result<HumanRunTime, PlanError> {
    let (lin, exact) = alpha(plan);
    if lin <= 0.0 || exact <= 0.0 {
        return Err(PlanError::DegeneratePlan);
    }
    Ok(HumanRunTime {
        linear: plan.t_exp_baseline / lin,
        exact: plan.t_exp_baseline / exact,
    })
}

/// Useful coincidence rates `alpha * r_coinc`, when the raw rate is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsefulRate {
    pub linear: f64,
    pub exact: f64,
}

pub fn useful_rate(plan: &ExperimentPlan) -> Option<UsefulRate> {
    let r = plan.r_coinc?;
    let (lin, exact) = alpha(plan);
    Some(UsefulRate {
        linear: lin * r,
        exact: exact * r,
    })
}

/// Round to the nearest power of ten, the way order-of-magnitude tables do.
pub fn order_of_magnitude(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    10f64.powi(x.log10().round() as i32)
}

/// Everything the planner can say about one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub label: String,
    pub d_sep_m: f64,
    /// Station separation in the frame where the measurements are
    /// simultaneous; a derived report only.
    pub d_effective_simultaneous_m: f64,
    pub tau_a_s: f64,
    pub tau_b_s: f64,
    pub alpha_linear: f64,
    pub alpha_exact: f64,
    /// Decade-rounded `alpha_linear`.
    pub alpha_order_of_magnitude: f64,
    pub linear_form_unreliable: bool,
    pub t_exp_baseline_s: f64,
    pub baseline_sigma: f64,
    pub t_exp_human_linear_s: f64,
    pub t_exp_human_exact_s: f64,
    /// `t_exp_baseline / alpha_order_of_magnitude`: the run time the
    /// order-of-magnitude table arithmetic yields.
    pub t_exp_human_order_of_magnitude_s: f64,
    pub useful_rate_linear_hz: Option<f64>,
    pub useful_rate_exact_hz: Option<f64>,
    /// Significance projected at multiples of the human-switched run time:
    /// `(t_seconds, sigma)` rows.
    pub projected_sigma: Vec<(f64, f64)>,
    /// Set when this report is one point of a sweep.
    pub swept: Option<(String, f64)>,
}

/// Build the full report for a plan.
pub fn report(plan: &ExperimentPlan) -> Result<FeasibilityReport, PlanError> {
    plan.validate()?;
    let (alpha_linear, alpha_exact) = alpha(plan);
    let times = t_exp_human(plan)?;
    let alpha_oom = order_of_magnitude(alpha_linear);
    let rate = useful_rate(plan);
    let projected_sigma = [0.125, 0.25, 0.5, 1.0, 2.0]
        .iter()
        .map(|&frac| {
            let t = frac * times.linear;
            (
                t,
                crate::stats::significance_projection(plan.baseline_sigma, times.linear, t),
            )
        })
        .collect();
    Ok(FeasibilityReport {
        label: plan.label.clone(),
        d_sep_m: plan.geometry.d_sep(),
        d_effective_simultaneous_m: plan.geometry.effective_simultaneous_distance(),
        tau_a_s: plan.tau_a,
        tau_b_s: plan.tau_b,
        alpha_linear,
        alpha_exact,
        alpha_order_of_magnitude: alpha_oom,
        linear_form_unreliable: linear_form_unreliable(plan),
        t_exp_baseline_s: plan.t_exp_baseline,
        baseline_sigma: plan.baseline_sigma,
        t_exp_human_linear_s: times.linear,
        t_exp_human_exact_s: times.exact,
        t_exp_human_order_of_magnitude_s: if alpha_oom > 0.0 {
            plan.t_exp_baseline / alpha_oom
        } else {
            f64::INFINITY
        },
        useful_rate_linear_hz: rate.map(|r| r.linear),
        useful_rate_exact_hz: rate.map(|r| r.exact),
        projected_sigma,
        swept: None,
    })
}

/// Sweepable plan parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    NA,
    NB,
    RHuman,
    TauA,
    TauB,
    TExpBaseline,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::NA => "n_a",
            SweepParam::NB => "n_b",
            SweepParam::RHuman => "r_human",
            SweepParam::TauA => "tau_a",
            SweepParam::TauB => "tau_b",
            SweepParam::TExpBaseline => "t_exp_baseline",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = PlanError;

    fn from_str(s: &str) -> Result<Self, PlanError> {
        match s {
            "n_a" => Ok(SweepParam::NA),
            "n_b" => Ok(SweepParam::NB),
            "r_human" => Ok(SweepParam::RHuman),
            "tau_a" => Ok(SweepParam::TauA),
            "tau_b" => Ok(SweepParam::TauB),
            "t_exp_baseline" => Ok(SweepParam::TExpBaseline),
            other => Err(PlanError::UnknownParameter(other.to_string())),
        }
    }
}

/// One report per swept value.
///
/// For `r_human` sweeps the quadratic scaling of `alpha_linear` is asserted
/// across the uncapped points; it is an algebraic identity of the formula.
pub fn sweep(
    plan: &ExperimentPlan,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<FeasibilityReport>, PlanError> {
    let mut reports = Vec::with_capacity(values.len());
    for &v in values {
        let mut p = plan.clone();
        match param {
            SweepParam::NA => p.n_a = v.round().max(0.0) as u32,
            SweepParam::NB => p.n_b = v.round().max(0.0) as u32,
            SweepParam::RHuman => p.r_human = v,
            SweepParam::TauA => p.tau_a = v,
            SweepParam::TauB => p.tau_b = v,
            SweepParam::TExpBaseline => p.t_exp_baseline = v,
        }
        p.label = format!("{} [{}={v}]", plan.label, param.name());
        let mut r = report(&p)?;
        r.swept = Some((param.name().to_string(), v));
        reports.push(r);
    }
    if param == SweepParam::RHuman {
        assert_quadratic_in_r_human(values, &reports);
    }
    Ok(reports)
}

fn assert_quadratic_in_r_human(values: &[f64], reports: &[FeasibilityReport]) {
    let reference = values
        .iter()
        .zip(reports)
        .find(|(&v, r)| v > 0.0 && r.alpha_linear < 1.0);
    let Some((&v0, r0)) = reference else { return };
    for (&v, r) in values.iter().zip(reports) {
        if v <= 0.0 || r.alpha_linear >= 1.0 {
            continue; // capped or degenerate points fall off the parabola
        }
        let expect = r0.alpha_linear * (v / v0).powi(2);
        assert!(
            (r.alpha_linear - expect).abs() <= 1e-9 * expect.max(f64::MIN_POSITIVE),
            "alpha_linear must scale quadratically in r_human"
        );
    }
}

/// Built-in plans for the three reference experiments.
///
/// Windows follow the published effective values: symmetric `d/c` at both
/// ends for Geneva and Innsbruck, and 6 km / 144 km of light travel time for
/// the asymmetric Canary layout.
pub fn preset(name: &str) -> Option<ExperimentPlan> {
    let c = geometry::SPEED_OF_LIGHT;
    match name {
        "geneva1997" => Some(ExperimentPlan {
            label: "geneva1997".into(),
            geometry: geometry::preset("geneva1997").unwrap(),
            n_a: 100,
            n_b: 100,
            r_human: 10.0,
            r_coinc: None,
            tau_a: 10_900.0 / c,
            tau_b: 10_900.0 / c,
            t_exp_baseline: 3_600.0,
            baseline_sigma: 10.0,
        }),
        "innsbruck1998" => Some(ExperimentPlan {
            label: "innsbruck1998".into(),
            geometry: geometry::preset("innsbruck1998").unwrap(),
            n_a: 100,
            n_b: 100,
            r_human: 10.0,
            r_coinc: Some(1_500.0),
            tau_a: 400.0 / c,
            tau_b: 400.0 / c,
            t_exp_baseline: 10.0,
            baseline_sigma: 30.0,
        }),
        "canary2010" => Some(ExperimentPlan {
            label: "canary2010".into(),
            geometry: geometry::preset("canary2010").unwrap(),
            n_a: 100,
            n_b: 100,
            r_human: 10.0,
            r_coinc: None,
            tau_a: 6_000.0 / c,
            tau_b: 144_000.0 / c,
            t_exp_baseline: 600.0,
            baseline_sigma: 16.0,
        }),
        _ => None,
    }
}
