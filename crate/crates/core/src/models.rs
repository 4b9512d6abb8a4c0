//! Outcome-generating world models behind a single sampling contract.
//!
//! Two models are registered:
//!
//! * `"quantum"` — singlet-type statistics with uniform +-1 marginals and
//!   `E[xy] = -cos(a - b)`. Ignores retarded settings entirely.
//! * `"retarded-lhv"` — a local hidden-variable model whose outcome functions
//!   see the local actual setting and the *retarded* value of the distant
//!   setting. A hidden phase `lambda` is drawn uniformly on `[0, 2*pi)` per
//!   pair; each outcome is a half-circle step function with offsets
//!   `theta_l = -(pi/4) * (1 + cos(a - b_r))` and
//!   `theta_r =  (pi/4) * (1 + cos(a_r - b))`. The closed-form correlation is
//!   `-1/2 * (cos(a - b_r) + cos(a_r - b))`, which collapses to the quantum
//!   `-cos(a - b)` exactly when the retarded settings equal the actual ones.
//!
//! The aliases `"ldd-world"` (live agents count as interventions) and
//! `"superdet-world"` (every agent is predictable) select engine-side
//! intervention tagging around the same retarded-LHV physics.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI, TAU};
use thiserror::Error;

/// One measurement setting: a polarization angle plus its index in the
/// configured angle list of its end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    /// Radians in `[0, 2*pi)`.
    pub angle: f64,
    /// Position in the end's configured angle list.
    pub index: u32,
}

impl Setting {
    pub fn new(angle: f64, index: u32) -> Self {
        Setting {
            angle: angle.rem_euclid(TAU),
            index,
        }
    }
}

/// Actual and retarded settings of one coincidence.
///
/// `a_r` is the value of end A's setting as predictable at end B from the
/// last causally connectable state, and symmetrically for `b_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingContext {
    pub a: Setting,
    pub b: Setting,
    pub a_r: Setting,
    pub b_r: Setting,
}

/// Hidden variable of the retarded-LHV model, uniform on `[0, 2*pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HiddenState {
    pub lambda: f64,
}

impl HiddenState {
    /// Draw `lambda` from the flat distribution on `[0, 2*pi)`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        HiddenState {
            lambda: rng.random::<f64>() * TAU,
        }
    }
}

/// The +-1 results at the two ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomePair {
    pub x: i8,
    pub y: i8,
}

/// Sample from the quantum joint distribution
/// `P(x, y) = (1 - x*y*cos(a - b)) / 4`.
///
/// Marginals are unbiased and `E[xy] = -cos(a - b)`; `a_r` and `b_r` are
/// ignored (the quantum model is non-retarded).
pub fn quantum_sample<R: Rng + ?Sized>(ctx: &SettingContext, rng: &mut R) -> OutcomePair {
    let delta = ctx.a.angle - ctx.b.angle;
    let x: i8 = if rng.random::<bool>() { 1 } else { -1 };
    // P(y = -x | x) = (1 + cos delta) / 2.
    let anti = rng.random::<f64>() < 0.5 * (1.0 + delta.cos());
    let y = if anti { -x } else { x };
    OutcomePair { x, y }
}

/// Step-function offsets of the retarded-LHV model.
///
/// `theta_l` lies in `[-pi/2, 0]` and `theta_r` in `[0, pi/2]`, so their gap
/// never exceeds `pi`.
pub fn lhv_thetas(ctx: &SettingContext) -> (f64, f64) {
    let theta_l = -FRAC_PI_4 * (1.0 + (ctx.a.angle - ctx.b_r.angle).cos());
    let theta_r = FRAC_PI_4 * (1.0 + (ctx.a_r.angle - ctx.b.angle).cos());
    let gap = (theta_r - theta_l).abs();
    assert!(gap <= PI + 1e-12, "theta gap {gap} exceeds pi");
    (theta_l, theta_r)
}

#[inline]
fn half_circle(lambda: f64, theta: f64) -> i8 {
    // +1 on [theta, theta + pi) taken modulo 2*pi.
    if (lambda - theta).rem_euclid(TAU) < PI {
        1
    } else {
        -1
    }
}

/// Deterministic outcomes of the retarded-LHV model for a given hidden state.
pub fn lhv_outcomes(ctx: &SettingContext, h: &HiddenState) -> OutcomePair {
    let (theta_l, theta_r) = lhv_thetas(ctx);
    OutcomePair {
        x: half_circle(h.lambda, theta_l),
        y: half_circle(h.lambda, theta_r),
    }
}

/// Closed-form correlation of the retarded-LHV model:
/// `-1/2 * (cos(a - b_r) + cos(a_r - b))`.
///
/// Serves as the analytic oracle for Monte Carlo over [`lhv_outcomes`].
pub fn lhv_correlation(ctx: &SettingContext) -> f64 {
    -0.5 * ((ctx.a.angle - ctx.b_r.angle).cos() + (ctx.a_r.angle - ctx.b.angle).cos())
}

/// Outcome-generating rule of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WorldModel {
    Quantum,
    RetardedLhv,
}

impl WorldModel {
    /// Draw one outcome pair for a coincidence.
    pub fn sample<R: Rng + ?Sized>(&self, ctx: &SettingContext, rng: &mut R) -> OutcomePair {
        match self {
            WorldModel::Quantum => quantum_sample(ctx, rng),
            WorldModel::RetardedLhv => lhv_outcomes(ctx, &HiddenState::sample(rng)),
        }
    }
}

/// How the engine tags pulses when computing retarded settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InterventionTagging {
    /// Template-passing pulses from live agents are interventions.
    TemplatePassing,
    /// Every pulse is predictable (replayed recordings, machine agents, or a
    /// superdeterministic world).
    AllPredictable,
}

/// A named world-model configuration: physics plus intervention tagging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldModelSpec {
    pub model: WorldModel,
    pub tagging: InterventionTagging,
}

/// Registered model names.
pub const WORLD_MODEL_NAMES: [&str; 4] =
    ["quantum", "retarded-lhv", "ldd-world", "superdet-world"];

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown world model {0:?}; known: quantum, retarded-lhv, ldd-world, superdet-world")]
pub struct UnknownWorldModel(pub String);

/// Resolve a model name from a run configuration.
pub fn parse_world_model(name: &str) -> Result<WorldModelSpec, UnknownWorldModel> {
    match name {
        "quantum" => Ok(WorldModelSpec {
            model: WorldModel::Quantum,
            tagging: InterventionTagging::TemplatePassing,
        }),
        "retarded-lhv" | "ldd-world" => Ok(WorldModelSpec {
            model: WorldModel::RetardedLhv,
            tagging: InterventionTagging::TemplatePassing,
        }),
        "superdet-world" => Ok(WorldModelSpec {
            model: WorldModel::RetardedLhv,
            tagging: InterventionTagging::AllPredictable,
        }),
        other => Err(UnknownWorldModel(other.to_string())),
    }
}
