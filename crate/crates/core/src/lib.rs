//! Causal discrete-event simulation, statistics, and feasibility planning for
//! Bell experiments in which the measurement settings are switched by
//! stochastic intervention streams under explicit light-cone constraints.
//!
//! The crate models a two-station Bell experiment on a 1-D line in the earth
//! rest frame. Humans (or machine stand-ins) behind each station emit pulse
//! streams that toggle the station's measurement setting. For every detected
//! pair the engine works out, from exact light-cone bookkeeping, which
//! setting changes could not yet be known at the distant measurement event:
//! those are the *internal* interventions, and the setting value the distant
//! end could still predict is the *retarded* setting.
//!
//! Two world models generate outcomes: standard quantum singlet statistics,
//! and a retarded-settings local-hidden-variable model that reproduces the
//! quantum correlations exactly when retarded and actual settings agree but
//! obeys the CHSH bound on the subensemble where both ends are internal.
//! The statistics layer estimates correlations, CHSH combinations, and
//! violation significances from record logs; the planner turns geometry,
//! populations, and pulse rates into useful-coincidence fractions and run
//! times.
//!
//! Modules map one-to-one onto the subsystems:
//!
//! * [`geometry`] — light cones, separation times, internal windows, presets.
//! * [`sources`] — seeded Poisson pulse/coincidence streams, templates, replay.
//! * [`models`] — quantum and retarded-LHV outcome models.
//! * [`stats`] — correlation/CHSH estimation, shift reports, projections.
//! * [`plan`] — feasibility math and the published-experiment presets.
//! * [`engine`] — the event loop, controls, Turing-style harness, log IO.
//! * [`seed`] — deterministic substream derivation.

pub mod engine;
pub mod geometry;
pub mod models;
pub mod plan;
pub mod seed;
pub mod sources;
pub mod stats;

pub use engine::{
    audit_causality, control_delay_injection, control_replay, run, run_with, turing_bell_test,
    AgentKind, CoincidenceRecord, EngineError, InterventionSource, RunConfig, RunOutput,
    RunSummary, TuringReport, TuringVerdict,
};
pub use geometry::{
    causal_order, internal_window, measurement_events, separation_times, CausalOrder, End,
    GeometryError, HumanPlacement, LineGeometry, SeparationTimes, SpacetimeEvent, SPEED_OF_LIGHT,
};
pub use models::{
    lhv_correlation, lhv_outcomes, lhv_thetas, quantum_sample, HiddenState, OutcomePair, Setting,
    SettingContext, WorldModel, WorldModelSpec,
};
pub use plan::{alpha, sweep, t_exp_human, useful_rate, ExperimentPlan, FeasibilityReport, PlanError};
pub use sources::{
    apply_template, generate_coincidences, generate_interventions, replay_stream,
    InterventionEvent, RateConfig, SourceError,
};
pub use stats::{
    chsh, estimate_correlation, full_ensemble_shift, significance_projection, AngleQuad,
    ChshEstimate, Condition, CorrelationEstimate, ShiftReport, StatsError,
};
