//! Piecewise-constant setting trajectories and their retarded predictions.
//!
//! A [`SettingProcess`] holds one end's angle list, its deterministic
//! schedule (a periodic toggle, or constant), and the time-sorted applied
//! signals. Every applied signal advances the setting cyclically through the
//! angle list. Signals are either *predictable* (schedule toggles, raw
//! non-template pulses, replayed recordings, machine-agent pulses: anything
//! the deterministic no-intervention evolution accounts for) or
//! *interventions* carrying their origin event.
//!
//! The retarded setting at a measurement is the value predicted from the
//! last causally connectable state: the trajectory rebuilt with every
//! intervention whose origin is spacelike from the distant measurement event
//! deleted. Predictable signals are always retained, wherever they fall.

use crate::geometry::{causal_order, CausalOrder, End, SpacetimeEvent};
use crate::models::Setting;

/// How a signal relates to the deterministic evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalKind {
    /// Accounted for by the no-intervention evolution.
    Predictable,
    /// Deviates from it; carries the origin event for light-cone tests.
    Intervention {
        origin: SpacetimeEvent,
        human_id: u32,
        template_id: u32,
    },
}

/// One switch input after all delays: the setting toggles at `effect_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppliedSignal {
    pub effect_t: f64,
    pub kind: SignalKind,
}

/// The setting machinery of one end.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingProcess {
    pub end: End,
    /// Configured measurement angles; the trajectory cycles through these.
    pub angles: Vec<f64>,
    /// Period of the deterministic toggle schedule; 0 means constant.
    pub schedule_period: f64,
    /// All switch inputs, sorted by `effect_t`. Schedule toggles appear here
    /// too, tagged predictable, so the trajectory is a single fold.
    pub signals: Vec<AppliedSignal>,
}

/// Deterministic schedule toggle times for a horizon: `p, 2p, 3p, ...`.
pub fn schedule_toggles(period: f64, horizon: f64) -> Vec<f64> {
    if period <= 0.0 || horizon <= 0.0 {
        return Vec::new();
    }
    let n = (horizon / period).floor() as usize;
    (1..=n).map(|k| k as f64 * period).collect()
}

impl SettingProcess {
    /// Assemble a process from schedule toggles and delayed pulses, sorting
    /// by effect time.
    pub fn build(
        end: End,
        angles: Vec<f64>,
        schedule_period: f64,
        horizon: f64,
        mut pulses: Vec<AppliedSignal>,
    ) -> Self {
        for t in schedule_toggles(schedule_period, horizon) {
            pulses.push(AppliedSignal {
                effect_t: t,
                kind: SignalKind::Predictable,
            });
        }
        pulses.sort_by(|a, b| a.effect_t.total_cmp(&b.effect_t));
        SettingProcess {
            end,
            angles,
            schedule_period,
            signals: pulses,
        }
    }

    fn angle_count(&self) -> u32 {
        self.angles.len() as u32
    }

    /// Signals applied up to and including `t`.
    fn applied_count(&self, t: f64) -> u64 {
        self.signals.partition_point(|s| s.effect_t <= t) as u64
    }

    /// Actual setting index at time `t` (index 0 before any signal).
    pub fn setting_index_at(&self, t: f64) -> u32 {
        (self.applied_count(t) % self.angle_count() as u64) as u32
    }

    /// The retarded prediction of the setting at `t`, as computable at the
    /// other end's measurement event: the trajectory fold skipping every
    /// intervention whose origin the distant measurement cannot see.
    ///
    /// Reference implementation, linear in the signal count; the engine's
    /// incremental cursor must agree with it on every record.
    pub fn predicted_index_at(&self, t: f64, other_meas: SpacetimeEvent) -> u32 {
        let mut count: u64 = 0;
        for s in &self.signals {
            if s.effect_t > t {
                break;
            }
            let predictable = match s.kind {
                SignalKind::Predictable => true,
                SignalKind::Intervention { origin, .. } => {
                    causal_order(origin, other_meas) == CausalOrder::LightlikeOrTimelike
                }
            };
            if predictable {
                count += 1;
            }
        }
        (count % self.angle_count() as u64) as u32
    }

    /// Setting value for an index.
    pub fn setting(&self, index: u32) -> Setting {
        Setting::new(self.angles[index as usize], index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn intervention(effect_t: f64, origin_t: f64, origin_x: f64) -> AppliedSignal {
        AppliedSignal {
            effect_t,
            kind: SignalKind::Intervention {
                origin: SpacetimeEvent {
                    t: origin_t,
                    x: origin_x,
                },
                human_id: 0,
                template_id: 0,
            },
        }
    }

    fn two_angle_process(pulses: Vec<AppliedSignal>, period: f64, horizon: f64) -> SettingProcess {
        SettingProcess::build(
            End::A,
            vec![3.0 * FRAC_PI_4, FRAC_PI_4],
            period,
            horizon,
            pulses,
        )
    }

    #[test]
    fn no_signals_constant_trajectory() {
        let p = two_angle_process(Vec::new(), 0.0, 10.0);
        assert_eq!(p.setting_index_at(0.0), 0);
        assert_eq!(p.setting_index_at(9.9), 0);
    }

    #[test]
    fn zero_interventions_trajectory_equals_schedule() {
        let p = two_angle_process(Vec::new(), 0.5, 10.0);
        for k in 0..40 {
            let t = 0.1 + k as f64 * 0.25;
            let toggles = (t / 0.5).floor() as u64;
            assert_eq!(p.setting_index_at(t), (toggles % 2) as u32, "t = {t}");
        }
    }

    #[test]
    fn toggle_applies_at_effect_time_inclusive() {
        let p = two_angle_process(vec![intervention(1.0, 0.9, 0.0)], 0.0, 10.0);
        assert_eq!(p.setting_index_at(1.0 - 1e-9), 0);
        assert_eq!(p.setting_index_at(1.0), 1);
    }

    #[test]
    fn machine_run_prediction_equals_actual() {
        // Predictable signals only: the prediction is exact at any cut.
        let p = two_angle_process(Vec::new(), 0.3, 10.0);
        let far_meas = SpacetimeEvent { t: 5.0, x: 400.0 };
        for k in 0..30 {
            let t = k as f64 * 0.31;
            assert_eq!(p.predicted_index_at(t, far_meas), p.setting_index_at(t));
        }
    }

    #[test]
    fn internal_intervention_breaks_prediction() {
        // Origin 1e-7 s before a measurement 400 m away: light covers only
        // ~30 m in that time, so the origin is spacelike from the measurement.
        let meas_b = SpacetimeEvent { t: 5.0, x: 400.0 };
        let p = two_angle_process(vec![intervention(5.0, 5.0 - 1e-7, 0.0)], 0.0, 10.0);
        assert_eq!(p.setting_index_at(5.0), 1);
        assert_eq!(p.predicted_index_at(5.0, meas_b), 0);
    }

    #[test]
    fn pre_cut_intervention_stays_predicted() {
        // Origin far in the past of the distant measurement: predictable.
        let meas_b = SpacetimeEvent { t: 5.0, x: 400.0 };
        let p = two_angle_process(vec![intervention(2.0, 1.9, 0.0)], 0.0, 10.0);
        assert_eq!(p.setting_index_at(5.0), 1);
        assert_eq!(p.predicted_index_at(5.0, meas_b), 1);
    }

    #[test]
    fn later_predictable_signal_shifts_with_removed_intervention() {
        // One internal intervention followed by a predictable toggle: the
        // cyclic fold drops the intervention, so the prediction is off by one
        // step even though the later toggle itself is known.
        let meas_b = SpacetimeEvent { t: 5.0, x: 400.0 };
        let mut pulses = vec![intervention(4.999999, 4.999999 - 1e-9, 0.0)];
        pulses.push(AppliedSignal {
            effect_t: 4.9999995,
            kind: SignalKind::Predictable,
        });
        let p = two_angle_process(pulses, 0.0, 10.0);
        assert_eq!(p.setting_index_at(5.0), 0); // two toggles
        assert_eq!(p.predicted_index_at(5.0, meas_b), 1); // only one known
    }

    #[test]
    fn three_angle_cycling() {
        let p = SettingProcess::build(
            End::B,
            vec![0.0, FRAC_PI_4, FRAC_PI_2],
            0.0,
            10.0,
            vec![
                intervention(1.0, 0.9, 500.0),
                intervention(2.0, 1.9, 500.0),
                intervention(3.0, 2.9, 500.0),
                intervention(4.0, 3.9, 500.0),
            ],
        );
        assert_eq!(p.setting_index_at(0.5), 0);
        assert_eq!(p.setting_index_at(1.5), 1);
        assert_eq!(p.setting_index_at(2.5), 2);
        assert_eq!(p.setting_index_at(3.5), 0);
        assert_eq!(p.setting_index_at(4.5), 1);
        let s = p.setting(2);
        assert_eq!(s.index, 2);
        assert!((s.angle - FRAC_PI_2).abs() < 1e-15);
    }
}
