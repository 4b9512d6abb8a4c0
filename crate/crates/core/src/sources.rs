//! Seeded stochastic generators for coincidence detections and per-human
//! intervention pulse streams, plus template filtering and stream replay.
//!
//! All generators are pure functions of (configuration, seed): repeated calls
//! are bit-identical, and each human draws from an independent substream keyed
//! by their id (see [`crate::seed`]), so adding or removing one human never
//! perturbs the others.
//!
//! Pulse streams are homogeneous Poisson processes. Template-passing pulses
//! arrive at `r_human` per human; the remaining raw pulses (they drive the
//! switch but fail every template test) arrive at
//! `r_human * (raw_pulse_multiplier - 1)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use thiserror::Error;

use crate::geometry::{End, HumanPlacement};
use crate::seed;

/// One candidate intervention pulse at a human's worldline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterventionEvent {
    pub human_id: u32,
    pub end: End,
    /// Seconds, at the human's worldline.
    pub t_origin: f64,
    /// Template class this pulse belongs to.
    pub template_id: u32,
    /// Whether the pulse passes its template test.
    pub passes_template: bool,
}

/// Rates and populations of the stochastic sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConfig {
    /// Template-passing pulse rate per human, Hz.
    pub r_human: f64,
    /// Humans at end A.
    pub n_a: u32,
    /// Humans at end B.
    pub n_b: u32,
    /// Coincidence detection rate of the raw Bell experiment, Hz.
    pub r_coinc: f64,
    /// Raw pulses per template-passing pulse, >= 1.
    pub raw_pulse_multiplier: f64,
    /// Number of template classes.
    pub template_count: u32,
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            r_human: 10.0,
            n_a: 100,
            n_b: 100,
            r_coinc: 1_000.0,
            raw_pulse_multiplier: 3.0,
            template_count: 4,
        }
    }
}

impl RateConfig {
    /// Check rate invariants.
    pub fn validate(&self) -> Result<(), SourceError> {
        let ok = self.r_human >= 0.0
            && self.r_human.is_finite()
            && self.r_coinc >= 0.0
            && self.r_coinc.is_finite()
            && self.raw_pulse_multiplier >= 1.0
            && self.raw_pulse_multiplier.is_finite()
            && self.template_count >= 1;
        if ok {
            Ok(())
        } else {
            Err(SourceError::InvalidRates)
        }
    }
}

/// Errors from stream generation and replay.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SourceError {
    #[error("rates must be finite and non-negative, multiplier >= 1, template count >= 1")]
    InvalidRates,
    #[error("replay stream is not sorted by t_origin (index {index})")]
    UnsortedReplay { index: usize },
}

/// Homogeneous Poisson event times on `[0, duration)`, strictly increasing.
fn poisson_times(rate: f64, duration: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if rate <= 0.0 || duration <= 0.0 {
        return Vec::new();
    }
    let exp = Exp::new(rate).expect("positive rate");
    let mut times = Vec::with_capacity((rate * duration * 1.1) as usize + 4);
    let mut t = 0.0_f64;
    loop {
        let gap = exp.sample(rng);
        if gap <= 0.0 {
            continue;
        }
        t += gap;
        if t >= duration {
            break;
        }
        times.push(t);
    }
    times
}

/// Coincidence emission times: a seeded homogeneous Poisson process at
/// `r_coinc` on `[0, duration)`.
pub fn generate_coincidences(r_coinc: f64, duration: f64, seed: u64) -> Vec<f64> {
    let mut rng = seed::substream(seed, seed::DOMAIN_COINCIDENCE, 0);
    poisson_times(r_coinc, duration, &mut rng)
}

/// Intervention pulse streams for all placed humans, merged and time-sorted.
///
/// Each human owns three derived substreams (passing times, raw times,
/// template labels), all keyed by `human_id` under the master seed.
pub fn generate_interventions(
    cfg: &RateConfig,
    placements: &[HumanPlacement],
    duration: f64,
    seed: u64,
) -> Vec<InterventionEvent> {
    let mut events = Vec::new();
    for p in placements {
        let human_key = seed::substream_key(seed, seed::DOMAIN_INTERVENTION, p.human_id as u64);
        let mut passing_rng = seed::rng_from_key(seed::derive(human_key, seed::SUB_PASSING_TIMES));
        let mut raw_rng = seed::rng_from_key(seed::derive(human_key, seed::SUB_RAW_TIMES));
        let mut label_rng =
            seed::rng_from_key(seed::derive(human_key, seed::SUB_TEMPLATE_LABELS));

        for t in poisson_times(cfg.r_human, duration, &mut passing_rng) {
            events.push(InterventionEvent {
                human_id: p.human_id,
                end: p.end,
                t_origin: t,
                template_id: label_rng.random_range(0..cfg.template_count),
                passes_template: true,
            });
        }
        let raw_rate = cfg.r_human * (cfg.raw_pulse_multiplier - 1.0);
        for t in poisson_times(raw_rate, duration, &mut raw_rng) {
            events.push(InterventionEvent {
                human_id: p.human_id,
                end: p.end,
                t_origin: t,
                template_id: label_rng.random_range(0..cfg.template_count),
                passes_template: false,
            });
        }
    }
    events.sort_by(|a, b| {
        a.t_origin
            .total_cmp(&b.t_origin)
            .then(a.human_id.cmp(&b.human_id))
            .then(a.passes_template.cmp(&b.passes_template))
    });
    events
}

/// Keep only the template-passing pulses of one template class, in order.
pub fn apply_template(events: &[InterventionEvent], template_id: u32) -> Vec<InterventionEvent> {
    events
        .iter()
        .copied()
        .filter(|e| e.passes_template && e.template_id == template_id)
        .collect()
}

/// A recorded pulse stream validated for use as a drop-in engine source.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplaySource {
    events: Vec<InterventionEvent>,
}

impl ReplaySource {
    /// The recorded events, verbatim.
    pub fn events(&self) -> &[InterventionEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<InterventionEvent> {
        self.events
    }
}

/// Wrap a recorded stream for replay, rejecting unsorted input.
pub fn replay_stream(recorded: Vec<InterventionEvent>) -> Result<ReplaySource, SourceError> {
    for (i, pair) in recorded.windows(2).enumerate() {
        if pair[1].t_origin < pair[0].t_origin {
            return Err(SourceError::UnsortedReplay { index: i + 1 });
        }
    }
    Ok(ReplaySource { events: recorded })
}

/// Serialize events as JSON Lines, one event per line.
pub fn write_events_jsonl<W: Write>(
    events: &[InterventionEvent],
    mut out: W,
) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Parse a JSON Lines event stream; blank lines are skipped.
pub fn read_events_jsonl<R: BufRead>(input: R) -> std::io::Result<Vec<InterventionEvent>> {
    let mut events = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: InterventionEvent = serde_json::from_str(&line)?;
        events.push(event);
    }
    Ok(events)
}
