//! Run configuration: a flat key-value text format with environment-variable
//! overrides, resolved into a validated [`RunConfig`].
//!
//! The file format is one `key = value` pair per line; `#` starts a comment.
//! Every key can be overridden by an environment variable named with the
//! `BELLSIM_` prefix and the upper-cased key (`duration` -> `BELLSIM_DURATION`).
//! The canonical key set round-trips to a flat JSON object via
//! [`kv_to_json`] / [`json_to_kv`].
//!
//! Keys and defaults:
//!
//! | key                  | default            | meaning |
//! |----------------------|--------------------|---------|
//! | `preset`             | -                  | geometry preset (`geneva1997`, `innsbruck1998`, `canary2010`) |
//! | `station_a_x` etc.   | from preset        | explicit geometry fields (override the preset) |
//! | `signal_speed_ratio` | from preset or 1.0 | c over the setting-link speed |
//! | `world_model`        | `retarded-lhv`     | `quantum`, `retarded-lhv`, `ldd-world`, `superdet-world` |
//! | `angles_a`           | `3pi/4, pi/4`      | comma-separated radians |
//! | `angles_b`           | `0, pi/2`          | comma-separated radians |
//! | `n_a`, `n_b`         | 100                | humans per end |
//! | `r_human`            | 10                 | template-passing pulse rate per human, Hz |
//! | `r_coinc`            | 1000               | coincidence rate, Hz |
//! | `raw_pulse_multiplier` | 3                | raw pulses per passing pulse |
//! | `template_count`     | 4                  | template classes |
//! | `human_delay_a/b`    | 0                  | per-human equipment delay, s |
//! | `human_offset_a/b`   | 0                  | distance behind the station, m |
//! | `schedule_period_a/b`| 1e-3 / 1.37e-3     | deterministic toggle period, s (0 = constant) |
//! | `switch_latency`     | 0                  | added to every pulse arrival, s |
//! | `duration`           | 10                 | simulated emission window, s |
//! | `seed`               | required           | master seed; substreams derive from it |

use std::collections::BTreeMap;

use crate::geometry::{self, End, HumanPlacement, LineGeometry};
use crate::models::{parse_world_model, WorldModelSpec};
use crate::sources::RateConfig;

use super::EngineError;

/// Prefix for environment overrides.
pub const ENV_PREFIX: &str = "BELLSIM_";

const KNOWN_KEYS: &[&str] = &[
    "preset",
    "station_a_x",
    "station_b_x",
    "source_x",
    "path_length_a",
    "path_length_b",
    "signal_speed_ratio",
    "world_model",
    "angles_a",
    "angles_b",
    "n_a",
    "n_b",
    "r_human",
    "r_coinc",
    "raw_pulse_multiplier",
    "template_count",
    "human_delay_a",
    "human_delay_b",
    "human_offset_a",
    "human_offset_b",
    "schedule_period_a",
    "schedule_period_b",
    "switch_latency",
    "duration",
    "seed",
];

/// A fully resolved, validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub geometry: LineGeometry,
    pub rates: RateConfig,
    pub world_model_name: String,
    pub world: WorldModelSpec,
    pub angles_a: Vec<f64>,
    pub angles_b: Vec<f64>,
    pub human_delay_a: f64,
    pub human_delay_b: f64,
    pub human_offset_a: f64,
    pub human_offset_b: f64,
    pub schedule_period_a: f64,
    pub schedule_period_b: f64,
    pub switch_latency: f64,
    pub duration: f64,
    pub seed: u64,
}

impl RunConfig {
    /// Resolve a key-value map into a config, applying defaults.
    pub fn from_kv(map: &BTreeMap<String, String>) -> Result<Self, EngineError> {
        for key in map.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(EngineError::Config(format!("unknown config key {key:?}")));
            }
        }

        let get = |key: &str| map.get(key).map(String::as_str);
        let parse_f64 = |key: &str| -> Result<Option<f64>, EngineError> {
            get(key)
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| EngineError::Config(format!("key {key}: bad number {v:?}")))
                })
                .transpose()
        };
        let parse_u32 = |key: &str| -> Result<Option<u32>, EngineError> {
            get(key)
                .map(|v| {
                    v.trim()
                        .parse::<u32>()
                        .map_err(|_| EngineError::Config(format!("key {key}: bad integer {v:?}")))
                })
                .transpose()
        };

        let mut geometry = match get("preset") {
            Some(name) => geometry::preset(name).ok_or_else(|| {
                EngineError::Config(format!(
                    "unknown preset {name:?}; known: {:?}",
                    geometry::PRESET_NAMES
                ))
            })?,
            None => LineGeometry {
                station_a_x: f64::NAN,
                station_b_x: f64::NAN,
                source_x: f64::NAN,
                path_length_a: f64::NAN,
                path_length_b: f64::NAN,
                signal_speed_ratio: 1.0,
            },
        };
        if let Some(v) = parse_f64("station_a_x")? {
            geometry.station_a_x = v;
        }
        if let Some(v) = parse_f64("station_b_x")? {
            geometry.station_b_x = v;
        }
        if let Some(v) = parse_f64("source_x")? {
            geometry.source_x = v;
        }
        if let Some(v) = parse_f64("path_length_a")? {
            geometry.path_length_a = v;
        }
        if let Some(v) = parse_f64("path_length_b")? {
            geometry.path_length_b = v;
        }
        if let Some(v) = parse_f64("signal_speed_ratio")? {
            geometry.signal_speed_ratio = v;
        }
        if !geometry.station_a_x.is_finite() {
            return Err(EngineError::Config(
                "geometry missing: set `preset` or the explicit station/source/path keys".into(),
            ));
        }

        let world_model_name = get("world_model").unwrap_or("retarded-lhv").to_string();
        let world = parse_world_model(&world_model_name)?;

        let parse_angles = |key: &str, default: &[f64]| -> Result<Vec<f64>, EngineError> {
            match get(key) {
                None => Ok(default.to_vec()),
                Some(v) => v
                    .split(',')
                    .map(|s| {
                        s.trim().parse::<f64>().map_err(|_| {
                            EngineError::Config(format!("key {key}: bad angle list {v:?}"))
                        })
                    })
                    .collect(),
            }
        };
        // Optimal CHSH quad: A = (3pi/4, pi/4), B = (0, pi/2).
        let angles_a = parse_angles(
            "angles_a",
            &[3.0 * std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_4],
        )?;
        let angles_b = parse_angles("angles_b", &[0.0, std::f64::consts::FRAC_PI_2])?;

        let rates = RateConfig {
            r_human: parse_f64("r_human")?.unwrap_or(10.0),
            n_a: parse_u32("n_a")?.unwrap_or(100),
            n_b: parse_u32("n_b")?.unwrap_or(100),
            r_coinc: parse_f64("r_coinc")?.unwrap_or(1_000.0),
            raw_pulse_multiplier: parse_f64("raw_pulse_multiplier")?.unwrap_or(3.0),
            template_count: parse_u32("template_count")?.unwrap_or(4),
        };

        let seed = get("seed")
            .ok_or_else(|| {
                EngineError::Config("missing `seed`: runs never draw silent entropy".into())
            })?
            .trim()
            .parse::<u64>()
            .map_err(|_| EngineError::Config("key seed: expected an unsigned integer".into()))?;

        let config = RunConfig {
            geometry,
            rates,
            world_model_name,
            world,
            angles_a,
            angles_b,
            human_delay_a: parse_f64("human_delay_a")?.unwrap_or(0.0),
            human_delay_b: parse_f64("human_delay_b")?.unwrap_or(0.0),
            human_offset_a: parse_f64("human_offset_a")?.unwrap_or(0.0),
            human_offset_b: parse_f64("human_offset_b")?.unwrap_or(0.0),
            schedule_period_a: parse_f64("schedule_period_a")?.unwrap_or(1.0e-3),
            schedule_period_b: parse_f64("schedule_period_b")?.unwrap_or(1.37e-3),
            switch_latency: parse_f64("switch_latency")?.unwrap_or(0.0),
            duration: parse_f64("duration")?.unwrap_or(10.0),
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    /// Canonical key-value echo of the resolved configuration.
    ///
    /// Geometry is always written explicitly, so the echo is
    /// preset-independent and feeds straight back into [`RunConfig::from_kv`].
    pub fn to_kv(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        put("station_a_x", format!("{:?}", self.geometry.station_a_x));
        put("station_b_x", format!("{:?}", self.geometry.station_b_x));
        put("source_x", format!("{:?}", self.geometry.source_x));
        put("path_length_a", format!("{:?}", self.geometry.path_length_a));
        put("path_length_b", format!("{:?}", self.geometry.path_length_b));
        put(
            "signal_speed_ratio",
            format!("{:?}", self.geometry.signal_speed_ratio),
        );
        put("world_model", self.world_model_name.clone());
        let join = |angles: &[f64]| {
            angles
                .iter()
                .map(|a| format!("{a:?}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        put("angles_a", join(&self.angles_a));
        put("angles_b", join(&self.angles_b));
        put("n_a", self.rates.n_a.to_string());
        put("n_b", self.rates.n_b.to_string());
        put("r_human", format!("{:?}", self.rates.r_human));
        put("r_coinc", format!("{:?}", self.rates.r_coinc));
        put(
            "raw_pulse_multiplier",
            format!("{:?}", self.rates.raw_pulse_multiplier),
        );
        put("template_count", self.rates.template_count.to_string());
        put("human_delay_a", format!("{:?}", self.human_delay_a));
        put("human_delay_b", format!("{:?}", self.human_delay_b));
        put("human_offset_a", format!("{:?}", self.human_offset_a));
        put("human_offset_b", format!("{:?}", self.human_offset_b));
        put(
            "schedule_period_a",
            format!("{:?}", self.schedule_period_a),
        );
        put(
            "schedule_period_b",
            format!("{:?}", self.schedule_period_b),
        );
        put("switch_latency", format!("{:?}", self.switch_latency));
        put("duration", format!("{:?}", self.duration));
        put("seed", self.seed.to_string());
        map
    }

    /// Structural validation beyond per-field parsing.
    pub fn validate(&self) -> Result<(), EngineError> {
        self.geometry.validate()?;
        self.rates.validate()?;
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(EngineError::Config("duration must be positive".into()));
        }
        for (name, angles) in [("angles_a", &self.angles_a), ("angles_b", &self.angles_b)] {
            if angles.is_empty() {
                return Err(EngineError::Config(format!("{name} must be non-empty")));
            }
            if angles.iter().any(|a| !a.is_finite()) {
                return Err(EngineError::Config(format!("{name} must be finite")));
            }
        }
        for (name, v) in [
            ("human_delay_a", self.human_delay_a),
            ("human_delay_b", self.human_delay_b),
            ("human_offset_a", self.human_offset_a),
            ("human_offset_b", self.human_offset_b),
            ("schedule_period_a", self.schedule_period_a),
            ("schedule_period_b", self.schedule_period_b),
            ("switch_latency", self.switch_latency),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(EngineError::Config(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        for p in self.placements() {
            p.validate(&self.geometry)?;
        }
        Ok(())
    }

    /// Human placements implied by the counts and per-end offsets/delays.
    /// End A takes ids `0..n_a`, end B takes `n_a..n_a+n_b`.
    pub fn placements(&self) -> Vec<HumanPlacement> {
        let mut v = Vec::with_capacity((self.rates.n_a + self.rates.n_b) as usize);
        for i in 0..self.rates.n_a {
            v.push(HumanPlacement {
                human_id: i,
                end: End::A,
                x: self.geometry.station_a_x - self.human_offset_a,
                fixed_equipment_delay: self.human_delay_a,
            });
        }
        for i in 0..self.rates.n_b {
            v.push(HumanPlacement {
                human_id: self.rates.n_a + i,
                end: End::B,
                x: self.geometry.station_b_x + self.human_offset_b,
                fixed_equipment_delay: self.human_delay_b,
            });
        }
        v
    }

    /// Angle list of one end.
    pub fn angles(&self, end: End) -> &[f64] {
        match end {
            End::A => &self.angles_a,
            End::B => &self.angles_b,
        }
    }
}

/// Parse flat `key = value` text; `#` comments and blank lines are skipped.
pub fn parse_kv_text(text: &str) -> Result<BTreeMap<String, String>, EngineError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            EngineError::Config(format!("line {}: expected `key = value`", lineno + 1))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Render a key-value map back to the flat text format.
pub fn kv_to_text(map: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    for (k, v) in map {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(v);
        out.push('\n');
    }
    out
}

/// Flat JSON object view of a key-value map.
pub fn kv_to_json(map: &BTreeMap<String, String>) -> serde_json::Value {
    serde_json::Value::Object(
        map.iter()
            .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
            .collect(),
    )
}

/// Parse the flat JSON object form back into a key-value map.
pub fn json_to_kv(value: &serde_json::Value) -> Result<BTreeMap<String, String>, EngineError> {
    let obj = value
        .as_object()
        .ok_or_else(|| EngineError::Config("config JSON must be an object".into()))?;
    let mut map = BTreeMap::new();
    for (k, v) in obj {
        let s = match v {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Number(n) => n.to_string(),
            serde_json::Value::Bool(b) => b.to_string(),
            other => {
                return Err(EngineError::Config(format!(
                    "config key {k}: unsupported JSON value {other}"
                )))
            }
        };
        map.insert(k.clone(), s);
    }
    Ok(map)
}

/// Apply `BELLSIM_*` environment overrides to a key-value map.
///
/// `vars` is injected (normally `std::env::vars()`) so resolution stays
/// testable and pure.
pub fn apply_env_overrides(
    map: &mut BTreeMap<String, String>,
    vars: impl Iterator<Item = (String, String)>,
) {
    for (name, value) in vars {
        if let Some(rest) = name.strip_prefix(ENV_PREFIX) {
            let key = rest.to_ascii_lowercase();
            if KNOWN_KEYS.contains(&key.as_str()) {
                map.insert(key, value);
            }
        }
    }
}
