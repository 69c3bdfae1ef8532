//! Scenario definition.
//!
//! [`ScenarioConfig`] serializes to a canonical form in which every field is
//! explicit. The loader also accepts the short forms (`"aps": 50`,
//! `"handhelds": 12`, a single strategy name for all handhelds) and fills
//! anything missing with defaults.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auction::Money;
use crate::strategy::{StrategyConfig, StrategyKind};
use crate::topology::{Arena, Point, TeamId};

pub const DEFAULT_ACCESS_POINTS: usize = 50;
pub const DEFAULT_HANDHELDS: usize = 12;
pub const DEFAULT_TIMEOUT: u32 = 20;

/// A scenario field that failed validation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

/// Access points by count (placed uniformly from the seed) or by position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ApLayout {
    Count(usize),
    Positions(Vec<Point>),
}

impl ApLayout {
    pub fn count(&self) -> usize {
        match self {
            ApLayout::Count(n) => *n,
            ApLayout::Positions(p) => p.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HandheldConfig {
    pub count: usize,
    /// Meters per tick.
    pub speed: f64,
    /// One strategy per handheld.
    pub strategy: Vec<StrategyKind>,
    /// One optional team per handheld.
    pub team: Vec<Option<TeamId>>,
    /// Starting positions; drawn from the seed when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<Point>>,
}

impl HandheldConfig {
    pub fn uniform(count: usize, speed: f64, strategy: StrategyKind) -> Self {
        Self { count, speed, strategy: vec![strategy; count], team: vec![None; count], positions: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", try_from = "RawScenario")]
pub struct ScenarioConfig {
    pub arena: Arena,
    pub radio_radius: f64,
    pub aps: ApLayout,
    pub handhelds: HandheldConfig,
    pub rounds: u32,
    pub ticks_per_round: u32,
    pub packets_per_tick: u32,
    pub budget_range: [Money; 2],
    pub fine_range: [Money; 2],
    pub initial_timeout: u32,
    pub seed: u64,
    pub strategy_config: StrategyConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            arena: Arena { width: 100.0, height: 50.0 },
            radio_radius: 15.0,
            aps: ApLayout::Count(DEFAULT_ACCESS_POINTS),
            handhelds: HandheldConfig::uniform(DEFAULT_HANDHELDS, 1.0, StrategyKind::Combined),
            rounds: 3,
            ticks_per_round: 600,
            packets_per_tick: 1,
            budget_range: [10, 100],
            fine_range: [5, 50],
            initial_timeout: DEFAULT_TIMEOUT,
            seed: 0,
            strategy_config: StrategyConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn access_point_count(&self) -> usize {
        self.aps.count()
    }

    pub fn node_count(&self) -> usize {
        self.access_point_count() + self.handhelds.count
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.arena.width) || !positive(self.arena.height) {
            return Err(ConfigError::new("arena", "width and height must be positive"));
        }
        if !positive(self.radio_radius) {
            return Err(ConfigError::new("radioRadius", "must be positive"));
        }
        if self.access_point_count() < 2 {
            return Err(ConfigError::new("aps", "at least 2 access points are required"));
        }
        if let ApLayout::Positions(ps) = &self.aps {
            if let Some(i) = ps.iter().position(|p| !self.arena.contains(*p)) {
                return Err(ConfigError::new(format!("aps[{i}]"), "position outside the arena"));
            }
        }
        let hh = &self.handhelds;
        if !(hh.speed.is_finite() && hh.speed >= 0.0) {
            return Err(ConfigError::new("handhelds.speed", "must be non-negative"));
        }
        if hh.strategy.len() != hh.count {
            return Err(ConfigError::new(
                "handhelds.strategy",
                format!("expected {} entries, got {}", hh.count, hh.strategy.len()),
            ));
        }
        if hh.team.len() != hh.count {
            return Err(ConfigError::new(
                "handhelds.team",
                format!("expected {} entries, got {}", hh.count, hh.team.len()),
            ));
        }
        if let Some(ps) = &hh.positions {
            if ps.len() != hh.count {
                return Err(ConfigError::new(
                    "handhelds.positions",
                    format!("expected {} entries, got {}", hh.count, ps.len()),
                ));
            }
            if let Some(i) = ps.iter().position(|p| !self.arena.contains(*p)) {
                return Err(ConfigError::new(format!("handhelds.positions[{i}]"), "position outside the arena"));
            }
        }
        if self.initial_timeout < 1 {
            return Err(ConfigError::new("initialTimeout", "must be at least 1"));
        }
        for (field, [lo, hi]) in [("budgetRange", self.budget_range), ("fineRange", self.fine_range)] {
            if lo < 0 || lo > hi {
                return Err(ConfigError::new(field, format!("expected 0 <= lo <= hi, got [{lo}, {hi}]")));
            }
        }
        self.strategy_config.validate().map_err(|e| ConfigError::new("strategyConfig", e.to_string()))
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawHandhelds {
    Count(usize),
    Group(RawHandheldGroup),
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawHandheldGroup {
    count: Option<usize>,
    speed: Option<f64>,
    strategy: Option<OneOrMany<StrategyKind>>,
    team: Option<OneOrMany<Option<TeamId>>>,
    positions: Option<Vec<Point>>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawScenario {
    arena: Option<Arena>,
    radio_radius: Option<f64>,
    aps: Option<ApLayout>,
    handhelds: Option<RawHandhelds>,
    rounds: Option<u32>,
    ticks_per_round: Option<u32>,
    packets_per_tick: Option<u32>,
    budget_range: Option<[Money; 2]>,
    fine_range: Option<[Money; 2]>,
    initial_timeout: Option<u32>,
    seed: Option<u64>,
    strategy_config: Option<StrategyConfig>,
}

fn expand<T: Clone>(field: &str, value: Option<OneOrMany<T>>, default: T, count: usize) -> Result<Vec<T>, ConfigError> {
    match value {
        None => Ok(vec![default; count]),
        Some(OneOrMany::One(v)) => Ok(vec![v; count]),
        Some(OneOrMany::Many(vs)) if vs.len() == count => Ok(vs),
        Some(OneOrMany::Many(vs)) => {
            Err(ConfigError::new(field, format!("expected {count} entries, got {}", vs.len())))
        }
    }
}

impl TryFrom<RawScenario> for ScenarioConfig {
    type Error = ConfigError;

    fn try_from(raw: RawScenario) -> Result<Self, Self::Error> {
        let d = ScenarioConfig::default();
        let group = match raw.handhelds {
            None => RawHandheldGroup::default(),
            Some(RawHandhelds::Count(n)) => RawHandheldGroup { count: Some(n), ..Default::default() },
            Some(RawHandhelds::Group(g)) => g,
        };
        let listed = |v: &Option<OneOrMany<_>>| match v {
            Some(OneOrMany::Many(vs)) => Some(Vec::len(vs)),
            _ => None,
        };
        let count = group
            .count
            .or(group.positions.as_ref().map(Vec::len))
            .or(listed(&group.strategy))
            .unwrap_or(DEFAULT_HANDHELDS);
        let handhelds = HandheldConfig {
            count,
            speed: group.speed.unwrap_or(d.handhelds.speed),
            strategy: expand("handhelds.strategy", group.strategy, StrategyKind::Combined, count)?,
            team: expand("handhelds.team", group.team, None, count)?,
            positions: group.positions,
        };
        Ok(ScenarioConfig {
            arena: raw.arena.unwrap_or(d.arena),
            radio_radius: raw.radio_radius.unwrap_or(d.radio_radius),
            aps: raw.aps.unwrap_or(d.aps),
            handhelds,
            rounds: raw.rounds.unwrap_or(d.rounds),
            ticks_per_round: raw.ticks_per_round.unwrap_or(d.ticks_per_round),
            packets_per_tick: raw.packets_per_tick.unwrap_or(d.packets_per_tick),
            budget_range: raw.budget_range.unwrap_or(d.budget_range),
            fine_range: raw.fine_range.unwrap_or(d.fine_range),
            initial_timeout: raw.initial_timeout.unwrap_or(d.initial_timeout),
            seed: raw.seed.unwrap_or(d.seed),
            strategy_config: raw.strategy_config.unwrap_or(d.strategy_config),
        })
    }
}
