//! Agent decision logic.
//!
//! Pure pricing rules live in [`pricing`], the two bid learners in
//! [`regret`] and [`regression`], the per-node intelligence tables in
//! [`tables`], next-hop choice in [`selection`], and the pluggable agents
//! that combine them in [`agents`].

pub mod agents;
pub mod pricing;
pub mod regression;
pub mod regret;
pub mod selection;
pub mod tables;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use agents::{
    decide_bid, BidDecision, BidRequest, BidScheme, HonestBaseline, LearningAgent, Resale, Strategy, StrategyKind,
};
pub use pricing::{
    combine_bid, decide_budget, decide_fine, estimate_rival_revenue, honest_bid, mu, price_level, rebudget_after_win,
    should_drop,
};
pub use regression::{predict_min_rival_bid, regression_bid, AffineFit, HistoryRow, HistoryTable, RegressionLearner};
pub use regret::{build_potential, RegretMatrix, RegretState};
pub use selection::{choose_next_hop, teammate_preference, AuctionView, NoViableHop};
pub use tables::{merge_team_tables, Knowledge, RevenueRow, RevenueTable, WillingnessTable};

use crate::auction::Money;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrategyError {
    #[error("price level {level} outside 1..={levels}")]
    LevelOutOfRange { level: usize, levels: usize },
    #[error("matrix dimension {found} does not match {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid strategy config: {0}")]
    InvalidConfig(String),
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
}

/// A fraction in `[0, 1]` held exactly in parts per million, so threshold
/// comparisons against integer money are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fraction {
    ppm: u32,
}

impl Fraction {
    pub const SCALE: i128 = 1_000_000;
    pub const ZERO: Fraction = Fraction { ppm: 0 };
    pub const ONE: Fraction = Fraction { ppm: 1_000_000 };

    pub fn new(value: f64) -> Result<Self, StrategyError> {
        if !(0.0..=1.0).contains(&value) {
            return Err(StrategyError::InvalidConfig(format!("fraction {value} outside [0, 1]")));
        }
        Ok(Self { ppm: (value * 1e6).round() as u32 })
    }

    pub const fn from_ppm(ppm: u32) -> Self {
        Self { ppm }
    }

    pub fn ppm(self) -> i128 {
        i128::from(self.ppm)
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.ppm) / 1e6
    }

    /// `ceil(self * amount)` for non-negative amounts.
    pub fn of_money_ceil(self, amount: Money) -> Money {
        let num = self.ppm() * i128::from(amount);
        num.div_euclid(Self::SCALE) as Money + Money::from(num.rem_euclid(Self::SCALE) != 0)
    }

    /// True iff `amount < self * reference`, exactly.
    pub fn exceeds(self, amount: Money, reference: Money) -> bool {
        i128::from(amount) * Self::SCALE < self.ppm() * i128::from(reference)
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Fraction::new(v).map_err(serde::de::Error::custom)
    }
}

/// Tunable constants shared by every strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct StrategyConfig {
    /// Gap between advertised budget and fine.
    pub epsilon: Money,
    /// Exponent on `dist / timeout` in the combined-bid cap.
    #[serde(rename = "n")]
    pub exponent_n: f64,
    /// Drop packets whose budget is below this share of the largest budget heard.
    pub drop_threshold: Fraction,
    /// Re-auction budget is at least this share of the accepted price.
    pub rebudget_floor: Fraction,
    pub price_levels: usize,
    /// Multiplicative price cut per consecutive lost auction.
    pub aggression_factor: Fraction,
    /// Teammates win when within this share above the best rival bid.
    #[serde(rename = "gamma")]
    pub teammate_tolerance: Fraction,
    /// Weight of the rich-rival penalty in next-hop scoring.
    #[serde(rename = "lambda")]
    pub rich_penalty: Fraction,
    /// Bid ratio assumed for rivals before any history exists.
    pub fallback_ratio: Fraction,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            epsilon: 1,
            exponent_n: 1.0,
            drop_threshold: Fraction::from_ppm(300_000),
            rebudget_floor: Fraction::from_ppm(500_000),
            price_levels: 10,
            aggression_factor: Fraction::from_ppm(50_000),
            teammate_tolerance: Fraction::from_ppm(200_000),
            rich_penalty: Fraction::from_ppm(100_000),
            fallback_ratio: Fraction::from_ppm(500_000),
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<(), StrategyError> {
        if self.epsilon < 1 {
            return Err(StrategyError::InvalidConfig("epsilon must be at least 1".into()));
        }
        if !(self.exponent_n.is_finite() && self.exponent_n > 0.0) {
            return Err(StrategyError::InvalidConfig("n must be a positive real".into()));
        }
        if self.price_levels < 2 {
            return Err(StrategyError::InvalidConfig("priceLevels must be at least 2".into()));
        }
        if self.aggression_factor == Fraction::ZERO || self.aggression_factor == Fraction::ONE {
            return Err(StrategyError::InvalidConfig("aggressionFactor must lie strictly inside (0, 1)".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fraction_comparisons_are_exact() {
        let thirty = Fraction::new(0.30).unwrap();
        assert!(thirty.exceeds(29, 100));
        assert!(!thirty.exceeds(30, 100));
        assert_eq!(Fraction::new(0.5).unwrap().of_money_ceil(51), 26);
        assert_eq!(Fraction::new(0.5).unwrap().of_money_ceil(50), 25);
        assert!(Fraction::new(1.5).is_err());
        assert!(Fraction::new(-0.1).is_err());
    }

    #[test]
    fn default_config_is_valid() {
        let cfg = StrategyConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.drop_threshold.as_f64(), 0.30);
        assert_eq!(cfg.rebudget_floor.as_f64(), 0.50);
        assert_eq!(cfg.price_levels, 10);
    }

    #[test]
    fn config_rejects_bad_values() {
        let mut cfg = StrategyConfig { epsilon: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg = StrategyConfig { price_levels: 1, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg = StrategyConfig { exponent_n: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg = StrategyConfig { aggression_factor: Fraction::ZERO, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_json_keys() {
        let cfg: StrategyConfig = serde_json::from_str(r#"{"epsilon":2,"n":1.5,"gamma":0.25,"lambda":0.0}"#).unwrap();
        assert_eq!(cfg.epsilon, 2);
        assert_eq!(cfg.exponent_n, 1.5);
        assert_eq!(cfg.teammate_tolerance, Fraction::new(0.25).unwrap());
        assert_eq!(cfg.rich_penalty, Fraction::ZERO);
        assert_eq!(cfg.drop_threshold, StrategyConfig::default().drop_threshold);
        assert!(serde_json::from_str::<StrategyConfig>(r#"{"dropThreshold":1.2}"#).is_err());
        assert!(serde_json::from_str::<StrategyConfig>(r#"{"bogus":1}"#).is_err());
    }
}
