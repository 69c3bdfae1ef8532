//! Rival bid prediction from observed auctions.
//!
//! Every observed bid is stored as a ratio of the budget it answered, keyed
//! by the task's `timeout / dist`. Per rival, the ratio is fitted as an
//! affine function of that feature by ordinary least squares.

use std::collections::{BTreeMap, BTreeSet};

use crate::auction::{ForwardRequest, Money, TransactionId};
use crate::topology::NodeId;

use super::StrategyConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub bid_ratio: f64,
    pub td_ratio: f64,
}

/// Observed bids, one row per `(node, transaction)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HistoryTable {
    rows: BTreeMap<(NodeId, TransactionId), HistoryRow>,
}

impl HistoryTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `bid / heard_budget` against `timeout / dist`. Observations
    /// with no budget or no finite distance carry no ratio and are skipped.
    pub fn record(
        &mut self,
        node: NodeId,
        txn: TransactionId,
        bid: Money,
        heard_budget: Money,
        timeout: u32,
        dist: u32,
    ) {
        if heard_budget <= 0 || dist == 0 || dist == u32::MAX {
            return;
        }
        let row = HistoryRow {
            bid_ratio: (bid.max(0) as f64) / heard_budget as f64,
            td_ratio: f64::from(timeout) / f64::from(dist),
        };
        self.rows.insert((node, txn), row);
    }

    pub fn insert(&mut self, node: NodeId, txn: TransactionId, row: HistoryRow) {
        self.rows.insert((node, txn), row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&(NodeId, TransactionId), &HistoryRow)> {
        self.rows.iter()
    }

    pub fn samples_for(&self, node: NodeId) -> Vec<HistoryRow> {
        self.rows.range((node, TransactionId(0))..=(node, TransactionId(u64::MAX))).map(|(_, r)| *r).collect()
    }

    /// Union of both tables; rows already present in `self` win.
    pub fn merged_with(&self, other: &HistoryTable) -> HistoryTable {
        let mut rows = other.rows.clone();
        rows.extend(self.rows.iter().map(|(k, v)| (*k, *v)));
        HistoryTable { rows }
    }
}

/// `ratio = intercept + slope * td`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFit {
    pub intercept: f64,
    pub slope: f64,
}

impl AffineFit {
    /// Least-squares line through `(td_ratio, bid_ratio)` samples. A single
    /// sample, or samples sharing one feature value, fit a constant (their
    /// mean). Returns `None` without samples.
    pub fn fit(samples: &[HistoryRow]) -> Option<AffineFit> {
        if samples.is_empty() {
            return None;
        }
        let n = samples.len() as f64;
        let mean_x = samples.iter().map(|s| s.td_ratio).sum::<f64>() / n;
        let mean_y = samples.iter().map(|s| s.bid_ratio).sum::<f64>() / n;
        let sxx: f64 = samples.iter().map(|s| (s.td_ratio - mean_x).powi(2)).sum();
        if sxx <= 1e-12 {
            return Some(AffineFit { intercept: mean_y, slope: 0.0 });
        }
        let sxy: f64 = samples.iter().map(|s| (s.td_ratio - mean_x) * (s.bid_ratio - mean_y)).sum();
        let slope = sxy / sxx;
        Some(AffineFit { intercept: mean_y - slope * mean_x, slope })
    }

    pub fn ratio_at(&self, td_ratio: f64) -> f64 {
        self.intercept + self.slope * td_ratio
    }
}

/// Lowest predicted bid among `rivals` for `request`, where `dist` is the
/// predicting node's own hop count to the destination.
///
/// Rivals without samples are ignored. With no samples for any rival the
/// prediction falls back to `fallbackRatio * budget`.
pub fn predict_min_rival_bid(
    history: &HistoryTable,
    request: &ForwardRequest,
    dist: u32,
    rivals: &BTreeSet<NodeId>,
    config: &StrategyConfig,
) -> f64 {
    let td = f64::from(request.timeout) / f64::from(dist.max(1));
    let budget = request.budget as f64;
    rivals
        .iter()
        .filter_map(|&r| AffineFit::fit(&history.samples_for(r)))
        .map(|fit| fit.ratio_at(td).max(0.0) * budget)
        .min_by(f64::total_cmp)
        .unwrap_or_else(|| config.fallback_ratio.as_f64() * budget)
}

/// Undercuts the prediction by `aggressionFactor`, once more per consecutive
/// lost auction.
pub fn regression_bid(predicted_min: f64, loss_streak: u32, config: &StrategyConfig) -> Money {
    let keep = 1.0 - config.aggression_factor.as_f64();
    let exponent = i32::try_from(loss_streak.saturating_add(1)).unwrap_or(i32::MAX);
    // The small offset keeps exact products like 60 * 0.95 from flooring to 56.
    ((predicted_min.max(0.0) * keep.powi(exponent)) + 1e-9).floor() as Money
}

/// Loss-streak bookkeeping for the regression bidder.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RegressionLearner {
    pub loss_streak: u32,
}

impl RegressionLearner {
    pub fn observe(&mut self, won: bool) {
        self.loss_streak = if won { 0 } else { self.loss_streak.saturating_add(1) };
    }
}
