//! Per-node intelligence about other nodes, and how teammates pool it.

use std::collections::BTreeMap;

use crate::auction::{Money, TransactionId};
use crate::topology::NodeId;

use super::regression::HistoryTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RevenueRow {
    pub auctioneer: NodeId,
    pub estimate: Money,
}

/// Estimated income of each rival, one row per won transaction. A node wins
/// at most once per transaction, so `(rival, transaction)` is the key.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RevenueTable {
    rows: BTreeMap<NodeId, BTreeMap<TransactionId, RevenueRow>>,
}

impl RevenueTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Later observations of the same `(rival, transaction)` replace earlier ones.
    pub fn record_rival_win(&mut self, rival: NodeId, txn: TransactionId, auctioneer: NodeId, estimate: Money) {
        self.rows.entry(rival).or_default().insert(txn, RevenueRow { auctioneer, estimate });
    }

    pub fn len(&self) -> usize {
        self.rows.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn accumulated(&self, rival: NodeId) -> Money {
        self.rows.get(&rival).map_or(0, |r| r.values().map(|row| row.estimate).sum())
    }

    pub fn rows_for(&self, rival: NodeId) -> impl Iterator<Item = (TransactionId, RevenueRow)> + '_ {
        self.rows.get(&rival).into_iter().flat_map(|r| r.iter().map(|(t, row)| (*t, *row)))
    }

    /// Union of both tables; rows already present in `self` win.
    pub fn merged_with(&self, other: &RevenueTable) -> RevenueTable {
        let mut rows = other.rows.clone();
        for (rival, txns) in &self.rows {
            rows.entry(*rival).or_default().extend(txns.iter().map(|(t, r)| (*t, *r)));
        }
        RevenueTable { rows }
    }
}

/// Cooperation score per node, moved by one per observed forwarding chance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WillingnessTable {
    scores: BTreeMap<NodeId, i64>,
}

impl WillingnessTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, node: NodeId, bid_win_heard: bool) {
        *self.scores.entry(node).or_insert(0) += if bid_win_heard { 1 } else { -1 };
    }

    pub fn score(&self, node: NodeId) -> i64 {
        self.scores.get(&node).copied().unwrap_or(0)
    }

    pub fn set(&mut self, node: NodeId, score: i64) {
        self.scores.insert(node, score);
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, i64)> + '_ {
        self.scores.iter().map(|(n, s)| (*n, *s))
    }

    /// Scores known to both sides are averaged, truncating toward zero.
    /// Scores known to only one side are kept as they are.
    pub fn merged_with(&self, other: &WillingnessTable) -> WillingnessTable {
        let mut scores = other.scores.clone();
        for (node, mine) in &self.scores {
            scores.entry(*node).and_modify(|theirs| *theirs = (*mine + *theirs) / 2).or_insert(*mine);
        }
        WillingnessTable { scores }
    }
}

/// Everything one node has learned about the others.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Knowledge {
    pub history: HistoryTable,
    pub revenue: RevenueTable,
    pub willingness: WillingnessTable,
    /// Largest budget heard in any request so far.
    pub max_budget_seen: Money,
}

impl Knowledge {
    pub fn hear_budget(&mut self, budget: Money) {
        self.max_budget_seen = self.max_budget_seen.max(budget);
    }
}

/// Pools the tables of two teammates.
pub fn merge_team_tables(mine: &Knowledge, teammate: &Knowledge) -> Knowledge {
    Knowledge {
        history: mine.history.merged_with(&teammate.history),
        revenue: mine.revenue.merged_with(&teammate.revenue),
        willingness: mine.willingness.merged_with(&teammate.willingness),
        max_budget_seen: mine.max_budget_seen.max(teammate.max_budget_seen),
    }
}
