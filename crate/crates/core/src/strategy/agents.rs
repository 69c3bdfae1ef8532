//! Pluggable agents.
//!
//! The engine drives every handheld through the [`Strategy`] trait. Agents
//! own only their learner state; the tables they read live in a
//! [`Knowledge`] value the engine maintains for each node.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::auction::{lowest_price_index, ForwardRequest, Money};
use crate::topology::{Distance, NodeId};
use crate::SimRng;

use super::pricing::{
    combine_bid, decide_budget, decide_fine, honest_bid, price_level, rebudget_after_win, should_drop,
};
use super::regression::{predict_min_rival_bid, regression_bid, RegressionLearner};
use super::regret::RegretState;
use super::selection::{best_non_teammate_bid, choose_next_hop, teammate_preference, AuctionView};
use super::tables::Knowledge;
use super::{StrategyConfig, StrategyError};

/// A request as heard by one prospective bidder.
#[derive(Debug, Clone, Copy)]
pub struct BidRequest<'a> {
    pub request: &'a ForwardRequest,
    pub auctioneer: NodeId,
    /// The bidder's own distance to the destination.
    pub dist: Distance,
    /// Nodes this bidder expects to compete against.
    pub rivals: &'a BTreeSet<NodeId>,
    pub knowledge: &'a Knowledge,
}

/// State of a node that just won a packet and must advertise it onward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resale {
    pub accepted_price: Money,
    pub upstream_fine: Money,
    pub dist: Distance,
    /// Remaining hops after this node received the packet.
    pub timeout: u32,
}

pub trait Strategy: fmt::Debug + Send {
    fn kind(&self) -> StrategyKind;

    /// Price asked for forwarding `ctx.request`.
    fn bid(&mut self, ctx: &BidRequest<'_>) -> Money;

    /// Feedback on the most recent bid.
    fn observe_bid_result(&mut self, _won: bool) {}

    /// Whether to drop a packet just won instead of forwarding it.
    fn drops(&self, _heard: &ForwardRequest, _knowledge: &Knowledge) -> bool {
        false
    }

    /// Budget and fine of the onward auction.
    fn plan_resale(&self, resale: &Resale) -> (Money, Money);

    /// Next hop among the bids. `None` abandons the packet.
    fn select_winner(&mut self, view: &AuctionView<'_>, rng: &mut SimRng) -> Option<NodeId>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Formula,
    Regret,
    Regression,
    Combined,
    AggressiveCombined,
    HonestBaseline,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        StrategyKind::Formula,
        StrategyKind::Regret,
        StrategyKind::Regression,
        StrategyKind::Combined,
        StrategyKind::AggressiveCombined,
        StrategyKind::HonestBaseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Formula => "formula",
            StrategyKind::Regret => "regret",
            StrategyKind::Regression => "regression",
            StrategyKind::Combined => "combined",
            StrategyKind::AggressiveCombined => "aggressive-combined",
            StrategyKind::HonestBaseline => "honest-baseline",
        }
    }

    /// Instantiates the agent. Learners draw their initial regret matrix from `rng`.
    pub fn build<R: Rng + ?Sized>(self, config: &StrategyConfig, rng: &mut R) -> Box<dyn Strategy> {
        match self {
            StrategyKind::HonestBaseline => Box::new(HonestBaseline { epsilon: config.epsilon }),
            kind => Box::new(LearningAgent::new(kind, config.clone(), rng)),
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| StrategyError::UnknownStrategy(s.to_owned()))
    }
}

/// Which learners feed the bid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BidScheme {
    /// Only the `B_u (dist/timeout)^n` cap.
    Formula,
    Regret,
    Regression,
    /// Minimum of the regret and regression paths.
    Combined,
}

/// A bid together with the learner inputs that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BidDecision {
    pub price: Money,
    /// Price level chosen by the regret learner, if it took part.
    pub level: Option<usize>,
    pub used_regression: bool,
}

/// Bid for a heard request.
///
/// Infeasible tasks (`timeout < dist`) are priced at the heard budget so the
/// bidder is unlikely to be picked. Otherwise the scheme's learners each
/// propose a price and the lowest wins; every proposal is capped at the
/// heard budget.
pub fn decide_bid(
    ctx: &BidRequest<'_>,
    scheme: BidScheme,
    regret: &RegretState,
    regression: &RegressionLearner,
    config: &StrategyConfig,
) -> BidDecision {
    let budget = ctx.request.budget.max(0);
    let timeout = ctx.request.timeout;
    let refuse = BidDecision { price: budget, level: None, used_regression: false };
    let Some(dist) = ctx.dist.hops() else {
        return refuse;
    };
    if timeout < dist || timeout == 0 {
        return refuse;
    }

    let regret_path = || {
        let level = regret.choose_level();
        let level_price = price_level(budget, level, regret.levels()).unwrap_or(budget);
        (combine_bid(level_price, budget, dist, timeout, config.exponent_n), level)
    };
    let regression_path = || {
        let predicted = predict_min_rival_bid(&ctx.knowledge.history, ctx.request, dist, ctx.rivals, config);
        regression_bid(predicted, regression.loss_streak, config).min(budget)
    };

    match scheme {
        BidScheme::Formula => BidDecision {
            price: combine_bid(budget, budget, dist, timeout, config.exponent_n),
            level: None,
            used_regression: false,
        },
        BidScheme::Regret => {
            let (price, level) = regret_path();
            BidDecision { price, level: Some(level), used_regression: false }
        }
        BidScheme::Regression => BidDecision { price: regression_path(), level: None, used_regression: true },
        BidScheme::Combined => {
            let (regret_price, level) = regret_path();
            BidDecision { price: regret_price.min(regression_path()), level: Some(level), used_regression: true }
        }
    }
}

/// Bids `B_u * dist / timeout`, never drops, and hands packets to the
/// cheapest bidder.
#[derive(Debug, Clone, Copy)]
pub struct HonestBaseline {
    pub epsilon: Money,
}

impl Strategy for HonestBaseline {
    fn kind(&self) -> StrategyKind {
        StrategyKind::HonestBaseline
    }

    fn bid(&mut self, ctx: &BidRequest<'_>) -> Money {
        let dist = ctx.dist.hops().unwrap_or(u32::MAX);
        honest_bid(ctx.request.budget.max(0), dist, ctx.request.timeout)
    }

    fn plan_resale(&self, resale: &Resale) -> (Money, Money) {
        let dist = resale.dist.hops().unwrap_or(u32::MAX);
        let budget = decide_budget(resale.accepted_price, dist, resale.timeout, resale.upstream_fine);
        (budget, decide_fine(budget, self.epsilon))
    }

    fn select_winner(&mut self, view: &AuctionView<'_>, _rng: &mut SimRng) -> Option<NodeId> {
        lowest_price_index(view.bids).map(|i| view.bids[i].bidder)
    }
}

/// Every learning agent: formula, regret, regression, combined and
/// aggressive-combined differ only in bid scheme and drop/re-budget policy.
#[derive(Debug, Clone)]
pub struct LearningAgent {
    kind: StrategyKind,
    config: StrategyConfig,
    regret: RegretState,
    regression: RegressionLearner,
    pending: Option<BidDecision>,
}

impl LearningAgent {
    pub fn new<R: Rng + ?Sized>(kind: StrategyKind, config: StrategyConfig, rng: &mut R) -> Self {
        let regret = RegretState::random(config.price_levels, rng);
        Self { kind, config, regret, regression: RegressionLearner::default(), pending: None }
    }

    pub fn regret(&self) -> &RegretState {
        &self.regret
    }

    pub fn regression(&self) -> &RegressionLearner {
        &self.regression
    }

    fn scheme(&self) -> BidScheme {
        match self.kind {
            StrategyKind::Formula => BidScheme::Formula,
            StrategyKind::Regret => BidScheme::Regret,
            StrategyKind::Regression => BidScheme::Regression,
            _ => BidScheme::Combined,
        }
    }

    fn aggressive(&self) -> bool {
        self.kind == StrategyKind::AggressiveCombined
    }
}

impl Strategy for LearningAgent {
    fn kind(&self) -> StrategyKind {
        self.kind
    }

    fn bid(&mut self, ctx: &BidRequest<'_>) -> Money {
        let decision = decide_bid(ctx, self.scheme(), &self.regret, &self.regression, &self.config);
        self.pending = Some(decision);
        decision.price
    }

    fn observe_bid_result(&mut self, won: bool) {
        let Some(decision) = self.pending.take() else {
            return;
        };
        if let Some(level) = decision.level {
            // Levels come from choose_level, so they are always in range.
            let _ = self.regret.observe(level, won);
        }
        if decision.used_regression {
            self.regression.observe(won);
        }
    }

    fn drops(&self, heard: &ForwardRequest, knowledge: &Knowledge) -> bool {
        self.aggressive() && should_drop(heard, knowledge.max_budget_seen, &self.config)
    }

    fn plan_resale(&self, resale: &Resale) -> (Money, Money) {
        let dist = resale.dist.hops().unwrap_or(u32::MAX);
        if self.aggressive() {
            rebudget_after_win(resale.accepted_price, dist, resale.timeout, resale.upstream_fine, &self.config)
        } else {
            let budget = decide_budget(resale.accepted_price, dist, resale.timeout, resale.upstream_fine);
            (budget, decide_fine(budget, self.config.epsilon))
        }
    }

    fn select_winner(&mut self, view: &AuctionView<'_>, rng: &mut SimRng) -> Option<NodeId> {
        let best_other = best_non_teammate_bid(view.bids, view.teammates);
        teammate_preference(view.bids, view.teammates, best_other, &self.config)
            .or_else(|| choose_next_hop(view, &self.config, rng).ok())
    }
}
