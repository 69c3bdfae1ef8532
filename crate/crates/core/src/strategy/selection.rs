//! Next-hop choice for an auctioneer.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use thiserror::Error;

use crate::auction::{Bid, ForwardRequest, Money};
use crate::topology::{Distance, NodeId};

use super::tables::Knowledge;
use super::{Fraction, StrategyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no viable next hop")]
pub struct NoViableHop;

/// What an auctioneer sees once the bids are in.
#[derive(Debug, Clone, Copy)]
pub struct AuctionView<'a> {
    /// The request this node advertised.
    pub request: &'a ForwardRequest,
    /// This node's distance to the destination.
    pub dist: Distance,
    pub bids: &'a [Bid],
    pub bidder_dist: &'a BTreeMap<NodeId, Distance>,
    pub teammates: &'a BTreeSet<NodeId>,
    pub knowledge: &'a Knowledge,
}

impl AuctionView<'_> {
    fn bidder_dist(&self, node: NodeId) -> Distance {
        self.bidder_dist.get(&node).copied().unwrap_or(Distance::Unreachable)
    }
}

/// Picks the next hop according to how hard the task is.
///
/// * Easy (`timeout >= dist + 1`): lowest price, penalized by
///   `lambda * budget * richRank`, where richRank in `[0, 1]` ranks bidders
///   by accumulated estimated revenue. Equal scores go to the more willing
///   bidder, then the lower id.
/// * Risky (`timeout == dist`): the bidder closest to the destination, then
///   the more willing, then the cheaper, then the lower id.
/// * Impossible (`timeout < dist`): any bidder, uniformly at random.
pub fn choose_next_hop<R: Rng + ?Sized>(
    view: &AuctionView<'_>,
    config: &StrategyConfig,
    rng: &mut R,
) -> Result<NodeId, NoViableHop> {
    if view.bids.is_empty() {
        return Err(NoViableHop);
    }
    let timeout = u64::from(view.request.timeout);
    let dist = view.dist.hops().map_or(u64::MAX, u64::from);
    let willingness = &view.knowledge.willingness;

    let chosen = if dist != u64::MAX && timeout > dist {
        let ranks = rich_ranks(view.bids, view);
        let penalty = config.rich_penalty.as_f64() * view.request.budget as f64;
        let score = |b: &Bid| b.price as f64 + penalty * ranks[&b.bidder];
        view.bids.iter().min_by(|a, b| {
            score(a)
                .total_cmp(&score(b))
                .then_with(|| willingness.score(b.bidder).cmp(&willingness.score(a.bidder)))
                .then_with(|| a.bidder.cmp(&b.bidder))
        })
    } else if timeout == dist {
        view.bids.iter().min_by(|a, b| {
            view.bidder_dist(a.bidder)
                .cmp(&view.bidder_dist(b.bidder))
                .then_with(|| willingness.score(b.bidder).cmp(&willingness.score(a.bidder)))
                .then_with(|| a.price.cmp(&b.price))
                .then_with(|| a.bidder.cmp(&b.bidder))
        })
    } else {
        view.bids.get(rng.gen_range(0..view.bids.len()))
    };
    chosen.map(|b| b.bidder).ok_or(NoViableHop)
}

/// Normalized revenue rank per bidder: the share of other bidders with a
/// strictly smaller accumulated revenue. 0 is the poorest.
fn rich_ranks(bids: &[Bid], view: &AuctionView<'_>) -> BTreeMap<NodeId, f64> {
    let revenue: Vec<(NodeId, Money)> =
        bids.iter().map(|b| (b.bidder, view.knowledge.revenue.accumulated(b.bidder))).collect();
    let others = revenue.len().saturating_sub(1).max(1) as f64;
    revenue
        .iter()
        .map(|&(node, r)| {
            let below = revenue.iter().filter(|&&(_, o)| o < r).count();
            (node, below as f64 / others)
        })
        .collect()
}

/// The cheapest teammate bid, if it is within `(1 + gamma)` of the best
/// non-teammate bid (or if no non-teammate bid exists).
pub fn teammate_preference(
    bids: &[Bid],
    teammates: &BTreeSet<NodeId>,
    min_other_bid: Option<Money>,
    config: &StrategyConfig,
) -> Option<NodeId> {
    let best = bids.iter().filter(|b| teammates.contains(&b.bidder)).min_by_key(|b| (b.price, b.bidder))?;
    let Some(other) = min_other_bid else {
        return Some(best.bidder);
    };
    let limit = i128::from(other) * (Fraction::SCALE + config.teammate_tolerance.ppm());
    (i128::from(best.price) * Fraction::SCALE <= limit).then_some(best.bidder)
}

pub(crate) fn best_non_teammate_bid(bids: &[Bid], teammates: &BTreeSet<NodeId>) -> Option<Money> {
    bids.iter().filter(|b| !teammates.contains(&b.bidder)).map(|b| b.price).min()
}
