//! Forwarding auctions and the settlement ledger.
//!
//! A packet travels along a chain of auctions: the holder advertises a
//! [`ForwardRequest`], neighbors answer with [`Bid`]s, and the winner becomes
//! the next holder. Money only moves once the transaction ends. On delivery
//! every upstream pays its downstream the accepted price; on failure fines
//! cascade back towards the source.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::NodeId;

/// Integer money in the smallest currency unit.
pub type Money = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransactionId(pub u64);

impl fmt::Display for TransactionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One auctioned forwarding task as heard by the bidders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ForwardRequest {
    pub transaction_id: TransactionId,
    pub source: NodeId,
    pub dest: NodeId,
    pub budget: Money,
    pub fine: Money,
    /// Remaining hop count.
    pub timeout: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bid {
    pub bidder: NodeId,
    pub price: Money,
}

impl Bid {
    pub fn new(bidder: NodeId, price: Money) -> Self {
        Self { bidder, price }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AuctionOutcome {
    pub winner: Option<NodeId>,
    pub accepted_price: Money,
}

impl AuctionOutcome {
    pub const NO_WINNER: AuctionOutcome = AuctionOutcome { winner: None, accepted_price: 0 };
}

/// Picks the winning bid of an auction. Returns an index into `bids`, so a
/// selector can never name a node that did not bid.
pub trait WinnerSelector {
    fn select(&mut self, request: &ForwardRequest, bids: &[Bid]) -> Option<usize>;
}

impl<F> WinnerSelector for F
where
    F: FnMut(&ForwardRequest, &[Bid]) -> Option<usize>,
{
    fn select(&mut self, request: &ForwardRequest, bids: &[Bid]) -> Option<usize> {
        self(request, bids)
    }
}

/// Lowest price wins; equal prices go to the lowest node id.
#[derive(Debug, Clone, Copy, Default)]
pub struct LowestPrice;

impl WinnerSelector for LowestPrice {
    fn select(&mut self, _request: &ForwardRequest, bids: &[Bid]) -> Option<usize> {
        lowest_price_index(bids)
    }
}

pub fn lowest_price_index(bids: &[Bid]) -> Option<usize> {
    bids.iter().enumerate().min_by_key(|(_, b)| (b.price, b.bidder)).map(|(i, _)| i)
}

pub fn run_auction<S>(request: &ForwardRequest, bids: &[Bid], selector: &mut S) -> AuctionOutcome
where
    S: WinnerSelector + ?Sized,
{
    if bids.is_empty() {
        return AuctionOutcome::NO_WINNER;
    }
    match selector.select(request, bids).and_then(|i| bids.get(i)) {
        Some(bid) => AuctionOutcome { winner: Some(bid.bidder), accepted_price: bid.price },
        None => AuctionOutcome::NO_WINNER,
    }
}

/// One relay in a forwarding chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChainLink {
    pub node: NodeId,
    /// Price this node's winning bid was accepted at.
    pub accepted_price: Money,
    /// Fine advertised by this node's upstream, owed back if the packet fails.
    pub fine_owed_upstream: Money,
}

/// The source followed by its relays, in forwarding order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Chain {
    pub origin: NodeId,
    pub links: Vec<ChainLink>,
}

impl Chain {
    pub fn new(origin: NodeId) -> Self {
        Self { origin, links: Vec::new() }
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.origin == node || self.links.iter().any(|l| l.node == node)
    }

    /// Upstream of the relay at `index`.
    pub fn upstream_of(&self, index: usize) -> NodeId {
        if index == 0 {
            self.origin
        } else {
            self.links[index - 1].node
        }
    }

    pub fn last_node(&self) -> NodeId {
        self.links.last().map_or(self.origin, |l| l.node)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LedgerEntry {
    pub transaction_id: TransactionId,
    pub payer: NodeId,
    pub payee: NodeId,
    pub amount: Money,
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("transaction {0} already settled")]
    AlreadySettled(TransactionId),
    #[error("failed to write ledger: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Append-only record of money transfers. Balances are derived, never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ledger {
    entries: Vec<LedgerEntry>,
    settled: BTreeSet<TransactionId>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn is_settled(&self, txn: TransactionId) -> bool {
        self.settled.contains(&txn)
    }

    fn begin(&mut self, txn: TransactionId) -> Result<(), LedgerError> {
        if !self.settled.insert(txn) {
            return Err(LedgerError::AlreadySettled(txn));
        }
        Ok(())
    }

    fn transfer(&mut self, txn: TransactionId, payer: NodeId, payee: NodeId, amount: Money) {
        // Zero transfers carry no information and are not recorded.
        if amount > 0 {
            self.entries.push(LedgerEntry { transaction_id: txn, payer, payee, amount });
        }
    }

    /// Delivered packet: each upstream pays its downstream the downstream's
    /// accepted price. The last relay receives its price and pays nothing.
    pub fn settle_success(&mut self, txn: TransactionId, chain: &Chain) -> Result<(), LedgerError> {
        self.begin(txn)?;
        for (i, link) in chain.links.iter().enumerate() {
            self.transfer(txn, chain.upstream_of(i), link.node, link.accepted_price);
        }
        Ok(())
    }

    /// Failed packet: the chain ends at the failing node. Every relay pays the
    /// fine its upstream advertised. No forwarding price is paid.
    pub fn settle_failure(&mut self, txn: TransactionId, chain: &Chain) -> Result<(), LedgerError> {
        self.begin(txn)?;
        for (i, link) in chain.links.iter().enumerate().rev() {
            self.transfer(txn, link.node, chain.upstream_of(i), link.fine_owed_upstream);
        }
        Ok(())
    }

    /// Marks a transaction as closed without any transfer (no relay ever won).
    pub fn settle_empty(&mut self, txn: TransactionId) -> Result<(), LedgerError> {
        self.begin(txn)
    }

    pub fn balance(&self, node: NodeId) -> Money {
        self.entries.iter().fold(0, |acc, e| {
            acc + if e.payee == node { e.amount } else { 0 } - if e.payer == node { e.amount } else { 0 }
        })
    }

    pub fn balances(&self) -> BTreeMap<NodeId, Money> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            *out.entry(e.payee).or_insert(0) += e.amount;
            *out.entry(e.payer).or_insert(0) -= e.amount;
        }
        out
    }

    /// Net change per node caused by one transaction.
    pub fn deltas_for(&self, txn: TransactionId) -> BTreeMap<NodeId, Money> {
        let mut out = BTreeMap::new();
        for e in self.entries.iter().filter(|e| e.transaction_id == txn) {
            *out.entry(e.payee).or_insert(0) += e.amount;
            *out.entry(e.payer).or_insert(0) -= e.amount;
        }
        out
    }

    /// CSV with header `transactionId,payer,payee,amount`.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<(), LedgerError> {
        let mut w = csv::Writer::from_writer(writer);
        for e in &self.entries {
            w.serialize(e)?;
        }
        if self.entries.is_empty() {
            w.write_record(["transactionId", "payer", "payee", "amount"])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The inputs of a node's per-transaction utility.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BalanceTerms {
    /// b_i: the price this node's bid won at.
    pub bid: Money,
    /// b_d: the price paid onward to the downstream (0 for the last relay).
    pub downstream_bid: Money,
    /// f_i: fine advertised by this node to its downstream.
    pub fine: Money,
    /// f_u: fine advertised by the upstream, owed on failure.
    pub upstream_fine: Money,
    /// B_S: budget set by the source.
    pub source_budget: Money,
}

/// Every outcome a node can experience in one transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BalanceCase {
    WonFailed,
    WonDelivered,
    Lost,
    /// Carry the packet straight to the destination and bill the source's
    /// budget. Not reachable by any agent in the simulator.
    Piggyback,
    /// Win, do nothing, keep the bid while paying the upstream fine.
    /// Superseded by pay-on-delivery; only reachable here.
    DidNothing,
}

impl BalanceCase {
    pub const ALL: [BalanceCase; 5] = [
        BalanceCase::WonFailed,
        BalanceCase::WonDelivered,
        BalanceCase::Lost,
        BalanceCase::Piggyback,
        BalanceCase::DidNothing,
    ];

    pub fn utility(self, t: &BalanceTerms) -> Money {
        match self {
            BalanceCase::WonFailed => t.fine - t.upstream_fine,
            BalanceCase::WonDelivered => t.bid - t.downstream_bid,
            BalanceCase::Lost => 0,
            BalanceCase::Piggyback => t.bid - t.source_budget,
            BalanceCase::DidNothing => t.bid - t.upstream_fine,
        }
    }
}

/// `win * [succeed * (b_i - b_d) - (1 - succeed) * (f_u - f_i)]`
pub fn balance_oracle(win_bid: bool, task_succeed: bool, b_i: Money, b_d: Money, f_i: Money, f_u: Money) -> Money {
    let w = Money::from(win_bid);
    let s = Money::from(task_succeed);
    w * (s * (b_i - b_d) - (1 - s) * (f_u - f_i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn req() -> ForwardRequest {
        ForwardRequest {
            transaction_id: TransactionId(1),
            source: NodeId(0),
            dest: NodeId(9),
            budget: 100,
            fine: 50,
            timeout: 5,
        }
    }

    fn link(node: u32, accepted_price: Money, fine_owed_upstream: Money) -> ChainLink {
        ChainLink { node: NodeId(node), accepted_price, fine_owed_upstream }
    }

    #[test]
    fn lowest_bid_wins() {
        let bids = [Bid::new(NodeId(1), 50), Bid::new(NodeId(2), 30)];
        let out = run_auction(&req(), &bids, &mut LowestPrice);
        assert_eq!(out, AuctionOutcome { winner: Some(NodeId(2)), accepted_price: 30 });
    }

    #[test]
    fn empty_auction_has_no_winner() {
        assert_eq!(run_auction(&req(), &[], &mut LowestPrice).winner, None);
    }

    #[test]
    fn equal_bids_go_to_lower_id() {
        // Brute force over both bid orders and every 2-bid price pair in a
        // small range: the winner is the cheaper bidder, or node 1 on a tie.
        for p in 0..6 {
            for q in 0..6 {
                for bids in
                    [[Bid::new(NodeId(1), p), Bid::new(NodeId(2), q)], [Bid::new(NodeId(2), q), Bid::new(NodeId(1), p)]]
                {
                    let expected = if p <= q { (NodeId(1), p) } else { (NodeId(2), q) };
                    let out = run_auction(&req(), &bids, &mut LowestPrice);
                    assert_eq!((out.winner.unwrap(), out.accepted_price), expected);
                }
            }
        }
    }

    #[test]
    fn custom_selector_cannot_pick_a_non_bidder() {
        let bids = [Bid::new(NodeId(1), 50)];
        let mut out_of_range = |_: &ForwardRequest, _: &[Bid]| Some(7usize);
        assert_eq!(run_auction(&req(), &bids, &mut out_of_range), AuctionOutcome::NO_WINNER);
        let mut first = |_: &ForwardRequest, _: &[Bid]| Some(0usize);
        assert_eq!(run_auction(&req(), &bids, &mut first).winner, Some(NodeId(1)));
    }

    #[test]
    fn two_hop_success_settlement() {
        let chain = Chain { origin: NodeId(0), links: vec![link(1, 80, 0), link(2, 50, 0)] };
        let mut ledger = Ledger::new();
        ledger.settle_success(TransactionId(1), &chain).unwrap();
        assert_eq!(ledger.balance(NodeId(0)), -80);
        assert_eq!(ledger.balance(NodeId(1)), 30);
        assert_eq!(ledger.balance(NodeId(2)), 50);
    }

    #[test]
    fn single_hop_success_settlement() {
        let chain = Chain { origin: NodeId(0), links: vec![link(1, 80, 10)] };
        let mut ledger = Ledger::new();
        ledger.settle_success(TransactionId(3), &chain).unwrap();
        assert_eq!(ledger.balance(NodeId(0)), -80);
        assert_eq!(ledger.balance(NodeId(1)), 80);
    }

    #[test]
    fn failure_fines_cascade_upstream() {
        // S advertised fine 70, n1 advertised fine 45, n2 drops.
        let chain = Chain { origin: NodeId(0), links: vec![link(1, 80, 70), link(2, 50, 45)] };
        let mut ledger = Ledger::new();
        ledger.settle_failure(TransactionId(1), &chain).unwrap();
        assert_eq!(ledger.balance(NodeId(2)), -45);
        assert_eq!(ledger.balance(NodeId(1)), -25);
        assert_eq!(ledger.balance(NodeId(0)), 70);
    }

    #[test]
    fn single_relay_drop_pays_source_fine() {
        let chain = Chain { origin: NodeId(0), links: vec![link(1, 80, 33)] };
        let mut ledger = Ledger::new();
        ledger.settle_failure(TransactionId(1), &chain).unwrap();
        assert_eq!(ledger.balance(NodeId(1)), -33);
        assert_eq!(ledger.balance(NodeId(0)), 33);
    }

    #[test]
    fn double_settlement_is_rejected() {
        let chain = Chain { origin: NodeId(0), links: vec![link(1, 10, 5)] };
        let mut ledger = Ledger::new();
        ledger.settle_success(TransactionId(4), &chain).unwrap();
        assert!(matches!(ledger.settle_failure(TransactionId(4), &chain), Err(LedgerError::AlreadySettled(_))));
        assert!(matches!(ledger.settle_success(TransactionId(4), &chain), Err(LedgerError::AlreadySettled(_))));
        assert!(matches!(ledger.settle_empty(TransactionId(4)), Err(LedgerError::AlreadySettled(_))));
        assert_eq!(ledger.entries().len(), 1);
    }

    #[test]
    fn oracle_rows() {
        assert_eq!(balance_oracle(true, true, 50, 30, 0, 0), 20);
        assert_eq!(balance_oracle(true, false, 0, 0, 45, 70), -25);
        assert_eq!(balance_oracle(false, true, 50, 30, 45, 70), 0);
        assert_eq!(balance_oracle(false, false, 50, 30, 45, 70), 0);
    }

    #[test]
    fn csv_export_has_documented_header() {
        let chain = Chain { origin: NodeId(0), links: vec![link(1, 80, 0)] };
        let mut ledger = Ledger::new();
        ledger.settle_success(TransactionId(7), &chain).unwrap();
        let mut buf = Vec::new();
        ledger.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "transactionId,payer,payee,amount\n7,0,1,80\n");

        let mut buf = Vec::new();
        Ledger::new().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "transactionId,payer,payee,amount\n");
    }

    fn arb_chain() -> impl Strategy<Value = Chain> {
        proptest::collection::vec((0i64..1000, 0i64..1000), 0..6).prop_map(|prices| Chain {
            origin: NodeId(0),
            links: prices.into_iter().enumerate().map(|(i, (p, f))| link(i as u32 + 1, p, f)).collect(),
        })
    }

    proptest! {
        #[test]
        fn settlements_are_zero_sum_and_match_oracle(chains in proptest::collection::vec((arb_chain(), any::<bool>()), 1..10)) {
            let mut ledger = Ledger::new();
            for (k, (chain, delivered)) in chains.iter().enumerate() {
                let txn = TransactionId(k as u64);
                if *delivered {
                    ledger.settle_success(txn, chain).unwrap();
                } else {
                    ledger.settle_failure(txn, chain).unwrap();
                }
                let deltas = ledger.deltas_for(txn);
                prop_assert_eq!(deltas.values().sum::<Money>(), 0);
                for (i, l) in chain.links.iter().enumerate() {
                    let next = chain.links.get(i + 1);
                    let expected = balance_oracle(
                        true,
                        *delivered,
                        l.accepted_price,
                        next.map_or(0, |n| n.accepted_price),
                        next.map_or(0, |n| n.fine_owed_upstream),
                        l.fine_owed_upstream,
                    );
                    prop_assert_eq!(deltas.get(&l.node).copied().unwrap_or(0), expected);
                }
            }
            prop_assert_eq!(ledger.balances().values().sum::<Money>(), 0);
            prop_assert!(ledger.entries().iter().all(|e| e.amount > 0));
        }

        #[test]
        fn default_selector_matches_exhaustive_scan(prices in proptest::collection::vec(0i64..50, 1..8)) {
            let bids: Vec<_> = prices.iter().enumerate().map(|(i, &p)| Bid::new(NodeId(i as u32 * 3 % 8), p)).collect();
            let out = run_auction(&req(), &bids, &mut LowestPrice);
            let mut best = bids[0];
            for b in &bids {
                if b.price < best.price || (b.price == best.price && b.bidder < best.bidder) {
                    best = *b;
                }
            }
            prop_assert_eq!(out.winner, Some(best.bidder));
            prop_assert_eq!(out.accepted_price, best.price);
        }
    }
}
