use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::auction::{Bid, Chain, ForwardRequest, Money, TransactionId};
use crate::topology::{Distance, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum Outcome {
    Delivered,
    Dropped { by: NodeId },
    TimedOut { at: NodeId },
    NoBidders { at: NodeId },
}

impl Outcome {
    pub fn is_delivered(self) -> bool {
        self == Outcome::Delivered
    }

    /// The holder at which the packet was lost.
    pub fn failed_at(self) -> Option<NodeId> {
        match self {
            Outcome::Delivered => None,
            Outcome::Dropped { by } => Some(by),
            Outcome::TimedOut { at } | Outcome::NoBidders { at } => Some(at),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Outcome::Delivered => "delivered",
            Outcome::Dropped { .. } => "dropped",
            Outcome::TimedOut { .. } => "timedOut",
            Outcome::NoBidders { .. } => "noBidders",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// What a relay received when it won the packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Received {
    /// Budget of the request it won.
    pub heard_budget: Money,
    /// Fine owed upstream on failure.
    pub upstream_fine: Money,
    pub accepted_price: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum StepAction {
    Delivered,
    Dropped,
    TimedOut,
    /// The holder advertised `request`. `winner` is `None` when nobody bid.
    Auction {
        request: ForwardRequest,
        bids: Vec<Bid>,
        winner: Option<NodeId>,
    },
}

/// One holder's turn with the packet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HolderStep {
    pub node: NodeId,
    /// `None` for the source.
    pub received: Option<Received>,
    /// Remaining hops while this node held the packet.
    pub timeout: u32,
    pub dist: Distance,
    /// Largest budget this node had heard when it decided.
    pub max_budget_seen: Money,
    pub action: StepAction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TransactionRecord {
    pub transaction_id: TransactionId,
    pub tick: u64,
    pub origin: NodeId,
    pub dest: NodeId,
    pub chain: Chain,
    pub outcome: Outcome,
    /// Relay hand-offs, i.e. the chain length.
    pub hops_used: u32,
    pub steps: Vec<HolderStep>,
    pub deltas: BTreeMap<NodeId, Money>,
}
