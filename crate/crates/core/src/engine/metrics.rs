use std::io;

use serde::{Deserialize, Serialize};

use crate::auction::{Ledger, Money, TransactionId};
use crate::strategy::StrategyKind;
use crate::topology::{Node, NodeId, NodeKind};

use super::record::{StepAction, TransactionRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NodeMetrics {
    pub node: NodeId,
    pub kind: NodeKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub strategy: Option<StrategyKind>,
    pub final_balance: Money,
    pub bids_won: u64,
    pub auctions_run: u64,
    pub packets_dropped: u64,
    pub fines_paid: Money,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GlobalMetrics {
    /// Zero when there were no transactions.
    pub delivery_ratio: f64,
    pub total_transactions: u64,
    pub delivered: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricsReport {
    pub global: GlobalMetrics,
    pub per_node: Vec<NodeMetrics>,
}

impl MetricsReport {
    pub fn is_empty(&self) -> bool {
        self.global.total_transactions == 0
    }

    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["node", "balance", "bidsWon", "auctionsRun", "dropped", "finesPaid"])?;
        for m in &self.per_node {
            w.write_record([
                m.node.to_string(),
                m.final_balance.to_string(),
                m.bids_won.to_string(),
                m.auctions_run.to_string(),
                m.packets_dropped.to_string(),
                m.fines_paid.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn compute_metrics(nodes: &[Node], records: &[TransactionRecord], ledger: &Ledger) -> MetricsReport {
    compute_metrics_with(nodes, |_| None, records, ledger)
}

/// Like [`compute_metrics`], labelling each node with its strategy.
pub fn compute_metrics_with<F>(
    nodes: &[Node],
    strategy_of: F,
    records: &[TransactionRecord],
    ledger: &Ledger,
) -> MetricsReport
where
    F: Fn(NodeId) -> Option<StrategyKind>,
{
    let mut per_node: Vec<NodeMetrics> = nodes
        .iter()
        .map(|n| NodeMetrics {
            node: n.id,
            kind: n.kind,
            strategy: strategy_of(n.id),
            final_balance: ledger.balance(n.id),
            bids_won: 0,
            auctions_run: 0,
            packets_dropped: 0,
            fines_paid: 0,
        })
        .collect();

    let mut failed = std::collections::BTreeSet::<TransactionId>::new();
    let mut delivered = 0;
    for r in records {
        if r.outcome.is_delivered() {
            delivered += 1;
        } else {
            failed.insert(r.transaction_id);
        }
        for link in &r.chain.links {
            per_node[link.node.index()].bids_won += 1;
        }
        for step in &r.steps {
            let m = &mut per_node[step.node.index()];
            match step.action {
                StepAction::Auction { .. } => m.auctions_run += 1,
                StepAction::Dropped => m.packets_dropped += 1,
                _ => {}
            }
        }
    }
    for e in ledger.entries() {
        if failed.contains(&e.transaction_id) {
            per_node[e.payer.index()].fines_paid += e.amount;
        }
    }

    let total = records.len() as u64;
    let delivery_ratio = if total == 0 { 0.0 } else { delivered as f64 / total as f64 };
    MetricsReport { global: GlobalMetrics { delivery_ratio, total_transactions: total, delivered }, per_node }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auction::ForwardRequest;
    use crate::engine::{ApLayout, ScenarioConfig, Simulation};
    use crate::strategy::StrategyKind;
    use crate::topology::Point;

    fn request(txn: u64, source: u32, dest: u32) -> ForwardRequest {
        ForwardRequest {
            transaction_id: TransactionId(txn),
            source: NodeId(source),
            dest: NodeId(dest),
            budget: 50,
            fine: 20,
            timeout: 20,
        }
    }

    #[test]
    fn three_of_four_delivered() {
        let aps = [0.0, 10.0, 60.0].iter().map(|&x| Point::new(x, 25.0)).collect();
        let cfg = ScenarioConfig { aps: ApLayout::Positions(aps), radio_radius: 10.0, ..ScenarioConfig::default() };
        let mut sim = Simulation::new(cfg).unwrap();
        for t in 1..=3 {
            sim.run_transaction(request(t, 0, 1)).unwrap();
        }
        sim.run_transaction(request(4, 0, 2)).unwrap();
        let m = sim.metrics();
        assert_eq!(m.global.total_transactions, 4);
        assert_eq!(m.global.delivered, 3);
        assert_eq!(m.global.delivery_ratio, 0.75);
    }

    #[test]
    fn empty_run() {
        let m = compute_metrics(&[], &[], &Ledger::new());
        assert!(m.is_empty());
        assert_eq!(m.global.delivery_ratio, 0.0);
        let json = serde_json::to_value(&m).unwrap();
        assert!(json.get("global").is_some() && json.get("perNode").is_some());
    }

    #[test]
    fn fines_match_a_ledger_scan() {
        let mut cfg = ScenarioConfig { ticks_per_round: 200, rounds: 1, ..ScenarioConfig::default() };
        cfg.handhelds.strategy = vec![StrategyKind::AggressiveCombined; cfg.handhelds.count];
        let mut sim = Simulation::new(cfg).unwrap();
        sim.run_round().unwrap();
        let m = sim.metrics();
        let failed: Vec<_> =
            sim.records().iter().filter(|r| !r.outcome.is_delivered()).map(|r| r.transaction_id).collect();
        for node in sim.nodes() {
            let mut expect = 0;
            for txn in &failed {
                expect += sim
                    .ledger()
                    .entries()
                    .iter()
                    .filter(|e| e.transaction_id == *txn && e.payer == node.id)
                    .map(|e| e.amount)
                    .sum::<Money>();
            }
            assert_eq!(m.per_node[node.id.index()].fines_paid, expect);
        }
        assert!(m.per_node.iter().any(|n| n.fines_paid > 0));
    }

    #[test]
    fn csv_header() {
        let mut out = Vec::new();
        compute_metrics(&[], &[], &Ledger::new()).write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "node,balance,bidsWon,auctionsRun,dropped,finesPaid\n");
    }
}
