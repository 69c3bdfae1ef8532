use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};

use crate::auction::{
    run_auction, Bid, Chain, ChainLink, ForwardRequest, Ledger, LedgerError, LowestPrice, TransactionId,
};
use crate::strategy::{
    estimate_rival_revenue, merge_team_tables, AuctionView, BidRequest, Knowledge, Resale, Strategy,
};
use crate::topology::{Distance, MobilityState, Node, NodeId, NodeKind, RoutingView, TopologySnapshot};
use crate::SimRng;

use super::config::{ApLayout, ConfigError, ScenarioConfig};
use super::metrics::{compute_metrics_with, MetricsReport};
use super::record::{HolderStep, Outcome, Received, StepAction, TransactionRecord};

/// Named random sub-streams of the scenario seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum RngStream {
    Placement = 1,
    Mobility = 2,
    Traffic = 3,
    StrategyInit = 4,
    Decisions = 5,
}

impl RngStream {
    pub fn rng(self, seed: u64) -> SimRng {
        let mut rng = SimRng::seed_from_u64(seed);
        rng.set_stream(self as u64);
        rng
    }
}

fn saturating_hops(d: Distance) -> u32 {
    d.hops().unwrap_or(u32::MAX)
}

/// A running scenario: nodes, their agents and knowledge, and the ledger.
#[derive(Debug)]
pub struct Simulation {
    config: ScenarioConfig,
    nodes: Vec<Node>,
    mobility: MobilityState,
    snapshot: TopologySnapshot,
    routing: RoutingView,
    agents: Vec<Option<Box<dyn Strategy>>>,
    knowledge: Vec<Knowledge>,
    teammates: Vec<BTreeSet<NodeId>>,
    ledger: Ledger,
    records: Vec<TransactionRecord>,
    tick: u64,
    next_transaction: u64,
    mobility_rng: SimRng,
    traffic_rng: SimRng,
    decision_rng: SimRng,
}

impl Simulation {
    /// Access points take ids `0..aps`, handhelds follow.
    pub fn new(config: ScenarioConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let arena = config.arena;
        let mut placement = RngStream::Placement.rng(config.seed);
        let mut init = RngStream::StrategyInit.rng(config.seed);

        let ap_positions = match &config.aps {
            ApLayout::Positions(ps) => ps.clone(),
            ApLayout::Count(n) => (0..*n).map(|_| arena.random_point(&mut placement)).collect(),
        };
        let hh = &config.handhelds;
        let hh_positions = match &hh.positions {
            Some(ps) => ps.clone(),
            None => (0..hh.count).map(|_| arena.random_point(&mut placement)).collect(),
        };
        let aps = ap_positions.len();

        let mut nodes = Vec::with_capacity(config.node_count());
        let mut positions = ap_positions;
        let mut waypoints = vec![None; aps];
        let mut speeds = vec![0.0; aps];
        let mut agents: Vec<Option<Box<dyn Strategy>>> = (0..aps).map(|_| None).collect();
        for i in 0..aps {
            nodes.push(Node { id: NodeId(i as u32), kind: NodeKind::AccessPoint, team: None });
        }
        for (i, pos) in hh_positions.into_iter().enumerate() {
            nodes.push(Node { id: NodeId((aps + i) as u32), kind: NodeKind::Handheld, team: hh.team[i] });
            positions.push(pos);
            waypoints.push(Some(arena.random_point(&mut placement)));
            speeds.push(hh.speed);
            agents.push(Some(hh.strategy[i].build(&config.strategy_config, &mut init)));
        }

        let teammates = nodes
            .iter()
            .map(|n| match n.team {
                Some(t) => nodes.iter().filter(|m| m.id != n.id && m.team == Some(t)).map(|m| m.id).collect(),
                None => BTreeSet::new(),
            })
            .collect();

        let mobility = MobilityState { arena, positions, waypoints, speeds };
        let snapshot = TopologySnapshot::from_positions(&mobility.positions, config.radio_radius, 0);
        let knowledge = vec![Knowledge::default(); nodes.len()];
        let mut sim = Self {
            mobility_rng: RngStream::Mobility.rng(config.seed),
            traffic_rng: RngStream::Traffic.rng(config.seed),
            decision_rng: RngStream::Decisions.rng(config.seed),
            routing: RoutingView::compute(&snapshot),
            config,
            nodes,
            mobility,
            snapshot,
            agents,
            knowledge,
            teammates,
            ledger: Ledger::new(),
            records: Vec::new(),
            tick: 0,
            next_transaction: 1,
        };
        sim.set_topology(sim.snapshot.clone());
        Ok(sim)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn access_points(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().filter(|n| n.is_access_point()).map(|n| n.id)
    }

    pub fn mobility(&self) -> &MobilityState {
        &self.mobility
    }

    pub fn snapshot(&self) -> &TopologySnapshot {
        &self.snapshot
    }

    pub fn routing(&self) -> &RoutingView {
        &self.routing
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn records(&self) -> &[TransactionRecord] {
        &self.records
    }

    pub fn knowledge(&self, node: NodeId) -> &Knowledge {
        &self.knowledge[node.index()]
    }

    pub fn agent(&self, node: NodeId) -> Option<&dyn Strategy> {
        self.agents[node.index()].as_deref()
    }

    /// Swaps in a custom agent for a handheld, returning the old one.
    pub fn set_agent(&mut self, node: NodeId, agent: Box<dyn Strategy>) -> Option<Box<dyn Strategy>> {
        assert!(self.is_handheld(node), "{node} is not a handheld");
        self.agents[node.index()].replace(agent)
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    fn is_handheld(&self, node: NodeId) -> bool {
        self.nodes[node.index()].kind == NodeKind::Handheld
    }

    /// Replaces the connectivity snapshot, recomputing routes. Only handhelds
    /// relay, so routes never pass through an access point.
    pub fn set_topology(&mut self, snapshot: TopologySnapshot) {
        assert_eq!(snapshot.node_count(), self.nodes.len(), "snapshot size mismatch");
        let nodes = &self.nodes;
        self.routing = RoutingView::with_relays(&snapshot, |n| nodes[n.index()].kind == NodeKind::Handheld);
        self.snapshot = snapshot;
    }

    fn handheld_neighbors(&self, node: NodeId) -> Vec<NodeId> {
        self.snapshot.neighbors(node).iter().copied().filter(|&n| self.is_handheld(n)).collect()
    }

    /// Draws the next packet: random source AP, distinct random destination AP.
    pub fn generate_request(&mut self) -> ForwardRequest {
        let aps = self.config.access_point_count();
        let source = self.traffic_rng.gen_range(0..aps);
        let mut dest = self.traffic_rng.gen_range(0..aps - 1);
        if dest >= source {
            dest += 1;
        }
        let [blo, bhi] = self.config.budget_range;
        let [flo, fhi] = self.config.fine_range;
        let budget = self.traffic_rng.gen_range(blo..=bhi);
        let fine = self.traffic_rng.gen_range(flo..=fhi);
        let request = ForwardRequest {
            transaction_id: TransactionId(self.next_transaction),
            source: NodeId(source as u32),
            dest: NodeId(dest as u32),
            budget,
            fine,
            timeout: self.config.initial_timeout,
        };
        self.next_transaction += 1;
        request
    }

    /// Carries one packet from its source AP to delivery or failure through
    /// successive auctions on the current snapshot, then settles it.
    pub fn run_transaction(&mut self, request: ForwardRequest) -> Result<TransactionRecord, LedgerError> {
        let txn = request.transaction_id;
        if self.ledger.is_settled(txn) {
            return Err(LedgerError::AlreadySettled(txn));
        }
        self.next_transaction = self.next_transaction.max(txn.0 + 1);
        let dest = request.dest;
        let ledger_start = self.ledger.entries().len();
        let mut chain = Chain::new(request.source);
        let mut steps = Vec::new();
        let mut holder = request.source;
        let mut upstream: Option<NodeId> = None;
        let mut received: Option<Received> = None;
        let mut timeout = request.timeout;

        let outcome = loop {
            let dist = self.routing.dist(holder, dest);
            let mut step = HolderStep {
                node: holder,
                received,
                timeout,
                dist,
                max_budget_seen: self.knowledge[holder.index()].max_budget_seen,
                action: StepAction::TimedOut,
            };

            if let (Some(rcv), Some(agent)) = (received, self.agents[holder.index()].as_deref()) {
                let heard = ForwardRequest {
                    budget: rcv.heard_budget,
                    fine: rcv.upstream_fine,
                    timeout: timeout + 1,
                    ..request
                };
                if agent.drops(&heard, &self.knowledge[holder.index()]) {
                    step.action = StepAction::Dropped;
                    steps.push(step);
                    break Outcome::Dropped { by: holder };
                }
            }
            if timeout == 0 {
                steps.push(step);
                break Outcome::TimedOut { at: holder };
            }
            if holder == dest || self.snapshot.are_neighbors(holder, dest) {
                step.action = StepAction::Delivered;
                steps.push(step);
                break Outcome::Delivered;
            }

            let (budget, mut fine) = match (received, self.agents[holder.index()].as_deref()) {
                (Some(rcv), Some(agent)) => agent.plan_resale(&Resale {
                    accepted_price: rcv.accepted_price,
                    upstream_fine: rcv.upstream_fine,
                    dist,
                    timeout,
                }),
                _ => (request.budget, request.fine),
            };
            if timeout < saturating_hops(dist) {
                // Delivery is out of reach: whoever takes it on owes the full budget.
                fine = budget;
            }
            let advertised = ForwardRequest { budget, fine, timeout, ..request };

            let (bids, bidder_dist) = self.collect_bids(holder, &advertised, &chain);
            let winner = self.pick_winner(holder, &advertised, dist, &bids, &bidder_dist);
            for bid in &bids {
                if let Some(agent) = self.agents[bid.bidder.index()].as_deref_mut() {
                    agent.observe_bid_result(Some(bid.bidder) == winner.map(|w| w.bidder));
                }
            }
            self.observe_auction(holder, &advertised, dist, &bids, winner);
            if let (Some(up), Some(_)) = (upstream, winner) {
                if self.is_handheld(up) {
                    self.knowledge[up.index()].willingness.update(holder, true);
                }
            }
            step.action = StepAction::Auction { request: advertised, bids, winner: winner.map(|w| w.bidder) };
            steps.push(step);

            let Some(win) = winner else {
                break Outcome::NoBidders { at: holder };
            };
            chain.links.push(ChainLink { node: win.bidder, accepted_price: win.price, fine_owed_upstream: fine });
            received = Some(Received { heard_budget: budget, upstream_fine: fine, accepted_price: win.price });
            upstream = Some(holder);
            holder = win.bidder;
            timeout -= 1;
        };

        // The upstream learns whether its pick went on to forward.
        if let Some(up) = upstream {
            if self.is_handheld(up) {
                self.knowledge[up.index()].willingness.update(holder, outcome.is_delivered());
            }
        }

        match outcome {
            Outcome::Delivered => self.ledger.settle_success(txn, &chain)?,
            _ if chain.links.is_empty() => self.ledger.settle_empty(txn)?,
            _ => self.ledger.settle_failure(txn, &chain)?,
        }
        let mut deltas = BTreeMap::new();
        for e in &self.ledger.entries()[ledger_start..] {
            *deltas.entry(e.payee).or_insert(0) += e.amount;
            *deltas.entry(e.payer).or_insert(0) -= e.amount;
        }

        let record = TransactionRecord {
            transaction_id: txn,
            tick: self.tick,
            origin: request.source,
            dest,
            hops_used: chain.links.len() as u32,
            chain,
            outcome,
            steps,
            deltas,
        };
        self.records.push(record.clone());
        Ok(record)
    }

    /// Every handheld neighbor hears the request; those not already on the
    /// chain bid.
    fn collect_bids(
        &mut self,
        holder: NodeId,
        advertised: &ForwardRequest,
        chain: &Chain,
    ) -> (Vec<Bid>, BTreeMap<NodeId, Distance>) {
        let hearers = self.handheld_neighbors(holder);
        for &h in &hearers {
            self.knowledge[h.index()].hear_budget(advertised.budget);
        }
        let mut bids = Vec::new();
        let mut bidder_dist = BTreeMap::new();
        for &b in hearers.iter().filter(|&&h| !chain.contains(h)) {
            let dist = self.routing.dist(b, advertised.dest);
            let rivals: BTreeSet<NodeId> =
                self.handheld_neighbors(b).into_iter().filter(|&r| r != holder && !chain.contains(r)).collect();
            let ctx = BidRequest {
                request: advertised,
                auctioneer: holder,
                dist,
                rivals: &rivals,
                knowledge: &self.knowledge[b.index()],
            };
            let Some(agent) = self.agents[b.index()].as_deref_mut() else {
                continue;
            };
            bids.push(Bid::new(b, agent.bid(&ctx).max(0)));
            bidder_dist.insert(b, dist);
        }
        (bids, bidder_dist)
    }

    fn pick_winner(
        &mut self,
        holder: NodeId,
        advertised: &ForwardRequest,
        dist: Distance,
        bids: &[Bid],
        bidder_dist: &BTreeMap<NodeId, Distance>,
    ) -> Option<Bid> {
        let outcome = match self.agents[holder.index()].as_deref_mut() {
            None => run_auction(advertised, bids, &mut LowestPrice),
            Some(agent) => {
                let view = AuctionView {
                    request: advertised,
                    dist,
                    bids,
                    bidder_dist,
                    teammates: &self.teammates[holder.index()],
                    knowledge: &self.knowledge[holder.index()],
                };
                let choice = agent.select_winner(&view, &mut self.decision_rng);
                let mut selector =
                    |_: &ForwardRequest, bids: &[Bid]| choice.and_then(|c| bids.iter().position(|b| b.bidder == c));
                run_auction(advertised, bids, &mut selector)
            }
        };
        outcome.winner.map(|w| Bid::new(w, outcome.accepted_price))
    }

    /// Neighbors of the auctioneer see the request and the winning bid. The
    /// auctioneer itself sees every bid.
    fn observe_auction(
        &mut self,
        holder: NodeId,
        advertised: &ForwardRequest,
        dist: Distance,
        bids: &[Bid],
        winner: Option<Bid>,
    ) {
        let txn = advertised.transaction_id;
        let dest = advertised.dest;
        if self.is_handheld(holder) {
            let own = saturating_hops(dist);
            let k = &mut self.knowledge[holder.index()];
            for b in bids {
                k.history.record(b.bidder, txn, b.price, advertised.budget, advertised.timeout, own);
            }
        }
        let Some(win) = winner else {
            return;
        };
        let estimate =
            estimate_rival_revenue(advertised.budget, advertised.fine, advertised.timeout, saturating_hops(dist));
        let mut observers = self.handheld_neighbors(holder);
        if self.is_handheld(holder) {
            observers.push(holder);
        }
        for h in observers.into_iter().filter(|&h| h != win.bidder) {
            let own = saturating_hops(self.routing.dist(h, dest));
            let k = &mut self.knowledge[h.index()];
            if h != holder {
                k.history.record(win.bidder, txn, win.price, advertised.budget, advertised.timeout, own);
            }
            k.revenue.record_rival_win(win.bidder, txn, holder, estimate);
        }
    }

    /// Adjacent teammates pool their tables.
    pub fn merge_teammates(&mut self) {
        for a in 0..self.nodes.len() {
            let a_id = NodeId(a as u32);
            for &b_id in &self.teammates[a] {
                if b_id.index() <= a || !self.snapshot.are_neighbors(a_id, b_id) {
                    continue;
                }
                let (ka, kb) = (&self.knowledge[a], &self.knowledge[b_id.index()]);
                let merged_a = merge_team_tables(ka, kb);
                let merged_b = merge_team_tables(kb, ka);
                self.knowledge[a] = merged_a;
                self.knowledge[b_id.index()] = merged_b;
            }
        }
    }

    /// Moves handhelds one tick and rebuilds connectivity and routes.
    pub fn advance_mobility(&mut self) {
        self.tick += 1;
        self.mobility = self.mobility.step(&mut self.mobility_rng);
        let snapshot = TopologySnapshot::from_positions(&self.mobility.positions, self.config.radio_radius, self.tick);
        self.set_topology(snapshot);
    }

    /// One tick: mobility, then `packetsPerTick` complete transactions, then
    /// teammate merging.
    pub fn run_tick(&mut self) -> Result<&[TransactionRecord], LedgerError> {
        let start = self.records.len();
        self.advance_mobility();
        for _ in 0..self.config.packets_per_tick {
            let request = self.generate_request();
            self.run_transaction(request)?;
        }
        self.merge_teammates();
        Ok(&self.records[start..])
    }

    pub fn run_round(&mut self) -> Result<&[TransactionRecord], LedgerError> {
        let start = self.records.len();
        for _ in 0..self.config.ticks_per_round {
            self.run_tick()?;
        }
        Ok(&self.records[start..])
    }

    pub fn metrics(&self) -> MetricsReport {
        compute_metrics_with(&self.nodes, |n| self.agent(n).map(|a| a.kind()), &self.records, &self.ledger)
    }

    pub fn into_output(self) -> SimulationOutput {
        let report = self.metrics();
        SimulationOutput { report, records: self.records, ledger: self.ledger }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub report: MetricsReport,
    pub records: Vec<TransactionRecord>,
    pub ledger: Ledger,
}

/// Runs every round of the scenario.
pub fn run_simulation(config: ScenarioConfig) -> Result<SimulationOutput, SimulationError> {
    let mut sim = Simulation::new(config)?;
    for _ in 0..sim.config.rounds {
        sim.run_round()?;
    }
    Ok(sim.into_output())
}

#[derive(Debug, thiserror::Error)]
pub enum SimulationError {
    #[error("invalid scenario: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}
