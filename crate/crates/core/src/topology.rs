//! Node placement, random-waypoint mobility, unit-disk connectivity and
//! hop-count routing views.
//!
//! Routing views are recomputed from the true connectivity snapshot every
//! tick. They play the role a link-state routing table would play on a real
//! device: each node can look up the minimum hop count to any destination.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Dense node identifier. Nodes of a scenario are numbered `0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TeamId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum NodeKind {
    AccessPoint,
    Handheld,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub team: Option<TeamId>,
}

impl Node {
    pub fn is_access_point(&self) -> bool {
        self.kind == NodeKind::AccessPoint
    }
}

/// Serialized as an `[x, y]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn distance_sq(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Axis-aligned rectangle `[0, width] x [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    #[serde(rename = "w")]
    pub width: f64,
    #[serde(rename = "h")]
    pub height: f64,
}

impl Arena {
    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::new(rng.gen_range(0.0..=self.width), rng.gen_range(0.0..=self.height))
    }
}

/// Positions of every node plus the random-waypoint state of the handhelds.
///
/// Access points carry no waypoint and a speed of zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityState {
    pub arena: Arena,
    pub positions: Vec<Point>,
    pub waypoints: Vec<Option<Point>>,
    pub speeds: Vec<f64>,
}

impl MobilityState {
    /// Advances every handheld one tick.
    ///
    /// A handheld moves at most its speed along the straight line to its
    /// waypoint. A handheld that already sits on its waypoint draws a new
    /// uniform waypoint and stays put this tick.
    pub fn step<R: Rng + ?Sized>(&self, rng: &mut R) -> MobilityState {
        let mut next = self.clone();
        for i in 0..next.positions.len() {
            let Some(target) = next.waypoints[i] else {
                continue;
            };
            let pos = next.positions[i];
            if pos == target {
                next.waypoints[i] = Some(self.arena.random_point(rng));
                continue;
            }
            let remaining = pos.distance(target);
            let speed = next.speeds[i];
            next.positions[i] = if remaining <= speed {
                target
            } else {
                let t = speed / remaining;
                Point::new(pos.x + (target.x - pos.x) * t, pos.y + (target.y - pos.y) * t)
            };
        }
        next
    }
}

/// Symmetric, irreflexive neighbor relation at one tick.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologySnapshot {
    pub tick: u64,
    adjacency: Vec<BTreeSet<NodeId>>,
}

impl TopologySnapshot {
    /// Unit-disk graph: two distinct nodes are neighbors iff their Euclidean
    /// distance is at most `radius` (inclusive).
    pub fn from_positions(positions: &[Point], radius: f64, tick: u64) -> Self {
        let r2 = radius * radius;
        let mut adjacency = vec![BTreeSet::new(); positions.len()];
        for a in 0..positions.len() {
            for b in (a + 1)..positions.len() {
                if positions[a].distance_sq(positions[b]) <= r2 {
                    adjacency[a].insert(NodeId(b as u32));
                    adjacency[b].insert(NodeId(a as u32));
                }
            }
        }
        Self { tick, adjacency }
    }

    /// Builds a snapshot from an explicit undirected edge list. Self-loops are
    /// ignored.
    pub fn from_edges(node_count: usize, edges: &[(NodeId, NodeId)], tick: u64) -> Self {
        let mut adjacency = vec![BTreeSet::new(); node_count];
        for &(a, b) in edges {
            if a != b {
                adjacency[a.index()].insert(b);
                adjacency[b.index()].insert(a);
            }
        }
        Self { tick, adjacency }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, node: NodeId) -> &BTreeSet<NodeId> {
        &self.adjacency[node.index()]
    }

    pub fn are_neighbors(&self, a: NodeId, b: NodeId) -> bool {
        self.adjacency[a.index()].contains(&b)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(BTreeSet::len).sum::<usize>() / 2
    }
}

pub fn build_adjacency(positions: &[Point], radius: f64) -> TopologySnapshot {
    TopologySnapshot::from_positions(positions, radius, 0)
}

pub fn neighbors(snapshot: &TopologySnapshot, node: NodeId) -> &BTreeSet<NodeId> {
    snapshot.neighbors(node)
}

/// Minimum hop count towards a destination. `Unreachable` orders after every
/// finite hop count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Distance {
    Hops(u32),
    Unreachable,
}

impl Distance {
    pub fn hops(self) -> Option<u32> {
        match self {
            Distance::Hops(h) => Some(h),
            Distance::Unreachable => None,
        }
    }

    pub fn is_reachable(self) -> bool {
        matches!(self, Distance::Hops(_))
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Hops(h) => write!(f, "{h}"),
            Distance::Unreachable => f.write_str("unreachable"),
        }
    }
}

/// Breadth-first hop count from `node` to `dest` over the whole snapshot.
pub fn compute_dist(snapshot: &TopologySnapshot, node: NodeId, dest: NodeId) -> Distance {
    bfs_from(snapshot, dest, |_| true)[node.index()]
}

/// Hop counts of every node to `dest`, where only nodes accepted by `relays`
/// may appear strictly inside a path. Endpoints are always allowed.
fn bfs_from<F>(snapshot: &TopologySnapshot, dest: NodeId, relays: F) -> Vec<Distance>
where
    F: Fn(NodeId) -> bool,
{
    let mut dist = vec![Distance::Unreachable; snapshot.node_count()];
    let mut queue = VecDeque::new();
    dist[dest.index()] = Distance::Hops(0);
    queue.push_back((dest, 0u32));
    while let Some((node, d)) = queue.pop_front() {
        // A non-relay node can still be the far endpoint of a path, but
        // nothing can be routed through it.
        if node != dest && !relays(node) {
            continue;
        }
        for &next in snapshot.neighbors(node) {
            if dist[next.index()] == Distance::Unreachable {
                dist[next.index()] = Distance::Hops(d + 1);
                queue.push_back((next, d + 1));
            }
        }
    }
    dist
}

/// All-pairs hop-count table for one snapshot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingView {
    // dist[dest][node]
    dist: Vec<Vec<Distance>>,
}

impl RoutingView {
    /// Plain shortest hop counts; every node may relay.
    pub fn compute(snapshot: &TopologySnapshot) -> Self {
        Self::with_relays(snapshot, |_| true)
    }

    /// Shortest hop counts where only nodes accepted by `relays` may forward.
    /// The engine uses this with handhelds as the only relays, since access
    /// points neither bid nor re-auction.
    pub fn with_relays<F>(snapshot: &TopologySnapshot, relays: F) -> Self
    where
        F: Fn(NodeId) -> bool,
    {
        let dist = (0..snapshot.node_count()).map(|d| bfs_from(snapshot, NodeId(d as u32), &relays)).collect();
        Self { dist }
    }

    pub fn dist(&self, node: NodeId, dest: NodeId) -> Distance {
        self.dist[dest.index()][node.index()]
    }
}
