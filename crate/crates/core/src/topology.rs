//! Communication graphs and the neighbor-cover calculus.
//!
//! A [`Graph`] is undirected, simple, and indexed densely by [`AgentId`].
//! For an agent `i` and a neighbor `j`, the *non-adjacent neighbors*
//! `N_i^j` are the neighbors of `i` that are neither `j` nor adjacent to `j`:
//! an estimate received from any of them still looks random to `j`, so its
//! noise can stand in for part of the noise `i` owes `j`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::seed::Stream;

/// Dense agent index in `[0, n)`.
pub type AgentId = usize;

/// Default number of resamples before [`Graph::random`] gives up.
pub const DEFAULT_RETRY_CAP: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("graph needs at least 2 agents, got {0}")]
    TooFewAgents(usize),
    #[error("connection rate must be in (0, 1], got {0}")]
    BadRate(f64),
    #[error("could not generate connected graph with n={n}, rate={rate} after {retries} resamples")]
    NotConnected { n: usize, rate: f64, retries: usize },
    #[error("invalid topology parameter: {0}")]
    BadParam(String),
    #[error("self-loop at agent {0}")]
    SelfLoop(AgentId),
    #[error("agent {agent} out of range for n={n}")]
    OutOfRange { agent: AgentId, n: usize },
    #[error("agent {j} is not a neighbor of agent {i}")]
    NotNeighbor { i: AgentId, j: AgentId },
    #[error("edge list parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Undirected communication topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<BTreeSet<AgentId>>,
}

impl Graph {
    /// An edgeless graph on `n` agents.
    pub fn empty(n: usize) -> Self {
        Graph { adj: vec![BTreeSet::new(); n] }
    }

    /// Builds a graph from unordered pairs. Duplicate pairs are merged.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (AgentId, AgentId)>,
    ) -> Result<Self, TopologyError> {
        let mut g = Graph::empty(n);
        for (i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    fn add_edge(&mut self, i: AgentId, j: AgentId) -> Result<(), TopologyError> {
        let n = self.n();
        for a in [i, j] {
            if a >= n {
                return Err(TopologyError::OutOfRange { agent: a, n });
            }
        }
        if i == j {
            return Err(TopologyError::SelfLoop(i));
        }
        self.adj[i].insert(j);
        self.adj[j].insert(i);
        Ok(())
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Graph::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                g.adj[i].insert(j);
                g.adj[j].insert(i);
            }
        }
        g
    }

    /// Erdős–Rényi sample conditioned on connectivity, with the default
    /// retry cap.
    pub fn random(n: usize, connection_rate: f64, seed: u64) -> Result<Self, TopologyError> {
        Self::random_with_retries(n, connection_rate, seed, DEFAULT_RETRY_CAP)
    }

    /// Samples each unordered pair independently with probability
    /// `connection_rate`, resampling from the same stream until the result is
    /// connected or `max_retries` resamples have failed.
    pub fn random_with_retries(
        n: usize,
        connection_rate: f64,
        seed: u64,
        max_retries: usize,
    ) -> Result<Self, TopologyError> {
        if n < 2 {
            return Err(TopologyError::TooFewAgents(n));
        }
        if !(connection_rate > 0.0 && connection_rate <= 1.0) {
            return Err(TopologyError::BadRate(connection_rate));
        }
        let mut rng = Stream::seed_from_u64(seed);
        for _ in 0..=max_retries {
            let mut g = Graph::empty(n);
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random::<f64>() < connection_rate {
                        g.adj[i].insert(j);
                        g.adj[j].insert(i);
                    }
                }
            }
            if g.is_connected() {
                return Ok(g);
            }
        }
        Err(TopologyError::NotConnected {
            n,
            rate: connection_rate,
            retries: max_retries,
        })
    }

    /// Deterministic named shape (the mesh draws its chords from `seed`).
    pub fn named(kind: &Topology, n: usize, seed: u64) -> Result<Self, TopologyError> {
        if n < 2 {
            return Err(TopologyError::TooFewAgents(n));
        }
        match *kind {
            Topology::Ring => Ok(ring(n)),
            Topology::Complete => Ok(Graph::complete(n)),
            Topology::Star { hubs } => {
                if hubs == 0 || hubs > n {
                    return Err(TopologyError::BadParam(format!(
                        "star hub count must be in [1, {n}], got {hubs}"
                    )));
                }
                let mut g = Graph::empty(n);
                for a in 0..hubs {
                    for b in (a + 1)..hubs {
                        g.add_edge(a, b)?;
                    }
                }
                for leaf in hubs..n {
                    g.add_edge((leaf - hubs) % hubs, leaf)?;
                }
                Ok(g)
            }
            Topology::Tree { branching } => {
                if branching == 0 {
                    return Err(TopologyError::BadParam(
                        "tree branching factor must be at least 1".into(),
                    ));
                }
                let mut g = Graph::empty(n);
                for child in 1..n {
                    g.add_edge((child - 1) / branching, child)?;
                }
                Ok(g)
            }
            Topology::Mesh { density } => {
                if !(0.0..=1.0).contains(&density) {
                    return Err(TopologyError::BadParam(format!(
                        "mesh density must be in [0, 1], got {density}"
                    )));
                }
                let mut g = ring(n);
                let mut rng = Stream::seed_from_u64(seed);
                for i in 0..n {
                    for j in (i + 1)..n {
                        if !g.has_edge(i, j) && rng.random::<f64>() < density {
                            g.add_edge(i, j)?;
                        }
                    }
                }
                Ok(g)
            }
            Topology::Random { rate } => Graph::random(n, rate, seed),
        }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, i: AgentId) -> &BTreeSet<AgentId> {
        &self.adj[i]
    }

    pub fn degree(&self, i: AgentId) -> usize {
        self.adj[i].len()
    }

    pub fn has_edge(&self, i: AgentId, j: AgentId) -> bool {
        i < self.n() && self.adj[i].contains(&j)
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (AgentId, AgentId)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.range((i + 1)..).map(move |&j| (i, j)))
    }

    /// Breadth-first reachability from agent 0.
    pub fn is_connected(&self) -> bool {
        let n = self.n();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    reached += 1;
                    queue.push_back(v);
                }
            }
        }
        reached == n
    }

    /// `N_i^j = N_i \ ({j} ∪ N_j)`.
    pub fn non_adjacent_neighbors(
        &self,
        i: AgentId,
        j: AgentId,
    ) -> Result<BTreeSet<AgentId>, TopologyError> {
        if !self.has_edge(i, j) {
            return Err(TopologyError::NotNeighbor { i, j });
        }
        Ok(self.adj[i]
            .iter()
            .copied()
            .filter(|&m| m != j && !self.adj[j].contains(&m))
            .collect())
    }

    /// Greedy cover of `N_i` with helpers drawn uniformly without replacement
    /// from `rng`.
    pub fn cover_neighbors<R: Rng + ?Sized>(&self, i: AgentId, rng: &mut R) -> CoverPlan {
        let mut order: Vec<AgentId> = self.adj[i].iter().copied().collect();
        order.shuffle(rng);
        self.cover_in_order(i, &order)
    }

    /// Greedy cover of `N_i` that tries helpers in the given order.
    ///
    /// Each helper `k` takes every still-uncovered member of `N_i^k` as its
    /// targets; helpers that would cover nothing are skipped. The loop stops
    /// once every neighbor is covered or the order is exhausted.
    pub fn cover_in_order(&self, i: AgentId, order: &[AgentId]) -> CoverPlan {
        let mut remaining: BTreeSet<AgentId> = self.adj[i].clone();
        let mut assignments = Vec::new();
        for &k in order {
            if remaining.is_empty() {
                break;
            }
            if !self.has_edge(i, k) {
                continue;
            }
            let targets: BTreeSet<AgentId> = self.adj[i]
                .iter()
                .copied()
                .filter(|&m| m != k && !self.adj[k].contains(&m) && remaining.contains(&m))
                .collect();
            if targets.is_empty() {
                continue;
            }
            for t in &targets {
                remaining.remove(t);
            }
            assignments.push(Assignment { helper: k, targets });
        }
        CoverPlan {
            assignments,
            uncovered: remaining,
        }
    }

    /// Plain-text edge list: `n` on the first line, then one `i j` per line
    /// with `i < j`.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{}\n", self.n());
        for (i, j) in self.edges() {
            out.push_str(&format!("{i} {j}\n"));
        }
        out
    }

    pub fn parse_edge_list(text: &str) -> Result<Self, TopologyError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(no, l)| (no + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (no, first) = lines.next().ok_or(TopologyError::Parse {
            line: 1,
            msg: "missing agent count".into(),
        })?;
        let n: usize = first.parse().map_err(|_| TopologyError::Parse {
            line: no,
            msg: format!("bad agent count {first:?}"),
        })?;
        let mut g = Graph::empty(n);
        for (no, line) in lines {
            let mut parts = line.split_whitespace();
            let mut field = || -> Result<AgentId, TopologyError> {
                parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or(TopologyError::Parse {
                        line: no,
                        msg: format!("expected `i j`, got {line:?}"),
                    })
            };
            let (i, j) = (field()?, field()?);
            g.add_edge(i, j)?;
        }
        Ok(g)
    }
}

fn ring(n: usize) -> Graph {
    let mut g = Graph::empty(n);
    for i in 0..n {
        let j = (i + 1) % n;
        if i != j {
            g.adj[i].insert(j);
            g.adj[j].insert(i);
        }
    }
    g
}

/// Named topology shapes.
#[derive(Debug, Clone, PartialEq)]
pub enum Topology {
    Ring,
    /// `hubs` hub agents form a clique; leaves attach round-robin to hubs.
    Star { hubs: usize },
    /// Complete `branching`-ary tree in breadth-first numbering.
    Tree { branching: usize },
    /// Ring plus random chords, each extra pair kept with probability `density`.
    Mesh { density: f64 },
    Complete,
    /// Connected Erdős–Rényi graph.
    Random { rate: f64 },
}

impl Topology {
    pub fn name(&self) -> &'static str {
        match self {
            Topology::Ring => "ring",
            Topology::Star { .. } => "star",
            Topology::Tree { .. } => "tree",
            Topology::Mesh { .. } => "mesh",
            Topology::Complete => "complete",
            Topology::Random { .. } => "random",
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One helper and the neighbors whose estimates it masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub helper: AgentId,
    pub targets: BTreeSet<AgentId>,
}

/// Result of the greedy neighbor cover for one agent.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CoverPlan {
    pub assignments: Vec<Assignment>,
    /// Neighbors that must receive full-scale noise.
    pub uncovered: BTreeSet<AgentId>,
}

impl CoverPlan {
    /// Helper assigned to `j`, if `j` is covered.
    pub fn helper_for(&self, j: AgentId) -> Option<AgentId> {
        self.assignments
            .iter()
            .find(|a| a.targets.contains(&j))
            .map(|a| a.helper)
    }

    pub fn covered_count(&self) -> usize {
        self.assignments.iter().map(|a| a.targets.len()).sum()
    }
}

impl FromStr for Graph {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Graph::parse_edge_list(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// A0–A1, A0–A2, A0–A3, A0–A4, A1–A4.
    fn five_agent_example() -> Graph {
        Graph::from_edges(5, [(0, 1), (0, 2), (0, 3), (0, 4), (1, 4)]).unwrap()
    }

    fn set(v: &[AgentId]) -> BTreeSet<AgentId> {
        v.iter().copied().collect()
    }

    #[test]
    fn two_agents_full_rate_is_single_edge() {
        for seed in 0..5 {
            let g = Graph::random(2, 1.0, seed).unwrap();
            assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1)]);
        }
    }

    #[test]
    fn thirty_agents_at_reference_rate_connect() {
        let g = Graph::random(30, 0.2, 7).unwrap();
        assert!(g.is_connected());
        for i in 0..30 {
            for &j in g.neighbors(i) {
                assert!(g.has_edge(j, i));
            }
        }
    }

    #[test]
    fn near_zero_rate_hits_retry_cap() {
        let err = Graph::random(5, 0.0001, 1).unwrap_err();
        assert!(matches!(err, TopologyError::NotConnected { retries: 1000, .. }));
        assert!(err.to_string().contains("could not generate connected graph"));
    }

    #[test]
    fn bad_random_params() {
        assert!(matches!(Graph::random(1, 0.5, 0), Err(TopologyError::TooFewAgents(1))));
        assert!(matches!(Graph::random(4, 0.0, 0), Err(TopologyError::BadRate(_))));
        assert!(matches!(Graph::random(4, 1.5, 0), Err(TopologyError::BadRate(_))));
    }

    #[test]
    fn named_shapes() {
        let ring4 = Graph::named(&Topology::Ring, 4, 0).unwrap();
        assert_eq!(
            ring4.edges().collect::<Vec<_>>(),
            vec![(0, 1), (0, 3), (1, 2), (2, 3)]
        );
        let star = Graph::named(&Topology::Star { hubs: 1 }, 5, 0).unwrap();
        assert_eq!(
            star.edges().collect::<Vec<_>>(),
            vec![(0, 1), (0, 2), (0, 3), (0, 4)]
        );
        let tree = Graph::named(&Topology::Tree { branching: 2 }, 7, 0).unwrap();
        assert_eq!(
            tree.edges().collect::<Vec<_>>(),
            vec![(0, 1), (0, 2), (1, 3), (1, 4), (2, 5), (2, 6)]
        );
    }

    #[test]
    fn two_hub_star() {
        let g = Graph::named(&Topology::Star { hubs: 2 }, 6, 0).unwrap();
        assert_eq!(
            g.edges().collect::<Vec<_>>(),
            vec![(0, 1), (0, 2), (0, 4), (1, 3), (1, 5)]
        );
        assert!(g.is_connected());
    }

    #[test]
    fn named_rejects_bad_params() {
        assert!(Graph::named(&Topology::Tree { branching: 0 }, 7, 0).is_err());
        assert!(Graph::named(&Topology::Star { hubs: 0 }, 7, 0).is_err());
        assert!(Graph::named(&Topology::Mesh { density: 2.0 }, 7, 0).is_err());
        assert!(Graph::named(&Topology::Ring, 1, 0).is_err());
    }

    #[test]
    fn mesh_contains_ring_and_is_deterministic() {
        let kind = Topology::Mesh { density: 0.3 };
        let a = Graph::named(&kind, 12, 5).unwrap();
        let b = Graph::named(&kind, 12, 5).unwrap();
        assert_eq!(a, b);
        for i in 0..12 {
            assert!(a.has_edge(i, (i + 1) % 12));
        }
        assert!(a.edge_count() > 12);
    }

    #[test]
    fn connectivity() {
        assert!(Graph::named(&Topology::Ring, 4, 0).unwrap().is_connected());
        let split = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert!(!split.is_connected());
    }

    #[test]
    fn rejects_self_loops_and_out_of_range() {
        assert_eq!(
            Graph::from_edges(3, [(1, 1)]).unwrap_err(),
            TopologyError::SelfLoop(1)
        );
        assert!(matches!(
            Graph::from_edges(3, [(0, 3)]),
            Err(TopologyError::OutOfRange { agent: 3, n: 3 })
        ));
    }

    #[test]
    fn non_adjacent_neighbors_of_example() {
        let g = five_agent_example();
        assert_eq!(g.non_adjacent_neighbors(0, 1).unwrap(), set(&[2, 3]));
        assert_eq!(g.non_adjacent_neighbors(0, 4).unwrap(), set(&[2, 3]));
        assert_eq!(g.non_adjacent_neighbors(0, 2).unwrap(), set(&[1, 3, 4]));
        assert_eq!(g.non_adjacent_neighbors(0, 3).unwrap(), set(&[1, 2, 4]));
        // A2 has A0 as its only neighbor.
        assert!(g.non_adjacent_neighbors(2, 0).unwrap().is_empty());
        assert_eq!(
            g.non_adjacent_neighbors(2, 3).unwrap_err(),
            TopologyError::NotNeighbor { i: 2, j: 3 }
        );
    }

    #[test]
    fn cover_example_order() {
        let g = five_agent_example();
        let plan = g.cover_in_order(0, &[2, 1, 3, 4]);
        assert_eq!(
            plan.assignments,
            vec![
                Assignment { helper: 2, targets: set(&[1, 3, 4]) },
                Assignment { helper: 1, targets: set(&[2]) },
            ]
        );
        assert!(plan.uncovered.is_empty());
        assert_eq!(plan.helper_for(4), Some(2));
    }

    #[test]
    fn cover_of_complete_graph_is_empty() {
        let g = Graph::complete(4);
        let mut rng = Stream::seed_from_u64(3);
        let plan = g.cover_neighbors(0, &mut rng);
        assert!(plan.assignments.is_empty());
        assert_eq!(plan.uncovered, set(&[1, 2, 3]));
    }

    #[test]
    fn edge_list_text_format() {
        let g = five_agent_example();
        let text = g.to_edge_list();
        assert_eq!(text, "5\n0 1\n0 2\n0 3\n0 4\n1 4\n");
        assert_eq!(text.parse::<Graph>().unwrap(), g);
        assert!(Graph::parse_edge_list("3\n0 x\n").is_err());
        assert!(Graph::parse_edge_list("").is_err());
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (2usize..12)
            .prop_flat_map(|n| {
                let pairs = n * (n - 1) / 2;
                (Just(n), proptest::collection::vec(any::<bool>(), pairs))
            })
            .prop_map(|(n, bits)| {
                let mut g = Graph::empty(n);
                let mut it = bits.into_iter();
                for i in 0..n {
                    for j in (i + 1)..n {
                        if it.next().unwrap() {
                            g.add_edge(i, j).unwrap();
                        }
                    }
                }
                g
            })
    }

    proptest! {
        #[test]
        fn non_adjacent_sets_exclude_j_and_its_neighbors(g in arb_graph()) {
            for i in 0..g.n() {
                for &j in g.neighbors(i) {
                    let s = g.non_adjacent_neighbors(i, j).unwrap();
                    prop_assert!(!s.contains(&j));
                    prop_assert!(s.is_subset(g.neighbors(i)));
                    prop_assert!(s.is_disjoint(g.neighbors(j)));
                }
            }
        }

        #[test]
        fn cover_partitions_neighbors_and_is_valid(g in arb_graph(), seed in any::<u64>()) {
            let mut rng = Stream::seed_from_u64(seed);
            for i in 0..g.n() {
                let plan = g.cover_neighbors(i, &mut rng);
                let mut seen = plan.uncovered.clone();
                for a in &plan.assignments {
                    prop_assert!(g.has_edge(i, a.helper));
                    for &t in &a.targets {
                        prop_assert!(t != a.helper);
                        prop_assert!(!g.has_edge(t, a.helper));
                        prop_assert!(g.has_edge(i, t));
                        prop_assert!(seen.insert(t), "target {} covered twice", t);
                    }
                }
                prop_assert_eq!(&seen, g.neighbors(i));
                // Neighbors whose N_i^j is empty can never be targets.
                for &j in g.neighbors(i) {
                    let coverable = g.neighbors(i).iter().any(|&k| {
                        k != j && !g.has_edge(j, k)
                    });
                    if !coverable {
                        prop_assert!(plan.uncovered.contains(&j));
                    }
                }
            }
        }

        #[test]
        fn random_graphs_are_symmetric_and_deterministic(
            n in 2usize..20, rate in 0.3f64..1.0, seed in any::<u64>()
        ) {
            let a = Graph::random(n, rate, seed).unwrap();
            let b = Graph::random(n, rate, seed).unwrap();
            prop_assert_eq!(a.to_edge_list(), b.to_edge_list());
            prop_assert!(a.is_connected());
            for i in 0..n {
                prop_assert!(!a.has_edge(i, i));
                for &j in a.neighbors(i) {
                    prop_assert!(a.has_edge(j, i));
                }
            }
        }

        #[test]
        fn edge_list_round_trips(g in arb_graph()) {
            prop_assert_eq!(Graph::parse_edge_list(&g.to_edge_list()).unwrap(), g);
        }
    }
}
