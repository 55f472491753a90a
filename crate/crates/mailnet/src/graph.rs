//! Directed communication graph and connectivity metrics: unique-contact
//! degree, shortest-path betweenness (Brandes), and per-copy message
//! counts.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{ActorDirectory, ActorId, MessageEvent};

/// Directed multigraph collapsed to arcs with copy counts.
#[derive(Debug, Clone, Default)]
pub struct CommGraph {
    nodes: BTreeSet<ActorId>,
    arcs: BTreeMap<(ActorId, ActorId), u64>,
}

/// Per-actor connectivity metrics.
#[derive(Debug, Clone, Serialize)]
pub struct ConnectivityVector {
    pub degree: u32,
    pub betweenness: f64,
    pub sent: u64,
    pub received: u64,
    pub received_minus_sent: i64,
}

/// Aggregate normalized events into one arc per ordered dyad.
pub fn build_graph(events: &[MessageEvent]) -> CommGraph {
    let mut graph = CommGraph::default();
    for e in events {
        debug_assert_ne!(e.sender, e.recipient, "self-loops must be normalized away");
        graph.nodes.insert(e.sender);
        graph.nodes.insert(e.recipient);
        *graph.arcs.entry((e.sender, e.recipient)).or_insert(0) += 1;
    }
    graph
}

impl CommGraph {
    /// Add actors as (possibly isolated) nodes; the analysis cohort must be
    /// covered by the graph even when some members never emailed.
    pub fn ensure_nodes<I: IntoIterator<Item = ActorId>>(&mut self, actors: I) {
        self.nodes.extend(actors);
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn total_copies(&self) -> u64 {
        self.arcs.values().sum()
    }

    pub fn contains(&self, actor: ActorId) -> bool {
        self.nodes.contains(&actor)
    }

    pub fn nodes(&self) -> impl Iterator<Item = ActorId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn arcs(&self) -> impl Iterator<Item = (ActorId, ActorId, u64)> + '_ {
        self.arcs.iter().map(|(&(a, b), &c)| (a, b, c))
    }

    /// Direction-agnostic unique-neighbor count.
    pub fn degree(&self, actor: ActorId) -> Result<usize> {
        if !self.nodes.contains(&actor) {
            return Err(Error::UnknownActor(actor.0));
        }
        Ok(self.neighbor_sets().remove(&actor).map_or(0, |s| s.len()))
    }

    fn neighbor_sets(&self) -> BTreeMap<ActorId, BTreeSet<ActorId>> {
        let mut sets: BTreeMap<ActorId, BTreeSet<ActorId>> = BTreeMap::new();
        for &(a, b) in self.arcs.keys() {
            sets.entry(a).or_default().insert(b);
            sets.entry(b).or_default().insert(a);
        }
        sets
    }

    /// Degrees for every node (isolated nodes report 0).
    pub fn degrees(&self) -> BTreeMap<ActorId, u32> {
        let sets = self.neighbor_sets();
        self.nodes
            .iter()
            .map(|&n| (n, sets.get(&n).map_or(0, |s| s.len() as u32)))
            .collect()
    }

    /// Raw (unnormalized) shortest-path betweenness on the directed,
    /// unweighted graph via Brandes dependency accumulation; copy counts
    /// are ignored. `symmetrize` treats every arc as bidirectional for
    /// sensitivity analysis.
    ///
    /// Sources are processed in deterministic chunks and partial sums are
    /// reduced in chunk order, so the result is identical regardless of
    /// thread count.
    pub fn betweenness(&self, symmetrize: bool) -> BTreeMap<ActorId, f64> {
        let nodes: Vec<ActorId> = self.nodes.iter().copied().collect();
        let n = nodes.len();
        let index: HashMap<ActorId, usize> =
            nodes.iter().enumerate().map(|(i, &a)| (a, i)).collect();

        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
        for &(a, b) in self.arcs.keys() {
            let (ia, ib) = (index[&a] as u32, index[&b] as u32);
            adj[ia as usize].push(ib);
            if symmetrize {
                adj[ib as usize].push(ia);
            }
        }
        if symmetrize {
            for list in &mut adj {
                list.sort_unstable();
                list.dedup();
            }
        }

        let chunk_size = 128;
        let sources: Vec<usize> = (0..n).collect();
        let partials: Vec<Vec<f64>> = sources
            .par_chunks(chunk_size)
            .map(|chunk| {
                let mut local = vec![0.0f64; n];
                for &s in chunk {
                    brandes_from_source(s, &adj, &mut local);
                }
                local
            })
            .collect();

        let mut centrality = vec![0.0f64; n];
        for partial in partials {
            for (c, p) in centrality.iter_mut().zip(partial) {
                *c += p;
            }
        }
        nodes
            .into_iter()
            .zip(centrality)
            .collect()
    }
}

/// One single-source BFS plus dependency back-propagation.
fn brandes_from_source(s: usize, adj: &[Vec<u32>], centrality: &mut [f64]) {
    let n = adj.len();
    let mut stack: Vec<u32> = Vec::with_capacity(n);
    let mut predecessors: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![-1i32; n];
    sigma[s] = 1.0;
    dist[s] = 0;
    let mut queue = VecDeque::new();
    queue.push_back(s as u32);

    while let Some(v) = queue.pop_front() {
        stack.push(v);
        let dv = dist[v as usize];
        for &w in &adj[v as usize] {
            let wi = w as usize;
            if dist[wi] < 0 {
                dist[wi] = dv + 1;
                queue.push_back(w);
            }
            if dist[wi] == dv + 1 {
                sigma[wi] += sigma[v as usize];
                predecessors[wi].push(v);
            }
        }
    }

    let mut delta = vec![0.0f64; n];
    while let Some(w) = stack.pop() {
        let wi = w as usize;
        for &v in &predecessors[wi] {
            let vi = v as usize;
            delta[vi] += (sigma[vi] / sigma[wi]) * (1.0 + delta[wi]);
        }
        if wi != s {
            centrality[wi] += delta[wi];
        }
    }
}

/// Dyadic-copy message counts for one actor; absent actors count (0, 0, 0).
pub fn message_counts(events: &[MessageEvent], actor: ActorId) -> (u64, u64, i64) {
    let mut sent = 0u64;
    let mut received = 0u64;
    for e in events {
        if e.sender == actor {
            sent += 1;
        }
        if e.recipient == actor {
            received += 1;
        }
    }
    (sent, received, received as i64 - sent as i64)
}

/// Message counts for every node of the graph in one pass.
pub fn message_counts_all(
    events: &[MessageEvent],
    graph: &CommGraph,
) -> BTreeMap<ActorId, (u64, u64, i64)> {
    let mut counts: BTreeMap<ActorId, (u64, u64)> =
        graph.nodes().map(|n| (n, (0, 0))).collect();
    for e in events {
        if let Some(c) = counts.get_mut(&e.sender) {
            c.0 += 1;
        }
        if let Some(c) = counts.get_mut(&e.recipient) {
            c.1 += 1;
        }
    }
    counts
        .into_iter()
        .map(|(a, (s, r))| (a, (s, r, r as i64 - s as i64)))
        .collect()
}

/// Assemble the full connectivity vector for every node.
pub fn connectivity_all(
    graph: &CommGraph,
    events: &[MessageEvent],
    symmetrize_betweenness: bool,
) -> BTreeMap<ActorId, ConnectivityVector> {
    let degrees = graph.degrees();
    let betweenness = graph.betweenness(symmetrize_betweenness);
    let counts = message_counts_all(events, graph);
    degrees
        .into_iter()
        .map(|(actor, degree)| {
            let b = betweenness.get(&actor).copied().unwrap_or(0.0);
            let (sent, received, balance) = counts.get(&actor).copied().unwrap_or((0, 0, 0));
            (
                actor,
                ConnectivityVector {
                    degree,
                    betweenness: b,
                    sent,
                    received,
                    received_minus_sent: balance,
                },
            )
        })
        .collect()
}

/// Dump arcs as `sender,recipient,count` in canonical order.
pub fn write_graph_dump<W: Write>(graph: &CommGraph, dir: &ActorDirectory, mut w: W) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Config(format!("graph dump write failed: {e}"));
    writeln!(w, "sender,recipient,count").map_err(io_err)?;
    for (a, b, c) in graph.arcs() {
        writeln!(
            w,
            "{},{},{}",
            dir.profile(a)?.address,
            dir.profile(b)?.address,
            c
        )
        .map_err(io_err)?;
    }
    Ok(())
}
