//! Append-only directed kNN graph used as the lifelong state archive.
//!
//! Each node points at (approximately) its k nearest stored neighbors. Queries
//! run a greedy descent from random restarts ([`KnnGraph::search`]); new
//! points are linked through the same search and then offered to nodes within
//! `depth` hops of their neighbors ([`KnnGraph::insert`]).
//!
//! Searches borrow the graph immutably and can run from many threads at once;
//! insertion needs `&mut self`, so a reader can never see a half-linked node.

mod io;

use std::collections::{HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashSet;

use crate::state::squared_distance;
use crate::{Error, Result, StatePoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub distance: f64,
}

fn by_distance_then_id(a: &Neighbor, b: &Neighbor) -> std::cmp::Ordering {
    a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub id: usize,
    pub point: StatePoint,
    /// Sorted ascending by distance, ties by id.
    pub edges: Vec<Neighbor>,
}

impl GraphNode {
    fn longest(&self) -> Option<&Neighbor> {
        self.edges.last()
    }
}

/// Greedy steps (R1), random restarts (R2) and insertion depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchConfig {
    pub greedy_steps: usize,
    pub restarts: usize,
    pub depth: usize,
}

impl SearchConfig {
    pub fn new(greedy_steps: usize, restarts: usize, depth: usize) -> Result<Self> {
        if greedy_steps == 0 || restarts == 0 || depth == 0 {
            return Err(Error::invalid(format!(
                "search parameters must be >= 1 (R1={greedy_steps}, R2={restarts}, depth={depth})"
            )));
        }
        Ok(SearchConfig {
            greedy_steps,
            restarts,
            depth,
        })
    }

    /// Upper bound on distance evaluations per query: `R1·R2·k + k`.
    pub fn touch_budget(&self, k: usize) -> usize {
        self.greedy_steps * self.restarts * k + k
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            greedy_steps: 20,
            restarts: 20,
            depth: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Up to k neighbors, ascending by distance, ties by id.
    pub neighbors: Vec<Neighbor>,
    /// Distinct nodes whose distance to the query was evaluated.
    pub touched: usize,
    /// Query distance of the current node at each step, per restart.
    /// Only filled by [`KnnGraph::search_traced`].
    pub descents: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct KnnGraph {
    k: usize,
    dim: Option<usize>,
    nodes: Vec<GraphNode>,
    seed: u64,
    rng: ChaCha8Rng,
}

impl PartialEq for KnnGraph {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k && self.nodes == other.nodes
    }
}

impl KnnGraph {
    pub fn new(k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("graph degree k must be >= 1"));
        }
        Ok(KnnGraph {
            k,
            dim: None,
            nodes: Vec::new(),
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> Option<&GraphNode> {
        self.nodes.get(id)
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &StatePoint> {
        self.nodes.iter().map(|n| &n.point)
    }

    fn check_dim(&self, point: &StatePoint) -> Result<()> {
        match self.dim {
            Some(d) if d != point.dim() => Err(Error::invalid(format!(
                "point has dimension {}, graph stores dimension {d}",
                point.dim()
            ))),
            _ => Ok(()),
        }
    }

    /// Approximate k nearest stored nodes to `query`.
    ///
    /// Each restart starts at a uniformly drawn node and repeatedly moves to
    /// the out-neighbor closest to the query, for at most R1 steps, stopping
    /// as soon as no neighbor improves on the current node. Every node whose
    /// distance was evaluated is a candidate for the answer. While the graph
    /// holds at most k nodes the answer is exact.
    pub fn search<R: Rng + ?Sized>(
        &self,
        query: &StatePoint,
        cfg: &SearchConfig,
        rng: &mut R,
    ) -> Result<SearchResult> {
        self.search_impl(query, cfg, rng, false)
    }

    /// [`search`](Self::search) that also records each descent.
    pub fn search_traced<R: Rng + ?Sized>(
        &self,
        query: &StatePoint,
        cfg: &SearchConfig,
        rng: &mut R,
    ) -> Result<SearchResult> {
        self.search_impl(query, cfg, rng, true)
    }

    fn search_impl<R: Rng + ?Sized>(
        &self,
        query: &StatePoint,
        cfg: &SearchConfig,
        rng: &mut R,
        trace: bool,
    ) -> Result<SearchResult> {
        if self.nodes.is_empty() {
            return Err(Error::EmptyGraph);
        }
        self.check_dim(query)?;
        let n = self.nodes.len();
        if n <= self.k {
            let mut neighbors: Vec<Neighbor> = self
                .nodes
                .iter()
                .map(|node| Neighbor {
                    id: node.id,
                    distance: node.point.distance(query),
                })
                .collect();
            neighbors.sort_by(by_distance_then_id);
            return Ok(SearchResult {
                neighbors,
                touched: n,
                descents: Vec::new(),
            });
        }

        let budget = cfg.touch_budget(self.k);
        SCRATCH.with(|scratch| {
            let mut seen = scratch.borrow_mut();
            seen.begin(n);
            self.descend(query, cfg, rng, trace, budget, &mut seen)
        })
    }

    fn descend<R: Rng + ?Sized>(
        &self,
        query: &StatePoint,
        cfg: &SearchConfig,
        rng: &mut R,
        trace: bool,
        budget: usize,
        seen: &mut Touched,
    ) -> Result<SearchResult> {
        let n = self.nodes.len();
        let mut descents = Vec::new();
        let dist = |id: usize, seen: &mut Touched| -> Option<f64> {
            if let Some(d) = seen.get(id) {
                return Some(d);
            }
            if seen.len() >= budget {
                return None;
            }
            let d = squared_distance(&self.nodes[id].point, query).sqrt();
            seen.insert(id, d);
            Some(d)
        };

        'restarts: for _ in 0..cfg.restarts {
            let start = rng.random_range(0..n);
            let Some(mut current_dist) = dist(start, seen) else {
                break;
            };
            let mut current = start;
            let mut path = trace.then(|| vec![current_dist]);
            for _ in 0..cfg.greedy_steps {
                let mut best: Option<Neighbor> = None;
                for edge in &self.nodes[current].edges {
                    let Some(d) = dist(edge.id, seen) else {
                        if let Some(p) = path.take() {
                            descents.push(p);
                        }
                        break 'restarts;
                    };
                    let cand = Neighbor {
                        id: edge.id,
                        distance: d,
                    };
                    if best.is_none_or(|b| by_distance_then_id(&cand, &b).is_lt()) {
                        best = Some(cand);
                    }
                }
                match best {
                    Some(b) if b.distance < current_dist => {
                        current = b.id;
                        current_dist = b.distance;
                        if let Some(p) = path.as_mut() {
                            p.push(current_dist);
                        }
                    }
                    _ => break,
                }
            }
            if let Some(p) = path {
                descents.push(p);
            }
        }

        let touched = seen.len();
        let mut candidates: Vec<Neighbor> = seen.entries().collect();
        if candidates.len() > self.k {
            candidates.select_nth_unstable_by(self.k - 1, by_distance_then_id);
            candidates.truncate(self.k);
        }
        candidates.sort_by(by_distance_then_id);
        Ok(SearchResult {
            neighbors: candidates,
            touched,
            descents,
        })
    }

    /// Appends `point` and links it into the graph. Returns the new id.
    ///
    /// The first k+1 nodes form a complete graph. Afterwards the new node's
    /// out-edges come from [`search`](Self::search), and every node reachable
    /// within `depth` hops of those neighbors replaces its longest edge with
    /// one to the new node when the new node is closer.
    pub fn insert(&mut self, point: StatePoint, cfg: &SearchConfig) -> Result<usize> {
        self.check_dim(&point)?;
        let id = self.nodes.len();
        if id == 0 {
            self.dim = Some(point.dim());
            self.nodes.push(GraphNode {
                id,
                point,
                edges: Vec::new(),
            });
            return Ok(id);
        }

        if id <= self.k {
            let mut edges = Vec::with_capacity(id);
            for node in &mut self.nodes {
                let distance = node.point.distance(&point);
                edges.push(Neighbor {
                    id: node.id,
                    distance,
                });
                node.edges.push(Neighbor { id, distance });
                node.edges.sort_by(by_distance_then_id);
            }
            edges.sort_by(by_distance_then_id);
            self.nodes.push(GraphNode { id, point, edges });
            return Ok(id);
        }

        let mut rng = std::mem::replace(&mut self.rng, ChaCha8Rng::seed_from_u64(0));
        let found = self.search(&point, cfg, &mut rng);
        self.rng = rng;
        let edges = found?.neighbors;

        let mut frontier: VecDeque<usize> = edges.iter().map(|e| e.id).collect();
        let mut visited: FxHashSet<usize> = frontier.iter().copied().collect();
        for _ in 0..cfg.depth {
            let mut next = VecDeque::new();
            while let Some(x) = frontier.pop_front() {
                let node = &mut self.nodes[x];
                for e in &node.edges {
                    if visited.insert(e.id) {
                        next.push_back(e.id);
                    }
                }
                let distance = node.point.distance(&point);
                let closer = node.longest().is_some_and(|l| distance < l.distance);
                if closer && node.edges.iter().all(|e| e.id != id) {
                    node.edges.pop();
                    let at = node
                        .edges
                        .partition_point(|e| by_distance_then_id(e, &Neighbor { id, distance }).is_lt());
                    node.edges.insert(at, Neighbor { id, distance });
                }
            }
            frontier = next;
        }

        self.nodes.push(GraphNode { id, point, edges });
        Ok(id)
    }

    /// Fraction of approximate neighbors that are true neighbors, averaged
    /// over `queries`.
    pub fn recall_at_k<R: Rng + ?Sized>(
        &self,
        queries: &[StatePoint],
        cfg: &SearchConfig,
        rng: &mut R,
    ) -> Result<f64> {
        if queries.is_empty() {
            return Err(Error::EmptyInput("recall queries"));
        }
        let points: Vec<StatePoint> = self.points().cloned().collect();
        let mut total = 0.0;
        for q in queries {
            let approx = self.search(q, cfg, rng)?.neighbors;
            let exact = brute_force_knn(&points, q, self.k)?;
            let exact_ids: HashSet<usize> = exact.iter().map(|n| n.id).collect();
            let hits = approx.iter().filter(|n| exact_ids.contains(&n.id)).count();
            total += hits as f64 / exact.len() as f64;
        }
        Ok(total / queries.len() as f64)
    }

    /// Mean fraction of each node's out-edges that belong to its exact
    /// k-nearest set (self excluded). Quadratic in node count.
    pub fn edge_accuracy(&self) -> f64 {
        let n = self.nodes.len();
        if n < 2 {
            return 1.0;
        }
        let kk = self.k.min(n - 1);
        let mut total = 0.0;
        let mut dists: Vec<Neighbor> = Vec::with_capacity(n - 1);
        for node in &self.nodes {
            dists.clear();
            dists.extend(self.nodes.iter().filter(|o| o.id != node.id).map(|o| Neighbor {
                id: o.id,
                distance: o.point.distance(&node.point),
            }));
            dists.select_nth_unstable_by(kk - 1, by_distance_then_id);
            let exact: HashSet<usize> = dists[..kk].iter().map(|n| n.id).collect();
            let hits = node.edges.iter().filter(|e| exact.contains(&e.id)).count();
            total += hits as f64 / kk as f64;
        }
        total / n as f64
    }
}

/// Nodes whose distance a search has evaluated, reused across searches on
/// the same thread. A node counts as touched when its stamp equals the
/// current epoch.
struct Touched {
    stamp: Vec<u32>,
    dist: Vec<f64>,
    order: Vec<usize>,
    epoch: u32,
}

impl Touched {
    fn begin(&mut self, n: usize) {
        if self.stamp.len() < n {
            self.stamp.resize(n, 0);
            self.dist.resize(n, 0.0);
        }
        self.order.clear();
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    fn get(&self, id: usize) -> Option<f64> {
        (self.stamp[id] == self.epoch).then(|| self.dist[id])
    }

    fn insert(&mut self, id: usize, d: f64) {
        self.stamp[id] = self.epoch;
        self.dist[id] = d;
        self.order.push(id);
    }

    fn len(&self) -> usize {
        self.order.len()
    }

    fn entries(&self) -> impl Iterator<Item = Neighbor> + '_ {
        self.order.iter().map(|&id| Neighbor {
            id,
            distance: self.dist[id],
        })
    }
}

thread_local! {
    static SCRATCH: std::cell::RefCell<Touched> = const {
        std::cell::RefCell::new(Touched {
            stamp: Vec::new(),
            dist: Vec::new(),
            order: Vec::new(),
            epoch: 0,
        })
    };
}

/// `n` points of a momentum random walk in `d` dimensions:
/// `v ← 0.9·v + U(−0.1, 0.1)`, `p ← p + v` per coordinate, starting at rest at
/// the origin.
pub fn smooth_random_walk(seed: u64, n: usize, d: usize) -> Vec<StatePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos = vec![0.0; d];
    let mut vel = vec![0.0; d];
    (0..n)
        .map(|_| {
            for (p, v) in pos.iter_mut().zip(vel.iter_mut()) {
                *v = 0.9 * *v + rng.random_range(-0.1..0.1);
                *p += *v;
            }
            StatePoint::new(pos.clone())
        })
        .collect()
}

/// Exact k nearest points to `query`, ascending by distance, ties by index.
pub fn brute_force_knn(points: &[StatePoint], query: &StatePoint, k: usize) -> Result<Vec<Neighbor>> {
    if points.is_empty() {
        return Err(Error::EmptyInput("point set"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    let mut all: Vec<Neighbor> = points
        .iter()
        .enumerate()
        .map(|(id, p)| {
            if p.dim() != query.dim() {
                return Err(Error::invalid(format!(
                    "point {id} has dimension {}, query has {}",
                    p.dim(),
                    query.dim()
                )));
            }
            Ok(Neighbor {
                id,
                distance: squared_distance(p, query).sqrt(),
            })
        })
        .collect::<Result<_>>()?;
    let k = k.min(all.len());
    if k < all.len() {
        all.select_nth_unstable_by(k - 1, by_distance_then_id);
        all.truncate(k);
    }
    all.sort_by(by_distance_then_id);
    Ok(all)
}

#[cfg(test)]
mod tests;
