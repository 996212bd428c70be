use std::collections::HashMap;

use rand::Rng;

use crate::knn_graph::{KnnGraph, SearchConfig};
use crate::rewards::{lifelong_reward, novelty, RewardConfig};
use crate::{Error, Result, StateKey, StatePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemoryBackend {
    /// Approximate kNN graph searched greedily.
    Graph,
    /// Exact scan over distinct stored states, counted with multiplicity.
    Exact,
}

/// Every stored state, kept as distinct points with repeat counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExactMemory {
    points: Vec<StatePoint>,
    counts: Vec<u64>,
    index: HashMap<StateKey, usize>,
    total: usize,
}

impl ExactMemory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stored states, repeats included.
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn distinct(&self) -> &[StatePoint] {
        &self.points
    }

    pub fn count(&self, s: &StatePoint) -> u64 {
        self.index.get(&s.key()).map_or(0, |&i| self.counts[i])
    }

    pub fn insert(&mut self, s: StatePoint) -> Result<()> {
        if let Some(first) = self.points.first() {
            if first.dim() != s.dim() {
                return Err(Error::invalid(format!(
                    "state has dimension {}, memory holds {}",
                    s.dim(),
                    first.dim()
                )));
            }
        }
        match self.index.get(&s.key()) {
            Some(&i) => self.counts[i] += 1,
            None => {
                self.index.insert(s.key(), self.points.len());
                self.points.push(s);
                self.counts.push(1);
            }
        }
        self.total += 1;
        Ok(())
    }

    /// Ascending distances to the `k` nearest stored states; a state stored
    /// `c` times contributes `c` entries.
    pub fn knn_distances(&self, s: &StatePoint, k: usize) -> Vec<f64> {
        let mut by_dist: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.distance(s), i))
            .collect();
        by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut out = Vec::with_capacity(k);
        for (d, i) in by_dist {
            let take = (self.counts[i] as usize).min(k - out.len());
            out.extend(std::iter::repeat_n(d, take));
            if out.len() == k {
                break;
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub enum LifelongMemory {
    Graph(KnnGraph),
    Exact(ExactMemory),
}

impl LifelongMemory {
    pub fn new(backend: MemoryBackend, graph_degree: usize, seed: u64) -> Result<Self> {
        Ok(match backend {
            MemoryBackend::Graph => LifelongMemory::Graph(KnnGraph::new(graph_degree, seed)?),
            MemoryBackend::Exact => LifelongMemory::Exact(ExactMemory::new()),
        })
    }

    pub fn len(&self) -> usize {
        match self {
            LifelongMemory::Graph(g) => g.len(),
            LifelongMemory::Exact(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&mut self, s: StatePoint, search: &SearchConfig) -> Result<()> {
        match self {
            LifelongMemory::Graph(g) => g.insert(s, search).map(|_| ()),
            LifelongMemory::Exact(m) => m.insert(s),
        }
    }

    pub fn reward<R: Rng + ?Sized>(
        &self,
        s: &StatePoint,
        search: &SearchConfig,
        cfg: &RewardConfig,
        rng: &mut R,
    ) -> Result<f64> {
        match self {
            LifelongMemory::Graph(g) => lifelong_reward(g, s, search, cfg, rng),
            LifelongMemory::Exact(m) if m.is_empty() => Ok(cfg.empty_memory_reward),
            LifelongMemory::Exact(m) => Ok(novelty(&m.knn_distances(s, cfg.k_lifelong), cfg.lifelong_distance)),
        }
    }

    /// The memory as a kNN graph. An exact memory is rebuilt from its
    /// distinct states in first-seen order.
    pub fn to_graph(&self, graph_degree: usize, seed: u64, search: &SearchConfig) -> Result<KnnGraph> {
        match self {
            LifelongMemory::Graph(g) => Ok(g.clone()),
            LifelongMemory::Exact(m) => {
                let mut g = KnnGraph::new(graph_degree, seed)?;
                for p in m.distinct() {
                    g.insert(p.clone(), search)?;
                }
                Ok(g)
            }
        }
    }
}
