//! Tabular Q-learning and the off-policy exploration loop.
//!
//! [`run_element`] steps an [`Environment`] with an ε-greedy policy, stores
//! encoded states in a lifelong memory during the scheduled update windows,
//! assigns episodic rewards when an episode closes, and trains the Q-table
//! from replayed transitions whose lifelong reward is recomputed every time
//! they are sampled.

mod memory;

pub use memory::{ExactMemory, LifelongMemory, MemoryBackend};

use std::collections::{HashMap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoder::FixedEncoder;
use crate::entropy::Estimator;
use crate::envs::{discretize, Environment};
use crate::knn_graph::SearchConfig;
use crate::metrics::{eval_episode_entropy, CoverageCounter, EpisodeRecord, Grid, RewardSnapshot, RunLog};
use crate::rewards::{assign_episodic_rewards, combine_rewards, EpisodicMode, EpisodicRewardTable, RewardConfig};
use crate::{Episode, Error, Result, StateKey, StatePoint};

/// State-action values keyed by a discrete state id. Unvisited entries are 0.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    num_actions: usize,
    learning_rate: f64,
    gamma: f64,
    values: HashMap<u64, Vec<f64>>,
}

impl QTable {
    pub fn new(num_actions: usize, learning_rate: f64, gamma: f64) -> Result<Self> {
        if num_actions == 0 {
            return Err(Error::invalid("action set must be nonempty"));
        }
        if !(learning_rate > 0.0 && learning_rate <= 1.0) {
            return Err(Error::invalid(format!("learning_rate must be in (0, 1], got {learning_rate}")));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::invalid(format!("gamma must be in [0, 1), got {gamma}")));
        }
        Ok(QTable {
            num_actions,
            learning_rate,
            gamma,
            values: HashMap::new(),
        })
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, s: u64, a: usize) -> f64 {
        self.values.get(&s).map_or(0.0, |row| row[a])
    }

    pub fn max_value(&self, s: u64) -> f64 {
        self.values
            .get(&s)
            .map_or(0.0, |row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Greedy action; ties go to the smallest index.
    pub fn greedy(&self, s: u64) -> usize {
        let Some(row) = self.values.get(&s) else { return 0 };
        let mut best = 0;
        for (a, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    /// Number of states with at least one update.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `Q(s,a) ← Q(s,a) + lr·(r + γ·max Q(s',·) − Q(s,a))`.
pub fn q_update(q: &mut QTable, s: u64, a: usize, r: f64, s_next: u64) -> Result<()> {
    if !r.is_finite() {
        return Err(Error::invalid(format!("reward must be finite, got {r}")));
    }
    if a >= q.num_actions {
        return Err(Error::invalid(format!("action {a} out of range 0..{}", q.num_actions)));
    }
    let target = r + q.gamma * q.max_value(s_next);
    let lr = q.learning_rate;
    let n = q.num_actions;
    let cell = &mut q.values.entry(s).or_insert_with(|| vec![0.0; n])[a];
    *cell += lr * (target - *cell);
    Ok(())
}

/// Uniform action with probability `epsilon`, greedy otherwise.
pub fn epsilon_greedy<R: Rng + ?Sized>(q: &QTable, s: u64, epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..q.num_actions)
    } else {
        q.greedy(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub episode: usize,
    pub state: u64,
    pub action: usize,
    pub next_state: u64,
    /// Encoded next state, the input to the lifelong reward.
    pub next_point: StatePoint,
    pub r_ep: f64,
}

/// Fixed-capacity FIFO of transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("replay capacity must be >= 1"));
        }
        Ok(ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `n` indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| rng.random_range(0..self.items.len())).collect()
    }
}

/// When the lifelong memory grows: at steps `t ≥ U` with `t mod U < T_u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleConfig {
    pub update_interval: u64,
    pub update_steps: u64,
    pub total_steps: u64,
}

impl ScheduleConfig {
    pub fn new(update_interval: u64, update_steps: u64, total_steps: u64) -> Result<Self> {
        let s = ScheduleConfig {
            update_interval,
            update_steps,
            total_steps,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.update_interval == 0 || self.update_steps == 0 || self.total_steps == 0 {
            return Err(Error::invalid("update_interval, update_steps and total_steps must be >= 1"));
        }
        if self.update_steps > self.update_interval {
            return Err(Error::invalid(format!(
                "update_steps ({}) must not exceed update_interval ({})",
                self.update_steps, self.update_interval
            )));
        }
        Ok(())
    }

    pub fn in_window(&self, t: u64) -> bool {
        t >= self.update_interval && t % self.update_interval < self.update_steps
    }
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            update_interval: 50_000,
            update_steps: 5_000,
            total_steps: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentConfig {
    pub learning_rate: f64,
    pub gamma: f64,
    /// ε decays linearly from `epsilon_start` to `epsilon_end` over the run.
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub updates_per_step: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            learning_rate: 0.1,
            gamma: 0.99,
            epsilon_start: 0.1,
            epsilon_end: 0.01,
            batch_size: 32,
            replay_capacity: 100_000,
            updates_per_step: 1,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        QTable::new(1, self.learning_rate, self.gamma)?;
        for (name, e) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::invalid(format!("{name} must be in [0, 1], got {e}")));
            }
        }
        if self.batch_size == 0 || self.replay_capacity == 0 {
            return Err(Error::invalid("batch_size and replay_capacity must be >= 1"));
        }
        Ok(())
    }

    pub fn epsilon_at(&self, t: u64, total: u64) -> f64 {
        let frac = if total <= 1 { 1.0 } else { (t as f64 / (total - 1) as f64).min(1.0) };
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub agent: AgentConfig,
    pub reward: RewardConfig,
    pub schedule: ScheduleConfig,
    pub search: SearchConfig,
    pub memory: MemoryBackend,
    /// Out-degree of the graph memory; at least `reward.k_lifelong`.
    pub graph_degree: usize,
    /// Estimator for the per-episode entropy behind the episodic reward.
    pub estimator: Estimator,
    /// When false the episodic stream is replaced by zeros.
    pub use_episodic: bool,
    /// Evaluate the evaluation entropy every this many episodes.
    pub eval_every: usize,
    /// No evaluation before this episode (1-based).
    pub eval_from: usize,
    /// Episodes (1-based) after which reward heatmaps are captured.
    pub snapshot_episodes: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let reward = RewardConfig::default();
        RunConfig {
            agent: AgentConfig::default(),
            graph_degree: reward.k_lifelong,
            reward,
            schedule: ScheduleConfig::default(),
            search: SearchConfig::default(),
            memory: MemoryBackend::Graph,
            estimator: Estimator::Kde {
                kernel: crate::entropy::KernelConfig::new(1.0).expect("positive sigma"),
            },
            use_episodic: true,
            eval_every: 1,
            eval_from: 1,
            snapshot_episodes: vec![5, 50, 300],
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        self.reward.validate()?;
        self.schedule.validate()?;
        if self.graph_degree < self.reward.k_lifelong {
            return Err(Error::invalid(format!(
                "graph_degree ({}) must be >= k_lifelong ({})",
                self.graph_degree, self.reward.k_lifelong
            )));
        }
        if self.eval_every == 0 {
            return Err(Error::invalid("eval_every must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: RunLog,
    pub q: QTable,
    pub memory: LifelongMemory,
    pub coverage: CoverageCounter,
    pub replay: ReplayBuffer,
    /// Training-estimator entropy of every episode, in estimator units.
    pub episode_entropy: Vec<f64>,
}

struct Pending {
    state: u64,
    action: usize,
    next_state: u64,
    next_point: StatePoint,
}

#[derive(Default)]
struct EpisodeStats {
    r_ep_sum: f64,
    r_l_sum: f64,
    samples: usize,
    lifelong_samples: usize,
}

/// Runs the exploration loop for `cfg.schedule.total_steps` environment steps.
pub fn run_element<E: Environment + ?Sized>(
    env: &mut E,
    encoder: &FixedEncoder,
    cfg: &RunConfig,
    seed: u64,
) -> Result<RunOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe_rng = ChaCha8Rng::seed_from_u64(seed);
    probe_rng.set_stream(1);

    let mut q = QTable::new(env.num_actions(), cfg.agent.learning_rate, cfg.agent.gamma)?;
    let mut replay = ReplayBuffer::new(cfg.agent.replay_capacity)?;
    let mut memory = LifelongMemory::new(cfg.memory, cfg.graph_degree, seed)?;
    let (cov_bounds, cov_bins) = env.coverage_grid();
    let mut coverage = CoverageCounter::new(cov_bounds, cov_bins)?;
    let probes = env.probes();
    let needs_table = !matches!(cfg.reward.episodic_mode, EpisodicMode::PerEpisodeConstant);
    let mut table = EpisodicRewardTable::new();
    let mut log = RunLog::default();
    let mut episode_entropy = Vec::new();

    let total = cfg.schedule.total_steps;
    let mut t: u64 = 0;
    let mut episode = 0usize;
    while t < total {
        episode += 1;
        let mut obs = env.reset(&mut rng);
        let mut pending: Vec<Pending> = Vec::with_capacity(env.episode_len());
        let mut cells = HashSet::new();
        let mut stats = EpisodeStats::default();
        let mut max_radius = radius(env.position());
        for _ in 0..env.episode_len() {
            if t >= total {
                break;
            }
            let s = env.state_key();
            let eps = cfg.agent.epsilon_at(t, total);
            let a = epsilon_greedy(&q, s, eps, &mut rng);
            obs = env.step(a);
            let point = encoder.encode(&obs)?;
            let pos = env.position();
            max_radius = max_radius.max(radius(pos));
            coverage.update(t, pos)?;
            cells.insert(discretize(pos, &cov_bounds, cov_bins)?);
            if cfg.schedule.in_window(t) {
                memory.insert(point.clone(), &cfg.search)?;
            }
            pending.push(Pending {
                state: s,
                action: a,
                next_state: env.state_key(),
                next_point: point,
            });
            if !replay.is_empty() {
                for _ in 0..cfg.agent.updates_per_step {
                    train_step(&mut q, &replay, &memory, cfg, &mut rng, &mut stats)
                        .map_err(|e| abort(e, episode, t))?;
                }
            }
            t += 1;
        }
        let _ = obs;

        let ep = Episode::new(pending.iter().map(|p| p.next_point.clone()).collect());
        let h = cfg.estimator.estimate(&ep.states)?.value;
        if !h.is_finite() {
            return Err(abort(Error::NumericalFailure(format!("episode entropy {h}")), episode, t));
        }
        let r_ep = assign_episodic_rewards(&ep, h, cfg.reward.episodic_mode, needs_table.then_some(&mut table))?;
        if !needs_table && probes.is_some() {
            record_distinct(&mut table, &ep, h / ep.len() as f64);
        }
        for (p, r) in pending.into_iter().zip(r_ep) {
            replay.push(Transition {
                episode,
                state: p.state,
                action: p.action,
                next_state: p.next_state,
                next_point: p.next_point,
                r_ep: r,
            });
        }
        episode_entropy.push(h);

        let entropy_eval = if episode >= cfg.eval_from && episode.is_multiple_of(cfg.eval_every) {
            eval_episode_entropy(&ep)?.value
        } else {
            f64::NAN
        };
        let mean = |sum: f64, n: usize| if n == 0 { f64::NAN } else { sum / n as f64 };
        log.records.push(EpisodeRecord {
            episode,
            steps: t,
            entropy_eval,
            mean_r_ep: mean(stats.r_ep_sum, stats.samples),
            mean_r_l: mean(stats.r_l_sum, stats.lifelong_samples),
            graph_size: memory.len(),
            unique_cells: coverage.unique(),
        });
        log.episode_unique_cells.push(cells.len());
        log.episode_max_radius.push(max_radius);
        log.episode_end_positions.push(env.position());

        if let Some(probes) = &probes {
            if cfg.snapshot_episodes.contains(&episode) {
                let mut lifelong = Grid::zeros(probes.width, probes.height);
                let mut episodic = Grid::zeros(probes.width, probes.height);
                let mut visits = Grid::zeros(probes.width, probes.height);
                for probe in &probes.cells {
                    let p = encoder.encode(&probe.observation)?;
                    lifelong.values[probe.index] = memory.reward(&p, &cfg.search, &cfg.reward, &mut probe_rng)?;
                    episodic.values[probe.index] = table.get(&p).unwrap_or(0.0);
                    visits.values[probe.index] = coverage.count_at(probe.position)? as f64;
                }
                log.snapshots.push(RewardSnapshot {
                    episode,
                    lifelong,
                    episodic,
                    visits,
                });
            }
        }
    }
    log.coverage_history = coverage.history().to_vec();
    Ok(RunOutput {
        log,
        q,
        memory,
        coverage,
        replay,
        episode_entropy,
    })
}

fn radius(p: [f64; 2]) -> f64 {
    p[0].hypot(p[1])
}

fn abort(e: Error, episode: usize, t: u64) -> Error {
    Error::NumericalFailure(format!("run aborted in episode {episode} at step {t}: {e}"))
}

fn record_distinct(table: &mut EpisodicRewardTable, ep: &Episode, value: f64) {
    let mut seen = HashSet::new();
    for s in &ep.states {
        if seen.insert(s.key()) {
            table.record(s, value);
        }
    }
}

fn train_step(
    q: &mut QTable,
    replay: &ReplayBuffer,
    memory: &LifelongMemory,
    cfg: &RunConfig,
    rng: &mut ChaCha8Rng,
    stats: &mut EpisodeStats,
) -> Result<()> {
    let idx = replay.sample_indices(cfg.agent.batch_size, rng);
    let batch: Vec<&Transition> = idx.iter().map(|&i| replay.get(i).expect("sampled in range")).collect();
    let r_ep: Vec<f64> = batch
        .iter()
        .map(|tr| if cfg.use_episodic { tr.r_ep } else { 0.0 })
        .collect();
    let r_l: Vec<f64> = if cfg.reward.beta > 0.0 {
        let mut seen: HashMap<StateKey, f64> = HashMap::new();
        let mut out = Vec::with_capacity(batch.len());
        for tr in &batch {
            let key = tr.next_point.key();
            let r = match seen.get(&key) {
                Some(&r) => r,
                None => {
                    let r = memory.reward(&tr.next_point, &cfg.search, &cfg.reward, rng)?;
                    seen.insert(key, r);
                    r
                }
            };
            out.push(r);
        }
        stats.r_l_sum += out.iter().sum::<f64>();
        stats.lifelong_samples += out.len();
        out
    } else {
        vec![0.0; batch.len()]
    };
    stats.r_ep_sum += r_ep.iter().sum::<f64>();
    stats.samples += r_ep.len();
    let combined = combine_rewards(&r_ep, &r_l, &cfg.reward)?;
    for (tr, c) in batch.iter().zip(combined) {
        q_update(q, tr.state, tr.action, c.r_total, tr.next_state)?;
    }
    Ok(())
}
