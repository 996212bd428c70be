//! Intrinsic reward assembly.
//!
//! The episodic reward turns the entropy `H(τ)` of a finished episode into
//! per-state rewards whose sum approximates `H(τ)`; the per-state value is the
//! average of `H(τ)/T_τ` over the episodes that contain the state. The
//! lifelong reward is `ln(‖d‖₂ + 1)` where `d` holds the distances to the
//! approximate nearest stored states. Both streams are min-max normalized per
//! batch and combined as `r_ep + β·r_l`.

use std::collections::{HashMap, HashSet};

use rand::Rng;

use crate::entropy::{EntropyValue, Estimator};
use crate::knn_graph::{brute_force_knn, KnnGraph, SearchConfig};
use crate::{Episode, Error, Result, StateKey, StatePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    MinMaxBatch,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodicMode {
    /// Every state of the episode gets `H/T`.
    PerEpisodeConstant,
    /// Running mean of `H/T` per distinct state key.
    TabularRunningMean,
    /// Mean of the table values of the `k` nearest recorded states.
    KnnSmoothed { k: usize },
}

/// How the k neighbor distances are reduced before `ln(x + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LifelongDistance {
    /// Euclidean norm of the vector of k distances.
    KVectorNorm,
    /// Distance to the k-th neighbor only.
    KthDistance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    pub beta: f64,
    pub k_lifelong: usize,
    pub normalization: Normalization,
    pub episodic_mode: EpisodicMode,
    pub lifelong_distance: LifelongDistance,
    /// Reward returned while the memory is empty.
    pub empty_memory_reward: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            beta: 0.5,
            k_lifelong: 3,
            normalization: Normalization::MinMaxBatch,
            episodic_mode: EpisodicMode::PerEpisodeConstant,
            lifelong_distance: LifelongDistance::KVectorNorm,
            empty_memory_reward: std::f64::consts::LN_2,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::invalid(format!("beta must be >= 0, got {}", self.beta)));
        }
        if self.k_lifelong == 0 {
            return Err(Error::invalid("k_lifelong must be >= 1"));
        }
        if let EpisodicMode::KnnSmoothed { k: 0 } = self.episodic_mode {
            return Err(Error::invalid("knn_smoothed k must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinedReward {
    pub r_ep: f64,
    pub r_l: f64,
    pub r_total: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct TableRecord {
    point: StatePoint,
    count: u64,
    mean: f64,
}

/// Per-state running mean of `H(τ)/T_τ` over the episodes containing it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodicRewardTable {
    records: HashMap<StateKey, TableRecord>,
}

impl EpisodicRewardTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&mut self, point: &StatePoint, value: f64) {
        let rec = self.records.entry(point.key()).or_insert_with(|| TableRecord {
            point: point.clone(),
            count: 0,
            mean: 0.0,
        });
        rec.count += 1;
        rec.mean += (value - rec.mean) / rec.count as f64;
    }

    pub fn get(&self, point: &StatePoint) -> Option<f64> {
        self.records.get(&point.key()).map(|r| r.mean)
    }

    pub fn count(&self, point: &StatePoint) -> u64 {
        self.records.get(&point.key()).map_or(0, |r| r.count)
    }

    /// Mean of the stored values of the `k` recorded states nearest to `point`.
    pub fn smoothed(&self, point: &StatePoint, k: usize) -> Result<f64> {
        let mut recs: Vec<&TableRecord> = self.records.values().collect();
        if recs.is_empty() {
            return Err(Error::EmptyInput("episodic reward table"));
        }
        // HashMap order is arbitrary; fix it so distance ties resolve the same way
        recs.sort_by_key(|r| r.point.key());
        let points: Vec<StatePoint> = recs.iter().map(|r| r.point.clone()).collect();
        let nn = brute_force_knn(&points, point, k)?;
        Ok(nn.iter().map(|n| recs[n.id].mean).sum::<f64>() / nn.len() as f64)
    }

    /// `(point, mean)` for every recorded state.
    pub fn entries(&self) -> impl Iterator<Item = (&StatePoint, f64)> {
        self.records.values().map(|r| (&r.point, r.mean))
    }
}

/// Entropy of the states of one episode under `estimator`.
pub fn episode_entropy(ep: &Episode, estimator: &Estimator) -> Result<EntropyValue> {
    estimator.estimate(&ep.states)
}

/// Per-state episodic rewards for an episode with entropy `h`.
pub fn assign_episodic_rewards(
    ep: &Episode,
    h: f64,
    mode: EpisodicMode,
    table: Option<&mut EpisodicRewardTable>,
) -> Result<Vec<f64>> {
    if !h.is_finite() {
        return Err(Error::invalid(format!("episode entropy must be finite, got {h}")));
    }
    if ep.is_empty() {
        return Ok(Vec::new());
    }
    let scaled = h / ep.len() as f64;
    if mode == EpisodicMode::PerEpisodeConstant {
        return Ok(vec![scaled; ep.len()]);
    }
    let table = table.ok_or_else(|| Error::invalid("tabular episodic modes need a reward table"))?;
    let mut seen = HashSet::new();
    for s in &ep.states {
        if seen.insert(s.key()) {
            table.record(s, scaled);
        }
    }
    match mode {
        EpisodicMode::KnnSmoothed { k } => ep.states.iter().map(|s| table.smoothed(s, k)).collect(),
        _ => Ok(ep
            .states
            .iter()
            .map(|s| table.get(s).expect("recorded above"))
            .collect()),
    }
}

/// Lifelong novelty of `s` against the graph memory.
pub fn lifelong_reward<R: Rng + ?Sized>(
    graph: &KnnGraph,
    s: &StatePoint,
    search: &SearchConfig,
    cfg: &RewardConfig,
    rng: &mut R,
) -> Result<f64> {
    if graph.is_empty() {
        return Ok(cfg.empty_memory_reward);
    }
    let found = graph.search(s, search, rng)?;
    let dists: Vec<f64> = found
        .neighbors
        .iter()
        .take(cfg.k_lifelong)
        .map(|n| n.distance)
        .collect();
    Ok(novelty(&dists, cfg.lifelong_distance))
}

/// Same reward computed against an exact scan of `memory`.
pub fn lifelong_reward_exact(memory: &[StatePoint], s: &StatePoint, cfg: &RewardConfig) -> Result<f64> {
    if memory.is_empty() {
        return Ok(cfg.empty_memory_reward);
    }
    let dists: Vec<f64> = brute_force_knn(memory, s, cfg.k_lifelong)?
        .iter()
        .map(|n| n.distance)
        .collect();
    Ok(novelty(&dists, cfg.lifelong_distance))
}

/// `ln(x + 1)` of the reduced neighbor distances (ascending order expected).
pub fn novelty(distances: &[f64], how: LifelongDistance) -> f64 {
    let x = match how {
        LifelongDistance::KVectorNorm => distances.iter().map(|d| d * d).sum::<f64>().sqrt(),
        LifelongDistance::KthDistance => distances.last().copied().unwrap_or(0.0),
    };
    x.ln_1p()
}

/// `(x − min)/(max − min)`; a constant batch maps to zeros.
pub fn minmax_normalize(xs: &[f64]) -> Vec<f64> {
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![0.0; xs.len()];
    }
    xs.iter().map(|x| (x - lo) / span).collect()
}

pub fn combine_rewards(r_ep: &[f64], r_l: &[f64], cfg: &RewardConfig) -> Result<Vec<CombinedReward>> {
    if r_ep.len() != r_l.len() {
        return Err(Error::invalid(format!(
            "reward batches differ in length ({} vs {})",
            r_ep.len(),
            r_l.len()
        )));
    }
    if r_ep.is_empty() {
        return Err(Error::EmptyInput("reward batch"));
    }
    let (ep, l) = match cfg.normalization {
        Normalization::MinMaxBatch => (minmax_normalize(r_ep), minmax_normalize(r_l)),
        Normalization::None => (r_ep.to_vec(), r_l.to_vec()),
    };
    Ok(ep
        .into_iter()
        .zip(l)
        .map(|(r_ep, r_l)| CombinedReward {
            r_ep,
            r_l,
            r_total: r_ep + cfg.beta * r_l,
        })
        .collect())
}

/// Per-state reward lookup used by the decomposition losses.
pub type RewardMap = HashMap<StateKey, f64>;

fn lookup(rewards: &RewardMap, s: &StatePoint) -> Result<f64> {
    rewards
        .get(&s.key())
        .copied()
        .ok_or_else(|| Error::invalid(format!("no reward entry for state {:?}", s.coords())))
}

/// `mean_τ (H(τ) − Σ_t r(s_t))²`.
pub fn decomposition_loss(rewards: &RewardMap, episodes: &[(Episode, f64)]) -> Result<f64> {
    if episodes.is_empty() {
        return Err(Error::EmptyInput("episodes"));
    }
    let mut acc = 0.0;
    for (ep, h) in episodes {
        let sum = ep.states.iter().map(|s| lookup(rewards, s)).sum::<Result<f64>>()?;
        acc += (h - sum).powi(2);
    }
    Ok(acc / episodes.len() as f64)
}

fn common_length(episodes: &[(Episode, f64)]) -> Result<usize> {
    let t = episodes.first().ok_or(Error::EmptyInput("episodes"))?.0.len();
    if t == 0 {
        return Err(Error::invalid("episodes must be non-empty"));
    }
    if let Some((ep, _)) = episodes.iter().find(|(ep, _)| ep.len() != t) {
        return Err(Error::invalid(format!(
            "upper bound assumes equal episode lengths ({t} vs {})",
            ep.len()
        )));
    }
    Ok(t)
}

/// `mean_τ mean_t (H(τ) − T·r(s_t))²` for episodes of equal length `T`.
pub fn upper_bound_loss(rewards: &RewardMap, episodes: &[(Episode, f64)]) -> Result<f64> {
    let t = common_length(episodes)? as f64;
    let mut acc = 0.0;
    for (ep, h) in episodes {
        let mut inner = 0.0;
        for s in &ep.states {
            inner += (h - t * lookup(rewards, s)?).powi(2);
        }
        acc += inner / t;
    }
    Ok(acc / episodes.len() as f64)
}

/// `mean_τ [T² · Var_t r(s_t)]`, the gap between the upper bound and the
/// decomposition loss. Population variance over the time steps.
pub fn variance_term(rewards: &RewardMap, episodes: &[(Episode, f64)]) -> Result<f64> {
    let t = common_length(episodes)? as f64;
    let mut acc = 0.0;
    for (ep, _) in episodes {
        let r = ep.states.iter().map(|s| lookup(rewards, s)).collect::<Result<Vec<f64>>>()?;
        let mean = r.iter().sum::<f64>() / t;
        let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / t;
        acc += t * t * var;
    }
    Ok(acc / episodes.len() as f64)
}

/// Reward map minimizing [`upper_bound_loss`].
///
/// Fixed length: `r*(s) = mean over episodes containing s of H(τ)/T`.
/// Variable length: `r*(s) = Σ_τ T_τ·H(τ)·𝕀(s∈τ) / Σ_τ T_τ²·𝕀(s∈τ)`.
/// Membership counts once per episode.
pub fn optimal_reward_closed_form(episodes: &[(Episode, f64)], variable_length: bool) -> Result<RewardMap> {
    closed_form_with_denominator_scale(episodes, variable_length, 1.0)
}

/// [`optimal_reward_closed_form`] with its denominator multiplied by
/// `scale`. Exists so self-checks can confirm they detect a wrong formula.
#[doc(hidden)]
pub fn closed_form_with_denominator_scale(
    episodes: &[(Episode, f64)],
    variable_length: bool,
    scale: f64,
) -> Result<RewardMap> {
    if episodes.is_empty() {
        return Err(Error::EmptyInput("episodes"));
    }
    let mut num: HashMap<StateKey, f64> = HashMap::new();
    let mut den: HashMap<StateKey, f64> = HashMap::new();
    for (ep, h) in episodes {
        let t = ep.len() as f64;
        let distinct: HashSet<StateKey> = ep.states.iter().map(StatePoint::key).collect();
        for key in distinct {
            let (n, d) = if variable_length { (t * h, t * t) } else { (h / t, 1.0) };
            *num.entry(key.clone()).or_default() += n;
            *den.entry(key).or_default() += d;
        }
    }
    Ok(num
        .into_iter()
        .map(|(k, n)| {
            let d = den[&k] * scale;
            (k, n / d)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::KernelConfig;
    use crate::knn_graph::SearchConfig;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn cells(ids: &[i32]) -> Episode {
        Episode::new(ids.iter().map(|&i| StatePoint::from([f64::from(i), 0.0])).collect())
    }

    fn cfg(beta: f64) -> RewardConfig {
        RewardConfig {
            beta,
            ..RewardConfig::default()
        }
    }

    #[test]
    fn episode_entropy_delegates() {
        let same = Episode::new(vec![StatePoint::from([1.0]); 5]);
        let kde = Estimator::Kde {
            kernel: KernelConfig::new(1.0).unwrap(),
        };
        assert_eq!(episode_entropy(&same, &kde).unwrap().value, 0.0);
        assert!(matches!(
            episode_entropy(&same, &Estimator::Knn { k: 1 }),
            Err(Error::DegenerateDistance { .. })
        ));
        let two = Episode::new(vec![StatePoint::from([0.0]), StatePoint::from([1.0])]);
        let h = episode_entropy(&two, &Estimator::Knn { k: 1 }).unwrap().value;
        assert!((h - 1.963_510_026_021_423_5).abs() < 1e-10);
    }

    #[test]
    fn per_episode_constant() {
        let ep = cells(&(0..10).collect::<Vec<_>>());
        let r = assign_episodic_rewards(&ep, 2.0, EpisodicMode::PerEpisodeConstant, None).unwrap();
        assert_eq!(r, vec![0.2; 10]);
        assert!(assign_episodic_rewards(&ep, f64::NAN, EpisodicMode::PerEpisodeConstant, None).is_err());
    }

    #[test]
    fn tabular_running_mean() {
        let mut table = EpisodicRewardTable::new();
        let a = cells(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
        let b = cells(&[0, 11, 12, 13, 14, 15, 16, 17, 18, 19]);
        assign_episodic_rewards(&a, 2.0, EpisodicMode::TabularRunningMean, Some(&mut table)).unwrap();
        let r = assign_episodic_rewards(&b, 4.0, EpisodicMode::TabularRunningMean, Some(&mut table)).unwrap();
        assert!((r[0] - 0.3).abs() < 1e-15);
        assert!((r[1] - 0.4).abs() < 1e-15);
        assert_eq!(table.count(&StatePoint::from([0.0, 0.0])), 2);
        assert!(matches!(
            assign_episodic_rewards(&a, 1.0, EpisodicMode::TabularRunningMean, None),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn tabular_disjoint_episodes_keep_own_value() {
        let mut table = EpisodicRewardTable::new();
        let eps = [(cells(&[0, 1, 2, 3]), 1.0), (cells(&[4, 5, 6, 7]), 2.0), (cells(&[8, 9, 10, 11]), 6.0)];
        for (ep, h) in &eps {
            assign_episodic_rewards(ep, *h, EpisodicMode::TabularRunningMean, Some(&mut table)).unwrap();
        }
        for (ep, h) in &eps {
            for s in &ep.states {
                assert_eq!(table.get(s).unwrap(), h / 4.0);
            }
        }
    }

    #[test]
    fn repeated_state_counts_once_per_episode() {
        let mut table = EpisodicRewardTable::new();
        let ep = cells(&[0, 0, 0, 1]);
        assign_episodic_rewards(&ep, 4.0, EpisodicMode::TabularRunningMean, Some(&mut table)).unwrap();
        assert_eq!(table.count(&StatePoint::from([0.0, 0.0])), 1);
    }

    #[test]
    fn knn_smoothed_averages_neighbors() {
        let mut table = EpisodicRewardTable::new();
        assign_episodic_rewards(&cells(&[0, 1]), 2.0, EpisodicMode::TabularRunningMean, Some(&mut table)).unwrap();
        let r = assign_episodic_rewards(&cells(&[10, 11]), 8.0, EpisodicMode::KnnSmoothed { k: 2 }, Some(&mut table))
            .unwrap();
        assert_eq!(r, vec![4.0, 4.0]);
        let probe = table.smoothed(&StatePoint::from([5.4, 0.0]), 4).unwrap();
        assert!((probe - 2.5).abs() < 1e-15);
    }

    #[test]
    fn lifelong_reward_values() {
        let search = SearchConfig::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let k1 = RewardConfig { k_lifelong: 1, ..RewardConfig::default() };
        let mut g = KnnGraph::new(1, 0).unwrap();
        assert_eq!(
            lifelong_reward(&g, &StatePoint::from([3.0, 4.0]), &search, &k1, &mut rng).unwrap(),
            std::f64::consts::LN_2
        );
        g.insert(StatePoint::from([0.0, 0.0]), &search).unwrap();
        assert_eq!(lifelong_reward(&g, &StatePoint::from([0.0, 0.0]), &search, &k1, &mut rng).unwrap(), 0.0);
        let r = lifelong_reward(&g, &StatePoint::from([3.0, 4.0]), &search, &k1, &mut rng).unwrap();
        assert!((r - 1.791_759_469_228_055).abs() < 1e-15);
        let mem = vec![StatePoint::from([0.0, 0.0])];
        assert_eq!(lifelong_reward_exact(&mem, &StatePoint::from([3.0, 4.0]), &k1).unwrap(), r);
    }

    #[test]
    fn novelty_variants() {
        let d = [3.0, 4.0];
        assert!((novelty(&d, LifelongDistance::KVectorNorm) - 6f64.ln()).abs() < 1e-15);
        assert!((novelty(&d, LifelongDistance::KthDistance) - 5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn combine_examples() {
        let out = combine_rewards(&[0.0, 1.0, 2.0], &[5.0, 5.0, 5.0], &cfg(0.5)).unwrap();
        let totals: Vec<f64> = out.iter().map(|c| c.r_total).collect();
        assert_eq!(totals, vec![0.0, 0.5, 1.0]);
        let out = combine_rewards(&[0.0, 2.0], &[0.0, 4.0], &cfg(0.5)).unwrap();
        assert_eq!(out.iter().map(|c| c.r_total).collect::<Vec<_>>(), vec![0.0, 1.5]);
        let out = combine_rewards(&[3.0, 1.0, 2.0], &[0.1, 7.0, 2.0], &cfg(0.0)).unwrap();
        assert_eq!(out.iter().map(|c| c.r_total).collect::<Vec<_>>(), minmax_normalize(&[3.0, 1.0, 2.0]));
        assert!(matches!(combine_rewards(&[1.0], &[1.0, 2.0], &cfg(0.5)), Err(Error::InvalidArgument(_))));
        let raw = RewardConfig { normalization: Normalization::None, ..cfg(2.0) };
        assert_eq!(combine_rewards(&[1.0], &[3.0], &raw).unwrap()[0].r_total, 7.0);
    }

    #[test]
    fn config_validation() {
        assert!(cfg(-1.0).validate().is_err());
        assert!(cfg(0.0).validate().is_ok());
        assert!(RewardConfig { k_lifelong: 0, ..cfg(1.0) }.validate().is_err());
    }

    #[test]
    fn decomposition_examples() {
        let eps = vec![(cells(&[0, 1, 2, 3, 4]), 2.0), (cells(&[5, 6, 7, 8, 9]), 3.0)];
        let mut rewards = RewardMap::new();
        for (ep, h) in &eps {
            let r = assign_episodic_rewards(ep, *h, EpisodicMode::PerEpisodeConstant, None).unwrap();
            for (s, v) in ep.states.iter().zip(r) {
                rewards.insert(s.key(), v);
            }
        }
        assert!(decomposition_loss(&rewards, &eps).unwrap() < 1e-28);

        let single = vec![(cells(&[0, 1, 2]), 3.0)];
        let zeros: RewardMap = single[0].0.states.iter().map(|s| (s.key(), 0.0)).collect();
        assert_eq!(decomposition_loss(&zeros, &single).unwrap(), 9.0);

        let mut perturbed: RewardMap = single[0].0.states.iter().map(|s| (s.key(), 1.0)).collect();
        *perturbed.get_mut(&single[0].0.states[1].key()).unwrap() += 0.25;
        assert!((decomposition_loss(&perturbed, &single).unwrap() - 0.0625).abs() < 1e-15);

        let missing = RewardMap::new();
        assert!(matches!(decomposition_loss(&missing, &single), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn upper_bound_zero_for_constant_assignment() {
        let single = vec![(cells(&[0, 1, 2, 3]), 2.0)];
        let r: RewardMap = single[0].0.states.iter().map(|s| (s.key(), 0.5)).collect();
        assert!(upper_bound_loss(&r, &single).unwrap() < 1e-30);
        let ragged = vec![(cells(&[0, 1]), 1.0), (cells(&[2, 3, 4]), 1.0)];
        let r: RewardMap = (0..5).map(|i| (StatePoint::from([f64::from(i), 0.0]).key(), 0.1)).collect();
        assert!(matches!(upper_bound_loss(&r, &ragged), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn closed_form_examples() {
        let disjoint = vec![(cells(&[0, 1]), 1.0), (cells(&[2, 3]), 3.0)];
        let r = optimal_reward_closed_form(&disjoint, false).unwrap();
        assert_eq!(r[&StatePoint::from([0.0, 0.0]).key()], 0.5);
        assert_eq!(r[&StatePoint::from([3.0, 0.0]).key()], 1.5);

        let shared = vec![
            (cells(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]), 2.0),
            (cells(&[0, 11, 12, 13, 14, 15, 16, 17, 18, 19]), 4.0),
        ];
        let r = optimal_reward_closed_form(&shared, false).unwrap();
        assert!((r[&StatePoint::from([0.0, 0.0]).key()] - 0.3).abs() < 1e-15);

        let var = vec![
            (cells(&(0..10).collect::<Vec<_>>()), 2.0),
            (cells(&[0].into_iter().chain(100..119).collect::<Vec<_>>()), 8.0),
        ];
        let r = optimal_reward_closed_form(&var, true).unwrap();
        assert!((r[&StatePoint::from([0.0, 0.0]).key()] - 0.36).abs() < 1e-15);
        assert!(matches!(optimal_reward_closed_form(&[], false), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn running_mean_and_h_mean_normalize_identically() {
        // the H-mean and H/T-mean assignments differ by the factor T
        let t = 6;
        let eps: Vec<(Episode, f64)> = (0..5)
            .map(|i| (cells(&(i * 3..i * 3 + t).collect::<Vec<_>>()), 1.0 + f64::from(i) * 0.7))
            .collect();
        let scaled = optimal_reward_closed_form(&eps, false).unwrap();
        let mut raw_table = EpisodicRewardTable::new();
        for (ep, h) in &eps {
            for s in &ep.states {
                raw_table.record(s, *h);
            }
        }
        let states: Vec<StatePoint> = eps.iter().flat_map(|(e, _)| e.states.clone()).collect();
        let a = minmax_normalize(&states.iter().map(|s| scaled[&s.key()]).collect::<Vec<_>>());
        let b = minmax_normalize(&states.iter().map(|s| raw_table.get(s).unwrap()).collect::<Vec<_>>());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn minmax_idempotent(xs in prop::collection::vec(-100.0f64..100.0, 1..50)) {
            let once = minmax_normalize(&xs);
            for x in &once {
                prop_assert!((0.0..=1.0).contains(x));
            }
            let twice = minmax_normalize(&once);
            if once.iter().any(|&x| x == 1.0) {
                for (a, b) in once.iter().zip(&twice) {
                    prop_assert!((a - b).abs() < 1e-15);
                }
            }
        }

        #[test]
        fn combined_in_range(
            ep in prop::collection::vec(-5.0f64..5.0, 1..30),
            beta in 0.0f64..3.0,
            seed in any::<u64>(),
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let l: Vec<f64> = ep.iter().map(|_| rng.random_range(0.0..4.0)).collect();
            for c in combine_rewards(&ep, &l, &cfg(beta)).unwrap() {
                prop_assert!((0.0..=1.0).contains(&c.r_ep) && (0.0..=1.0).contains(&c.r_l));
                prop_assert!(c.r_total >= 0.0 && c.r_total <= 1.0 + beta + 1e-12);
            }
        }

        #[test]
        fn lifelong_nonnegative(d in prop::collection::vec(0.0f64..1e6, 0..6)) {
            prop_assert!(novelty(&d, LifelongDistance::KVectorNorm) >= 0.0);
            prop_assert!(novelty(&d, LifelongDistance::KthDistance) >= 0.0);
        }
    }

}
