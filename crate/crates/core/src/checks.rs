//! Self-checks behind `element verify`.
//!
//! Each check rebuilds a known configuration, compares the library against
//! an independent expectation and reports the measured values alongside the
//! verdict.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::entropy::{kde_entropy, kernel_sum_gap, knn_entropy, renyi_matrix_entropy, KernelConfig};
use crate::knn_graph::{smooth_random_walk, KnnGraph, SearchConfig};
use crate::rewards::{
    closed_form_with_denominator_scale, decomposition_loss, lifelong_reward, lifelong_reward_exact, upper_bound_loss,
    variance_term, RewardMap,
};
use crate::{Episode, Result, StatePoint};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Multiplies the denominator of the optimal-reward closed form. Anything
    /// other than 1 is a deliberate fault.
    pub prop1_denominator_scale: f64,
    /// Points stored in each recall graph.
    pub recall_points: usize,
    pub recall_queries: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 7,
            prop1_denominator_scale: 1.0,
            recall_points: 10_000,
            recall_queries: 1_000,
        }
    }
}

pub fn run_all(opts: &VerifyOptions) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        estimator_closed_forms()?,
        optimal_reward(opts)?,
        kernel_gap(opts)?,
        graph_recall(opts)?,
        edge_accuracy(opts)?,
        touch_budget(opts)?,
    ])
}

/// Two points one unit apart in 1-D with σ = 0.5, so the off-diagonal
/// kernel value is `g = e^{-1}`.
pub fn estimator_closed_forms() -> Result<CheckOutcome> {
    let pair = [StatePoint::from([0.0]), StatePoint::from([1.0])];
    let kernel = KernelConfig::new(0.5)?;
    let g = (-1.0f64).exp();
    let kde_expected = -((1.0 + g) / 2.0).ln();
    // ln 2 + ln 1 + ½ln π − lnΓ(3/2) − ln 1 + γ, with Γ(3/2) = √π/2
    let knn_expected = 2f64.ln() + 0.5 * std::f64::consts::PI.ln()
        - (std::f64::consts::PI.sqrt() / 2.0).ln()
        + 0.577_215_664_901_532_9;
    // eigenvalues of [[1, g],[g, 1]]/2 are (1 ± g)/2, whose squares sum to (1 + g²)/2
    let renyi_expected = -((1.0 + g * g) / 2.0).log2();
    // hand values, each within one unit of its last written digit
    let rounded = [(kde_expected, 0.379_885, 1e-6), (knn_expected, 1.963_510_1, 1e-7), (renyi_expected, 0.8169, 1e-4)];
    let hand_ok = rounded.iter().all(|(exact, hand, tol)| (exact - hand).abs() <= *tol);

    let kde = kde_entropy(&pair, &kernel)?.value;
    let knn = knn_entropy(&pair, 1)?.value;
    let renyi = renyi_matrix_entropy(&pair, 2.0, &kernel)?.value;
    let same = vec![StatePoint::from([2.0, 2.0]); 5];
    let degenerate = kde_entropy(&same, &kernel)?.value == 0.0 && renyi_matrix_entropy(&same, 2.0, &kernel)?.value == 0.0;
    let errs = [kde - kde_expected, knn - knn_expected, renyi - renyi_expected];
    let worst = errs.iter().map(|x| x.abs()).fold(0.0, f64::max);
    Ok(CheckOutcome {
        name: "estimator closed forms",
        passed: worst <= 1e-6 && degenerate && hand_ok,
        detail: format!(
            "kde {kde:.6} knn {knn:.7} renyi {renyi:.4} bits (max error {worst:.1e}, identical states -> 0: {degenerate})"
        ),
    })
}

fn prop1_instance(rng: &mut ChaCha8Rng) -> Vec<(Episode, f64)> {
    let pool: Vec<usize> = (0..40).collect();
    (0..10)
        .map(|_| {
            let cells: Vec<StatePoint> = pool
                .choose_multiple(rng, 20)
                .map(|&c| StatePoint::from([c as f64]))
                .collect();
            (Episode::new(cells), rng.random_range(0.0..5.0))
        })
        .collect()
}

/// Optimality of the closed-form episodic reward under the upper-bound loss.
pub fn optimal_reward(opts: &VerifyOptions) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (mut beaten, mut max_grad, mut max_identity) = (0usize, 0.0f64, 0.0f64);
    let h = 1e-5;
    for _ in 0..50 {
        let episodes = prop1_instance(&mut rng);
        let best = closed_form_with_denominator_scale(&episodes, false, opts.prop1_denominator_scale)?;
        let base = upper_bound_loss(&best, &episodes)?;
        let keys: Vec<_> = best.keys().cloned().collect();
        for trial in 0..1000 {
            let mut r: RewardMap = best.clone();
            if trial % 2 == 0 {
                for v in r.values_mut() {
                    *v += rng.random_range(-0.05..0.05);
                }
            } else {
                let key = &keys[rng.random_range(0..keys.len())];
                *r.get_mut(key).expect("key from map") += rng.random_range(-0.05..0.05);
            }
            if upper_bound_loss(&r, &episodes)? < base - 1e-12 * base.max(1.0) {
                beaten += 1;
            }
        }
        for key in &keys {
            let mut plus = best.clone();
            let mut minus = best.clone();
            *plus.get_mut(key).expect("key from map") += h;
            *minus.get_mut(key).expect("key from map") -= h;
            let g = (upper_bound_loss(&plus, &episodes)? - upper_bound_loss(&minus, &episodes)?) / (2.0 * h);
            max_grad = max_grad.max(g.abs());
        }
        let gap = base - decomposition_loss(&best, &episodes)? - variance_term(&best, &episodes)?;
        max_identity = max_identity.max(gap.abs());
    }
    Ok(CheckOutcome {
        name: "optimal episodic reward",
        passed: beaten == 0 && max_grad < 1e-8 && max_identity <= 1e-10,
        detail: format!(
            "50 instances: {beaten} perturbations beat the closed form, max |gradient| {max_grad:.1e}, bound identity error {max_identity:.1e}"
        ),
    })
}

/// Soundness of the kernel-sum gap bound on well-separated configurations.
pub fn kernel_gap(opts: &VerifyOptions) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x2);
    let eps = 1e-6;
    let (mut ok, mut worst) = (0usize, 0.0f64);
    let total = 100;
    for i in 0..total {
        let sigma = [0.5, 1.0, 2.0][i % 3];
        let k = 1 + i % 3;
        let n = rng.random_range(k + 5..k + 40);
        let spacing = (2.0 * sigma * ((n - k) as f64 / eps).ln()).sqrt() + 0.01;
        let mut s = Vec::with_capacity(n);
        for _ in 0..k {
            s.push(StatePoint::from([rng.random_range(0.0..1e-3), rng.random_range(0.0..1e-3)]));
        }
        for j in 0..n - k {
            s.push(StatePoint::from([spacing * (j + 1) as f64, rng.random_range(-0.5..0.5)]));
        }
        let g = kernel_sum_gap(&s, k, &KernelConfig::new(sigma)?)?;
        if g.threshold_ok(eps) && g.gap <= eps {
            ok += 1;
        }
        worst = worst.max(g.gap);
    }
    Ok(CheckOutcome {
        name: "kernel sum gap",
        passed: ok == total,
        detail: format!("{ok}/{total} configurations satisfy the threshold with gap <= 1e-6 (largest gap {worst:.2e})"),
    })
}

/// Recall@3 of greedy search on random-walk data, R1 = R2 = 20, k = 3.
pub fn graph_recall(opts: &VerifyOptions) -> Result<CheckOutcome> {
    let search = SearchConfig::new(20, 20, 2)?;
    let mut parts = Vec::new();
    let mut worst = f64::INFINITY;
    for d in [2, 8] {
        let walk = smooth_random_walk(opts.seed + d as u64, opts.recall_points + opts.recall_queries, d);
        let (stored, queries) = walk.split_at(opts.recall_points);
        let mut g = KnnGraph::new(3, opts.seed)?;
        for p in stored {
            g.insert(p.clone(), &search)?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let recall = g.recall_at_k(queries, &search, &mut rng)?;
        worst = worst.min(recall);
        parts.push(format!("d={d}: {recall:.3}"));
    }
    Ok(CheckOutcome {
        name: "graph recall@3",
        passed: worst >= 0.8,
        detail: format!("{} (bar 0.8)", parts.join(", ")),
    })
}

/// Online-built graph against the exact k=3 graph on 2000 random-walk points.
pub fn edge_accuracy(opts: &VerifyOptions) -> Result<CheckOutcome> {
    let search = SearchConfig::new(20, 20, 2)?;
    let mut g = KnnGraph::new(3, opts.seed)?;
    for p in smooth_random_walk(opts.seed, 2_000, 2) {
        g.insert(p, &search)?;
    }
    let acc = g.edge_accuracy();
    Ok(CheckOutcome {
        name: "graph edge accuracy",
        passed: acc >= 0.7,
        detail: format!("{acc:.3} at N=2000 (bar 0.7)"),
    })
}

/// Distinct distance evaluations per query never exceed `R1·R2·k + k`.
pub fn touch_budget(opts: &VerifyOptions) -> Result<CheckOutcome> {
    let search = SearchConfig::new(20, 20, 2)?;
    let walk = smooth_random_walk(opts.seed, 5_000, 2);
    let mut g = KnnGraph::new(3, opts.seed)?;
    for p in &walk[..4_000] {
        g.insert(p.clone(), &search)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let budget = search.touch_budget(3);
    let mut most = 0;
    for q in &walk[4_000..] {
        most = most.max(g.search(q, &search, &mut rng)?.touched);
    }
    Ok(CheckOutcome {
        name: "search touch budget",
        passed: most <= budget,
        detail: format!("max touched {most} over 1000 queries (budget {budget})"),
    })
}

/// Timing and quality of graph search against brute force at one graph size.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub dim: usize,
    pub k: usize,
    pub queries: usize,
    pub graph_us: f64,
    pub brute_us: f64,
    pub mean_touched: f64,
    pub max_touched: usize,
    pub budget: usize,
    pub recall: f64,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str =
        "n,dim,k,queries,graph_us_per_query,brute_us_per_query,speedup,mean_touched,max_touched,touch_budget,recall";

    pub fn speedup(&self) -> f64 {
        self.brute_us / self.graph_us
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{:.3},{:.3},{:.2},{:.1},{},{},{:.4}",
            self.n,
            self.dim,
            self.k,
            self.queries,
            self.graph_us,
            self.brute_us,
            self.speedup(),
            self.mean_touched,
            self.max_touched,
            self.budget,
            self.recall
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub sizes: Vec<usize>,
    pub dim: usize,
    pub k: usize,
    pub search: SearchConfig,
    pub queries: usize,
    pub seed: u64,
}

/// Grows one graph from a random-walk stream and, at each size in
/// `opts.sizes`, times the lifelong reward of held-out queries through the
/// graph and through an exact scan.
pub fn bench(opts: &BenchOptions) -> Result<Vec<BenchRow>> {
    let mut sizes = opts.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let Some(&largest) = sizes.last() else {
        return Err(crate::Error::EmptyInput("bench sizes"));
    };
    if opts.queries == 0 {
        return Err(crate::Error::EmptyInput("bench queries"));
    }
    let reward = crate::rewards::RewardConfig {
        k_lifelong: opts.k,
        ..Default::default()
    };
    let walk = smooth_random_walk(opts.seed, largest + opts.queries, opts.dim);
    let (stream, queries) = walk.split_at(largest);
    let mut g = KnnGraph::new(opts.k, opts.seed)?;
    let budget = opts.search.touch_budget(opts.k);
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in &sizes {
        for p in &stream[g.len()..n] {
            g.insert(p.clone(), &opts.search)?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let start = std::time::Instant::now();
        let mut sink = 0.0;
        for q in queries {
            sink += lifelong_reward(&g, q, &opts.search, &reward, &mut rng)?;
        }
        let graph_us = start.elapsed().as_secs_f64() * 1e6 / queries.len() as f64;
        let start = std::time::Instant::now();
        for q in queries {
            sink += lifelong_reward_exact(&stream[..n], q, &reward)?;
        }
        let brute_us = start.elapsed().as_secs_f64() * 1e6 / queries.len() as f64;
        std::hint::black_box(sink);

        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let (mut total, mut most) = (0usize, 0usize);
        for q in queries {
            let t = g.search(q, &opts.search, &mut rng)?.touched;
            total += t;
            most = most.max(t);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rows.push(BenchRow {
            n,
            dim: opts.dim,
            k: opts.k,
            queries: queries.len(),
            graph_us,
            brute_us,
            mean_touched: total as f64 / queries.len() as f64,
            max_touched: most,
            budget,
            recall: g.recall_at_k(queries, &opts.search, &mut rng)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_pass() {
        let c = estimator_closed_forms().unwrap();
        assert!(c.passed, "{}", c.detail);
    }

    #[test]
    fn optimal_reward_detects_fault() {
        let good = optimal_reward(&VerifyOptions::default()).unwrap();
        assert!(good.passed, "{}", good.detail);
        let bad = optimal_reward(&VerifyOptions {
            prop1_denominator_scale: 1.1,
            ..VerifyOptions::default()
        })
        .unwrap();
        assert!(!bad.passed, "{}", bad.detail);
    }

    #[test]
    fn gap_and_budget_pass() {
        let opts = VerifyOptions::default();
        let g = kernel_gap(&opts).unwrap();
        assert!(g.passed, "{}", g.detail);
        let b = touch_budget(&opts).unwrap();
        assert!(b.passed, "{}", b.detail);
    }

    #[test]
    fn bench_rows_cover_each_size() {
        let rows = bench(&BenchOptions {
            sizes: vec![2_000, 1_000],
            dim: 2,
            k: 3,
            search: SearchConfig::default(),
            queries: 20,
            seed: 1,
        })
        .unwrap();
        assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![1_000, 2_000]);
        for r in &rows {
            assert!(r.max_touched <= r.budget);
            assert!((0.0..=1.0).contains(&r.recall));
            assert_eq!(r.csv_line().split(',').count(), BenchRow::CSV_HEADER.split(',').count());
        }
    }
}
