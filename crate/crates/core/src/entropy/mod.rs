//! State-entropy estimators.
//!
//! Three estimators over a finite set of states:
//! - [`kde_entropy`]: plug-in Gaussian kernel density estimate (nats).
//! - [`knn_entropy`]: Kozachenko-Leonenko k-th neighbor estimate (nats).
//! - [`renyi_matrix_entropy`]: matrix-based Rényi entropy of the
//!   trace-normalized Gram matrix (bits).
//!
//! The kernel is `κ(a, b) = exp(-‖a - b‖² / 2σ)`, with σ entering linearly.
//! No density normalizer is applied, so KDE values are offset from a true
//! differential entropy by a constant.

mod eigen;
pub mod special;

use std::f64::consts::{LN_2, PI};

pub use eigen::{symmetric_eigenvalues, SquareMatrix};

use crate::state::squared_distance;
use crate::{Error, Result, StatePoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    sigma: f64,
}

impl KernelConfig {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!("kernel width must be positive, got {sigma}")));
        }
        Ok(KernelConfig { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        self.kernel_from_sq(squared_distance(a, b))
    }

    fn kernel_from_sq(&self, sq_dist: f64) -> f64 {
        (-sq_dist / (2.0 * self.sigma)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogBase {
    Natural,
    Base2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Kde,
    Knn,
    Renyi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyValue {
    pub value: f64,
    pub base: LogBase,
    pub estimator: EstimatorKind,
}

impl EntropyValue {
    pub fn in_base(self, base: LogBase) -> EntropyValue {
        let value = match (self.base, base) {
            (LogBase::Natural, LogBase::Base2) => self.value / LN_2,
            (LogBase::Base2, LogBase::Natural) => self.value * LN_2,
            _ => self.value,
        };
        EntropyValue { value, base, ..self }
    }

    pub fn nats(self) -> f64 {
        self.in_base(LogBase::Natural).value
    }

    pub fn bits(self) -> f64 {
        self.in_base(LogBase::Base2).value
    }
}

/// Kernel (Gram) matrix of a state set, optionally trace-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub entries: SquareMatrix,
    pub trace_normalized: bool,
}

impl GramMatrix {
    /// `A = K / tr(K)`.
    pub fn normalized(&self) -> GramMatrix {
        if self.trace_normalized {
            return self.clone();
        }
        let tr = self.entries.trace();
        GramMatrix {
            entries: self.entries.scaled(1.0 / tr),
            trace_normalized: true,
        }
    }
}

fn check_dims(states: &[StatePoint]) -> Result<usize> {
    let first = states.first().ok_or(Error::EmptyInput("state set"))?;
    let d = first.dim();
    if let Some((i, s)) = states.iter().enumerate().find(|(_, s)| s.dim() != d) {
        return Err(Error::invalid(format!(
            "state {i} has dimension {}, expected {d}",
            s.dim()
        )));
    }
    Ok(d)
}

pub fn gram_matrix(states: &[StatePoint], cfg: &KernelConfig) -> Result<GramMatrix> {
    check_dims(states)?;
    let n = states.len();
    let mut k = SquareMatrix::identity(n);
    for i in 0..n {
        for j in i + 1..n {
            let v = cfg.kernel(&states[i], &states[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(GramMatrix {
        entries: k,
        trace_normalized: false,
    })
}

/// `-(1/N) Σ_i ln[(1/N) Σ_j κ(s_i, s_j)]`, self terms included.
pub fn kde_entropy(states: &[StatePoint], cfg: &KernelConfig) -> Result<EntropyValue> {
    check_dims(states)?;
    let n = states.len();
    let mut row_sums = vec![1.0; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = cfg.kernel(&states[i], &states[j]);
            row_sums[i] += v;
            row_sums[j] += v;
        }
    }
    let nf = n as f64;
    let value = -row_sums.iter().map(|s| (s / nf).ln()).sum::<f64>() / nf;
    Ok(EntropyValue {
        value,
        base: LogBase::Natural,
        estimator: EstimatorKind::Kde,
    })
}

/// Distance from every state to its k-th nearest other state.
pub(crate) fn kth_neighbor_distances(states: &[StatePoint], k: usize) -> Vec<f64> {
    let n = states.len();
    let mut row = Vec::with_capacity(n - 1);
    (0..n)
        .map(|i| {
            row.clear();
            row.extend(
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| squared_distance(&states[i], &states[j])),
            );
            let (_, kth, _) = row.select_nth_unstable_by(k - 1, f64::total_cmp);
            kth.sqrt()
        })
        .collect()
}

/// Kozachenko-Leonenko estimate
/// `(1/N) Σ_i ln[N · r_i^d · π^{d/2} / (k · Γ(d/2 + 1))] + ln k − ψ(k)`,
/// where `r_i` is the distance from `s_i` to its k-th nearest neighbor.
pub fn knn_entropy(states: &[StatePoint], k: usize) -> Result<EntropyValue> {
    let d = check_dims(states)?;
    let n = states.len();
    if k == 0 || n <= k {
        return Err(Error::invalid(format!(
            "kNN entropy needs 1 <= k < N (k={k}, N={n})"
        )));
    }
    let radii = kth_neighbor_distances(states, k);
    if let Some(index) = radii.iter().position(|&r| r == 0.0) {
        return Err(Error::DegenerateDistance { index });
    }
    let (nf, df, kf) = (n as f64, d as f64, k as f64);
    let log_unit_ball = 0.5 * df * PI.ln() - special::ln_gamma(0.5 * df + 1.0);
    let mean_log_radius = radii.iter().map(|r| r.ln()).sum::<f64>() / nf;
    let bias_correction = kf.ln() - special::digamma(kf);
    let value = nf.ln() + df * mean_log_radius + log_unit_ball - kf.ln() + bias_correction;
    Ok(EntropyValue {
        value,
        base: LogBase::Natural,
        estimator: EstimatorKind::Knn,
    })
}

const NEGATIVE_EIGEN_TOL: f64 = 1e-10;

/// Matrix-based Rényi entropy `1/(1−α) · log₂ Σ_i λ_i(A)^α`, `A = K / tr(K)`.
///
/// Integer orders go through `tr(A^α)` by repeated products; other orders
/// through the Jacobi eigenvalues. The result is clamped to `[0, log₂ N]`
/// to absorb rounding at the ends of the range.
pub fn renyi_matrix_entropy(
    states: &[StatePoint],
    alpha: f64,
    cfg: &KernelConfig,
) -> Result<EntropyValue> {
    if !(alpha.is_finite() && alpha > 0.0) || alpha == 1.0 {
        return Err(Error::invalid(format!(
            "Rényi order must be positive and != 1 (use e.g. 1.001), got {alpha}"
        )));
    }
    let a = gram_matrix(states, cfg)?.normalized().entries;
    let power_sum = if alpha.fract() == 0.0 && alpha <= 64.0 {
        trace_power(&a, alpha as u32)
    } else {
        eigen_power_sum(&a, alpha)?
    };
    let n = states.len() as f64;
    let raw = power_sum.log2() / (1.0 - alpha);
    Ok(EntropyValue {
        value: raw.clamp(0.0, n.log2()),
        base: LogBase::Base2,
        estimator: EstimatorKind::Renyi,
    })
}

/// `tr(A^p)` for `p ≥ 1` by repeated multiplication.
fn trace_power(a: &SquareMatrix, p: u32) -> f64 {
    if p == 1 {
        return a.trace();
    }
    let mut acc = a.clone();
    for _ in 2..p {
        acc = acc.matmul(a);
    }
    acc.trace_of_product(a)
}

/// `Σ λ^α` over the eigenvalues of `a`, after clamping tiny negatives.
pub(crate) fn eigen_power_sum(a: &SquareMatrix, alpha: f64) -> Result<f64> {
    let eig = symmetric_eigenvalues(a)?;
    let mut acc = 0.0;
    for l in eig {
        if l < -NEGATIVE_EIGEN_TOL {
            return Err(Error::NumericalFailure(format!(
                "Gram matrix has eigenvalue {l:e} below -1e-10"
            )));
        }
        if l > 0.0 {
            acc += l.powf(alpha);
        }
    }
    Ok(acc)
}

/// Rényi entropy through the eigenvalue route regardless of α, for
/// cross-checking the trace-power route.
pub fn renyi_via_eigenvalues(
    states: &[StatePoint],
    alpha: f64,
    cfg: &KernelConfig,
) -> Result<EntropyValue> {
    if !(alpha.is_finite() && alpha > 0.0) || alpha == 1.0 {
        return Err(Error::invalid(format!("Rényi order must be positive and != 1, got {alpha}")));
    }
    let a = gram_matrix(states, cfg)?.normalized().entries;
    let n = states.len() as f64;
    let raw = eigen_power_sum(&a, alpha)?.log2() / (1.0 - alpha);
    Ok(EntropyValue {
        value: raw.clamp(0.0, n.log2()),
        base: LogBase::Base2,
        estimator: EstimatorKind::Renyi,
    })
}

/// How far the full kernel row sums are from their kNN-truncated versions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSumGap {
    /// `max_i |Σ_{j≠i} κ(s_i, s_j) − Σ_{j∈kNN(i)} κ(s_i, s_j)|`.
    pub gap: f64,
    /// Smallest k-th neighbor distance over all states.
    pub min_kth_distance: f64,
    n: usize,
    k: usize,
    sigma: f64,
}

impl KernelSumGap {
    /// Distance every k-th neighbor must reach: `√(2σ · ln((N − k)/ε))`.
    pub fn required_distance(&self, epsilon: f64) -> f64 {
        let arg = 2.0 * self.sigma * ((self.n - self.k) as f64 / epsilon).ln();
        arg.max(0.0).sqrt()
    }

    /// True when every state's k-th neighbor lies at least
    /// [`required_distance`](Self::required_distance) away, which bounds the
    /// gap by `(N − k) · exp(−r²/2σ) ≤ ε`.
    pub fn threshold_ok(&self, epsilon: f64) -> bool {
        self.min_kth_distance >= self.required_distance(epsilon)
    }
}

pub fn kernel_sum_gap(states: &[StatePoint], k: usize, cfg: &KernelConfig) -> Result<KernelSumGap> {
    check_dims(states)?;
    let n = states.len();
    if k == 0 || n <= k {
        return Err(Error::invalid(format!(
            "kernel sum gap needs 1 <= k < N (k={k}, N={n})"
        )));
    }
    let mut gap: f64 = 0.0;
    let mut min_kth = f64::INFINITY;
    let mut others: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        others.clear();
        others.extend(
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (squared_distance(&states[i], &states[j]), j)),
        );
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        min_kth = min_kth.min(others[k - 1].0.sqrt());
        // the difference is exactly the contribution of the non-neighbors
        let tail: f64 = others[k..].iter().map(|(sq, _)| cfg.kernel_from_sq(*sq)).sum();
        gap = gap.max(tail);
    }
    Ok(KernelSumGap {
        gap,
        min_kth_distance: min_kth,
        n,
        k,
        sigma: cfg.sigma,
    })
}

/// An estimator together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    Kde { kernel: KernelConfig },
    Knn { k: usize },
    Renyi { alpha: f64, kernel: KernelConfig },
}

impl Estimator {
    pub fn kind(&self) -> EstimatorKind {
        match self {
            Estimator::Kde { .. } => EstimatorKind::Kde,
            Estimator::Knn { .. } => EstimatorKind::Knn,
            Estimator::Renyi { .. } => EstimatorKind::Renyi,
        }
    }

    pub fn estimate(&self, states: &[StatePoint]) -> Result<EntropyValue> {
        match self {
            Estimator::Kde { kernel } => kde_entropy(states, kernel),
            Estimator::Knn { k } => knn_entropy(states, *k),
            Estimator::Renyi { alpha, kernel } => renyi_matrix_entropy(states, *alpha, kernel),
        }
    }
}

/// Evenly spaced deterministic subsample of at most `max_len` states
/// (indices `⌊i·T/m⌋`).
pub fn subsample(states: &[StatePoint], max_len: usize) -> Vec<StatePoint> {
    let t = states.len();
    if t <= max_len || max_len == 0 {
        return states.to_vec();
    }
    (0..max_len).map(|i| states[i * t / max_len].clone()).collect()
}
