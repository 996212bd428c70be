use std::ops::Deref;

/// A point in the state space where entropies and distances are computed.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePoint(Vec<f64>);

impl StatePoint {
    pub fn new(coords: Vec<f64>) -> Self {
        StatePoint(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn squared_distance(&self, other: &StatePoint) -> f64 {
        squared_distance(&self.0, &other.0)
    }

    pub fn distance(&self, other: &StatePoint) -> f64 {
        self.squared_distance(other).sqrt()
    }

    /// Exact, hashable identity of the coordinates (`-0.0` folds onto `0.0`).
    pub fn key(&self) -> StateKey {
        StateKey(
            self.0
                .iter()
                .map(|&x| if x == 0.0 { 0u64 } else { x.to_bits() })
                .collect(),
        )
    }
}

/// Bitwise key of a [`StatePoint`], used where states are tabular.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey(Vec<u64>);

impl Deref for StatePoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for StatePoint {
    fn from(v: Vec<f64>) -> Self {
        StatePoint(v)
    }
}

impl<const N: usize> From<[f64; N]> for StatePoint {
    fn from(v: [f64; N]) -> Self {
        StatePoint(v.to_vec())
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// One episode: the ordered states visited, starting with the reset state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Episode {
    pub states: Vec<StatePoint>,
}

impl Episode {
    pub fn new(states: Vec<StatePoint>) -> Self {
        Episode { states }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}
