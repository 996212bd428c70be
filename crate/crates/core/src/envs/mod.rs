//! Environments: a grid maze and a 2-D point-mass world.
//!
//! Both expose a small discrete action set through [`Environment`] so the
//! tabular agent can drive either one.

mod maze;
mod pointmass;

pub use maze::{Action, Cell, Maze};
pub use pointmass::{PointMassConfig, PointMassWorld, ACTION_DIRECTIONS};

use rand::RngCore;

use crate::{Error, Result};

/// Axis-aligned box used for histogram binning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Bounds {
    pub fn square(half_width: f64) -> Self {
        Bounds {
            min: [-half_width; 2],
            max: [half_width; 2],
        }
    }
}

/// Uniform `bins × bins` histogram cell of `position`, `row · bins + col`,
/// with `x` selecting the column and `y` the row. Out-of-range points land in
/// the edge bins.
pub fn discretize(position: [f64; 2], bounds: &Bounds, bins: usize) -> Result<usize> {
    if bins == 0 {
        return Err(Error::invalid("bins must be >= 1"));
    }
    let mut idx = [0usize; 2];
    for axis in 0..2 {
        let (lo, hi) = (bounds.min[axis], bounds.max[axis]);
        if !(hi > lo) {
            return Err(Error::invalid(format!(
                "degenerate bounds on axis {axis}: [{lo}, {hi}]"
            )));
        }
        let t = (position[axis] - lo) / (hi - lo) * bins as f64;
        idx[axis] = if t.is_nan() { 0 } else { (t.floor().max(0.0) as usize).min(bins - 1) };
    }
    let [col, row] = idx;
    Ok(row * bins + col)
}

/// Episodic environment with a finite action set.
pub trait Environment {
    fn num_actions(&self) -> usize;

    /// Fixed number of steps per episode.
    fn episode_len(&self) -> usize;

    /// Starts a new episode; returns the first observation.
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;

    fn step(&mut self, action: usize) -> Vec<f64>;

    /// Discrete state used to index the Q-table.
    fn state_key(&self) -> u64;

    /// Planar position used for coverage and heatmaps.
    fn position(&self) -> [f64; 2];

    /// Box and bins of the coverage histogram.
    fn coverage_grid(&self) -> (Bounds, usize);

    /// Cells at which reward heatmaps are sampled, with the observation an
    /// agent would see there. `None` when the state space is not enumerable.
    fn probes(&self) -> Option<ProbeSet> {
        None
    }
}

/// Enumerated observations laid out on a `width × height` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<Probe>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    /// Row-major index into the probe grid.
    pub index: usize,
    pub observation: Vec<f64>,
    pub position: [f64; 2],
}
