use rand::{Rng, RngCore};

use super::{Bounds, Environment};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMassConfig {
    pub accel_gain: f64,
    pub dt: f64,
    pub max_speed: f64,
    pub episode_len: usize,
    pub reset_noise: f64,
    /// Bounds and bins of the grid that turns positions into Q-table states.
    pub state_bounds: Bounds,
    pub state_bins: usize,
}

impl Default for PointMassConfig {
    fn default() -> Self {
        PointMassConfig {
            accel_gain: 0.1,
            dt: 1.0,
            max_speed: 1.0,
            episode_len: 1000,
            reset_noise: 0.1,
            state_bounds: Bounds::square(1000.0),
            state_bins: 100,
        }
    }
}

impl PointMassConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("accel_gain", self.accel_gain),
            ("dt", self.dt),
            ("max_speed", self.max_speed),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.reset_noise.is_finite() && self.reset_noise >= 0.0) {
            return Err(Error::invalid("reset_noise must be >= 0"));
        }
        if self.episode_len == 0 || self.state_bins == 0 {
            return Err(Error::invalid("episode_len and state_bins must be >= 1"));
        }
        Ok(())
    }
}

/// The eight compass directions plus "no thrust", as discrete actions.
pub const ACTION_DIRECTIONS: [[f64; 2]; 9] = [
    [0.0, 0.0],
    [1.0, 0.0],
    [1.0, 1.0],
    [0.0, 1.0],
    [-1.0, 1.0],
    [-1.0, 0.0],
    [-1.0, -1.0],
    [0.0, -1.0],
    [1.0, -1.0],
];

/// Frictionless point mass in the plane with a speed cap.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMassWorld {
    cfg: PointMassConfig,
    position: [f64; 2],
    velocity: [f64; 2],
    clamped_actions: u64,
}

impl PointMassWorld {
    pub fn new(cfg: PointMassConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(PointMassWorld {
            cfg,
            position: [0.0; 2],
            velocity: [0.0; 2],
            clamped_actions: 0,
        })
    }

    pub fn config(&self) -> &PointMassConfig {
        &self.cfg
    }

    pub fn velocity(&self) -> [f64; 2] {
        self.velocity
    }

    /// Actions that had to be clamped into `[-1, 1]²`.
    pub fn clamped_actions(&self) -> u64 {
        self.clamped_actions
    }

    /// At rest, uniformly within `reset_noise` of the origin.
    pub fn reset_state<R: Rng + ?Sized>(&mut self, rng: &mut R) -> [f64; 2] {
        let radius = self.cfg.reset_noise * rng.random::<f64>().sqrt();
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        self.position = [radius * angle.cos(), radius * angle.sin()];
        self.velocity = [0.0; 2];
        self.position
    }

    /// `v ← clip(v + a·gain, max_speed)`, `p ← p + v·dt`. Returns the new position.
    pub fn apply(&mut self, action: [f64; 2]) -> [f64; 2] {
        let mut a = action;
        if a.iter().any(|x| !(-1.0..=1.0).contains(x)) {
            self.clamped_actions += 1;
            a = a.map(|x| if x.is_nan() { 0.0 } else { x.clamp(-1.0, 1.0) });
        }
        for (v, ai) in self.velocity.iter_mut().zip(a) {
            *v += ai * self.cfg.accel_gain;
        }
        let speed = self.velocity[0].hypot(self.velocity[1]);
        if speed > self.cfg.max_speed {
            let s = self.cfg.max_speed / speed;
            self.velocity = self.velocity.map(|v| v * s);
        }
        assert!(
            self.velocity[0].hypot(self.velocity[1]) <= self.cfg.max_speed * (1.0 + 1e-12),
            "speed bound violated"
        );
        for (p, v) in self.position.iter_mut().zip(self.velocity) {
            *p += v * self.cfg.dt;
        }
        self.position
    }
}

impl Environment for PointMassWorld {
    fn num_actions(&self) -> usize {
        ACTION_DIRECTIONS.len()
    }

    fn episode_len(&self) -> usize {
        self.cfg.episode_len
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.reset_state(rng).to_vec()
    }

    fn step(&mut self, action: usize) -> Vec<f64> {
        self.apply(ACTION_DIRECTIONS[action]).to_vec()
    }

    fn state_key(&self) -> u64 {
        super::discretize(self.position, &self.cfg.state_bounds, self.cfg.state_bins)
            .expect("validated bounds") as u64
    }

    fn position(&self) -> [f64; 2] {
        self.position
    }

    fn coverage_grid(&self) -> (Bounds, usize) {
        (Bounds::square(1000.0), 100)
    }
}
