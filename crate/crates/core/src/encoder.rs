//! Fixed observation encoders.
//!
//! An encoder is frozen at construction: the same `(seed, in_dim, out_dim)`
//! always yields the same weights, so a given observation always lands on the
//! same state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result, StatePoint};

#[derive(Debug, Clone, PartialEq)]
enum Mapping {
    /// `tanh(W·obs + b)`, `W` row-major `out_dim × in_dim`.
    RandomTanh { weights: Vec<f64>, bias: Vec<f64> },
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedEncoder {
    seed: u64,
    in_dim: usize,
    out_dim: usize,
    mapping: Mapping,
    /// Multiplier per output coordinate, applied after the mapping.
    scales: Vec<f64>,
}

impl FixedEncoder {
    /// Random affine layer with weights uniform in `±1/√in_dim`, zero bias,
    /// followed by an elementwise `tanh`.
    pub fn new(seed: u64, in_dim: usize, out_dim: usize) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::invalid(format!(
                "encoder dimensions must be positive (in_dim={in_dim}, out_dim={out_dim})"
            )));
        }
        let bound = 1.0 / (in_dim as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Ok(FixedEncoder {
            seed,
            in_dim,
            out_dim,
            mapping: Mapping::RandomTanh {
                weights,
                bias: vec![0.0; out_dim],
            },
            scales: vec![1.0; out_dim],
        })
    }

    /// Pass-through encoder for environments whose native coordinates are
    /// already the state space.
    pub fn identity(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("encoder dimension must be positive"));
        }
        Ok(FixedEncoder {
            seed: 0,
            in_dim: dim,
            out_dim: dim,
            mapping: Mapping::Identity,
            scales: vec![1.0; dim],
        })
    }

    /// Sets one scale factor for the whole output.
    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid(format!("encoder scale must be positive, got {scale}")));
        }
        self.scales.iter_mut().for_each(|s| *s = scale);
        Ok(self)
    }

    /// Sets per-coordinate scale factors, e.g. to weight a block of raw
    /// coordinates appended to random features.
    pub fn with_block_scales(mut self, scales: Vec<f64>) -> Result<Self> {
        if scales.len() != self.out_dim {
            return Err(Error::invalid(format!(
                "expected {} scale factors, got {}",
                self.out_dim,
                scales.len()
            )));
        }
        if let Some(bad) = scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::invalid(format!("encoder scale must be positive, got {bad}")));
        }
        self.scales = scales;
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// Row-major weight matrix, `None` for the identity encoder.
    pub fn weights(&self) -> Option<&[f64]> {
        match &self.mapping {
            Mapping::RandomTanh { weights, .. } => Some(weights),
            Mapping::Identity => None,
        }
    }

    pub fn encode(&self, obs: &[f64]) -> Result<StatePoint> {
        if obs.len() != self.in_dim {
            return Err(Error::invalid(format!(
                "observation has length {}, encoder expects {}",
                obs.len(),
                self.in_dim
            )));
        }
        let out = match &self.mapping {
            Mapping::Identity => obs.iter().zip(&self.scales).map(|(x, s)| x * s).collect(),
            Mapping::RandomTanh { weights, bias } => weights
                .chunks_exact(self.in_dim)
                .zip(bias)
                .zip(&self.scales)
                .map(|((row, b), s)| {
                    let z: f64 = row.iter().zip(obs).map(|(w, x)| w * x).sum::<f64>() + b;
                    z.tanh() * s
                })
                .collect(),
        };
        Ok(StatePoint::new(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn same_seed_same_weights() {
        let a = FixedEncoder::new(7, 4, 2).unwrap();
        let b = FixedEncoder::new(7, 4, 2).unwrap();
        assert_eq!(a.weights(), b.weights());
        let c = FixedEncoder::new(8, 4, 2).unwrap();
        assert_ne!(a.weights(), c.weights());
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(FixedEncoder::new(1, 0, 2), Err(Error::InvalidArgument(_))));
        assert!(matches!(FixedEncoder::new(1, 3, 0), Err(Error::InvalidArgument(_))));
        assert!(FixedEncoder::identity(0).is_err());
    }

    #[test]
    fn zero_obs_maps_to_zero() {
        let enc = FixedEncoder::new(3, 5, 4).unwrap();
        let s = enc.encode(&[0.0; 5]).unwrap();
        assert_eq!(s.coords(), &[0.0; 4]);
    }

    #[test]
    fn wrong_length_rejected() {
        let enc = FixedEncoder::new(3, 5, 4).unwrap();
        assert!(matches!(enc.encode(&[1.0; 4]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn identity_with_scale() {
        let enc = FixedEncoder::identity(2).unwrap().with_scale(0.5).unwrap();
        assert_eq!(enc.encode(&[4.0, -2.0]).unwrap().coords(), &[2.0, -1.0]);
        let enc = FixedEncoder::identity(2)
            .unwrap()
            .with_block_scales(vec![1.0, 3.0])
            .unwrap();
        assert_eq!(enc.encode(&[4.0, -2.0]).unwrap().coords(), &[4.0, -6.0]);
        assert!(FixedEncoder::identity(2).unwrap().with_scale(0.0).is_err());
    }

    proptest! {
        #[test]
        fn outputs_bounded_and_pure(seed in 0u64..1000, obs in prop::collection::vec(-50.0f64..50.0, 6)) {
            let enc = FixedEncoder::new(seed, 6, 3).unwrap();
            let a = enc.encode(&obs).unwrap();
            let b = FixedEncoder::new(seed, 6, 3).unwrap().encode(&obs).unwrap();
            prop_assert_eq!(&a, &b);
            for x in a.coords() {
                prop_assert!(*x >= -1.0 && *x <= 1.0);
            }
        }
    }
}
