//! Seeded synthetic cross-age data.
//!
//! Each identity owns a unit prototype direction; ageing scales the
//! prototype up and pushes every identity along one shared drift
//! direction, so age leaks into both the norm and the direction of the
//! raw inputs.

mod io;
mod pairs;
mod split;

pub use io::{
    parse_dataset, parse_pairs, parse_split, read_dataset, read_pairs, read_split, write_dataset,
    write_pairs, write_split, DATASET_HEADER, SPLIT_HEADER,
};
pub use pairs::{make_pairs, Pair};
pub use split::{make_cross_age_split, CrossAgeSplit};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, RandomSource};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_identities: usize,
    pub input_dim: usize,
    pub samples_per_identity: usize,
    pub age_range: (f64, f64),
    pub age_effect: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_identities: 10,
            input_dim: 16,
            samples_per_identity: 20,
            age_range: (1.0, 5.0),
            age_effect: 1.0,
            noise_sigma: 0.1,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_identities < 2 {
            return Err(Error::config("num_identities", "need at least 2 identities"));
        }
        if self.input_dim < 2 {
            return Err(Error::config("input_dim", "must be >= 2"));
        }
        if self.samples_per_identity == 0 {
            return Err(Error::config("samples_per_identity", "must be >= 1"));
        }
        let (lo, hi) = self.age_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::config("age_range", format!("need z_min < z_max, got ({lo}, {hi})")));
        }
        if !(self.age_effect >= 0.0 && self.age_effect.is_finite()) {
            return Err(Error::config("age_effect", "must be >= 0"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::config("noise_sigma", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub input: Vec<f64>,
    pub identity: usize,
    pub age: f64,
}

/// Generates `num_identities × samples_per_identity` samples, identity-major.
///
/// Ages are stratified: an identity's `S` samples take one uniform draw
/// from each of `S` equal slices of the age range (in shuffled order), so
/// every identity spans the range and each age is still marginally
/// uniform. Identity `c` draws from random stream `c + 1`; stream 0 holds
/// the shared drift direction.
pub fn generate(spec: &SyntheticSpec) -> Result<Vec<SyntheticSample>> {
    spec.validate()?;
    let dim = spec.input_dim;
    let drift = RandomSource::with_stream(spec.seed, 0).unit_vector(dim);
    let (z_min, z_max) = spec.age_range;
    let span = z_max - z_min;
    let per = spec.samples_per_identity;

    let groups = par::map_range(spec.num_identities, |c| {
        let mut rng = RandomSource::with_stream(spec.seed, c as u64 + 1);
        let prototype = rng.unit_vector(dim);
        let mut strata: Vec<usize> = (0..per).collect();
        rng.shuffle(&mut strata);
        strata
            .into_iter()
            .map(|slot| {
                let frac = (slot as f64 + rng.uniform()) / per as f64;
                let age = (z_min + frac * span).min(z_max);
                let z_hat = (age - z_min) / span;
                let radial = 1.0 + spec.age_effect * z_hat;
                let shift = spec.age_effect * z_hat;
                let input = prototype
                    .iter()
                    .zip(&drift)
                    .map(|(p, d)| radial * p + shift * d + spec.noise_sigma * rng.gaussian())
                    .collect();
                SyntheticSample { input, identity: c, age }
            })
            .collect::<Vec<_>>()
    });
    Ok(groups.into_iter().flatten().collect())
}

/// Stacks sample inputs into a matrix.
pub fn input_matrix(samples: &[SyntheticSample]) -> Result<Matrix> {
    Matrix::from_rows(&samples.iter().map(|s| s.input.as_slice()).collect::<Vec<_>>())
}
