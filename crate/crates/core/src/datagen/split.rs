use std::collections::BTreeMap;

use super::SyntheticSample;
use crate::error::{Error, Result};
use crate::numerics::RandomSource;

/// Sample indices of a cross-age identification split.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CrossAgeSplit {
    pub train: Vec<usize>,
    /// Youngest sample of each test identity, by ascending identity.
    pub gallery: Vec<usize>,
    /// Oldest sample of each test identity, aligned with `gallery`.
    pub probe: Vec<usize>,
}

/// Holds out `round(test_fraction · identities)` seeded-chosen identities.
///
/// Each held-out identity contributes its youngest sample to the gallery
/// and its oldest to the probe set; these must fall in the bottom and top
/// quarter of `age_range` respectively, which guarantees an age gap of at
/// least half the range. All samples of the other identities form the
/// training set.
pub fn make_cross_age_split(
    samples: &[SyntheticSample],
    age_range: (f64, f64),
    test_fraction: f64,
    seed: u64,
) -> Result<CrossAgeSplit> {
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(Error::config("test_fraction", "must lie in [0, 1]"));
    }
    let (z_min, z_max) = age_range;
    if !(z_min < z_max) {
        return Err(Error::config("age_range", "need z_min < z_max"));
    }
    let quarter = 0.25 * (z_max - z_min);

    let mut by_identity: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        by_identity.entry(s.identity).or_default().push(i);
    }
    let mut identities: Vec<usize> = by_identity.keys().copied().collect();
    let n_test = (test_fraction * identities.len() as f64).round() as usize;
    RandomSource::new(seed).shuffle(&mut identities);
    let mut test: Vec<usize> = identities[..n_test].to_vec();
    test.sort_unstable();

    let mut split = CrossAgeSplit::default();
    for &id in &test {
        let members = &by_identity[&id];
        // ties resolve to the lowest sample index
        let youngest = *members
            .iter()
            .min_by(|&&a, &&b| samples[a].age.total_cmp(&samples[b].age).then(a.cmp(&b)))
            .expect("identity has samples");
        let oldest = *members
            .iter()
            .max_by(|&&a, &&b| samples[a].age.total_cmp(&samples[b].age).then(b.cmp(&a)))
            .expect("identity has samples");
        if samples[youngest].age > z_min + quarter || samples[oldest].age < z_max - quarter {
            return Err(Error::Split(format!(
                "identity {id} lacks a sample in both the youngest and oldest age quartiles \
                 (ages {}..{})",
                samples[youngest].age, samples[oldest].age
            )));
        }
        split.gallery.push(youngest);
        split.probe.push(oldest);
    }
    for (id, members) in &by_identity {
        if test.binary_search(id).is_err() {
            split.train.extend(members);
        }
    }
    split.train.sort_unstable();
    Ok(split)
}
