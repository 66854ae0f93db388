use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::SyntheticSample;
use crate::error::{Error, Result};
use crate::numerics::RandomSource;

/// Two sample indices and whether they share an identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pair {
    pub a: usize,
    pub b: usize,
    pub same: bool,
}

/// Samples verification pairs without replacement.
///
/// Positives are taken round-robin over identities (visited in seeded
/// order), each identity yielding its same-identity pairs largest age gap
/// first. Negatives are drawn uniformly among different-identity pairs.
/// The combined list is shuffled so contiguous folds mix both classes.
pub fn make_pairs(
    samples: &[SyntheticSample],
    num_positive: usize,
    num_negative: usize,
    seed: u64,
) -> Result<Vec<Pair>> {
    let mut rng = RandomSource::new(seed);
    let mut by_identity: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        by_identity.entry(s.identity).or_default().push(i);
    }

    let available_pos: usize = by_identity.values().map(|v| v.len() * (v.len().saturating_sub(1)) / 2).sum();
    if num_positive > available_pos {
        return Err(Error::config(
            "num_positive",
            format!("requested {num_positive} positive pairs, only {available_pos} exist"),
        ));
    }
    let n = samples.len();
    let available_neg = n * n.saturating_sub(1) / 2 - available_pos;
    if num_negative > available_neg {
        return Err(Error::config(
            "num_negative",
            format!("requested {num_negative} negative pairs, only {available_neg} exist"),
        ));
    }

    let mut queues: Vec<VecDeque<(usize, usize)>> = by_identity
        .values()
        .map(|members| {
            let mut ps: Vec<(usize, usize)> = Vec::new();
            for (x, &a) in members.iter().enumerate() {
                for &b in &members[x + 1..] {
                    ps.push((a, b));
                }
            }
            ps.sort_by(|p, q| {
                let gp = (samples[p.0].age - samples[p.1].age).abs();
                let gq = (samples[q.0].age - samples[q.1].age).abs();
                gq.total_cmp(&gp).then(p.cmp(q))
            });
            ps.into()
        })
        .collect();
    rng.shuffle(&mut queues);

    let mut pairs = Vec::with_capacity(num_positive + num_negative);
    while pairs.len() < num_positive {
        for q in queues.iter_mut() {
            if pairs.len() == num_positive {
                break;
            }
            if let Some((a, b)) = q.pop_front() {
                pairs.push(Pair { a, b, same: true });
            }
        }
    }

    if num_negative * 2 > available_neg {
        let mut all = Vec::with_capacity(available_neg);
        for a in 0..n {
            for b in a + 1..n {
                if samples[a].identity != samples[b].identity {
                    all.push((a, b));
                }
            }
        }
        rng.shuffle(&mut all);
        pairs.extend(all.into_iter().take(num_negative).map(|(a, b)| Pair { a, b, same: false }));
    } else {
        let mut seen = BTreeSet::new();
        while seen.len() < num_negative {
            let a = rng.index(n);
            let b = rng.index(n);
            if samples[a].identity == samples[b].identity {
                continue;
            }
            let key = (a.min(b), a.max(b));
            if seen.insert(key) {
                pairs.push(Pair { a: key.0, b: key.1, same: false });
            }
        }
    }

    rng.shuffle(&mut pairs);
    Ok(pairs)
}
