use crate::error::{Error, Result};

/// ROC points from `(0, 0)` to `(1, 1)` as `(fpr, tpr)`, and the area under
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

fn class_counts(scores: &[(f64, bool)]) -> Result<(usize, usize)> {
    let pos = scores.iter().filter(|s| s.1).count();
    let neg = scores.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Protocol(format!(
            "need both same and different pairs, got {pos} same and {neg} different"
        )));
    }
    if let Some(s) = scores.iter().find(|s| !s.0.is_finite()) {
        return Err(Error::Protocol(format!("non-finite score {}", s.0)));
    }
    Ok((pos, neg))
}

/// Sweeps the threshold down through the distinct scores; equal scores are
/// crossed together, so ties add one diagonal segment. Area by trapezoids.
pub fn roc_auc(scores: &[(f64, bool)]) -> Result<RocCurve> {
    let (pos, neg) = class_counts(scores)?;
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == score {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }

    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomSource;

    /// P(score⁺ > score⁻) + ½·P(score⁺ = score⁻) by enumerating all pairs.
    fn mann_whitney(scores: &[(f64, bool)]) -> f64 {
        let pos: Vec<f64> = scores.iter().filter(|s| s.1).map(|s| s.0).collect();
        let neg: Vec<f64> = scores.iter().filter(|s| !s.1).map(|s| s.0).collect();
        let mut wins = 0.0;
        for p in &pos {
            for n in &neg {
                if p > n {
                    wins += 1.0;
                } else if p == n {
                    wins += 0.5;
                }
            }
        }
        wins / (pos.len() * neg.len()) as f64
    }

    #[test]
    fn perfect_separation() {
        let s = [(0.9, true), (0.8, true), (0.2, false), (0.1, false)];
        assert_eq!(roc_auc(&s).unwrap().auc, 1.0);
    }

    #[test]
    fn constant_score_is_chance() {
        let s = [(0.3, true), (0.3, false), (0.3, true), (0.3, false)];
        let r = roc_auc(&s).unwrap();
        assert_eq!(r.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(r.auc, 0.5);
    }

    #[test]
    fn four_pair_fixture() {
        let s = [(0.9, true), (0.8, false), (0.7, true), (0.1, false)];
        assert_eq!(mann_whitney(&s), 0.75);
        assert_eq!(roc_auc(&s).unwrap().auc, 0.75);
    }

    #[test]
    fn single_class_is_rejected() {
        assert!(matches!(roc_auc(&[(0.5, true), (0.2, true)]), Err(Error::Protocol(_))));
    }

    #[test]
    fn matches_mann_whitney_with_ties() {
        let mut rng = RandomSource::new(8);
        for trial in 0..200 {
            let n = 2 + rng.index(199);
            let mut s: Vec<(f64, bool)> = (0..n)
                .map(|_| {
                    let same = rng.uniform() < 0.5;
                    // coarse grid forces ties
                    let raw = rng.gaussian() + if same { 0.7 } else { 0.0 };
                    ((raw * 4.0).round() / 4.0, same)
                })
                .collect();
            s[0].1 = true;
            s[1].1 = false;
            let r = roc_auc(&s).unwrap();
            assert!((r.auc - mann_whitney(&s)).abs() < 1e-12, "trial {trial}");
            assert!(r.points.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1));
            assert_eq!(*r.points.last().unwrap(), (1.0, 1.0));
        }
    }
}
