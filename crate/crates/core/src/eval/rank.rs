use super::{EmbeddingSet, EvalReport};
use crate::error::{Error, Result};
use crate::numerics::{normalize_rows, Matrix};
use crate::par;

/// Index of the most similar row of `candidates` (rows already unit norm);
/// ties go to the lowest index.
fn best_match(candidates: &Matrix, probe_dir: &[f64]) -> usize {
    let mut best = 0;
    let mut best_sim = f64::NEG_INFINITY;
    for (j, row) in candidates.iter_rows().enumerate() {
        let sim = crate::numerics::dot(row, probe_dir);
        if sim > best_sim {
            best_sim = sim;
            best = j;
        }
    }
    best
}

fn check_nonzero(m: &Matrix, what: &str) -> Result<()> {
    match m.iter_rows().position(|r| r.iter().all(|&v| v == 0.0)) {
        Some(i) => Err(Error::Degenerate(format!("{what} row {i} is the zero vector"))),
        None => Ok(()),
    }
}

/// Fraction of probes whose most similar gallery entry has their identity.
pub fn rank1_identification(gallery: &EmbeddingSet, probe: &EmbeddingSet) -> Result<EvalReport> {
    let empty = Matrix::zeros(0, gallery.embeddings.cols());
    let mut report = distractor_rank1(gallery, &empty, probe)?;
    report.protocol = "rank1".into();
    report.counts.remove("distractors");
    Ok(report)
}

/// Rank-1 over the gallery plus unlabelled distractors; a probe whose best
/// match is a distractor counts as a miss. Gallery entries win ties.
pub fn distractor_rank1(
    gallery: &EmbeddingSet,
    distractors: &Matrix,
    probe: &EmbeddingSet,
) -> Result<EvalReport> {
    if gallery.is_empty() {
        return Err(Error::Protocol("gallery is empty".into()));
    }
    let dim = gallery.embeddings.cols();
    if probe.embeddings.cols() != dim || (distractors.rows() > 0 && distractors.cols() != dim) {
        return Err(Error::Shape(format!(
            "gallery width {dim}, probe width {}, distractor width {}",
            probe.embeddings.cols(),
            distractors.cols()
        )));
    }
    check_nonzero(&gallery.embeddings, "gallery")?;
    check_nonzero(&probe.embeddings, "probe")?;
    check_nonzero(distractors, "distractor")?;

    let mut pool = gallery.embeddings.data().to_vec();
    pool.extend_from_slice(distractors.data());
    let pool = normalize_rows(
        &Matrix::new(gallery.len() + distractors.rows(), dim, pool)?,
        f64::MIN_POSITIVE,
    );
    let probes = normalize_rows(&probe.embeddings, f64::MIN_POSITIVE);

    let picks = par::map_range(probe.len(), |i| best_match(&pool, probes.row(i)));
    let hits = picks
        .iter()
        .zip(&probe.identities)
        .filter(|(&j, &id)| j < gallery.len() && gallery.identities[j] == id)
        .count();
    let distractor_picks = picks.iter().filter(|&&j| j >= gallery.len()).count();

    let mut report = EvalReport::new("distractor_rank1");
    let rate = if probe.is_empty() { 0.0 } else { hits as f64 / probe.len() as f64 };
    report.metrics.insert("rank1".into(), rate);
    report.counts.insert("gallery".into(), gallery.len());
    report.counts.insert("probe".into(), probe.len());
    report.counts.insert("distractors".into(), distractors.rows());
    report.counts.insert("hits".into(), hits);
    report.counts.insert("distractor_picks".into(), distractor_picks);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::identity_similarity;

    fn set(rows: &[&[f64]], ids: &[usize]) -> EmbeddingSet {
        EmbeddingSet::new(Matrix::from_rows(rows).unwrap(), ids.to_vec()).unwrap()
    }

    #[test]
    fn probe_identical_to_gallery_entry() {
        let g = set(&[&[1.0, 0.0], &[0.0, 1.0], &[-1.0, 0.2]], &[7, 8, 9]);
        let p = set(&[&[0.0, 1.0]], &[8]);
        assert_eq!(rank1_identification(&g, &p).unwrap().metric("rank1"), Some(1.0));
    }

    #[test]
    fn single_gallery_entry() {
        let g = set(&[&[1.0, 1.0]], &[3]);
        assert_eq!(rank1_identification(&g, &set(&[&[-5.0, 2.0]], &[3])).unwrap().metric("rank1"), Some(1.0));
        assert_eq!(rank1_identification(&g, &set(&[&[1.0, 1.0]], &[4])).unwrap().metric("rank1"), Some(0.0));
    }

    #[test]
    fn hand_fixture_two_of_three() {
        // gallery directions at 0°, 90°, 180°; identities 0, 1, 2
        let g = set(&[&[2.0, 0.0], &[0.0, 1.0], &[-3.0, 0.0]], &[0, 1, 2]);
        // probe 0 at 10° (cos: .985, .174, −.985) → 0 ✓
        // probe 1 at 100° (cos: −.174, .985, .174) → 1 ✓
        // probe 2 at 60° (cos: .5, .866, −.5) → 1 ✗ (truth 2)
        let d = |deg: f64| [deg.to_radians().cos(), deg.to_radians().sin()];
        let (a, b, c) = (d(10.0), d(100.0), d(60.0));
        let p = set(&[&a, &b, &c], &[0, 1, 2]);
        let expected = [[0.985, 0.174, -0.985], [-0.174, 0.985, 0.174], [0.5, 0.866, -0.5]];
        for (i, row) in expected.iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                let sim = identity_similarity(p.embeddings.row(i), g.embeddings.row(j)).unwrap();
                assert!((sim - e).abs() < 1e-3);
            }
        }
        let r = rank1_identification(&g, &p).unwrap();
        assert!((r.metric("rank1").unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn distractors() {
        let g = set(&[&[1.0, 0.0], &[0.0, 1.0]], &[0, 1]);
        let p = set(&[&[1.0, 0.1], &[0.1, 1.0]], &[0, 1]);
        let none = Matrix::zeros(0, 2);
        assert_eq!(
            distractor_rank1(&g, &none, &p).unwrap().metric("rank1"),
            rank1_identification(&g, &p).unwrap().metric("rank1")
        );
        // decoy identical to probe 0
        let decoy = Matrix::from_rows(&[[1.0, 0.1]]).unwrap();
        assert_eq!(distractor_rank1(&g, &decoy, &p).unwrap().metric("rank1"), Some(0.5));
        // decoy at 3° from probe 1's true match direction, closer than the gallery entry
        let decoy = Matrix::from_rows(&[[0.1, 1.02]]).unwrap();
        let r = distractor_rank1(&g, &decoy, &p).unwrap();
        assert_eq!(r.metric("rank1"), Some(0.5));
        assert_eq!(r.counts["distractor_picks"], 1);
    }

    #[test]
    fn empty_gallery() {
        let g = EmbeddingSet::new(Matrix::zeros(0, 2), vec![]).unwrap();
        assert!(matches!(rank1_identification(&g, &set(&[&[1.0, 0.0]], &[0])), Err(Error::Protocol(_))));
    }
}
