//! Turning posteriors into labels: MAP cluster assignment, the two-step
//! good/bad decision, and agreement with known classes.
//!
//! An observation is classified in two steps: first its component of
//! membership (the largest responsibility), then whether it is good or bad
//! inside that component (`v` at the assigned component above 0.5 means
//! good, with the tie at exactly 0.5 counting as bad).

use nalgebra::DMatrix;
use pathfinding::matrix::Matrix as PfMatrix;
use pathfinding::prelude::kuhn_munkres;

use crate::ecm::Posteriors;
use crate::error::{Error, Result};

/// The default good/bad cut on the posterior good probability.
pub const BAD_THRESHOLD: f64 = 0.5;

/// Largest cluster count matched by exhaustive permutation search; above it
/// an assignment-problem solver takes over.
const EXHAUSTIVE_MATCH_LIMIT: usize = 8;

/// Per-observation classification summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationLabel {
    /// Stable identifier of the underlying data row.
    pub row_id: usize,
    /// Assigned cluster, 1-based.
    pub cluster: usize,
    /// True when the observation is flagged as a bad point.
    pub is_bad: bool,
    /// The winning responsibility.
    pub z_max: f64,
    /// Good probability at the assigned component.
    pub v_at_map: f64,
}

/// MAP assignment: the index of each row's largest responsibility,
/// 0-based, ties broken toward the lowest index.
pub fn map_assign(z: &DMatrix<f64>) -> Vec<usize> {
    (0..z.nrows())
        .map(|i| {
            let mut best = 0;
            for k in 1..z.ncols() {
                if z[(i, k)] > z[(i, best)] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Flags each observation as bad when its good probability at the MAP
/// component does not exceed `threshold`.
pub fn detect_bad_with_threshold(
    z: &DMatrix<f64>,
    v: &DMatrix<f64>,
    threshold: f64,
) -> Result<Vec<bool>> {
    if z.shape() != v.shape() {
        return Err(Error::DimensionMismatch {
            expected: z.nrows(),
            found: v.nrows(),
        });
    }
    let assigned = map_assign(z);
    Ok(assigned
        .iter()
        .enumerate()
        .map(|(i, &k)| v[(i, k)] <= threshold)
        .collect())
}

/// [`detect_bad_with_threshold`] at the standard 0.5 cut. Good requires the
/// strict inequality `v > 0.5`; exactly 0.5 is bad.
pub fn detect_bad(z: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<Vec<bool>> {
    detect_bad_with_threshold(z, v, BAD_THRESHOLD)
}

/// Builds the per-observation labels from fitted posteriors.
pub fn label_observations(
    row_ids: &[usize],
    posteriors: &Posteriors,
    threshold: f64,
) -> Result<Vec<ObservationLabel>> {
    let z = posteriors.z();
    let v = posteriors.v();
    if row_ids.len() != z.nrows() {
        return Err(Error::LabelLengthMismatch {
            left: row_ids.len(),
            right: z.nrows(),
        });
    }
    let assigned = map_assign(z);
    Ok(assigned
        .iter()
        .enumerate()
        .map(|(i, &k)| ObservationLabel {
            row_id: row_ids[i],
            cluster: k + 1,
            is_bad: v[(i, k)] <= threshold,
            z_max: z[(i, k)],
            v_at_map: v[(i, k)],
        })
        .collect())
}

/// Which rows a misallocation count includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MisallocationMode {
    /// Count every observation in its MAP cluster, bad points included.
    Merged,
    /// Count only observations not flagged as bad.
    GoodOnly,
}

/// Minimal number of misallocated observations over all matchings of
/// clusters to true classes.
///
/// Matching is exhaustive up to 8 clusters/classes and solved as an
/// assignment problem beyond that; the result is invariant to renumbering
/// either side.
pub fn misallocation_count(
    labels: &[ObservationLabel],
    truth: &[usize],
    mode: MisallocationMode,
) -> Result<usize> {
    if labels.len() != truth.len() {
        return Err(Error::LabelLengthMismatch {
            left: labels.len(),
            right: truth.len(),
        });
    }
    let included: Vec<(usize, usize)> = labels
        .iter()
        .zip(truth)
        .filter(|(l, _)| mode == MisallocationMode::Merged || !l.is_bad)
        .map(|(l, &t)| (l.cluster - 1, t))
        .collect();
    if included.is_empty() {
        return Ok(0);
    }
    let clusters: Vec<usize> = included.iter().map(|(c, _)| *c).collect();
    let classes: Vec<usize> = included.iter().map(|(_, t)| *t).collect();
    let agreement = best_agreement(&clusters, &classes);
    Ok(included.len() - agreement)
}

/// Largest achievable number of agreeing rows over one-to-one matchings of
/// cluster ids to class ids.
fn best_agreement(clusters: &[usize], classes: &[usize]) -> usize {
    let (cluster_ids, cluster_idx) = compress(clusters);
    let (class_ids, class_idx) = compress(classes);
    let k = cluster_ids.len().max(class_ids.len());
    // Padded square contingency table of counts.
    let mut table = vec![vec![0i64; k]; k];
    for (c, t) in cluster_idx.iter().zip(&class_idx) {
        table[*c][*t] += 1;
    }
    if k <= EXHAUSTIVE_MATCH_LIMIT {
        let mut perm: Vec<usize> = (0..k).collect();
        let mut best = 0i64;
        permute(&mut perm, 0, &mut |p| {
            let total: i64 = p.iter().enumerate().map(|(row, &col)| table[row][col]).sum();
            best = best.max(total);
        });
        best as usize
    } else {
        let weights =
            PfMatrix::from_rows(table).expect("square table rows have equal length");
        let (total, _) = kuhn_munkres(&weights);
        total as usize
    }
}

fn compress(ids: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut distinct: Vec<usize> = ids.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let index = ids
        .iter()
        .map(|id| distinct.binary_search(id).expect("id present"))
        .collect();
    (distinct, index)
}

fn permute(perm: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == perm.len() {
        visit(perm);
        return;
    }
    for i in start..perm.len() {
        perm.swap(start, i);
        permute(perm, start + 1, visit);
        perm.swap(start, i);
    }
}

/// Cross-tabulation of true classes against assigned clusters, with an
/// optional separate column for flagged bad points.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionTable {
    /// Distinct true class ids, ascending; one table row each.
    pub class_ids: Vec<usize>,
    /// `counts[row][cluster]`, clusters 0-based over 1..=G.
    pub counts: Vec<Vec<usize>>,
    /// Bad-point counts per class when split out, `None` in merged tables.
    pub bad: Option<Vec<usize>>,
}

impl ConfusionTable {
    /// Bad points counted inside their MAP cluster.
    pub fn merged(labels: &[ObservationLabel], truth: &[usize], g: usize) -> Result<Self> {
        Self::build(labels, truth, g, false)
    }

    /// Bad points pulled out of their cluster into a dedicated column.
    pub fn split_bad(labels: &[ObservationLabel], truth: &[usize], g: usize) -> Result<Self> {
        Self::build(labels, truth, g, true)
    }

    fn build(
        labels: &[ObservationLabel],
        truth: &[usize],
        g: usize,
        split: bool,
    ) -> Result<Self> {
        if labels.len() != truth.len() {
            return Err(Error::LabelLengthMismatch {
                left: labels.len(),
                right: truth.len(),
            });
        }
        let mut class_ids: Vec<usize> = truth.to_vec();
        class_ids.sort_unstable();
        class_ids.dedup();
        let mut counts = vec![vec![0usize; g]; class_ids.len()];
        let mut bad = vec![0usize; class_ids.len()];
        for (label, t) in labels.iter().zip(truth) {
            let row = class_ids.binary_search(t).expect("class id present");
            if split && label.is_bad {
                bad[row] += 1;
            } else {
                if label.cluster == 0 || label.cluster > g {
                    return Err(Error::IndexOutOfRange {
                        index: label.cluster,
                        len: g,
                    });
                }
                counts[row][label.cluster - 1] += 1;
            }
        }
        Ok(Self {
            class_ids,
            counts,
            bad: split.then_some(bad),
        })
    }

    /// Sum of every cell (and the bad column, when present); equals n.
    pub fn total(&self) -> usize {
        let cells: usize = self.counts.iter().flatten().sum();
        cells + self.bad.as_ref().map_or(0, |b| b.iter().sum())
    }
}

/// Adjusted Rand index between two labelings of the same rows; 1 is perfect
/// agreement, 0 is chance level.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LabelLengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyData);
    }
    let (a_ids, a_idx) = compress(a);
    let (b_ids, b_idx) = compress(b);
    let mut table = vec![vec![0usize; b_ids.len()]; a_ids.len()];
    for (i, j) in a_idx.iter().zip(&b_idx) {
        table[*i][*j] += 1;
    }
    let choose2 = |x: usize| (x * x.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let row_sum: f64 = table.iter().map(|r| choose2(r.iter().sum())).sum();
    let col_sum: f64 = (0..b_ids.len())
        .map(|j| choose2(table.iter().map(|r| r[j]).sum()))
        .sum();
    let expected = row_sum * col_sum / choose2(a.len());
    let max_index = 0.5 * (row_sum + col_sum);
    if (max_index - expected).abs() < 1e-12 {
        return Ok(1.0);
    }
    Ok((index - expected) / (max_index - expected))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(cluster: usize, is_bad: bool) -> ObservationLabel {
        ObservationLabel {
            row_id: 0,
            cluster,
            is_bad,
            z_max: 1.0,
            v_at_map: if is_bad { 0.1 } else { 0.9 },
        }
    }

    #[test]
    fn map_assign_examples_and_tie_break() {
        let z = DMatrix::from_row_slice(3, 2, &[0.9, 0.1, 0.5, 0.5, 0.2, 0.8]);
        assert_eq!(map_assign(&z), vec![0, 0, 1]);
    }

    #[test]
    fn map_assign_matches_brute_force_argmax() {
        let z = DMatrix::from_fn(20, 4, |i, j| ((i * 7 + j * 13) % 11) as f64 / 11.0);
        let ours = map_assign(&z);
        for i in 0..20 {
            let row: Vec<f64> = z.row(i).iter().cloned().collect();
            let best = row
                .iter()
                .enumerate()
                .fold(0usize, |acc, (j, v)| if *v > row[acc] { j } else { acc });
            assert_eq!(ours[i], best);
        }
    }

    #[test]
    fn detect_bad_threshold_is_strict_for_good() {
        let z = DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 1.0]);
        let v = DMatrix::from_row_slice(3, 1, &[0.9, 0.5, 0.1]);
        let flags = detect_bad(&z, &v).unwrap();
        assert_eq!(flags, vec![false, true, true]);
    }

    #[test]
    fn detect_bad_is_monotone_in_v() {
        let z = DMatrix::from_row_slice(1, 2, &[0.7, 0.3]);
        let mut previous_bad = false;
        for step in 0..=100 {
            let v_val = 1.0 - step as f64 / 100.0;
            let v = DMatrix::from_row_slice(1, 2, &[v_val, 0.5]);
            let bad = detect_bad(&z, &v).unwrap()[0];
            // Once bad, lowering v must keep it bad.
            assert!(!previous_bad || bad);
            previous_bad = bad;
        }
    }

    #[test]
    fn misallocation_perfect_and_swapped() {
        let labels: Vec<_> = (0..10)
            .map(|i| label(if i < 5 { 1 } else { 2 }, false))
            .collect();
        let truth: Vec<usize> = (0..10).map(|i| if i < 5 { 0 } else { 1 }).collect();
        assert_eq!(
            misallocation_count(&labels, &truth, MisallocationMode::Merged).unwrap(),
            0
        );

        // Swap three rows.
        let mut swapped = labels.clone();
        for i in [0usize, 1, 5] {
            swapped[i].cluster = 3 - swapped[i].cluster;
        }
        assert_eq!(
            misallocation_count(&swapped, &truth, MisallocationMode::Merged).unwrap(),
            3
        );
    }

    #[test]
    fn misallocation_is_permutation_invariant() {
        let truth: Vec<usize> = (0..12).map(|i| i % 3).collect();
        let labels: Vec<_> = (0..12).map(|i| label((i % 3) + 1, false)).collect();
        let renumbered: Vec<_> = (0..12).map(|i| label(((i + 1) % 3) + 1, false)).collect();
        let a = misallocation_count(&labels, &truth, MisallocationMode::Merged).unwrap();
        let b = misallocation_count(&renumbered, &truth, MisallocationMode::Merged).unwrap();
        assert_eq!(a, 0);
        assert_eq!(b, 0);
    }

    #[test]
    fn misallocation_degenerate_single_cluster() {
        // Everything in one cluster against a balanced two-class truth.
        let labels: Vec<_> = (0..100).map(|_| label(1, false)).collect();
        let truth: Vec<usize> = (0..100).map(|i| if i < 50 { 0 } else { 1 }).collect();
        assert_eq!(
            misallocation_count(&labels, &truth, MisallocationMode::Merged).unwrap(),
            50
        );
    }

    #[test]
    fn misallocation_good_only_excludes_flagged_rows() {
        let mut labels: Vec<_> = (0..10)
            .map(|i| label(if i < 5 { 1 } else { 2 }, false))
            .collect();
        let truth: Vec<usize> = (0..10).map(|i| if i < 5 { 0 } else { 1 }).collect();
        // Two deliberately wrong rows, one of them flagged bad.
        labels[0].cluster = 2;
        labels[1].cluster = 2;
        labels[1].is_bad = true;
        assert_eq!(
            misallocation_count(&labels, &truth, MisallocationMode::Merged).unwrap(),
            2
        );
        assert_eq!(
            misallocation_count(&labels, &truth, MisallocationMode::GoodOnly).unwrap(),
            1
        );
    }

    #[test]
    fn misallocation_rejects_length_mismatch() {
        let labels = vec![label(1, false)];
        assert!(misallocation_count(&labels, &[0, 1], MisallocationMode::Merged).is_err());
    }

    #[test]
    fn exhaustive_and_assignment_matching_agree() {
        // 9 clusters forces the assignment solver; compare with the
        // exhaustive answer computed on the same data via a lower limit.
        let clusters: Vec<usize> = (0..45).map(|i| i % 9).collect();
        let classes: Vec<usize> = (0..45).map(|i| (i + i / 9) % 9).collect();
        let direct = best_agreement(&clusters, &classes);
        // Brute force over all 9! permutations is still feasible here.
        let mut table = vec![vec![0i64; 9]; 9];
        for (c, t) in clusters.iter().zip(&classes) {
            table[*c][*t] += 1;
        }
        let mut perm: Vec<usize> = (0..9).collect();
        let mut best = 0i64;
        permute(&mut perm, 0, &mut |p| {
            best = best.max(p.iter().enumerate().map(|(r, &c)| table[r][c]).sum());
        });
        assert_eq!(direct, best as usize);
    }

    #[test]
    fn confusion_tables_partition_the_rows() {
        let labels: Vec<_> = (0..8)
            .map(|i| label(if i < 4 { 1 } else { 2 }, i % 4 == 0))
            .collect();
        let truth: Vec<usize> = (0..8).map(|i| if i < 4 { 7 } else { 9 }).collect();
        let merged = ConfusionTable::merged(&labels, &truth, 2).unwrap();
        assert_eq!(merged.total(), 8);
        assert_eq!(merged.class_ids, vec![7, 9]);
        assert!(merged.bad.is_none());

        let split = ConfusionTable::split_bad(&labels, &truth, 2).unwrap();
        assert_eq!(split.total(), 8);
        assert_eq!(split.bad, Some(vec![1, 1]));
        // Good rows plus bad rows recover the merged row sums.
        for (row, class_counts) in split.counts.iter().enumerate() {
            let split_total: usize =
                class_counts.iter().sum::<usize>() + split.bad.as_ref().unwrap()[row];
            let merged_total: usize = merged.counts[row].iter().sum();
            assert_eq!(split_total, merged_total);
        }
    }

    #[test]
    fn ari_basics() {
        let a = vec![0, 0, 1, 1, 2, 2];
        assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
        let renamed = vec![5, 5, 9, 9, 7, 7];
        assert_eq!(adjusted_rand_index(&a, &renamed).unwrap(), 1.0);
        let anti = vec![0, 1, 0, 1, 0, 1];
        assert!(adjusted_rand_index(&a, &anti).unwrap() < 0.2);
    }
}
