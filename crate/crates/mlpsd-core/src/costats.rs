//! Label co-occurrence counts and the conditional similarity matrix.

use ndarray::Array2;

use crate::dataset::AnnotationSet;

/// Exact pair counts and the row-conditional similarity S_ij = e_ij / n_i.
///
/// `pair_counts` is symmetric with e_ii = n_i. `similarity` is generally NOT
/// symmetric: S_ij is the fraction of samples containing category i that also
/// contain category j. Rows of categories that never occur are all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CoOccurrenceStats {
    pub pair_counts: Array2<u64>,
    pub class_counts: alloc::vec::Vec<u64>,
    pub similarity: Array2<f64>,
}

impl CoOccurrenceStats {
    pub fn num_categories(&self) -> usize {
        self.class_counts.len()
    }
}

/// Counts co-occurrences over the whole set.
///
/// Counts are exact integers; the division into S happens once, in double
/// precision, so the result does not depend on sample order.
pub fn compute_stats(set: &AnnotationSet) -> CoOccurrenceStats {
    let m = set.num_categories();
    let mut e = Array2::<u64>::zeros((m, m));
    let mut n = alloc::vec![0u64; m];

    for s in &set.samples {
        let positives: alloc::vec::Vec<usize> = (0..m).filter(|&j| s.labels[j] == 1).collect();
        for (a, &i) in positives.iter().enumerate() {
            n[i] += 1;
            e[[i, i]] += 1;
            for &j in &positives[a + 1..] {
                e[[i, j]] += 1;
                e[[j, i]] += 1;
            }
        }
    }

    let mut similarity = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        if n[i] > 0 {
            for j in 0..m {
                similarity[[i, j]] = e[[i, j]] as f64 / n[i] as f64;
            }
        }
    }

    CoOccurrenceStats {
        pair_counts: e,
        class_counts: n,
        similarity,
    }
}
