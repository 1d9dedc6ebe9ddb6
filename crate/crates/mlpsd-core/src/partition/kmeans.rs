//! Seeded k-means with k-means++ initialization.
//!
//! Rules, in full, so every downstream partition is reproducible:
//! k-means++ seeding from a ChaCha substream per restart, Lloyd iterations
//! capped at 100, convergence when assignments stop changing, empty clusters
//! repaired by donating the point farthest from its current centroid, best of
//! 10 restarts by within-cluster sum of squares with ties going to the lowest
//! restart index. Assignment ties go to the lowest centroid index.

use alloc::vec;
use alloc::vec::Vec;

use ndarray::Array2;
use rand::Rng;

use crate::rng::substream;

const MAX_ITERS: usize = 100;
const RESTARTS: u64 = 10;

/// Clusters the rows of `points` into `k` groups. Requires k >= 1 and
/// at least k rows. Returns the per-row assignment of the best restart.
pub(crate) fn kmeans(points: &Array2<f64>, k: usize, seed: u64) -> Vec<usize> {
    debug_assert!(k >= 1 && points.nrows() >= k);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..RESTARTS {
        let (wcss, labels) = run_once(points, k, seed, restart);
        let better = match &best {
            None => true,
            Some((best_wcss, _)) => wcss < *best_wcss,
        };
        if better {
            best = Some((wcss, labels));
        }
    }
    best.expect("at least one restart").1
}

fn run_once(points: &Array2<f64>, k: usize, seed: u64, restart: u64) -> (f64, Vec<usize>) {
    let n = points.nrows();
    let dim = points.ncols();
    let mut rng = substream(seed, restart);

    let mut centroids = plus_plus_init(points, k, &mut rng);
    let mut labels = vec![0usize; n];

    for _ in 0..MAX_ITERS {
        let mut next = vec![0usize; n];
        for i in 0..n {
            let mut best_c = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = dist_sq_row(points, i, centroid);
                if d < best_d {
                    best_d = d;
                    best_c = c;
                }
            }
            next[i] = best_c;
        }

        repair_empty_clusters(points, &centroids, &mut next, k);

        let converged = next == labels;
        labels = next;

        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for j in 0..dim {
                sums[c][j] += points[[i, j]];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..dim {
                    centroids[c][j] = sums[c][j] / counts[c] as f64;
                }
            }
        }

        if converged {
            break;
        }
    }

    let wcss = labels
        .iter()
        .enumerate()
        .map(|(i, &c)| dist_sq_row(points, i, &centroids[c]))
        .sum();
    (wcss, labels)
}

/// k-means++ seeding: first centroid uniform, the rest proportional to the
/// squared distance to the nearest centroid chosen so far. Falls back to a
/// uniform draw when all remaining distances are zero (duplicated points).
fn plus_plus_init<R: Rng>(points: &Array2<f64>, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.nrows();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points.row(rng.gen_range(0..n)).to_vec());
    while centroids.len() < k {
        let d2: Vec<f64> = (0..n)
            .map(|i| {
                centroids
                    .iter()
                    .map(|c| dist_sq_row(points, i, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.gen::<f64>() * total;
            let mut cumulative = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                cumulative += w;
                if u < cumulative {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centroids.push(points.row(pick).to_vec());
    }
    centroids
}

/// Moves, for each empty cluster in ascending index order, the point farthest
/// from its current centroid (among clusters that can spare one) into it.
fn repair_empty_clusters(
    points: &Array2<f64>,
    centroids: &[Vec<f64>],
    labels: &mut [usize],
    k: usize,
) {
    let mut sizes = vec![0usize; k];
    for &c in labels.iter() {
        sizes[c] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut donor: Option<(f64, usize)> = None;
        for (i, &c) in labels.iter().enumerate() {
            if sizes[c] < 2 {
                continue;
            }
            let d = dist_sq_row(points, i, &centroids[c]);
            let take = match donor {
                None => true,
                Some((best_d, _)) => d > best_d,
            };
            if take {
                donor = Some((d, i));
            }
        }
        if let Some((_, i)) = donor {
            sizes[labels[i]] -= 1;
            labels[i] = empty;
            sizes[empty] += 1;
        }
    }
}

fn dist_sq_row(points: &Array2<f64>, row: usize, center: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (j, &c) in center.iter().enumerate() {
        let d = points[[row, j]] - c;
        acc += d * d;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn separates_two_obvious_groups() {
        let points = array![
            [0.0, 0.0],
            [0.1, 0.0],
            [0.0, 0.1],
            [5.0, 5.0],
            [5.1, 5.0],
            [5.0, 5.1],
        ];
        let labels = kmeans(&points, 2, 1);
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[0], labels[2]);
        assert_eq!(labels[3], labels[4]);
        assert_eq!(labels[3], labels[5]);
        assert_ne!(labels[0], labels[3]);
    }

    #[test]
    fn coincident_duplicates_form_their_own_clusters() {
        let points = array![[1.0, 1.0], [1.0, 1.0], [4.0, 0.0], [4.0, 0.0]];
        let labels = kmeans(&points, 2, 3);
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[2], labels[3]);
        assert_ne!(labels[0], labels[2]);
    }

    #[test]
    fn is_deterministic_for_a_seed() {
        let points = array![
            [0.0, 1.0],
            [0.2, 0.9],
            [3.0, 3.0],
            [3.1, 2.9],
            [-2.0, 0.0],
            [-2.1, 0.1],
        ];
        let a = kmeans(&points, 3, 77);
        let b = kmeans(&points, 3, 77);
        assert_eq!(a, b);
    }

    #[test]
    fn every_cluster_ends_up_nonempty() {
        // All points identical: clusters must still all be populated.
        let points = Array2::from_elem((5, 2), 1.0);
        let labels = kmeans(&points, 3, 5);
        for c in 0..3 {
            assert!(labels.iter().any(|&l| l == c), "cluster {c} empty");
        }
    }
}
