//! Label-space partitioning by complementary spectral graph cuts.
//!
//! From the similarity matrix `S` two affinity graphs are built: the
//! co-occurrence graph `P+ = (S^(1/tau) + (S^(1/tau))^T) / 2` and its
//! complement `P- = B - P+`, where `B` is the all-ones matrix by default.
//! Each graph is partitioned as a normalized cut: the `k` eigenvectors of
//! `D^(-1/2) (D - P) D^(-1/2)` with smallest eigenvalues embed the categories,
//! and seeded k-means on the (row-normalized) embedding yields `k` disjoint
//! category clusters. Every cluster induces a sub-task containing exactly the
//! samples with at least one positive label inside it.
//!
//! On the complement base: never-co-occurring pairs should attract in the
//! dis-occurrence graph, which the all-ones complement delivers (affinity
//! `1 - P+`, diagonal 0). The literal identity complement is kept as a
//! variant; it produces negative off-diagonal affinities, and vertices whose
//! degree becomes nonpositive fall back to the isolated-vertex path.

mod eigen;
mod kmeans;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use ndarray::Array2;
use rand::seq::SliceRandom;

use crate::costats::CoOccurrenceStats;
use crate::dataset::AnnotationSet;
use crate::error::{Error, Result};
use crate::rng::substream;

/// Vertices with at most this much total affinity are treated as isolated:
/// they are excluded from the eigenproblem and attached to the smallest
/// cluster afterwards.
pub const ISOLATED_DEGREE_TOL: f64 = 1e-12;

/// Eigenvalues of the normalized Laplacian within this distance below zero
/// are clamped to zero.
const EIGENVALUE_CLAMP: f64 = 1e-8;

/// Which graph an affinity matrix encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffinityMode {
    /// Co-occurrence graph: high affinity between frequently joint labels.
    Co,
    /// Dis-occurrence graph: high affinity between rarely joint labels.
    Dis,
}

/// The matrix subtracted from `P+` to form the dis-occurrence affinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ComplementBase {
    #[default]
    AllOnes,
    Identity,
}

/// A symmetric category-affinity matrix with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    pub values: Array2<f64>,
    pub mode: AffinityMode,
    pub tau: f64,
    pub complement_base: ComplementBase,
}

/// Spectral embedding of the categories (rows) plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    /// m x k matrix; isolated vertices keep all-zero rows.
    pub vectors: Array2<f64>,
    /// The k smallest eigenvalues, nondecreasing, clamped at zero when within
    /// the tolerance below it.
    pub eigenvalues: Vec<f64>,
    pub row_normalized: bool,
    /// Vertices excluded from the eigenproblem because of (non)positive degree.
    pub isolated: Vec<usize>,
    pub mode: AffinityMode,
    pub tau: f64,
}

/// How a partition was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionStrategy {
    Cgp,
    Dgp,
    Random,
}

/// k disjoint category clusters covering all of 0..m.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelPartition {
    pub clusters: Vec<Vec<usize>>,
    pub strategy: PartitionStrategy,
    pub tau: f64,
    pub k: usize,
    pub seed: u64,
}

impl LabelPartition {
    /// Checks disjointness, coverage of 0..m, and nonemptiness.
    pub fn validate(&self, m: usize) -> Result<()> {
        if self.clusters.len() != self.k || self.clusters.iter().any(Vec::is_empty) {
            return Err(Error::PartitionMismatch { m });
        }
        let mut seen = vec![false; m];
        for cluster in &self.clusters {
            for &c in cluster {
                if c >= m || seen[c] {
                    return Err(Error::PartitionMismatch { m });
                }
                seen[c] = true;
            }
        }
        if seen.iter().all(|&s| s) {
            Ok(())
        } else {
            Err(Error::PartitionMismatch { m })
        }
    }

    /// Total category count across clusters.
    pub fn num_categories(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }
}

/// One cluster's restriction of the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SubTask {
    pub cluster_index: usize,
    /// Ascending original category indices owned by this cluster.
    pub categories: Vec<usize>,
    pub sample_ids: Vec<String>,
    /// Positions of the kept samples in the originating set.
    pub sample_indices: Vec<usize>,
    /// Original labels projected onto `categories`, in that order.
    pub restricted_labels: Vec<Vec<u8>>,
}

impl SubTask {
    pub fn len(&self) -> usize {
        self.sample_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_indices.is_empty()
    }
}

/// Builds the co- or dis-occurrence affinity from similarity stats.
///
/// The elementwise tau-th root lifts small (long-tail) similarities before
/// symmetrization; larger tau flattens the head/tail imbalance.
pub fn build_affinity(
    stats: &CoOccurrenceStats,
    tau: f64,
    mode: AffinityMode,
    complement_base: ComplementBase,
) -> Result<AffinityMatrix> {
    if !tau.is_finite() || tau <= 0.0 {
        return Err(Error::InvalidTau(tau));
    }
    let m = stats.num_categories();
    let root = stats.similarity.mapv(|s| libm::pow(s, 1.0 / tau));
    let mut values = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            let sym = (root[[i, j]] + root[[j, i]]) / 2.0;
            values[[i, j]] = match (mode, complement_base) {
                (AffinityMode::Co, _) => sym,
                (AffinityMode::Dis, ComplementBase::AllOnes) => 1.0 - sym,
                (AffinityMode::Dis, ComplementBase::Identity) => {
                    if i == j {
                        1.0 - sym
                    } else {
                        -sym
                    }
                }
            };
        }
    }
    if let Some(((row, col), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFiniteAffinity { row, col });
    }
    Ok(AffinityMatrix {
        values,
        mode,
        tau,
        complement_base,
    })
}

/// Embeds the categories with the k smallest eigenvectors of the normalized
/// Laplacian, rows scaled to unit norm.
pub fn spectral_embed(affinity: &AffinityMatrix, k: usize) -> Result<SpectralEmbedding> {
    spectral_embed_with(affinity, k, true)
}

/// As [`spectral_embed`], with row normalization optional.
pub fn spectral_embed_with(
    affinity: &AffinityMatrix,
    k: usize,
    row_normalize: bool,
) -> Result<SpectralEmbedding> {
    let m = affinity.values.nrows();
    if k == 0 || k > m {
        return Err(Error::InvalidClusterCount { k, m });
    }

    let degrees: Vec<f64> = (0..m).map(|i| affinity.values.row(i).sum()).collect();
    let isolated: Vec<usize> = (0..m)
        .filter(|&i| degrees[i] <= ISOLATED_DEGREE_TOL)
        .collect();
    let active: Vec<usize> = (0..m)
        .filter(|&i| degrees[i] > ISOLATED_DEGREE_TOL)
        .collect();

    let mut vectors = Array2::<f64>::zeros((m, k));
    let mut eigenvalues = vec![0.0f64; k];

    if !active.is_empty() {
        // Normalized Laplacian of the subgraph on the active vertices.
        let na = active.len();
        let mut sub = Array2::<f64>::zeros((na, na));
        for (a, &i) in active.iter().enumerate() {
            for (b, &j) in active.iter().enumerate() {
                sub[[a, b]] = affinity.values[[i, j]];
            }
        }
        let sub_degrees: Vec<f64> = (0..na).map(|a| sub.row(a).sum()).collect();
        let inv_sqrt: Vec<f64> = sub_degrees
            .iter()
            .map(|&d| {
                if d > ISOLATED_DEGREE_TOL {
                    1.0 / libm::sqrt(d)
                } else {
                    0.0
                }
            })
            .collect();
        let mut lap = Array2::<f64>::zeros((na, na));
        for a in 0..na {
            for b in 0..na {
                let l = if a == b { sub_degrees[a] } else { 0.0 } - sub[[a, b]];
                lap[[a, b]] = l * inv_sqrt[a] * inv_sqrt[b];
            }
        }

        let (vals, vecs) = eigen::symmetric_eigen(&lap);
        let kk = k.min(na);
        for col in 0..kk {
            eigenvalues[col] = clamp_eigenvalue(vals[col]);
            for (a, &i) in active.iter().enumerate() {
                vectors[[i, col]] = vecs[[a, col]];
            }
        }
        // Pathological case k > na: repeat the last available eigenvalue so
        // the vector stays nondecreasing; the extra columns remain zero.
        for col in kk..k {
            eigenvalues[col] = eigenvalues[kk - 1];
        }
    }

    if row_normalize {
        for mut row in vectors.rows_mut() {
            let norm = libm::sqrt(row.iter().map(|v| v * v).sum());
            if norm > 0.0 {
                row.mapv_inplace(|v| v / norm);
            }
        }
    }

    Ok(SpectralEmbedding {
        vectors,
        eigenvalues,
        row_normalized: row_normalize,
        isolated,
        mode: affinity.mode,
        tau: affinity.tau,
    })
}

fn clamp_eigenvalue(v: f64) -> f64 {
    if (-EIGENVALUE_CLAMP..0.0).contains(&v) {
        0.0
    } else {
        v
    }
}

/// Clusters the embedded categories with seeded k-means; isolated vertices
/// are then attached one by one to the currently smallest cluster (ties to
/// the lowest cluster index).
pub fn cluster_labels(emb: &SpectralEmbedding, k: usize, seed: u64) -> Result<LabelPartition> {
    let m = emb.vectors.nrows();
    if k == 0 || k > m {
        return Err(Error::InvalidClusterCount { k, m });
    }

    let active: Vec<usize> = (0..m).filter(|i| !emb.isolated.contains(i)).collect();
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); k];

    if !active.is_empty() {
        let cols = emb.vectors.ncols();
        let mut points = Array2::<f64>::zeros((active.len(), cols));
        for (a, &i) in active.iter().enumerate() {
            for j in 0..cols {
                points[[a, j]] = emb.vectors[[i, j]];
            }
        }
        let k_eff = k.min(active.len());
        let labels = kmeans::kmeans(&points, k_eff, seed);
        for (a, &i) in active.iter().enumerate() {
            clusters[labels[a]].push(i);
        }
    }

    for &i in &emb.isolated {
        let smallest = (0..k).min_by_key(|&c| clusters[c].len()).unwrap();
        clusters[smallest].push(i);
    }

    for cluster in &mut clusters {
        cluster.sort_unstable();
    }
    if clusters.iter().any(Vec::is_empty) {
        return Err(Error::TooFewClusterable {
            k,
            clusterable: active.len(),
        });
    }

    let partition = LabelPartition {
        clusters,
        strategy: match emb.mode {
            AffinityMode::Co => PartitionStrategy::Cgp,
            AffinityMode::Dis => PartitionStrategy::Dgp,
        },
        tau: emb.tau,
        k,
        seed,
    };
    partition.validate(m)?;
    Ok(partition)
}

/// Baseline strategy: a uniformly random permutation of the categories cut
/// into k contiguous chunks whose sizes differ by at most one.
pub fn random_partition(m: usize, k: usize, seed: u64) -> Result<LabelPartition> {
    if k == 0 || k > m {
        return Err(Error::InvalidClusterCount { k, m });
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut substream(seed, 0));

    let base = m / k;
    let remainder = m % k;
    let mut clusters = Vec::with_capacity(k);
    let mut start = 0;
    for c in 0..k {
        let size = base + usize::from(c < remainder);
        let mut cluster: Vec<usize> = order[start..start + size].to_vec();
        cluster.sort_unstable();
        clusters.push(cluster);
        start += size;
    }

    let partition = LabelPartition {
        clusters,
        strategy: PartitionStrategy::Random,
        tau: 0.0,
        k,
        seed,
    };
    partition.validate(m)?;
    Ok(partition)
}

/// Splits the dataset into one sub-task per cluster. A sample belongs to a
/// sub-task iff it has at least one positive label inside the cluster; its
/// labels are projected onto the cluster's categories in ascending original
/// index order.
pub fn decompose(set: &AnnotationSet, partition: &LabelPartition) -> Result<Vec<SubTask>> {
    let m = set.num_categories();
    partition.validate(m)?;

    let mut subtasks = Vec::with_capacity(partition.clusters.len());
    for (t, cluster) in partition.clusters.iter().enumerate() {
        let mut sample_ids = Vec::new();
        let mut sample_indices = Vec::new();
        let mut restricted_labels = Vec::new();
        for (i, sample) in set.samples.iter().enumerate() {
            let projected: Vec<u8> = cluster.iter().map(|&c| sample.labels[c]).collect();
            if projected.iter().any(|&y| y == 1) {
                sample_ids.push(sample.id.clone());
                sample_indices.push(i);
                restricted_labels.push(projected);
            }
        }
        if sample_indices.is_empty() {
            return Err(Error::EmptySubTask { cluster: t });
        }
        subtasks.push(SubTask {
            cluster_index: t,
            categories: cluster.clone(),
            sample_ids,
            sample_indices,
            restricted_labels,
        });
    }
    Ok(subtasks)
}

/// Adjusted Rand Index between two clusterings of 0..m. Returns 1.0 when the
/// correction denominator vanishes (identical trivial partitions).
pub fn adjusted_rand_index(a: &[Vec<usize>], b: &[Vec<usize>], m: usize) -> f64 {
    let label_of = |clusters: &[Vec<usize>]| {
        let mut of = vec![usize::MAX; m];
        for (c, cluster) in clusters.iter().enumerate() {
            for &i in cluster {
                of[i] = c;
            }
        }
        of
    };
    let a_of = label_of(a);
    let b_of = label_of(b);

    let mut contingency = vec![vec![0u64; b.len()]; a.len()];
    for i in 0..m {
        contingency[a_of[i]][b_of[i]] += 1;
    }
    let comb2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;

    let sum_cells: f64 = contingency
        .iter()
        .flat_map(|row| row.iter())
        .map(|&n| comb2(n))
        .sum();
    let sum_a: f64 = a.iter().map(|c| comb2(c.len() as u64)).sum();
    let sum_b: f64 = b.iter().map(|c| comb2(c.len() as u64)).sum();
    let total = comb2(m as u64);

    let expected = sum_a * sum_b / total;
    let max_index = (sum_a + sum_b) / 2.0;
    let denom = max_index - expected;
    if denom == 0.0 {
        1.0
    } else {
        (sum_cells - expected) / denom
    }
}
