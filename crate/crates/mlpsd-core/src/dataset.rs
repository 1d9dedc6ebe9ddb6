//! Multi-label annotation sets and a planted-structure synthetic generator.
//!
//! A dataset is a list of samples, each carrying a feature vector of length
//! `d` and a binary label vector over `m` named categories. The synthetic
//! generator plants a block structure: categories are grouped into blocks,
//! whole blocks switch on per sample, and category firing probabilities
//! differ inside (`q_in`) versus outside (`q_out`) active blocks. Features
//! are sums of per-category unit prototypes plus Gaussian noise, so a small
//! classifier can recover both the category-specific and the co-occurring
//! signal. The planted blocks double as the ground-truth clustering oracle.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::substream;

/// One annotated sample: a feature vector and a binary label vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub features: Vec<f64>,
    pub labels: Vec<u8>,
}

/// An immutable multi-label dataset over a fixed category list.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet {
    pub categories: Vec<String>,
    pub feature_dim: usize,
    pub samples: Vec<Sample>,
}

impl AnnotationSet {
    /// Builds a set after checking every structural invariant.
    pub fn new(categories: Vec<String>, feature_dim: usize, samples: Vec<Sample>) -> Result<Self> {
        let set = Self {
            categories,
            feature_dim,
            samples,
        };
        set.validate()?;
        Ok(set)
    }

    /// Checks m >= 2, n >= 1, per-sample vector lengths, binary labels, and
    /// id uniqueness. Feature values are not required to be finite here;
    /// serialization and model input validate finiteness at their boundary.
    pub fn validate(&self) -> Result<()> {
        let m = self.categories.len();
        if m < 2 {
            return Err(Error::TooFewCategories(m));
        }
        if self.samples.is_empty() {
            return Err(Error::NoSamples);
        }
        let mut seen = BTreeSet::new();
        for s in &self.samples {
            if s.features.len() != self.feature_dim {
                return Err(Error::FeatureDimMismatch {
                    id: s.id.clone(),
                    expected: self.feature_dim,
                    got: s.features.len(),
                });
            }
            if s.labels.len() != m {
                return Err(Error::LabelLenMismatch {
                    id: s.id.clone(),
                    expected: m,
                    got: s.labels.len(),
                });
            }
            if let Some(&bad) = s.labels.iter().find(|&&v| v > 1) {
                return Err(Error::NonBinaryLabel {
                    id: s.id.clone(),
                    got: bad,
                });
            }
            if !seen.insert(s.id.as_str()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
        }
        Ok(())
    }

    /// Number of categories `m`.
    pub fn num_categories(&self) -> usize {
        self.categories.len()
    }

    /// Number of samples `n`.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// A new set containing the selected samples, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            categories: self.categories.clone(),
            feature_dim: self.feature_dim,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    /// Features stacked into an n x d matrix.
    pub fn feature_matrix(&self) -> Array2<f64> {
        let n = self.len();
        let mut x = Array2::zeros((n, self.feature_dim));
        for (i, s) in self.samples.iter().enumerate() {
            for (j, &v) in s.features.iter().enumerate() {
                x[[i, j]] = v;
            }
        }
        x
    }

    /// Labels stacked into an n x m binary matrix.
    pub fn label_matrix(&self) -> Array2<u8> {
        let n = self.len();
        let m = self.num_categories();
        let mut y = Array2::zeros((n, m));
        for (i, s) in self.samples.iter().enumerate() {
            for (j, &v) in s.labels.iter().enumerate() {
                y[[i, j]] = v;
            }
        }
        y
    }
}

/// Recipe for a synthetic dataset with planted label blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// Category block sizes; the categories are numbered consecutively, so
    /// blocks `[3, 2]` plant clusters `{0,1,2}` and `{3,4}`.
    pub blocks: Vec<usize>,
    pub n_samples: usize,
    pub feature_dim: usize,
    /// Probability that a block is active in a given sample.
    pub p_block: f64,
    /// Firing probability for categories in an active block.
    pub q_in: f64,
    /// Firing probability for categories in an inactive block.
    pub q_out: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() || self.blocks.iter().any(|&b| b == 0) {
            return Err(Error::InvalidBlocks);
        }
        let m: usize = self.blocks.iter().sum();
        if m < 2 {
            return Err(Error::TooFewCategories(m));
        }
        if self.n_samples == 0 {
            return Err(Error::NoSamplesRequested);
        }
        if self.feature_dim == 0 {
            return Err(Error::ZeroFeatureDim);
        }
        for (name, value) in [
            ("p_block", self.p_block),
            ("q_in", self.q_in),
            ("q_out", self.q_out),
        ] {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(Error::InvalidProbability { name, value });
            }
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::NegativeNoise(self.noise_sigma));
        }
        Ok(())
    }

    /// Total category count.
    pub fn num_categories(&self) -> usize {
        self.blocks.iter().sum()
    }
}

// RNG substream layout: stream 0 draws the category prototypes, stream 1 + i
// draws everything for sample i. Growing n therefore never perturbs the
// samples that an earlier, smaller run produced.
const PROTOTYPE_STREAM: u64 = 0;
const SAMPLE_STREAM_BASE: u64 = 1;

/// Generates a dataset from `spec` and returns it with the planted blocks.
///
/// Per sample, each block is active with probability `p_block`, each category
/// fires with `q_in` / `q_out` depending on its block's state, and the feature
/// vector is the sum of the unit prototypes of the positive categories plus
/// `noise_sigma` times standard Gaussian noise. All-zero label vectors are
/// kept as-is. Fully deterministic given `spec.seed`.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<(AnnotationSet, Vec<Vec<usize>>)> {
    spec.validate()?;
    let m = spec.num_categories();
    let d = spec.feature_dim;

    let mut planted: Vec<Vec<usize>> = Vec::with_capacity(spec.blocks.len());
    let mut block_of = vec![0usize; m];
    let mut next = 0usize;
    for (b, &size) in spec.blocks.iter().enumerate() {
        let members: Vec<usize> = (next..next + size).collect();
        for &c in &members {
            block_of[c] = b;
        }
        next += size;
        planted.push(members);
    }

    let prototypes = draw_prototypes(spec.seed, m, d);

    let mut samples = Vec::with_capacity(spec.n_samples);
    for i in 0..spec.n_samples {
        let mut rng = substream(spec.seed, SAMPLE_STREAM_BASE + i as u64);

        let active: Vec<bool> = (0..spec.blocks.len())
            .map(|_| rng.gen::<f64>() < spec.p_block)
            .collect();
        let labels: Vec<u8> = (0..m)
            .map(|c| {
                let q = if active[block_of[c]] {
                    spec.q_in
                } else {
                    spec.q_out
                };
                u8::from(rng.gen::<f64>() < q)
            })
            .collect();

        let mut features = vec![0.0f64; d];
        for (c, &y) in labels.iter().enumerate() {
            if y == 1 {
                for (x, &p) in features.iter_mut().zip(&prototypes[c]) {
                    *x += p;
                }
            }
        }
        for x in features.iter_mut() {
            let eps: f64 = rng.sample(StandardNormal);
            *x += spec.noise_sigma * eps;
        }

        samples.push(Sample {
            id: format!("s{i:06}"),
            features,
            labels,
        });
    }

    let categories = (0..m).map(|c| format!("c{c}")).collect();
    let set = AnnotationSet::new(categories, d, samples)?;
    Ok((set, planted))
}

/// Unit-norm Gaussian prototype per category, all drawn from one dedicated
/// substream so they depend only on the seed.
fn draw_prototypes(seed: u64, m: usize, d: usize) -> Vec<Vec<f64>> {
    let mut rng = substream(seed, PROTOTYPE_STREAM);
    (0..m)
        .map(|_| loop {
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = libm::sqrt(v.iter().map(|x| x * x).sum());
            if norm > 1e-12 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn spec(blocks: &[usize], n: usize, p_block: f64, q_in: f64, q_out: f64) -> SynthSpec {
        SynthSpec {
            blocks: blocks.to_vec(),
            n_samples: n,
            feature_dim: 4,
            p_block,
            q_in,
            q_out,
            noise_sigma: 0.1,
            seed: 42,
        }
    }

    #[test]
    fn forced_probabilities_fill_every_label() {
        let (set, planted) = generate_synthetic(&spec(&[2, 2], 10, 1.0, 1.0, 0.0)).unwrap();
        assert_eq!(planted, vec![vec![0, 1], vec![2, 3]]);
        for s in &set.samples {
            assert_eq!(s.labels, vec![1, 1, 1, 1]);
        }
    }

    #[test]
    fn zero_rates_give_all_zero_labels() {
        let (set, _) = generate_synthetic(&spec(&[2, 2], 10, 0.5, 0.0, 0.0)).unwrap();
        for s in &set.samples {
            assert!(s.labels.iter().all(|&y| y == 0));
        }
    }

    // Oracle: plain nested-loop counting of the empirical similarity
    // S_ij = e_ij / n_i, independent of the costats module.
    fn counting_similarity(set: &AnnotationSet) -> Vec<Vec<f64>> {
        let m = set.num_categories();
        let mut e = vec![vec![0usize; m]; m];
        let mut n = vec![0usize; m];
        for s in &set.samples {
            for i in 0..m {
                if s.labels[i] == 1 {
                    n[i] += 1;
                    for j in 0..m {
                        if j != i && s.labels[j] == 1 {
                            e[i][j] += 1;
                        }
                    }
                }
            }
        }
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        if n[i] > 0 {
                            e[i][j] as f64 / n[i] as f64
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn planted_contrast_within_block_similarity_dominates() {
        let (set, planted) = generate_synthetic(&spec(&[3, 3], 2000, 0.5, 0.9, 0.01)).unwrap();
        let s = counting_similarity(&set);
        let block_of: Vec<usize> = (0..6).map(|c| usize::from(planted[1].contains(&c))).collect();
        let mut min_within = f64::INFINITY;
        let mut max_cross = f64::NEG_INFINITY;
        for i in 0..6 {
            for j in 0..6 {
                if i == j {
                    continue;
                }
                if block_of[i] == block_of[j] {
                    min_within = min_within.min(s[i][j]);
                } else {
                    max_cross = max_cross.max(s[i][j]);
                }
            }
        }
        assert!(
            min_within > max_cross,
            "within {min_within} vs cross {max_cross}"
        );
    }

    #[test]
    fn generation_is_deterministic_and_prefix_stable() {
        let sp = spec(&[3, 2], 50, 0.5, 0.8, 0.05);
        let (a, _) = generate_synthetic(&sp).unwrap();
        let (b, _) = generate_synthetic(&sp).unwrap();
        assert_eq!(a, b);

        let longer = SynthSpec {
            n_samples: 80,
            ..sp
        };
        let (c, _) = generate_synthetic(&longer).unwrap();
        assert_eq!(a.samples[..], c.samples[..50]);
    }

    #[test]
    fn spec_validation_rejects_bad_fields() {
        let mut sp = spec(&[2, 2], 10, 0.5, 0.5, 0.0);
        sp.q_in = 1.5;
        assert!(matches!(
            generate_synthetic(&sp),
            Err(Error::InvalidProbability { name: "q_in", .. })
        ));
        let mut sp = spec(&[2, 2], 10, 0.5, 0.5, 0.0);
        sp.blocks = vec![];
        assert!(matches!(generate_synthetic(&sp), Err(Error::InvalidBlocks)));
        let mut sp = spec(&[2, 2], 10, 0.5, 0.5, 0.0);
        sp.noise_sigma = -1.0;
        assert!(matches!(
            generate_synthetic(&sp),
            Err(Error::NegativeNoise(_))
        ));
    }

    #[test]
    fn annotation_set_invariants() {
        let s0 = Sample {
            id: "a".to_string(),
            features: vec![0.0, 1.0],
            labels: vec![1, 0],
        };
        let dup = AnnotationSet::new(
            vec!["x".to_string(), "y".to_string()],
            2,
            vec![s0.clone(), s0.clone()],
        );
        assert!(matches!(dup, Err(Error::DuplicateId(_))));

        let short = AnnotationSet::new(
            vec!["x".to_string(), "y".to_string()],
            3,
            vec![s0.clone()],
        );
        assert!(matches!(short, Err(Error::FeatureDimMismatch { .. })));

        let one_cat = AnnotationSet::new(vec!["x".to_string()], 2, vec![s0]);
        assert!(matches!(one_cat, Err(Error::TooFewCategories(1))));
    }

    #[test]
    fn subset_preserves_order_and_categories() {
        let (set, _) = generate_synthetic(&spec(&[2, 2], 10, 0.5, 0.8, 0.1)).unwrap();
        let sub = set.subset(&[4, 1, 7]);
        assert_eq!(sub.len(), 3);
        assert_eq!(sub.samples[0], set.samples[4]);
        assert_eq!(sub.samples[1], set.samples[1]);
        assert_eq!(sub.categories, set.categories);
    }
}
