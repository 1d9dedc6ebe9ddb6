//! End-to-end orchestration: decompose, teach in parallel, merge, distill.
//!
//! Teachers are trained per sub-task with the asymmetric loss; their logits
//! are merged back to full category width by cluster ownership (every
//! category belongs to exactly one cluster, so the merge is a permutation
//! assembly) and cached once; the student then minimizes
//! `asl + kd_weight * kd_mse` against the cached targets.
//!
//! Determinism contract: every random choice is derived from the run seed,
//! the configured base seeds, and a model index (student = 0, co-occurrence
//! ensemble teachers = 1..=k, dis-occurrence ensemble teachers = k+1..=2k).
//! Teachers are pure functions of their own job description, so training
//! them sequentially or on any number of threads yields identical ensembles.

use alloc::vec;
use alloc::vec::Vec;

use ndarray::Array2;

use crate::costats::compute_stats;
use crate::dataset::AnnotationSet;
use crate::error::{Error, Result};
use crate::losses::{asl, kd_mse, AslConfig, LogitMatrix};
use crate::metrics::{evaluate, MetricsReport};
use crate::model::{
    adam_step, backward, forward, init_model, ModelConfig, MultiLabelModel, OptimizerState,
};
use crate::partition::{
    build_affinity, cluster_labels, decompose, random_partition, spectral_embed_with,
    AffinityMode, ComplementBase, LabelPartition, PartitionStrategy, SubTask,
};
use crate::rng::{derive_seed, splitmix64, substream};

/// Which samples a teacher's merged logits are valid for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KdScope {
    /// Only samples belonging to the teacher's sub-task (the literal
    /// membership condition).
    SubtaskMask,
    /// Every sample; trained teachers define logits for any input.
    #[default]
    AllImages,
}

/// Pipeline arms for the component ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Asymmetric loss only; ignores k and tau.
    Baseline,
    /// One full-category teacher distilled into the student (k = 1).
    SelfDistill,
    /// Co-occurrence graph partition ensemble only.
    Cgpd,
    /// Dis-occurrence graph partition ensemble only.
    Dgpd,
    /// Both complementary ensembles.
    Cpsd,
}

/// Mini-batch training hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub teacher_epochs: usize,
    pub student_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub asl: AslConfig,
    pub kd_weight: f64,
    pub kd_scope: KdScope,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            teacher_epochs: 20,
            student_epochs: 80,
            batch_size: 32,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            asl: AslConfig::default(),
            kd_weight: 1.0,
            kd_scope: KdScope::default(),
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.teacher_epochs == 0 || self.student_epochs == 0 {
            return Err(Error::InvalidTrainConfig("epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidTrainConfig("batch_size must be >= 1"));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidTrainConfig("learning_rate must be positive"));
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(Error::InvalidTrainConfig("weight_decay must be >= 0"));
        }
        if !self.kd_weight.is_finite() || self.kd_weight < 0.0 {
            return Err(Error::InvalidTrainConfig("kd_weight must be >= 0"));
        }
        self.asl.validate()
    }
}

/// The trained teachers of one decomposition strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherEnsemble {
    pub strategy: PartitionStrategy,
    pub partition: LabelPartition,
    pub teachers: Vec<MultiLabelModel>,
}

/// Everything needed to train one teacher, self-contained so jobs can be
/// executed in any order or on any thread.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherJob {
    pub cluster_index: usize,
    pub subtask: SubTask,
    pub train: TrainConfig,
    pub model: ModelConfig,
}

/// Deterministic 80/20 split by sample-index hash.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Assigns each index to the test split when its hash lands in one of five
/// residue classes. Pure function of (n, seed).
pub fn train_test_split(n: usize, seed: u64) -> SplitIndices {
    let base = splitmix64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for i in 0..n {
        if splitmix64(base.wrapping_add(i as u64)) % 5 == 0 {
            test.push(i);
        } else {
            train.push(i);
        }
    }
    SplitIndices { train, test }
}

/// Builds one self-contained job per cluster. `model_index_base` numbers the
/// teachers inside the run's model enumeration; each teacher's init and
/// shuffle seeds depend only on that index.
pub fn plan_teacher_jobs(
    set: &AnnotationSet,
    partition: &LabelPartition,
    cfg: &TrainConfig,
    model_cfg: &ModelConfig,
    model_index_base: u64,
) -> Result<Vec<TeacherJob>> {
    cfg.validate()?;
    let subtasks = decompose(set, partition)?;
    Ok(subtasks
        .into_iter()
        .map(|subtask| {
            let model_index = model_index_base + subtask.cluster_index as u64;
            TeacherJob {
                cluster_index: subtask.cluster_index,
                model: ModelConfig {
                    input_dim: set.feature_dim,
                    hidden_dims: model_cfg.hidden_dims.clone(),
                    output_dim: subtask.categories.len(),
                    init_seed: model_cfg.init_seed.wrapping_add(model_index),
                },
                train: TrainConfig {
                    shuffle_seed: derive_seed(cfg.shuffle_seed, model_index),
                    ..cfg.clone()
                },
                subtask,
            }
        })
        .collect())
}

/// Trains one planned teacher. Pure function of (job, set).
pub fn run_teacher_job(job: &TeacherJob, set: &AnnotationSet) -> Result<MultiLabelModel> {
    let features = gather_rows(&set.feature_matrix(), &job.subtask.sample_indices);
    let labels = labels_matrix(&job.subtask.restricted_labels);
    let model = init_model(&job.model, &job.subtask.categories)?;
    train_minibatch(
        model,
        &features,
        &labels,
        &job.train,
        job.train.teacher_epochs,
        None,
    )
}

/// Trains a teacher on one sub-task with the asymmetric loss (labels
/// restricted to the cluster, samples restricted to the sub-task).
pub fn train_teacher(
    subtask: &SubTask,
    set: &AnnotationSet,
    cfg: &TrainConfig,
    model_cfg: &ModelConfig,
) -> Result<MultiLabelModel> {
    cfg.validate()?;
    if subtask.is_empty() {
        return Err(Error::EmptySubTask {
            cluster: subtask.cluster_index,
        });
    }
    let job = TeacherJob {
        cluster_index: subtask.cluster_index,
        subtask: subtask.clone(),
        train: cfg.clone(),
        model: ModelConfig {
            input_dim: set.feature_dim,
            hidden_dims: model_cfg.hidden_dims.clone(),
            output_dim: subtask.categories.len(),
            init_seed: model_cfg.init_seed,
        },
    };
    run_teacher_job(&job, set)
}

/// Sequential driver over [`plan_teacher_jobs`]; the companion crate runs the
/// same jobs on a thread pool with identical results.
pub fn train_teachers(
    set: &AnnotationSet,
    partition: &LabelPartition,
    cfg: &TrainConfig,
    model_cfg: &ModelConfig,
    model_index_base: u64,
) -> Result<TeacherEnsemble> {
    let jobs = plan_teacher_jobs(set, partition, cfg, model_cfg, model_index_base)?;
    let teachers = jobs
        .iter()
        .map(|job| run_teacher_job(job, set))
        .collect::<Result<Vec<_>>>()?;
    Ok(TeacherEnsemble {
        strategy: partition.strategy,
        partition: partition.clone(),
        teachers,
    })
}

/// Reassembles per-cluster teacher logits into one n x m matrix by category
/// ownership. Under [`KdScope::SubtaskMask`] an entry is valid only if the
/// sample belongs to the owning cluster's sub-task; under
/// [`KdScope::AllImages`] everything is valid.
pub fn merge_logits(
    ensemble: &TeacherEnsemble,
    set: &AnnotationSet,
    scope: KdScope,
) -> Result<LogitMatrix> {
    let m = set.num_categories();
    ensemble.partition.validate(m)?;
    if ensemble.teachers.len() != ensemble.partition.clusters.len() {
        return Err(Error::PartitionMismatch { m });
    }
    let n = set.len();
    let features = set.feature_matrix();
    let mut values = Array2::<f64>::zeros((n, m));
    let mut mask = Array2::<u8>::zeros((n, m));

    for (t, teacher) in ensemble.teachers.iter().enumerate() {
        let cluster = &ensemble.partition.clusters[t];
        if teacher.category_subset != *cluster {
            return Err(Error::PartitionMismatch { m });
        }
        let logits = forward(teacher, &features)?;
        for i in 0..n {
            let member = scope == KdScope::AllImages
                || cluster.iter().any(|&c| set.samples[i].labels[c] == 1);
            for (pos, &j) in cluster.iter().enumerate() {
                values[[i, j]] = logits.values[[i, pos]];
                mask[[i, j]] = u8::from(member);
            }
        }
    }
    Ok(LogitMatrix { values, mask })
}

/// Trains the full-category student against ground truth plus the merged
/// teacher targets. Teacher logits are constants; no gradient reaches them.
/// With `kd_weight == 0` the distillation term is skipped outright, making
/// the run bit-identical to the plain baseline trainer.
pub fn train_student(
    set: &AnnotationSet,
    merged_plus: &LogitMatrix,
    merged_minus: &LogitMatrix,
    cfg: &TrainConfig,
    model_cfg: &ModelConfig,
) -> Result<MultiLabelModel> {
    cfg.validate()?;
    let n = set.len();
    let m = set.num_categories();
    for merged in [merged_plus, merged_minus] {
        if merged.rows() != n || merged.cols() != m {
            return Err(Error::ShapeMismatch {
                context: "merged teacher logits",
                expected_rows: n,
                expected_cols: m,
                got_rows: merged.rows(),
                got_cols: merged.cols(),
            });
        }
    }
    let student_cfg = ModelConfig {
        input_dim: set.feature_dim,
        hidden_dims: model_cfg.hidden_dims.clone(),
        output_dim: m,
        init_seed: model_cfg.init_seed,
    };
    let subset: Vec<usize> = (0..m).collect();
    let model = init_model(&student_cfg, &subset)?;
    train_minibatch(
        model,
        &set.feature_matrix(),
        &set.label_matrix(),
        cfg,
        cfg.student_epochs,
        Some((merged_plus, merged_minus)),
    )
}

/// Baseline trainer: the same mini-batch loop with no distillation term.
pub fn train_baseline(
    set: &AnnotationSet,
    cfg: &TrainConfig,
    model_cfg: &ModelConfig,
) -> Result<MultiLabelModel> {
    cfg.validate()?;
    let m = set.num_categories();
    let student_cfg = ModelConfig {
        input_dim: set.feature_dim,
        hidden_dims: model_cfg.hidden_dims.clone(),
        output_dim: m,
        init_seed: model_cfg.init_seed,
    };
    let subset: Vec<usize> = (0..m).collect();
    let model = init_model(&student_cfg, &subset)?;
    train_minibatch(
        model,
        &set.feature_matrix(),
        &set.label_matrix(),
        cfg,
        cfg.student_epochs,
        None,
    )
}

fn train_minibatch(
    mut model: MultiLabelModel,
    features: &Array2<f64>,
    labels: &Array2<u8>,
    cfg: &TrainConfig,
    epochs: usize,
    kd: Option<(&LogitMatrix, &LogitMatrix)>,
) -> Result<MultiLabelModel> {
    let n = features.nrows();
    let mut state = OptimizerState::new(&model, cfg.learning_rate, cfg.weight_decay);
    let use_kd = cfg.kd_weight != 0.0 && kd.is_some();

    for epoch in 0..epochs {
        let order = shuffled_indices(n, cfg.shuffle_seed, epoch as u64);
        for chunk in order.chunks(cfg.batch_size) {
            let batch_x = gather_rows(features, chunk);
            let batch_y = gather_label_rows(labels, chunk);
            let logits = forward(&model, &batch_x)?;
            let (_, mut upstream) = asl(&logits.values, &batch_y, &cfg.asl)?;
            if use_kd {
                let (plus, minus) = kd.expect("kd targets present");
                let batch_plus = plus.select_rows(chunk);
                let batch_minus = minus.select_rows(chunk);
                let (_, kd_grad) = kd_mse(&logits, &batch_plus, &batch_minus)?;
                upstream.zip_mut_with(&kd_grad, |u, &g| *u += cfg.kd_weight * g);
            }
            let grads = backward(&model, &batch_x, &upstream)?;
            adam_step(&mut model, &grads, &mut state)?;
        }
    }
    Ok(model)
}

fn shuffled_indices(n: usize, shuffle_seed: u64, epoch: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(shuffle_seed, epoch));
    order
}

fn gather_rows(matrix: &Array2<f64>, indices: &[usize]) -> Array2<f64> {
    let cols = matrix.ncols();
    Array2::from_shape_fn((indices.len(), cols), |(r, c)| matrix[[indices[r], c]])
}

fn gather_label_rows(labels: &Array2<u8>, indices: &[usize]) -> Array2<u8> {
    let cols = labels.ncols();
    Array2::from_shape_fn((indices.len(), cols), |(r, c)| labels[[indices[r], c]])
}

fn labels_matrix(rows: &[Vec<u8>]) -> Array2<u8> {
    let cols = rows.first().map_or(0, Vec::len);
    Array2::from_shape_fn((rows.len(), cols), |(r, c)| rows[r][c])
}

// Seed-derivation tags for the independent random streams of a run.
const TAG_INIT: u64 = 0x11;
const TAG_SHUFFLE: u64 = 0x22;
const TAG_PARTITION_CGP: u64 = 0x33;
const TAG_PARTITION_DGP: u64 = 0x44;
const TAG_PARTITION_RANDOM: u64 = 0x55;

/// Run-level options shared by every variant of a paired comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub k: usize,
    pub tau: f64,
    pub complement_base: ComplementBase,
    pub row_normalize: bool,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            k: 5,
            tau: 3.0,
            complement_base: ComplementBase::default(),
            row_normalize: true,
            threshold: 0.5,
            seed: 0,
        }
    }
}

/// Everything a variant run produces, for persistence or comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantOutcome {
    pub variant: Variant,
    pub student: MultiLabelModel,
    pub report: MetricsReport,
    pub ensembles: Vec<TeacherEnsemble>,
    pub split: SplitIndices,
}

/// Runs one ablation arm end to end: split, partition, teachers, merge,
/// distill, evaluate on the held-out split. All variants sharing `opts.seed`
/// see the same split and the same student seeds.
pub fn run_variant(
    set: &AnnotationSet,
    variant: Variant,
    opts: &RunOptions,
    cfg: &TrainConfig,
    model_cfg: &ModelConfig,
) -> Result<VariantOutcome> {
    let strategies: Vec<(PartitionStrategy, usize)> = match variant {
        Variant::Baseline => vec![],
        Variant::SelfDistill => vec![(PartitionStrategy::Cgp, 1)],
        Variant::Cgpd => vec![(PartitionStrategy::Cgp, opts.k)],
        Variant::Dgpd => vec![(PartitionStrategy::Dgp, opts.k)],
        Variant::Cpsd => vec![(PartitionStrategy::Cgp, opts.k), (PartitionStrategy::Dgp, opts.k)],
    };
    run_strategies(set, variant, &strategies, opts, cfg, model_cfg)
}

/// Distillation with a random partition, the sweep baseline strategy.
pub fn run_random_distillation(
    set: &AnnotationSet,
    opts: &RunOptions,
    cfg: &TrainConfig,
    model_cfg: &ModelConfig,
) -> Result<VariantOutcome> {
    run_strategies(
        set,
        Variant::Cgpd,
        &[(PartitionStrategy::Random, opts.k)],
        opts,
        cfg,
        model_cfg,
    )
}

fn run_strategies(
    set: &AnnotationSet,
    variant: Variant,
    strategies: &[(PartitionStrategy, usize)],
    opts: &RunOptions,
    cfg: &TrainConfig,
    model_cfg: &ModelConfig,
) -> Result<VariantOutcome> {
    cfg.validate()?;
    set.validate()?;

    let split = train_test_split(set.len(), opts.seed);
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::NoSamples);
    }
    let train_set = set.subset(&split.train);
    let test_set = set.subset(&split.test);

    // Effective seed bases mix the run seed into the configured ones so that
    // different run seeds vary initialization and batching as well.
    let init_base = derive_seed(opts.seed, model_cfg.init_seed ^ TAG_INIT);
    let shuffle_base = derive_seed(opts.seed, cfg.shuffle_seed ^ TAG_SHUFFLE);

    let mut ensembles = Vec::new();
    for &(strategy, k) in strategies {
        let partition = build_partition(&train_set, strategy, k, opts)?;
        let model_index_base = teacher_index_base(strategy, opts.k);
        let teacher_model_cfg = ModelConfig {
            init_seed: init_base,
            ..model_cfg.clone()
        };
        let teacher_cfg = TrainConfig {
            shuffle_seed: shuffle_base,
            ..cfg.clone()
        };
        ensembles.push(train_teachers(
            &train_set,
            &partition,
            &teacher_cfg,
            &teacher_model_cfg,
            model_index_base,
        )?);
    }

    let student_model_cfg = ModelConfig {
        init_seed: init_base,
        ..model_cfg.clone()
    };
    let student_cfg = TrainConfig {
        shuffle_seed: shuffle_base,
        ..cfg.clone()
    };

    let student = if ensembles.is_empty() {
        train_baseline(&train_set, &student_cfg, &student_model_cfg)?
    } else {
        let m = train_set.num_categories();
        let n = train_set.len();
        let mut plus = LogitMatrix::empty(n, m);
        let mut minus = LogitMatrix::empty(n, m);
        for ensemble in &ensembles {
            let merged = merge_logits(ensemble, &train_set, cfg.kd_scope)?;
            match ensemble.strategy {
                PartitionStrategy::Dgp => minus = merged,
                _ => plus = merged,
            }
        }
        train_student(&train_set, &plus, &minus, &student_cfg, &student_model_cfg)?
    };

    let report = evaluate(&student, &test_set, opts.threshold)?;
    Ok(VariantOutcome {
        variant,
        student,
        report,
        ensembles,
        split,
    })
}

/// Model index of a strategy's first teacher within a run (student is 0).
pub fn teacher_index_base(strategy: PartitionStrategy, k: usize) -> u64 {
    match strategy {
        PartitionStrategy::Cgp | PartitionStrategy::Random => 1,
        PartitionStrategy::Dgp => 1 + k as u64,
    }
}

/// Computes a partition of the training set under the given strategy.
pub fn build_partition(
    train_set: &AnnotationSet,
    strategy: PartitionStrategy,
    k: usize,
    opts: &RunOptions,
) -> Result<LabelPartition> {
    match strategy {
        PartitionStrategy::Random => random_partition(
            train_set.num_categories(),
            k,
            derive_seed(opts.seed, TAG_PARTITION_RANDOM),
        ),
        PartitionStrategy::Cgp | PartitionStrategy::Dgp => {
            let stats = compute_stats(train_set);
            let (mode, tag) = match strategy {
                PartitionStrategy::Cgp => (AffinityMode::Co, TAG_PARTITION_CGP),
                _ => (AffinityMode::Dis, TAG_PARTITION_DGP),
            };
            let affinity = build_affinity(&stats, opts.tau, mode, opts.complement_base)?;
            let emb = spectral_embed_with(&affinity, k, opts.row_normalize)?;
            cluster_labels(&emb, k, derive_seed(opts.seed, tag))
        }
    }
}
