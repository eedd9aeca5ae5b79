//! Discriminative prototype training for time series classification:
//! per-class discrepancies, softmax loss with a distance term, the training
//! loop, 1-NN inference, baselines, and comparison reports.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use ndarray::Array2;

use crate::dtw::{dtw, euclidean, BandConstraint, DtwResult};
use crate::error::{DpDtwError, Result};
use crate::model::{LossRecord, Model, ModelMode};
use crate::optim::{minibatch_iter, AdamParams, AdamState, BatchSpec};
use crate::prototype::{init_medoid_prototypes, PrototypeSet};
use crate::sequence::Sequence;

/// A labeled, single-split collection of sequences. Labels are dense 1-based
/// class ids; `vocab[k-1]` is the external name of class k.
#[derive(Debug, Clone)]
pub struct TscDataset {
    pub sequences: Vec<Sequence>,
    pub labels: Vec<usize>,
    pub vocab: Vec<String>,
}

impl TscDataset {
    pub fn new(sequences: Vec<Sequence>, labels: Vec<usize>, vocab: Vec<String>) -> Result<Self> {
        if sequences.is_empty() {
            return Err(DpDtwError::EmptyCollection);
        }
        if sequences.len() != labels.len() {
            return Err(DpDtwError::LengthMismatch {
                expected: sequences.len(),
                got: labels.len(),
            });
        }
        let m = sequences[0].dim();
        for s in &sequences {
            if s.dim() != m {
                return Err(DpDtwError::DimensionMismatch { expected: m, got: s.dim() });
            }
        }
        for &l in &labels {
            if l == 0 || l > vocab.len() {
                return Err(DpDtwError::InvalidLabel { label: l, max: vocab.len() });
            }
        }
        Ok(Self { sequences, labels, vocab })
    }

    pub fn num_classes(&self) -> usize {
        self.vocab.len()
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }
}

/// Per-class discrepancies and the softmax over their negatives.
#[derive(Debug, Clone)]
pub struct ClassScores {
    pub discrepancies: Vec<f64>,
    pub logits: Vec<f64>,
}

/// Training configuration for the classification engine.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TscConfig {
    pub lambda: f64,
    pub temperature: f64,
    pub epochs: usize,
    pub batch_fraction: f64,
    pub learning_rate: f64,
    pub seed: u64,
    pub band: BandConstraint,
}

impl Default for TscConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            temperature: 1.0,
            epochs: 60,
            batch_fraction: 0.2,
            learning_rate: 0.01,
            seed: 0,
            band: BandConstraint::None,
        }
    }
}

impl TscConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 {
            return Err(DpDtwError::Data("lambda must be >= 0".into()));
        }
        if self.temperature <= 0.0 {
            return Err(DpDtwError::Data("temperature must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.batch_fraction) || self.batch_fraction == 0.0 {
            return Err(DpDtwError::Data("batch fraction must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// DTW of an input against every class prototype.
pub fn class_discrepancies(
    s: &Sequence,
    protoset: &PrototypeSet,
    band: BandConstraint,
) -> Result<Vec<DtwResult>> {
    protoset
        .iter()
        .map(|p| dtw(&p.as_sequence(), s, band))
        .collect()
}

/// Max-shift stabilized softmax over negative discrepancies.
pub fn softmax_neg(discrepancies: &[f64], temperature: f64) -> Vec<f64> {
    let scores: Vec<f64> = discrepancies.iter().map(|d| -d / temperature).collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Loss terms plus per-prototype gradients for a single labeled sample.
#[derive(Debug)]
pub struct TscLossOutput {
    pub total: f64,
    pub cross_entropy: f64,
    pub distance: f64,
    pub scores: ClassScores,
    /// Gradient w.r.t. each prototype, indexed by class id - 1.
    pub prototype_grads: Vec<Array2<f64>>,
    /// Hash of all per-class alignments; changes when any optimal path moves.
    pub path_signature: u64,
}

/// L_TSC = -log sigma_y + lambda * d_y, with the envelope subgradient of each
/// discrepancy routed through the fixed per-class alignment.
pub fn tsc_loss(
    s: &Sequence,
    label: usize,
    protoset: &PrototypeSet,
    config: &TscConfig,
) -> Result<TscLossOutput> {
    let k = protoset.num_classes();
    if label == 0 || label > k {
        return Err(DpDtwError::InvalidLabel { label, max: k });
    }
    let results = class_discrepancies(s, protoset, config.band)?;
    let discrepancies: Vec<f64> = results.iter().map(|r| r.discrepancy).collect();
    let logits = softmax_neg(&discrepancies, config.temperature);

    let cross_entropy = -logits[label - 1].max(f64::MIN_POSITIVE).ln();
    let distance = discrepancies[label - 1];
    let total = cross_entropy + config.lambda * distance;

    let mut hasher = DefaultHasher::new();
    let mut prototype_grads = Vec::with_capacity(k);
    for (idx, result) in results.iter().enumerate() {
        result.alignment.pairs.hash(&mut hasher);
        let proto_seq = protoset.get(idx + 1)?.as_sequence();
        let (g_proto, _) = crate::dtw::dtw_subgradient(&proto_seq, s, &result.alignment)?;
        // z_k = -d_k/T, so dL/dd_k = (1{k=y} - sigma_k)/T from CE, plus
        // lambda on the label class
        let mut coeff =
            (if idx + 1 == label { 1.0 } else { 0.0 } - logits[idx]) / config.temperature;
        if idx + 1 == label {
            coeff += config.lambda;
        }
        prototype_grads.push(&g_proto * coeff);
    }

    Ok(TscLossOutput {
        total,
        cross_entropy,
        distance,
        scores: ClassScores { discrepancies, logits },
        prototype_grads,
        path_signature: hasher.finish(),
    })
}

/// Train class prototypes by Adam mini-batch descent on the mean batch loss.
/// Prototypes start at the class medoids resampled to the maximum training
/// length. Deterministic given (data, config, seed).
pub fn train_tsc(train: &TscDataset, config: &TscConfig) -> Result<Model> {
    config.validate()?;
    if train.is_empty() {
        return Err(DpDtwError::EmptyCollection);
    }
    let k = train.num_classes();
    let tau_p = train.sequences.iter().map(Sequence::len).max().unwrap();
    let labeled: Vec<(Sequence, usize)> = train
        .sequences
        .iter()
        .cloned()
        .zip(train.labels.iter().cloned())
        .collect();
    let mut protoset = init_medoid_prototypes(&labeled, tau_p, k)?;
    let m = protoset.dim();

    let sizes = vec![m * tau_p; k];
    let mut adam = AdamState::new(AdamParams::with_lr(config.learning_rate), &sizes);
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let batches = minibatch_iter(
            train.len(),
            BatchSpec::Fraction(config.batch_fraction),
            config.seed,
            epoch as u64,
        );
        let mut epoch_total = 0.0;
        let mut epoch_ce = 0.0;
        let mut epoch_d = 0.0;
        for batch in &batches {
            let mut grads = vec![Array2::<f64>::zeros((m, tau_p)); k];
            for &i in batch {
                let out = tsc_loss(&train.sequences[i], train.labels[i], &protoset, config)?;
                epoch_total += out.total;
                epoch_ce += out.cross_entropy;
                epoch_d += out.distance;
                for (g, sample_g) in grads.iter_mut().zip(&out.prototype_grads) {
                    *g += sample_g;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            let grad_flat: Vec<Vec<f64>> = grads
                .iter()
                .map(|g| g.iter().map(|v| v * scale).collect())
                .collect();
            let mut param_flat: Vec<Vec<f64>> = protoset
                .iter()
                .map(|p| p.data.iter().cloned().collect())
                .collect();
            {
                let mut tensors: Vec<&mut [f64]> =
                    param_flat.iter_mut().map(|v| v.as_mut_slice()).collect();
                let grad_refs: Vec<&[f64]> = grad_flat.iter().map(|v| v.as_slice()).collect();
                adam.step(&mut tensors, &grad_refs)?;
            }
            for (p, flat) in protoset.iter_mut().zip(&param_flat) {
                p.data = Array2::from_shape_vec((m, tau_p), flat.clone())
                    .expect("shape preserved");
            }
        }
        let n = train.len() as f64;
        history.push(LossRecord {
            epoch: epoch as u64,
            total: epoch_total / n,
            discriminative: epoch_ce / n,
            distance: epoch_d / n,
        });
    }

    Ok(Model {
        mode: ModelMode::Tsc,
        vocab: train.vocab.clone(),
        protoset,
        encoder: crate::weak_seg::Encoder::identity(),
        tsc_config: Some(config.clone()),
        seg_config: None,
        reference_set: None,
        loss_history: history,
    })
}

/// 1-NN over class prototypes: argmin discrepancy, ties to the smallest
/// class id.
pub fn predict(s: &Sequence, protoset: &PrototypeSet, band: BandConstraint) -> Result<usize> {
    let results = class_discrepancies(s, protoset, band)?;
    let mut best = 1;
    let mut best_d = results[0].discrepancy;
    for (idx, r) in results.iter().enumerate().skip(1) {
        if r.discrepancy < best_d {
            best_d = r.discrepancy;
            best = idx + 1;
        }
    }
    Ok(best)
}

/// DBA baseline prototypes: per-class averages under DTW, initialized at the
/// class medoids resampled to the maximum training length.
pub fn dba_prototypes(train: &TscDataset) -> Result<PrototypeSet> {
    if train.is_empty() {
        return Err(DpDtwError::EmptyCollection);
    }
    let tau_p = train.sequences.iter().map(Sequence::len).max().unwrap();
    let labeled: Vec<(Sequence, usize)> = train
        .sequences
        .iter()
        .cloned()
        .zip(train.labels.iter().cloned())
        .collect();
    let init = init_medoid_prototypes(&labeled, tau_p, train.num_classes())?;
    let mut centers = Vec::with_capacity(train.num_classes());
    for class in 1..=train.num_classes() {
        let members: Vec<&Sequence> = train
            .sequences
            .iter()
            .zip(&train.labels)
            .filter(|(_, &l)| l == class)
            .map(|(s, _)| s)
            .collect();
        centers.push(crate::prototype::dba(&members, init.get(class)?, 10, 1e-6)?);
    }
    PrototypeSet::new(centers)
}

/// Test accuracy of nearest-prototype classification.
pub fn prototype_accuracy(test: &TscDataset, protoset: &PrototypeSet, band: BandConstraint) -> Result<f64> {
    let mut correct = 0usize;
    for (s, &label) in test.sequences.iter().zip(&test.labels) {
        if predict(s, protoset, band)? == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Distance metric for the 1-NN baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Knn1Metric {
    Euclidean,
    Dtw,
    DtwWindowed { width: usize },
}

fn metric_distance(a: &Sequence, b: &Sequence, metric: Knn1Metric) -> Result<f64> {
    match metric {
        Knn1Metric::Euclidean => euclidean(a, b),
        Knn1Metric::Dtw => Ok(dtw(a, b, BandConstraint::None)?.discrepancy),
        Knn1Metric::DtwWindowed { width } => {
            Ok(dtw(a, b, BandConstraint::SakoeChiba { width })?.discrepancy)
        }
    }
}

/// Label each test sequence by its nearest training sequence; nearest-neighbor
/// ties go to the smallest training index.
pub fn knn1_predict(
    test: &[Sequence],
    train: &[Sequence],
    train_labels: &[usize],
    metric: Knn1Metric,
) -> Result<Vec<usize>> {
    if train.is_empty() {
        return Err(DpDtwError::EmptyCollection);
    }
    let mut out = Vec::with_capacity(test.len());
    for s in test {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, t) in train.iter().enumerate() {
            let d = metric_distance(s, t, metric)?;
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        out.push(train_labels[best]);
    }
    Ok(out)
}

/// Pick the Sakoe-Chiba width by leave-one-out accuracy on the training
/// split, searching W in 0..=ceil(0.1 * tau), ties to the smaller width.
pub fn select_window_loo(train: &[Sequence], train_labels: &[usize]) -> Result<usize> {
    if train.is_empty() {
        return Err(DpDtwError::EmptyCollection);
    }
    let tau = train.iter().map(Sequence::len).max().unwrap();
    let max_w = (tau as f64 * 0.1).ceil() as usize;
    let mut best_w = 0;
    let mut best_correct = usize::MIN;
    for w in 0..=max_w {
        let mut correct = 0;
        for i in 0..train.len() {
            let mut nn = None;
            let mut nn_d = f64::INFINITY;
            for j in 0..train.len() {
                if i == j {
                    continue;
                }
                let d = dtw(&train[i], &train[j], BandConstraint::SakoeChiba { width: w })?
                    .discrepancy;
                if d < nn_d {
                    nn_d = d;
                    nn = Some(j);
                }
            }
            if let Some(j) = nn {
                if train_labels[j] == train_labels[i] {
                    correct += 1;
                }
            }
        }
        if correct > best_correct {
            best_correct = correct;
            best_w = w;
        }
    }
    Ok(best_w)
}

/// Method ranks and pairwise no-worse rates over an accuracy table.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub methods: Vec<String>,
    /// Mean rank per method (rank 1 is best; ties take the average rank).
    pub average_ranks: Vec<f64>,
    /// `no_worse[a][b]` = fraction of datasets where method a >= method b.
    pub no_worse: Vec<Vec<f64>>,
}

/// `accuracies[d][m]` is the accuracy of method m on dataset d.
pub fn comparison_report(methods: &[String], accuracies: &[Vec<f64>]) -> Result<ComparisonReport> {
    let k = methods.len();
    if k < 2 {
        return Err(DpDtwError::Data("comparison requires >= 2 methods".into()));
    }
    if accuracies.is_empty() {
        return Err(DpDtwError::Data("comparison requires >= 1 dataset".into()));
    }
    for (d, row) in accuracies.iter().enumerate() {
        if row.len() != k {
            return Err(DpDtwError::Data(format!(
                "dataset row {d} has {} cells, expected {k}",
                row.len()
            )));
        }
    }
    let n = accuracies.len() as f64;
    let mut rank_sums = vec![0.0; k];
    for row in accuracies {
        for (m, &acc) in row.iter().enumerate() {
            // average rank on ties: 1 + #better + (#equal)/2
            let better = row.iter().filter(|&&a| a > acc).count() as f64;
            let equal = row.iter().filter(|&&a| a == acc).count() as f64 - 1.0;
            rank_sums[m] += 1.0 + better + equal / 2.0;
        }
    }
    let average_ranks = rank_sums.iter().map(|s| s / n).collect();
    let mut no_worse = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in 0..k {
            let count = accuracies.iter().filter(|row| row[a] >= row[b]).count();
            no_worse[a][b] = count as f64 / n;
        }
    }
    Ok(ComparisonReport {
        methods: methods.to_vec(),
        average_ranks,
        no_worse,
    })
}
