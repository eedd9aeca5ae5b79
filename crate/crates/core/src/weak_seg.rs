//! Weakly supervised segmentation from ordering transcripts: frame encoders,
//! reference-set management, discriminative hinge training, transcript
//! retrieval, alignment-based frame labeling, metrics, and action-based
//! summarization.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use ndarray::{Array1, Array2};
use rand::seq::index::sample as index_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dtw::{dtw, dtw_subgradient, BandConstraint};
use crate::error::{DpDtwError, Result};
use crate::model::{LossRecord, Model, ModelMode};
use crate::optim::{minibatch_iter, AdamParams, AdamState, BatchSpec};
use crate::prototype::{medoid_index, position_to_action, temp_cat, Prototype, PrototypeSet, Transcript};
use crate::sequence::Sequence;

/// One weakly supervised training/evaluation sample: raw feature frames, the
/// positive ordering transcript, and optional per-frame ground truth used
/// only for evaluation.
#[derive(Debug, Clone)]
pub struct SegSample {
    pub id: String,
    pub frames: Sequence,
    pub transcript: Transcript,
    pub gt_labels: Option<Vec<usize>>,
}

impl SegSample {
    /// Enforce the load-time invariants: gt length equals the frame count and
    /// its run-collapsed order matches the transcript. Frames labeled with a
    /// class absent from the transcript are treated as background and exempt.
    pub fn validate(&self) -> Result<()> {
        if let Some(gt) = &self.gt_labels {
            if gt.len() != self.frames.len() {
                return Err(DpDtwError::LengthMismatch {
                    expected: self.frames.len(),
                    got: gt.len(),
                });
            }
            let in_transcript: Vec<usize> = gt
                .iter()
                .cloned()
                .filter(|c| self.transcript.entries.contains(c))
                .collect();
            let mut collapsed = Vec::new();
            for c in in_transcript {
                if collapsed.last() != Some(&c) {
                    collapsed.push(c);
                }
            }
            if collapsed != self.transcript.collapsed() {
                return Err(DpDtwError::Data(format!(
                    "sample {}: ground-truth label order {:?} does not match transcript {:?}",
                    self.id, collapsed, self.transcript.entries
                )));
            }
        }
        Ok(())
    }
}

/// Frame encoder family. All kinds preserve temporal length so alignments on
/// the encoded sequence track back to raw frames exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoder {
    Identity,
    /// Per-frame linear map: s[t] = W x[t] + b, W is out_dim x in_dim.
    Affine { weight: Array2<f64>, bias: Array1<f64> },
    /// Linear map over a centered window of `window` frames (zero-padded at
    /// the edges): W is out_dim x (in_dim * window).
    WindowLinear {
        window: usize,
        in_dim: usize,
        weight: Array2<f64>,
        bias: Array1<f64>,
    },
}

/// Gradient of a loss w.r.t. encoder parameters. Empty for identity.
#[derive(Debug, Clone)]
pub struct EncoderGrad {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Encoder {
    pub fn identity() -> Self {
        Encoder::Identity
    }

    /// Affine encoder initialized at the identity map.
    pub fn affine_identity(dim: usize) -> Self {
        Encoder::Affine { weight: Array2::eye(dim), bias: Array1::zeros(dim) }
    }

    /// Window encoder whose center block starts as the identity map.
    pub fn window_identity(dim: usize, window: usize) -> Self {
        let mut weight = Array2::zeros((dim, dim * window));
        let center = window / 2;
        for d in 0..dim {
            weight[[d, center * dim + d]] = 1.0;
        }
        Encoder::WindowLinear { window, in_dim: dim, weight, bias: Array1::zeros(dim) }
    }

    pub fn input_dim(&self) -> Option<usize> {
        match self {
            Encoder::Identity => None,
            Encoder::Affine { weight, .. } => Some(weight.ncols()),
            Encoder::WindowLinear { in_dim, .. } => Some(*in_dim),
        }
    }

    pub fn output_dim(&self) -> Option<usize> {
        match self {
            Encoder::Identity => None,
            Encoder::Affine { weight, .. } | Encoder::WindowLinear { weight, .. } => {
                Some(weight.nrows())
            }
        }
    }

    fn check_input(&self, x: &Sequence) -> Result<()> {
        if let Some(d) = self.input_dim() {
            if x.dim() != d {
                return Err(DpDtwError::DimensionMismatch { expected: d, got: x.dim() });
            }
        }
        Ok(())
    }

    /// Number of scalar parameters (weight + bias).
    pub fn param_count(&self) -> usize {
        match self {
            Encoder::Identity => 0,
            Encoder::Affine { weight, bias } | Encoder::WindowLinear { weight, bias, .. } => {
                weight.len() + bias.len()
            }
        }
    }

    /// Flatten parameters as [weight row-major, bias].
    pub fn flatten_params(&self) -> Vec<f64> {
        match self {
            Encoder::Identity => Vec::new(),
            Encoder::Affine { weight, bias } | Encoder::WindowLinear { weight, bias, .. } => {
                weight.iter().chain(bias.iter()).cloned().collect()
            }
        }
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.param_count();
        if flat.len() != expected {
            return Err(DpDtwError::Data(format!(
                "encoder expects {expected} parameters, got {}",
                flat.len()
            )));
        }
        match self {
            Encoder::Identity => {}
            Encoder::Affine { weight, bias } | Encoder::WindowLinear { weight, bias, .. } => {
                let nw = weight.len();
                for (w, v) in weight.iter_mut().zip(&flat[..nw]) {
                    *w = *v;
                }
                for (b, v) in bias.iter_mut().zip(&flat[nw..]) {
                    *b = *v;
                }
            }
        }
        Ok(())
    }
}

/// Apply the encoder frame-wise; output temporal length equals the input's.
pub fn encode(x: &Sequence, enc: &Encoder) -> Result<Sequence> {
    enc.check_input(x)?;
    match enc {
        Encoder::Identity => Ok(x.clone()),
        Encoder::Affine { weight, bias } => {
            let out = weight.dot(&x.data()) + &bias.view().insert_axis(ndarray::Axis(1));
            Sequence::new(x.id.clone(), out)
        }
        Encoder::WindowLinear { window, in_dim, weight, bias } => {
            let tau = x.len();
            let m_out = weight.nrows();
            let mut out = Array2::zeros((m_out, tau));
            for t in 0..tau {
                let stacked = window_input(x, t, *window, *in_dim);
                for d in 0..m_out {
                    let mut acc = bias[d];
                    for (e, v) in stacked.iter().enumerate() {
                        acc += weight[[d, e]] * v;
                    }
                    out[[d, t]] = acc;
                }
            }
            Sequence::new(x.id.clone(), out)
        }
    }
}

fn window_input(x: &Sequence, t: usize, window: usize, in_dim: usize) -> Vec<f64> {
    let mut stacked = vec![0.0; in_dim * window];
    for j in 0..window {
        let src = t as isize + j as isize - (window / 2) as isize;
        if src < 0 || src >= x.len() as isize {
            continue; // zero padding
        }
        let frame = x.frame(src as usize);
        for d in 0..in_dim {
            stacked[j * in_dim + d] = frame[d];
        }
    }
    stacked
}

/// Chain rule to the encoder parameters: `upstream` is the gradient w.r.t.
/// the encoded sequence.
pub fn encoder_backward(x: &Sequence, enc: &Encoder, upstream: &Array2<f64>) -> Result<Option<EncoderGrad>> {
    enc.check_input(x)?;
    match enc {
        Encoder::Identity => Ok(None),
        Encoder::Affine { weight, .. } => {
            if upstream.nrows() != weight.nrows() || upstream.ncols() != x.len() {
                return Err(DpDtwError::DimensionMismatch {
                    expected: weight.nrows(),
                    got: upstream.nrows(),
                });
            }
            let dw = upstream.dot(&x.data().t());
            let db = upstream.sum_axis(ndarray::Axis(1));
            Ok(Some(EncoderGrad { weight: dw, bias: db }))
        }
        Encoder::WindowLinear { window, in_dim, weight, .. } => {
            if upstream.nrows() != weight.nrows() || upstream.ncols() != x.len() {
                return Err(DpDtwError::DimensionMismatch {
                    expected: weight.nrows(),
                    got: upstream.nrows(),
                });
            }
            let mut dw = Array2::zeros(weight.raw_dim());
            let mut db = Array1::zeros(weight.nrows());
            for t in 0..x.len() {
                let stacked = window_input(x, t, *window, *in_dim);
                for d in 0..weight.nrows() {
                    let u = upstream[[d, t]];
                    db[d] += u;
                    for (e, v) in stacked.iter().enumerate() {
                        dw[[d, e]] += u * v;
                    }
                }
            }
            Ok(Some(EncoderGrad { weight: dw, bias: db }))
        }
    }
}

/// Deduplicated transcripts from the training split, insertion order kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceSet {
    pub transcripts: Vec<Transcript>,
}

impl ReferenceSet {
    pub fn len(&self) -> usize {
        self.transcripts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transcripts.is_empty()
    }
}

/// Aggregate all positive transcripts and keep the unique orderings.
pub fn build_reference_set(samples: &[SegSample]) -> Result<ReferenceSet> {
    if samples.is_empty() {
        return Err(DpDtwError::EmptyCollection);
    }
    let mut transcripts: Vec<Transcript> = Vec::new();
    for s in samples {
        if !transcripts.contains(&s.transcript) {
            transcripts.push(s.transcript.clone());
        }
    }
    Ok(ReferenceSet { transcripts })
}

/// Draw up to `q` distinct negatives uniformly without replacement from the
/// reference set minus the positive. Empty when the positive is the only
/// member.
pub fn sample_negatives(
    reference: &ReferenceSet,
    positive: &Transcript,
    q: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Transcript> {
    let pool: Vec<&Transcript> = reference
        .transcripts
        .iter()
        .filter(|t| *t != positive)
        .collect();
    if pool.is_empty() || q == 0 {
        return Vec::new();
    }
    let take = q.min(pool.len());
    index_sample(rng, pool.len(), take)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect()
}

/// Segmentation training configuration.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SegConfig {
    pub delta: f64,
    pub lambda: f64,
    pub num_negatives: usize,
    pub tau_p: usize,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub encoder: EncoderSpec,
}

/// Which encoder family to instantiate at training time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum EncoderSpec {
    Identity,
    Affine,
    Window { size: usize },
}

impl Default for SegConfig {
    fn default() -> Self {
        Self {
            delta: 1.0,
            lambda: 0.1,
            num_negatives: 50,
            tau_p: 8,
            steps: 500,
            batch_size: 16,
            learning_rate: 0.001,
            seed: 0,
            encoder: EncoderSpec::Identity,
        }
    }
}

impl SegConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta < 0.0 {
            return Err(DpDtwError::Data("margin delta must be >= 0".into()));
        }
        if self.lambda < 0.0 {
            return Err(DpDtwError::Data("lambda must be >= 0".into()));
        }
        if self.num_negatives == 0 {
            return Err(DpDtwError::Data("Q must be >= 1".into()));
        }
        if self.tau_p == 0 {
            return Err(DpDtwError::Data("tau_p must be >= 1".into()));
        }
        Ok(())
    }
}

/// Frame-accuracy, IoU and IoD, all in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegMetrics {
    pub f_acc: f64,
    pub iou: f64,
    pub iod: f64,
}

/// Loss terms and gradients for one weakly supervised sample.
#[derive(Debug)]
pub struct SegLossOutput {
    pub total: f64,
    pub hinge: f64,
    pub distance: f64,
    pub positive_discrepancy: f64,
    pub negative_discrepancies: Vec<f64>,
    /// Gradient w.r.t. each prototype, indexed by class id - 1.
    pub prototype_grads: Vec<Array2<f64>>,
    pub encoder_grad: Option<EncoderGrad>,
    pub path_signature: u64,
}

/// L_w_seg = sum_q max(0, d+ - d-q + delta) + lambda * d+. Prototype
/// gradients route through the temp_cat segments of both the positive and
/// every margin-active negative ordering sequence; encoder gradients route
/// through the encoded sequence from every DTW term.
pub fn seg_loss(
    x: &Sequence,
    positive: &Transcript,
    negatives: &[Transcript],
    protoset: &PrototypeSet,
    encoder: &Encoder,
    config: &SegConfig,
) -> Result<SegLossOutput> {
    let s = encode(x, encoder)?;
    let tau_p = protoset.tau_p();
    let m = protoset.dim();
    let k = protoset.num_classes();

    let mut hasher = DefaultHasher::new();
    let pos_ordering = temp_cat(positive, protoset)?;
    let pos = dtw(&pos_ordering.sequence, &s, BandConstraint::None)?;
    pos.alignment.pairs.hash(&mut hasher);

    let mut neg_results = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let ordering = temp_cat(neg, protoset)?;
        let r = dtw(&ordering.sequence, &s, BandConstraint::None)?;
        r.alignment.pairs.hash(&mut hasher);
        neg_results.push((ordering, r));
    }

    let d_pos = pos.discrepancy;
    let mut hinge = 0.0;
    let mut active = Vec::new();
    for (idx, (_, r)) in neg_results.iter().enumerate() {
        let violation = d_pos - r.discrepancy + config.delta;
        if violation > 0.0 {
            hinge += violation;
            active.push(idx);
        }
    }
    let distance = d_pos;
    let total = hinge + config.lambda * distance;

    // coefficient on d+ is (#active negatives) + lambda; on each active
    // negative it is -1
    let pos_coeff = active.len() as f64 + config.lambda;
    let mut prototype_grads = vec![Array2::<f64>::zeros((m, tau_p)); k];
    let mut s_grad = Array2::<f64>::zeros((m, s.len()));

    let scatter = |transcript: &Transcript,
                       ordering_seq: &Sequence,
                       alignment: &crate::dtw::Alignment,
                       coeff: f64,
                       prototype_grads: &mut Vec<Array2<f64>>,
                       s_grad: &mut Array2<f64>|
     -> Result<()> {
        let (g_ord, g_s) = dtw_subgradient(ordering_seq, &s, alignment)?;
        *s_grad += &(&g_s * coeff);
        for (i, &class_id) in transcript.entries.iter().enumerate() {
            let seg = g_ord.slice(ndarray::s![.., i * tau_p..(i + 1) * tau_p]);
            let target = &mut prototype_grads[class_id - 1];
            target.zip_mut_with(&(&seg * coeff), |a, b| *a += b);
        }
        Ok(())
    };

    if pos_coeff != 0.0 {
        scatter(
            positive,
            &pos_ordering.sequence,
            &pos.alignment,
            pos_coeff,
            &mut prototype_grads,
            &mut s_grad,
        )?;
    }
    for &idx in &active {
        let (ordering, r) = &neg_results[idx];
        scatter(
            &negatives[idx],
            &ordering.sequence,
            &r.alignment,
            -1.0,
            &mut prototype_grads,
            &mut s_grad,
        )?;
    }

    let encoder_grad = encoder_backward(x, encoder, &s_grad)?;

    Ok(SegLossOutput {
        total,
        hinge,
        distance,
        positive_discrepancy: d_pos,
        negative_discrepancies: neg_results.iter().map(|(_, r)| r.discrepancy).collect(),
        prototype_grads,
        encoder_grad,
        path_signature: hasher.finish(),
    })
}

fn build_encoder(spec: EncoderSpec, in_dim: usize) -> Encoder {
    match spec {
        EncoderSpec::Identity => Encoder::Identity,
        EncoderSpec::Affine => Encoder::affine_identity(in_dim),
        EncoderSpec::Window { size } => Encoder::window_identity(in_dim, size),
    }
}

/// Prototype initialization under weak supervision: for each class, the
/// medoid of the encoded training sequences whose transcript mentions that
/// class, resampled to tau_p.
pub fn init_seg_prototypes(
    samples: &[SegSample],
    encoder: &Encoder,
    tau_p: usize,
    num_classes: usize,
) -> Result<PrototypeSet> {
    let mut prototypes = Vec::with_capacity(num_classes);
    for class_id in 1..=num_classes {
        let members: Vec<Sequence> = samples
            .iter()
            .filter(|smp| smp.transcript.entries.contains(&class_id))
            .map(|smp| encode(&smp.frames, encoder))
            .collect::<Result<_>>()?;
        if members.is_empty() {
            return Err(DpDtwError::EmptyClass { class: class_id });
        }
        let resampled: Vec<Sequence> = members
            .iter()
            .map(|s| s.resample(tau_p))
            .collect::<Result<_>>()?;
        let refs: Vec<&Sequence> = resampled.iter().collect();
        let medoid = medoid_index(&refs)?;
        prototypes.push(Prototype {
            class_id,
            data: resampled[medoid].data().to_owned(),
        });
    }
    PrototypeSet::new(prototypes)
}

/// Number of classes implied by a corpus: the maximum id appearing in any
/// transcript or ground-truth labeling.
pub fn infer_num_classes(samples: &[SegSample]) -> usize {
    samples
        .iter()
        .flat_map(|s| {
            s.transcript
                .entries
                .iter()
                .cloned()
                .chain(s.gt_labels.iter().flatten().cloned())
        })
        .max()
        .unwrap_or(0)
}

/// Jointly optimize prototypes and encoder parameters with Adam on the mean
/// batch loss. Negatives are resampled per step and per sample from a seeded
/// stream, so training is deterministic given (data, config, seed).
pub fn train_seg(samples: &[SegSample], config: &SegConfig, vocab: Vec<String>) -> Result<Model> {
    config.validate()?;
    if samples.is_empty() {
        return Err(DpDtwError::EmptyCollection);
    }
    for s in samples {
        s.validate()?;
    }
    let num_classes = vocab.len();
    let m_in = samples[0].frames.dim();
    let mut encoder = build_encoder(config.encoder, m_in);
    let mut protoset = init_seg_prototypes(samples, &encoder, config.tau_p, num_classes)?;
    let reference = build_reference_set(samples)?;
    let m = protoset.dim();
    let tau_p = config.tau_p;

    let mut sizes = vec![m * tau_p; num_classes];
    let enc_params = encoder.param_count();
    if enc_params > 0 {
        sizes.push(enc_params);
    }
    let mut adam = AdamState::new(AdamParams::with_lr(config.learning_rate), &sizes);
    let mut history = Vec::new();

    let mut step = 0usize;
    let mut epoch = 0u64;
    'outer: loop {
        let batches = minibatch_iter(
            samples.len(),
            BatchSpec::Count(config.batch_size),
            config.seed,
            epoch,
        );
        for batch in &batches {
            if step >= config.steps {
                break 'outer;
            }
            let mut proto_grads = vec![Array2::<f64>::zeros((m, tau_p)); num_classes];
            let mut enc_grad_flat = vec![0.0; enc_params];
            let mut used = 0usize;
            let mut step_total = 0.0;
            let mut step_hinge = 0.0;
            let mut step_dist = 0.0;
            for &i in batch {
                let sample = &samples[i];
                // independent negative stream per (step, sample)
                let mut rng = ChaCha8Rng::seed_from_u64(
                    config
                        .seed
                        .wrapping_mul(0x9e3779b97f4a7c15)
                        .wrapping_add((step as u64) << 20)
                        .wrapping_add(i as u64),
                );
                let negatives =
                    sample_negatives(&reference, &sample.transcript, config.num_negatives, &mut rng);
                if negatives.is_empty() && config.lambda == 0.0 {
                    // nothing to optimize for this sample at this step
                    continue;
                }
                let out = seg_loss(
                    &sample.frames,
                    &sample.transcript,
                    &negatives,
                    &protoset,
                    &encoder,
                    config,
                )?;
                step_total += out.total;
                step_hinge += out.hinge;
                step_dist += out.distance;
                for (g, sample_g) in proto_grads.iter_mut().zip(&out.prototype_grads) {
                    *g += sample_g;
                }
                if let Some(eg) = &out.encoder_grad {
                    for (dst, src) in enc_grad_flat
                        .iter_mut()
                        .zip(eg.weight.iter().chain(eg.bias.iter()))
                    {
                        *dst += src;
                    }
                }
                used += 1;
            }
            if used > 0 {
                let scale = 1.0 / used as f64;
                let mut param_flat: Vec<Vec<f64>> = protoset
                    .iter()
                    .map(|p| p.data.iter().cloned().collect())
                    .collect();
                let mut grad_flat: Vec<Vec<f64>> = proto_grads
                    .iter()
                    .map(|g| g.iter().map(|v| v * scale).collect())
                    .collect();
                if enc_params > 0 {
                    param_flat.push(encoder.flatten_params());
                    grad_flat.push(enc_grad_flat.iter().map(|v| v * scale).collect());
                }
                {
                    let mut tensors: Vec<&mut [f64]> =
                        param_flat.iter_mut().map(|v| v.as_mut_slice()).collect();
                    let grad_refs: Vec<&[f64]> = grad_flat.iter().map(|v| v.as_slice()).collect();
                    adam.step(&mut tensors, &grad_refs)?;
                }
                for (p, flat) in protoset.iter_mut().zip(&param_flat) {
                    p.data =
                        Array2::from_shape_vec((m, tau_p), flat.clone()).expect("shape preserved");
                }
                if enc_params > 0 {
                    encoder.set_params(param_flat.last().unwrap())?;
                }
                history.push(LossRecord {
                    epoch: step as u64,
                    total: step_total / used as f64,
                    discriminative: step_hinge / used as f64,
                    distance: step_dist / used as f64,
                });
            }
            step += 1;
        }
        epoch += 1;
    }

    Ok(Model {
        mode: ModelMode::Segmentation,
        vocab,
        protoset,
        encoder,
        tsc_config: None,
        seg_config: Some(config.clone()),
        reference_set: Some(reference),
        loss_history: history,
    })
}

/// Exhaustive transcript retrieval: argmin DTW discrepancy between the
/// encoded input and each reference ordering sequence, ties to the earliest
/// entry.
pub fn retrieve_transcript(
    s: &Sequence,
    reference: &ReferenceSet,
    protoset: &PrototypeSet,
) -> Result<(Transcript, f64)> {
    if reference.is_empty() {
        return Err(DpDtwError::EmptyCollection);
    }
    let mut best: Option<(usize, f64)> = None;
    for (idx, transcript) in reference.transcripts.iter().enumerate() {
        let ordering = temp_cat(transcript, protoset)?;
        let d = dtw(&ordering.sequence, s, BandConstraint::None)?.discrepancy;
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((idx, d));
        }
    }
    let (idx, d) = best.unwrap();
    Ok((reference.transcripts[idx].clone(), d))
}

/// Align the encoded input with the transcript's ordering sequence and give
/// each frame the action of its nearest aligned prototype position (ties to
/// the smallest position).
pub fn label_frames(
    s: &Sequence,
    transcript: &Transcript,
    protoset: &PrototypeSet,
) -> Result<Vec<usize>> {
    let ordering = temp_cat(transcript, protoset)?;
    let result = dtw(&ordering.sequence, s, BandConstraint::None)?;
    let tau_p = protoset.tau_p();
    let mut labels = vec![0usize; s.len()];
    let mut best_dist = vec![f64::INFINITY; s.len()];
    for &(t1, t2) in &result.alignment.pairs {
        let mut dist = 0.0;
        for d in 0..s.dim() {
            let diff = ordering.sequence.frame(t1)[d] - s.frame(t2)[d];
            dist += diff * diff;
        }
        if dist < best_dist[t2] {
            best_dist[t2] = dist;
            labels[t2] = position_to_action(t1, transcript, tau_p)?;
        }
    }
    Ok(labels)
}

/// Per-video metrics: frame accuracy over all frames; IoU/IoD per class over
/// the non-background classes present in the ground truth, then averaged.
/// A gt-present class with no predicted frames contributes 0 to both.
pub fn evaluate(pred: &[usize], gt: &[usize], background: Option<usize>) -> Result<SegMetrics> {
    if pred.len() != gt.len() {
        return Err(DpDtwError::LengthMismatch { expected: gt.len(), got: pred.len() });
    }
    let n = gt.len();
    let correct = pred.iter().zip(gt).filter(|(p, g)| p == g).count();
    let f_acc = correct as f64 / n as f64;

    let mut classes: Vec<usize> = gt.to_vec();
    classes.sort_unstable();
    classes.dedup();
    classes.retain(|c| Some(*c) != background);

    let mut iou_sum = 0.0;
    let mut iod_sum = 0.0;
    let mut count = 0usize;
    for c in classes {
        let inter = pred
            .iter()
            .zip(gt)
            .filter(|(p, g)| **p == c && **g == c)
            .count();
        let pred_count = pred.iter().filter(|&&p| p == c).count();
        let gt_count = gt.iter().filter(|&&g| g == c).count();
        let union = pred_count + gt_count - inter;
        iou_sum += if union > 0 { inter as f64 / union as f64 } else { 0.0 };
        iod_sum += if pred_count > 0 { inter as f64 / pred_count as f64 } else { 0.0 };
        count += 1;
    }
    let (iou, iod) = if count > 0 {
        (iou_sum / count as f64, iod_sum / count as f64)
    } else {
        (1.0, 1.0) // no non-background classes in gt: nothing to miss
    };
    Ok(SegMetrics { f_acc, iou, iod })
}

/// Corpus-level aggregation: frame accuracy pooled over all frames, IoU/IoD
/// averaged over (video, class) pairs.
pub fn evaluate_corpus(
    videos: &[(Vec<usize>, Vec<usize>)],
    background: Option<usize>,
) -> Result<SegMetrics> {
    if videos.is_empty() {
        return Err(DpDtwError::EmptyCollection);
    }
    let mut frames = 0usize;
    let mut correct = 0usize;
    let mut iou_sum = 0.0;
    let mut iod_sum = 0.0;
    let mut pairs = 0usize;
    for (pred, gt) in videos {
        let per = evaluate(pred, gt, background)?;
        let mut classes: Vec<usize> = gt.clone();
        classes.sort_unstable();
        classes.dedup();
        classes.retain(|c| Some(*c) != background);
        let k = classes.len();
        if k > 0 {
            iou_sum += per.iou * k as f64;
            iod_sum += per.iod * k as f64;
            pairs += k;
        }
        frames += gt.len();
        correct += pred.iter().zip(gt).filter(|(p, g)| p == g).count();
    }
    Ok(SegMetrics {
        f_acc: correct as f64 / frames as f64,
        iou: if pairs > 0 { iou_sum / pairs as f64 } else { 1.0 },
        iod: if pairs > 0 { iod_sum / pairs as f64 } else { 1.0 },
    })
}

/// Action-based key frames: for each position of the positive ordering
/// sequence, the aligned input frame closest to it (ties to the smallest
/// frame index). Returns exactly Gamma = l * tau_p non-decreasing indices.
pub fn summarize(
    s: &Sequence,
    transcript: &Transcript,
    protoset: &PrototypeSet,
) -> Result<Vec<usize>> {
    let ordering = temp_cat(transcript, protoset)?;
    let result = dtw(&ordering.sequence, s, BandConstraint::None)?;
    let gamma = ordering.gamma();
    let mut keys = vec![usize::MAX; gamma];
    let mut best_dist = vec![f64::INFINITY; gamma];
    for &(t1, t2) in &result.alignment.pairs {
        let mut dist = 0.0;
        for d in 0..s.dim() {
            let diff = ordering.sequence.frame(t1)[d] - s.frame(t2)[d];
            dist += diff * diff;
        }
        if dist < best_dist[t1] {
            best_dist[t1] = dist;
            keys[t1] = t2;
        }
    }
    Ok(keys)
}

/// Fraction of key frames whose ground-truth label matches the intended
/// action of their block (block i covers positions i*tau_p..(i+1)*tau_p).
pub fn summary_accuracy(
    key_indices: &[usize],
    gt_labels: &[usize],
    transcript: &Transcript,
    tau_p: usize,
) -> Result<f64> {
    let gamma = transcript.len() * tau_p;
    if key_indices.len() != gamma {
        return Err(DpDtwError::LengthMismatch { expected: gamma, got: key_indices.len() });
    }
    let mut matches = 0usize;
    for (pos, &frame) in key_indices.iter().enumerate() {
        if frame >= gt_labels.len() {
            return Err(DpDtwError::IndexOutOfRange { index: frame + 1, max: gt_labels.len() });
        }
        let intended = transcript.entries[pos / tau_p];
        if gt_labels[frame] == intended {
            matches += 1;
        }
    }
    Ok(matches as f64 / gamma as f64)
}

/// Uniform-sampling summarization baseline: Gamma evenly spaced frames.
pub fn uniform_key_frames(num_frames: usize, gamma: usize) -> Vec<usize> {
    (0..gamma)
        .map(|i| {
            if gamma == 1 {
                0
            } else {
                (i as f64 * (num_frames - 1) as f64 / (gamma - 1) as f64).round() as usize
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn seq(values: &[f64]) -> Sequence {
        Sequence::univariate("t", values).unwrap()
    }

    fn protoset_1d(protos: &[&[f64]]) -> PrototypeSet {
        PrototypeSet::new(
            protos
                .iter()
                .enumerate()
                .map(|(i, vals)| Prototype {
                    class_id: i + 1,
                    data: Array2::from_shape_vec((1, vals.len()), vals.to_vec()).unwrap(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn encode_identity_and_constant_affine() {
        let x = seq(&[1.0, 2.0]);
        assert_eq!(encode(&x, &Encoder::Identity).unwrap(), x);

        let enc = Encoder::Affine {
            weight: Array2::zeros((1, 1)),
            bias: Array1::from_vec(vec![7.0]),
        };
        let out = encode(&x, &enc).unwrap();
        assert_eq!(out.frame(0)[0], 7.0);
        assert_eq!(out.frame(1)[0], 7.0);
    }

    #[test]
    fn window_one_coincides_with_affine() {
        let x = Sequence::from_frames("x", &[vec![1.0, 2.0], vec![-1.0, 0.5], vec![3.0, 1.0]])
            .unwrap();
        let weight =
            Array2::from_shape_vec((2, 2), vec![0.5, -1.0, 2.0, 0.25]).unwrap();
        let bias = Array1::from_vec(vec![0.1, -0.2]);
        let affine = Encoder::Affine { weight: weight.clone(), bias: bias.clone() };
        let window = Encoder::WindowLinear { window: 1, in_dim: 2, weight, bias };
        let a = encode(&x, &affine).unwrap();
        let w = encode(&x, &window).unwrap();
        for t in 0..3 {
            for d in 0..2 {
                assert_relative_eq!(a.frame(t)[d], w.frame(t)[d], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn encode_preserves_length_and_checks_dims() {
        let x = seq(&[0.0, 1.0, 2.0]);
        let enc = Encoder::affine_identity(1);
        assert_eq!(encode(&x, &enc).unwrap().len(), 3);
        let wrong = Encoder::affine_identity(2);
        assert!(encode(&x, &wrong).is_err());
    }

    #[test]
    fn encoder_backward_identity_and_zero_upstream() {
        let x = seq(&[1.0, 2.0]);
        assert!(encoder_backward(&x, &Encoder::Identity, &Array2::zeros((1, 2)))
            .unwrap()
            .is_none());
        let enc = Encoder::affine_identity(1);
        let g = encoder_backward(&x, &enc, &Array2::zeros((1, 2)))
            .unwrap()
            .unwrap();
        assert!(g.weight.iter().all(|&v| v == 0.0));
        assert!(g.bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn encoder_backward_matches_finite_differences() {
        use crate::optim::grad_check;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Sequence::from_frames(
            "x",
            &(0..5)
                .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect::<Vec<Vec<f64>>>(),
        )
        .unwrap();
        for spec in [EncoderSpec::Affine, EncoderSpec::Window { size: 3 }] {
            let mut enc = build_encoder(spec, 2);
            // random params so the test is not at the identity
            let params: Vec<f64> = (0..enc.param_count())
                .map(|_| rng.random_range(-0.5..0.5))
                .collect();
            enc.set_params(&params).unwrap();
            // scalar loss: sum of squares of the encoded sequence
            let s = encode(&x, &enc).unwrap();
            let upstream = &s.data() * 2.0;
            let g = encoder_backward(&x, &enc, &upstream.to_owned())
                .unwrap()
                .unwrap();
            let analytic: Vec<f64> =
                g.weight.iter().chain(g.bias.iter()).cloned().collect();
            let x2 = x.clone();
            let enc_template = enc.clone();
            let loss = move |p: &[f64]| {
                let mut e = enc_template.clone();
                e.set_params(p).unwrap();
                let s = encode(&x2, &e).unwrap();
                (s.data().iter().map(|v| v * v).sum::<f64>(), 0u64)
            };
            let report = grad_check(loss, &params, &analytic, 1e-5, 1e-4).unwrap();
            assert!(report.passed(), "{spec:?}: {:?}", report.failures);
        }
    }

    fn sample(id: &str, frames: &[f64], transcript: Vec<usize>) -> SegSample {
        SegSample {
            id: id.into(),
            frames: seq(frames),
            transcript: Transcript::new(transcript).unwrap(),
            gt_labels: None,
        }
    }

    #[test]
    fn reference_set_dedup() {
        let samples = vec![
            sample("a", &[0.0], vec![1, 2]),
            sample("b", &[0.0], vec![1, 2]),
            sample("c", &[0.0], vec![2, 1]),
        ];
        let r = build_reference_set(&samples).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r.transcripts[0].entries, vec![1, 2]);
        assert_eq!(r.transcripts[1].entries, vec![2, 1]);
    }

    #[test]
    fn reference_set_single_transcript() {
        let samples = vec![sample("a", &[0.0], vec![3])];
        assert_eq!(build_reference_set(&samples).unwrap().len(), 1);
        assert!(build_reference_set(&[]).is_err());
    }

    #[test]
    fn negatives_empty_clamped_deterministic() {
        let pos = Transcript::new(vec![1]).unwrap();
        let only = ReferenceSet { transcripts: vec![pos.clone()] };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_negatives(&only, &pos, 5, &mut rng).is_empty());

        let reference = ReferenceSet {
            transcripts: vec![
                pos.clone(),
                Transcript::new(vec![2]).unwrap(),
                Transcript::new(vec![1, 2]).unwrap(),
                Transcript::new(vec![2, 1]).unwrap(),
            ],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let negs = sample_negatives(&reference, &pos, 50, &mut rng);
        assert_eq!(negs.len(), 3);

        let mut rng_a = ChaCha8Rng::seed_from_u64(2);
        let mut rng_b = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(
            sample_negatives(&reference, &pos, 2, &mut rng_a),
            sample_negatives(&reference, &pos, 2, &mut rng_b)
        );
    }

    #[test]
    fn seg_loss_zero_when_matched_and_margin_satisfied() {
        let ps = protoset_1d(&[&[0.0, 0.0], &[100.0, 100.0]]);
        let pos = Transcript::new(vec![1]).unwrap();
        let neg = Transcript::new(vec![2]).unwrap();
        let config = SegConfig { delta: 1.0, lambda: 0.5, ..SegConfig::default() };
        let x = seq(&[0.0, 0.0]);
        let out = seg_loss(&x, &pos, &[neg], &ps, &Encoder::Identity, &config).unwrap();
        assert_eq!(out.total, 0.0);
        assert_eq!(out.hinge, 0.0);
        assert_eq!(out.distance, 0.0);
    }

    #[test]
    fn seg_loss_margin_exactly_violated() {
        // d+ = d- = 1 with delta = 1 gives hinge of exactly 1
        let ps = protoset_1d(&[&[1.0], &[-1.0]]);
        let pos = Transcript::new(vec![1]).unwrap();
        let neg = Transcript::new(vec![2]).unwrap();
        let config = SegConfig { delta: 1.0, lambda: 0.0, ..SegConfig::default() };
        let x = seq(&[0.0]);
        let out = seg_loss(&x, &pos, &[neg], &ps, &Encoder::Identity, &config).unwrap();
        assert_eq!(out.positive_discrepancy, 1.0);
        assert_eq!(out.negative_discrepancies, vec![1.0]);
        assert_eq!(out.total, 1.0);
    }

    #[test]
    fn seg_loss_zero_iff_margin_free_case() {
        // delta = 0, lambda = 0: loss is zero iff d+ <= every d-
        let ps = protoset_1d(&[&[0.0], &[3.0]]);
        let config = SegConfig { delta: 0.0, lambda: 0.0, ..SegConfig::default() };
        let pos = Transcript::new(vec![1]).unwrap();
        let neg = Transcript::new(vec![2]).unwrap();
        let near = seq(&[0.5]);
        let out = seg_loss(&near, &pos, &[neg.clone()], &ps, &Encoder::Identity, &config).unwrap();
        assert_eq!(out.total, 0.0);
        let far = seq(&[2.9]);
        let out = seg_loss(&far, &pos, &[neg], &ps, &Encoder::Identity, &config).unwrap();
        assert!(out.total > 0.0);
    }

    #[test]
    fn seg_loss_gradients_match_finite_differences() {
        use crate::optim::grad_check;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let config = SegConfig {
            delta: 0.5,
            lambda: 0.2,
            tau_p: 2,
            encoder: EncoderSpec::Affine,
            ..SegConfig::default()
        };
        let mut checked = 0usize;
        for trial in 0..5 {
            let protos: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let x = seq(&(0..6).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
            let pos = Transcript::new(vec![1, 2]).unwrap();
            let negs = vec![
                Transcript::new(vec![2, 1]).unwrap(),
                Transcript::new(vec![3]).unwrap(),
            ];
            let mut enc = Encoder::affine_identity(1);
            let enc_init: Vec<f64> = (0..enc.param_count())
                .map(|_| rng.random_range(-0.8..0.8))
                .collect();
            enc.set_params(&enc_init).unwrap();

            let base_ps =
                protoset_1d(&protos.iter().map(|p| p.as_slice()).collect::<Vec<_>>());
            let out = seg_loss(&x, &pos, &negs, &base_ps, &enc, &config).unwrap();

            // joint parameter vector: prototypes then encoder
            let mut params: Vec<f64> = protos.iter().flatten().cloned().collect();
            params.extend(&enc_init);
            let mut analytic: Vec<f64> = out
                .prototype_grads
                .iter()
                .flat_map(|g| g.iter().cloned())
                .collect();
            let eg = out.encoder_grad.as_ref().unwrap();
            analytic.extend(eg.weight.iter().chain(eg.bias.iter()));

            let (x2, pos2, negs2, config2, enc_t) =
                (x.clone(), pos.clone(), negs.clone(), config.clone(), enc.clone());
            let n_proto = 3 * 2;
            let loss = move |p: &[f64]| {
                let pr: Vec<Vec<f64>> = p[..n_proto].chunks(2).map(|c| c.to_vec()).collect();
                let ps = protoset_1d(&pr.iter().map(|v| v.as_slice()).collect::<Vec<_>>());
                let mut e = enc_t.clone();
                e.set_params(&p[n_proto..]).unwrap();
                let o = seg_loss(&x2, &pos2, &negs2, &ps, &e, &config2).unwrap();
                (o.total, o.path_signature)
            };
            let report = grad_check(loss, &params, &analytic, 1e-5, 1e-4).unwrap();
            assert!(
                report.passed(),
                "trial {trial}: failures {:?} max rel {}",
                report.failures,
                report.max_rel_error
            );
            checked += report.checked;
        }
        assert!(checked > 0);
    }

    #[test]
    fn retrieve_finds_exact_match() {
        let ps = protoset_1d(&[&[0.0, 0.0], &[5.0, 5.0]]);
        let reference = ReferenceSet {
            transcripts: vec![
                Transcript::new(vec![1]).unwrap(),
                Transcript::new(vec![2]).unwrap(),
                Transcript::new(vec![1, 2]).unwrap(),
            ],
        };
        let target = temp_cat(&reference.transcripts[2], &ps).unwrap();
        let (got, d) = retrieve_transcript(&target.sequence, &reference, &ps).unwrap();
        assert_eq!(got.entries, vec![1, 2]);
        assert_eq!(d, 0.0);

        // single-entry reference returns it
        let single = ReferenceSet { transcripts: vec![Transcript::new(vec![2]).unwrap()] };
        let (got, _) = retrieve_transcript(&seq(&[0.0]), &single, &ps).unwrap();
        assert_eq!(got.entries, vec![2]);
    }

    #[test]
    fn retrieve_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let protos: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..2).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let ps = protoset_1d(&protos.iter().map(|p| p.as_slice()).collect::<Vec<_>>());
        let reference = ReferenceSet {
            transcripts: vec![
                Transcript::new(vec![1, 2]).unwrap(),
                Transcript::new(vec![2, 3]).unwrap(),
                Transcript::new(vec![3, 1]).unwrap(),
                Transcript::new(vec![1, 3, 2]).unwrap(),
            ],
        };
        let s = seq(&(0..7).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>());
        let (got, got_d) = retrieve_transcript(&s, &reference, &ps).unwrap();
        let mut best: Option<(&Transcript, f64)> = None;
        for t in &reference.transcripts {
            let d = dtw(&temp_cat(t, &ps).unwrap().sequence, &s, BandConstraint::None)
                .unwrap()
                .discrepancy;
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((t, d));
            }
        }
        let (bt, bd) = best.unwrap();
        assert_eq!(&got, bt);
        assert_eq!(got_d, bd);
        // retrieval optimality against the positive transcript
        let d_pos = dtw(
            &temp_cat(&reference.transcripts[0], &ps).unwrap().sequence,
            &s,
            BandConstraint::None,
        )
        .unwrap()
        .discrepancy;
        assert!(d_pos >= got_d);
    }

    #[test]
    fn label_frames_exact_match_repeats_transcript() {
        let ps = protoset_1d(&[&[0.0, 0.0], &[5.0, 5.0]]);
        let t = Transcript::new(vec![2, 1]).unwrap();
        let ordering = temp_cat(&t, &ps).unwrap();
        let labels = label_frames(&ordering.sequence, &t, &ps).unwrap();
        assert_eq!(labels, vec![2, 2, 1, 1]);
    }

    #[test]
    fn label_frames_single_action() {
        let ps = protoset_1d(&[&[1.0, 2.0]]);
        let t = Transcript::new(vec![1]).unwrap();
        let labels = label_frames(&seq(&[9.0, -3.0, 0.0, 1.0, 2.0]), &t, &ps).unwrap();
        assert!(labels.iter().all(|&l| l == 1));
    }

    #[test]
    fn label_frames_monotone_in_transcript_positions() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let protos: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..2).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let ps = protoset_1d(&protos.iter().map(|p| p.as_slice()).collect::<Vec<_>>());
            let t = Transcript::new(vec![1, 3, 2]).unwrap();
            let s = seq(&(0..9).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>());
            let labels = label_frames(&s, &t, &ps).unwrap();
            assert_eq!(labels.len(), s.len());
            assert!(labels.iter().all(|&l| l >= 1));
            // transcript-position assignment must be non-decreasing
            let order = t.entries.clone();
            let mut pos = 0usize;
            for &l in &labels {
                let p = order.iter().position(|&o| o == l).unwrap();
                // allow only forward movement through the (distinct) order
                assert!(p >= pos || order[pos] == l, "labels {labels:?} not monotone");
                pos = pos.max(p);
            }
        }
    }

    #[test]
    fn evaluate_perfect_and_disjoint() {
        let perfect = evaluate(&[1, 2, 2], &[1, 2, 2], Some(0)).unwrap();
        assert_eq!(perfect, SegMetrics { f_acc: 1.0, iou: 1.0, iod: 1.0 });
        let disjoint = evaluate(&[3, 3, 3, 3], &[1, 1, 2, 2], Some(0)).unwrap();
        assert_eq!(disjoint, SegMetrics { f_acc: 0.0, iou: 0.0, iod: 0.0 });
    }

    #[test]
    fn evaluate_hand_computed_case() {
        let m = evaluate(&[1, 1, 1, 1], &[1, 1, 2, 2], Some(0)).unwrap();
        assert_eq!(m.f_acc, 0.5);
        assert_eq!(m.iou, 0.25);
        assert_eq!(m.iod, 0.25);
    }

    #[test]
    fn evaluate_rejects_length_mismatch() {
        assert!(evaluate(&[1], &[1, 2], None).is_err());
    }

    #[test]
    fn evaluate_symmetric_under_joint_relabeling() {
        let pred = vec![1, 1, 2, 3, 3];
        let gt = vec![1, 2, 2, 3, 1];
        let base = evaluate(&pred, &gt, None).unwrap();
        // permutation 1->3, 2->1, 3->2 applied to both
        let map = |v: &[usize]| -> Vec<usize> {
            v.iter().map(|&c| match c { 1 => 3, 2 => 1, _ => 2 }).collect()
        };
        let permuted = evaluate(&map(&pred), &map(&gt), None).unwrap();
        assert_eq!(base.f_acc, permuted.f_acc);
    }

    #[test]
    fn summarize_identity_input() {
        let ps = protoset_1d(&[&[0.0, 1.0], &[5.0, 6.0]]);
        let t = Transcript::new(vec![1, 2]).unwrap();
        let ordering = temp_cat(&t, &ps).unwrap();
        let keys = summarize(&ordering.sequence, &t, &ps).unwrap();
        assert_eq!(keys, vec![0, 1, 2, 3]);
    }

    #[test]
    fn summarize_single_position() {
        let ps = protoset_1d(&[&[2.0]]);
        let t = Transcript::new(vec![1]).unwrap();
        let keys = summarize(&seq(&[0.0, 2.0, 5.0]), &t, &ps).unwrap();
        assert_eq!(keys.len(), 1);
        assert_eq!(keys[0], 1); // nearest aligned frame to value 2.0
    }

    #[test]
    fn summarize_indices_structurally_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let protos: Vec<Vec<f64>> = (0..2)
                .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let ps = protoset_1d(&protos.iter().map(|p| p.as_slice()).collect::<Vec<_>>());
            let t = Transcript::new(vec![2, 1]).unwrap();
            let s = seq(&(0..8).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>());
            let keys = summarize(&s, &t, &ps).unwrap();
            assert_eq!(keys.len(), 6);
            for w in keys.windows(2) {
                assert!(w[0] <= w[1], "keys not non-decreasing: {keys:?}");
            }
            assert!(keys.iter().all(|&k| k < s.len()));
            // each key genuinely aligned with its position
            let ordering = temp_cat(&t, &ps).unwrap();
            let alignment = dtw(&ordering.sequence, &s, BandConstraint::None)
                .unwrap()
                .alignment;
            for (t1, &t2) in keys.iter().enumerate() {
                assert!(alignment.pairs.contains(&(t1, t2)));
            }
        }
    }

    #[test]
    fn summary_accuracy_cases() {
        let t = Transcript::new(vec![1, 2]).unwrap();
        // tau_p = 2, gamma = 4
        let gt = vec![1, 1, 2, 2];
        assert_eq!(summary_accuracy(&[0, 1, 2, 3], &gt, &t, 2).unwrap(), 1.0);
        let bg = vec![0, 0, 0, 0];
        assert_eq!(summary_accuracy(&[0, 1, 2, 3], &bg, &t, 2).unwrap(), 0.0);
        // 3 of 4 blocks match
        let gt2 = vec![1, 1, 2, 1];
        assert_eq!(summary_accuracy(&[0, 1, 2, 3], &gt2, &t, 2).unwrap(), 0.75);
        assert!(summary_accuracy(&[0, 1, 2, 9], &gt, &t, 2).is_err());
        assert!(summary_accuracy(&[0, 1], &gt, &t, 2).is_err());
    }

    #[test]
    fn sample_gt_consistency_checked() {
        let good = SegSample {
            id: "g".into(),
            frames: seq(&[0.0, 0.0, 1.0, 1.0]),
            transcript: Transcript::new(vec![1, 2]).unwrap(),
            gt_labels: Some(vec![1, 1, 2, 2]),
        };
        good.validate().unwrap();
        // background frames (class 9 not in transcript) are exempt
        let with_bg = SegSample {
            gt_labels: Some(vec![9, 1, 9, 2]),
            ..good.clone()
        };
        with_bg.validate().unwrap();
        let bad_order = SegSample {
            gt_labels: Some(vec![2, 2, 1, 1]),
            ..good.clone()
        };
        assert!(bad_order.validate().is_err());
        let bad_len = SegSample {
            gt_labels: Some(vec![1, 2]),
            ..good
        };
        assert!(bad_len.validate().is_err());
    }

    proptest! {
        #[test]
        fn every_frame_gets_exactly_one_label(
            input in proptest::collection::vec(-3.0..3.0f64, 1..=12),
        ) {
            let ps = protoset_1d(&[&[0.0, 0.5], &[2.0, 2.5]]);
            let t = Transcript::new(vec![1, 2]).unwrap();
            let labels = label_frames(&seq(&input), &t, &ps).unwrap();
            prop_assert_eq!(labels.len(), input.len());
            prop_assert!(labels.iter().all(|&l| l == 1 || l == 2));
        }

        #[test]
        fn uniform_keys_in_range_and_monotone(
            frames in 1usize..50,
            gamma in 1usize..20,
        ) {
            let keys = uniform_key_frames(frames, gamma);
            prop_assert_eq!(keys.len(), gamma);
            prop_assert!(keys.iter().all(|&k| k < frames));
            prop_assert!(keys.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
