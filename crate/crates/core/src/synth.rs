//! Synthetic corpus generation with ground truth: smooth, pairwise-separated
//! class templates realized as time-warped, noisy segments.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{DpDtwError, Result};
use crate::prototype::Transcript;
use crate::sequence::{resample_matrix, Sequence};
use crate::tsc::TscDataset;
use crate::weak_seg::SegSample;

/// Generator configuration for segmentation corpora.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub dim: usize,
    /// True template length before warping.
    pub template_len: usize,
    /// Inclusive range for the number of segments per sample.
    pub segments: (usize, usize),
    /// Inclusive range for the duration of each realized segment.
    pub duration: (usize, usize),
    /// Relative jitter of the monotone time warp, in [0, 1).
    pub warp_jitter: f64,
    /// Standard deviation of additive Gaussian noise.
    pub noise_sigma: f64,
    pub samples: usize,
    pub seed: u64,
    /// Minimum pairwise L2 distance between templates.
    pub separation_floor: f64,
    /// Size of the pool of distinct segment orderings samples draw from;
    /// 0 means every sample draws a fresh random ordering.
    pub num_orderings: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_classes: 5,
            dim: 4,
            template_len: 20,
            segments: (3, 6),
            duration: (15, 30),
            warp_jitter: 0.3,
            noise_sigma: 0.1,
            samples: 200,
            seed: 0,
            separation_floor: 2.0,
            num_orderings: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.dim == 0 || self.template_len == 0 || self.samples == 0 {
            return Err(DpDtwError::Data("counts must be >= 1".into()));
        }
        if self.segments.0 == 0 || self.segments.0 > self.segments.1 {
            return Err(DpDtwError::Data("segment count range is empty".into()));
        }
        if self.duration.0 == 0 || self.duration.0 > self.duration.1 {
            return Err(DpDtwError::Data("duration range is empty".into()));
        }
        if !(0.0..1.0).contains(&self.warp_jitter) {
            return Err(DpDtwError::Data("warp jitter must be in [0, 1)".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(DpDtwError::Data("noise sigma must be >= 0".into()));
        }
        Ok(())
    }
}

const TEMPLATE_RETRIES: usize = 200;

fn smooth_walk(rng: &mut ChaCha8Rng, dim: usize, len: usize) -> Array2<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut data = Array2::zeros((dim, len));
    for d in 0..dim {
        let mut v: f64 = normal.sample(rng);
        for t in 0..len {
            data[[d, t]] = v;
            v += 0.6 * normal.sample(rng);
        }
    }
    data
}

fn template_distance(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Draw the class templates: fixed-seed smooth random walks, regenerated
/// until every pair is at least `separation_floor` apart in L2.
pub fn gen_templates(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Array2<f64>>> {
    let mut templates: Vec<Array2<f64>> = Vec::with_capacity(config.num_classes);
    for class in 0..config.num_classes {
        let mut accepted = None;
        for _ in 0..TEMPLATE_RETRIES {
            let cand = smooth_walk(rng, config.dim, config.template_len);
            if templates
                .iter()
                .all(|t| template_distance(t, &cand) >= config.separation_floor)
            {
                accepted = Some(cand);
                break;
            }
        }
        match accepted {
            Some(t) => templates.push(t),
            None => {
                return Err(DpDtwError::Data(format!(
                    "could not separate template for class {} by {} after {TEMPLATE_RETRIES} tries",
                    class + 1,
                    config.separation_floor
                )))
            }
        }
    }
    Ok(templates)
}

/// Realize one segment: sample the template at a random monotone time warp of
/// the requested duration, then add Gaussian noise.
fn realize_segment(
    template: &Array2<f64>,
    duration: usize,
    warp_jitter: f64,
    noise_sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Array2<f64> {
    let dim = template.nrows();
    let src_len = template.ncols();
    // monotone positions: normalized cumulative sum of positive step widths
    let steps: Vec<f64> = (0..duration)
        .map(|_| 1.0 + warp_jitter * rng.random_range(-1.0..1.0))
        .collect();
    let total: f64 = steps.iter().sum();
    let mut out = Array2::zeros((dim, duration));
    let normal = Normal::new(0.0, noise_sigma.max(f64::MIN_POSITIVE)).unwrap();
    let mut acc = 0.0;
    for (t, step) in steps.iter().enumerate() {
        // center of the t-th step, mapped onto [0, src_len - 1]
        let pos = (acc + step / 2.0) / total * (src_len - 1) as f64;
        acc += step;
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(src_len - 1);
        let frac = pos - lo as f64;
        for d in 0..dim {
            let v = template[[d, lo]] * (1.0 - frac) + template[[d, hi]] * frac;
            let noise = if noise_sigma > 0.0 { normal.sample(rng) } else { 0.0 };
            out[[d, t]] = v + noise;
        }
    }
    out
}

/// When jitter and noise are zero and the duration equals the template
/// length, realized segments are exact template copies.
fn exact_copy_case(config: &SynthConfig, duration: usize) -> bool {
    config.warp_jitter == 0.0 && config.noise_sigma == 0.0 && duration == config.template_len
}

/// Random segment order without immediate repeats, so the transcript is its
/// own collapse.
fn draw_ordering(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n_segments = rng.random_range(config.segments.0..=config.segments.1);
    let mut order = Vec::with_capacity(n_segments);
    for _ in 0..n_segments {
        loop {
            let c = rng.random_range(1..=config.num_classes);
            if order.last() != Some(&c) {
                order.push(c);
                break;
            }
        }
    }
    order
}

/// Generate a weakly supervised corpus with per-frame ground truth. The
/// transcript records the segment order; gt_labels record the true class of
/// every frame. Deterministic per seed.
pub fn gen_synthetic(config: &SynthConfig) -> Result<Vec<SegSample>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let templates = gen_templates(config, &mut rng)?;
    let ordering_pool = if config.num_orderings > 0 {
        let mut pool: Vec<Vec<usize>> = Vec::with_capacity(config.num_orderings);
        let mut tries = 0;
        while pool.len() < config.num_orderings {
            let cand = draw_ordering(config, &mut rng);
            if !pool.contains(&cand) {
                pool.push(cand);
            } else {
                tries += 1;
                if tries > 1000 {
                    return Err(DpDtwError::Data(format!(
                        "cannot draw {} distinct orderings",
                        config.num_orderings
                    )));
                }
            }
        }
        pool
    } else {
        Vec::new()
    };
    let mut samples = Vec::with_capacity(config.samples);
    for idx in 0..config.samples {
        let order = if ordering_pool.is_empty() {
            draw_ordering(config, &mut rng)
        } else {
            ordering_pool[rng.random_range(0..ordering_pool.len())].clone()
        };
        let mut columns: Vec<Array2<f64>> = Vec::with_capacity(order.len());
        let mut gt = Vec::new();
        for &class in &order {
            let duration = rng.random_range(config.duration.0..=config.duration.1);
            let seg = if exact_copy_case(config, duration) {
                templates[class - 1].clone()
            } else {
                realize_segment(
                    &templates[class - 1],
                    duration,
                    config.warp_jitter,
                    config.noise_sigma,
                    &mut rng,
                )
            };
            gt.extend(std::iter::repeat_n(class, seg.ncols()));
            columns.push(seg);
        }
        let tau: usize = columns.iter().map(|c| c.ncols()).sum();
        let mut data = Array2::zeros((config.dim, tau));
        let mut t0 = 0;
        for seg in &columns {
            data.slice_mut(ndarray::s![.., t0..t0 + seg.ncols()]).assign(seg);
            t0 += seg.ncols();
        }
        let sample = SegSample {
            id: format!("synth-{idx:04}"),
            frames: Sequence::new(format!("synth-{idx:04}"), data)?,
            transcript: Transcript::new(order)?,
            gt_labels: Some(gt),
        };
        sample.validate()?;
        samples.push(sample);
    }
    Ok(samples)
}

/// The templates a generated corpus was built from, resampled to tau_p, as a
/// prototype oracle for end-to-end smoke tests.
pub fn template_prototypes(config: &SynthConfig, tau_p: usize) -> Result<Vec<Array2<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let templates = gen_templates(config, &mut rng)?;
    Ok(templates
        .iter()
        .map(|t| resample_matrix(t, tau_p))
        .collect())
}

/// Generator configuration for classification datasets: one warped, noisy
/// template realization per series, fixed series length.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SynthTscConfig {
    pub num_classes: usize,
    pub template_len: usize,
    pub series_len: usize,
    pub warp_jitter: f64,
    pub noise_sigma: f64,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub seed: u64,
    pub separation_floor: f64,
}

impl Default for SynthTscConfig {
    fn default() -> Self {
        Self {
            num_classes: 3,
            template_len: 24,
            series_len: 32,
            warp_jitter: 0.4,
            noise_sigma: 0.4,
            train_per_class: 10,
            test_per_class: 20,
            seed: 0,
            separation_floor: 2.0,
        }
    }
}

/// Generate a univariate train/test classification pair. Deterministic per
/// seed.
pub fn gen_tsc_pair(config: &SynthTscConfig) -> Result<(TscDataset, TscDataset)> {
    if config.num_classes == 0 || config.train_per_class == 0 || config.test_per_class == 0 {
        return Err(DpDtwError::Data("counts must be >= 1".into()));
    }
    let seg_like = SynthConfig {
        num_classes: config.num_classes,
        dim: 1,
        template_len: config.template_len,
        warp_jitter: config.warp_jitter,
        noise_sigma: config.noise_sigma,
        seed: config.seed,
        separation_floor: config.separation_floor,
        ..SynthConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let templates = gen_templates(&seg_like, &mut rng)?;
    let vocab: Vec<String> = (1..=config.num_classes).map(|c| c.to_string()).collect();
    let mut make_split = |per_class: usize, split: &str| -> Result<TscDataset> {
        let mut sequences = Vec::new();
        let mut labels = Vec::new();
        for class in 1..=config.num_classes {
            for i in 0..per_class {
                let data = realize_segment(
                    &templates[class - 1],
                    config.series_len,
                    config.warp_jitter,
                    config.noise_sigma,
                    &mut rng,
                );
                sequences.push(Sequence::new(format!("{split}-{class}-{i}"), data)?);
                labels.push(class);
            }
        }
        TscDataset::new(sequences, labels, vocab.clone())
    };
    let train = make_split(config.train_per_class, "train")?;
    let test = make_split(config.test_per_class, "test")?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_unwarped_samples_are_template_concatenations() {
        let config = SynthConfig {
            num_classes: 3,
            dim: 2,
            template_len: 5,
            segments: (2, 3),
            duration: (5, 5),
            warp_jitter: 0.0,
            noise_sigma: 0.0,
            samples: 10,
            seed: 11,
            separation_floor: 1.0,
            num_orderings: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let templates = gen_templates(&config, &mut rng).unwrap();
        let samples = gen_synthetic(&config).unwrap();
        for s in &samples {
            assert_eq!(s.frames.len(), 5 * s.transcript.len());
            for (i, &class) in s.transcript.entries.iter().enumerate() {
                let seg = s.frames.data().slice(ndarray::s![.., i * 5..(i + 1) * 5]).to_owned();
                assert_eq!(seg, templates[class - 1]);
            }
        }
    }

    #[test]
    fn gt_labels_consistent_and_cover_all_frames() {
        let samples = gen_synthetic(&SynthConfig { samples: 20, seed: 3, ..SynthConfig::default() })
            .unwrap();
        for s in &samples {
            let gt = s.gt_labels.as_ref().unwrap();
            assert_eq!(gt.len(), s.frames.len());
            s.validate().unwrap();
        }
    }

    #[test]
    fn fixed_seed_reproduces_corpus() {
        let config = SynthConfig { samples: 15, seed: 42, ..SynthConfig::default() };
        let a = gen_synthetic(&config).unwrap();
        let b = gen_synthetic(&config).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.id, y.id);
            assert_eq!(x.transcript, y.transcript);
            assert_eq!(x.gt_labels, y.gt_labels);
            assert_eq!(x.frames.data(), y.frames.data());
        }
    }

    #[test]
    fn templates_respect_separation_floor() {
        let config = SynthConfig { separation_floor: 3.0, ..SynthConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let templates = gen_templates(&config, &mut rng).unwrap();
        for i in 0..templates.len() {
            for j in i + 1..templates.len() {
                assert!(template_distance(&templates[i], &templates[j]) >= 3.0);
            }
        }
    }

    #[test]
    fn infeasible_separation_floor_errors() {
        let config = SynthConfig {
            num_classes: 10,
            dim: 1,
            template_len: 1,
            separation_floor: 1e9,
            ..SynthConfig::default()
        };
        assert!(gen_synthetic(&config).is_err());
    }

    #[test]
    fn durations_and_segment_counts_in_range() {
        let config = SynthConfig {
            segments: (2, 4),
            duration: (10, 12),
            samples: 30,
            ..SynthConfig::default()
        };
        for s in gen_synthetic(&config).unwrap() {
            let n = s.transcript.len();
            assert!((2..=4).contains(&n));
            assert!(s.frames.len() >= 10 * n && s.frames.len() <= 12 * n);
        }
    }

    #[test]
    fn ordering_pool_limits_distinct_transcripts() {
        let config = SynthConfig {
            samples: 60,
            num_orderings: 4,
            seed: 19,
            ..SynthConfig::default()
        };
        let samples = gen_synthetic(&config).unwrap();
        let mut distinct: Vec<&[usize]> = Vec::new();
        for s in &samples {
            if !distinct.contains(&s.transcript.entries.as_slice()) {
                distinct.push(&s.transcript.entries);
            }
        }
        assert!(distinct.len() <= 4);
        assert!(distinct.len() >= 2);
    }

    #[test]
    fn tsc_pair_shapes_and_determinism() {
        let config = SynthTscConfig {
            num_classes: 2,
            train_per_class: 3,
            test_per_class: 4,
            ..SynthTscConfig::default()
        };
        let (train, test) = gen_tsc_pair(&config).unwrap();
        assert_eq!(train.len(), 6);
        assert_eq!(test.len(), 8);
        assert!(train.sequences.iter().all(|s| s.len() == config.series_len && s.dim() == 1));
        let (train2, _) = gen_tsc_pair(&config).unwrap();
        for (a, b) in train.sequences.iter().zip(&train2.sequences) {
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn noiseless_corpus_is_perfectly_segmentable_with_template_prototypes() {
        use crate::prototype::{Prototype, PrototypeSet};
        use crate::weak_seg::label_frames;
        let config = SynthConfig {
            num_classes: 3,
            dim: 2,
            template_len: 8,
            segments: (2, 4),
            duration: (8, 8),
            warp_jitter: 0.0,
            noise_sigma: 0.0,
            samples: 10,
            seed: 5,
            separation_floor: 2.0,
            num_orderings: 0,
        };
        let protos = template_prototypes(&config, 8).unwrap();
        let protoset = PrototypeSet::new(
            protos
                .into_iter()
                .enumerate()
                .map(|(i, data)| Prototype { class_id: i + 1, data })
                .collect(),
        )
        .unwrap();
        for s in gen_synthetic(&config).unwrap() {
            let labels = label_frames(&s.frames, &s.transcript, &protoset).unwrap();
            assert_eq!(&labels, s.gt_labels.as_ref().unwrap());
        }
    }
}
