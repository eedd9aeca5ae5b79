//! Python bindings: DTW, prototype training for classification and weakly
//! supervised segmentation, frame labeling, summarization, metrics, model
//! persistence, and the synthetic generator.
//!
//! Sequences cross the boundary as frame-major `list[list[float]]` (tau
//! frames of m values each); univariate series may be flat `list[float]`.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use dpdtw_core::dtw::{dtw as core_dtw, BandConstraint};
use dpdtw_core::model::{Model as CoreModel, ModelMode};
use dpdtw_core::prototype::Transcript;
use dpdtw_core::sequence::Sequence;
use dpdtw_core::synth::{gen_synthetic as core_gen_synthetic, SynthConfig};
use dpdtw_core::tsc::{predict, train_tsc as core_train_tsc, TscConfig, TscDataset};
use dpdtw_core::weak_seg::{
    encode, evaluate as core_evaluate, label_frames as core_label_frames,
    retrieve_transcript, summarize as core_summarize, summary_accuracy,
    train_seg as core_train_seg, EncoderSpec, SegConfig, SegSample,
};
use dpdtw_core::DpDtwError;

fn to_py_err(e: DpDtwError) -> PyErr {
    match e {
        DpDtwError::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Accepts frame-major nested lists, or a flat list for univariate series.
fn sequence_from_py(obj: &Bound<'_, PyAny>, id: &str) -> PyResult<Sequence> {
    let list = obj.cast::<PyList>().map_err(|_| {
        PyValueError::new_err("expected a list of frames (or a flat list of floats)")
    })?;
    if list.is_empty() {
        return Err(PyValueError::new_err("sequence must have at least one frame"));
    }
    let first = list.get_item(0)?;
    if let Ok(v) = first.extract::<f64>() {
        let mut values = vec![v];
        for item in list.iter().skip(1) {
            values.push(item.extract::<f64>()?);
        }
        return Sequence::univariate(id, &values).map_err(to_py_err);
    }
    let frames: Vec<Vec<f64>> = list
        .iter()
        .map(|f| f.extract::<Vec<f64>>())
        .collect::<PyResult<_>>()?;
    Sequence::from_frames(id, &frames).map_err(to_py_err)
}

fn sequence_to_py(py: Python<'_>, s: &Sequence) -> PyResult<Py<PyAny>> {
    let frames: Vec<Vec<f64>> = (0..s.len()).map(|t| s.frame(t).to_vec()).collect();
    Ok(frames.into_pyobject(py)?.unbind().into())
}

fn band_from_window(window: Option<usize>) -> BandConstraint {
    match window {
        Some(width) => BandConstraint::SakoeChiba { width },
        None => BandConstraint::None,
    }
}

/// DTW discrepancy and the optimal alignment path.
#[pyfunction]
#[pyo3(signature = (a, b, window=None))]
fn dtw(
    a: &Bound<'_, PyAny>,
    b: &Bound<'_, PyAny>,
    window: Option<usize>,
) -> PyResult<(f64, Vec<(usize, usize)>)> {
    let s1 = sequence_from_py(a, "a")?;
    let s2 = sequence_from_py(b, "b")?;
    let result = core_dtw(&s1, &s2, band_from_window(window)).map_err(to_py_err)?;
    Ok((result.discrepancy, result.alignment.pairs))
}

/// A trained model.
#[pyclass(name = "Model")]
struct PyModel {
    inner: CoreModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: CoreModel::load(&path).map_err(to_py_err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py_err)
    }

    #[getter]
    fn mode(&self) -> &'static str {
        match self.inner.mode {
            ModelMode::Tsc => "tsc",
            ModelMode::Segmentation => "segmentation",
        }
    }

    #[getter]
    fn vocab(&self) -> Vec<String> {
        self.inner.vocab.clone()
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.protoset.num_classes()
    }

    /// Prototype of a class as frame-major nested lists.
    fn prototype(&self, py: Python<'_>, class_id: usize) -> PyResult<Py<PyAny>> {
        let p = self.inner.protoset.get(class_id).map_err(to_py_err)?;
        sequence_to_py(py, &p.as_sequence())
    }

    /// Classify a series (classification models).
    fn predict(&self, series: &Bound<'_, PyAny>) -> PyResult<usize> {
        if self.inner.mode != ModelMode::Tsc {
            return Err(PyValueError::new_err("model was not trained for classification"));
        }
        let s = sequence_from_py(series, "input")?;
        let band = self
            .inner
            .tsc_config
            .as_ref()
            .map(|c| c.band)
            .unwrap_or(BandConstraint::None);
        predict(&s, &self.inner.protoset, band).map_err(to_py_err)
    }

    /// Per-frame class labels given the transcript (segmentation models).
    fn label_frames(
        &self,
        frames: &Bound<'_, PyAny>,
        transcript: Vec<usize>,
    ) -> PyResult<Vec<usize>> {
        let x = sequence_from_py(frames, "input")?;
        let encoded = encode(&x, &self.inner.encoder).map_err(to_py_err)?;
        let t = Transcript::new(transcript).map_err(to_py_err)?;
        core_label_frames(&encoded, &t, &self.inner.protoset).map_err(to_py_err)
    }

    /// Best-matching transcript from the reference set and its discrepancy.
    fn retrieve(&self, frames: &Bound<'_, PyAny>) -> PyResult<(Vec<usize>, f64)> {
        let reference = self
            .inner
            .reference_set
            .as_ref()
            .ok_or_else(|| PyValueError::new_err("model has no reference set"))?;
        let x = sequence_from_py(frames, "input")?;
        let encoded = encode(&x, &self.inner.encoder).map_err(to_py_err)?;
        let (t, d) =
            retrieve_transcript(&encoded, reference, &self.inner.protoset).map_err(to_py_err)?;
        Ok((t.entries, d))
    }

    /// Key-frame indices for a transcript's ordering sequence.
    fn summarize(
        &self,
        frames: &Bound<'_, PyAny>,
        transcript: Vec<usize>,
    ) -> PyResult<Vec<usize>> {
        let x = sequence_from_py(frames, "input")?;
        let encoded = encode(&x, &self.inner.encoder).map_err(to_py_err)?;
        let t = Transcript::new(transcript).map_err(to_py_err)?;
        core_summarize(&encoded, &t, &self.inner.protoset).map_err(to_py_err)
    }

    /// Fraction of key frames matching their intended action.
    fn summary_accuracy(
        &self,
        key_indices: Vec<usize>,
        gt_labels: Vec<usize>,
        transcript: Vec<usize>,
    ) -> PyResult<f64> {
        let t = Transcript::new(transcript).map_err(to_py_err)?;
        summary_accuracy(&key_indices, &gt_labels, &t, self.inner.protoset.tau_p())
            .map_err(to_py_err)
    }
}

/// Train classification prototypes.
#[pyfunction]
#[pyo3(signature = (series, labels, vocab, *, lam=0.0, temperature=1.0, epochs=60,
    batch_fraction=0.2, lr=0.01, seed=0, window=None))]
#[allow(clippy::too_many_arguments)]
fn train_tsc(
    series: Vec<Bound<'_, PyAny>>,
    labels: Vec<usize>,
    vocab: Vec<String>,
    lam: f64,
    temperature: f64,
    epochs: usize,
    batch_fraction: f64,
    lr: f64,
    seed: u64,
    window: Option<usize>,
) -> PyResult<PyModel> {
    let sequences: Vec<Sequence> = series
        .iter()
        .enumerate()
        .map(|(i, s)| sequence_from_py(s, &format!("train-{i}")))
        .collect::<PyResult<_>>()?;
    let dataset = TscDataset::new(sequences, labels, vocab).map_err(to_py_err)?;
    let config = TscConfig {
        lambda: lam,
        temperature,
        epochs,
        batch_fraction,
        learning_rate: lr,
        seed,
        band: band_from_window(window),
    };
    let model = core_train_tsc(&dataset, &config).map_err(to_py_err)?;
    Ok(PyModel { inner: model })
}

fn parse_encoder(text: &str) -> PyResult<EncoderSpec> {
    match text {
        "identity" => Ok(EncoderSpec::Identity),
        "affine" => Ok(EncoderSpec::Affine),
        other => other
            .strip_prefix("window:")
            .and_then(|w| w.parse::<usize>().ok())
            .filter(|w| *w >= 1)
            .map(|size| EncoderSpec::Window { size })
            .ok_or_else(|| {
                PyValueError::new_err(format!(
                    "unknown encoder {other:?}; expected identity, affine, or window:<w>"
                ))
            }),
    }
}

fn seg_samples_from_py(samples: &Bound<'_, PyList>) -> PyResult<Vec<SegSample>> {
    samples
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let dict = item.cast::<PyDict>().map_err(|_| {
                PyValueError::new_err("each sample must be a dict with frames/transcript")
            })?;
            let frames_obj = dict
                .get_item("frames")?
                .ok_or_else(|| PyValueError::new_err(format!("sample {i}: missing frames")))?;
            let transcript: Vec<usize> = dict
                .get_item("transcript")?
                .ok_or_else(|| PyValueError::new_err(format!("sample {i}: missing transcript")))?
                .extract()?;
            let gt_labels: Option<Vec<usize>> = match dict.get_item("labels")? {
                Some(obj) if !obj.is_none() => Some(obj.extract()?),
                _ => None,
            };
            let id = match dict.get_item("id")? {
                Some(obj) if !obj.is_none() => obj.extract::<String>()?,
                _ => format!("sample-{i}"),
            };
            let sample = SegSample {
                frames: sequence_from_py(&frames_obj, &id)?,
                id,
                transcript: Transcript::new(transcript).map_err(to_py_err)?,
                gt_labels,
            };
            sample.validate().map_err(to_py_err)?;
            Ok(sample)
        })
        .collect()
}

/// Train a weakly supervised segmentation model. Samples are dicts with keys
/// frames, transcript, and optionally labels and id.
#[pyfunction]
#[pyo3(signature = (samples, *, delta=1.0, lam=0.1, q=50, tau_p=8, steps=500,
    batch=16, lr=0.001, seed=0, encoder="identity"))]
#[allow(clippy::too_many_arguments)]
fn train_seg(
    samples: &Bound<'_, PyList>,
    delta: f64,
    lam: f64,
    q: usize,
    tau_p: usize,
    steps: usize,
    batch: usize,
    lr: f64,
    seed: u64,
    encoder: &str,
) -> PyResult<PyModel> {
    let parsed = seg_samples_from_py(samples)?;
    let config = SegConfig {
        delta,
        lambda: lam,
        num_negatives: q,
        tau_p,
        steps,
        batch_size: batch,
        learning_rate: lr,
        seed,
        encoder: parse_encoder(encoder)?,
    };
    let k = dpdtw_core::weak_seg::infer_num_classes(&parsed);
    let vocab: Vec<String> = (1..=k).map(|c| c.to_string()).collect();
    let model = core_train_seg(&parsed, &config, vocab).map_err(to_py_err)?;
    Ok(PyModel { inner: model })
}

/// Frame accuracy, IoU, and IoD for one video.
#[pyfunction]
#[pyo3(signature = (pred, gt, background=None))]
fn evaluate(
    py: Python<'_>,
    pred: Vec<usize>,
    gt: Vec<usize>,
    background: Option<usize>,
) -> PyResult<Py<PyAny>> {
    let m = core_evaluate(&pred, &gt, background).map_err(to_py_err)?;
    let dict = PyDict::new(py);
    dict.set_item("f_acc", m.f_acc)?;
    dict.set_item("iou", m.iou)?;
    dict.set_item("iod", m.iod)?;
    Ok(dict.unbind().into())
}

/// Synthetic segmentation corpus as a list of sample dicts.
#[pyfunction]
#[pyo3(signature = (*, k=5, m=4, samples=200, seed=0, template_len=20,
    min_segments=3, max_segments=6, min_duration=15, max_duration=30,
    warp=0.3, noise=0.1, orderings=0))]
#[allow(clippy::too_many_arguments)]
fn gen_synthetic(
    py: Python<'_>,
    k: usize,
    m: usize,
    samples: usize,
    seed: u64,
    template_len: usize,
    min_segments: usize,
    max_segments: usize,
    min_duration: usize,
    max_duration: usize,
    warp: f64,
    noise: f64,
    orderings: usize,
) -> PyResult<Py<PyAny>> {
    let config = SynthConfig {
        num_classes: k,
        dim: m,
        template_len,
        segments: (min_segments, max_segments),
        duration: (min_duration, max_duration),
        warp_jitter: warp,
        noise_sigma: noise,
        samples,
        seed,
        num_orderings: orderings,
        ..SynthConfig::default()
    };
    let corpus = core_gen_synthetic(&config).map_err(to_py_err)?;
    let out = PyList::empty(py);
    for sample in &corpus {
        let dict = PyDict::new(py);
        dict.set_item("id", &sample.id)?;
        dict.set_item("frames", sequence_to_py(py, &sample.frames)?)?;
        dict.set_item("transcript", sample.transcript.entries.clone())?;
        dict.set_item("labels", sample.gt_labels.clone())?;
        out.append(dict)?;
    }
    Ok(out.unbind().into())
}

#[pymodule]
fn dpdtw(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(dtw, m)?)?;
    m.add_function(wrap_pyfunction!(train_tsc, m)?)?;
    m.add_function(wrap_pyfunction!(train_seg, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(gen_synthetic, m)?)?;
    m.add_class::<PyModel>()?;
    Ok(())
}
