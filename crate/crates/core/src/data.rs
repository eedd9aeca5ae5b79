//! Dataset loaders and writers. All loaders reject malformed input with the
//! offending location rather than repairing it.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{DpDtwError, Result};
use crate::prototype::Transcript;
use crate::sequence::Sequence;
use crate::tsc::TscDataset;
use crate::weak_seg::SegSample;

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> DpDtwError {
    DpDtwError::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> DpDtwError + '_ {
    move |e| DpDtwError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

/// Atomic whole-file write: temp file next to the target, then rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(path))?;
        f.write_all(bytes).map_err(io_err(path))?;
        f.sync_all().map_err(io_err(path))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))?;
    Ok(())
}

/// Load a univariate classification split: one series per line, label in the
/// first column, tab or comma delimited. Labels are remapped to dense 1..K
/// in sorted order of their original text, recorded in the vocabulary.
pub fn load_ucr_tsv(path: &Path) -> Result<TscDataset> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let raw = parse_ucr_lines(path, &text)?;
    let mut vocab: Vec<String> = raw.iter().map(|(l, _)| l.clone()).collect();
    vocab.sort();
    vocab.dedup();
    build_tsc_dataset(path, raw, vocab)
}

/// Load a train/test pair sharing the train split's vocabulary. A test label
/// absent from train is an error.
pub fn load_ucr_pair(train_path: &Path, test_path: &Path) -> Result<(TscDataset, TscDataset)> {
    let train = load_ucr_tsv(train_path)?;
    let text = fs::read_to_string(test_path).map_err(io_err(test_path))?;
    let raw = parse_ucr_lines(test_path, &text)?;
    let test = build_tsc_dataset(test_path, raw, train.vocab.clone())?;
    if test.sequences[0].len() != train.sequences[0].len() {
        return Err(DpDtwError::Data(format!(
            "train series length {} differs from test series length {}",
            train.sequences[0].len(),
            test.sequences[0].len()
        )));
    }
    Ok((train, test))
}

fn parse_ucr_lines(path: &Path, text: &str) -> Result<Vec<(String, Vec<f64>)>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let sep = if line.contains('\t') { '\t' } else { ',' };
        let mut fields = line.split(sep);
        let label = fields
            .next()
            .filter(|f| !f.is_empty())
            .ok_or_else(|| parse_err(path, lineno + 1, "missing label"))?
            .to_string();
        let values: Vec<f64> = fields
            .enumerate()
            .map(|(col, f)| {
                f.trim().parse::<f64>().map_err(|_| {
                    parse_err(path, lineno + 1, format!("bad value {f:?} in column {}", col + 2))
                })
            })
            .collect::<Result<_>>()?;
        if values.is_empty() {
            return Err(parse_err(path, lineno + 1, "no values after label"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(path, lineno + 1, "non-finite value"));
        }
        rows.push((label, values));
    }
    if rows.is_empty() {
        return Err(parse_err(path, 0, "empty dataset"));
    }
    let len = rows[0].1.len();
    for (i, (_, v)) in rows.iter().enumerate() {
        if v.len() != len {
            return Err(parse_err(
                path,
                i + 1,
                format!("series length {} differs from first line's {len}", v.len()),
            ));
        }
    }
    Ok(rows)
}

fn build_tsc_dataset(
    path: &Path,
    rows: Vec<(String, Vec<f64>)>,
    vocab: Vec<String>,
) -> Result<TscDataset> {
    let mut sequences = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (i, (label, values)) in rows.into_iter().enumerate() {
        let id = vocab
            .iter()
            .position(|v| *v == label)
            .ok_or_else(|| parse_err(path, i + 1, format!("label {label:?} not in train vocabulary")))?;
        labels.push(id + 1);
        sequences.push(Sequence::univariate(format!("{}#{}", path.display(), i + 1), &values)?);
    }
    TscDataset::new(sequences, labels, vocab)
}

/// Write a classification split in the same layout load_ucr_tsv reads.
/// Floats use shortest round-trip decimal formatting, so the round trip is
/// value-exact.
pub fn save_ucr_tsv(path: &Path, dataset: &TscDataset) -> Result<()> {
    let mut out = String::new();
    for (s, &label) in dataset.sequences.iter().zip(&dataset.labels) {
        out.push_str(&dataset.vocab[label - 1]);
        for v in s.data().iter() {
            out.push('\t');
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

#[derive(Serialize, Deserialize)]
struct SegRecord {
    id: String,
    /// Frame-major: tau arrays of m reals each.
    frames: Vec<Vec<f64>>,
    transcript: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<usize>>,
}

/// Load a segmentation corpus: one JSON object per line with fields id,
/// frames (tau arrays of m reals), transcript, and optional labels.
pub fn load_seg_corpus(path: &Path) -> Result<Vec<SegSample>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut samples = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: SegRecord = serde_json::from_str(line)
            .map_err(|e| parse_err(path, lineno + 1, format!("bad record: {e}")))?;
        let tau = record.frames.len();
        if tau == 0 {
            return Err(parse_err(path, lineno + 1, "record has no frames"));
        }
        let m = record.frames[0].len();
        let mut data = Array2::zeros((m, tau));
        for (t, frame) in record.frames.iter().enumerate() {
            if frame.len() != m {
                return Err(parse_err(
                    path,
                    lineno + 1,
                    format!("frame {t} has {} dims, expected {m}", frame.len()),
                ));
            }
            for (d, &v) in frame.iter().enumerate() {
                data[[d, t]] = v;
            }
        }
        let sample = SegSample {
            id: record.id,
            frames: Sequence::new(format!("{}#{}", path.display(), lineno + 1), data)
                .map_err(|e| parse_err(path, lineno + 1, e.to_string()))?,
            transcript: Transcript::new(record.transcript)
                .map_err(|e| parse_err(path, lineno + 1, e.to_string()))?,
            gt_labels: record.labels,
        };
        sample
            .validate()
            .map_err(|e| parse_err(path, lineno + 1, e.to_string()))?;
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(parse_err(path, 0, "empty corpus"));
    }
    Ok(samples)
}

/// Write a segmentation corpus in the layout load_seg_corpus reads.
pub fn save_seg_corpus(path: &Path, samples: &[SegSample]) -> Result<()> {
    let mut out = String::new();
    for s in samples {
        let frames: Vec<Vec<f64>> = (0..s.frames.len())
            .map(|t| s.frames.frame(t).to_vec())
            .collect();
        let record = SegRecord {
            id: s.id.clone(),
            frames,
            transcript: s.transcript.entries.clone(),
            labels: s.gt_labels.clone(),
        };
        out.push_str(&serde_json::to_string(&record).expect("record serializes"));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}
