use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{DpDtwError, Result};

/// A real-valued sequence: feature dimension `m` by temporal length `tau`,
/// one feature column per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub id: String,
    data: Array2<f64>,
}

impl Sequence {
    /// Build a sequence from an `m x tau` matrix. Rejects empty shapes and
    /// non-finite entries.
    pub fn new(id: impl Into<String>, data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(DpDtwError::Data(format!(
                "sequence requires m >= 1 and tau >= 1, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(DpDtwError::NonFinite {
                context: "sequence data".into(),
            });
        }
        Ok(Self { id: id.into(), data })
    }

    /// Univariate sequence from a slice of values.
    pub fn univariate(id: impl Into<String>, values: &[f64]) -> Result<Self> {
        let data = Array2::from_shape_vec((1, values.len()), values.to_vec())
            .expect("shape consistent by construction");
        Self::new(id, data)
    }

    /// Build from frame-major rows: `frames[t]` is the feature vector at step t.
    pub fn from_frames(id: impl Into<String>, frames: &[Vec<f64>]) -> Result<Self> {
        if frames.is_empty() {
            return Err(DpDtwError::Data("sequence requires tau >= 1".into()));
        }
        let m = frames[0].len();
        let mut data = Array2::zeros((m, frames.len()));
        for (t, frame) in frames.iter().enumerate() {
            if frame.len() != m {
                return Err(DpDtwError::DimensionMismatch {
                    expected: m,
                    got: frame.len(),
                });
            }
            for (d, v) in frame.iter().enumerate() {
                data[[d, t]] = *v;
            }
        }
        Self::new(id, data)
    }

    /// Feature dimension m.
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    /// Temporal length tau.
    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        false // tau >= 1 by construction
    }

    /// Feature column at (0-based) time step t.
    pub fn frame(&self, t: usize) -> ArrayView1<'_, f64> {
        self.data.column(t)
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    /// Linear-interpolation resampling along the temporal axis to `new_len`.
    pub fn resample(&self, new_len: usize) -> Result<Sequence> {
        if new_len == 0 {
            return Err(DpDtwError::Data("resample target length must be >= 1".into()));
        }
        let data = resample_matrix(&self.data, new_len);
        Sequence::new(self.id.clone(), data)
    }
}

/// Linear interpolation of an `m x tau` matrix along the temporal axis.
pub fn resample_matrix(data: &Array2<f64>, new_len: usize) -> Array2<f64> {
    let (m, tau) = (data.nrows(), data.ncols());
    let mut out = Array2::zeros((m, new_len));
    for t in 0..new_len {
        let pos = if new_len == 1 {
            0.0
        } else {
            t as f64 * (tau - 1) as f64 / (new_len - 1) as f64
        };
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(tau - 1);
        let frac = pos - lo as f64;
        for d in 0..m {
            out[[d, t]] = data[[d, lo]] * (1.0 - frac) + data[[d, hi]] * frac;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_empty_and_nonfinite() {
        assert!(Sequence::new("e", Array2::zeros((0, 3))).is_err());
        assert!(Sequence::new("e", Array2::zeros((2, 0))).is_err());
        assert!(Sequence::new("n", array![[f64::NAN]]).is_err());
        assert!(Sequence::new("i", array![[f64::INFINITY]]).is_err());
    }

    #[test]
    fn frame_major_construction() {
        let s = Sequence::from_frames("s", &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.len(), 2);
        assert_eq!(s.frame(1).to_vec(), vec![3.0, 4.0]);
    }

    #[test]
    fn ragged_frames_rejected() {
        assert!(Sequence::from_frames("r", &[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn resample_endpoints_fixed() {
        let s = Sequence::univariate("s", &[0.0, 1.0, 2.0]).unwrap();
        let r = s.resample(5).unwrap();
        assert_eq!(r.len(), 5);
        assert_eq!(r.frame(0)[0], 0.0);
        assert_eq!(r.frame(4)[0], 2.0);
        assert!((r.frame(2)[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resample_to_one_takes_first() {
        let s = Sequence::univariate("s", &[3.0, 7.0]).unwrap();
        assert_eq!(s.resample(1).unwrap().frame(0)[0], 3.0);
    }
}
