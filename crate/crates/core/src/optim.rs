//! Shared optimization machinery: Adam, deterministic mini-batch iteration,
//! and finite-difference gradient verification with a path-stability probe.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{DpDtwError, Result};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct AdamParams {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamParams {
    pub fn with_lr(alpha: f64) -> Self {
        Self { alpha, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Per-tensor first/second moment accumulators plus a shared step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub params: AdamParams,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    /// `sizes[i]` is the flattened length of parameter tensor i.
    pub fn new(params: AdamParams, sizes: &[usize]) -> Self {
        Self {
            params,
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    /// One bias-corrected Adam update over all tensors. `tensors[i]` and
    /// `grads[i]` must match the size declared at construction.
    pub fn step(&mut self, tensors: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if tensors.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(DpDtwError::Data(format!(
                "adam_step got {} tensors, state holds {}",
                tensors.len(),
                self.first.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let AdamParams { alpha, beta1, beta2, epsilon } = self.params;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for (idx, (tensor, grad)) in tensors.iter_mut().zip(grads.iter()).enumerate() {
            if tensor.len() != self.first[idx].len() || grad.len() != self.first[idx].len() {
                return Err(DpDtwError::Data(format!(
                    "adam_step tensor {idx}: size {} does not match state size {}",
                    tensor.len(),
                    self.first[idx].len()
                )));
            }
            let m = &mut self.first[idx];
            let v = &mut self.second[idx];
            for i in 0..grad.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                tensor[i] -= alpha * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

/// Batch size selection: a fraction of the dataset or a fixed count.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub enum BatchSpec {
    Fraction(f64),
    Count(usize),
}

impl BatchSpec {
    fn batch_size(&self, size: usize) -> usize {
        match self {
            BatchSpec::Fraction(f) => ((size as f64 * f).ceil() as usize).clamp(1, size),
            BatchSpec::Count(n) => (*n).clamp(1, size),
        }
    }
}

/// Deterministic epoch partition: a seeded permutation of all indices,
/// chunked into batches. Every index appears exactly once per epoch.
pub fn minibatch_iter(size: usize, spec: BatchSpec, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    let mut indices: Vec<usize> = (0..size).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ epoch.wrapping_mul(0x9e3779b97f4a7c15));
    indices.shuffle(&mut rng);
    let bs = spec.batch_size(size);
    indices.chunks(bs).map(|c| c.to_vec()).collect()
}

/// Outcome of checking one parameter vector against central differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Max relative error over checked coordinates.
    pub max_rel_error: f64,
    /// Coordinates compared.
    pub checked: usize,
    /// Coordinates skipped because the DTW path changed under perturbation.
    pub skipped: usize,
    /// Checked coordinates exceeding the tolerance.
    pub failures: Vec<usize>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Verify `analytic` against central finite differences of `loss`.
///
/// `loss` returns the objective value plus an opaque signature of the DTW
/// paths realized at that point. A coordinate whose perturbed signature
/// differs from the base signature straddles a path switch; the envelope
/// subgradient is not comparable to finite differences there, so it is
/// skipped.
pub fn grad_check<F>(
    loss: F,
    params: &[f64],
    analytic: &[f64],
    epsilon: f64,
    tol: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&[f64]) -> (f64, u64),
{
    if params.len() != analytic.len() {
        return Err(DpDtwError::Data(format!(
            "grad_check: {} params vs {} gradient entries",
            params.len(),
            analytic.len()
        )));
    }
    let (base_value, base_sig) = loss(params);
    if !base_value.is_finite() {
        return Err(DpDtwError::NonFinite { context: "grad_check base loss".into() });
    }
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
        failures: Vec::new(),
    };
    let mut point = params.to_vec();
    for i in 0..params.len() {
        point[i] = params[i] + epsilon;
        let (up, sig_up) = loss(&point);
        point[i] = params[i] - epsilon;
        let (down, sig_down) = loss(&point);
        point[i] = params[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(DpDtwError::NonFinite { context: format!("grad_check coordinate {i}") });
        }
        if sig_up != base_sig || sig_down != base_sig {
            report.skipped += 1;
            continue;
        }
        let fd = (up - down) / (2.0 * epsilon);
        let g = analytic[i];
        let abs_err = (fd - g).abs();
        let rel = abs_err / fd.abs().max(g.abs()).max(1e-6);
        report.checked += 1;
        report.max_rel_error = report.max_rel_error.max(rel);
        if rel > tol && abs_err > 1e-7 {
            report.failures.push(i);
        }
    }
    Ok(report)
}
