//! Exact dynamic time warping: cost matrices, optimal alignments with
//! backtracking, Sakoe-Chiba band constraints, and path subgradients.

use ndarray::Array2;

use crate::error::{DpDtwError, Result};
use crate::sequence::Sequence;

/// Band constraint on the DP table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BandConstraint {
    None,
    /// Admits cell (i, j) iff |i * (tau2/tau1) - j| <= width, 0-based after
    /// shifting to 1-based centers. The normalization keeps unequal lengths
    /// feasible for width >= |tau1 - tau2|.
    SakoeChiba { width: usize },
}

impl BandConstraint {
    fn admits(&self, i: usize, j: usize, tau1: usize, tau2: usize) -> bool {
        match self {
            BandConstraint::None => true,
            BandConstraint::SakoeChiba { width } => {
                // 1-based centers
                let center = (i + 1) as f64 * tau2 as f64 / tau1 as f64;
                (center - (j + 1) as f64).abs() <= *width as f64
            }
        }
    }
}

/// A monotone warping path: ordered (t1, t2) index pairs, 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub pairs: Vec<(usize, usize)>,
}

impl Alignment {
    /// Diagonal alignment of length tau.
    pub fn diagonal(tau: usize) -> Self {
        Self {
            pairs: (0..tau).map(|t| (t, t)).collect(),
        }
    }

    /// Check warping constraints against the given sequence lengths.
    pub fn validate(&self, tau1: usize, tau2: usize) -> Result<()> {
        let err = || DpDtwError::InvalidAlignment { len1: tau1, len2: tau2 };
        if self.pairs.is_empty() {
            return Err(err());
        }
        if self.pairs[0] != (0, 0) {
            return Err(err());
        }
        if *self.pairs.last().unwrap() != (tau1 - 1, tau2 - 1) {
            return Err(err());
        }
        for w in self.pairs.windows(2) {
            let (a, b) = (w[0], w[1]);
            let d1 = b.0.wrapping_sub(a.0);
            let d2 = b.1.wrapping_sub(a.1);
            if d1 > 1 || d2 > 1 || (d1 == 0 && d2 == 0) {
                return Err(err());
            }
        }
        Ok(())
    }
}

/// Optimal alignment plus its accumulated discrepancy.
#[derive(Debug, Clone)]
pub struct DtwResult {
    pub alignment: Alignment,
    pub discrepancy: f64,
}

fn check_dims(s1: &Sequence, s2: &Sequence) -> Result<()> {
    if s1.dim() != s2.dim() {
        return Err(DpDtwError::DimensionMismatch {
            expected: s1.dim(),
            got: s2.dim(),
        });
    }
    Ok(())
}

fn frame_dist(s1: &Sequence, i: usize, s2: &Sequence, j: usize) -> f64 {
    let a = s1.frame(i);
    let b = s2.frame(j);
    let mut acc = 0.0;
    for d in 0..a.len() {
        let diff = a[d] - b[d];
        acc += diff * diff;
    }
    acc.sqrt()
}

/// Pairwise L2 cost matrix: entry (i, j) = ||s1[i] - s2[j]||_2.
pub fn cost_matrix(s1: &Sequence, s2: &Sequence) -> Result<Array2<f64>> {
    check_dims(s1, s2)?;
    let (t1, t2) = (s1.len(), s2.len());
    let mut cost = Array2::zeros((t1, t2));
    for i in 0..t1 {
        for j in 0..t2 {
            cost[[i, j]] = frame_dist(s1, i, s2, j);
        }
    }
    Ok(cost)
}

// Backtracking predecessor of a DP cell.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Step {
    Diag,
    Vert, // advance in s1
    Horiz,
    Start,
}

/// DTW via the full DP table with backtracking.
///
/// Recurrence D[i,j] = cost(i,j) + min(D[i-1,j-1], D[i-1,j], D[i,j-1]) with
/// tie-break preference diagonal > vertical > horizontal, so alignments are
/// deterministic.
pub fn dtw(s1: &Sequence, s2: &Sequence, band: BandConstraint) -> Result<DtwResult> {
    check_dims(s1, s2)?;
    let (t1, t2) = (s1.len(), s2.len());
    let mut table = Array2::from_elem((t1, t2), f64::INFINITY);
    let mut steps = vec![vec![Step::Start; t2]; t1];

    for i in 0..t1 {
        for j in 0..t2 {
            if !band.admits(i, j, t1, t2) {
                continue;
            }
            let cost = frame_dist(s1, i, s2, j);
            if i == 0 && j == 0 {
                table[[0, 0]] = cost;
                continue;
            }
            let diag = if i > 0 && j > 0 { table[[i - 1, j - 1]] } else { f64::INFINITY };
            let vert = if i > 0 { table[[i - 1, j]] } else { f64::INFINITY };
            let horiz = if j > 0 { table[[i, j - 1]] } else { f64::INFINITY };
            let best = diag.min(vert).min(horiz);
            if best.is_infinite() {
                continue;
            }
            table[[i, j]] = cost + best;
            steps[i][j] = if diag <= vert && diag <= horiz {
                Step::Diag
            } else if vert <= horiz {
                Step::Vert
            } else {
                Step::Horiz
            };
        }
    }

    if table[[t1 - 1, t2 - 1]].is_infinite() {
        let width = match band {
            BandConstraint::SakoeChiba { width } => width,
            BandConstraint::None => unreachable!("unconstrained DTW is always feasible"),
        };
        return Err(DpDtwError::InfeasibleBand {
            width,
            len1: t1,
            len2: t2,
            required: min_feasible_width(t1, t2),
        });
    }

    let mut pairs = Vec::with_capacity(t1 + t2);
    let (mut i, mut j) = (t1 - 1, t2 - 1);
    loop {
        pairs.push((i, j));
        match steps[i][j] {
            Step::Start => break,
            Step::Diag => {
                i -= 1;
                j -= 1;
            }
            Step::Vert => i -= 1,
            Step::Horiz => j -= 1,
        }
    }
    pairs.reverse();

    Ok(DtwResult {
        alignment: Alignment { pairs },
        discrepancy: table[[t1 - 1, t2 - 1]],
    })
}

/// Smallest Sakoe-Chiba width for which a feasible path exists, by scanning
/// band feasibility. Only used to build the infeasibility error message.
pub fn min_feasible_width(t1: usize, t2: usize) -> usize {
    'width: for w in 0..=t1.max(t2) {
        let band = BandConstraint::SakoeChiba { width: w };
        // boolean reachability DP
        let mut reach = vec![vec![false; t2]; t1];
        for i in 0..t1 {
            for j in 0..t2 {
                if !band.admits(i, j, t1, t2) {
                    continue;
                }
                reach[i][j] = (i == 0 && j == 0)
                    || (i > 0 && j > 0 && reach[i - 1][j - 1])
                    || (i > 0 && reach[i - 1][j])
                    || (j > 0 && reach[i][j - 1]);
            }
        }
        if reach[t1 - 1][t2 - 1] {
            return w;
        }
        continue 'width;
    }
    t1.max(t2)
}

/// Re-sum the aligned L2 distances along a path.
pub fn alignment_cost(s1: &Sequence, s2: &Sequence, alignment: &Alignment) -> Result<f64> {
    check_dims(s1, s2)?;
    alignment.validate(s1.len(), s2.len())?;
    Ok(alignment
        .pairs
        .iter()
        .map(|&(i, j)| frame_dist(s1, i, s2, j))
        .sum())
}

/// Envelope subgradient of the discrepancy with the alignment held fixed.
///
/// G1[t1] accumulates (s1[t1]-s2[t2])/||s1[t1]-s2[t2]|| over aligned pairs;
/// G2 takes the opposite sign. Pairs at zero distance contribute zero.
pub fn dtw_subgradient(
    s1: &Sequence,
    s2: &Sequence,
    alignment: &Alignment,
) -> Result<(Array2<f64>, Array2<f64>)> {
    check_dims(s1, s2)?;
    alignment.validate(s1.len(), s2.len())?;
    let m = s1.dim();
    let mut g1 = Array2::zeros((m, s1.len()));
    let mut g2 = Array2::zeros((m, s2.len()));
    for &(i, j) in &alignment.pairs {
        let dist = frame_dist(s1, i, s2, j);
        if dist == 0.0 {
            continue;
        }
        for d in 0..m {
            let u = (s1.frame(i)[d] - s2.frame(j)[d]) / dist;
            g1[[d, i]] += u;
            g2[[d, j]] -= u;
        }
    }
    Ok((g1, g2))
}

/// Euclidean distance between equal-length sequences:
/// sqrt(sum_t ||s1[t]-s2[t]||^2).
pub fn euclidean(s1: &Sequence, s2: &Sequence) -> Result<f64> {
    check_dims(s1, s2)?;
    if s1.len() != s2.len() {
        return Err(DpDtwError::LengthMismatch {
            expected: s1.len(),
            got: s2.len(),
        });
    }
    let mut acc = 0.0;
    for t in 0..s1.len() {
        let d = frame_dist(s1, t, s2, t);
        acc += d * d;
    }
    Ok(acc.sqrt())
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Brute-force path enumeration, independent of the DP implementation.
    use super::*;

    /// Minimal accumulated cost over all monotone warping paths, by
    /// exhaustive recursion from (t1-1, t2-1).
    pub fn brute_force_discrepancy(s1: &Sequence, s2: &Sequence) -> f64 {
        fn go(s1: &Sequence, s2: &Sequence, i: usize, j: usize) -> f64 {
            let cost = frame_dist(s1, i, s2, j);
            if i == 0 && j == 0 {
                return cost;
            }
            let mut best = f64::INFINITY;
            if i > 0 && j > 0 {
                best = best.min(go(s1, s2, i - 1, j - 1));
            }
            if i > 0 {
                best = best.min(go(s1, s2, i - 1, j));
            }
            if j > 0 {
                best = best.min(go(s1, s2, i, j - 1));
            }
            cost + best
        }
        go(s1, s2, s1.len() - 1, s2.len() - 1)
    }
}
