//! Class-specific prototype sequences: medoid initialization, transcript
//! concatenation, and DBA averaging.

use ndarray::Array2;

use crate::dtw::{dtw, BandConstraint};
use crate::error::{DpDtwError, Result};
use crate::sequence::{resample_matrix, Sequence};

/// A learnable prototype sequence for one class. `class_id` is 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototype {
    pub class_id: usize,
    pub data: Array2<f64>,
}

impl Prototype {
    pub fn as_sequence(&self) -> Sequence {
        Sequence::new(format!("proto-{}", self.class_id), self.data.clone())
            .expect("prototype data is finite and non-empty")
    }
}

/// One prototype per class id 1..=K, all sharing feature dimension `m` and
/// temporal length `tau_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    prototypes: Vec<Prototype>,
    m: usize,
    tau_p: usize,
}

impl PrototypeSet {
    pub fn new(prototypes: Vec<Prototype>) -> Result<Self> {
        if prototypes.is_empty() {
            return Err(DpDtwError::EmptyCollection);
        }
        let m = prototypes[0].data.nrows();
        let tau_p = prototypes[0].data.ncols();
        for (idx, p) in prototypes.iter().enumerate() {
            if p.class_id != idx + 1 {
                return Err(DpDtwError::Data(format!(
                    "prototype at position {idx} has class id {}, expected {}",
                    p.class_id,
                    idx + 1
                )));
            }
            if p.data.nrows() != m {
                return Err(DpDtwError::DimensionMismatch { expected: m, got: p.data.nrows() });
            }
            if p.data.ncols() != tau_p {
                return Err(DpDtwError::LengthMismatch { expected: tau_p, got: p.data.ncols() });
            }
            if !p.data.iter().all(|v| v.is_finite()) {
                return Err(DpDtwError::NonFinite { context: format!("prototype {}", p.class_id) });
            }
        }
        Ok(Self { m, tau_p, prototypes })
    }

    pub fn num_classes(&self) -> usize {
        self.prototypes.len()
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn tau_p(&self) -> usize {
        self.tau_p
    }

    /// Prototype for a 1-based class id.
    pub fn get(&self, class_id: usize) -> Result<&Prototype> {
        self.prototypes
            .get(class_id.wrapping_sub(1))
            .ok_or(DpDtwError::UnknownClass { id: class_id, max: self.prototypes.len() })
    }

    pub fn get_mut(&mut self, class_id: usize) -> Result<&mut Prototype> {
        let max = self.prototypes.len();
        self.prototypes
            .get_mut(class_id.wrapping_sub(1))
            .ok_or(DpDtwError::UnknownClass { id: class_id, max })
    }

    pub fn iter(&self) -> impl Iterator<Item = &Prototype> {
        self.prototypes.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Prototype> {
        self.prototypes.iter_mut()
    }
}

/// An ordered list of 1-based class ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Transcript {
    pub entries: Vec<usize>,
}

impl Transcript {
    pub fn new(entries: Vec<usize>) -> Result<Self> {
        if entries.is_empty() {
            return Err(DpDtwError::Data("transcript must have length >= 1".into()));
        }
        if entries.contains(&0) {
            return Err(DpDtwError::Data("transcript class ids are 1-based".into()));
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Collapse adjacent repeats: [1,1,2,2,1] -> [1,2,1].
    pub fn collapsed(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for &e in &self.entries {
            if out.last() != Some(&e) {
                out.push(e);
            }
        }
        out
    }
}

/// Concatenated prototype realization of a transcript, length l * tau_p.
#[derive(Debug, Clone)]
pub struct OrderingSequence {
    pub sequence: Sequence,
    pub source: Transcript,
    pub tau_p: usize,
}

impl OrderingSequence {
    pub fn gamma(&self) -> usize {
        self.sequence.len()
    }
}

/// Concatenate class prototypes following the transcript order.
pub fn temp_cat(transcript: &Transcript, protoset: &PrototypeSet) -> Result<OrderingSequence> {
    let tau_p = protoset.tau_p();
    let gamma = transcript.len() * tau_p;
    let mut data = Array2::zeros((protoset.dim(), gamma));
    for (i, &class_id) in transcript.entries.iter().enumerate() {
        let proto = protoset.get(class_id)?;
        data.slice_mut(ndarray::s![.., i * tau_p..(i + 1) * tau_p])
            .assign(&proto.data);
    }
    Ok(OrderingSequence {
        sequence: Sequence::new("ordering", data)?,
        source: transcript.clone(),
        tau_p,
    })
}

/// Class id owning position `t` (0-based) of a transcript's ordering sequence.
pub fn position_to_action(t: usize, transcript: &Transcript, tau_p: usize) -> Result<usize> {
    let gamma = transcript.len() * tau_p;
    if t >= gamma {
        return Err(DpDtwError::IndexOutOfRange { index: t + 1, max: gamma });
    }
    Ok(transcript.entries[t / tau_p])
}

/// Medoid initialization: for each class, pick the member minimizing its
/// summed DTW discrepancy to all other members, then resample it to `tau_p`.
pub fn init_medoid_prototypes(
    train: &[(Sequence, usize)],
    tau_p: usize,
    num_classes: usize,
) -> Result<PrototypeSet> {
    let mut prototypes = Vec::with_capacity(num_classes);
    for class_id in 1..=num_classes {
        let members: Vec<&Sequence> = train
            .iter()
            .filter(|(_, y)| *y == class_id)
            .map(|(s, _)| s)
            .collect();
        if members.is_empty() {
            return Err(DpDtwError::EmptyClass { class: class_id });
        }
        let medoid = medoid_index(&members)?;
        let data = resample_matrix(&members[medoid].data().to_owned(), tau_p);
        prototypes.push(Prototype { class_id, data });
    }
    PrototypeSet::new(prototypes)
}

/// Index of the member minimizing summed DTW discrepancy to all others.
/// Ties break to the first such member, so the result is deterministic
/// given input order.
pub fn medoid_index(members: &[&Sequence]) -> Result<usize> {
    if members.is_empty() {
        return Err(DpDtwError::EmptyCollection);
    }
    if members.len() == 1 {
        return Ok(0);
    }
    let n = members.len();
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dtw(members[i], members[j], BandConstraint::None)?.discrepancy;
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    let mut best = 0;
    let mut best_sum = f64::INFINITY;
    for (i, row) in dist.iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if sum < best_sum {
            best_sum = sum;
            best = i;
        }
    }
    Ok(best)
}

/// DTW barycenter averaging. Each iteration aligns every sequence to the
/// current barycenter and moves each barycenter step toward the geometric
/// median of the input points aligned to it (the per-step minimizer of the
/// summed aligned L2 distances, so the total within-class discrepancy is
/// non-increasing). Stops after `max_iters` or when the maximum absolute
/// change falls below `tol`.
pub fn dba(
    sequences: &[&Sequence],
    init: &Prototype,
    max_iters: usize,
    tol: f64,
) -> Result<Prototype> {
    if sequences.is_empty() {
        return Err(DpDtwError::EmptyCollection);
    }
    let m = init.data.nrows();
    let tau_p = init.data.ncols();
    let mut center = init.data.clone();
    for _ in 0..max_iters {
        let center_seq = Sequence::new("dba-center", center.clone())?;
        let mut aligned: Vec<Vec<Vec<f64>>> = vec![Vec::new(); tau_p];
        for s in sequences {
            let result = dtw(&center_seq, s, BandConstraint::None)?;
            for &(tc, ts) in &result.alignment.pairs {
                aligned[tc].push(s.frame(ts).to_vec());
            }
        }
        let mut next = center.clone();
        for t in 0..tau_p {
            if aligned[t].is_empty() {
                continue;
            }
            let current: Vec<f64> = (0..m).map(|d| center[[d, t]]).collect();
            let candidate = geometric_median(&aligned[t], &current);
            for d in 0..m {
                next[[d, t]] = candidate[d];
            }
        }
        let change = next
            .iter()
            .zip(center.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        center = next;
        if change < tol {
            break;
        }
    }
    Ok(Prototype { class_id: init.class_id, data: center })
}

fn summed_distance(points: &[Vec<f64>], c: &[f64]) -> f64 {
    points
        .iter()
        .map(|p| {
            p.iter()
                .zip(c)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

/// Weiszfeld iteration started at the mean, guarded so the result never has
/// a larger summed L2 distance to `points` than `current`.
fn geometric_median(points: &[Vec<f64>], current: &[f64]) -> Vec<f64> {
    let m = current.len();
    let n = points.len() as f64;
    let mut estimate: Vec<f64> = (0..m)
        .map(|d| points.iter().map(|p| p[d]).sum::<f64>() / n)
        .collect();
    for _ in 0..64 {
        let mut weight_sum = 0.0;
        let mut weighted = vec![0.0; m];
        let mut at_point = false;
        for p in points {
            let dist = p
                .iter()
                .zip(&estimate)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist < 1e-12 {
                at_point = true;
                break;
            }
            let w = 1.0 / dist;
            weight_sum += w;
            for d in 0..m {
                weighted[d] += w * p[d];
            }
        }
        if at_point {
            break;
        }
        let next: Vec<f64> = weighted.iter().map(|v| v / weight_sum).collect();
        let shift: f64 = next
            .iter()
            .zip(&estimate)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        estimate = next;
        if shift < 1e-10 {
            break;
        }
    }
    if summed_distance(points, &estimate) <= summed_distance(points, current) {
        estimate
    } else {
        current.to_vec()
    }
}

/// Default DBA stopping parameters.
pub const DBA_MAX_ITERS: usize = 10;
pub const DBA_TOL: f64 = 1e-6;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

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
    fn temp_cat_single_entry_is_prototype() {
        let ps = protoset_1d(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let t = Transcript::new(vec![2]).unwrap();
        let o = temp_cat(&t, &ps).unwrap();
        assert_eq!(o.gamma(), 2);
        assert_eq!(o.sequence.data(), ps.get(2).unwrap().data.view());
    }

    #[test]
    fn temp_cat_concatenates_in_order() {
        let ps = protoset_1d(&[&[10.0, 11.0], &[20.0, 21.0]]);
        let t = Transcript::new(vec![1, 2]).unwrap();
        let o = temp_cat(&t, &ps).unwrap();
        let vals: Vec<f64> = o.sequence.data().iter().cloned().collect();
        assert_eq!(vals, vec![10.0, 11.0, 20.0, 21.0]);
    }

    #[test]
    fn temp_cat_gamma_law() {
        let ps = protoset_1d(&[&[0.0; 8], &[1.0; 8]]);
        let t = Transcript::new(vec![1, 2, 1]).unwrap();
        assert_eq!(temp_cat(&t, &ps).unwrap().gamma(), 24);
    }

    #[test]
    fn temp_cat_unknown_class() {
        let ps = protoset_1d(&[&[0.0]]);
        let t = Transcript::new(vec![2]).unwrap();
        assert!(matches!(temp_cat(&t, &ps), Err(DpDtwError::UnknownClass { .. })));
    }

    #[test]
    fn position_to_action_boundaries() {
        let t = Transcript::new(vec![7, 3]).unwrap();
        // tau_p = 4: positions 0..3 -> 7, positions 4..7 -> 3
        assert_eq!(position_to_action(0, &t, 4).unwrap(), 7);
        assert_eq!(position_to_action(3, &t, 4).unwrap(), 7);
        assert_eq!(position_to_action(4, &t, 4).unwrap(), 3);
        assert!(position_to_action(8, &t, 4).is_err());
    }

    #[test]
    fn medoid_single_member() {
        let train = vec![(seq(&[1.0, 2.0, 3.0]), 1)];
        let ps = init_medoid_prototypes(&train, 3, 1).unwrap();
        assert_eq!(ps.get(1).unwrap().data.row(0).to_vec(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn medoid_majority_identical() {
        let train = vec![
            (seq(&[0.0, 0.0]), 1),
            (seq(&[0.0, 0.0]), 1),
            (seq(&[9.0, 9.0]), 1),
        ];
        let ps = init_medoid_prototypes(&train, 2, 1).unwrap();
        assert_eq!(ps.get(1).unwrap().data.row(0).to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn medoid_empty_class_named() {
        let train = vec![(seq(&[0.0]), 1)];
        match init_medoid_prototypes(&train, 1, 2) {
            Err(DpDtwError::EmptyClass { class }) => assert_eq!(class, 2),
            other => panic!("expected EmptyClass, got {other:?}"),
        }
    }

    #[test]
    fn medoid_matches_exhaustive_pairwise_sum() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..3 {
            let members: Vec<Sequence> = (0..5)
                .map(|i| {
                    let vals: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
                    Sequence::univariate(format!("m{i}"), &vals).unwrap()
                })
                .collect();
            let refs: Vec<&Sequence> = members.iter().collect();
            let got = medoid_index(&refs).unwrap();
            // independent exhaustive recomputation
            let mut best = 0;
            let mut best_sum = f64::INFINITY;
            for i in 0..refs.len() {
                let sum: f64 = refs
                    .iter()
                    .map(|s| dtw(refs[i], s, BandConstraint::None).unwrap().discrepancy)
                    .sum();
                if sum < best_sum {
                    best_sum = sum;
                    best = i;
                }
            }
            assert_eq!(got, best);
        }
    }

    #[test]
    fn dba_fixed_point_on_single_sequence() {
        let s = seq(&[1.0, 2.0, 3.0]);
        let init = Prototype {
            class_id: 1,
            data: s.data().to_owned(),
        };
        let out = dba(&[&s], &init, 10, 1e-9).unwrap();
        assert_eq!(out.data, init.data);
    }

    #[test]
    fn dba_identical_pair_zero_discrepancy() {
        let s1 = seq(&[0.5, -0.5, 1.0]);
        let s2 = s1.clone();
        let init = Prototype { class_id: 1, data: s1.data().to_owned() };
        let out = dba(&[&s1, &s2], &init, 10, 1e-9).unwrap();
        let c = Sequence::new("c", out.data.clone()).unwrap();
        assert_eq!(dtw(&c, &s1, BandConstraint::None).unwrap().discrepancy, 0.0);
    }

    #[test]
    fn dba_objective_non_increasing() {
        let seqs = [
            seq(&[0.0, 1.0, 2.0, 1.0]),
            seq(&[0.0, 2.0, 2.0, 0.0]),
            seq(&[1.0, 1.0, 3.0, 1.0]),
        ];
        let refs: Vec<&Sequence> = seqs.iter().collect();
        let init = Prototype { class_id: 1, data: seqs[0].data().to_owned() };
        let objective = |p: &Prototype| -> f64 {
            let c = Sequence::new("c", p.data.clone()).unwrap();
            refs.iter()
                .map(|s| dtw(&c, s, BandConstraint::None).unwrap().discrepancy)
                .sum()
        };
        let mut prev = objective(&init);
        let mut current = init;
        for _ in 0..6 {
            current = dba(&refs, &current, 1, 0.0).unwrap();
            let obj = objective(&current);
            assert!(obj <= prev + 1e-9, "DBA objective increased: {prev} -> {obj}");
            prev = obj;
        }
    }

    proptest! {
        #[test]
        fn temp_cat_length_and_roundtrip(
            entries in proptest::collection::vec(1usize..=3, 1..=5),
            tau_p in 1usize..=4,
        ) {
            let protos: Vec<Vec<f64>> = (0..3)
                .map(|k| (0..tau_p).map(|t| (k * 10 + t) as f64).collect())
                .collect();
            let ps = protoset_1d(&protos.iter().map(|p| p.as_slice()).collect::<Vec<_>>());
            let transcript = Transcript::new(entries.clone()).unwrap();
            let o = temp_cat(&transcript, &ps).unwrap();
            prop_assert_eq!(o.gamma(), entries.len() * tau_p);
            for t in 0..o.gamma() {
                let action = position_to_action(t, &transcript, tau_p).unwrap();
                let proto = ps.get(action).unwrap();
                let within = t % tau_p;
                prop_assert_eq!(o.sequence.frame(t)[0], proto.data[[0, within]]);
            }
        }
    }
}
