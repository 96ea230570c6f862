//! Maps a homogeneous tensor system onto observable–Hamiltonian pairs.
//!
//! The stages run in order:
//!
//! 1. [`norm_preserve`]: `F(x) = |x|^2 G(x) - (x . G(x)) x`, degree `q + 2`.
//! 2. [`antisymmetrize`]: an equivalent tensor antisymmetric in its first
//!    two indices, so each Hamiltonian slice is `i` times a real
//!    antisymmetric matrix.
//! 3. [`reduce_degree`]: lifts to `y_a = prod x_{a_i}` with groups of
//!    `(q + 1) / 2` indices, giving a cubic system `dy/dt' = M y^3`.
//! 4. [`extract_oh_pairs`]: one `(O, H)` pair per `(nu, eta)` slice of `M`.

mod pairs;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::poly::{
    contract_tensor, default_target_degree, to_tensor, HomogenizationRecord, PolyError,
    PolynomialSystem, SparseTensor,
};

pub use pairs::{
    extract_oh_pairs, merge_proportional_pairs, oh_dynamics, padded_dim, OHPair,
    PROPORTIONALITY_TOL,
};

/// Per-class tolerance on the norm-preservation constraint.
pub const NORM_PRESERVATION_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum MappingError {
    #[error("homogenization: {0}")]
    Homogenize(PolyError),
    #[error("tensor form: {0}")]
    Tensor(PolyError),
    #[error(
        "antisymmetrization: tensor is not norm-preserving; class {class:?} sums to {residual:e}"
    )]
    NotNormPreserving { class: Vec<usize>, residual: f64 },
    #[error("malformed tensor: {0}")]
    Malformed(String),
    #[error("degree reduction: source degree {0} is even; homogenize to an odd degree first")]
    EvenDegree(usize),
}

impl MappingError {
    /// Short name of the pipeline stage that failed.
    pub fn stage(&self) -> &'static str {
        match self {
            MappingError::Homogenize(_) => "homogenize",
            MappingError::Tensor(_) => "to_tensor",
            MappingError::NotNormPreserving { .. } => "antisymmetrize",
            MappingError::Malformed(_) => "norm_preserve",
            MappingError::EvenDegree(_) => "reduce_degree",
        }
    }
}

/// Rank-`q+3` tensor of a norm-preserving system.
#[derive(Debug, Clone, PartialEq)]
pub struct NormPreservingTensor {
    tensor: SparseTensor,
    source_degree: usize,
}

impl NormPreservingTensor {
    /// Wraps a tensor after checking `x . F(x) == 0` coefficient by coefficient.
    pub fn new(tensor: SparseTensor) -> Result<Self, MappingError> {
        if tensor.rank() < 3 {
            return Err(MappingError::Malformed(format!(
                "norm-preserving tensors have rank >= 3, got {}",
                tensor.rank()
            )));
        }
        let tensor = tensor.with_sorted_from(1);
        check_norm_preservation(&tensor)?;
        let source_degree = tensor.rank() - 3;
        Ok(Self {
            tensor,
            source_degree,
        })
    }

    pub fn tensor(&self) -> &SparseTensor {
        &self.tensor
    }

    pub fn source_degree(&self) -> usize {
        self.source_degree
    }
}

/// Worst violation of the permutation-sum constraint, as `(class, residual)`.
///
/// Each entry `(j, rest)` contributes its coefficient to the monomial
/// `x_j * prod x[rest]` of `x . F(x)`; a norm-preserving tensor has every
/// such coefficient equal to zero.
pub fn norm_preservation_residual(t: &SparseTensor) -> Option<(Vec<usize>, f64, f64)> {
    let mut classes: BTreeMap<Vec<usize>, (f64, f64)> = BTreeMap::new();
    for (idx, v) in t.iter() {
        let mut class = idx.to_vec();
        class.sort_unstable();
        let slot = classes.entry(class).or_insert((0.0, 0.0));
        slot.0 += v;
        slot.1 = slot.1.max(v.abs());
    }
    classes
        .into_iter()
        .map(|(class, (sum, scale))| (class, sum, scale))
        .max_by(|a, b| {
            (a.1.abs() / a.2.max(1.0)).total_cmp(&(b.1.abs() / b.2.max(1.0)))
        })
}

fn check_norm_preservation(t: &SparseTensor) -> Result<(), MappingError> {
    match norm_preservation_residual(t) {
        Some((class, residual, scale)) if residual.abs() > NORM_PRESERVATION_TOL * scale.max(1.0) => {
            Err(MappingError::NotNormPreserving { class, residual })
        }
        _ => Ok(()),
    }
}

/// Tensor antisymmetric in its first two indices, latter indices canonical.
#[derive(Debug, Clone, PartialEq)]
pub struct AntisymmetricTensor {
    tensor: SparseTensor,
}

impl AntisymmetricTensor {
    /// Wraps a tensor, checking antisymmetry of the first index pair.
    pub fn new(tensor: SparseTensor) -> Result<Self, MappingError> {
        if tensor.rank() < 3 {
            return Err(MappingError::Malformed("antisymmetric tensors have rank >= 3".into()));
        }
        let tensor = tensor.with_sorted_from(2);
        for (idx, v) in tensor.iter() {
            if idx[0] == idx[1] {
                return Err(MappingError::Malformed(format!("diagonal entry {idx:?}")));
            }
            let mut swapped = idx.to_vec();
            swapped.swap(0, 1);
            let w = tensor.get(&swapped);
            if (v + w).abs() > 1e-13 * v.abs().max(1.0) {
                return Err(MappingError::Malformed(format!(
                    "entry {idx:?} = {v} but swapped entry = {w}"
                )));
            }
        }
        Ok(Self { tensor })
    }

    pub fn tensor(&self) -> &SparseTensor {
        &self.tensor
    }

    /// The same dynamics viewed as a plain rank-`q+3` system tensor.
    pub fn dynamics_tensor(&self) -> SparseTensor {
        self.tensor.with_sorted_from(1)
    }
}

/// Rank-4 tensor over grouped indices of `group_size` base indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTensor {
    tensor: SparseTensor,
    group_size: usize,
    base_dim: usize,
}

impl ReducedTensor {
    pub fn tensor(&self) -> &SparseTensor {
        &self.tensor
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    /// Number of lifted variables, `base_dim ^ group_size`.
    pub fn grouped_dim(&self) -> usize {
        self.tensor.dim()
    }

    /// `(M y^3)_a = sum M[a, b, nu, eta] y_b y_nu y_eta`.
    pub fn contract(&self, y: &[f64]) -> Result<Vec<f64>, MappingError> {
        contract_tensor(&self.tensor, y).map_err(MappingError::Tensor)
    }
}

/// Flattens a grouped multi-index, most significant first.
pub fn flatten_group(indices: &[usize], base_dim: usize) -> usize {
    indices.iter().fold(0, |acc, &i| acc * base_dim + i)
}

/// Inverse of [`flatten_group`].
pub fn unflatten_group(mut flat: usize, base_dim: usize, group_size: usize) -> Vec<usize> {
    let mut out = vec![0; group_size];
    for slot in out.iter_mut().rev() {
        *slot = flat % base_dim;
        flat /= base_dim;
    }
    out
}

/// Builds the rank-`q+3` norm-preserving tensor from a rank-`q+1` system tensor.
pub fn norm_preserve(t: &SparseTensor) -> Result<NormPreservingTensor, MappingError> {
    if t.rank() < 1 {
        return Err(MappingError::Malformed("rank-0 tensor".into()));
    }
    let d = t.dim();
    let mut f = SparseTensor::new(t.rank() + 2, d, 1);
    for (idx, v) in t.iter() {
        let j = idx[0];
        let rest = &idx[1..];
        // |x|^2 G(x)
        for k in 0..d {
            let mut e = Vec::with_capacity(rest.len() + 3);
            e.push(j);
            e.extend_from_slice(rest);
            e.extend([k, k]);
            f.add(e, v);
        }
        // -(x . G(x)) x
        for i in 0..d {
            let mut e = Vec::with_capacity(rest.len() + 3);
            e.push(i);
            e.extend_from_slice(rest);
            e.extend([j, i]);
            f.add(e, -v);
        }
    }
    f.prune(1e-15 * t.max_abs());
    NormPreservingTensor::new(f)
}

/// Reads `F` at an arbitrary ordering of its latter indices. Storage keeps
/// each monomial's full coefficient on the sorted ordering, so every other
/// ordering reads zero.
fn lookup(f: &SparseTensor, index: &[usize]) -> f64 {
    if index[1..].windows(2).all(|w| w[0] <= w[1]) {
        f.get(index)
    } else {
        0.0
    }
}

/// Advances `v` to the next lexicographic permutation; false at the last.
fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Antisymmetrizes the first two indices:
/// `A_a = 1/(q+3) * sum_{i>=2} (F[P_2i a] - F[P_1i P_2i a])`.
pub fn antisymmetrize(f: &NormPreservingTensor) -> Result<AntisymmetricTensor, MappingError> {
    let ft = f.tensor();
    check_norm_preservation(ft)?;
    let rank = ft.rank();
    let denom = rank as f64;
    let classes: BTreeSet<Vec<usize>> = ft
        .iter()
        .map(|(idx, _)| {
            let mut c = idx.to_vec();
            c.sort_unstable();
            c
        })
        .collect();

    let mut raw = SparseTensor::new(rank, ft.dim(), 2);
    let mut work = vec![0usize; rank];
    for class in classes {
        let mut alpha = class.clone();
        loop {
            if alpha[0] != alpha[1] {
                let mut sum = 0.0;
                for i in 1..rank {
                    work.copy_from_slice(&alpha);
                    work.swap(1, i);
                    sum += lookup(ft, &work);
                    work.swap(0, i);
                    sum -= lookup(ft, &work);
                }
                if sum != 0.0 {
                    raw.add(alpha.clone(), sum);
                }
            }
            if !next_permutation(&mut alpha) {
                break;
            }
        }
    }
    let mut out = SparseTensor::from_entries(
        rank,
        ft.dim(),
        2,
        raw.iter().map(|(k, v)| (k.to_vec(), v / denom)),
    );
    out.prune(1e-14 * ft.max_abs().max(f64::MIN_POSITIVE));
    AntisymmetricTensor::new(out)
}

/// Lifts to grouped variables:
/// `M[a, b, nu, eta] = sum_i [prod_{j != i} delta(a_j, b_j)] A[a_i, b_i, nu, eta]`.
pub fn reduce_degree(a: &AntisymmetricTensor) -> Result<ReducedTensor, MappingError> {
    let at = a.tensor();
    let rank = at.rank();
    if rank % 2 == 1 {
        return Err(MappingError::EvenDegree(rank - 3));
    }
    let g = (rank - 2) / 2;
    let d = at.dim();
    let dim = d.pow(g as u32);
    let fillers = d.pow(g as u32 - 1);
    let mut m = SparseTensor::new(4, dim, 2);
    for (idx, v) in at.iter() {
        let (ai, bi) = (idx[0], idx[1]);
        let nu = flatten_group(&idx[2..2 + g], d);
        let eta = flatten_group(&idx[2 + g..], d);
        for i in 0..g {
            for filler in 0..fillers {
                let fill = unflatten_group(filler, d, g - 1);
                let mut alpha = fill.clone();
                alpha.insert(i, ai);
                let mut beta = fill;
                beta.insert(i, bi);
                m.add(
                    vec![flatten_group(&alpha, d), flatten_group(&beta, d), nu, eta],
                    v,
                );
            }
        }
    }
    Ok(ReducedTensor {
        tensor: m,
        group_size: g,
        base_dim: d,
    })
}

/// `d/dt' y_a = sum_i (prod_{j != i} x_{a_j}) (A x^{q+2})_{a_i}` for `y = x^{(g)}`.
pub fn product_rule_lift(
    a: &AntisymmetricTensor,
    x: &[f64],
    group_size: usize,
) -> Result<Vec<f64>, MappingError> {
    let dx = contract_tensor(a.tensor(), x).map_err(MappingError::Tensor)?;
    let d = x.len();
    let dim = d.pow(group_size as u32);
    Ok((0..dim)
        .map(|flat| {
            let alpha = unflatten_group(flat, d, group_size);
            (0..group_size)
                .map(|i| {
                    alpha
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .fold(dx[alpha[i]], |acc, (_, &k)| acc * x[k])
                })
                .sum()
        })
        .collect())
}

/// `x^{(g)}`: the `g`-fold tensor power of `x`, flattened.
pub fn tensor_power(x: &[f64], group_size: usize) -> Vec<f64> {
    let mut y = vec![1.0];
    for _ in 0..group_size {
        y = y
            .iter()
            .flat_map(|&a| x.iter().map(move |&b| a * b))
            .collect();
    }
    y
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapOptions {
    pub c: f64,
    /// Homogeneous target degree; defaults to the smallest odd degree that fits.
    pub degree: Option<usize>,
    pub merge_pairs: bool,
}

impl Default for MapOptions {
    fn default() -> Self {
        Self {
            c: 1.0,
            degree: None,
            merge_pairs: false,
        }
    }
}

/// Every intermediate of the mapping pipeline.
#[derive(Debug, Clone)]
pub struct MappedSystem {
    pub homogenized: PolynomialSystem,
    pub record: HomogenizationRecord,
    pub system_tensor: SparseTensor,
    pub norm_preserving: NormPreservingTensor,
    pub antisymmetric: AntisymmetricTensor,
    pub reduced: ReducedTensor,
    pub raw_pairs: Vec<OHPair>,
    pub pairs: Vec<OHPair>,
}

impl MappedSystem {
    /// Homogeneous degree `q` before norm preservation.
    pub fn source_degree(&self) -> usize {
        self.record.target_degree
    }

    pub fn state_dim(&self) -> usize {
        padded_dim(self.reduced.grouped_dim())
    }

    pub fn qubits(&self) -> usize {
        self.state_dim().trailing_zeros() as usize
    }
}

/// Runs homogenization and all four mapping stages.
pub fn map_system(sys: &PolynomialSystem, opts: &MapOptions) -> Result<MappedSystem, MappingError> {
    let degree = opts.degree.unwrap_or_else(|| default_target_degree(sys));
    let (homogenized, record) = sys
        .homogenize(opts.c, degree)
        .map_err(MappingError::Homogenize)?;
    let mut system_tensor = to_tensor(&homogenized).map_err(MappingError::Tensor)?;
    if system_tensor.rank() != degree + 1 {
        // all-zero dynamics: no monomial fixes the degree
        system_tensor = SparseTensor::new(degree + 1, homogenized.n_vars(), 1);
    }
    let norm_preserving = norm_preserve(&system_tensor)?;
    let antisymmetric = antisymmetrize(&norm_preserving)?;
    let reduced = reduce_degree(&antisymmetric)?;
    let raw_pairs = extract_oh_pairs(&reduced);
    let pairs = if opts.merge_pairs {
        merge_proportional_pairs(&raw_pairs)
    } else {
        raw_pairs.clone()
    };
    Ok(MappedSystem {
        homogenized,
        record,
        system_tensor,
        norm_preserving,
        antisymmetric,
        reduced,
        raw_pairs,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_system;

    #[test]
    fn logistic_norm_preserving_tensor() {
        let sys = parse_system("dx1/dt = x1 - x1^2").unwrap();
        let (h, _) = sys.homogenize(1.0, 3).unwrap();
        let f = norm_preserve(&to_tensor(&h).unwrap()).unwrap();
        let t = f.tensor();
        assert_eq!(t.rank(), 6);
        assert_eq!(t.nnz(), 4);
        assert_eq!(t.get(&[0, 0, 0, 0, 1, 1]), -1.0);
        assert_eq!(t.get(&[0, 0, 0, 1, 1, 1]), 1.0);
        assert_eq!(t.get(&[1, 0, 0, 0, 0, 1]), 1.0);
        assert_eq!(t.get(&[1, 0, 0, 0, 1, 1]), -1.0);
    }

    #[test]
    fn linear_growth_on_the_circle() {
        let lambda = 0.7;
        let sys = parse_system(&format!("dx1/dt = {lambda}*x1")).unwrap();
        let (h, _) = sys.homogenize(1.0, 1).unwrap();
        let f = norm_preserve(&to_tensor(&h).unwrap()).unwrap();
        for k in 0..20 {
            let th = 0.3 * k as f64;
            let x = [th.cos(), th.sin()];
            let dx = contract_tensor(f.tensor(), &x).unwrap();
            assert!((dx[0] + lambda * x[0] * x[1] * x[1]).abs() < 1e-15);
            assert!((dx[1] - lambda * x[0] * x[0] * x[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_tensor_that_is_not_norm_preserving() {
        let t = SparseTensor::from_entries(3, 3, 1, [(vec![0, 1, 2], 1.0)]);
        match NormPreservingTensor::new(t) {
            Err(MappingError::NotNormPreserving { class, residual }) => {
                assert_eq!(class, vec![0, 1, 2]);
                assert_eq!(residual, 1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn antisymmetrization_fixture_entries() {
        // 1-based fixture indices map to 0..3 with index 0 unused.
        let f = SparseTensor::from_entries(
            3,
            4,
            1,
            [(vec![1, 2, 3], 1.0), (vec![2, 1, 3], -0.5), (vec![2, 3, 1], -0.5)],
        );
        let f = NormPreservingTensor::new(f).unwrap();
        let a = antisymmetrize(&f).unwrap();
        let t = a.tensor();
        let third = 1.0 / 3.0;
        let expect = [
            ([1, 2, 3], 2.0 * third),
            ([1, 3, 2], third),
            ([2, 1, 3], -2.0 * third),
            ([2, 3, 1], -third),
            ([3, 1, 2], -third),
            ([3, 2, 1], third),
        ];
        assert_eq!(t.nnz(), 6);
        for (idx, v) in expect {
            assert!((t.get(&idx) - v).abs() <= 1e-15, "{idx:?}");
        }
    }

    #[test]
    fn zero_tensor_passes_through_every_stage() {
        let f = NormPreservingTensor::new(SparseTensor::new(6, 2, 1)).unwrap();
        let a = antisymmetrize(&f).unwrap();
        assert!(a.tensor().is_empty());
        let m = reduce_degree(&a).unwrap();
        assert!(m.tensor().is_empty());
        assert!(extract_oh_pairs(&m).is_empty());
    }

    #[test]
    fn degree_reduction_fixture_entries() {
        // 1-based base variables {1, 2} -> 0-based {0, 1}
        let a = AntisymmetricTensor::new(SparseTensor::from_entries(
            6,
            2,
            2,
            [(vec![0, 1, 0, 0, 0, 0], -1.0), (vec![1, 0, 0, 0, 0, 0], 1.0)],
        ))
        .unwrap();
        let m = reduce_degree(&a).unwrap();
        let g = |a: [usize; 2]| flatten_group(&a, 2);
        let nu = g([0, 0]);
        let mut expect = BTreeMap::new();
        for (al, be) in [([0, 0], [0, 1]), ([0, 0], [1, 0]), ([1, 0], [1, 1]), ([0, 1], [1, 1])] {
            expect.insert(vec![g(al), g(be), nu, nu], -1.0);
            expect.insert(vec![g(be), g(al), nu, nu], 1.0);
        }
        let got: BTreeMap<Vec<usize>, f64> =
            m.tensor().iter().map(|(k, v)| (k.to_vec(), v)).collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn degree_reduction_rejects_even_source_degree() {
        let a = AntisymmetricTensor::new(SparseTensor::new(5, 2, 2)).unwrap();
        assert_eq!(reduce_degree(&a), Err(MappingError::EvenDegree(2)));
    }

    #[test]
    fn logistic_antisymmetric_and_reduced_forms() {
        let sys = parse_system("dx1/dt = x1 - x1^2").unwrap();
        let mapped = map_system(&sys, &MapOptions::default()).unwrap();
        let a = mapped.antisymmetric.tensor();
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.get(&[1, 0, 0, 0, 0, 1]), 1.0);
        assert_eq!(a.get(&[0, 1, 0, 0, 0, 1]), -1.0);
        assert_eq!(a.get(&[0, 1, 0, 0, 1, 1]), 1.0);
        assert_eq!(a.get(&[1, 0, 0, 0, 1, 1]), -1.0);

        let m = mapped.reduced.tensor();
        let g = |a: [usize; 2]| flatten_group(&a, 2);
        let (mu, nu, xi) = (g([0, 0]), g([0, 1]), g([1, 1]));
        for (al, be) in [([1, 0], [0, 0]), ([1, 1], [0, 1]), ([0, 1], [0, 0]), ([1, 1], [1, 0])] {
            assert_eq!(m.get(&[g(al), g(be), mu, nu]), 1.0);
            assert_eq!(m.get(&[g(be), g(al), mu, nu]), -1.0);
            assert_eq!(m.get(&[g(be), g(al), mu, xi]), 1.0);
            assert_eq!(m.get(&[g(al), g(be), mu, xi]), -1.0);
        }
        assert_eq!(m.nnz(), 16);
    }

    #[test]
    fn next_permutation_enumerates_distinct_orderings() {
        let mut v = vec![0, 0, 1, 2];
        let mut n = 1;
        while next_permutation(&mut v) {
            n += 1;
        }
        assert_eq!(n, 12);
    }

    #[test]
    fn grouped_index_flattening_round_trips() {
        for flat in 0..64 {
            assert_eq!(flatten_group(&unflatten_group(flat, 4, 3), 4), flat);
        }
        assert_eq!(flatten_group(&[1, 0], 2), 2);
    }
}
