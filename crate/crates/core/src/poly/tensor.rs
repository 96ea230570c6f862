use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{PolyError, PolynomialSystem};

/// Sparse coefficient tensor keyed by multi-index.
///
/// Indices at positions `>= sorted_from` are interchangeable factors of a
/// monomial; they are kept in non-decreasing order so every monomial has one
/// canonical entry carrying its full coefficient. Writes that cancel an
/// entry to exactly zero remove it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseTensor {
    rank: usize,
    dim: usize,
    sorted_from: usize,
    entries: BTreeMap<Vec<usize>, f64>,
}

impl SparseTensor {
    /// Empty tensor. `sorted_from` is clamped to `rank`.
    pub fn new(rank: usize, dim: usize, sorted_from: usize) -> Self {
        Self {
            rank,
            dim,
            sorted_from: sorted_from.min(rank),
            entries: BTreeMap::new(),
        }
    }

    /// Builds a tensor from explicit entries, canonicalizing each index.
    pub fn from_entries<I>(rank: usize, dim: usize, sorted_from: usize, entries: I) -> Self
    where
        I: IntoIterator<Item = (Vec<usize>, f64)>,
    {
        let mut t = Self::new(rank, dim, sorted_from);
        for (idx, v) in entries {
            t.add(idx, v);
        }
        t
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sorted_from(&self) -> usize {
        self.sorted_from
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.entries.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn canonical(&self, mut index: Vec<usize>) -> Vec<usize> {
        index[self.sorted_from..].sort_unstable();
        index
    }

    /// Accumulates `value` onto the canonical entry for `index`.
    ///
    /// Panics if the index has the wrong length or an out-of-range component.
    pub fn add(&mut self, index: Vec<usize>, value: f64) {
        assert_eq!(index.len(), self.rank, "multi-index length must equal rank");
        assert!(
            index.iter().all(|&i| i < self.dim),
            "multi-index component out of range"
        );
        if value == 0.0 {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.entries.entry(self.canonical(index)) {
            Entry::Occupied(mut slot) => {
                *slot.get_mut() += value;
                if *slot.get() == 0.0 {
                    slot.remove();
                }
            }
            Entry::Vacant(slot) => {
                slot.insert(value);
            }
        }
    }

    /// Value stored at exactly this (canonical) index; other orderings read 0.
    pub fn get(&self, index: &[usize]) -> f64 {
        self.entries.get(index).copied().unwrap_or(0.0)
    }

    /// Drops entries with magnitude at or below `tol`.
    pub fn prune(&mut self, tol: f64) {
        self.entries.retain(|_, v| v.abs() > tol);
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Same entries, re-canonicalized with a different symmetric suffix.
    pub fn with_sorted_from(&self, sorted_from: usize) -> Self {
        Self::from_entries(
            self.rank,
            self.dim,
            sorted_from,
            self.entries.iter().map(|(k, &v)| (k.clone(), v)),
        )
    }
}

/// Converts a homogeneous system into its rank-`q+1` coefficient tensor.
pub fn to_tensor(sys: &PolynomialSystem) -> Result<SparseTensor, PolyError> {
    let q = sys.homogeneous_degree()?.unwrap_or(0);
    let mut t = SparseTensor::new(q + 1, sys.n_vars(), 1);
    for (j, eq) in sys.equations().iter().enumerate() {
        for m in eq {
            let mut index = Vec::with_capacity(q + 1);
            index.push(j);
            for (var, &e) in m.exponents.iter().enumerate() {
                index.extend(std::iter::repeat_n(var, e as usize));
            }
            t.add(index, m.coefficient);
        }
    }
    Ok(t)
}

/// `out_j = sum over entries (j, rest) of coeff * prod x[rest]`.
pub fn contract_tensor(t: &SparseTensor, x: &[f64]) -> Result<Vec<f64>, PolyError> {
    if x.len() != t.dim() {
        return Err(PolyError::DimensionMismatch {
            expected: t.dim(),
            got: x.len(),
        });
    }
    let mut out = vec![0.0; t.dim()];
    for (idx, v) in t.iter() {
        out[idx[0]] += idx[1..].iter().fold(v, |acc, &i| acc * x[i]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{parse_system, Monomial};

    #[test]
    fn single_cubic_monomial() {
        // dx1/dt = 5 x1 x2 x3 -> A[1,1,2,3] = 5 (x0 unused at index 0)
        let sys = PolynomialSystem::new(
            vec![
                vec![],
                vec![Monomial::new(5.0, vec![0, 1, 1, 1])],
                vec![],
                vec![],
            ],
            None,
        )
        .unwrap();
        let t = to_tensor(&sys).unwrap();
        assert_eq!(t.rank(), 4);
        assert_eq!(t.nnz(), 1);
        assert_eq!(t.get(&[1, 1, 2, 3]), 5.0);
        let dx = contract_tensor(&t, &[7.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(dx, vec![0.0, 120.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_equation_gives_empty_tensor() {
        let sys = parse_system("dx1/dt = 0").unwrap();
        assert!(to_tensor(&sys).unwrap().is_empty());
    }

    #[test]
    fn logistic_contraction_at_initial_condition() {
        let sys = parse_system("dx1/dt = x1 - x1^2").unwrap();
        let (h, _) = sys.homogenize(1.0, 3).unwrap();
        let t = to_tensor(&h).unwrap();
        let dx = contract_tensor(&t, &[1.0, 0.01]).unwrap();
        assert_eq!(dx[0], 0.0);
        assert!((dx[1] - 0.0099).abs() < 1e-16);
    }

    #[test]
    fn zero_vector_contracts_to_zero() {
        let sys = parse_system("dx1/dt = x1 - x1^2\ndx2/dt = 3*x1*x2").unwrap();
        let (h, _) = sys.homogenize(1.0, 3).unwrap();
        let t = to_tensor(&h).unwrap();
        assert_eq!(contract_tensor(&t, &[0.0; 3]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn rejects_non_homogeneous_and_bad_dims() {
        let sys = parse_system("dx1/dt = x1 - x1^2").unwrap();
        assert!(matches!(to_tensor(&sys), Err(PolyError::NotHomogeneous(1, 2))));
        let t = SparseTensor::new(2, 3, 1);
        assert!(contract_tensor(&t, &[1.0]).is_err());
    }

    #[test]
    fn canonical_storage_merges_orderings() {
        let t = SparseTensor::from_entries(
            3,
            3,
            1,
            [(vec![1, 0, 2], 1.0), (vec![1, 2, 0], 0.5), (vec![2, 1, 1], 3.0)],
        );
        assert_eq!(t.nnz(), 2);
        assert_eq!(t.get(&[1, 0, 2]), 1.5);
        assert_eq!(t.get(&[1, 2, 0]), 0.0);
    }

    #[test]
    fn cancelling_write_removes_entry() {
        let mut t = SparseTensor::new(2, 2, 1);
        t.add(vec![0, 1], 2.0);
        t.add(vec![0, 1], -2.0);
        assert!(t.is_empty());
    }
}
