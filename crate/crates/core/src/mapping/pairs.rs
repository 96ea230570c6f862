use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::ReducedTensor;

/// Relative tolerance for treating two Hamiltonians as proportional.
pub const PROPORTIONALITY_TOL: f64 = 1e-12;

/// State dimension: the lifted dimension rounded up to a power of two.
pub fn padded_dim(grouped_dim: usize) -> usize {
    grouped_dim.max(1).next_power_of_two()
}

/// One observable and its sub-Hamiltonian.
///
/// `label` lists the `(nu, eta)` slices that were folded into this pair
/// (more than one only after merging).
#[derive(Debug, Clone, PartialEq)]
pub struct OHPair {
    pub observable: DMatrix<f64>,
    pub hamiltonian: DMatrix<Complex64>,
    pub label: Vec<(usize, usize)>,
}

impl OHPair {
    /// Validates symmetry of `O`, Hermiticity and pure-imaginary `H`.
    pub fn new(
        observable: DMatrix<f64>,
        hamiltonian: DMatrix<Complex64>,
        label: Vec<(usize, usize)>,
    ) -> Result<Self, String> {
        let n = observable.nrows();
        if observable.ncols() != n || hamiltonian.nrows() != n || hamiltonian.ncols() != n {
            return Err("observable and Hamiltonian must be square of equal size".into());
        }
        if observable != observable.transpose() {
            return Err("observable is not symmetric".into());
        }
        for i in 0..n {
            for j in 0..n {
                let h = hamiltonian[(i, j)];
                if h.re != 0.0 {
                    return Err(format!("Hamiltonian entry ({i}, {j}) has a real part"));
                }
                if h != hamiltonian[(j, i)].conj() {
                    return Err("Hamiltonian is not Hermitian".into());
                }
            }
        }
        Ok(Self {
            observable,
            hamiltonian,
            label,
        })
    }

    pub fn dim(&self) -> usize {
        self.observable.nrows()
    }

    /// The real antisymmetric generator `-i H`.
    pub fn generator(&self) -> DMatrix<f64> {
        self.hamiltonian.map(|h| h.im)
    }
}

/// `(alpha, beta, value)` of one reduced-tensor entry.
type Entry = (usize, usize, f64);

/// One pair per nonzero `(nu, eta)` slice, `eta >= nu`:
/// `O = (e_nu e_eta^T + e_eta e_nu^T) / 2`, `H[a, b] = i M[a, b, nu, eta]`.
pub fn extract_oh_pairs(m: &ReducedTensor) -> Vec<OHPair> {
    let dim = padded_dim(m.grouped_dim());
    let mut slices: BTreeMap<(usize, usize), Vec<Entry>> = BTreeMap::new();
    for (idx, v) in m.tensor().iter() {
        let (nu, eta) = (idx[2].min(idx[3]), idx[2].max(idx[3]));
        slices.entry((nu, eta)).or_default().push((idx[0], idx[1], v));
    }
    slices
        .into_iter()
        .map(|((nu, eta), entries)| {
            let mut o = DMatrix::zeros(dim, dim);
            o[(nu, eta)] += 0.5;
            o[(eta, nu)] += 0.5;
            let mut h = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
            for (a, b, v) in entries {
                h[(a, b)] += Complex64::new(0.0, v);
            }
            OHPair {
                observable: o,
                hamiltonian: h,
                label: vec![(nu, eta)],
            }
        })
        .collect()
}

/// Merges pairs whose Hamiltonians are scalar multiples of an earlier one.
///
/// With `H_b = s H_a`, the pair `(O_b, H_b)` folds into `(O_a + s O_b, H_a)`;
/// the first pair of each group keeps its Hamiltonian unscaled.
pub fn merge_proportional_pairs(pairs: &[OHPair]) -> Vec<OHPair> {
    let mut out: Vec<OHPair> = Vec::new();
    'next: for p in pairs {
        for q in out.iter_mut() {
            if let Some(s) = proportionality(&q.hamiltonian, &p.hamiltonian) {
                q.observable += &p.observable * s;
                q.label.extend_from_slice(&p.label);
                continue 'next;
            }
        }
        out.push(p.clone());
    }
    out
}

/// Returns `s` with `b = s a`, if one exists within tolerance.
fn proportionality(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Option<f64> {
    if a.shape() != b.shape() {
        return None;
    }
    let (pivot, amax) = a
        .iter()
        .enumerate()
        .fold((0, 0.0), |best, (k, v)| if v.norm() > best.1 { (k, v.norm()) } else { best });
    if amax == 0.0 {
        return None;
    }
    let s = b[pivot].im / a[pivot].im;
    if s == 0.0 {
        return None;
    }
    let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let resid = a
        .iter()
        .zip(b.iter())
        .fold(0.0f64, |m, (x, y)| m.max((y - x * s).norm()));
    (resid <= PROPORTIONALITY_TOL * bmax).then_some(s)
}

/// `-i (sum_k <y|O_k|y> H_k) y` for a real vector `y`.
pub fn oh_dynamics(pairs: &[OHPair], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let yv = nalgebra::DVector::from_column_slice(y);
    let mut out = nalgebra::DVector::zeros(n);
    for p in pairs {
        let w = yv.dot(&(&p.observable * &yv));
        out += p.generator() * &yv * w;
    }
    out.iter().copied().collect()
}
