//! Symbolic polynomial ODE systems `dx/dt = G(x)`.
//!
//! A [`PolynomialSystem`] holds one list of [`Monomial`] terms per variable.
//! Systems can be homogenized with a constant coordinate `x0 = c`, converted
//! into coefficient tensors ([`SparseTensor`]) and evaluated directly.

mod parse;
mod tensor;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::{parse_system, ParseError};
pub use tensor::{contract_tensor, to_tensor, SparseTensor};

/// Format tag written into the structured serialization.
pub const SYSTEM_FORMAT: &str = "qnlode-system/1";

#[derive(Debug, Error, PartialEq)]
pub enum PolyError {
    #[error("target degree {0} is even; degree reduction requires an odd degree")]
    EvenDegree(usize),
    #[error("target degree {target} is below the maximum monomial degree {max}")]
    DegreeTooLow { target: usize, max: usize },
    #[error("homogenizing constant must be positive and finite, got {0}")]
    BadConstant(f64),
    #[error("system is not homogeneous: found degrees {0} and {1}")]
    NotHomogeneous(usize, usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid system: {0}")]
    Invalid(String),
}

/// A single term `coefficient * prod_i x_i^exponents[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coefficient: f64,
    pub exponents: Vec<u32>,
}

impl Monomial {
    pub fn new(coefficient: f64, exponents: Vec<u32>) -> Self {
        Self {
            coefficient,
            exponents,
        }
    }

    pub fn degree(&self) -> usize {
        self.exponents.iter().map(|&e| e as usize).sum()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(x)
            .fold(self.coefficient, |acc, (&e, &xi)| acc * xi.powi(e as i32))
    }
}

/// Real polynomial system, one equation per variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialSystem {
    n_vars: usize,
    equations: Vec<Vec<Monomial>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    var_names: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct SystemDocument {
    format: String,
    #[serde(flatten)]
    system: PolynomialSystem,
}

/// Bookkeeping for a homogenized system; `x0 = c` sits at index 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogenizationRecord {
    pub c: f64,
    pub original_n_vars: usize,
    pub target_degree: usize,
}

impl PolynomialSystem {
    /// Builds a system, validating exponent lengths and coefficients.
    /// Like terms are collected and zero terms dropped.
    pub fn new(
        equations: Vec<Vec<Monomial>>,
        var_names: Option<Vec<String>>,
    ) -> Result<Self, PolyError> {
        let n_vars = equations.len();
        if let Some(names) = &var_names {
            if names.len() != n_vars {
                return Err(PolyError::Invalid(format!(
                    "{} variable names for {} equations",
                    names.len(),
                    n_vars
                )));
            }
        }
        let mut collected = Vec::with_capacity(n_vars);
        for (k, eq) in equations.into_iter().enumerate() {
            let mut terms: Vec<Monomial> = Vec::with_capacity(eq.len());
            for m in eq {
                if m.exponents.len() != n_vars {
                    return Err(PolyError::Invalid(format!(
                        "equation {}: exponent vector of length {} in a {}-variable system",
                        k + 1,
                        m.exponents.len(),
                        n_vars
                    )));
                }
                if !m.coefficient.is_finite() {
                    return Err(PolyError::Invalid(format!(
                        "equation {}: non-finite coefficient {}",
                        k + 1,
                        m.coefficient
                    )));
                }
                match terms.iter_mut().find(|t| t.exponents == m.exponents) {
                    Some(t) => t.coefficient += m.coefficient,
                    None => terms.push(m),
                }
            }
            terms.retain(|t| t.coefficient != 0.0);
            collected.push(terms);
        }
        Ok(Self {
            n_vars,
            equations: collected,
            var_names,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn equations(&self) -> &[Vec<Monomial>] {
        &self.equations
    }

    pub fn var_names(&self) -> Option<&[String]> {
        self.var_names.as_deref()
    }

    pub fn monomial_count(&self) -> usize {
        self.equations.iter().map(Vec::len).sum()
    }

    pub fn max_degree(&self) -> usize {
        self.equations
            .iter()
            .flatten()
            .map(Monomial::degree)
            .max()
            .unwrap_or(0)
    }

    /// Returns the common degree of all monomials, or `None` for an empty system.
    pub fn homogeneous_degree(&self) -> Result<Option<usize>, PolyError> {
        let mut degree = None;
        for m in self.equations.iter().flatten() {
            let d = m.degree();
            match degree {
                None => degree = Some(d),
                Some(prev) if prev != d => return Err(PolyError::NotHomogeneous(prev, d)),
                _ => {}
            }
        }
        Ok(degree)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>, PolyError> {
        if x.len() != self.n_vars {
            return Err(PolyError::DimensionMismatch {
                expected: self.n_vars,
                got: x.len(),
            });
        }
        Ok(self
            .equations
            .iter()
            .map(|eq| eq.iter().map(|m| m.evaluate(x)).sum())
            .collect())
    }

    /// Name used for variable `i` (1-based `x<k>` unless labels were given).
    pub fn var_name(&self, i: usize) -> String {
        match &self.var_names {
            Some(names) => names[i].clone(),
            None => format!("x{}", i + 1),
        }
    }

    /// Prepends `x0 = c` and pads every monomial with `x0` factors up to
    /// `target_degree`, dividing coefficients by the matching power of `c`.
    /// The `x0` equation is empty.
    pub fn homogenize(
        &self,
        c: f64,
        target_degree: usize,
    ) -> Result<(PolynomialSystem, HomogenizationRecord), PolyError> {
        if !(c.is_finite() && c > 0.0) {
            return Err(PolyError::BadConstant(c));
        }
        if target_degree.is_multiple_of(2) {
            return Err(PolyError::EvenDegree(target_degree));
        }
        let max = self.max_degree();
        if target_degree < max {
            return Err(PolyError::DegreeTooLow {
                target: target_degree,
                max,
            });
        }
        let mut equations = Vec::with_capacity(self.n_vars + 1);
        equations.push(Vec::new());
        for eq in &self.equations {
            equations.push(
                eq.iter()
                    .map(|m| {
                        let pad = (target_degree - m.degree()) as i32;
                        let mut exponents = Vec::with_capacity(self.n_vars + 1);
                        exponents.push(pad as u32);
                        exponents.extend_from_slice(&m.exponents);
                        Monomial::new(m.coefficient / c.powi(pad), exponents)
                    })
                    .collect(),
            );
        }
        let names = std::iter::once("x0".to_string())
            .chain((0..self.n_vars).map(|i| self.var_name(i)))
            .collect();
        let sys = PolynomialSystem {
            n_vars: self.n_vars + 1,
            equations,
            var_names: Some(names),
        };
        let record = HomogenizationRecord {
            c,
            original_n_vars: self.n_vars,
            target_degree,
        };
        Ok((sys, record))
    }

    /// Canonical structured serialization (JSON).
    pub fn to_json(&self) -> String {
        let doc = SystemDocument {
            format: SYSTEM_FORMAT.to_string(),
            system: self.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("system serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PolyError> {
        let doc: SystemDocument =
            serde_json::from_str(text).map_err(|e| PolyError::Invalid(e.to_string()))?;
        if doc.format != SYSTEM_FORMAT {
            return Err(PolyError::Invalid(format!(
                "unsupported format tag {:?}",
                doc.format
            )));
        }
        if doc.system.n_vars != doc.system.equations.len() {
            return Err(PolyError::Invalid(format!(
                "n_vars = {} but {} equations",
                doc.system.n_vars,
                doc.system.equations.len()
            )));
        }
        Self::new(doc.system.equations, doc.system.var_names)
    }

    /// Text form, one `dx<k>/dt = ...` line per equation.
    ///
    /// Variables are always written with their positional `x<k>` names so
    /// the output parses back to the same system.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, eq) in self.equations.iter().enumerate() {
            out.push_str(&format!("dx{}/dt = ", k + 1));
            if eq.is_empty() {
                out.push('0');
            }
            for (n, m) in eq.iter().enumerate() {
                let mag = m.coefficient.abs();
                if n == 0 {
                    if m.coefficient < 0.0 {
                        out.push('-');
                    }
                } else {
                    out.push_str(if m.coefficient < 0.0 { " - " } else { " + " });
                }
                let factors: Vec<String> = m
                    .exponents
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(i, &e)| match e {
                        1 => format!("x{}", i + 1),
                        _ => format!("x{}^{}", i + 1, e),
                    })
                    .collect();
                if factors.is_empty() {
                    out.push_str(&format!("{:?}", mag));
                } else if mag == 1.0 {
                    out.push_str(&factors.join("*"));
                } else {
                    out.push_str(&format!("{:?}*{}", mag, factors.join("*")));
                }
            }
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the canonical serialization.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

/// Smallest odd degree that is at least the system's maximum degree.
pub fn default_target_degree(sys: &PolynomialSystem) -> usize {
    let max = sys.max_degree().max(1);
    if max.is_multiple_of(2) {
        max + 1
    } else {
        max
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logistic() -> PolynomialSystem {
        PolynomialSystem::new(
            vec![vec![Monomial::new(1.0, vec![1]), Monomial::new(-1.0, vec![2])]],
            None,
        )
        .unwrap()
    }

    #[test]
    fn homogenized_logistic_matches_hand_form() {
        let (h, rec) = logistic().homogenize(1.0, 3).unwrap();
        assert_eq!(h.n_vars(), 2);
        assert!(h.equations()[0].is_empty());
        assert_eq!(
            h.equations()[1],
            vec![Monomial::new(1.0, vec![2, 1]), Monomial::new(-1.0, vec![1, 2])]
        );
        assert_eq!(rec.target_degree, 3);
        assert_eq!(rec.original_n_vars, 1);
        assert_eq!(h.homogeneous_degree().unwrap(), Some(3));
    }

    #[test]
    fn homogenize_rejects_bad_arguments() {
        let sys = logistic();
        assert_eq!(sys.homogenize(1.0, 4), Err(PolyError::EvenDegree(4)));
        assert_eq!(
            sys.homogenize(1.0, 1),
            Err(PolyError::DegreeTooLow { target: 1, max: 2 })
        );
        assert_eq!(sys.homogenize(0.0, 3), Err(PolyError::BadConstant(0.0)));
        assert_eq!(sys.homogenize(-2.0, 3), Err(PolyError::BadConstant(-2.0)));
    }

    #[test]
    fn homogeneous_odd_system_only_gains_x0() {
        let sys = PolynomialSystem::new(
            vec![
                vec![Monomial::new(2.0, vec![0, 3])],
                vec![Monomial::new(-1.0, vec![1, 2])],
            ],
            None,
        )
        .unwrap();
        let (h, _) = sys.homogenize(1.0, 3).unwrap();
        assert_eq!(h.equations()[1], vec![Monomial::new(2.0, vec![0, 0, 3])]);
        assert_eq!(h.equations()[2], vec![Monomial::new(-1.0, vec![0, 1, 2])]);
    }

    #[test]
    fn like_terms_collect_and_cancel() {
        let sys = PolynomialSystem::new(
            vec![vec![
                Monomial::new(1.5, vec![1]),
                Monomial::new(2.0, vec![2]),
                Monomial::new(-1.5, vec![1]),
            ]],
            None,
        )
        .unwrap();
        assert_eq!(sys.equations()[0], vec![Monomial::new(2.0, vec![2])]);
    }

    #[test]
    fn rejects_non_finite_and_bad_shapes() {
        assert!(PolynomialSystem::new(vec![vec![Monomial::new(f64::NAN, vec![1])]], None).is_err());
        assert!(PolynomialSystem::new(vec![vec![Monomial::new(1.0, vec![1, 0])]], None).is_err());
    }

    #[test]
    fn json_and_text_round_trip() {
        let sys = logistic();
        assert_eq!(PolynomialSystem::from_json(&sys.to_json()).unwrap(), sys);
        assert_eq!(sys.to_text(), "dx1/dt = x1 - x1^2\n");
        assert_eq!(parse_system(&sys.to_text()).unwrap(), sys);
    }

    #[test]
    fn default_degree_is_odd() {
        assert_eq!(default_target_degree(&logistic()), 3);
        let lin = PolynomialSystem::new(vec![vec![Monomial::new(0.5, vec![1])]], None).unwrap();
        assert_eq!(default_target_degree(&lin), 1);
        let empty = PolynomialSystem::new(vec![vec![]], None).unwrap();
        assert_eq!(default_target_degree(&empty), 1);
    }
}
