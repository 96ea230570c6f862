#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use qnlode_core::mapping::{map_system, oh_dynamics, product_rule_lift, tensor_power, MapOptions, MappedSystem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use qnlode_core::poly::{parse_system, PolynomialSystem};
use rand::Rng;

pub const LOGISTIC: &str = "dx1/dt = x1 - x1^2";
pub const LORENZ_X0: [f64; 3] = [4.856, 7.291, 18.987];

pub fn lorenz_text(beta: f64) -> String {
    format!(
        "# Lorenz\ndx1/dt = 10*(x2 - x1)\ndx2/dt = x1*(28 - x3) - x2\ndx3/dt = x1*x2 - {beta:?}*x3\n"
    )
}

pub fn logistic() -> PolynomialSystem {
    parse_system(LOGISTIC).unwrap()
}

pub fn lorenz(beta: f64) -> PolynomialSystem {
    parse_system(&lorenz_text(beta)).unwrap()
}

pub fn mapped(sys: &PolynomialSystem, merge: bool) -> MappedSystem {
    map_system(
        sys,
        &MapOptions {
            merge_pairs: merge,
            ..MapOptions::default()
        },
    )
    .unwrap()
}

pub fn lorenz_rhs(x: &[f64], beta: f64) -> [f64; 3] {
    [
        10.0 * (x[1] - x[0]),
        x[0] * (28.0 - x[2]) - x[1],
        x[0] * x[1] - beta * x[2],
    ]
}

pub fn logistic_closed_form(x0: f64, t: f64) -> f64 {
    let e = t.exp();
    x0 * e / (1.0 + x0 * (e - 1.0))
}

pub fn random_unit<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return v.into_iter().map(|a| a / norm).collect();
        }
    }
}

pub fn kron(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `F(x) = |x|^2 G(x) - (x . G(x)) x` for a homogenized system, straight
/// from monomial evaluation.
pub fn norm_preserving_rhs(homogenized: &PolynomialSystem, x: &[f64]) -> Vec<f64> {
    let g = homogenized.evaluate(x).unwrap();
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let xg: f64 = x.iter().zip(&g).map(|(a, b)| a * b).sum();
    g.iter().zip(x).map(|(gi, xi)| r2 * gi - xg * xi).collect()
}

/// `d/dt (x (x) x)` given `dx/dt`, group size 2.
pub fn lifted_rate(x: &[f64], dx: &[f64]) -> Vec<f64> {
    let mut out = kron(dx, x);
    for (o, v) in out.iter_mut().zip(kron(x, dx)) {
        *o += v;
    }
    out
}

/// `exp(A)` by scaling and squaring with a degree-20 Taylor polynomial.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let norm = a.iter().map(|z| z.norm()).sum::<f64>();
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale /= 2.0;
        squarings += 1;
    }
    let b = a * Complex64::new(scale, 0.0);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=20 {
        term = &term * &b / Complex64::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Worst relative disagreement between the reduced-tensor contraction,
/// the pair reconstruction, the product-rule lift and the direct oracle
/// over 100 random unit states.
pub fn three_way_agreement(sys: &PolynomialSystem, merge: bool, seed: u64) -> f64 {
    let m = mapped(sys, merge);
    let d = m.homogenized.n_vars();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = random_unit(&mut rng, d);
        let y = tensor_power(&x, 2);
        let by_tensor = m.reduced.contract(&y).unwrap();
        let mut y_padded = y.clone();
        y_padded.resize(m.state_dim(), 0.0);
        let by_pairs = oh_dynamics(&m.pairs, &y_padded);
        let by_lift = product_rule_lift(&m.antisymmetric, &x, 2).unwrap();
        let by_oracle = lifted_rate(&x, &norm_preserving_rhs(&m.homogenized, &x));
        let scale = max_abs(&by_oracle).max(1e-12);
        for other in [&by_pairs[..by_tensor.len()], &by_lift, &by_oracle] {
            worst = worst.max(max_abs_diff(&by_tensor, other) / scale);
        }
        assert!(by_pairs[by_tensor.len()..].iter().all(|&v| v == 0.0));
    }
    worst
}
