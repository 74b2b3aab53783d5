//! Scalar, vector and matrix primitives used throughout the controller:
//! softmax addressing, the logistic activation and its derivative, fixed-node
//! Gauss-Legendre quadrature on [0,1], and a classical RK4 step.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Dense row-major matrix with explicit shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from a row-major slice, rejecting non-finite entries.
    pub fn from_rows(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                context: "matrix construction",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        ensure_finite("matrix construction", data)?;
        Ok(Matrix {
            rows,
            cols,
            data: data.to_vec(),
        })
    }

    /// Builds a matrix from entries listed column by column.
    pub fn from_column_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                context: "matrix construction",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        ensure_finite("matrix construction", data)?;
        let mut m = Matrix::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m.data[i * cols + j] = data[j * rows + i];
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension {
                context: "matrix-vector product",
                expected: self.cols,
                actual: x.len(),
            });
        }
        let y = self
            .data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect();
        Ok(y)
    }

    /// y = A^T x
    pub fn tr_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::Dimension {
                context: "transposed matrix-vector product",
                expected: self.rows,
                actual: x.len(),
            });
        }
        let mut y = vec![0.0; self.cols];
        for (&xi, row) in x.iter().zip(self.data.chunks_exact(self.cols)) {
            for (yj, a) in y.iter_mut().zip(row) {
                *yj += a * xi;
            }
        }
        Ok(y)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Entries listed column by column, matching `from_column_major`.
    pub fn to_column_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

pub(crate) fn ensure_finite(context: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            context: context.to_string(),
            time: None,
        })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Numerically safe softmax: the maximum entry is subtracted before
/// exponentiating, so large inputs cannot overflow.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Dimension {
            context: "softmax",
            expected: 1,
            actual: 0,
        });
    }
    ensure_finite("softmax", v)?;
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn sigmoid_deriv(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

/// Weight applied to the integrand of [`quad01`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadWeight {
    /// Integrates f itself.
    Plain,
    /// Integrates theta * f(theta), the weighting the backstepping gains use.
    Theta,
}

const GAUSS_NODES: usize = 16;

fn gauss_legendre_01() -> &'static (Vec<f64>, Vec<f64>) {
    static TABLE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    TABLE.get_or_init(|| {
        let (nodes, weights) = legendre_nodes(GAUSS_NODES);
        // Map [-1, 1] onto [0, 1].
        let mapped_nodes = nodes.iter().map(|x| 0.5 * (x + 1.0)).collect();
        let mapped_weights = weights.iter().map(|w| 0.5 * w).collect();
        (mapped_nodes, mapped_weights)
    })
}

/// Legendre P_n and its derivative at x via the three-term recurrence.
fn legendre_eval(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Nodes and weights of n-point Gauss-Legendre quadrature on [-1, 1],
/// found by Newton iteration from the Chebyshev initial guess.
fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_eval(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_eval(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Deterministic 16-node Gauss-Legendre quadrature of f over [0, 1],
/// optionally with the extra theta weight. Exact for polynomial integrands
/// up to total degree 31.
pub fn quad01<F>(mut f: F, weight: QuadWeight) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (nodes, weights) = gauss_legendre_01();
    let mut acc = 0.0;
    for (&theta, &w) in nodes.iter().zip(weights) {
        let value = f(theta);
        if !value.is_finite() {
            return Err(Error::NonFinite {
                context: format!("quadrature integrand at theta = {theta}"),
                time: None,
            });
        }
        acc += match weight {
            QuadWeight::Plain => w * value,
            QuadWeight::Theta => w * theta * value,
        };
    }
    Ok(acc)
}

/// One classical fourth-order Runge-Kutta step of size h.
///
/// The derivative callback may fail (and its failures are propagated); any
/// non-finite stage derivative is reported with the stage time attached.
pub fn rk4_step<F>(mut deriv: F, t: f64, state: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::Config(format!("RK4 step size must be positive, got {h}")));
    }
    let n = state.len();
    let stage = |k: &[f64], scale: f64| -> Vec<f64> {
        state
            .iter()
            .zip(k)
            .map(|(s, ki)| s + scale * ki)
            .collect()
    };
    let check = |k: Vec<f64>, stage_t: f64| -> Result<Vec<f64>> {
        if k.len() != n {
            return Err(Error::Dimension {
                context: "RK4 derivative",
                expected: n,
                actual: k.len(),
            });
        }
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "RK4 derivative".to_string(),
                time: Some(stage_t),
            });
        }
        Ok(k)
    };

    let k1 = check(deriv(t, state)?, t)?;
    let k2 = check(deriv(t + 0.5 * h, &stage(&k1, 0.5 * h))?, t + 0.5 * h)?;
    let k3 = check(deriv(t + 0.5 * h, &stage(&k2, 0.5 * h))?, t + 0.5 * h)?;
    let k4 = check(deriv(t + h, &stage(&k3, h))?, t + h)?;

    Ok(state
        .iter()
        .enumerate()
        .map(|(i, s)| s + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn softmax_two_zeros_is_uniform() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn softmax_single_entry_normalizes() {
        assert_eq!(softmax(&[123.456]).unwrap(), vec![1.0]);
        assert_eq!(softmax(&[-3.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn softmax_log_counts() {
        // e^{ln k} = k, so softmax([ln 1, ln 2, ln 3]) = [1/6, 2/6, 3/6].
        let out = softmax(&[1f64.ln(), 2f64.ln(), 3f64.ln()]).unwrap();
        assert_abs_diff_eq!(out[0], 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], 2.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out[2], 3.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn softmax_rejects_empty_and_nonfinite() {
        assert!(matches!(softmax(&[]), Err(Error::Dimension { .. })));
        assert!(matches!(softmax(&[1.0, f64::NAN]), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn softmax_shift_invariance_exact_for_representable_shift() {
        // Integer-valued entries and shift: additions are exact, so the
        // max-subtracted exponent arguments are bit-identical.
        let v = [1.0, -2.0, 3.0, 0.0];
        let shifted: Vec<f64> = v.iter().map(|x| x + 8.0).collect();
        assert_eq!(softmax(&v).unwrap(), softmax(&shifted).unwrap());
    }

    #[test]
    fn sigmoid_basics() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid_deriv(0.0), 0.25);
        assert!(sigmoid(20.0) < 1.0 && sigmoid(20.0) > 0.999);
        assert!(sigmoid(-20.0) > 0.0 && sigmoid(-20.0) < 1e-8);
        // Far tails saturate to the interval endpoints without NaN.
        assert!(sigmoid(750.0) <= 1.0 && sigmoid(-750.0) >= 0.0);
    }

    #[test]
    fn sigmoid_deriv_matches_central_difference() {
        let x = 0.7;
        let h = 1e-5;
        let fd = (sigmoid(x + h) - sigmoid(x - h)) / (2.0 * h);
        let analytic = sigmoid_deriv(x);
        assert!((analytic - fd).abs() / analytic.abs() < 1e-8);
    }

    #[test]
    fn quad_theta_weight_of_one_is_half() {
        assert_abs_diff_eq!(quad01(|_| 1.0, QuadWeight::Theta).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn quad_theta_weight_of_theta_is_third() {
        assert_abs_diff_eq!(
            quad01(|t| t, QuadWeight::Theta).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn quad_gain_bound_integrand() {
        // For f(theta) = 1 + 0.1 (theta e + y)^2 the closed form of the
        // theta-weighted integral is 1/2 + 0.1 (e^2/4 + 2 e y / 3 + y^2 / 2).
        let e = 0.0;
        let y = 0.1;
        let numeric = quad01(|t| 1.0 + 0.1 * (t * e + y).powi(2), QuadWeight::Theta).unwrap();
        assert_abs_diff_eq!(numeric, 0.5005, epsilon = 1e-14);

        let e = 0.7;
        let y = -0.3;
        let numeric = quad01(|t| 1.0 + 0.1 * (t * e + y).powi(2), QuadWeight::Theta).unwrap();
        let exact = 0.5 + 0.1 * (e * e / 4.0 + 2.0 * e * y / 3.0 + y * y / 2.0);
        assert_abs_diff_eq!(numeric, exact, epsilon = 1e-14);
    }

    #[test]
    fn quad_exact_for_degree_31() {
        // 16 Gauss nodes integrate polynomials up to degree 31 exactly.
        assert_abs_diff_eq!(
            quad01(|t| t.powi(31), QuadWeight::Plain).unwrap(),
            1.0 / 32.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            quad01(|t| t.powi(30), QuadWeight::Theta).unwrap(),
            1.0 / 32.0,
            epsilon = 1e-12
        );
        // Mixed-coefficient polynomial of degree 31 against its antiderivative.
        let coeffs: Vec<f64> = (0..32).map(|k| ((k * 37 + 11) % 19) as f64 - 9.0).collect();
        let poly = |t: f64| {
            coeffs
                .iter()
                .rev()
                .fold(0.0, |acc, c| acc * t + c)
        };
        let exact: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c / (k as f64 + 1.0))
            .sum();
        assert_abs_diff_eq!(quad01(poly, QuadWeight::Plain).unwrap(), exact, epsilon = 1e-12);
    }

    #[test]
    fn quad_nodes_match_reference_values() {
        let (nodes, weights) = legendre_nodes(16);
        // Largest node/weight of the standard 16-point rule on [-1, 1].
        let max_node = nodes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_abs_diff_eq!(max_node, 0.989_400_934_991_649_9, epsilon = 1e-12);
        let min_weight = weights.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(min_weight, 0.027_152_459_411_754_094, epsilon = 1e-12);
        assert_abs_diff_eq!(weights.iter().sum::<f64>(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn quad_rejects_nonfinite_integrand() {
        let result = quad01(|t| if t > 0.5 { f64::NAN } else { 1.0 }, QuadWeight::Plain);
        assert!(matches!(result, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn rk4_zero_derivative_keeps_state() {
        let out = rk4_step(|_, s| Ok(vec![0.0; s.len()]), 0.0, &[1.0, 2.0], 0.1).unwrap();
        assert_eq!(out, vec![1.0, 2.0]);
    }

    #[test]
    fn rk4_constant_derivative() {
        let out = rk4_step(|_, _| Ok(vec![1.0]), 0.0, &[0.0], 0.01).unwrap();
        assert_abs_diff_eq!(out[0], 0.01, epsilon = 1e-16);
    }

    #[test]
    fn rk4_exponential_one_step() {
        let out = rk4_step(|_, s| Ok(vec![s[0]]), 0.0, &[1.0], 0.1).unwrap();
        assert!((out[0] - 0.1f64.exp()).abs() < 1e-7);
    }

    #[test]
    fn rk4_observed_order_on_exponential() {
        // Integrate xdot = x over [0, 1] at h and h/2; the error against e
        // should shrink by ~2^4.
        let run = |h: f64| {
            let steps = (1.0 / h).round() as usize;
            let mut x = vec![1.0];
            let mut t = 0.0;
            for _ in 0..steps {
                x = rk4_step(|_, s| Ok(vec![s[0]]), t, &x, h).unwrap();
                t += h;
            }
            x[0]
        };
        let e = 1f64.exp();
        let err_h = (run(0.01) - e).abs();
        let err_h2 = (run(0.005) - e).abs();
        let order = (err_h / err_h2).log2();
        assert!(order >= 3.9, "observed order {order}");
    }

    #[test]
    fn rk4_rejects_bad_step_and_nonfinite() {
        assert!(matches!(
            rk4_step(|_, _| Ok(vec![0.0]), 0.0, &[0.0], 0.0),
            Err(Error::Config(_))
        ));
        let result = rk4_step(|_, _| Ok(vec![f64::NAN]), 3.0, &[0.0], 0.1);
        match result {
            Err(Error::NonFinite { time, .. }) => assert_eq!(time, Some(3.0)),
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn matrix_column_major_round_trip() {
        let m = Matrix::from_rows(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let cm = m.to_column_major();
        assert_eq!(cm, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        let back = Matrix::from_column_major(2, 3, &cm).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn matrix_products() {
        let m = Matrix::from_rows(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m.matvec(&[1.0, 0.0, -1.0]).unwrap(), vec![-2.0, -2.0]);
        assert_eq!(m.tr_matvec(&[1.0, 1.0]).unwrap(), vec![5.0, 7.0, 9.0]);
        assert!(m.matvec(&[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_positive(v in proptest::collection::vec(-50.0f64..50.0, 1..12)) {
            let out = softmax(&v).unwrap();
            let sum: f64 = out.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(out.iter().all(|&p| p > 0.0));
        }

        #[test]
        fn softmax_permutation_equivariant(v in proptest::collection::vec(-20.0f64..20.0, 2..8)) {
            let out = softmax(&v).unwrap();
            let mut rotated = v.clone();
            rotated.rotate_left(1);
            let mut out_rotated = softmax(&rotated).unwrap();
            out_rotated.rotate_right(1);
            for (a, b) in out.iter().zip(&out_rotated) {
                prop_assert!((a - b).abs() < 1e-15);
            }
        }

        #[test]
        fn softmax_shift_invariant(v in proptest::collection::vec(-10.0f64..10.0, 1..8), c in -10.0f64..10.0) {
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let a = softmax(&v).unwrap();
            let b = softmax(&shifted).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-14);
            }
        }

        #[test]
        fn sigmoid_stays_in_unit_interval(x in -700.0f64..700.0) {
            let s = sigmoid(x);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!(sigmoid_deriv(x) >= 0.0);
        }
    }
}
