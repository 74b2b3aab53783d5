//! Per-level two-layer approximator in augmented-weight form: the input
//! weights carry the hidden bias as their final row and the output weights
//! carry the output bias as their final entry. The regressor appends a
//! constant 1 so biases ride along in ordinary matrix products.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{sigmoid, sigmoid_deriv, Matrix};
use crate::plant::CommandSignal;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoLayerNn {
    /// (d+1) x N input weights, bias row last.
    v_aug: Matrix,
    /// N+1 output weights, bias entry last.
    w_aug: Vec<f64>,
    input_dim: usize,
    hidden_width: usize,
}

impl TwoLayerNn {
    pub fn zeros(input_dim: usize, hidden_width: usize) -> Self {
        TwoLayerNn {
            v_aug: Matrix::zeros(input_dim + 1, hidden_width),
            w_aug: vec![0.0; hidden_width + 1],
            input_dim,
            hidden_width,
        }
    }

    /// Input weights drawn i.i.d. uniform on [-0.5, 0.5); output weights
    /// start at zero so the initial approximation is exactly zero.
    pub fn seeded<R: Rng>(input_dim: usize, hidden_width: usize, rng: &mut R) -> Self {
        let mut nn = TwoLayerNn::zeros(input_dim, hidden_width);
        for i in 0..input_dim + 1 {
            for j in 0..hidden_width {
                nn.v_aug.set(i, j, rng.random_range(-0.5..0.5));
            }
        }
        nn
    }

    pub fn from_parts(v_aug: Matrix, w_aug: Vec<f64>) -> Result<Self> {
        let hidden_width = v_aug.cols();
        let input_dim = v_aug.rows() - 1;
        if w_aug.len() != hidden_width + 1 {
            return Err(Error::Dimension {
                context: "output weight vector",
                expected: hidden_width + 1,
                actual: w_aug.len(),
            });
        }
        Ok(TwoLayerNn {
            v_aug,
            w_aug,
            input_dim,
            hidden_width,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden_width
    }

    pub fn v_aug(&self) -> &Matrix {
        &self.v_aug
    }

    pub fn w_aug(&self) -> &[f64] {
        &self.w_aug
    }

    /// First N output weights, bias excluded; this is the slice the memory
    /// write law uses.
    pub fn w_hidden(&self) -> &[f64] {
        &self.w_aug[..self.hidden_width]
    }

    pub fn v_norm(&self) -> f64 {
        self.v_aug.frobenius_norm()
    }

    pub fn w_norm(&self) -> f64 {
        self.w_aug.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// x_e = [x_tilde; 1]
    pub fn extended_input(&self, x_tilde: &[f64]) -> Result<Vec<f64>> {
        if x_tilde.len() != self.input_dim {
            return Err(Error::Dimension {
                context: "network input",
                expected: self.input_dim,
                actual: x_tilde.len(),
            });
        }
        let mut x_e = Vec::with_capacity(self.input_dim + 1);
        x_e.extend_from_slice(x_tilde);
        x_e.push(1.0);
        Ok(x_e)
    }

    /// Pre-activation z = V_aug^T x_e.
    pub fn preactivation(&self, x_tilde: &[f64]) -> Result<Vec<f64>> {
        let x_e = self.extended_input(x_tilde)?;
        self.v_aug.tr_matvec(&x_e)
    }

    /// Hidden-layer output, the query/write vector of the memory interface.
    pub fn hidden(&self, x_tilde: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .preactivation(x_tilde)?
            .into_iter()
            .map(sigmoid)
            .collect())
    }

    /// Augmented regressor [sigmoid(V_aug^T x_e); 1].
    pub fn sigma_hat(&self, x_tilde: &[f64]) -> Result<Vec<f64>> {
        let mut s = self.hidden(x_tilde)?;
        s.push(1.0);
        Ok(s)
    }

    /// Jacobian of the augmented regressor with respect to the
    /// pre-activation: an (N+1) x N matrix whose top block is
    /// diag(sigmoid'(z_j)) and whose last row is zero.
    pub fn sigma_prime(&self, x_tilde: &[f64]) -> Result<Matrix> {
        let z = self.preactivation(x_tilde)?;
        let n = self.hidden_width;
        let mut jac = Matrix::zeros(n + 1, n);
        for (j, zj) in z.iter().enumerate() {
            jac.set(j, j, sigmoid_deriv(*zj));
        }
        Ok(jac)
    }

    /// Memory-modified approximation W_aug^T (sigma_hat + [m_recall; 0]).
    pub fn approximate_h(&self, x_tilde: &[f64], m_recall: &[f64]) -> Result<f64> {
        if m_recall.len() != self.hidden_width {
            return Err(Error::Dimension {
                context: "memory recall vector",
                expected: self.hidden_width,
                actual: m_recall.len(),
            });
        }
        let sigma = self.sigma_hat(x_tilde)?;
        let mut acc = 0.0;
        for j in 0..self.hidden_width {
            acc += self.w_aug[j] * (sigma[j] + m_recall[j]);
        }
        acc += self.w_aug[self.hidden_width] * sigma[self.hidden_width];
        Ok(acc)
    }

    /// Number of entries `flatten_into` appends: (d+1)N input weights plus
    /// N+1 output weights.
    pub fn flattened_len(&self) -> usize {
        (self.input_dim + 1) * self.hidden_width + self.hidden_width + 1
    }

    /// Appends V_aug column by column, then W_aug. This fixed order is what
    /// higher-level network inputs and the simulator state layout use.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        out.extend(self.v_aug.to_column_major());
        out.extend_from_slice(&self.w_aug);
    }

    pub(crate) fn unflatten(
        input_dim: usize,
        hidden_width: usize,
        flat: &[f64],
    ) -> Result<Self> {
        let v_len = (input_dim + 1) * hidden_width;
        let expected = v_len + hidden_width + 1;
        if flat.len() != expected {
            return Err(Error::Dimension {
                context: "flattened network weights",
                expected,
                actual: flat.len(),
            });
        }
        let v_aug = Matrix::from_column_major(input_dim + 1, hidden_width, &flat[..v_len])?;
        TwoLayerNn::from_parts(v_aug, flat[v_len..].to_vec())
    }
}

/// Input dimension of each level's network for a plant of the given order:
/// level k (0-based) sees the first k+1 states, the command derivatives up to
/// order k+1, and the flattened weights of every lower level.
pub fn level_input_dims(order: usize, hidden_width: usize) -> Vec<usize> {
    let mut dims = Vec::with_capacity(order);
    let mut weights_below = 0usize;
    for k in 0..order {
        let dim = (k + 1) + (k + 2) + weights_below;
        dims.push(dim);
        weights_below += (dim + 1) * hidden_width + hidden_width + 1;
    }
    dims
}

/// Builds the level-k network input
/// [x_1..x_{k+1}, y_d, y_d', .., y_d^(k+1), flat(Z_1), .., flat(Z_k)].
pub fn assemble_input(
    level: usize,
    x: &[f64],
    cmd: &CommandSignal,
    t: f64,
    lower_levels: &[TwoLayerNn],
) -> Result<Vec<f64>> {
    if level >= x.len() {
        return Err(Error::Dimension {
            context: "state prefix for network input",
            expected: level + 1,
            actual: x.len(),
        });
    }
    if lower_levels.len() != level {
        return Err(Error::Dimension {
            context: "lower-level networks",
            expected: level,
            actual: lower_levels.len(),
        });
    }
    let mut input = Vec::new();
    input.extend_from_slice(&x[..=level]);
    for order in 0..=level + 1 {
        input.push(cmd.deriv(order, t)?);
    }
    for nn in lower_levels {
        nn.flatten_into(&mut input);
    }
    Ok(input)
}
