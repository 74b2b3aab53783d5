//! Softmax-addressed working memory: slots are columns of an N x n_s matrix,
//! read by similarity to a query vector and written through a continuous-time
//! law with forget, update and error-correction channels.

use crate::error::{Error, Result};
use crate::nn::TwoLayerNn;
use crate::numerics::{softmax, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryState {
    /// N x n_s slot matrix; column j is slot j.
    mu: Matrix,
    write_constant: f64,
}

/// Result of one read: the recalled vector and the softmax addressing
/// weights, which the write law reuses.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryRead {
    pub recalled: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MemoryState {
    /// Fresh memory with every slot at zero.
    pub fn zeros(hidden_width: usize, slots: usize, write_constant: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&write_constant) {
            return Err(Error::Config(format!(
                "memory write constant must lie in [0, 1], got {write_constant}"
            )));
        }
        if hidden_width == 0 || slots == 0 {
            return Err(Error::Config("memory needs positive width and slot count".into()));
        }
        Ok(MemoryState {
            mu: Matrix::zeros(hidden_width, slots),
            write_constant,
        })
    }

    pub fn from_matrix(mu: Matrix, write_constant: f64) -> Result<Self> {
        let mut mem = MemoryState::zeros(mu.rows(), mu.cols(), write_constant)?;
        mem.mu = mu;
        Ok(mem)
    }

    pub fn hidden_width(&self) -> usize {
        self.mu.rows()
    }

    pub fn slots(&self) -> usize {
        self.mu.cols()
    }

    pub fn write_constant(&self) -> f64 {
        self.write_constant
    }

    pub fn mu(&self) -> &Matrix {
        &self.mu
    }

    pub fn mu_norm(&self) -> f64 {
        self.mu.frobenius_norm()
    }

    /// Softmax-addressed read: weights = softmax(mu^T q), recalled = mu * weights.
    pub fn read(&self, query: &[f64]) -> Result<MemoryRead> {
        if query.len() != self.hidden_width() {
            return Err(Error::Dimension {
                context: "memory query",
                expected: self.hidden_width(),
                actual: query.len(),
            });
        }
        let scores = self.mu.tr_matvec(query)?;
        let weights = softmax(&scores)?;
        let recalled = self.mu.matvec(&weights)?;
        Ok(MemoryRead { recalled, weights })
    }

    /// Slot-wise write law: column j of the result is
    /// `z_j * (-mu_j + c_w * write_vec + w_out * e)`, with z the same
    /// addressing weights the read produces for this query.
    pub fn write_derivative(
        &self,
        query: &[f64],
        write_vec: &[f64],
        w_out: &[f64],
        error: f64,
    ) -> Result<Matrix> {
        let weights = self.read(query)?.weights;
        self.write_derivative_with(&weights, write_vec, w_out, error)
    }

    /// Same law with addressing weights already computed, so a caller that
    /// has just read can reuse them without a second softmax.
    pub fn write_derivative_with(
        &self,
        weights: &[f64],
        write_vec: &[f64],
        w_out: &[f64],
        error: f64,
    ) -> Result<Matrix> {
        let n = self.hidden_width();
        if weights.len() != self.slots() {
            return Err(Error::Dimension {
                context: "memory addressing weights",
                expected: self.slots(),
                actual: weights.len(),
            });
        }
        if write_vec.len() != n || w_out.len() != n {
            return Err(Error::Dimension {
                context: "memory write vectors",
                expected: n,
                actual: if write_vec.len() != n {
                    write_vec.len()
                } else {
                    w_out.len()
                },
            });
        }
        let mut deriv = Matrix::zeros(n, self.slots());
        for (j, &z) in weights.iter().enumerate() {
            for i in 0..n {
                let value = z * (-self.mu.get(i, j) + self.write_constant * write_vec[i]
                    + w_out[i] * error);
                deriv.set(i, j, value);
            }
        }
        Ok(deriv)
    }
}

/// Query vector of the interface: the network's current hidden-layer output.
/// The write vector is the same quantity in this design.
pub fn query(nn: &TwoLayerNn, x_tilde: &[f64]) -> Result<Vec<f64>> {
    nn.hidden(x_tilde)
}
