//! Continuous-time weight update laws, identical at every level:
//!
//! `Wdot = C_w (sigma_hat - sigma' V^T x_e) e - kappa C_w W`
//! `Vdot = C_v x_e e (W^T sigma') - kappa C_v V`
//!
//! Memory plays no role here; it influences learning only through the
//! trajectory of the tracking error.

use crate::controller::AdaptationRates;
use crate::error::Result;
use crate::nn::TwoLayerNn;
use crate::numerics::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightDerivatives {
    /// Time derivative of the augmented output weights (length N+1).
    pub w_aug: Vec<f64>,
    /// Time derivative of the augmented input weights ((d+1) x N).
    pub v_aug: Matrix,
}

pub fn weight_derivatives(
    nn: &TwoLayerNn,
    x_tilde: &[f64],
    error: f64,
    rates: &AdaptationRates,
) -> Result<WeightDerivatives> {
    let x_e = nn.extended_input(x_tilde)?;
    let sigma = nn.sigma_hat(x_tilde)?;
    let sigma_p = nn.sigma_prime(x_tilde)?;
    let v_x = nn.preactivation(x_tilde)?;

    // sigma' V^T x_e, length N+1.
    let sp_vx = sigma_p.matvec(&v_x)?;
    let w_dot: Vec<f64> = sigma
        .iter()
        .zip(&sp_vx)
        .zip(nn.w_aug())
        .map(|((s, sv), w)| rates.w_rate * (s - sv) * error - rates.leakage * rates.w_rate * w)
        .collect();

    // W^T sigma', a length-N row; Vdot is the outer product x_e * row,
    // scaled by C_v e, minus the leakage term.
    let w_sp = sigma_p.tr_matvec(nn.w_aug())?;
    let mut v_dot = Matrix::zeros(nn.input_dim() + 1, nn.hidden_width());
    for (i, &x_ei) in x_e.iter().enumerate() {
        for (j, &w_spj) in w_sp.iter().enumerate() {
            let value = rates.v_rate * x_ei * error * w_spj
                - rates.leakage * rates.v_rate * nn.v_aug().get(i, j);
            v_dot.set(i, j, value);
        }
    }

    Ok(WeightDerivatives {
        w_aug: w_dot,
        v_aug: v_dot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rates(w: f64, v: f64, leak: f64) -> AdaptationRates {
        AdaptationRates {
            w_rate: w,
            v_rate: v,
            leakage: leak,
        }
    }

    #[test]
    fn zero_error_zero_leakage_freezes_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let nn = TwoLayerNn::seeded(3, 6, &mut rng);
        let d = weight_derivatives(&nn, &[0.1, -0.3, 0.8], 0.0, &rates(10.0, 10.0, 0.0)).unwrap();
        assert!(d.w_aug.iter().all(|&v| v == 0.0));
        assert!(d.v_aug.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_error_with_leakage_decays_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut nn = TwoLayerNn::seeded(2, 3, &mut rng);
        let w = vec![0.5, -1.0, 2.0, 0.25];
        nn = TwoLayerNn::from_parts(nn.v_aug().clone(), w.clone()).unwrap();
        let kappa = 0.3;
        let d = weight_derivatives(&nn, &[0.2, 0.4], 0.0, &rates(10.0, 5.0, kappa)).unwrap();
        for (dw, wi) in d.w_aug.iter().zip(&w) {
            assert_abs_diff_eq!(*dw, -kappa * 10.0 * wi, epsilon = 1e-15);
        }
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(
                    d.v_aug.get(i, j),
                    -kappa * 5.0 * nn.v_aug().get(i, j),
                    epsilon = 1e-15
                );
            }
        }
    }

    #[test]
    fn hand_value_for_zero_weights() {
        // d = 1, N = 1, all weights zero, e = 1, C_w = 10:
        // sigma_hat = [0.5, 1], correction term vanishes, so
        // Wdot = [5, 10] and Vdot = 0.
        let nn = TwoLayerNn::zeros(1, 1);
        let d = weight_derivatives(&nn, &[0.7], 1.0, &rates(10.0, 10.0, 0.0)).unwrap();
        assert_eq!(d.w_aug, vec![5.0, 10.0]);
        assert!(d.v_aug.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn error_linear_terms_scale_linearly() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let v = Matrix::from_rows(
            3,
            2,
            &(0..6).map(|_| rng.random_range(-0.5..0.5)).collect::<Vec<_>>(),
        )
        .unwrap();
        let nn = TwoLayerNn::from_parts(v, vec![0.4, -0.2, 0.9]).unwrap();
        let r = rates(10.0, 10.0, 0.1);
        let x = [0.3, -0.6];
        let e = 0.37;
        let d1 = weight_derivatives(&nn, &x, e, &r).unwrap();
        let d2 = weight_derivatives(&nn, &x, 2.0 * e, &r).unwrap();
        // Subtracting the leakage part leaves terms exactly linear in e.
        for ((a, b), w) in d1.w_aug.iter().zip(&d2.w_aug).zip(nn.w_aug()) {
            let lin1 = a + r.leakage * r.w_rate * w;
            let lin2 = b + r.leakage * r.w_rate * w;
            assert_abs_diff_eq!(lin2, 2.0 * lin1, epsilon = 1e-12);
        }
        for i in 0..3 {
            for j in 0..2 {
                let lin1 = d1.v_aug.get(i, j) + r.leakage * r.v_rate * nn.v_aug().get(i, j);
                let lin2 = d2.v_aug.get(i, j) + r.leakage * r.v_rate * nn.v_aug().get(i, j);
                assert_abs_diff_eq!(lin2, 2.0 * lin1, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn independent_of_memory_contents() {
        // The update law never sees memory, by construction: the same
        // (weights, input, error) gives the same derivatives regardless of
        // any memory state a caller might hold.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let nn = TwoLayerNn::seeded(3, 4, &mut rng);
        let a = weight_derivatives(&nn, &[0.1, 0.2, 0.3], 0.5, &rates(10.0, 10.0, 0.0)).unwrap();
        let b = weight_derivatives(&nn, &[0.1, 0.2, 0.3], 0.5, &rates(10.0, 10.0, 0.0)).unwrap();
        assert_eq!(a, b);
    }
}
