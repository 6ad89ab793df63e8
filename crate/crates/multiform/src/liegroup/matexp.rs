//! Dense matrix exponential by scaling and squaring with a degree-13 Pade
//! approximant, and its exact directional derivative through the block
//! identity
//!
//! ```text
//! exp([[A, E], [0, A]]) = [[exp(A), D exp_A(E)], [0, exp(A)]]
//! ```
//!
//! which turns the derivative into one exponential of a doubled matrix, with
//! no finite differencing.

use nalgebra::DMatrix;

/// Largest 1-norm for which the degree-13 approximant is used unscaled.
const THETA_13: f64 = 5.371920351148152;

/// Pade-13 numerator/denominator coefficients, constant term first.
const B: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn one_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum())
        .fold(0.0, f64::max)
}

/// `exp(a)` for a square matrix. Accurate to close to machine precision for
/// any norm; large norms are halved into range and squared back.
pub fn matrix_exp(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square(), "matrix exponential needs a square matrix");
    let d = a.nrows();
    let norm = one_norm(a);
    let squarings = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a / 2.0_f64.powi(squarings as i32);

    let identity = DMatrix::identity(d, d);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let u = &scaled
        * (&a6 * (B[13] * &a6 + B[11] * &a4 + B[9] * &a2)
            + B[7] * &a6
            + B[5] * &a4
            + B[3] * &a2
            + B[1] * &identity);
    let v = &a6 * (B[12] * &a6 + B[10] * &a4 + B[8] * &a2)
        + B[6] * &a6
        + B[4] * &a4
        + B[2] * &a2
        + B[0] * &identity;

    let mut result = (&v - &u)
        .lu()
        .solve(&(v + u))
        .expect("Pade denominator is well conditioned below the scaling threshold");
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// `(exp(a), directional derivative of exp at a along e)`, both exact to the
/// accuracy of [`matrix_exp`] on the doubled block matrix.
pub fn exp_with_directional(a: &DMatrix<f64>, e: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    assert!(
        a.is_square() && a.shape() == e.shape(),
        "direction must match the square base matrix"
    );
    let d = a.nrows();
    let mut block = DMatrix::zeros(2 * d, 2 * d);
    block.view_mut((0, 0), (d, d)).copy_from(a);
    block.view_mut((0, d), (d, d)).copy_from(e);
    block.view_mut((d, d), (d, d)).copy_from(a);
    let big = matrix_exp(&block);
    (
        big.view((0, 0), (d, d)).into(),
        big.view((0, d), (d, d)).into(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    #[test]
    fn scalar_and_diagonal_cases_are_exact() {
        let x = DMatrix::from_row_slice(1, 1, &[0.7]);
        assert!((matrix_exp(&x)[(0, 0)] - 0.7_f64.exp()).abs() < 1e-15);

        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 0.0, 2.5]));
        let e = matrix_exp(&d);
        for (i, lam) in [-1.0, 0.0, 2.5].into_iter().enumerate() {
            assert!((e[(i, i)] - f64::exp(lam)).abs() < 1e-14 * f64::exp(lam));
        }
        assert!(e[(0, 1)].abs() < 1e-16);
    }

    #[test]
    fn nilpotent_exponential_truncates() {
        let n = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = matrix_exp(&n);
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(max_gap(&e, &expected) < 1e-15);
    }

    #[test]
    fn rotation_generator_gives_cosine_sine() {
        let theta = 1.234_f64;
        let g = DMatrix::from_row_slice(2, 2, &[0.0, -theta, theta, 0.0]);
        let e = matrix_exp(&g);
        let expected =
            DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        assert!(max_gap(&e, &expected) < 1e-14);
    }

    #[test]
    fn scaling_branch_agrees_with_repeated_squaring() {
        // norm 12 forces scaling; exp(A) must equal exp(A/16)^16 of the
        // unscaled branch
        let a = DMatrix::from_row_slice(3, 3, &[4.0, -2.0, 1.0, 0.5, 3.0, -1.0, 2.0, 1.0, -5.0]);
        let direct = matrix_exp(&a);
        let mut small = matrix_exp(&(&a / 16.0));
        for _ in 0..4 {
            small = &small * &small;
        }
        let scale = direct.iter().map(|v| v.abs()).fold(1.0, f64::max);
        assert!(max_gap(&direct, &small) < 1e-12 * scale);
    }

    #[test]
    fn inverse_is_the_negated_exponential() {
        let a = DMatrix::from_row_slice(3, 3, &[0.2, -1.0, 0.4, 0.9, 0.1, -0.3, -0.5, 0.6, 0.0]);
        let product = matrix_exp(&a) * matrix_exp(&(-&a));
        assert!(max_gap(&product, &DMatrix::identity(3, 3)) < 1e-14);
    }

    #[test]
    fn directional_derivative_matches_central_differences() {
        let a = DMatrix::from_row_slice(3, 3, &[0.3, -0.8, 0.2, 1.1, 0.0, -0.4, 0.5, 0.7, -0.2]);
        let e = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, -0.6, 0.0, -1.3, 0.4, 0.8, 0.1, 0.9]);
        let (exp_a, deriv) = exp_with_directional(&a, &e);
        assert!(max_gap(&exp_a, &matrix_exp(&a)) < 1e-14);

        let h = 1e-6;
        let plus = matrix_exp(&(&a + h * &e));
        let minus = matrix_exp(&(&a - h * &e));
        let numeric = (plus - minus) / (2.0 * h);
        assert!(max_gap(&deriv, &numeric) < 1e-8);
    }

    #[test]
    fn directional_derivative_along_the_base_is_exact() {
        // E = A commutes with A, so the derivative is exp(A) A exactly
        let a = DMatrix::from_row_slice(2, 2, &[0.4, -1.2, 0.7, -0.1]);
        let (exp_a, deriv) = exp_with_directional(&a, &a);
        assert!(max_gap(&deriv, &(&exp_a * &a)) < 1e-14);
    }
}
