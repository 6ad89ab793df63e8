//! Chart coefficients on a group and the flatness relation they satisfy.
//!
//! A chart assigns each coordinate direction a combination of generators
//! through `g^-1 dg = theta^j_k xi_j dtau^k`. For the upper-triangular pair
//! the product chart gives the shear matrix [[1, -t], [0, 1]] exactly; for
//! su(2) no closed form is printed, but the finite-difference flatness
//! residual shows the same structure equation holding.

use multiform::liegroup::{mc_compatibility, theta_coefficients, GroupChart, LieAlgebra, StructureConstants};
use multiform::models::su2;
use nalgebra::DMatrix;

fn main() {
    let constants = StructureConstants::from_lower_entries(2, &[(0, 1, 0, 1.0)]).unwrap();
    let basis = vec![
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, 0.5]),
    ];
    let affine = LieAlgebra::new(constants, basis).unwrap();
    let chart = GroupChart::product(vec![1, 0]);

    let tau = [0.9, -0.4];
    let expansion = theta_coefficients(&affine, &chart, &tau).unwrap();
    println!("affine pair [e1, e2] = e1, chart exp(tau2 e2) exp(tau1 e1):");
    println!("theta at tau = ({}, {}):", tau[0], tau[1]);
    for j in 0..2 {
        println!(
            "  [{:+.6}, {:+.6}]",
            expansion.theta[(j, 0)],
            expansion.theta[(j, 1)]
        );
    }
    println!("expected [[1, {:+.1}], [0, 1]]", -tau[0]);
    println!(
        "flatness residual: {:.3e}",
        mc_compatibility(&affine, &chart, &tau, 1e-6).unwrap()
    );

    let algebra = su2();
    for chart in [
        GroupChart::product(vec![0, 1, 2]),
        GroupChart::single(),
    ] {
        let tau = [0.5, -0.3, 0.7];
        let violation = mc_compatibility(&algebra, &chart, &tau, 1e-6).unwrap();
        println!("\nsu(2), {chart:?}:");
        println!("  flatness residual: {violation:.3e}");
    }
}
