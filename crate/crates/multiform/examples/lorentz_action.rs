//! Runs the six boost/rotation flows of the Lorentz model at once and checks
//! that the phase-space endpoint is the matrix group element acting linearly:
//! q -> exp(-G) q and p -> exp(G^T) p with G the contracted generator.
//!
//! Also evaluates the accumulated action. For these bilinear Hamiltonians
//! p dq/ds equals sum_i v^i H_i pointwise along the flow, so the one-form
//! integrand cancels and the action is zero to roundoff on any line.

use multiform::flows::{action, integrate_curve, MultiTimeCurve};
use multiform::liegroup::matrix_exp;
use multiform::models::builtin;
use multiform::phase::PhasePoint;
use nalgebra::{DMatrix, DVector};

fn main() {
    let bundle = builtin("lorentz").unwrap();
    let algebra = bundle.algebra.as_ref().unwrap();
    let sys = &bundle.system;

    // One boost, one rotation, and a generic mixture.
    let runs: [(&str, [f64; 6]); 3] = [
        ("x-boost", [0.4, 0.0, 0.0, 0.0, 0.0, 0.0]),
        ("xy-rotation", [0.0, 0.0, 0.0, 0.6, 0.0, 0.0]),
        ("mixed", [0.21, -0.34, 0.08, 0.45, -0.12, 0.3]),
    ];

    let x0 = PhasePoint::new(vec![0.3, -0.1, 0.7, 0.2], vec![1.0, 0.4, -0.6, 0.9]).unwrap();

    for (label, t) in runs {
        let curve = MultiTimeCurve::new(vec![vec![0.0; 6], t.to_vec()]).unwrap();
        let traj = integrate_curve(sys, &curve, &x0, 4000).unwrap();
        let end = traj.samples().last().unwrap();

        let mut generator = DMatrix::zeros(4, 4);
        for (k, coeff) in t.iter().enumerate() {
            generator += algebra.basis_matrix(k) * *coeff;
        }
        let q_pred = matrix_exp(&(-&generator)) * DVector::from_column_slice(x0.q());
        let p_pred = matrix_exp(&generator.transpose()) * DVector::from_column_slice(x0.p());

        let q_gap: f64 = end.state[4..8]
            .iter()
            .zip(q_pred.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let p_gap: f64 = end.state[..4]
            .iter()
            .zip(p_pred.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);

        let act = action(sys, &traj).unwrap();
        println!("{label}:");
        println!("  |q(1) - exp(-G) q0|  = {q_gap:.3e}");
        println!("  |p(1) - exp(G^T) p0| = {p_gap:.3e}");
        println!("  action along the line = {act:.3e}  (cancels identically)");
    }

    println!();
    println!("endpoint gaps reflect integrator error; the action is exact cancellation.");
}
