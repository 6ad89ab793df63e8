//! A periodic chain taken through the whole pipeline: multi-time flow with
//! conserved quantities, the action of the one-form, and the coefficient
//! functions of the associated multi-time Lagrangian at zero coupling.

use multiform::flows::{action, integrate_curve, ve3_residual, MultiTimeCurve};
use multiform::legendre::{lagrangian_coefficients, VelocityField};
use multiform::models::builtin;
use multiform::phase::PhasePoint;

fn main() {
    let bundle = builtin("toda-3").unwrap();
    let x0 = PhasePoint::new(vec![0.5, -0.3, -0.2], vec![0.4, -0.1, 0.6]).unwrap();
    let curve = MultiTimeCurve::new(vec![
        vec![0.0, 0.0],
        vec![1.2, 0.0],
        vec![1.2, 0.8],
    ])
    .unwrap();

    let traj = integrate_curve(&bundle.system, &curve, &x0, 3000).unwrap();
    println!("toda-3 along t1 to 1.2, then t2 to 0.8:");
    let end = traj.endpoint();
    println!("  endpoint q: [{:+.6}, {:+.6}, {:+.6}]", end.q()[0], end.q()[1], end.q()[2]);
    println!("  action: {:.10}", action(&bundle.system, &traj).unwrap());
    println!("  on-shell variational residual: {:.3e}", ve3_residual(&bundle.system, &traj));
    for drift in bundle.reference_drift(&traj).unwrap() {
        println!("  {} drift: {:.3e}", drift.name, drift.drift);
    }

    // at zero coupling between flows the momenta reduce to the first-flow
    // velocities, and each p v_i - H_i collapses to a local Lagrangian
    let q = vec![0.3, -0.5, 0.2];
    let v1 = vec![0.7, 0.1, -0.4];
    let v2 = vec![-0.2, 0.6, 0.3];
    let vf = VelocityField::new(q, vec![v1.clone(), v2]).unwrap();
    let coeffs = lagrangian_coefficients(&bundle.system, &vf, &v1).unwrap();
    println!("\nmulti-time Lagrangian coefficients at this velocity data:");
    println!("  L1 = {:+.10}", coeffs[0]);
    println!("  L2 = {:+.10}", coeffs[1]);
}
