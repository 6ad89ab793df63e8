//! Integrates the action of `p dq - H dt^1 - J dt^2` for a single rotating
//! oscillator along a pure first-flow path, where the result has a closed
//! form to compare against.

use multiform::flows::{action, integrate_curve, MultiTimeCurve};
use multiform::phase::{HamiltonianSystem, PhasePoint};
use multiform::Expression;

fn main() {
    // one degree of freedom driven by its own oscillator energy; the second
    // Hamiltonian only matters on paths that move in t2
    let system = HamiltonianSystem::new(
        1,
        vec![
            Expression::parse("(p1^2 + q1^2)/2").unwrap(),
            Expression::parse("p1*q1").unwrap(),
        ],
        vec![],
    )
    .unwrap();

    let (p0, q0) = (0.8, -0.4);
    let x0 = PhasePoint::new(vec![p0], vec![q0]).unwrap();
    let angle = 1.3_f64;
    let curve = MultiTimeCurve::new(vec![vec![0.0, 0.0], vec![angle, 0.0]]).unwrap();

    let traj = integrate_curve(&system, &curve, &x0, 4000).unwrap();
    let measured = action(&system, &traj).unwrap();

    // for the rotation flow, integrating p dq - H dt by hand gives
    //   S = (p0^2 - q0^2) sin(2t)/4 - p0 q0 (1 - cos(2t))/2
    let closed = (p0 * p0 - q0 * q0) * (2.0 * angle).sin() / 4.0
        - p0 * q0 * (1.0 - (2.0 * angle).cos()) / 2.0;

    let end = traj.endpoint();
    println!("rotation by t = {angle}");
    println!("endpoint: p = {:+.6}, q = {:+.6}", end.p()[0], end.q()[0]);
    println!("action (composite integration): {measured:.12}");
    println!("action (closed form):           {closed:.12}");
    println!("gap: {:.3e}", (measured - closed).abs());
}
