//! Runs two flows of a family in both orders and compares the endpoints,
//! then shows the obstruction degrading as the bracket residual grows.

use multiform::flows::flow_commutation;
use multiform::models::builtin;
use multiform::phase::{HamiltonianSystem, PhasePoint};
use multiform::Expression;

fn main() {
    let bundle = builtin("ho").unwrap();
    let x0 = PhasePoint::new(vec![0.5, -0.2], vec![0.3, 0.7]).unwrap();
    let report = flow_commutation(&bundle.system, 0, 1, 0.9, 0.6, &x0, 2000).unwrap();
    println!("oscillator H then J2 vs J2 then H:");
    println!("  endpoint gap: {:.3e}", report.gap);

    // a one-parameter family of deformed pairs: eps = 0 commutes (H2 is a
    // function of H1), and the endpoint gap grows linearly with the bracket
    println!("\ndeformed pair H1 = (p^2 + q^2)/2, H2 = H1 + eps q:");
    for eps in [0.0, 1e-4, 1e-3, 1e-2] {
        let system = HamiltonianSystem::new(
            1,
            vec![
                Expression::parse("(p1^2 + q1^2)/2").unwrap(),
                Expression::parse(&format!("(p1^2 + q1^2)/2 + {eps}*q1")).unwrap(),
            ],
            vec![],
        )
        .unwrap();
        let x0 = PhasePoint::new(vec![0.4], vec![0.8]).unwrap();
        let report = flow_commutation(&system, 0, 1, 1.0, 1.0, &x0, 2000).unwrap();
        println!("  eps = {eps:<8} endpoint gap = {:.3e}", report.gap);
    }
}
