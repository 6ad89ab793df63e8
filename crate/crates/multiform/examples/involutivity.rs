//! Prints bracket matrices for two families and reads off what they certify:
//! the Toda pair commutes outright, while the oscillator quadruple closes on
//! structure constants instead of on zero.

use multiform::models::builtin;
use multiform::phase::PhasePoint;

fn main() {
    let toda = builtin("toda-3").unwrap();
    let x = PhasePoint::new(vec![0.4, -0.2, 0.1], vec![0.3, 0.8, -0.5]).unwrap();
    let brackets = toda.system.involutivity_matrix(&x).unwrap();
    println!("toda-3 at a fixed point, {{H_i, H_j}}:");
    for i in 0..2 {
        let row: Vec<String> = (0..2).map(|j| format!("{:+.3e}", brackets[(i, j)])).collect();
        println!("  [{}]", row.join(", "));
    }
    println!("all entries vanish: the pair is in involution\n");

    let osc = builtin("ho-su2").unwrap();
    let x = PhasePoint::new(vec![0.7, -0.3], vec![0.2, 0.9]).unwrap();
    let brackets = osc.system.involutivity_matrix(&x).unwrap();
    let values = osc.system.h_values(&x.state());
    println!("oscillator family (H, J1, J2, J3), {{H_i, H_j}}:");
    for i in 0..4 {
        let row: Vec<String> = (0..4).map(|j| format!("{:+.4}", brackets[(i, j)])).collect();
        println!("  [{}]", row.join(", "));
    }
    println!("H values: {:?}", values.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>());
    // {J1, J2} lands on -2 J3 and cyclically; the first row still vanishes,
    // so each J generates a symmetry of H even though the J's do not commute
    println!(
        "{{J1, J2}} = {:+.4} vs -2 J3 = {:+.4}",
        brackets[(1, 2)],
        -2.0 * values[3]
    );
}
