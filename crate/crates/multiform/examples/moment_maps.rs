//! Checks that each bundled Hamiltonian family realizes its algebra's
//! bracket table on phase space: {H_i, H_j} = c_ij^k H_k pointwise.

use multiform::liegroup::moment_map_violation;
use multiform::models::builtin;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for name in ["ho-su2", "conformal", "lorentz"] {
        let bundle = builtin(name).unwrap();
        let algebra = bundle.algebra.as_ref().unwrap();
        println!(
            "{name}: {} generators in a {}-dimensional representation",
            algebra.n(),
            algebra.rep_dim()
        );
        println!("  jacobi violation of the table: {:.3e}", algebra.constants().jacobi_violation());

        let mut worst = 0.0_f64;
        for _ in 0..200 {
            let x = bundle.sample_point(&mut rng);
            worst = worst.max(moment_map_violation(&bundle.system, algebra, &x).unwrap());
        }
        println!("  max |{{H_i, H_j}} - c_ij^k H_k| over 200 points: {worst:.3e}");

        // a couple of representative table entries, for orientation
        let c = algebra.constants();
        let mut shown = 0;
        'outer: for i in 0..algebra.n() {
            for j in (i + 1)..algebra.n() {
                for k in 0..algebra.n() {
                    if c.get(i, j, k) != 0.0 {
                        println!(
                            "  c[{},{}]^{} = {:+.1}",
                            i + 1,
                            j + 1,
                            k + 1,
                            c.get(i, j, k)
                        );
                        shown += 1;
                        if shown == 3 {
                            break 'outer;
                        }
                    }
                }
            }
        }
        println!();
    }
}
