//! Acceptance suite: one test per criterion, each ending in a single
//! `[criterion N] ... pass|FAIL` line. The harness's own per-test status
//! doubles as the machine-readable verdict; run with `-- --nocapture` to see
//! the measured values.
//!
//! Every expected value here is recomputed from scratch (closed forms,
//! explicit flow compositions, independent difference quotients) rather than
//! read back from the library, so these tests double as regression oracles.

use multiform::expr::Binding;
use multiform::flows::{closure_check, integrate_curve, MultiTimeCurve};
use multiform::legendre::{
    alpha_independence, lagrangian_coefficients, AlphaVector, MomentumSolver, VelocityField,
};
use multiform::liegroup::{
    integrate_group_flow, matrix_exp, mc_compatibility, moment_map_violation, theta_coefficients,
    GroupChart, LieAlgebra, StructureConstants,
};
use multiform::models::{builtin, builtin_names, su2};
use multiform::phase::{PhasePoint, SystemDefinition};

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn draw(rng: &mut ChaCha8Rng, len: usize, w: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-w..w)).collect()
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

fn fitted_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

#[test]
fn criterion_1_involutive_families_have_vanishing_brackets() {
    let mut worst_toda = 0.0_f64;
    for m in [3_usize, 4, 5] {
        let bundle = builtin(&format!("toda-{m}")).unwrap();
        let mut rng = seeded(100 + m as u64);
        for _ in 0..100 {
            let x = bundle.sample_point(&mut rng);
            let brackets = bundle.system.involutivity_matrix(&x).unwrap();
            worst_toda = brackets.iter().fold(worst_toda, |acc, v| acc.max(v.abs()));
        }
    }

    // the oscillator energy commutes with each angular generator separately
    let bundle = builtin("ho-su2").unwrap();
    let mut rng = seeded(109);
    let mut worst_ho = 0.0_f64;
    for _ in 0..100 {
        let x = bundle.sample_point(&mut rng);
        let brackets = bundle.system.involutivity_matrix(&x).unwrap();
        for k in 1..4 {
            worst_ho = worst_ho.max(brackets[(0, k)].abs());
        }
    }

    let pass = worst_toda < 1e-9 && worst_ho < 1e-11;
    println!(
        "[criterion 1] toda 3/4/5 brackets max {worst_toda:.3e} (tol 1e-9), oscillator {{H,J_i}} max {worst_ho:.3e} (tol 1e-11) .. {}",
        verdict(pass)
    );
    assert!(pass, "toda {worst_toda:.3e}, oscillator {worst_ho:.3e}");
}

#[test]
fn criterion_2_moment_map_holds_for_group_bundles() {
    let mut worst = 0.0_f64;
    for name in ["ho-su2", "conformal", "lorentz"] {
        let bundle = builtin(name).unwrap();
        let algebra = bundle.algebra.as_ref().unwrap();
        let mut rng = seeded(200);
        for _ in 0..100 {
            let x = bundle.sample_point(&mut rng);
            let violation = moment_map_violation(&bundle.system, algebra, &x).unwrap();
            worst = worst.max(violation);
        }
    }
    let pass = worst < 1e-10;
    println!(
        "[criterion 2] bracket vs structure constants max {worst:.3e} over 3 bundles x 100 points (tol 1e-10) .. {}",
        verdict(pass)
    );
    assert!(pass, "worst {worst:.3e}");
}

#[test]
fn criterion_3_action_closure_with_convergence_order_and_negative_control() {
    let bundle = builtin("toda-3").unwrap();
    let mut rng = seeded(300);
    let x0 = bundle.sample_point(&mut rng);
    let up_then_over =
        MultiTimeCurve::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
    let over_then_up =
        MultiTimeCurve::new(vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();

    let dense = closure_check(&bundle.system, &x0, &up_then_over, &over_then_up, 4000).unwrap();
    let tight = dense.endpoint_gap < 1e-6 && dense.action_gap < 1e-6;

    // both gaps are pure integrator truncation, so they must fall off as
    // the fourth power of the step count
    let mut ln_n = Vec::new();
    let mut ln_endpoint = Vec::new();
    let mut ln_action = Vec::new();
    for n in [100_usize, 200, 400] {
        let coarse =
            closure_check(&bundle.system, &x0, &up_then_over, &over_then_up, n).unwrap();
        ln_n.push((n as f64).ln());
        ln_endpoint.push(coarse.endpoint_gap.ln());
        ln_action.push(coarse.action_gap.ln());
    }
    let slope_endpoint = fitted_slope(&ln_n, &ln_endpoint);
    let slope_action = fitted_slope(&ln_n, &ln_action);
    let slopes_ok = (slope_endpoint + 4.0).abs() <= 0.5 && (slope_action + 4.0).abs() <= 0.5;

    // negative control: translation flows commute pointwise, so the
    // endpoint gap is exactly zero, while the action stays path-dependent.
    // Composing the two segment maps by hand: the first family shifts q by
    // the elapsed t1 at constant p, the second shifts p by -t2 at constant
    // q. Along q-first the action picks up -(q0 + 1), along p-first -q0.
    let control = SystemDefinition {
        m: 1,
        n: 2,
        hamiltonians: vec!["p1".into(), "q1".into()],
        names: vec![],
        parameters: Default::default(),
    }
    .to_system()
    .unwrap();
    let (p0, q0) = (0.37, -0.81);
    let x0c = PhasePoint::new(vec![p0], vec![q0]).unwrap();
    let report = closure_check(&control, &x0c, &up_then_over, &over_then_up, 400).unwrap();
    let control_ok = report.endpoint_gap < 1e-6
        && (report.action_a - (-(q0 + 1.0))).abs() < 1e-6
        && (report.action_b - (-q0)).abs() < 1e-6
        && (report.action_gap - 1.0).abs() < 1e-6;

    let pass = tight && slopes_ok && control_ok;
    println!(
        "[criterion 3] staircase gaps endpoint {:.3e} action {:.3e} (tol 1e-6), slopes {slope_endpoint:.2}/{slope_action:.2} (want -4 +/- 0.5), control endpoint {:.3e} action gap {:.6} .. {}",
        dense.endpoint_gap,
        dense.action_gap,
        report.endpoint_gap,
        report.action_gap,
        verdict(pass)
    );
    assert!(
        pass,
        "tight={tight} slopes=({slope_endpoint:.2},{slope_action:.2}) control={control_ok}"
    );
}

#[test]
fn criterion_4_newton_momenta_match_closed_forms() {
    // quadratic family: the contracted relation is linear, with solution
    // p = v1 + beta (v2 - eps q), (eps q) = (q2, -q1)
    let ho = builtin("ho").unwrap();
    let mut worst_ho = 0.0_f64;
    for beta in [0.0, 0.3, 1.0] {
        let solver = MomentumSolver::new(
            &ho.system,
            AlphaVector::new(vec![1.0, beta]).unwrap(),
        )
        .unwrap();
        let mut rng = seeded(401);
        for _ in 0..50 {
            let q = draw(&mut rng, 2, 2.0);
            let v1 = draw(&mut rng, 2, 2.0);
            let v2 = draw(&mut rng, 2, 2.0);
            let eps_q = [q[1], -q[0]];
            let expected: Vec<f64> = (0..2)
                .map(|mu| v1[mu] + beta * (v2[mu] - eps_q[mu]))
                .collect();
            let vf = VelocityField::new(q, vec![v1, v2]).unwrap();
            let solution = solver.solve(&vf, None).unwrap();
            for (got, want) in solution.p.iter().zip(&expected) {
                worst_ho = worst_ho.max((got - want).abs());
            }
        }
    }

    // toda pair: per coordinate the contracted relation is quadratic,
    // beta p^2 + p = A with A = v1 + beta (v2 - E+ - E-); the flow branch is
    // p = 2A / (1 + sqrt(1 + 4 beta A)). Draws whose discriminant dips
    // toward the fold are resampled, matching the guard disc > 0.04.
    let toda = builtin("toda-3").unwrap();
    let beta = 0.1;
    let solver = MomentumSolver::new(
        &toda.system,
        AlphaVector::new(vec![1.0, beta]).unwrap(),
    )
    .unwrap();
    let mut rng = seeded(402);
    let mut worst_toda = 0.0_f64;
    let mut accepted = 0;
    while accepted < 50 {
        let q = draw(&mut rng, 3, 2.0);
        let v1 = draw(&mut rng, 3, 2.0);
        let v2 = draw(&mut rng, 3, 2.0);
        let wrap = |i: isize| ((i + 3) % 3) as usize;
        let mut expected = Vec::with_capacity(3);
        let mut folded = false;
        for mu in 0..3_isize {
            let e_plus = (q[wrap(mu + 1)] - q[wrap(mu)]).exp();
            let e_minus = (q[wrap(mu)] - q[wrap(mu - 1)]).exp();
            let a = v1[wrap(mu)] + beta * (v2[wrap(mu)] - e_plus - e_minus);
            let disc = 1.0 + 4.0 * beta * a;
            if disc <= 0.04 {
                folded = true;
                break;
            }
            expected.push(2.0 * a / (1.0 + disc.sqrt()));
        }
        if folded {
            continue;
        }
        accepted += 1;
        let vf = VelocityField::new(q, vec![v1, v2]).unwrap();
        let solution = solver.solve(&vf, None).unwrap();
        for (got, want) in solution.p.iter().zip(&expected) {
            worst_toda = worst_toda.max((got - want).abs());
        }
    }

    // recovered momenta cannot depend on which time direction was used
    let mut rng = seeded(403);
    let alphas = [
        AlphaVector::new(vec![1.0, 0.0]).unwrap(),
        AlphaVector::new(vec![1.0, 0.1]).unwrap(),
        AlphaVector::new(vec![1.0, -0.05]).unwrap(),
        AlphaVector::new(vec![1.0, 0.2]).unwrap(),
    ];
    let mut worst_alpha = 0.0_f64;
    for _ in 0..20 {
        let x = toda.sample_point(&mut rng);
        let vf = VelocityField::on_shell(&toda.system, &x).unwrap();
        let gap = alpha_independence(&toda.system, &vf, &alphas).unwrap();
        worst_alpha = worst_alpha.max(gap);
    }

    // momenta -> velocities -> Lagrangians -> momenta -> Hamiltonian values
    let mut worst_roundtrip = 0.0_f64;
    for (bundle, seed) in [(&ho, 404_u64), (&toda, 405)] {
        let solver = MomentumSolver::new(
            &bundle.system,
            AlphaVector::new(vec![1.0, 0.0]).unwrap(),
        )
        .unwrap();
        let mut rng = seeded(seed);
        for _ in 0..20 {
            let x = bundle.sample_point(&mut rng);
            let roundtrip = solver.roundtrip(&x).unwrap();
            worst_roundtrip = worst_roundtrip.max(roundtrip.hamiltonian_gap);
        }
    }

    let pass = worst_ho < 1e-12 && worst_toda < 1e-10 && worst_alpha < 1e-10
        && worst_roundtrip < 1e-6;
    println!(
        "[criterion 4] oscillator closed form {worst_ho:.3e} (tol 1e-12), toda branch {worst_toda:.3e} (tol 1e-10), alpha independence {worst_alpha:.3e} (tol 1e-10), roundtrip {worst_roundtrip:.3e} (tol 1e-6) .. {}",
        verdict(pass)
    );
    assert!(
        pass,
        "ho {worst_ho:.3e} toda {worst_toda:.3e} alpha {worst_alpha:.3e} roundtrip {worst_roundtrip:.3e}"
    );
}

#[test]
fn criterion_5_zero_coupling_lagrangians_match_references() {
    let bundle = builtin("toda-3").unwrap();
    let mut rng = seeded(500);
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let q = draw(&mut rng, 3, 2.0);
        let v1 = draw(&mut rng, 3, 2.0);
        let v2 = draw(&mut rng, 3, 2.0);
        // at zero coupling the first-flow momenta are the first velocities
        let vf = VelocityField::new(q.clone(), vec![v1.clone(), v2.clone()]).unwrap();
        let coeffs = lagrangian_coefficients(&bundle.system, &vf, &v1).unwrap();

        let wrap = |i: isize| ((i + 3) % 3) as usize;
        let bond: Vec<f64> = (0..3_isize)
            .map(|mu| (q[wrap(mu)] - q[wrap(mu - 1)]).exp())
            .collect();
        let l1_ref: f64 = (0..3).map(|mu| 0.5 * v1[mu] * v1[mu] - bond[mu]).sum();
        let l2_ref: f64 = (0..3_isize)
            .map(|mu| {
                v1[wrap(mu)] * v2[wrap(mu)] - v1[wrap(mu)].powi(3) / 3.0
                    - (v1[wrap(mu)] + v1[wrap(mu - 1)]) * bond[wrap(mu)]
            })
            .sum();
        worst = worst
            .max((coeffs[0] - l1_ref).abs())
            .max((coeffs[1] - l2_ref).abs());
    }
    let pass = worst < 1e-12;
    println!(
        "[criterion 5] zero-coupling L1/L2 vs closed forms max {worst:.3e} over 50 draws (tol 1e-12) .. {}",
        verdict(pass)
    );
    assert!(pass, "worst {worst:.3e}");
}

#[test]
fn criterion_6_chart_coefficients_and_flatness() {
    // upper-triangular pair: [e0, e1] = e0 in the 2x2 realization
    let constants = StructureConstants::from_lower_entries(2, &[(0, 1, 0, 1.0)]).unwrap();
    let basis = vec![
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, 0.5]),
    ];
    let affine = LieAlgebra::new(constants, basis).unwrap();
    let affine_chart = GroupChart::product(vec![1, 0]);

    let mut rng = seeded(600);
    let mut worst_theta = 0.0_f64;
    for _ in 0..50 {
        let tau = draw(&mut rng, 2, 1.5);
        let theta = theta_coefficients(&affine, &affine_chart, &tau)
            .unwrap()
            .theta;
        let expected = [[1.0, -tau[0]], [0.0, 1.0]];
        for j in 0..2 {
            for k in 0..2 {
                worst_theta = worst_theta.max((theta[(j, k)] - expected[j][k]).abs());
            }
        }
    }

    let su2_algebra = su2();
    let su2_chart = GroupChart::product(vec![0, 1, 2]);
    let mut worst_mc = 0.0_f64;
    for _ in 0..50 {
        let tau = draw(&mut rng, 2, 1.0);
        worst_mc =
            worst_mc.max(mc_compatibility(&affine, &affine_chart, &tau, 1e-6).unwrap());
    }
    for _ in 0..50 {
        let tau = draw(&mut rng, 3, 1.0);
        worst_mc =
            worst_mc.max(mc_compatibility(&su2_algebra, &su2_chart, &tau, 1e-6).unwrap());
    }

    let pass = worst_theta < 1e-12 && worst_mc < 1e-7;
    println!(
        "[criterion 6] shear-chart coefficients vs [[1,-t],[0,1]] max {worst_theta:.3e} (tol 1e-12), flatness residual max {worst_mc:.3e} (tol 1e-7) .. {}",
        verdict(pass)
    );
    assert!(pass, "theta {worst_theta:.3e} mc {worst_mc:.3e}");
}

#[test]
fn criterion_7_conformal_invariants_along_group_paths() {
    let bundle = builtin("conformal").unwrap();
    let algebra = bundle.algebra.as_ref().unwrap();
    let chart = bundle.chart.as_ref().unwrap();
    let mut rng = seeded(700);
    let mut worst = 0.0_f64;
    for _ in 0..10 {
        let x0 = bundle.sample_point(&mut rng);
        let mid = draw(&mut rng, 2, 0.7);
        let end = draw(&mut rng, 2, 0.7);
        let curve = MultiTimeCurve::new(vec![vec![0.0, 0.0], mid, end]).unwrap();
        let traj =
            integrate_group_flow(&bundle.system, algebra, chart, &curve, &x0, 2000).unwrap();

        // frozen from the starting point: c1 is the scaled energy, c2 the
        // dilation charge; along the flow the energy is c1 e^{-tau2} and
        // p q = 2 (c2 + tau1 c1 e^{-tau2})
        let (p0, q0) = (x0.p()[0], x0.q()[0]);
        let c1 = p0 * p0 / 2.0 + 1.0 / (q0 * q0);
        let c2 = p0 * q0 / 2.0;
        for sample in traj.samples() {
            let (p, q) = (sample.state[0], sample.state[1]);
            let (t, tau) = (sample.tau[0], sample.tau[1]);
            let energy = p * p / 2.0 + 1.0 / (q * q);
            let decayed = c1 * (-tau).exp();
            worst = worst
                .max((energy - decayed).abs())
                .max((p * q - 2.0 * (c2 + t * decayed)).abs());
        }
    }
    let pass = worst < 1e-6;
    println!(
        "[criterion 7] conformal invariants max residual {worst:.3e} over 10 paths (tol 1e-6) .. {}",
        verdict(pass)
    );
    assert!(pass, "worst {worst:.3e}");
}

#[test]
fn criterion_8_lorentz_flow_matches_the_matrix_action() {
    let bundle = builtin("lorentz").unwrap();
    let algebra = bundle.algebra.as_ref().unwrap();
    let mut rng = seeded(800);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let x0 = bundle.sample_point(&mut rng);
        let raw = draw(&mut rng, 6, 1.0);
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let t: Vec<f64> = raw.iter().map(|v| v / norm.max(1.0)).collect();

        let curve = MultiTimeCurve::new(vec![vec![0.0; 6], t.clone()]).unwrap();
        let traj = integrate_curve(&bundle.system, &curve, &x0, 2000).unwrap();
        let end = traj.endpoint();

        let mut generator = DMatrix::zeros(4, 4);
        for (k, tk) in t.iter().enumerate() {
            generator += algebra.basis_matrix(k) * *tk;
        }
        let lambda = matrix_exp(&(-&generator));
        let p_map = matrix_exp(&generator.transpose());
        for mu in 0..4 {
            let q_exact: f64 = (0..4).map(|nu| lambda[(mu, nu)] * x0.q()[nu]).sum();
            let p_exact: f64 = (0..4).map(|nu| p_map[(mu, nu)] * x0.p()[nu]).sum();
            worst = worst
                .max((end.q()[mu] - q_exact).abs())
                .max((end.p()[mu] - p_exact).abs());
        }
    }
    let pass = worst < 1e-8;
    println!(
        "[criterion 8] flowed endpoints vs exponential map max {worst:.3e} over 20 parameter draws (tol 1e-8) .. {}",
        verdict(pass)
    );
    assert!(pass, "worst {worst:.3e}");
}

#[test]
fn criterion_9_derivatives_and_jacobi_identities() {
    let h = 1e-5;
    let mut worst_grad = 0.0_f64;
    let corpus: Vec<String> = builtin_names()
        .iter()
        .map(|s| s.to_string())
        .chain(["toda-4".to_string(), "toda-5".to_string()])
        .collect();
    for name in &corpus {
        let bundle = builtin(name).unwrap();
        let sys = &bundle.system;
        let (m, n) = (sys.m(), sys.n());
        let mut rng = seeded(900);
        for _ in 0..20 {
            let x = bundle.sample_point(&mut rng);
            let state = x.state();
            let mut binding = Binding::new();
            for mu in 0..m {
                binding.set(format!("p{}", mu + 1), state[mu]);
                binding.set(format!("q{}", mu + 1), state[m + mu]);
            }
            for i in 0..n {
                for slot in 0..2 * m {
                    let symbolic = if slot < m {
                        sys.dh_dp(i)[slot].eval(&binding).unwrap()
                    } else {
                        sys.dh_dq(i)[slot - m].eval(&binding).unwrap()
                    };
                    let mut plus = state.clone();
                    let mut minus = state.clone();
                    plus[slot] += h;
                    minus[slot] -= h;
                    let difference =
                        (sys.h_value(i, &plus) - sys.h_value(i, &minus)) / (2.0 * h);
                    let gap = (symbolic - difference).abs() / symbolic.abs().max(1.0);
                    worst_grad = worst_grad.max(gap);
                }
            }
        }
    }

    let mut worst_jacobi = 0.0_f64;
    for name in ["ho-su2", "conformal", "lorentz"] {
        let bundle = builtin(name).unwrap();
        let algebra = bundle.algebra.as_ref().unwrap();
        worst_jacobi = worst_jacobi.max(algebra.constants().jacobi_violation());
    }
    worst_jacobi = worst_jacobi.max(su2().constants().jacobi_violation());

    let pass = worst_grad < 1e-6 && worst_jacobi < 1e-12;
    println!(
        "[criterion 9] symbolic vs central-difference gradients max {worst_grad:.3e} (tol 1e-6), jacobi max {worst_jacobi:.3e} (tol 1e-12) .. {}",
        verdict(pass)
    );
    assert!(pass, "grad {worst_grad:.3e} jacobi {worst_jacobi:.3e}");
}
