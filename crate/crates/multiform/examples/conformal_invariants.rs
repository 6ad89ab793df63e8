//! Flows the conformal particle over group coordinates (time, dilation) and
//! tracks the two quantities the twisted flow conserves.
//!
//! Neither the energy nor the dilation charge alone survives a path that
//! mixes the two directions; the conserved combinations pick up explicit
//! coordinate factors: e^tau2 (p^2/2m + a/q^2) and pq/2 - tau1 (p^2/2m + a/q^2).

use multiform::flows::MultiTimeCurve;
use multiform::liegroup::integrate_group_flow;
use multiform::models::builtin;
use multiform::phase::PhasePoint;

fn main() {
    let bundle = builtin("conformal").unwrap();
    let algebra = bundle.algebra.as_ref().unwrap();
    let chart = bundle.chart.as_ref().unwrap();

    let x0 = PhasePoint::new(vec![0.6], vec![1.2]).unwrap();
    let curve = MultiTimeCurve::new(vec![
        vec![0.0, 0.0],
        vec![0.5, -0.3],
        vec![0.2, 0.4],
    ])
    .unwrap();
    let traj = integrate_group_flow(&bundle.system, algebra, chart, &curve, &x0, 2000).unwrap();

    println!("path in (tau1, tau2): (0,0) -> (0.5,-0.3) -> (0.2,0.4)");
    println!("{:>5} {:>8} {:>8} {:>12} {:>12} {:>14} {:>14}",
        "s", "tau1", "tau2", "p", "q", "scaled energy", "charge");
    let m = 1;
    for sample in traj.samples().iter().step_by(250) {
        let (p, q) = (sample.state[0], sample.state[m]);
        let (t1, t2) = (sample.tau[0], sample.tau[1]);
        let energy = p * p / 2.0 + 1.0 / (q * q);
        println!(
            "{:>5.2} {:>8.4} {:>8.4} {:>12.6} {:>12.6} {:>14.9} {:>14.9}",
            sample.s,
            t1,
            t2,
            p,
            q,
            t2.exp() * energy,
            p * q / 2.0 - t1 * energy
        );
    }

    for drift in bundle.reference_drift_group(&traj).unwrap() {
        println!("{} drift over the whole path: {:.3e}", drift.name, drift.drift);
    }
}
