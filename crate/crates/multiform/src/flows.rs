//! Multi-time Hamiltonian flows and the action integral.
//!
//! A [`MultiTimeCurve`] is a piecewise-linear path `t(s)` through the
//! n-dimensional time manifold, parameterized on `s in [0, 1]` with equal
//! parameter spacing per segment. Pulling the flow equations back along it
//! gives an ODE in `s`,
//!
//! ```text
//! dq^mu/ds =  (dt^i/ds) dH_i/dp_mu
//! dp_mu/ds = -(dt^i/ds) dH_i/dq^mu
//! ```
//!
//! integrated here with classical fixed-step RK4. Because the Hamiltonians
//! are autonomous, the only `s`-dependence is the piecewise-constant velocity
//! `dt/ds`; every RK4 stage of a step therefore uses the velocity of the
//! segment containing the step midpoint. When the step count is a multiple of
//! the segment count no step straddles a kink and the integrator keeps its
//! full fourth order. The action is a composite-Simpson quadrature of the
//! one-form along the trajectory, accumulated segment by segment for the
//! same reason.

use std::io;

use crate::phase::{HamiltonianSystem, PhaseError, PhasePoint, Tangent};

#[derive(Debug, thiserror::Error)]
pub enum FlowError {
    #[error("a curve needs at least two nodes")]
    TooFewNodes,
    #[error("curve node {index} has dimension {got}, expected {expected}")]
    NodeDimension {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("curve node has a non-finite component")]
    NonFiniteNode,
    #[error("curve dimension {curve} does not match the system's {system} time directions")]
    CurveSystemMismatch { curve: usize, system: usize },
    #[error("initial point dimension {point} does not match system dimension {system}")]
    PointSystemMismatch { point: usize, system: usize },
    #[error("step count must be at least 1")]
    NoSteps,
    #[error("flow state became non-finite at s = {s}")]
    NonFiniteState { s: f64 },
    #[error("curves disagree at {which}: {a:?} vs {b:?}")]
    CurveEndpointsDiffer {
        which: &'static str,
        a: Vec<f64>,
        b: Vec<f64>,
    },
    #[error("time direction index {index} out of range for n = {n}")]
    DirectionOutOfRange { index: usize, n: usize },
    #[error(transparent)]
    Phase(#[from] PhaseError),
}

/// Piecewise-linear path through the time manifold, `s in [0, 1]`, with the
/// k-th of K segments covering `[k/K, (k+1)/K]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTimeCurve {
    nodes: Vec<Vec<f64>>,
}

impl MultiTimeCurve {
    pub fn new(nodes: Vec<Vec<f64>>) -> Result<Self, FlowError> {
        if nodes.len() < 2 {
            return Err(FlowError::TooFewNodes);
        }
        let dim = nodes[0].len();
        for (index, node) in nodes.iter().enumerate() {
            if node.len() != dim {
                return Err(FlowError::NodeDimension {
                    index,
                    got: node.len(),
                    expected: dim,
                });
            }
            if node.iter().any(|v| !v.is_finite()) {
                return Err(FlowError::NonFiniteNode);
            }
        }
        Ok(MultiTimeCurve { nodes })
    }

    /// A straight run from the origin along the i-th time axis (0-based).
    pub fn along_axis(n: usize, index: usize, length: f64) -> Result<Self, FlowError> {
        if index >= n {
            return Err(FlowError::DirectionOutOfRange { index, n });
        }
        let mut end = vec![0.0; n];
        end[index] = length;
        MultiTimeCurve::new(vec![vec![0.0; n], end])
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].len()
    }

    pub fn segments(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    /// Exact position; `s` outside `[0, 1]` is clamped.
    pub fn position(&self, s: f64) -> Vec<f64> {
        let k = self.segments() as f64;
        let s = s.clamp(0.0, 1.0);
        let seg = ((s * k) as usize).min(self.segments() - 1);
        let u = s * k - seg as f64;
        self.nodes[seg]
            .iter()
            .zip(self.nodes[seg + 1].iter())
            .map(|(a, b)| a * (1.0 - u) + b * u)
            .collect()
    }

    /// `dt/ds` on segment `seg`.
    pub fn segment_velocity(&self, seg: usize) -> Vec<f64> {
        let k = self.segments() as f64;
        self.nodes[seg]
            .iter()
            .zip(self.nodes[seg + 1].iter())
            .map(|(a, b)| (b - a) * k)
            .collect()
    }

    fn segment_containing(&self, s: f64) -> usize {
        ((s * self.segments() as f64) as usize).min(self.segments() - 1)
    }

    /// The same path with an interpolated node inserted inside segment `seg`;
    /// reparameterizes but does not move the path.
    pub fn with_midpoint(&self, seg: usize) -> MultiTimeCurve {
        let mid: Vec<f64> = self.nodes[seg]
            .iter()
            .zip(self.nodes[seg + 1].iter())
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let mut nodes = self.nodes.clone();
        nodes.insert(seg + 1, mid);
        MultiTimeCurve { nodes }
    }

    /// The reversed path (endpoints swapped).
    pub fn reversed(&self) -> MultiTimeCurve {
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        MultiTimeCurve { nodes }
    }
}

/// One recorded point of an integrated trajectory.
#[derive(Debug, Clone)]
pub struct Sample {
    pub s: f64,
    /// Exact curve position `t(s)`.
    pub t: Vec<f64>,
    /// Phase state in layout `[p1..pm, q1..qm]`.
    pub state: Vec<f64>,
}

/// A flow integrated along a curve: `steps + 1` samples at uniform `s`,
/// grouped into runs that share a time velocity.
#[derive(Debug, Clone)]
pub struct Trajectory {
    samples: Vec<Sample>,
    /// `(first_sample, last_sample, dt/ds)` per constant-velocity run.
    runs: Vec<(usize, usize, Vec<f64>)>,
    steps: usize,
}

impl Trajectory {
    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn endpoint(&self) -> PhasePoint {
        PhasePoint::from_state(&self.samples.last().expect("non-empty").state)
    }

    pub fn endpoint_state(&self) -> &[f64] {
        &self.samples.last().expect("non-empty").state
    }

    /// Constant-velocity runs `(first sample, last sample, dt/ds)`.
    pub fn runs(&self) -> &[(usize, usize, Vec<f64>)] {
        &self.runs
    }
}

/// `dy/ds` at `state` for time velocity `vel`, written into `out`. Also the
/// kernel of the group-flow integrator, which passes chart-twisted weights
/// as the velocity.
pub(crate) fn flow_rhs(sys: &HamiltonianSystem, vel: &[f64], state: &[f64], out: &mut [f64]) {
    let m = sys.m();
    for mu in 0..m {
        let mut dp = 0.0;
        let mut dq = 0.0;
        for (i, v) in vel.iter().enumerate() {
            if *v != 0.0 {
                dp -= v * sys.dh_dq_value(i, mu, state);
                dq += v * sys.dh_dp_value(i, mu, state);
            }
        }
        out[mu] = dp;
        out[m + mu] = dq;
    }
}

/// Integrates the pulled-back flow from `x0` with `steps` uniform RK4 steps.
/// Aborts with the offending `s` if the state leaves the finite range.
pub fn integrate_curve(
    sys: &HamiltonianSystem,
    curve: &MultiTimeCurve,
    x0: &PhasePoint,
    steps: usize,
) -> Result<Trajectory, FlowError> {
    if curve.dim() != sys.n() {
        return Err(FlowError::CurveSystemMismatch {
            curve: curve.dim(),
            system: sys.n(),
        });
    }
    if x0.dim() != sys.m() {
        return Err(FlowError::PointSystemMismatch {
            point: x0.dim(),
            system: sys.m(),
        });
    }
    if steps == 0 {
        return Err(FlowError::NoSteps);
    }

    let dim = 2 * sys.m();
    let h = 1.0 / steps as f64;
    let mut y = x0.state();
    let mut samples = Vec::with_capacity(steps + 1);
    let mut runs: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    samples.push(Sample {
        s: 0.0,
        t: curve.position(0.0),
        state: y.clone(),
    });

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut stage = vec![0.0; dim];

    for step in 0..steps {
        let s = step as f64 * h;
        let seg = curve.segment_containing(s + 0.5 * h);
        let vel = curve.segment_velocity(seg);

        match runs.last_mut() {
            Some((_, last, v)) if *v == vel => *last = step + 1,
            _ => runs.push((step, step + 1, vel.clone())),
        }

        flow_rhs(sys, &vel, &y, &mut k1);
        for i in 0..dim {
            stage[i] = y[i] + 0.5 * h * k1[i];
        }
        flow_rhs(sys, &vel, &stage, &mut k2);
        for i in 0..dim {
            stage[i] = y[i] + 0.5 * h * k2[i];
        }
        flow_rhs(sys, &vel, &stage, &mut k3);
        for i in 0..dim {
            stage[i] = y[i] + h * k3[i];
        }
        flow_rhs(sys, &vel, &stage, &mut k4);
        for i in 0..dim {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }

        let s_next = (step + 1) as f64 * h;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(FlowError::NonFiniteState { s: s_next });
        }
        samples.push(Sample {
            s: s_next,
            t: curve.position(s_next),
            state: y.clone(),
        });
    }

    Ok(Trajectory {
        samples,
        runs,
        steps,
    })
}

/// Largest violation of the tangency condition
/// `0 = (dq^mu/ds) dH_i/dq^mu + (dp_mu/ds) dH_i/dp_mu` along the trajectory,
/// with the ds-derivatives recomputed from the flow right-hand side. For a
/// family in involution this vanishes identically; its size equals the
/// largest `|{H_j, H_i} dt^j/ds|` obstruction.
pub fn ve3_residual(sys: &HamiltonianSystem, traj: &Trajectory) -> f64 {
    let m = sys.m();
    let mut rhs = vec![0.0; 2 * m];
    let mut worst = 0.0_f64;
    for (first, last, vel) in traj.runs() {
        for sample in &traj.samples()[*first..=*last] {
            flow_rhs(sys, vel, &sample.state, &mut rhs);
            for i in 0..sys.n() {
                let mut r = 0.0;
                for mu in 0..m {
                    r += rhs[m + mu] * sys.dh_dq_value(i, mu, &sample.state)
                        + rhs[mu] * sys.dh_dp_value(i, mu, &sample.state);
                }
                worst = worst.max(r.abs());
            }
        }
    }
    worst
}

/// Simpson weight accumulation for one run of uniformly spaced values.
/// Uses 3/8 on the final three intervals when the count is odd.
fn simpson(values: &[f64], h: f64) -> f64 {
    let intervals = values.len() - 1;
    if intervals == 0 {
        return 0.0;
    }
    if intervals == 1 {
        return 0.5 * h * (values[0] + values[1]);
    }
    let (even_part, tail) = if intervals.is_multiple_of(2) {
        (intervals, 0)
    } else if intervals >= 3 {
        (intervals - 3, 3)
    } else {
        (0, 0)
    };
    let mut total = 0.0;
    if even_part > 0 {
        let mut acc = values[0] + values[even_part];
        for (k, v) in values[1..even_part].iter().enumerate() {
            acc += if k % 2 == 0 { 4.0 * v } else { 2.0 * v };
        }
        total += acc * h / 3.0;
    }
    if tail == 3 {
        let v = &values[even_part..];
        total += 3.0 * h / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3]);
    }
    total
}

/// Action `S = integral of (p_mu dq^mu/ds - H_i dt^i/ds) ds` along the
/// trajectory. The integrand is evaluated with the analytic flow velocity at
/// each sample and summed with composite Simpson per constant-velocity run,
/// so the quadrature never spans a kink of the curve.
pub fn action(sys: &HamiltonianSystem, traj: &Trajectory) -> Result<f64, FlowError> {
    let m = sys.m();
    let h = 1.0 / traj.steps() as f64;
    let mut rhs = vec![0.0; 2 * m];
    let mut total = 0.0;
    for (first, last, vel) in traj.runs() {
        let mut values = Vec::with_capacity(last - first + 1);
        for sample in &traj.samples()[*first..=*last] {
            flow_rhs(sys, vel, &sample.state, &mut rhs);
            let x = PhasePoint::from_state(&sample.state);
            let tangent = Tangent {
                dp: rhs[..m].to_vec(),
                dq: rhs[m..].to_vec(),
                dt: vel.clone(),
            };
            values.push(sys.one_form_eval(&x, &tangent)?);
        }
        total += simpson(&values, h);
    }
    Ok(total)
}

/// Comparison of two curves with shared endpoints: the action gap detects
/// failures of closure even when the endpoint flows happen to commute.
#[derive(Debug, Clone)]
pub struct ClosureReport {
    pub action_a: f64,
    pub action_b: f64,
    /// `|S_A - S_B|`
    pub action_gap: f64,
    /// max-norm distance of the two endpoint states
    pub endpoint_gap: f64,
    pub endpoint_a: PhasePoint,
    pub endpoint_b: PhasePoint,
}

fn max_norm_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn closure_check(
    sys: &HamiltonianSystem,
    x0: &PhasePoint,
    curve_a: &MultiTimeCurve,
    curve_b: &MultiTimeCurve,
    steps: usize,
) -> Result<ClosureReport, FlowError> {
    for (which, sa, sb) in [
        ("the start", curve_a.position(0.0), curve_b.position(0.0)),
        ("the end", curve_a.position(1.0), curve_b.position(1.0)),
    ] {
        if max_norm_gap(&sa, &sb) > 1e-12 {
            return Err(FlowError::CurveEndpointsDiffer { which, a: sa, b: sb });
        }
    }
    let traj_a = integrate_curve(sys, curve_a, x0, steps)?;
    let traj_b = integrate_curve(sys, curve_b, x0, steps)?;
    let action_a = action(sys, &traj_a)?;
    let action_b = action(sys, &traj_b)?;
    Ok(ClosureReport {
        action_a,
        action_b,
        action_gap: (action_a - action_b).abs(),
        endpoint_gap: max_norm_gap(traj_a.endpoint_state(), traj_b.endpoint_state()),
        endpoint_a: traj_a.endpoint(),
        endpoint_b: traj_b.endpoint(),
    })
}

/// Endpoint mismatch of running time direction `i` for span `a` then `j` for
/// span `b`, against the opposite order.
#[derive(Debug, Clone)]
pub struct CommutationReport {
    /// max-norm distance between the two final states
    pub gap: f64,
    pub endpoint_ij: PhasePoint,
    pub endpoint_ji: PhasePoint,
}

pub fn flow_commutation(
    sys: &HamiltonianSystem,
    i: usize,
    j: usize,
    a: f64,
    b: f64,
    x0: &PhasePoint,
    steps: usize,
) -> Result<CommutationReport, FlowError> {
    let n = sys.n();
    for index in [i, j] {
        if index >= n {
            return Err(FlowError::DirectionOutOfRange { index, n });
        }
    }
    let mut corner_ij = vec![0.0; n];
    corner_ij[i] = a;
    let mut end = corner_ij.clone();
    end[j] += b;
    let mut corner_ji = vec![0.0; n];
    corner_ji[j] = b;

    let curve_ij = MultiTimeCurve::new(vec![vec![0.0; n], corner_ij, end.clone()])?;
    let curve_ji = MultiTimeCurve::new(vec![vec![0.0; n], corner_ji, end])?;
    let traj_ij = integrate_curve(sys, &curve_ij, x0, steps)?;
    let traj_ji = integrate_curve(sys, &curve_ji, x0, steps)?;
    Ok(CommutationReport {
        gap: max_norm_gap(traj_ij.endpoint_state(), traj_ji.endpoint_state()),
        endpoint_ij: traj_ij.endpoint(),
        endpoint_ji: traj_ji.endpoint(),
    })
}

/// Writes the trajectory table `s,t1..tn,q1..qm,p1..pm,H1..Hn`.
pub fn write_trajectory_csv<W: io::Write>(
    sys: &HamiltonianSystem,
    traj: &Trajectory,
    mut out: W,
) -> io::Result<()> {
    let m = sys.m();
    let n = sys.n();
    let mut header = String::from("s");
    for i in 1..=n {
        header.push_str(&format!(",t{i}"));
    }
    for mu in 1..=m {
        header.push_str(&format!(",q{mu}"));
    }
    for mu in 1..=m {
        header.push_str(&format!(",p{mu}"));
    }
    for i in 1..=n {
        header.push_str(&format!(",H{i}"));
    }
    writeln!(out, "{header}")?;
    for sample in traj.samples() {
        let mut line = format!("{}", sample.s);
        for v in &sample.t {
            line.push_str(&format!(",{v}"));
        }
        for v in &sample.state[m..] {
            line.push_str(&format!(",{v}"));
        }
        for v in &sample.state[..m] {
            line.push_str(&format!(",{v}"));
        }
        for h in sys.h_values(&sample.state) {
            line.push_str(&format!(",{h}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expression;

    fn parse(src: &str) -> Expression {
        Expression::parse(src).unwrap()
    }

    fn oscillator_pair() -> HamiltonianSystem {
        HamiltonianSystem::new(
            2,
            vec![
                parse("(p1^2 + q1^2 + p2^2 + q2^2)/2"),
                parse("p1*q2 - p2*q1"),
            ],
            vec!["H".into(), "J2".into()],
        )
        .unwrap()
    }

    fn oscillator_1d() -> HamiltonianSystem {
        HamiltonianSystem::new(1, vec![parse("p1^2/2 + q1^2/2")], vec![]).unwrap()
    }

    fn toda(m: usize) -> HamiltonianSystem {
        let wrap = |mu: usize| if mu == 0 { m } else { mu };
        let mut h1 = String::new();
        let mut h2 = String::new();
        for mu in 1..=m {
            let prev = wrap(mu - 1);
            if mu > 1 {
                h1.push_str(" + ");
                h2.push_str(" + ");
            }
            h1.push_str(&format!("p{mu}^2/2 + exp(q{mu} - q{prev})"));
            h2.push_str(&format!(
                "p{mu}^3/3 + (p{mu} + p{prev})*exp(q{mu} - q{prev})"
            ));
        }
        HamiltonianSystem::new(m, vec![parse(&h1), parse(&h2)], vec![]).unwrap()
    }

    /// Independent endpoint oracle for the 1-d oscillator: rotation by theta.
    fn rotate(p0: f64, q0: f64, theta: f64) -> (f64, f64) {
        (
            p0 * theta.cos() - q0 * theta.sin(),
            q0 * theta.cos() + p0 * theta.sin(),
        )
    }

    /// Independent action oracle for the same flow, from the closed-form
    /// integral of p^2 - H along the rotation.
    fn rotation_action(p0: f64, q0: f64, theta: f64) -> f64 {
        (p0 * p0 - q0 * q0) * (2.0 * theta).sin() / 4.0
            - p0 * q0 * (1.0 - (2.0 * theta).cos()) / 2.0
    }

    #[test]
    fn curve_validation_and_geometry() {
        assert!(matches!(
            MultiTimeCurve::new(vec![vec![0.0, 0.0]]),
            Err(FlowError::TooFewNodes)
        ));
        assert!(matches!(
            MultiTimeCurve::new(vec![vec![0.0], vec![0.0, 1.0]]),
            Err(FlowError::NodeDimension { index: 1, .. })
        ));
        let staircase =
            MultiTimeCurve::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(staircase.segments(), 2);
        assert_eq!(staircase.position(0.25), vec![0.5, 0.0]);
        assert_eq!(staircase.position(0.75), vec![1.0, 0.5]);
        assert_eq!(staircase.segment_velocity(0), vec![2.0, 0.0]);
        assert_eq!(staircase.segment_velocity(1), vec![0.0, 2.0]);
    }

    #[test]
    fn oscillator_flow_matches_rotation() {
        let sys = oscillator_1d();
        let theta = 1.3;
        let curve = MultiTimeCurve::along_axis(1, 0, theta).unwrap();
        let x0 = PhasePoint::new(vec![0.7], vec![-1.1]).unwrap();
        let traj = integrate_curve(&sys, &curve, &x0, 2000).unwrap();
        let (pe, qe) = rotate(0.7, -1.1, theta);
        let end = traj.endpoint();
        assert!((end.p()[0] - pe).abs() < 1e-11);
        assert!((end.q()[0] - qe).abs() < 1e-11);
    }

    #[test]
    fn reversing_the_curve_returns_to_the_start() {
        let sys = toda(3);
        let curve =
            MultiTimeCurve::new(vec![vec![0.0, 0.0], vec![0.6, 0.0], vec![0.6, 0.4]]).unwrap();
        let x0 = PhasePoint::new(vec![0.3, -0.2, 0.1], vec![0.2, 0.0, -0.4]).unwrap();
        let forward = integrate_curve(&sys, &curve, &x0, 2000).unwrap();
        let back = integrate_curve(&sys, &curve.reversed(), &forward.endpoint(), 2000).unwrap();
        for (a, b) in back.endpoint_state().iter().zip(x0.state().iter()) {
            assert!((a - b).abs() < 5e-9, "reversibility gap {}", (a - b).abs());
        }
    }

    #[test]
    fn hamiltonians_are_conserved_along_involutive_flows() {
        let sys = toda(3);
        let curve =
            MultiTimeCurve::new(vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![0.5, 0.3]]).unwrap();
        let x0 = PhasePoint::new(vec![0.4, -0.1, 0.2], vec![0.1, 0.3, -0.2]).unwrap();
        let traj = integrate_curve(&sys, &curve, &x0, 2000).unwrap();
        let start = sys.h_values(&x0.state());
        for sample in traj.samples() {
            let now = sys.h_values(&sample.state);
            for (a, b) in now.iter().zip(start.iter()) {
                assert!((a - b).abs() <= 1e-7 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn endpoint_error_decays_at_fourth_order() {
        let sys = oscillator_1d();
        let curve = MultiTimeCurve::along_axis(1, 0, 2.0).unwrap();
        let x0 = PhasePoint::new(vec![0.9], vec![0.5]).unwrap();
        let reference = integrate_curve(&sys, &curve, &x0, 4000).unwrap();
        let mut errors = Vec::new();
        for steps in [100, 200, 400] {
            let traj = integrate_curve(&sys, &curve, &x0, steps).unwrap();
            errors.push(max_norm_gap(
                traj.endpoint_state(),
                reference.endpoint_state(),
            ));
        }
        for pair in errors.windows(2) {
            let slope = (pair[0] / pair[1]).log2();
            assert!(
                (slope - 4.0).abs() < 0.5,
                "observed convergence slope {slope}"
            );
        }
    }

    #[test]
    fn action_matches_the_rotation_oracle() {
        let sys = oscillator_1d();
        let theta = 1.3;
        let curve = MultiTimeCurve::along_axis(1, 0, theta).unwrap();
        let x0 = PhasePoint::new(vec![0.7], vec![-1.1]).unwrap();
        let traj = integrate_curve(&sys, &curve, &x0, 2000).unwrap();
        let s = action(&sys, &traj).unwrap();
        assert!((s - rotation_action(0.7, -1.1, theta)).abs() < 1e-10);
    }

    #[test]
    fn redundant_midpoint_node_leaves_the_action_unchanged() {
        let sys = toda(3);
        let curve =
            MultiTimeCurve::new(vec![vec![0.0, 0.0], vec![0.8, 0.0], vec![0.8, 0.5]]).unwrap();
        let refined = curve.with_midpoint(0);
        assert_eq!(refined.segments(), 3);
        let x0 = PhasePoint::new(vec![0.4, -0.1, 0.2], vec![0.1, 0.3, -0.2]).unwrap();
        // 1200 is divisible by both 2 and 3 segments, so both runs align
        let s0 = action(&sys, &integrate_curve(&sys, &curve, &x0, 1200).unwrap()).unwrap();
        let s1 = action(&sys, &integrate_curve(&sys, &refined, &x0, 1200).unwrap()).unwrap();
        assert!(
            (s0 - s1).abs() < 1e-10,
            "reparameterization changed action by {}",
            (s0 - s1).abs()
        );
    }

    #[test]
    fn ve3_residual_vanishes_in_involution_and_detects_obstructions() {
        let sys = oscillator_pair();
        let curve =
            MultiTimeCurve::new(vec![vec![0.0, 0.0], vec![0.7, 0.0], vec![0.7, 0.5]]).unwrap();
        let x0 = PhasePoint::new(vec![0.6, -0.3], vec![0.2, 0.8]).unwrap();
        let traj = integrate_curve(&sys, &curve, &x0, 500).unwrap();
        assert!(ve3_residual(&sys, &traj) < 1e-9);

        // H1 = p1, H2 = q1 has {H1, H2} = 1, so the first leg (dt1/ds = 1.4)
        // leaves a residual of exactly 1.4 on H2, the larger of the two legs
        let bad = HamiltonianSystem::new(1, vec![parse("p1"), parse("q1")], vec![]).unwrap();
        let traj = integrate_curve(&bad, &curve, &PhasePoint::new(vec![0.1], vec![0.2]).unwrap(), 100)
            .unwrap();
        let r = ve3_residual(&bad, &traj);
        assert!((r - 1.4).abs() < 1e-12, "residual {r}");
    }

    #[test]
    fn closure_gaps_vanish_for_involutive_staircases() {
        let sys = toda(3);
        let a = MultiTimeCurve::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let b = MultiTimeCurve::new(vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let x0 = PhasePoint::new(vec![0.3, -0.2, 0.1], vec![0.2, 0.0, -0.4]).unwrap();
        let report = closure_check(&sys, &x0, &a, &b, 2000).unwrap();
        assert!(report.action_gap < 1e-6, "action gap {}", report.action_gap);
        assert!(
            report.endpoint_gap < 1e-6,
            "endpoint gap {}",
            report.endpoint_gap
        );
    }

    #[test]
    fn closure_check_rejects_mismatched_endpoints() {
        let sys = oscillator_pair();
        let a = MultiTimeCurve::new(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let b = MultiTimeCurve::new(vec![vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let x0 = PhasePoint::new(vec![0.1, 0.1], vec![0.1, 0.1]).unwrap();
        assert!(matches!(
            closure_check(&sys, &x0, &a, &b, 100),
            Err(FlowError::CurveEndpointsDiffer { .. })
        ));
    }

    /// Closed-form composition oracle for the translation pair H1 = p1,
    /// H2 = q1: the t1-flow shifts q1 by its span, the t2-flow shifts p1 by
    /// minus its span, and the leg actions are read off the constant
    /// integrands. On the q-shift leg p dq cancels H1 dt1 exactly, so only
    /// the -H2 dt2 leg contributes, evaluated at whatever q the path has
    /// reached: q0 + 1 if the shift came first, q0 if it comes last.
    fn translation_pair_composition(q0: f64) -> (f64, f64, f64) {
        let s_a = -(q0 + 1.0);
        let s_b = -q0;
        // both orders land on (p0 - 1, q0 + 1)
        let endpoint_gap = 0.0;
        (s_a, s_b, endpoint_gap)
    }

    #[test]
    fn path_dependent_action_with_commuting_endpoint_flows() {
        let sys = HamiltonianSystem::new(1, vec![parse("p1"), parse("q1")], vec![]).unwrap();
        let a = MultiTimeCurve::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let b = MultiTimeCurve::new(vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let (p0, q0) = (0.37, -0.81);
        let x0 = PhasePoint::new(vec![p0], vec![q0]).unwrap();
        let report = closure_check(&sys, &x0, &a, &b, 400).unwrap();
        let (s_a, s_b, endpoint_gap) = translation_pair_composition(q0);
        assert!((report.action_a - s_a).abs() < 1e-10);
        assert!((report.action_b - s_b).abs() < 1e-10);
        assert!((report.action_gap - (s_a - s_b).abs()).abs() < 1e-10);
        assert!((report.endpoint_gap - endpoint_gap).abs() < 1e-10);
        // the action gap is the detection signal here
        assert!((report.action_gap - 1.0).abs() < 1e-10);
    }

    #[test]
    fn commutation_check_on_the_oscillator_pair() {
        let sys = oscillator_pair();
        let x0 = PhasePoint::new(vec![0.5, -0.2], vec![0.3, 0.7]).unwrap();
        let report = flow_commutation(&sys, 0, 1, 0.8, 0.6, &x0, 1000).unwrap();
        assert!(report.gap < 1e-9, "commutation gap {}", report.gap);
    }

    #[test]
    fn blowup_reports_the_offending_parameter() {
        // dq/ds = 1000 exp(q) escapes to infinity at s = 1e-3, well inside
        // the first step of 100
        let sys = HamiltonianSystem::new(1, vec![parse("p1*exp(q1)")], vec![]).unwrap();
        let curve = MultiTimeCurve::along_axis(1, 0, 1000.0).unwrap();
        let x0 = PhasePoint::new(vec![0.5], vec![0.0]).unwrap();
        match integrate_curve(&sys, &curve, &x0, 100) {
            Err(FlowError::NonFiniteState { s }) => {
                assert!(s > 0.0 && s <= 1.0);
            }
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn trajectory_csv_has_the_documented_shape() {
        let sys = oscillator_pair();
        let curve = MultiTimeCurve::along_axis(2, 0, 0.5).unwrap();
        let x0 = PhasePoint::new(vec![0.5, -0.2], vec![0.3, 0.7]).unwrap();
        let traj = integrate_curve(&sys, &curve, &x0, 4).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&sys, &traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "s,t1,t2,q1,q2,p1,p2,H1,H2");
        assert_eq!(lines.count(), 5);
        let second = text.lines().nth(1).unwrap();
        let fields: Vec<&str> = second.split(',').collect();
        assert_eq!(fields.len(), 9);
        assert_eq!(fields[0], "0");
        // H1 at the start: (0.25 + 0.04 + 0.09 + 0.49) / 2
        let h1: f64 = fields[7].parse().unwrap();
        assert!((h1 - 0.435).abs() < 1e-15);
    }
}
