//! Lie-group generalization of the multi-time flows: charts on a group,
//! Maurer-Cartan coefficients, moment-map checks, and flows twisted by chart
//! geometry.
//!
//! A [`GroupChart`] maps coordinates `tau` to a group element through a
//! matrix representation, either as a fixed-order product of one-parameter
//! exponentials or as a single exponential of the combined generator. Its
//! left logarithmic derivatives expand in the algebra basis as
//!
//! ```text
//! g(tau)^-1 dg/dtau^k = theta^j_k(tau) xi_j
//! ```
//!
//! and the coefficient matrix `theta` links the Hamiltonian family to the
//! chart: the combinations `K_k = theta^j_k H_j` generate flows that realize
//! the group action on phase space. Two identities make that work, and both
//! are checkable here: the bracket table must reproduce the Hamiltonian
//! brackets ([`moment_map_violation`]) and `theta` must satisfy the flatness
//! relation
//!
//! ```text
//! d theta^l_r / d tau^m - d theta^l_m / d tau^r = c_ji^l theta^j_r theta^i_m
//! ```
//!
//! ([`mc_compatibility`]). [`cross_consistency`] combines both into the
//! statement actually wanted: the twisted flows commute.

mod algebra;
mod matexp;

pub use algebra::{AlgebraDefinition, LieAlgebra, StructureConstants};
pub(crate) use algebra::quaternion_left;
pub use matexp::{exp_with_directional, matrix_exp};

use std::io;

use nalgebra::DMatrix;

use crate::expr::Expression;
use crate::flows::{flow_rhs, FlowError, MultiTimeCurve};
use crate::phase::{
    poisson_bracket_expression, HamiltonianSystem, PhaseError, PhasePoint,
};

#[derive(Debug, thiserror::Error)]
pub enum LieGroupError {
    #[error("structure constants must form an n x n x n table, got side {got} on n = {expected}")]
    StructureShape { expected: usize, got: usize },
    #[error("structure entry ({i}, {j}, {k}) out of range for n = {n}")]
    EntryOutOfRange {
        i: usize,
        j: usize,
        k: usize,
        n: usize,
    },
    #[error("lower structure entries need i < j, got ({i}, {j})")]
    NotLowerPair { i: usize, j: usize },
    #[error("duplicate structure entry ({i}, {j}, {k})")]
    DuplicateEntry { i: usize, j: usize, k: usize },
    #[error("structure constants violate antisymmetry by {violation:.3e}")]
    Antisymmetry { violation: f64 },
    #[error("structure constants violate the jacobi identity by {violation:.3e}")]
    Jacobi { violation: f64 },
    #[error("basis needs {n} square matrices of one common nonzero size")]
    BasisShape { n: usize },
    #[error("basis commutator [{i}, {j}] deviates from the structure table by {gap:.3e}")]
    CommutatorMismatch { i: usize, j: usize, gap: f64 },
    #[error("basis matrices are linearly dependent (relative smallest singular value {sigma:.3e})")]
    DependentBasis { sigma: f64 },
    #[error("expansion leaves the basis span by {residual:.3e}")]
    SpanResidual { residual: f64 },
    #[error("chart order must be a permutation of the {n} generators")]
    BadChartOrder { n: usize },
    #[error("tau has {got} coordinates, the algebra has {expected} generators")]
    TauLength { got: usize, expected: usize },
    #[error("system has {system} hamiltonians, the algebra has {algebra} generators")]
    SystemAlgebraMismatch { system: usize, algebra: usize },
    #[error("group element is singular at this tau")]
    SingularGroupElement,
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Phase(#[from] PhaseError),
}

/// Step used by the finite-difference checks on `theta`.
pub const DEFAULT_MC_STEP: f64 = 1e-6;

/// Coordinate chart on the group, through the algebra's matrix
/// representation. Orders are 0-based generator indices.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupChart {
    /// `g = exp(tau^{o_1} xi_{o_1}) exp(tau^{o_2} xi_{o_2}) ...`, factors
    /// multiplied left to right in the listed order.
    ProductOfExponentials { order: Vec<usize> },
    /// `g = exp(tau^k xi_k)`, summed over all generators.
    SingleExponential,
}

impl GroupChart {
    pub fn product(order: Vec<usize>) -> GroupChart {
        GroupChart::ProductOfExponentials { order }
    }

    pub fn single() -> GroupChart {
        GroupChart::SingleExponential
    }

    fn check(&self, n: usize, tau: &[f64]) -> Result<(), LieGroupError> {
        if tau.len() != n {
            return Err(LieGroupError::TauLength {
                got: tau.len(),
                expected: n,
            });
        }
        if let GroupChart::ProductOfExponentials { order } = self {
            let mut seen = vec![false; n];
            let valid = order.len() == n
                && order.iter().all(|&k| {
                    if k < n && !seen[k] {
                        seen[k] = true;
                        true
                    } else {
                        false
                    }
                });
            if !valid {
                return Err(LieGroupError::BadChartOrder { n });
            }
        }
        Ok(())
    }

    /// The represented group element at `tau`.
    pub fn group_element(
        &self,
        algebra: &LieAlgebra,
        tau: &[f64],
    ) -> Result<DMatrix<f64>, LieGroupError> {
        self.check(algebra.n(), tau)?;
        Ok(match self {
            GroupChart::ProductOfExponentials { order } => order
                .iter()
                .fold(DMatrix::identity(algebra.rep_dim(), algebra.rep_dim()), |acc, &k| {
                    acc * matrix_exp(&(algebra.basis_matrix(k) * tau[k]))
                }),
            GroupChart::SingleExponential => matrix_exp(&combined_generator(algebra, tau)),
        })
    }

    /// Exact partial derivative of the group element in the k-th coordinate.
    /// Product charts differentiate one factor by the product rule; the
    /// single-exponential chart uses the block-matrix directional derivative.
    pub fn partial(
        &self,
        algebra: &LieAlgebra,
        tau: &[f64],
        k: usize,
    ) -> Result<DMatrix<f64>, LieGroupError> {
        self.check(algebra.n(), tau)?;
        let n = algebra.n();
        if k >= n {
            return Err(LieGroupError::TauLength {
                got: k,
                expected: n,
            });
        }
        Ok(match self {
            GroupChart::ProductOfExponentials { order } => {
                let d = algebra.rep_dim();
                let mut result = DMatrix::identity(d, d);
                for &idx in order {
                    if idx == k {
                        result *= algebra.basis_matrix(idx);
                    }
                    result *= matrix_exp(&(algebra.basis_matrix(idx) * tau[idx]));
                }
                result
            }
            GroupChart::SingleExponential => {
                exp_with_directional(&combined_generator(algebra, tau), algebra.basis_matrix(k)).1
            }
        })
    }
}

fn combined_generator(algebra: &LieAlgebra, tau: &[f64]) -> DMatrix<f64> {
    let d = algebra.rep_dim();
    tau.iter()
        .enumerate()
        .fold(DMatrix::zeros(d, d), |acc, (k, t)| {
            acc + algebra.basis_matrix(k) * *t
        })
}

/// The chart coefficients at one `tau`: column `k` expands
/// `g^-1 dg/dtau^k` over the algebra basis (row index = generator index).
#[derive(Debug, Clone)]
pub struct ThetaExpansion {
    pub theta: DMatrix<f64>,
    /// Largest entry left over after projecting onto the span; bounded by
    /// the span gate or the expansion would have been rejected.
    pub residual: f64,
}

/// Expands every left logarithmic derivative of the chart in the algebra
/// basis by least squares. The derivatives lie in the span for consistent
/// data, so a residual above the gate is reported as an error.
pub fn theta_coefficients(
    algebra: &LieAlgebra,
    chart: &GroupChart,
    tau: &[f64],
) -> Result<ThetaExpansion, LieGroupError> {
    let n = algebra.n();
    let d = algebra.rep_dim();
    let g = chart.group_element(algebra, tau)?;
    let lu = g.lu();

    let mut stacked = DMatrix::zeros(d * d, n);
    for k in 0..n {
        let dg = chart.partial(algebra, tau, k)?;
        let e = lu.solve(&dg).ok_or(LieGroupError::SingularGroupElement)?;
        for row in 0..d * d {
            stacked[(row, k)] = e[(row % d, row / d)];
        }
    }

    let svd = algebra.vec_basis().clone().svd(true, true);
    let theta = svd
        .solve(&stacked, 1e-13)
        .map_err(|_| LieGroupError::SpanResidual {
            residual: f64::INFINITY,
        })?;
    let fit = algebra.vec_basis() * &theta;
    let residual = (&fit - &stacked).iter().map(|v| v.abs()).fold(0.0, f64::max);
    let scale = stacked.iter().map(|v| v.abs()).fold(1.0, f64::max);
    if residual > algebra::SPAN_GATE * scale {
        return Err(LieGroupError::SpanResidual { residual });
    }
    Ok(ThetaExpansion { theta, residual })
}

/// Largest violation of the flatness relation
/// `d_m theta^l_r - d_r theta^l_m = c_ji^l theta^j_r theta^i_m`
/// at `tau`, with the derivatives taken by central differences of step `h`.
pub fn mc_compatibility(
    algebra: &LieAlgebra,
    chart: &GroupChart,
    tau: &[f64],
    h: f64,
) -> Result<f64, LieGroupError> {
    let n = algebra.n();
    let center = theta_coefficients(algebra, chart, tau)?.theta;
    let mut dtheta = Vec::with_capacity(n);
    for m in 0..n {
        let mut plus = tau.to_vec();
        plus[m] += h;
        let mut minus = tau.to_vec();
        minus[m] -= h;
        let tp = theta_coefficients(algebra, chart, &plus)?.theta;
        let tm = theta_coefficients(algebra, chart, &minus)?.theta;
        dtheta.push((tp - tm) / (2.0 * h));
    }

    let c = algebra.constants();
    let mut worst = 0.0_f64;
    for l in 0..n {
        for r in 0..n {
            for m in 0..n {
                let lhs = dtheta[m][(l, r)] - dtheta[r][(l, m)];
                let mut rhs = 0.0;
                for j in 0..n {
                    for i in 0..n {
                        rhs += c.get(j, i, l) * center[(j, r)] * center[(i, m)];
                    }
                }
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    Ok(worst)
}

/// Largest gap `|{H_i, H_j} - c_ij^k H_k|` at `x`: zero means the family
/// realizes the bracket table on phase space.
pub fn moment_map_violation(
    sys: &HamiltonianSystem,
    algebra: &LieAlgebra,
    x: &PhasePoint,
) -> Result<f64, LieGroupError> {
    let n = check_system_algebra(sys, algebra)?;
    let brackets = sys.involutivity_matrix(x)?;
    let values = sys.h_values(&x.state());
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let predicted: f64 = (0..n)
                .map(|k| algebra.constants().get(i, j, k) * values[k])
                .sum();
            worst = worst.max((brackets[(i, j)] - predicted).abs());
        }
    }
    Ok(worst)
}

/// Values of the chart-twisted combinations `K_k = theta^j_k H_j` at one
/// point of an extended trajectory.
pub fn k_values(
    sys: &HamiltonianSystem,
    algebra: &LieAlgebra,
    chart: &GroupChart,
    tau: &[f64],
    state: &[f64],
) -> Result<Vec<f64>, LieGroupError> {
    let n = check_system_algebra(sys, algebra)?;
    let theta = theta_coefficients(algebra, chart, tau)?.theta;
    let h = sys.h_values(state);
    Ok((0..n)
        .map(|k| (0..n).map(|j| theta[(j, k)] * h[j]).sum())
        .collect())
}

/// Commutator defect of the twisted coordinate flows, evaluated directly:
/// for every coordinate function `f` and every pair `(r, m)`,
///
/// ```text
/// (d_m theta^j_r - d_r theta^j_m) {H_j, f}
///   + theta^j_r theta^i_m ({H_i, {H_j, f}} - {H_j, {H_i, f}})
/// ```
///
/// vanishes exactly when the flatness relation and the moment-map condition
/// hold together; this measures the largest deviation at `(tau, x)`.
pub fn cross_consistency(
    sys: &HamiltonianSystem,
    algebra: &LieAlgebra,
    chart: &GroupChart,
    tau: &[f64],
    x: &PhasePoint,
    h: f64,
) -> Result<f64, LieGroupError> {
    let n = check_system_algebra(sys, algebra)?;
    let m = sys.m();
    let center = theta_coefficients(algebra, chart, tau)?.theta;
    let mut dtheta = Vec::with_capacity(n);
    for k in 0..n {
        let mut plus = tau.to_vec();
        plus[k] += h;
        let mut minus = tau.to_vec();
        minus[k] -= h;
        let tp = theta_coefficients(algebra, chart, &plus)?.theta;
        let tm = theta_coefficients(algebra, chart, &minus)?.theta;
        dtheta.push((tp - tm) / (2.0 * h));
    }

    let binding = x.binding();
    let coordinates: Vec<Expression> = (1..=m)
        .map(|mu| Expression::variable(format!("p{mu}")))
        .chain((1..=m).map(|mu| Expression::variable(format!("q{mu}"))))
        .collect();

    let mut worst = 0.0_f64;
    for f in &coordinates {
        let first: Vec<Expression> = (0..n)
            .map(|j| poisson_bracket_expression(&sys.hamiltonians()[j], f, m))
            .collect();
        let first_values: Vec<f64> = first
            .iter()
            .map(|e| e.eval(&binding).map_err(PhaseError::from))
            .collect::<Result<_, _>>()?;
        let mut nested = vec![vec![0.0; n]; n];
        for (i, row) in nested.iter_mut().enumerate() {
            for (j, slot) in row.iter_mut().enumerate() {
                let e = poisson_bracket_expression(&sys.hamiltonians()[i], &first[j], m);
                *slot = e.eval(&binding).map_err(PhaseError::from)?;
            }
        }

        for r in 0..n {
            for mm in 0..n {
                let mut total = 0.0;
                for j in 0..n {
                    total += (dtheta[mm][(j, r)] - dtheta[r][(j, mm)]) * first_values[j];
                    for i in 0..n {
                        total +=
                            center[(j, r)] * center[(i, mm)] * (nested[i][j] - nested[j][i]);
                    }
                }
                worst = worst.max(total.abs());
            }
        }
    }
    Ok(worst)
}

fn check_system_algebra(
    sys: &HamiltonianSystem,
    algebra: &LieAlgebra,
) -> Result<usize, LieGroupError> {
    if sys.n() != algebra.n() {
        return Err(LieGroupError::SystemAlgebraMismatch {
            system: sys.n(),
            algebra: algebra.n(),
        });
    }
    Ok(sys.n())
}

/// One recorded point of a group flow: curve parameter, chart coordinates,
/// phase state, and the twisted combination values.
#[derive(Debug, Clone)]
pub struct GroupSample {
    pub s: f64,
    pub tau: Vec<f64>,
    pub state: Vec<f64>,
    pub k: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GroupTrajectory {
    samples: Vec<GroupSample>,
    steps: usize,
}

impl GroupTrajectory {
    pub fn samples(&self) -> &[GroupSample] {
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
}

/// Integrates the chart-twisted flow along a coordinate path: the stage
/// right-hand side weights the Hamiltonian flows by `theta` evaluated at the
/// exact stage position, so the trajectory follows the group action rather
/// than the plain multi-time flow. Stage velocities follow the midpoint
/// segment of each step, as in the plain integrator.
pub fn integrate_group_flow(
    sys: &HamiltonianSystem,
    algebra: &LieAlgebra,
    chart: &GroupChart,
    curve: &MultiTimeCurve,
    x0: &PhasePoint,
    steps: usize,
) -> Result<GroupTrajectory, LieGroupError> {
    check_system_algebra(sys, algebra)?;
    if curve.dim() != sys.n() {
        return Err(FlowError::CurveSystemMismatch {
            curve: curve.dim(),
            system: sys.n(),
        }
        .into());
    }
    if x0.dim() != sys.m() {
        return Err(FlowError::PointSystemMismatch {
            point: x0.dim(),
            system: sys.m(),
        }
        .into());
    }
    if steps == 0 {
        return Err(FlowError::NoSteps.into());
    }

    let n = sys.n();
    let dim = 2 * sys.m();
    let h = 1.0 / steps as f64;
    let theta_at =
        |s: f64| theta_coefficients(algebra, chart, &curve.position(s)).map(|t| t.theta);

    let weights = |theta: &DMatrix<f64>, vel: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|j| vel.iter().enumerate().map(|(k, v)| v * theta[(j, k)]).sum())
            .collect()
    };

    let mut y = x0.state();
    let mut theta_start = theta_at(0.0)?;
    let mut samples = Vec::with_capacity(steps + 1);
    let record =
        |samples: &mut Vec<GroupSample>, s: f64, state: &[f64], theta: &DMatrix<f64>| {
            let hv = sys.h_values(state);
            let k = (0..n)
                .map(|col| (0..n).map(|j| theta[(j, col)] * hv[j]).sum())
                .collect();
            samples.push(GroupSample {
                s,
                tau: curve.position(s),
                state: state.to_vec(),
                k,
            });
        };
    record(&mut samples, 0.0, &y, &theta_start);

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut stage = vec![0.0; dim];

    for step in 0..steps {
        let s = step as f64 * h;
        let seg_count = curve.segments() as f64;
        let seg = (((s + 0.5 * h) * seg_count) as usize).min(curve.segments() - 1);
        let vel = curve.segment_velocity(seg);
        let theta_mid = theta_at(s + 0.5 * h)?;
        let theta_end = theta_at(s + h)?;

        let w1 = weights(&theta_start, &vel);
        let w_mid = weights(&theta_mid, &vel);
        let w4 = weights(&theta_end, &vel);

        flow_rhs(sys, &w1, &y, &mut k1);
        for i in 0..dim {
            stage[i] = y[i] + 0.5 * h * k1[i];
        }
        flow_rhs(sys, &w_mid, &stage, &mut k2);
        for i in 0..dim {
            stage[i] = y[i] + 0.5 * h * k2[i];
        }
        flow_rhs(sys, &w_mid, &stage, &mut k3);
        for i in 0..dim {
            stage[i] = y[i] + h * k3[i];
        }
        flow_rhs(sys, &w4, &stage, &mut k4);
        for i in 0..dim {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }

        let s_next = (step + 1) as f64 * h;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(FlowError::NonFiniteState { s: s_next }.into());
        }
        record(&mut samples, s_next, &y, &theta_end);
        theta_start = theta_end;
    }

    Ok(GroupTrajectory { samples, steps })
}

/// Writes the group-flow table `s,tau1..taun,q1..qm,p1..pm,H1..Hn,K1..Kn`.
pub fn write_group_trajectory_csv<W: io::Write>(
    sys: &HamiltonianSystem,
    traj: &GroupTrajectory,
    mut out: W,
) -> io::Result<()> {
    let m = sys.m();
    let n = sys.n();
    let mut header = String::from("s");
    for i in 1..=n {
        header.push_str(&format!(",tau{i}"));
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
    for i in 1..=n {
        header.push_str(&format!(",K{i}"));
    }
    writeln!(out, "{header}")?;
    for sample in traj.samples() {
        let mut line = format!("{}", sample.s);
        for v in &sample.tau {
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
        for k in &sample.k {
            line.push_str(&format!(",{k}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::integrate_curve;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn parse(src: &str) -> Expression {
        Expression::parse(src).unwrap()
    }

    /// Two-generator algebra with [e0, e1] = e0, realized by upper-triangular
    /// matrices.
    fn affine_algebra() -> LieAlgebra {
        let constants = StructureConstants::from_lower_entries(2, &[(0, 1, 0, 1.0)]).unwrap();
        let basis = vec![
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, 0.5]),
        ];
        LieAlgebra::new(constants, basis).unwrap()
    }

    /// Center plus su(2): the oscillator bundle's algebra, with the bracket
    /// closing as [e_i, e_j] = -2 eps e_k on the su(2) block.
    fn oscillator_algebra() -> LieAlgebra {
        let constants = StructureConstants::from_lower_entries(
            4,
            &[(1, 2, 3, -2.0), (1, 3, 2, 2.0), (2, 3, 1, -2.0)],
        )
        .unwrap();
        let [l1, l2, l3] = algebra::quaternion_left();
        let basis = vec![DMatrix::identity(4, 4), -l1, -l2, -l3];
        LieAlgebra::new(constants, basis).unwrap()
    }

    fn oscillator_system() -> HamiltonianSystem {
        HamiltonianSystem::new(
            2,
            vec![
                parse("(p1^2 + q1^2 + p2^2 + q2^2)/2"),
                parse("(p1^2 + q1^2 - p2^2 - q2^2)/2"),
                parse("p1*q2 - p2*q1"),
                parse("p1*p2 + q1*q2"),
            ],
            ["H", "J1", "J2", "J3"].map(String::from).to_vec(),
        )
        .unwrap()
    }

    fn random_tau(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn chart_validation() {
        let algebra = affine_algebra();
        let chart = GroupChart::product(vec![0, 0]);
        assert!(matches!(
            chart.group_element(&algebra, &[0.1, 0.2]),
            Err(LieGroupError::BadChartOrder { n: 2 })
        ));
        let chart = GroupChart::single();
        assert!(matches!(
            chart.group_element(&algebra, &[0.1]),
            Err(LieGroupError::TauLength { got: 1, expected: 2 })
        ));
    }

    #[test]
    fn affine_chart_has_the_shear_coefficients() {
        // g = exp(tau^1 xi_1) exp(tau^0 xi_0) gives theta = [[1, -t], [0, 1]]
        // with t the coordinate of the nilpotent generator
        let algebra = affine_algebra();
        let chart = GroupChart::product(vec![1, 0]);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let tau = random_tau(&mut rng, 2);
            let out = theta_coefficients(&algebra, &chart, &tau).unwrap();
            assert!((out.theta[(0, 0)] - 1.0).abs() < 1e-12);
            assert!((out.theta[(0, 1)] - (-tau[0])).abs() < 1e-12);
            assert!(out.theta[(1, 0)].abs() < 1e-12);
            assert!((out.theta[(1, 1)] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn theta_is_the_identity_at_the_origin() {
        for (algebra, charts) in [
            (
                affine_algebra(),
                vec![GroupChart::product(vec![0, 1]), GroupChart::single()],
            ),
            (
                oscillator_algebra(),
                vec![GroupChart::product(vec![0, 1, 2, 3]), GroupChart::single()],
            ),
        ] {
            let zero = vec![0.0; algebra.n()];
            for chart in charts {
                let out = theta_coefficients(&algebra, &chart, &zero).unwrap();
                for i in 0..algebra.n() {
                    for j in 0..algebra.n() {
                        let expected = if i == j { 1.0 } else { 0.0 };
                        assert!(
                            (out.theta[(i, j)] - expected).abs() < 1e-14,
                            "chart {chart:?} entry ({i},{j}) = {}",
                            out.theta[(i, j)]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn flatness_relation_holds_on_both_chart_kinds() {
        let algebra = oscillator_algebra();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for chart in [GroupChart::product(vec![0, 1, 2, 3]), GroupChart::single()] {
            for _ in 0..5 {
                let tau = random_tau(&mut rng, 4);
                let violation = mc_compatibility(&algebra, &chart, &tau, DEFAULT_MC_STEP).unwrap();
                assert!(violation < 1e-7, "chart {chart:?} violation {violation}");
            }
        }
    }

    #[test]
    fn flatness_holds_for_either_sign_convention() {
        // the opposite sign convention, +2 eps with the +L basis, is just as
        // consistent as the oscillator bundle's -2 eps with -L; a mismatched
        // pairing of table and basis cannot reach this check because the
        // algebra constructor rejects it (covered in the algebra tests)
        let constants = StructureConstants::from_lower_entries(
            4,
            &[(1, 2, 3, 2.0), (1, 3, 2, -2.0), (2, 3, 1, 2.0)],
        )
        .unwrap();
        let [l1, l2, l3] = algebra::quaternion_left();
        let flipped =
            LieAlgebra::new(constants, vec![DMatrix::identity(4, 4), l1, l2, l3]).unwrap();
        let chart = GroupChart::product(vec![0, 1, 2, 3]);
        let tau = [0.4, -0.3, 0.2, 0.6];
        let violation = mc_compatibility(&flipped, &chart, &tau, DEFAULT_MC_STEP).unwrap();
        assert!(violation < 1e-7);
    }

    #[test]
    fn oscillator_family_realizes_its_bracket_table() {
        let sys = oscillator_system();
        let algebra = oscillator_algebra();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let x = PhasePoint::new(
                (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            )
            .unwrap();
            let violation = moment_map_violation(&sys, &algebra, &x).unwrap();
            assert!(violation < 1e-10, "moment map violation {violation}");
        }
    }

    #[test]
    fn twisted_combinations_on_the_affine_chart() {
        // theta = [[1, -t], [0, 1]] makes K_1 = H_1 and K_2 = H_2 - t H_1
        let algebra = affine_algebra();
        let chart = GroupChart::product(vec![1, 0]);
        let sys = HamiltonianSystem::new(
            1,
            vec![parse("p1^2/2"), parse("p1*q1/2")],
            vec![],
        )
        .unwrap();
        let x = PhasePoint::new(vec![1.2], vec![0.7]).unwrap();
        let tau = [0.5, -0.3];
        let k = k_values(&sys, &algebra, &chart, &tau, &x.state()).unwrap();
        let h1 = 0.5 * 1.2 * 1.2;
        let h2 = 0.5 * 1.2 * 0.7;
        assert!((k[0] - h1).abs() < 1e-12);
        assert!((k[1] - (h2 - 0.5 * h1)).abs() < 1e-12);
    }

    #[test]
    fn cross_consistency_for_the_oscillator_bundle() {
        let sys = oscillator_system();
        let algebra = oscillator_algebra();
        let chart = GroupChart::product(vec![0, 1, 2, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..3 {
            let tau = random_tau(&mut rng, 4);
            let x = PhasePoint::new(
                (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            )
            .unwrap();
            let defect =
                cross_consistency(&sys, &algebra, &chart, &tau, &x, DEFAULT_MC_STEP).unwrap();
            assert!(defect < 1e-6, "commutator defect {defect}");
        }
    }

    #[test]
    fn abelian_group_flow_reduces_to_the_plain_flow() {
        // commuting diagonal generators force theta = identity, so the
        // twisted and plain integrators must agree step for step
        let constants = StructureConstants::from_lower_entries(2, &[]).unwrap();
        let basis = vec![
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
        ];
        let algebra = LieAlgebra::new(constants, basis).unwrap();
        let sys = HamiltonianSystem::new(
            2,
            vec![
                parse("(p1^2 + q1^2 + p2^2 + q2^2)/2"),
                parse("p1*q2 - p2*q1"),
            ],
            vec![],
        )
        .unwrap();
        let curve =
            MultiTimeCurve::new(vec![vec![0.0, 0.0], vec![0.6, 0.0], vec![0.6, 0.4]]).unwrap();
        let x0 = PhasePoint::new(vec![0.5, -0.2], vec![0.3, 0.7]).unwrap();
        let twisted = integrate_group_flow(
            &sys,
            &algebra,
            &GroupChart::product(vec![0, 1]),
            &curve,
            &x0,
            500,
        )
        .unwrap();
        let plain = integrate_curve(&sys, &curve, &x0, 500).unwrap();
        for (a, b) in twisted
            .endpoint_state()
            .iter()
            .zip(plain.endpoint_state().iter())
        {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn group_flow_endpoint_is_path_independent() {
        let sys = oscillator_system();
        let algebra = oscillator_algebra();
        let end = vec![0.3, 0.4, -0.2, 0.5];
        let x0 = PhasePoint::new(vec![0.6, -0.3], vec![0.2, 0.8]).unwrap();
        for chart in [GroupChart::product(vec![0, 1, 2, 3]), GroupChart::single()] {
            let direct =
                MultiTimeCurve::new(vec![vec![0.0; 4], end.clone()]).unwrap();
            let bent = MultiTimeCurve::new(vec![
                vec![0.0; 4],
                vec![0.3, 0.4, 0.0, 0.0],
                end.clone(),
            ])
            .unwrap();
            let a = integrate_group_flow(&sys, &algebra, &chart, &direct, &x0, 2000).unwrap();
            let b = integrate_group_flow(&sys, &algebra, &chart, &bent, &x0, 2000).unwrap();
            let gap = a
                .endpoint_state()
                .iter()
                .zip(b.endpoint_state().iter())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(gap < 1e-6, "chart {chart:?} endpoint gap {gap}");
        }
    }

    #[test]
    fn group_trajectory_csv_shape() {
        let algebra = affine_algebra();
        let chart = GroupChart::product(vec![0, 1]);
        let sys = HamiltonianSystem::new(1, vec![parse("p1^2/2"), parse("p1*q1/2")], vec![])
            .unwrap();
        let curve = MultiTimeCurve::along_axis(2, 0, 0.4).unwrap();
        let x0 = PhasePoint::new(vec![0.9], vec![0.1]).unwrap();
        let traj = integrate_group_flow(&sys, &algebra, &chart, &curve, &x0, 4).unwrap();
        let mut buf = Vec::new();
        write_group_trajectory_csv(&sys, &traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "s,tau1,tau2,q1,p1,H1,H2,K1,K2");
        assert_eq!(lines.count(), 5);
    }
}
