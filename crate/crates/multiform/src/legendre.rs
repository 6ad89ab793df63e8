//! Inverse Legendre transform for multi-time flows.
//!
//! A [`VelocityField`] holds one configuration point `q` together with a
//! velocity `qdot_i` for each of the `n` time directions. Momenta are
//! recovered from a weighted velocity relation: given a weight vector
//! `alpha`, [`MomentumSolver`] solves
//!
//! ```text
//! alpha^i dH_i/dp_mu (p, q) = alpha^i qdot_i^mu
//! ```
//!
//! for `p` by damped Newton iteration, using the exact symbolic Hessian
//! `alpha^i d2H_i/dp_mu dp_nu` as the Jacobian. When the velocities all come
//! from one phase point (an on-shell field, [`VelocityField::on_shell`]) the
//! solution is independent of `alpha`; [`alpha_independence`] measures that.
//!
//! The Lagrangian coefficients `L_i = p . qdot_i - H_i(p, q)` complete the
//! transform, and [`MomentumSolver::euler_momenta`] closes the loop by
//! differencing them back with respect to velocities, which reproduces the
//! momenta on shell.

use nalgebra::{DMatrix, DVector};

use crate::expr::{CompiledExpr, Expression};
use crate::phase::{state_variables, HamiltonianSystem, PhasePoint};

const DEFAULT_TOL: f64 = 1e-12;
const DEFAULT_MAX_ITER: usize = 50;
const MAX_HALVINGS: usize = 20;
const SINGULAR_CONDITION: f64 = 1e14;
const VELOCITY_DIFF_STEP: f64 = 1e-5;

#[derive(Debug, thiserror::Error)]
pub enum LegendreError {
    #[error("alpha must be finite with at least one nonzero coefficient")]
    ZeroAlpha,
    #[error("alpha has {got} coefficients, the system has {expected} hamiltonians")]
    AlphaCount { got: usize, expected: usize },
    #[error(
        "velocity field has {q_len} coordinates and {rows} flows, system wants m = {m}, n = {n}"
    )]
    VelocityShape {
        q_len: usize,
        rows: usize,
        m: usize,
        n: usize,
    },
    #[error("velocity field has a non-finite entry")]
    NonFiniteVelocity,
    #[error("point dimension {got} does not match system dimension {expected}")]
    PointDimension { got: usize, expected: usize },
    #[error("momentum guess has {got} entries, expected {expected}")]
    GuessShape { got: usize, expected: usize },
    #[error("hessian condition number {condition:.3e} marks the velocity relation as singular")]
    SingularHessian { condition: f64 },
    #[error("newton stopped at residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("step damping stalled at iteration {iteration} with residual {residual:.3e}")]
    DampingStalled { iteration: usize, residual: f64 },
    #[error("alpha independence needs at least two weight vectors")]
    NotEnoughAlphas,
}

/// Weight vector contracting the Hamiltonian family; at least one entry must
/// be nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaVector(Vec<f64>);

impl AlphaVector {
    pub fn new(coefficients: Vec<f64>) -> Result<Self, LegendreError> {
        let finite = coefficients.iter().all(|a| a.is_finite());
        if coefficients.is_empty() || !finite || coefficients.iter().all(|a| *a == 0.0) {
            return Err(LegendreError::ZeroAlpha);
        }
        Ok(AlphaVector(coefficients))
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A configuration point with one velocity vector per time direction,
/// `qdot[i][mu]` being the mu-th component of the i-th flow velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    q: Vec<f64>,
    qdot: Vec<Vec<f64>>,
}

impl VelocityField {
    pub fn new(q: Vec<f64>, qdot: Vec<Vec<f64>>) -> Result<Self, LegendreError> {
        let m = q.len();
        if m == 0 || qdot.is_empty() || qdot.iter().any(|row| row.len() != m) {
            return Err(LegendreError::VelocityShape {
                q_len: m,
                rows: qdot.len(),
                m,
                n: qdot.len(),
            });
        }
        let finite = q.iter().chain(qdot.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(LegendreError::NonFiniteVelocity);
        }
        Ok(VelocityField { q, qdot })
    }

    /// The field generated by one phase point: `qdot_i = dH_i/dp` at `x`.
    /// Solving the velocity relation on such a field recovers `x`'s momenta
    /// for every admissible weight.
    pub fn on_shell(sys: &HamiltonianSystem, x: &PhasePoint) -> Result<Self, LegendreError> {
        if x.dim() != sys.m() {
            return Err(LegendreError::PointDimension {
                got: x.dim(),
                expected: sys.m(),
            });
        }
        let state = x.state();
        let qdot = (0..sys.n())
            .map(|i| (0..sys.m()).map(|mu| sys.dh_dp_value(i, mu, &state)).collect())
            .collect();
        Ok(VelocityField {
            q: x.q().to_vec(),
            qdot,
        })
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn qdot(&self) -> &[Vec<f64>] {
        &self.qdot
    }

    pub fn m(&self) -> usize {
        self.q.len()
    }

    pub fn n(&self) -> usize {
        self.qdot.len()
    }

    fn check_against(&self, sys: &HamiltonianSystem) -> Result<(), LegendreError> {
        if self.m() != sys.m() || self.n() != sys.n() {
            return Err(LegendreError::VelocityShape {
                q_len: self.m(),
                rows: self.n(),
                m: sys.m(),
                n: sys.n(),
            });
        }
        Ok(())
    }

    fn with_nudged(&self, i: usize, mu: usize, delta: f64) -> VelocityField {
        let mut nudged = self.clone();
        nudged.qdot[i][mu] += delta;
        nudged
    }
}

/// Converged Newton run: the momenta, the number of steps taken, and the
/// max-norm residual before each step plus the final one.
#[derive(Debug, Clone)]
pub struct NewtonSolution {
    pub p: Vec<f64>,
    pub iterations: usize,
    pub residuals: Vec<f64>,
}

impl NewtonSolution {
    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().expect("at least the initial residual")
    }
}

/// Momentum reconstruction from Lagrangian data: per-flow momenta obtained by
/// velocity differencing, their average, and the gaps to the reference point.
#[derive(Debug, Clone)]
pub struct RoundTrip {
    /// Average over flows of the differenced momenta.
    pub reconstructed: Vec<f64>,
    /// `max_mu |reconstructed - p*|`
    pub momentum_gap: f64,
    /// `max_i |H_i(reconstructed, q) - H_i(p*, q)|`
    pub hamiltonian_gap: f64,
}

/// Solves the weighted velocity relation for a fixed system and weight.
/// The weighted gradient and Hessian are differentiated and compiled once at
/// construction, so repeated solves (round trips, parameter sweeps) reuse
/// them.
pub struct MomentumSolver<'a> {
    sys: &'a HamiltonianSystem,
    alpha: AlphaVector,
    tol: f64,
    max_iter: usize,
    grad: Vec<CompiledExpr>,
    hess: Vec<Vec<CompiledExpr>>,
}

impl<'a> MomentumSolver<'a> {
    pub fn new(sys: &'a HamiltonianSystem, alpha: AlphaVector) -> Result<Self, LegendreError> {
        if alpha.len() != sys.n() {
            return Err(LegendreError::AlphaCount {
                got: alpha.len(),
                expected: sys.n(),
            });
        }
        let m = sys.m();
        let vars = state_variables(m);
        let compile = |e: &Expression| e.compile(&vars).expect("system variables are validated");

        let weighted: Vec<Expression> = (0..m)
            .map(|mu| {
                alpha
                    .coefficients()
                    .iter()
                    .enumerate()
                    .fold(Expression::constant(0.0), |acc, (i, a)| {
                        Expression::add(
                            acc,
                            Expression::mul(
                                Expression::constant(*a),
                                sys.dh_dp(i)[mu].clone(),
                            ),
                        )
                    })
            })
            .collect();
        let grad = weighted.iter().map(compile).collect();
        let hess = weighted
            .iter()
            .map(|g| {
                (1..=m)
                    .map(|nu| compile(&g.differentiate(&format!("p{nu}"))))
                    .collect()
            })
            .collect();

        Ok(MomentumSolver {
            sys,
            alpha,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            grad,
            hess,
        })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iterations(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn alpha(&self) -> &AlphaVector {
        &self.alpha
    }

    fn residual(&self, state: &[f64], target: &[f64], out: &mut [f64]) -> f64 {
        let mut worst = 0.0_f64;
        for (mu, r) in out.iter_mut().enumerate() {
            *r = self.grad[mu].eval(state) - target[mu];
            worst = worst.max(r.abs());
        }
        worst
    }

    /// Newton iteration from `guess` (default: the alpha-weighted velocity).
    /// Steps are halved until the residual decreases; a Hessian with
    /// condition number above `1e14` aborts as singular.
    pub fn solve(
        &self,
        vf: &VelocityField,
        guess: Option<&[f64]>,
    ) -> Result<NewtonSolution, LegendreError> {
        vf.check_against(self.sys)?;
        let m = self.sys.m();
        let target: Vec<f64> = (0..m)
            .map(|mu| {
                self.alpha
                    .coefficients()
                    .iter()
                    .zip(vf.qdot.iter())
                    .map(|(a, row)| a * row[mu])
                    .sum()
            })
            .collect();

        let mut state = vec![0.0; 2 * m];
        state[m..].copy_from_slice(&vf.q);
        match guess {
            Some(g) if g.len() == m => state[..m].copy_from_slice(g),
            Some(g) => {
                return Err(LegendreError::GuessShape {
                    got: g.len(),
                    expected: m,
                })
            }
            None => state[..m].copy_from_slice(&target),
        }

        let mut r = vec![0.0; m];
        let mut norm = self.residual(&state, &target, &mut r);
        let mut residuals = vec![norm];

        for iteration in 0..self.max_iter {
            if norm <= self.tol {
                return Ok(NewtonSolution {
                    p: state[..m].to_vec(),
                    iterations: iteration,
                    residuals,
                });
            }

            let jac = DMatrix::from_fn(m, m, |mu, nu| self.hess[mu][nu].eval(&state));
            let svd = jac.clone().svd(false, false);
            let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
            let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
            let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
            if !condition.is_finite() || condition > SINGULAR_CONDITION {
                return Err(LegendreError::SingularHessian { condition });
            }
            let step = jac
                .lu()
                .solve(&-DVector::from_column_slice(&r))
                .ok_or(LegendreError::SingularHessian { condition })?;

            let base = state[..m].to_vec();
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                for mu in 0..m {
                    state[mu] = base[mu] + lambda * step[mu];
                }
                let trial = self.residual(&state, &target, &mut r);
                if trial.is_finite() && trial < norm {
                    norm = trial;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                return Err(LegendreError::DampingStalled {
                    iteration,
                    residual: norm,
                });
            }
            residuals.push(norm);
        }

        if norm <= self.tol {
            Ok(NewtonSolution {
                p: state[..m].to_vec(),
                iterations: self.max_iter,
                residuals,
            })
        } else {
            Err(LegendreError::NoConvergence {
                iterations: self.max_iter,
                residual: norm,
            })
        }
    }

    /// Smallest eigenvalue of the symmetrized Hessian at `(p, q)`. Positive
    /// means the weighted velocity relation is locally convex in `p`;
    /// non-positive marks a degenerate or indefinite weight.
    pub fn convexity_margin(&self, p: &[f64], q: &[f64]) -> Result<f64, LegendreError> {
        let m = self.sys.m();
        if p.len() != m || q.len() != m {
            return Err(LegendreError::PointDimension {
                got: p.len(),
                expected: m,
            });
        }
        let mut state = vec![0.0; 2 * m];
        state[..m].copy_from_slice(p);
        state[m..].copy_from_slice(q);
        let jac = DMatrix::from_fn(m, m, |mu, nu| self.hess[mu][nu].eval(&state));
        let sym = (&jac + jac.transpose()) * 0.5;
        Ok(sym
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min))
    }

    /// Differences each Lagrangian coefficient back with respect to its own
    /// flow velocity: row `k` is `dL_k/dqdot_k` by central differences, with
    /// the momenta re-solved at every nudged field. On an on-shell field
    /// every row reproduces the momenta.
    pub fn euler_momenta(&self, vf: &VelocityField) -> Result<Vec<Vec<f64>>, LegendreError> {
        vf.check_against(self.sys)?;
        let (m, n) = (self.sys.m(), self.sys.n());
        let base = self.solve(vf, None)?;
        let h = VELOCITY_DIFF_STEP;
        let mut rows = Vec::with_capacity(n);
        for k in 0..n {
            let mut row = Vec::with_capacity(m);
            for mu in 0..m {
                let mut sides = [0.0; 2];
                for (slot, sign) in [1.0, -1.0].into_iter().enumerate() {
                    let nudged = vf.with_nudged(k, mu, sign * h);
                    let sol = self.solve(&nudged, Some(&base.p))?;
                    sides[slot] = lagrangian_coefficients(self.sys, &nudged, &sol.p)?[k];
                }
                row.push((sides[0] - sides[1]) / (2.0 * h));
            }
            rows.push(row);
        }
        Ok(rows)
    }

    /// Full consistency loop at a phase point: build the on-shell field,
    /// recover momenta, difference the Lagrangian coefficients back, and
    /// report the average reconstruction against the point itself.
    pub fn roundtrip(&self, x: &PhasePoint) -> Result<RoundTrip, LegendreError> {
        let vf = VelocityField::on_shell(self.sys, x)?;
        let rows = self.euler_momenta(&vf)?;
        let (m, n) = (self.sys.m(), self.sys.n());
        let reconstructed: Vec<f64> = (0..m)
            .map(|mu| rows.iter().map(|row| row[mu]).sum::<f64>() / n as f64)
            .collect();
        let momentum_gap = reconstructed
            .iter()
            .zip(x.p().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);

        let mut state = x.state();
        let reference = self.sys.h_values(&state);
        state[..m].copy_from_slice(&reconstructed);
        let hamiltonian_gap = self
            .sys
            .h_values(&state)
            .iter()
            .zip(reference.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);

        Ok(RoundTrip {
            reconstructed,
            momentum_gap,
            hamiltonian_gap,
        })
    }
}

/// `L_i = p . qdot_i - H_i(p, q)` for every flow.
pub fn lagrangian_coefficients(
    sys: &HamiltonianSystem,
    vf: &VelocityField,
    p: &[f64],
) -> Result<Vec<f64>, LegendreError> {
    vf.check_against(sys)?;
    let m = sys.m();
    if p.len() != m {
        return Err(LegendreError::PointDimension {
            got: p.len(),
            expected: m,
        });
    }
    let mut state = vec![0.0; 2 * m];
    state[..m].copy_from_slice(p);
    state[m..].copy_from_slice(&vf.q);
    Ok((0..sys.n())
        .map(|i| {
            let kinetic: f64 = p.iter().zip(vf.qdot[i].iter()).map(|(p, v)| p * v).sum();
            kinetic - sys.h_value(i, &state)
        })
        .collect())
}

/// Largest pairwise max-norm gap between momenta solved under different
/// weights. Meaningful on on-shell fields, where the exact solutions agree.
pub fn alpha_independence(
    sys: &HamiltonianSystem,
    vf: &VelocityField,
    alphas: &[AlphaVector],
) -> Result<f64, LegendreError> {
    if alphas.len() < 2 {
        return Err(LegendreError::NotEnoughAlphas);
    }
    let mut solutions = Vec::with_capacity(alphas.len());
    for alpha in alphas {
        let solver = MomentumSolver::new(sys, alpha.clone())?;
        solutions.push(solver.solve(vf, None)?.p);
    }
    let mut worst = 0.0_f64;
    for (idx, a) in solutions.iter().enumerate() {
        for b in &solutions[idx + 1..] {
            let gap = a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            worst = worst.max(gap);
        }
    }
    Ok(worst)
}
