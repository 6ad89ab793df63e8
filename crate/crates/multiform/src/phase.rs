//! Phase-space geometry: points, Hamiltonian families, Poisson brackets,
//! and the Lagrangian one-form `L = p_mu dq^mu - H_i dt^i`.
//!
//! A [`HamiltonianSystem`] holds `n` Hamiltonians over a common
//! `2m`-dimensional phase space with canonical coordinates named `p1..pm`,
//! `q1..qm`. Gradients are differentiated symbolically once at construction
//! and compiled against the state layout `[p1..pm, q1..qm]`, so integrators
//! evaluate them without hashing or re-deriving.
//!
//! The bracket convention used everywhere in this crate is
//!
//! ```text
//! {F, G} = sum_mu dF/dp_mu dG/dq^mu - dG/dp_mu dF/dq^mu
//! ```
//!
//! under which a flow in the i-th time direction reads `df/dt^i = {H_i, f}`.

use std::collections::BTreeMap;
use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::expr::{Binding, CompiledExpr, EvalError, Expression, ParseError};

#[derive(Debug, thiserror::Error)]
pub enum PhaseError {
    #[error("phase point needs equal p/q lengths of at least 1, got {p_len} and {q_len}")]
    BadPointShape { p_len: usize, q_len: usize },
    #[error("phase point has a non-finite component")]
    NonFinitePoint,
    #[error("a system needs m >= 1 and at least one hamiltonian")]
    EmptySystem,
    #[error("system declares n = {declared} but provides {actual} hamiltonians")]
    HamiltonianCount { declared: usize, actual: usize },
    #[error("{count} names given for {n} hamiltonians")]
    NameCount { count: usize, n: usize },
    #[error(
        "hamiltonian `{name}` uses variable `{variable}`, which is outside p1..p{m}, q1..q{m}"
    )]
    ForeignVariable {
        name: String,
        variable: String,
        m: usize,
    },
    #[error("failed to parse hamiltonian `{name}`")]
    Parse {
        name: String,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("tangent data has wrong dimensions for this system")]
    BadTangentShape,
}

/// A point `(p, q)` of the `2m`-dimensional phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    p: Vec<f64>,
    q: Vec<f64>,
}

impl PhasePoint {
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Result<Self, PhaseError> {
        if p.len() != q.len() || p.is_empty() {
            return Err(PhaseError::BadPointShape {
                p_len: p.len(),
                q_len: q.len(),
            });
        }
        if p.iter().chain(q.iter()).any(|v| !v.is_finite()) {
            return Err(PhaseError::NonFinitePoint);
        }
        Ok(PhasePoint { p, q })
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// State layout used by compiled expressions: `[p1..pm, q1..qm]`.
    pub fn state(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(2 * self.p.len());
        s.extend_from_slice(&self.p);
        s.extend_from_slice(&self.q);
        s
    }

    /// Inverse of [`PhasePoint::state`]. Callers guarantee finiteness.
    pub(crate) fn from_state(state: &[f64]) -> PhasePoint {
        let m = state.len() / 2;
        PhasePoint {
            p: state[..m].to_vec(),
            q: state[m..].to_vec(),
        }
    }

    pub fn binding(&self) -> Binding {
        let mut b = Binding::new();
        for (i, (pv, qv)) in self.p.iter().zip(self.q.iter()).enumerate() {
            b.set(format!("p{}", i + 1), *pv);
            b.set(format!("q{}", i + 1), *qv);
        }
        b
    }
}

/// Tangent data along a curve parameter `s`: the rates of change of the
/// phase-space coordinates and of the `n` time coordinates.
#[derive(Debug, Clone)]
pub struct Tangent {
    pub dq: Vec<f64>,
    pub dp: Vec<f64>,
    pub dt: Vec<f64>,
}

/// The canonical state variable names for an `m`-dimensional configuration
/// space, in state layout order.
pub fn state_variables(m: usize) -> Vec<String> {
    (1..=m)
        .map(|i| format!("p{i}"))
        .chain((1..=m).map(|i| format!("q{i}")))
        .collect()
}

/// A family of `n` Hamiltonians on a common phase space, with symbolic
/// gradients cached at construction.
#[derive(Debug, Clone)]
pub struct HamiltonianSystem {
    m: usize,
    names: Vec<String>,
    hamiltonians: Vec<Expression>,
    dh_dp: Vec<Vec<Expression>>,
    dh_dq: Vec<Vec<Expression>>,
    compiled_h: Vec<CompiledExpr>,
    compiled_dh_dp: Vec<Vec<CompiledExpr>>,
    compiled_dh_dq: Vec<Vec<CompiledExpr>>,
}

impl HamiltonianSystem {
    /// Builds a system over `p1..pm, q1..qm`. Every hamiltonian must use only
    /// those variables; `names` labels them for reports (empty means
    /// `H1..Hn`).
    pub fn new(
        m: usize,
        hamiltonians: Vec<Expression>,
        names: Vec<String>,
    ) -> Result<Self, PhaseError> {
        let n = hamiltonians.len();
        if m == 0 || n == 0 {
            return Err(PhaseError::EmptySystem);
        }
        let names = if names.is_empty() {
            (1..=n).map(|i| format!("H{i}")).collect()
        } else if names.len() == n {
            names
        } else {
            return Err(PhaseError::NameCount {
                count: names.len(),
                n,
            });
        };

        let vars = state_variables(m);
        for (name, h) in names.iter().zip(hamiltonians.iter()) {
            for v in h.variables() {
                if !vars.contains(&v) {
                    return Err(PhaseError::ForeignVariable {
                        name: name.clone(),
                        variable: v,
                        m,
                    });
                }
            }
        }

        let dh_dp: Vec<Vec<Expression>> = hamiltonians
            .iter()
            .map(|h| (1..=m).map(|mu| h.differentiate(&format!("p{mu}"))).collect())
            .collect();
        let dh_dq: Vec<Vec<Expression>> = hamiltonians
            .iter()
            .map(|h| (1..=m).map(|mu| h.differentiate(&format!("q{mu}"))).collect())
            .collect();

        let compile = |e: &Expression| e.compile(&vars).expect("variables validated above");
        let compiled_h = hamiltonians.iter().map(compile).collect();
        let compiled_dh_dp = dh_dp.iter().map(|row| row.iter().map(compile).collect()).collect();
        let compiled_dh_dq = dh_dq.iter().map(|row| row.iter().map(compile).collect()).collect();

        Ok(HamiltonianSystem {
            m,
            names,
            hamiltonians,
            dh_dp,
            dh_dq,
            compiled_h,
            compiled_dh_dp,
            compiled_dh_dq,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.hamiltonians.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn hamiltonians(&self) -> &[Expression] {
        &self.hamiltonians
    }

    /// Cached gradient `dH_i/dp_mu`, `mu = 0..m`.
    pub fn dh_dp(&self, i: usize) -> &[Expression] {
        &self.dh_dp[i]
    }

    /// Cached gradient `dH_i/dq^mu`, `mu = 0..m`.
    pub fn dh_dq(&self, i: usize) -> &[Expression] {
        &self.dh_dq[i]
    }

    /// `H_i` evaluated against a state slice `[p.., q..]`.
    pub fn h_value(&self, i: usize, state: &[f64]) -> f64 {
        self.compiled_h[i].eval(state)
    }

    pub fn h_values(&self, state: &[f64]) -> Vec<f64> {
        self.compiled_h.iter().map(|h| h.eval(state)).collect()
    }

    pub(crate) fn dh_dp_value(&self, i: usize, mu: usize, state: &[f64]) -> f64 {
        self.compiled_dh_dp[i][mu].eval(state)
    }

    pub(crate) fn dh_dq_value(&self, i: usize, mu: usize, state: &[f64]) -> f64 {
        self.compiled_dh_dq[i][mu].eval(state)
    }

    /// The matrix of pairwise brackets `{H_i, H_j}` at `x`. Vanishing (up to
    /// round-off) everywhere is involutivity; any entry that stays away from
    /// zero identifies the obstruction.
    pub fn involutivity_matrix(&self, x: &PhasePoint) -> Result<DMatrix<f64>, PhaseError> {
        if x.dim() != self.m {
            return Err(PhaseError::BadPointShape {
                p_len: x.dim(),
                q_len: self.m,
            });
        }
        let state = x.state();
        let n = self.n();
        let mut dp = vec![vec![0.0; self.m]; n];
        let mut dq = vec![vec![0.0; self.m]; n];
        for i in 0..n {
            for mu in 0..self.m {
                dp[i][mu] = self.dh_dp_value(i, mu, &state);
                dq[i][mu] = self.dh_dq_value(i, mu, &state);
            }
        }
        Ok(DMatrix::from_fn(n, n, |i, j| {
            (0..self.m)
                .map(|mu| dp[i][mu] * dq[j][mu] - dp[j][mu] * dq[i][mu])
                .sum()
        }))
    }

    /// Pairing of the one-form `p_mu dq^mu - H_i dt^i` with tangent data.
    pub fn one_form_eval(&self, x: &PhasePoint, v: &Tangent) -> Result<f64, PhaseError> {
        if x.dim() != self.m || v.dq.len() != self.m || v.dt.len() != self.n() {
            return Err(PhaseError::BadTangentShape);
        }
        let state = x.state();
        let pdq: f64 = x.p().iter().zip(v.dq.iter()).map(|(p, dq)| p * dq).sum();
        let hdt: f64 = (0..self.n())
            .map(|i| self.h_value(i, &state) * v.dt[i])
            .sum();
        Ok(pdq - hdt)
    }
}

/// Poisson bracket `{F, G}` evaluated at a point, differentiating on the fly.
/// The dimension is taken from the point.
pub fn poisson_bracket(
    f: &Expression,
    g: &Expression,
    x: &PhasePoint,
) -> Result<f64, EvalError> {
    let binding = x.binding();
    let mut total = 0.0;
    for mu in 1..=x.dim() {
        let p = format!("p{mu}");
        let q = format!("q{mu}");
        total += f.differentiate(&p).eval(&binding)? * g.differentiate(&q).eval(&binding)?
            - g.differentiate(&p).eval(&binding)? * f.differentiate(&q).eval(&binding)?;
    }
    Ok(total)
}

/// The bracket `{F, G}` as an expression tree over `p1..pm, q1..qm`.
/// Used where brackets are differentiated again (Jacobi checks, nested
/// flow commutators).
pub fn poisson_bracket_expression(f: &Expression, g: &Expression, m: usize) -> Expression {
    let mut total = Expression::constant(0.0);
    for mu in 1..=m {
        let p = format!("p{mu}");
        let q = format!("q{mu}");
        let term = Expression::sub(
            Expression::mul(f.differentiate(&p), g.differentiate(&q)),
            Expression::mul(g.differentiate(&p), f.differentiate(&q)),
        );
        total = Expression::add(total, term);
    }
    total
}

/// Result of checking whether candidate momentum functions `p_mu(q)` assemble
/// a closed one-form `p_mu dq^mu`.
#[derive(Debug, Clone)]
pub struct OmegaRank {
    /// Numerical rank of `A` (singular values above `1e-10` of the largest).
    pub rank: usize,
    /// `A_{nu mu} = dp_mu/dq^nu - dp_nu/dq^mu` at the probe point.
    pub matrix: DMatrix<f64>,
}

/// Antisymmetry defect of `p_mu dq^mu` at `q0`: rank 0 means the candidate
/// momenta close (locally exact), anything larger counts the obstruction
/// directions.
pub fn omega_rank_check(p_funcs: &[Expression], q0: &[f64]) -> Result<OmegaRank, PhaseError> {
    let m = p_funcs.len();
    if m == 0 || q0.len() != m {
        return Err(PhaseError::BadPointShape {
            p_len: m,
            q_len: q0.len(),
        });
    }
    let binding: Binding = q0
        .iter()
        .enumerate()
        .map(|(i, v)| (format!("q{}", i + 1), *v))
        .collect();
    let mut a = DMatrix::zeros(m, m);
    for nu in 0..m {
        for mu in 0..m {
            let d_mu_by_nu = p_funcs[mu]
                .differentiate(&format!("q{}", nu + 1))
                .eval(&binding)?;
            let d_nu_by_mu = p_funcs[nu]
                .differentiate(&format!("q{}", mu + 1))
                .eval(&binding)?;
            a[(nu, mu)] = d_mu_by_nu - d_nu_by_mu;
        }
    }
    let svd = a.clone().svd(false, false);
    let largest = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > 1e-10 * largest.max(1.0))
        .count();
    Ok(OmegaRank { rank, matrix: a })
}

/// On-disk description of a Hamiltonian family. Hamiltonians are expression
/// source strings; `parameters` are substituted as constants when the system
/// is built, so the stored strings stay parametric and forkable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemDefinition {
    pub m: usize,
    pub n: usize,
    pub hamiltonians: Vec<String>,
    #[serde(default)]
    pub names: Vec<String>,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
}

impl SystemDefinition {
    pub fn to_system(&self) -> Result<HamiltonianSystem, PhaseError> {
        if self.n != self.hamiltonians.len() {
            return Err(PhaseError::HamiltonianCount {
                declared: self.n,
                actual: self.hamiltonians.len(),
            });
        }
        let params: HashMap<String, f64> = self
            .parameters
            .iter()
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        let mut exprs = Vec::with_capacity(self.hamiltonians.len());
        for (idx, src) in self.hamiltonians.iter().enumerate() {
            let name = self
                .names
                .get(idx)
                .cloned()
                .unwrap_or_else(|| format!("H{}", idx + 1));
            let e = Expression::parse(src).map_err(|source| PhaseError::Parse {
                name,
                source,
            })?;
            exprs.push(e.substitute(&params));
        }
        HamiltonianSystem::new(self.m, exprs, self.names.clone())
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("definition serializes")
    }
}
