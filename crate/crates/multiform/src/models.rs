//! Built-in model bundles: a Hamiltonian family packaged with its algebra,
//! chart, sampling hints, and reference invariants.
//!
//! Each bundle is a worked example of the framework at a different level of
//! structure: the plain oscillator pair and the Toda chains are involutive
//! families, the su(2) oscillator and the conformal particle carry
//! non-abelian bracket tables with product charts, and the Lorentz model is
//! a full matrix-representation family on a single-exponential chart. The
//! reference checks are quantities that stay constant along the model's
//! flows and serve as external regression anchors for the integrators.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::expr::{Binding, EvalError, Expression};
use crate::flows::Trajectory;
use crate::liegroup::{
    quaternion_left, GroupChart, GroupTrajectory, LieAlgebra, LieGroupError, StructureConstants,
};
use crate::phase::{PhaseError, PhasePoint, SystemDefinition};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("unknown model `{name}`")]
    Unknown { name: String },
    #[error("a toda chain needs at least 2 sites, got {m}")]
    ChainTooShort { m: usize },
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error(transparent)]
    LieGroup(#[from] LieGroupError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A quantity expected to stay constant along the model's flows. The
/// expression may use `p1..`, `q1..` and the time coordinates under either
/// spelling `t1..` or `tau1..`.
#[derive(Debug, Clone)]
pub struct ReferenceCheck {
    pub name: String,
    pub expression: Expression,
    pub tol: f64,
}

/// Drift of one reference quantity over a trajectory, relative to its value
/// at the start.
#[derive(Debug, Clone)]
pub struct CheckDrift {
    pub name: String,
    pub drift: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Sampling defaults for randomized verification on this model: a symmetric
/// box, optionally keeping configuration coordinates away from zero where
/// the potential is singular.
#[derive(Debug, Clone, Copy)]
pub struct SampleSpec {
    pub half_width: f64,
    pub min_abs_q: Option<f64>,
}

impl SampleSpec {
    /// `[-2, 2]` box with no singularity margin.
    pub fn plain() -> SampleSpec {
        SampleSpec {
            half_width: 2.0,
            min_abs_q: None,
        }
    }
}

/// A system with everything needed to verify it: optional algebra and chart
/// for the group layer, reference invariants, and sampling hints.
pub struct ModelBundle {
    pub name: String,
    pub description: String,
    pub definition: SystemDefinition,
    pub system: crate::phase::HamiltonianSystem,
    pub algebra: Option<LieAlgebra>,
    pub chart: Option<GroupChart>,
    pub reference_checks: Vec<ReferenceCheck>,
    pub sample: SampleSpec,
}

impl ModelBundle {
    /// Draws a phase point from the sampling box, p coordinates first. With
    /// `min_abs_q` set, configuration magnitudes are drawn from
    /// `[min, half_width]` with a random sign.
    pub fn sample_point(&self, rng: &mut ChaCha8Rng) -> PhasePoint {
        let m = self.system.m();
        let w = self.sample.half_width;
        let p = (0..m).map(|_| rng.gen_range(-w..w)).collect();
        let q = (0..m)
            .map(|_| match self.sample.min_abs_q {
                None => rng.gen_range(-w..w),
                Some(min) => {
                    let magnitude = rng.gen_range(min..w);
                    if rng.gen_bool(0.5) {
                        magnitude
                    } else {
                        -magnitude
                    }
                }
            })
            .collect();
        PhasePoint::new(p, q).expect("box samples are finite")
    }

    /// Reference drifts along a plain multi-time trajectory.
    pub fn reference_drift(&self, traj: &Trajectory) -> Result<Vec<CheckDrift>, ModelError> {
        self.drift_over(traj.samples().iter().map(|s| (&s.state[..], &s.t[..])))
    }

    /// Reference drifts along a chart-twisted group trajectory.
    pub fn reference_drift_group(
        &self,
        traj: &GroupTrajectory,
    ) -> Result<Vec<CheckDrift>, ModelError> {
        self.drift_over(traj.samples().iter().map(|s| (&s.state[..], &s.tau[..])))
    }

    fn drift_over<'a>(
        &self,
        samples: impl Iterator<Item = (&'a [f64], &'a [f64])>,
    ) -> Result<Vec<CheckDrift>, ModelError> {
        let m = self.system.m();
        let mut initial: Vec<f64> = Vec::new();
        let mut drift = vec![0.0_f64; self.reference_checks.len()];
        for (state, times) in samples {
            let mut binding = Binding::new();
            for mu in 0..m {
                binding.set(format!("p{}", mu + 1), state[mu]);
                binding.set(format!("q{}", mu + 1), state[m + mu]);
            }
            for (i, t) in times.iter().enumerate() {
                binding.set(format!("t{}", i + 1), *t);
                binding.set(format!("tau{}", i + 1), *t);
            }
            if initial.is_empty() {
                initial = self
                    .reference_checks
                    .iter()
                    .map(|c| c.expression.eval(&binding))
                    .collect::<Result<_, _>>()?;
            } else {
                for (i, check) in self.reference_checks.iter().enumerate() {
                    let value = check.expression.eval(&binding)?;
                    drift[i] = drift[i].max((value - initial[i]).abs());
                }
            }
        }
        Ok(self
            .reference_checks
            .iter()
            .zip(initial.iter().zip(drift.iter()))
            .map(|(check, (v0, d))| CheckDrift {
                name: check.name.clone(),
                drift: *d,
                tol: check.tol,
                pass: *d <= check.tol * v0.abs().max(1.0),
            })
            .collect())
    }
}

/// Canonical built-in names, in presentation order.
pub fn builtin_names() -> &'static [&'static str] {
    &["ho", "ho-su2", "toda-3", "conformal", "lorentz"]
}

/// Looks a bundle up by name. `toda-<m>` is accepted for any chain length
/// of at least 2; `conformal` uses unit mass and unit coupling.
pub fn builtin(name: &str) -> Result<ModelBundle, ModelError> {
    match name {
        "ho" => Ok(harmonic_oscillator()),
        "ho-su2" => Ok(harmonic_oscillator_su2()),
        "conformal" => Ok(conformal_model(1.0, 1.0)),
        "lorentz" => Ok(lorentz_model()),
        _ => match name.strip_prefix("toda-").and_then(|s| s.parse().ok()) {
            Some(m) => toda_chain(m),
            None => Err(ModelError::Unknown { name: name.into() }),
        },
    }
}

fn parse(src: &str) -> Expression {
    Expression::parse(src).expect("built-in model expressions parse")
}

fn check(name: &str, src: &str, tol: f64) -> ReferenceCheck {
    ReferenceCheck {
        name: name.into(),
        expression: parse(src),
        tol,
    }
}

fn definition(m: usize, hamiltonians: &[&str], names: &[&str]) -> SystemDefinition {
    SystemDefinition {
        m,
        n: hamiltonians.len(),
        hamiltonians: hamiltonians.iter().map(|s| s.to_string()).collect(),
        names: names.iter().map(|s| s.to_string()).collect(),
        parameters: Default::default(),
    }
}

/// Isotropic two-dimensional oscillator with its angular momentum: the
/// minimal involutive pair.
pub fn harmonic_oscillator() -> ModelBundle {
    let definition = definition(
        2,
        &["(p1^2 + q1^2 + p2^2 + q2^2)/2", "p1*q2 - p2*q1"],
        &["H", "J2"],
    );
    let system = definition.to_system().expect("built-in model is valid");
    ModelBundle {
        name: "ho".into(),
        description: "isotropic oscillator with angular momentum (involutive pair)".into(),
        definition,
        system,
        algebra: None,
        chart: None,
        reference_checks: vec![
            check("energy", "(p1^2 + q1^2 + p2^2 + q2^2)/2", 1e-7),
            check("angular-momentum", "p1*q2 - p2*q1", 1e-7),
        ],
        sample: SampleSpec::plain(),
    }
}

/// The same oscillator extended to the full quadratic family
/// `(H, J1, J2, J3)`, whose brackets close as a center plus su(2) with
/// `{J_i, J_j} = -2 eps_ijk J_k`, packaged with a faithful quaternion
/// realization and a product chart.
pub fn harmonic_oscillator_su2() -> ModelBundle {
    let definition = definition(
        2,
        &[
            "(p1^2 + q1^2 + p2^2 + q2^2)/2",
            "(p1^2 + q1^2 - p2^2 - q2^2)/2",
            "p1*q2 - p2*q1",
            "p1*p2 + q1*q2",
        ],
        &["H", "J1", "J2", "J3"],
    );
    let system = definition.to_system().expect("built-in model is valid");
    let constants = StructureConstants::from_lower_entries(
        4,
        &[(1, 2, 3, -2.0), (1, 3, 2, 2.0), (2, 3, 1, -2.0)],
    )
    .expect("su(2) table is consistent");
    let [l1, l2, l3] = quaternion_left();
    let algebra = LieAlgebra::new(constants, vec![DMatrix::identity(4, 4), -l1, -l2, -l3])
        .expect("quaternion realization matches the table");
    ModelBundle {
        name: "ho-su2".into(),
        description: "oscillator quadratic family closing as center + su(2)".into(),
        definition,
        system,
        algebra: Some(algebra),
        chart: Some(GroupChart::product(vec![0, 1, 2, 3])),
        reference_checks: vec![
            check("energy", "(p1^2 + q1^2 + p2^2 + q2^2)/2", 1e-7),
            check(
                "j-norm-minus-energy-sq",
                "((p1^2 + q1^2 - p2^2 - q2^2)/2)^2 + (p1*q2 - p2*q1)^2 + (p1*p2 + q1*q2)^2 - ((p1^2 + q1^2 + p2^2 + q2^2)/2)^2",
                1e-7,
            ),
        ],
        sample: SampleSpec::plain(),
    }
}

/// Periodic Toda chain on `m` sites with its first two conserved
/// Hamiltonians; `m = 2` doubles the single exponential pair.
pub fn toda_chain(m: usize) -> Result<ModelBundle, ModelError> {
    if m < 2 {
        return Err(ModelError::ChainTooShort { m });
    }
    let wrap = |mu: usize| if mu == 0 { m } else { mu };
    let mut h1 = String::new();
    let mut h2 = String::new();
    let mut momentum = String::new();
    for mu in 1..=m {
        let prev = wrap(mu - 1);
        if mu > 1 {
            h1.push_str(" + ");
            h2.push_str(" + ");
            momentum.push_str(" + ");
        }
        h1.push_str(&format!("p{mu}^2/2 + exp(q{mu} - q{prev})"));
        h2.push_str(&format!(
            "p{mu}^3/3 + (p{mu} + p{prev})*exp(q{mu} - q{prev})"
        ));
        momentum.push_str(&format!("p{mu}"));
    }
    let definition = definition(m, &[&h1, &h2], &["H1", "H2"]);
    let system = definition.to_system().expect("built-in model is valid");
    Ok(ModelBundle {
        name: format!("toda-{m}"),
        description: format!("periodic {m}-site toda chain with its first two hamiltonians"),
        definition,
        system,
        algebra: None,
        chart: None,
        reference_checks: vec![
            check("energy", &h1, 1e-7),
            check("higher-hamiltonian", &h2, 1e-7),
            check("total-momentum", &momentum, 1e-7),
        ],
        sample: SampleSpec::plain(),
    })
}

/// Conformal particle `H = p^2/2mass + a/q^2` with the dilation generator:
/// the two brackets close on the affine algebra `[e1, e2] = e1`, and the
/// chart-twisted flow conserves a rescaled energy and a shifted dilation
/// charge.
pub fn conformal_model(mass: f64, a: f64) -> ModelBundle {
    let mut definition = definition(1, &["p1^2/(2*mass) + a/q1^2", "p1*q1/2"], &["H", "J"]);
    definition.parameters = [("mass".to_string(), mass), ("a".to_string(), a)]
        .into_iter()
        .collect();
    let system = definition.to_system().expect("built-in model is valid");
    let constants =
        StructureConstants::from_lower_entries(2, &[(0, 1, 0, 1.0)]).expect("affine table");
    let basis = vec![
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, 0.5]),
    ];
    let algebra = LieAlgebra::new(constants, basis).expect("affine realization");

    let params = [("mass".to_string(), mass), ("a".to_string(), a)]
        .into_iter()
        .collect();
    let energy = "p1^2/(2*mass) + a/q1^2";
    let scaled = parse(&format!("exp(tau2)*({energy})")).substitute(&params);
    let charge = parse(&format!("p1*q1/2 - tau1*({energy})")).substitute(&params);

    ModelBundle {
        name: "conformal".into(),
        description: "conformal particle with dilation charge on the affine algebra".into(),
        definition,
        system,
        algebra: Some(algebra),
        chart: Some(GroupChart::product(vec![1, 0])),
        reference_checks: vec![
            ReferenceCheck {
                name: "scaled-energy".into(),
                expression: scaled,
                tol: 1e-6,
            },
            ReferenceCheck {
                name: "dilation-charge".into(),
                expression: charge,
                tol: 1e-6,
            },
        ],
        sample: SampleSpec {
            half_width: 2.0,
            min_abs_q: Some(0.5),
        },
    }
}

/// Metric of the Lorentz model, signature `(-, +, +, +)`.
fn eta() -> [f64; 4] {
    [-1.0, 1.0, 1.0, 1.0]
}

/// Index pairs of the six generators, in presentation order.
const LORENTZ_PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// `(M_ab)^mu_nu = delta_a^mu eta_b_nu - delta_b^mu eta_a_nu`.
fn lorentz_generator(a: usize, b: usize) -> DMatrix<f64> {
    let eta = eta();
    DMatrix::from_fn(4, 4, |mu, nu| {
        let mut value = 0.0;
        if mu == a && nu == b {
            value += eta[b];
        }
        if mu == b && nu == a {
            value -= eta[a];
        }
        value
    })
}

/// Bracket table straight from the metric:
/// `[M_ab, M_cd] = eta_bc M_ad - eta_ac M_bd - eta_bd M_ac + eta_ad M_bc`.
fn lorentz_constants_from_metric() -> StructureConstants {
    let eta = eta();
    let position = |x: usize, y: usize| -> Option<(usize, f64)> {
        if x == y {
            return None;
        }
        let (pair, sign) = if x < y { ((x, y), 1.0) } else { ((y, x), -1.0) };
        LORENTZ_PAIRS
            .iter()
            .position(|p| *p == pair)
            .map(|idx| (idx, sign))
    };
    let mut c = vec![vec![vec![0.0; 6]; 6]; 6];
    for (i, &(a, b)) in LORENTZ_PAIRS.iter().enumerate() {
        for (j, &(cc, d)) in LORENTZ_PAIRS.iter().enumerate() {
            for (x, y, coeff) in [
                (a, d, eta[b] * f64::from(b == cc)),
                (b, d, -eta[a] * f64::from(a == cc)),
                (a, cc, -eta[b] * f64::from(b == d)),
                (b, cc, eta[a] * f64::from(a == d)),
            ] {
                if coeff != 0.0 {
                    if let Some((k, sign)) = position(x, y) {
                        c[i][j][k] += coeff * sign;
                    }
                }
            }
        }
    }
    StructureConstants::new(c).expect("metric table is well formed")
}

/// Bilinear Hamiltonians `H_i = -p M_i q` as expressions over the state
/// variables, one per basis matrix. The representation must act on the
/// configuration space, so its dimension is the number of `q`s.
pub fn matrix_rep_hamiltonians(algebra: &LieAlgebra) -> Vec<Expression> {
    let d = algebra.rep_dim();
    algebra
        .basis()
        .iter()
        .map(|m| {
            let mut total = Expression::constant(0.0);
            for a in 0..d {
                for b in 0..d {
                    let entry = m[(a, b)];
                    if entry != 0.0 {
                        total = Expression::add(
                            total,
                            Expression::mul(
                                Expression::constant(-entry),
                                Expression::mul(
                                    Expression::variable(format!("p{}", a + 1)),
                                    Expression::variable(format!("q{}", b + 1)),
                                ),
                            ),
                        );
                    }
                }
            }
            total
        })
        .collect()
}

/// The six boost and rotation generators acting on four-dimensional phase
/// space through `H_ab = -p M_ab q`, on a single-exponential chart. The
/// bracket table is derived from the generator commutators and cross-checked
/// against the metric formula at construction.
pub fn lorentz_model() -> ModelBundle {
    let basis: Vec<DMatrix<f64>> = LORENTZ_PAIRS
        .iter()
        .map(|&(a, b)| lorentz_generator(a, b))
        .collect();
    let derived = LieAlgebra::structure_from_basis(&basis).expect("generators span their brackets");
    let metric = lorentz_constants_from_metric();
    for i in 0..6 {
        for j in 0..6 {
            for k in 0..6 {
                let gap = (derived.get(i, j, k) - metric.get(i, j, k)).abs();
                assert!(
                    gap < 1e-12,
                    "bracket table derivations disagree at ({i},{j},{k}) by {gap}"
                );
            }
        }
    }
    let algebra = LieAlgebra::new(metric, basis).expect("lorentz realization matches its table");

    let hamiltonians = matrix_rep_hamiltonians(&algebra);
    let names: Vec<String> = LORENTZ_PAIRS
        .iter()
        .map(|(a, b)| format!("H{a}{b}"))
        .collect();
    let sources: Vec<String> = hamiltonians.iter().map(|h| h.to_string()).collect();
    let definition = SystemDefinition {
        m: 4,
        n: 6,
        hamiltonians: sources,
        names: names.clone(),
        parameters: Default::default(),
    };
    let system = crate::phase::HamiltonianSystem::new(4, hamiltonians, names)
        .expect("built-in model is valid");

    ModelBundle {
        name: "lorentz".into(),
        description: "lorentz generators as bilinear hamiltonians on a single-exponential chart"
            .into(),
        definition,
        system,
        algebra: Some(algebra),
        chart: Some(GroupChart::single()),
        reference_checks: vec![
            check("pairing", "p1*q1 + p2*q2 + p3*q3 + p4*q4", 1e-6),
            check(
                "q-interval",
                "-q1^2 + q2^2 + q3^2 + q4^2",
                1e-6,
            ),
            check(
                "p-interval",
                "-p1^2 + p2^2 + p3^2 + p4^2",
                1e-6,
            ),
        ],
        sample: SampleSpec::plain(),
    }
}

/// Standalone su(2) with the quaternion left realization,
/// `[e_i, e_j] = 2 eps_ijk e_k`. Sign conventions differ from the oscillator
/// bundle's table; this one exists for algebra-level demonstrations that do
/// not reference a Hamiltonian family.
pub fn su2() -> LieAlgebra {
    let constants = StructureConstants::from_lower_entries(
        3,
        &[(0, 1, 2, 2.0), (1, 2, 0, 2.0), (0, 2, 1, -2.0)],
    )
    .expect("su(2) table");
    LieAlgebra::new(constants, quaternion_left().to_vec()).expect("quaternion realization")
}
