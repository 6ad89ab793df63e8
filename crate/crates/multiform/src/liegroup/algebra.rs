//! Structure constants, validated Lie algebra data, and the on-disk algebra
//! format.
//!
//! A [`StructureConstants`] table is raw data: `c[i][j][k]` is the
//! coefficient of the k-th generator in the bracket of the i-th and j-th.
//! Its consistency measures ([`StructureConstants::antisymmetry_violation`],
//! [`StructureConstants::jacobi_violation`]) are callable on anything,
//! including deliberately broken tables. A [`LieAlgebra`] is the validated
//! package of a table plus a faithful matrix basis whose commutators
//! reproduce the table.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::LieGroupError;

/// Gate for "this expansion lies in the basis span" checks.
pub(crate) const SPAN_GATE: f64 = 1e-10;
/// Gate for exact-identity validation (antisymmetry, Jacobi, commutators).
const IDENTITY_GATE: f64 = 1e-12;

/// Raw bracket table `c[i][j][k]`, 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureConstants {
    n: usize,
    c: Vec<Vec<Vec<f64>>>,
}

impl StructureConstants {
    /// Wraps a full table; only the `n x n x n` shape is enforced here.
    pub fn new(c: Vec<Vec<Vec<f64>>>) -> Result<Self, LieGroupError> {
        let n = c.len();
        if n == 0 || c.iter().any(|p| p.len() != n || p.iter().any(|r| r.len() != n)) {
            return Err(LieGroupError::StructureShape {
                expected: n,
                got: c.iter().map(|p| p.len()).max().unwrap_or(0),
            });
        }
        Ok(StructureConstants { n, c })
    }

    /// Builds a table from entries `(i, j, k, value)` with `i < j`; the
    /// mirrored `(j, i, k, -value)` entries are filled in automatically, so
    /// the result is antisymmetric by construction.
    pub fn from_lower_entries(
        n: usize,
        entries: &[(usize, usize, usize, f64)],
    ) -> Result<Self, LieGroupError> {
        let mut c = vec![vec![vec![0.0; n]; n]; n];
        for &(i, j, k, value) in entries {
            if i >= n || j >= n || k >= n {
                return Err(LieGroupError::EntryOutOfRange { i, j, k, n });
            }
            if i >= j {
                return Err(LieGroupError::NotLowerPair { i, j });
            }
            if c[i][j][k] != 0.0 {
                return Err(LieGroupError::DuplicateEntry { i, j, k });
            }
            c[i][j][k] = value;
            c[j][i][k] = -value;
        }
        StructureConstants::new(c)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[i][j][k]
    }

    /// Coefficients of `[e_i, e_j]` in the generator basis.
    pub fn bracket_coefficients(&self, i: usize, j: usize) -> &[f64] {
        &self.c[i][j]
    }

    /// `max |c_ij^k + c_ji^k|`.
    pub fn antisymmetry_violation(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in 0..self.n {
                for k in 0..self.n {
                    worst = worst.max((self.c[i][j][k] + self.c[j][i][k]).abs());
                }
            }
        }
        worst
    }

    /// Largest violation of the Jacobi identity
    /// `sum_m c_ij^m c_mk^l + c_jk^m c_mi^l + c_ki^m c_mj^l = 0`.
    pub fn jacobi_violation(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in 0..self.n {
                for k in 0..self.n {
                    for l in 0..self.n {
                        let total: f64 = (0..self.n)
                            .map(|m| {
                                self.c[i][j][m] * self.c[m][k][l]
                                    + self.c[j][k][m] * self.c[m][i][l]
                                    + self.c[k][i][m] * self.c[m][j][l]
                            })
                            .sum();
                        worst = worst.max(total.abs());
                    }
                }
            }
        }
        worst
    }
}

/// A bracket table together with a faithful matrix basis. Construction
/// validates antisymmetry, the Jacobi identity, linear independence of the
/// basis, and that the basis commutators reproduce the table.
#[derive(Debug, Clone)]
pub struct LieAlgebra {
    constants: StructureConstants,
    basis: Vec<DMatrix<f64>>,
    /// `d^2 x n` matrix whose k-th column is the flattened k-th basis matrix;
    /// shared by every span expansion.
    vec_basis: DMatrix<f64>,
}

impl LieAlgebra {
    pub fn new(
        constants: StructureConstants,
        basis: Vec<DMatrix<f64>>,
    ) -> Result<Self, LieGroupError> {
        let n = constants.n();
        let d = basis.first().map(|b| b.nrows()).unwrap_or(0);
        if basis.len() != n || d == 0 || basis.iter().any(|b| b.shape() != (d, d)) {
            return Err(LieGroupError::BasisShape { n });
        }

        let violation = constants.antisymmetry_violation();
        if violation > IDENTITY_GATE {
            return Err(LieGroupError::Antisymmetry { violation });
        }
        let violation = constants.jacobi_violation();
        if violation > IDENTITY_GATE {
            return Err(LieGroupError::Jacobi { violation });
        }

        let vec_basis = DMatrix::from_fn(d * d, n, |row, k| basis[k][(row % d, row / d)]);
        let svd = vec_basis.clone().svd(false, false);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
        // NaN singular values must fail this gate too, hence the negation
        let well_spanned = smin > SPAN_GATE * smax.max(1.0);
        if !well_spanned {
            return Err(LieGroupError::DependentBasis { sigma: smin / smax.max(1.0) });
        }

        for i in 0..n {
            for j in (i + 1)..n {
                let mut commutator = &basis[i] * &basis[j] - &basis[j] * &basis[i];
                for (k, b) in basis.iter().enumerate() {
                    commutator -= constants.get(i, j, k) * b;
                }
                let gap = commutator.iter().map(|v| v.abs()).fold(0.0, f64::max);
                if gap > IDENTITY_GATE {
                    return Err(LieGroupError::CommutatorMismatch { i, j, gap });
                }
            }
        }

        Ok(LieAlgebra {
            constants,
            basis,
            vec_basis,
        })
    }

    /// Number of generators.
    pub fn n(&self) -> usize {
        self.constants.n()
    }

    /// Side length of the representation matrices.
    pub fn rep_dim(&self) -> usize {
        self.basis[0].nrows()
    }

    pub fn constants(&self) -> &StructureConstants {
        &self.constants
    }

    pub fn basis(&self) -> &[DMatrix<f64>] {
        &self.basis
    }

    pub fn basis_matrix(&self, k: usize) -> &DMatrix<f64> {
        &self.basis[k]
    }

    pub(crate) fn vec_basis(&self) -> &DMatrix<f64> {
        &self.vec_basis
    }

    /// Expands each pairwise commutator of `basis` in `basis` itself by least
    /// squares, recovering the bracket table the matrices actually satisfy.
    /// Fails if a commutator leaves the span.
    pub fn structure_from_basis(
        basis: &[DMatrix<f64>],
    ) -> Result<StructureConstants, LieGroupError> {
        let n = basis.len();
        let d = basis.first().map(|b| b.nrows()).unwrap_or(0);
        if n == 0 || d == 0 || basis.iter().any(|b| b.shape() != (d, d)) {
            return Err(LieGroupError::BasisShape { n });
        }
        let vec_basis = DMatrix::from_fn(d * d, n, |row, k| basis[k][(row % d, row / d)]);
        let svd = vec_basis.svd(true, true);

        let mut entries = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let commutator = &basis[i] * &basis[j] - &basis[j] * &basis[i];
                let b = DMatrix::from_fn(d * d, 1, |row, _| commutator[(row % d, row / d)]);
                let coeffs = svd
                    .solve(&b, 1e-13)
                    .map_err(|_| LieGroupError::SpanResidual { residual: f64::INFINITY })?;
                let mut residual = 0.0_f64;
                for (row, target) in b.iter().enumerate() {
                    let fit: f64 = (0..n)
                        .map(|k| basis[k][(row % d, row / d)] * coeffs[(k, 0)])
                        .sum();
                    residual = residual.max((fit - target).abs());
                }
                if residual > SPAN_GATE {
                    return Err(LieGroupError::SpanResidual { residual });
                }
                for k in 0..n {
                    let value = coeffs[(k, 0)];
                    if value != 0.0 {
                        entries.push((i, j, k, value));
                    }
                }
            }
        }
        StructureConstants::from_lower_entries(n, &entries)
    }
}

/// On-disk algebra description. Generator and coordinate indices in
/// `structure_constants` entries `[i, j, k, value]` are 1-based and require
/// `i < j`; the antisymmetric mirror is implied. Basis matrices are row-major
/// `rep_dim x rep_dim`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlgebraDefinition {
    pub n: usize,
    pub rep_dim: usize,
    pub structure_constants: Vec<(usize, usize, usize, f64)>,
    pub basis: Vec<Vec<Vec<f64>>>,
}

impl AlgebraDefinition {
    pub fn to_algebra(&self) -> Result<LieAlgebra, LieGroupError> {
        let entries: Vec<(usize, usize, usize, f64)> = self
            .structure_constants
            .iter()
            .map(|&(i, j, k, v)| {
                if i == 0 || j == 0 || k == 0 {
                    Err(LieGroupError::EntryOutOfRange {
                        i,
                        j,
                        k,
                        n: self.n,
                    })
                } else {
                    Ok((i - 1, j - 1, k - 1, v))
                }
            })
            .collect::<Result<_, _>>()?;
        let constants = StructureConstants::from_lower_entries(self.n, &entries)?;

        let d = self.rep_dim;
        let mut basis = Vec::with_capacity(self.basis.len());
        for rows in &self.basis {
            if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                return Err(LieGroupError::BasisShape { n: self.n });
            }
            basis.push(DMatrix::from_fn(d, d, |r, c| rows[r][c]));
        }
        LieAlgebra::new(constants, basis)
    }

    pub fn from_algebra(algebra: &LieAlgebra) -> AlgebraDefinition {
        let n = algebra.n();
        let d = algebra.rep_dim();
        let mut structure_constants = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                for k in 0..n {
                    let value = algebra.constants().get(i, j, k);
                    if value != 0.0 {
                        structure_constants.push((i + 1, j + 1, k + 1, value));
                    }
                }
            }
        }
        let basis = algebra
            .basis()
            .iter()
            .map(|b| (0..d).map(|r| (0..d).map(|c| b[(r, c)]).collect()).collect())
            .collect();
        AlgebraDefinition {
            n,
            rep_dim: d,
            structure_constants,
            basis,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("definition serializes")
    }
}

/// Quaternion left multiplications on the basis (1, i, j, k): a faithful
/// 4 x 4 real realization of su(2) with [L_i, L_j] = 2 eps_ijk L_k.
pub(crate) fn quaternion_left() -> [DMatrix<f64>; 3] {
    [
        DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, -1.0, 0.0, 0.0, //
                1.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, -1.0, //
                0.0, 0.0, 1.0, 0.0,
            ],
        ),
        DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 0.0, -1.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                1.0, 0.0, 0.0, 0.0, //
                0.0, -1.0, 0.0, 0.0,
            ],
        ),
        DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 0.0, 0.0, -1.0, //
                0.0, 0.0, -1.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                1.0, 0.0, 0.0, 0.0,
            ],
        ),
    ]
}
