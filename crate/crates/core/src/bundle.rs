//! Coupled-line bundles: per-unit-length L/C matrices and the modal
//! decomposition that yields the characteristic impedance matrix.
//!
//! With `L⁻¹ = U Λ Uᵀ`, `S = U Λ^{-1/2}` (so `L = S Sᵀ`) and
//! `Sᵀ C S = W Μ Wᵀ`, the modal voltage transform is `M_v = S W Μ^{-1/4}`.
//! In those coordinates every mode is a line with unit characteristic
//! impedance and delay `length · √μ_k`, and `Z_c = M_v M_vᵀ`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_symmetric, symmetric_eig, symmetrize};

/// Tolerance for treating a tiny positive off-diagonal C entry as zero,
/// relative to the largest diagonal entry.
const MAXWELL_TOL: f64 = 1e-12;

/// Per-unit-length inductance (H/m) and capacitance (F/m) of an n-wire bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrices {
    name: String,
    l: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl CouplingMatrices {
    /// Validates and symmetrizes the matrices.
    pub fn new(name: impl Into<String>, l: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let l = check_symmetric("L", &l)?;
        let c = check_symmetric("C", &c)?;
        if l.nrows() != c.nrows() {
            return Err(Error::validation(
                "C",
                format!("C is {0}x{0} but L is {1}x{1}", c.nrows(), l.nrows()),
            ));
        }
        let n = l.nrows();

        let diag_scale = (0..n).map(|i| c[(i, i)].abs()).fold(0.0, f64::max);
        for i in 0..n {
            for j in 0..n {
                if i != j && c[(i, j)] > MAXWELL_TOL * diag_scale {
                    return Err(Error::validation(
                        "C",
                        format!(
                            "off-diagonal C[{},{}] = {:e} is positive (not Maxwellian)",
                            i + 1,
                            j + 1,
                            c[(i, j)]
                        ),
                    ));
                }
            }
            let row_sum: f64 = c.row(i).sum();
            if row_sum <= 0.0 {
                return Err(Error::validation(
                    "C",
                    format!("row {} sums to {row_sum:e}, expected > 0", i + 1),
                ));
            }
        }

        for (name, m) in [("L", &l), ("C", &c)] {
            let min = symmetric_eig(m)?.min_value();
            if min <= 0.0 {
                return Err(Error::validation(
                    name,
                    format!("matrix is not positive definite (eigenvalue {min:e})"),
                ));
            }
        }

        Ok(CouplingMatrices {
            name: name.into(),
            l,
            c,
        })
    }

    /// A bundle of `n` identical, uncoupled wires.
    pub fn uncoupled(n: usize, impedance: f64, velocity: f64) -> Result<Self> {
        if !(impedance > 0.0 && velocity > 0.0) {
            return Err(Error::param("impedance and velocity must be positive"));
        }
        let l = DMatrix::from_diagonal_element(n, n, impedance / velocity);
        let c = DMatrix::from_diagonal_element(n, n, 1.0 / (impedance * velocity));
        Self::new(format!("uncoupled-{n}x{impedance}"), l, c)
    }

    pub fn n(&self) -> usize {
        self.l.nrows()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// True when both matrices are diagonal.
    pub fn is_uncoupled(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..n).all(|j| i == j || (self.l[(i, j)] == 0.0 && self.c[(i, j)] == 0.0)))
    }

    /// Applies a wire permutation: wire `perm[k]` of `self` becomes wire `k`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        if perm.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: perm.len(),
            });
        }
        let l = DMatrix::from_fn(n, n, |i, j| self.l[(perm[i], perm[j])]);
        let c = DMatrix::from_fn(n, n, |i, j| self.c[(perm[i], perm[j])]);
        Self::new(self.name.clone(), l, c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: BundleFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn to_file_format(&self) -> BundleFile {
        BundleFile {
            n: self.n(),
            name: self.name.clone(),
            l: rows(&self.l),
            c: rows(&self.c),
        }
    }
}

/// On-disk bundle description; matrices are full and row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleFile {
    pub n: usize,
    #[serde(default)]
    pub name: String,
    #[serde(rename = "L")]
    pub l: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
}

impl TryFrom<BundleFile> for CouplingMatrices {
    type Error = Error;

    fn try_from(file: BundleFile) -> Result<Self> {
        let l = matrix_from_rows("L", file.n, &file.l)?;
        let c = matrix_from_rows("C", file.n, &file.c)?;
        CouplingMatrices::new(file.name, l, c)
    }
}

pub(crate) fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn matrix_from_rows(name: &str, n: usize, data: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::validation(name, "n must be at least 1"));
    }
    if data.len() != n || data.iter().any(|r| r.len() != n) {
        return Err(Error::validation(
            name,
            format!("expected a full {n}x{n} row-major matrix"),
        ));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| data[i][j]))
}

/// Modal transformation and characteristic impedance of a bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalBasis {
    /// Modal voltage transform: `v = M_v · v_mode`.
    pub mv: DMatrix<f64>,
    /// `M_v⁻¹`, built in closed form from the two eigensystems.
    pub mi: DMatrix<f64>,
    /// Eigenvalues of `Sᵀ C S`, in (s/m)².
    pub m_val: DVector<f64>,
    /// Modal phase velocities `1/√m_val` (m/s).
    pub velocities: DVector<f64>,
    /// Characteristic impedance matrix (Ω).
    pub zc: DMatrix<f64>,
    /// Characteristic admittance `Z_c⁻¹ = M_iᵀ M_i` (S).
    pub yc: DMatrix<f64>,
}

impl ModalBasis {
    pub fn n(&self) -> usize {
        self.mv.nrows()
    }

    /// Per-mode one-way delay of a line of the given length.
    pub fn delays(&self, length: f64) -> Vec<f64> {
        self.m_val.iter().map(|m| length * m.sqrt()).collect()
    }
}

/// Intermediate products of the decomposition, kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionTrace {
    pub l_vec: DMatrix<f64>,
    pub l_val: DVector<f64>,
    pub s: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub m_vec: DMatrix<f64>,
    pub m_val: DVector<f64>,
}

/// Runs the eigendecomposition pipeline on a validated bundle.
pub fn characteristic_impedance(bundle: &CouplingMatrices) -> Result<(ModalBasis, DecompositionTrace)> {
    let n = bundle.n();

    // Eigensystem of L⁻¹ taken from that of L: same vectors, reciprocal
    // values, reversed so the L⁻¹ eigenvalues stay in descending order.
    let l_eig = symmetric_eig(bundle.l())?;
    let l_min = l_eig.min_value();
    if l_min <= 0.0 {
        return Err(Error::NonPhysical {
            matrix: "L",
            value: l_min,
        });
    }
    let l_val = DVector::from_fn(n, |k, _| 1.0 / l_eig.values[n - 1 - k]);
    let l_vec = DMatrix::from_fn(n, n, |r, k| l_eig.vectors[(r, n - 1 - k)]);

    let s = DMatrix::from_fn(n, n, |r, k| l_vec[(r, k)] / l_val[k].sqrt());
    let m = symmetrize(&(s.transpose() * bundle.c() * &s));

    let m_eig = symmetric_eig(&m)?;
    let m_min = m_eig.min_value();
    if m_min <= 0.0 {
        return Err(Error::NonPhysical {
            matrix: "M",
            value: m_min,
        });
    }
    let m_val = m_eig.values.clone();
    let m_vec = m_eig.vectors.clone();

    let sw = &s * &m_vec;
    let mv = DMatrix::from_fn(n, n, |r, k| sw[(r, k)] * m_val[k].powf(-0.25));

    // M_i = Μ^{1/4} Wᵀ Λ^{1/2} Uᵀ
    let lu = DMatrix::from_fn(n, n, |k, c| l_val[k].sqrt() * l_vec[(c, k)]);
    let wt_lu = m_vec.transpose() * lu;
    let mi = DMatrix::from_fn(n, n, |k, c| m_val[k].powf(0.25) * wt_lu[(k, c)]);

    let zc = symmetrize(&(&mv * mv.transpose()));
    let yc = symmetrize(&(mi.transpose() * &mi));
    let velocities = m_val.map(|x| 1.0 / x.sqrt());

    Ok((
        ModalBasis {
            mv,
            mi,
            m_val: m_val.clone(),
            velocities,
            zc,
            yc,
        },
        DecompositionTrace {
            l_vec,
            l_val,
            s,
            m,
            m_vec,
            m_val,
        },
    ))
}

/// Builds L/C for a homogeneous medium with the given impedance matrix:
/// `L = Z_c / v`, `C = Z_c⁻¹ / v`.
pub fn lc_from_impedance(
    name: impl Into<String>,
    zc: &DMatrix<f64>,
    velocity: f64,
) -> Result<CouplingMatrices> {
    if !(velocity > 0.0 && velocity.is_finite()) {
        return Err(Error::param(format!("velocity must be positive, got {velocity}")));
    }
    let zc = check_symmetric("Zc", zc)?;
    let eig = symmetric_eig(&zc)?;
    let min = eig.min_value();
    if min <= 0.0 {
        return Err(Error::validation(
            "Zc",
            format!("matrix is not positive definite (eigenvalue {min:e})"),
        ));
    }
    let y = eig.compose(|x| 1.0 / x);
    CouplingMatrices::new(name, &zc / velocity, y / velocity)
}

/// Builds L/C for a homogeneous medium from an admittance matrix:
/// `C = Y / v`, `L = Y⁻¹ / v`. Zero entries of `Y` stay exactly zero in C.
pub fn lc_from_admittance(
    name: impl Into<String>,
    y: &DMatrix<f64>,
    velocity: f64,
) -> Result<CouplingMatrices> {
    if !(velocity > 0.0 && velocity.is_finite()) {
        return Err(Error::param(format!("velocity must be positive, got {velocity}")));
    }
    let y = check_symmetric("Y", y)?;
    let z = crate::linalg::spd_inverse("Y", &y)?;
    CouplingMatrices::new(name, z / velocity, y / velocity)
}
