//! Dense symmetric eigen-decomposition by cyclic Jacobi rotations, plus a few
//! small helpers shared by the rest of the crate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance used when checking that an input matrix is symmetric.
pub const SYMMETRY_TOL: f64 = 1e-9;

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOL: f64 = 1e-14;

/// Eigenvalues (descending) and orthonormal eigenvectors (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymmetricEigen {
    /// Rebuilds `V · f(Λ) · Vᵀ`.
    pub fn compose(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.vectors.nrows(), self.vectors.ncols(), |r, c| {
            self.vectors[(r, c)] * f(self.values[c])
        });
        symmetrize(&(scaled * self.vectors.transpose()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Largest absolute asymmetry `|a_ij - a_ji|` relative to the largest entry.
pub fn relative_asymmetry(a: &DMatrix<f64>) -> f64 {
    let scale = a.amax();
    if scale == 0.0 {
        return 0.0;
    }
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst / scale
}

/// `(A + Aᵀ) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            a[(i, i)]
        } else {
            0.5 * (a[(i, j)] + a[(j, i)])
        }
    })
}

/// Checks the matrix is square, finite and symmetric (relative tolerance
/// [`SYMMETRY_TOL`]) and returns the symmetrized matrix.
pub fn check_symmetric(name: &str, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::validation(
            name,
            format!("matrix is {}x{}, expected square", a.nrows(), a.ncols()),
        ));
    }
    if a.nrows() == 0 {
        return Err(Error::validation(name, "matrix is empty"));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation(name, "matrix has non-finite entries"));
    }
    let asym = relative_asymmetry(a);
    if asym > SYMMETRY_TOL {
        return Err(Error::validation(
            name,
            format!("matrix is not symmetric (relative asymmetry {asym:.3e})"),
        ));
    }
    Ok(symmetrize(a))
}

/// Eigen-decomposition of a real symmetric matrix.
///
/// Eigenvalues come back sorted in descending order. Each eigenvector is
/// signed so that its largest-magnitude component (the first one, on ties) is
/// non-negative, which makes the result reproducible bit for bit.
pub fn symmetric_eig(a: &DMatrix<f64>) -> Result<SymmetricEigen> {
    let mut a = check_symmetric("matrix", a)?;
    let n = a.nrows();
    let mut v = DMatrix::<f64>::identity(n, n);
    let threshold = OFF_DIAGONAL_TOL * a.norm();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > threshold {
        return Err(Error::NoConvergence(MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps the rotation order for exactly repeated eigenvalues.
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));

    let values = DVector::from_iterator(n, order.iter().map(|&k| a[(k, k)]));
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut pivot = 0;
        for r in 1..n {
            if v[(r, k)].abs() > v[(pivot, k)].abs() {
                pivot = r;
            }
        }
        let sign = if v[(pivot, k)] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vectors[(r, col)] = sign * v[(r, k)];
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
    }
    sum.sqrt()
}

/// One Jacobi rotation `A <- Pᵀ A P`, `V <- V P` annihilating `a_pq`.
fn rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = a.nrows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Inverse of a symmetric positive-definite matrix through its eigensystem.
/// `name` is used in the error when the matrix is not positive definite.
pub fn spd_inverse(name: &'static str, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = symmetric_eig(a)?;
    let min = eig.min_value();
    if min <= 0.0 {
        return Err(Error::NonPhysical {
            matrix: name,
            value: min,
        });
    }
    Ok(eig.compose(|x| 1.0 / x))
}

/// Relative Frobenius distance `‖a - b‖ / ‖b‖`.
pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let denom = b.norm();
    if denom == 0.0 {
        (a - b).norm()
    } else {
        (a - b).norm() / denom
    }
}
