//! Dense complex linear algebra: general eigendecomposition, inverses,
//! spectral Sylvester solves and the JSON matrix format.
//!
//! Eigenvectors come from the complex Schur form `K = Q T Q†` followed by
//! back-substitution on the triangular factor, the same route LAPACK's
//! `ztrevc` takes. Eigenpairs are returned in a canonical order
//! (real part ascending, then imaginary part ascending) so that downstream
//! Gram matrices are reproducible.

use nalgebra::{DMatrix, DVector, Schur, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Right-eigenvector condition numbers above this mark a matrix as defective.
pub const NEAR_DEFECTIVE_COND: f64 = 1e12;
/// Resolution of the canonical eigenvalue ordering, relative to `max(1, ‖K‖)`.
pub const ORDER_RESOLUTION: f64 = 1e-12;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Converts a real matrix to a complex one.
pub fn complexify(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| c64(x, 0.0))
}

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Largest absolute imaginary part.
pub fn max_imag(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.im.abs()))
}

pub fn hermiticity_error(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn ensure_square_finite(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(m.nrows())
}

/// Ratio of extreme singular values; `inf` for singular input.
pub fn condition_number(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return f64::INFINITY;
    }
    let Some(svd) = SVD::try_new(m.clone(), false, false, f64::EPSILON, svd_iterations(m)) else {
        return f64::INFINITY;
    };
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

pub fn svd_iterations(m: &CMatrix) -> usize {
    1000 * m.nrows().max(m.ncols()).max(10)
}

/// Result of [`eig_general`].
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub eigenvalues: Vec<C64>,
    /// Columns are unit-norm right eigenvectors, in the order of `eigenvalues`.
    pub right_vectors: CMatrix,
    /// Condition number of `right_vectors`.
    pub condition: f64,
    pub near_defective: bool,
}

impl EigDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Largest eigenpair residual `‖K v_n − Λ_n v_n‖`.
    pub fn residual(&self, k: &CMatrix) -> f64 {
        (0..self.dim())
            .map(|n| {
                let v = self.right_vectors.column(n);
                (k * v - v * self.eigenvalues[n]).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Maps a defective decomposition to [`Error::NearDefective`].
    pub fn require_diagonalizable(self) -> Result<Self> {
        if self.near_defective {
            Err(Error::NearDefective {
                cond: self.condition,
            })
        } else {
            Ok(self)
        }
    }
}

/// Permutation that sorts `values` canonically: real part ascending, then
/// imaginary part, both quantized at `resolution`. The sort is stable so ties
/// keep the order the eigensolver produced.
pub fn canonical_order(values: &[C64], resolution: f64) -> Vec<usize> {
    let key = |z: &C64| ((z.re / resolution).round(), (z.im / resolution).round());
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let (ra, ia) = key(&values[a]);
        let (rb, ib) = key(&values[b]);
        ra.total_cmp(&rb).then(ia.total_cmp(&ib))
    });
    idx
}

/// Eigenvectors of an upper-triangular matrix by back-substitution.
/// Column `k` solves `(T − t_kk) y = 0` with `y_k = 1` and `y_j = 0` for `j > k`.
fn triangular_eigenvectors(t: &CMatrix) -> CMatrix {
    let n = t.nrows();
    let tnorm = t.norm().max(f64::MIN_POSITIVE);
    let smin = (f64::EPSILON * tnorm).max(f64::MIN_POSITIVE);
    let mut y = CMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        y[(k, k)] = c64(1.0, 0.0);
        for j in (0..k).rev() {
            let mut s = c64(0.0, 0.0);
            for l in (j + 1)..=k {
                s += t[(j, l)] * y[(l, k)];
            }
            let mut d = t[(j, j)] - lambda;
            if d.norm() < smin {
                d = c64(smin, 0.0);
            }
            y[(j, k)] = -s / d;
        }
    }
    y
}

/// General (non-Hermitian) eigendecomposition `K v_n = Λ_n v_n`.
///
/// A large eigenvector condition number is reported through
/// `near_defective`, not as an error.
pub fn eig_general(k: &CMatrix) -> Result<EigDecomposition> {
    let n = ensure_square_finite(k)?;
    if n == 0 {
        return Ok(EigDecomposition {
            eigenvalues: vec![],
            right_vectors: CMatrix::zeros(0, 0),
            condition: 1.0,
            near_defective: false,
        });
    }
    let k00 = k[(0, 0)];
    if k.iter().enumerate().all(|(i, z)| if i % (n + 1) == 0 { *z == k00 } else { *z == c64(0.0, 0.0) }) {
        // scalar matrix; the QR iteration can produce NaNs on exact zeros
        return Ok(EigDecomposition {
            eigenvalues: vec![k00; n],
            right_vectors: CMatrix::identity(n, n),
            condition: 1.0,
            near_defective: false,
        });
    }
    let schur = Schur::try_new(k.clone(), f64::EPSILON, 1000 * n.max(10)).ok_or(Error::NonConvergence)?;
    let (q, t) = schur.unpack();
    if q.iter().chain(t.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonConvergence);
    }
    let y = triangular_eigenvectors(&t);
    let mut vectors = &q * y;
    for mut col in vectors.column_iter_mut() {
        let nrm = col.norm();
        if nrm > 0.0 {
            col /= c64(nrm, 0.0);
        }
    }
    let raw: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let resolution = ORDER_RESOLUTION * k.norm().max(1.0);
    let order = canonical_order(&raw, resolution);
    let eigenvalues: Vec<C64> = order.iter().map(|&i| raw[i]).collect();
    let right_vectors = CMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
    let condition = condition_number(&right_vectors);
    Ok(EigDecomposition {
        eigenvalues,
        right_vectors,
        condition,
        near_defective: !(condition <= NEAR_DEFECTIVE_COND),
    })
}

/// Matrix inverse guarded by a condition-number check.
pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    ensure_square_finite(a)?;
    let cond = condition_number(a);
    if !(cond <= NEAR_DEFECTIVE_COND) {
        return Err(Error::SingularMatrix { cond });
    }
    a.clone()
        .try_inverse()
        .ok_or(Error::SingularMatrix { cond })
}

/// Spectral solver for `X Γ + Γ Xᵀ = Y` built once per `X`.
///
/// With `X = U D U⁻¹` the equation becomes `D G + G D = U⁻¹ Y U⁻ᵀ`, so
/// `G_ij = (U⁻¹ Y U⁻ᵀ)_ij / (x_i + x_j)` and `Γ = U G Uᵀ`.
#[derive(Debug, Clone)]
pub struct SpectralSylvester {
    pub values: Vec<C64>,
    pub u: CMatrix,
    pub u_inv: CMatrix,
}

impl SpectralSylvester {
    pub fn new(x: &CMatrix) -> Result<Self> {
        let eig = eig_general(x)?.require_diagonalizable()?;
        let n = eig.dim();
        let scale = x.norm().max(1.0);
        for i in 0..n {
            for j in i..n {
                let s = eig.eigenvalues[i] + eig.eigenvalues[j];
                if s.norm() < 1e-12 * scale {
                    return Err(Error::SingularPencil { i, j, sum: s.norm() });
                }
            }
        }
        let u_inv = inverse(&eig.right_vectors)?;
        Ok(Self {
            values: eig.eigenvalues,
            u: eig.right_vectors,
            u_inv,
        })
    }

    pub fn solve(&self, y: &CMatrix) -> Result<CMatrix> {
        let n = self.values.len();
        if y.nrows() != n || y.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "Sylvester right-hand side is {}x{}, expected {n}x{n}",
                y.nrows(),
                y.ncols()
            )));
        }
        let mut g = &self.u_inv * y * self.u_inv.transpose();
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] /= self.values[i] + self.values[j];
            }
        }
        Ok(&self.u * g * self.u.transpose())
    }
}

/// Solves `X Γ + Γ Xᵀ = Y` by the spectral route.
pub fn solve_sylvester(x: &CMatrix, y: &CMatrix) -> Result<CMatrix> {
    ensure_square_finite(y)?;
    SpectralSylvester::new(x)?.solve(y)
}

/// Solves the general pencil `A Γ + Γ B = C` with `A`, `B` diagonalizable.
pub fn solve_sylvester_pair(a: &CMatrix, b: &CMatrix, c: &CMatrix) -> Result<CMatrix> {
    let ea = eig_general(a)?.require_diagonalizable()?;
    let eb = eig_general(b)?.require_diagonalizable()?;
    let (n, m) = (ea.dim(), eb.dim());
    if c.nrows() != n || c.ncols() != m {
        return Err(Error::ShapeMismatch(format!(
            "pencil right-hand side is {}x{}, expected {n}x{m}",
            c.nrows(),
            c.ncols()
        )));
    }
    let scale = a.norm().max(b.norm()).max(1.0);
    let mut sums = CMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let s = ea.eigenvalues[i] + eb.eigenvalues[j];
            if s.norm() < 1e-12 * scale {
                return Err(Error::SingularPencil { i, j, sum: s.norm() });
            }
            sums[(i, j)] = s;
        }
    }
    let ua_inv = inverse(&ea.right_vectors)?;
    let ub_inv = inverse(&eb.right_vectors)?;
    let solve = |rhs: &CMatrix| {
        let g = (&ua_inv * rhs * &eb.right_vectors).component_div(&sums);
        &ea.right_vectors * g * &ub_inv
    };
    // Nearly cancelling eigenvalue sums amplify rounding in the naive solve;
    // refinement against an extra-precise residual recovers the lost digits.
    let mut x = solve(c);
    for _ in 0..SYLVESTER_REFINEMENTS {
        x += solve(&sylvester_residual(a, b, &x, c));
    }
    Ok(x)
}

const SYLVESTER_REFINEMENTS: usize = 2;

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Sum of products accumulated with error-free transformations.
#[derive(Default)]
struct CompensatedSum {
    hi: f64,
    lo: f64,
}

impl CompensatedSum {
    fn add_prod(&mut self, x: f64, y: f64) {
        let p = x * y;
        let e = x.mul_add(y, -p);
        let (s, t) = two_sum(self.hi, p);
        self.hi = s;
        self.lo += t + e;
    }

    fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

/// `C − (AX + XB)` evaluated in roughly doubled precision.
fn sylvester_residual(a: &CMatrix, b: &CMatrix, x: &CMatrix, c: &CMatrix) -> CMatrix {
    CMatrix::from_fn(c.nrows(), c.ncols(), |i, j| {
        let (mut re, mut im) = (CompensatedSum::default(), CompensatedSum::default());
        re.add_prod(c[(i, j)].re, 1.0);
        im.add_prod(c[(i, j)].im, 1.0);
        let mut sub = |p: C64, q: C64| {
            re.add_prod(-p.re, q.re);
            re.add_prod(p.im, q.im);
            im.add_prod(-p.re, q.im);
            im.add_prod(-p.im, q.re);
        };
        for k in 0..a.ncols() {
            sub(a[(i, k)], x[(k, j)]);
        }
        for k in 0..b.nrows() {
            sub(x[(i, k)], b[(k, j)]);
        }
        c64(re.value(), im.value())
    })
}

/// JSON carrier `{"rows": N, "cols": N, "data": [[re, im], ...]}`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl From<&CMatrix> for MatrixJson {
    fn from(m: &CMatrix) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let z = m[(r, c)];
                data.push([z.re, z.im]);
            }
        }
        MatrixJson {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

impl TryFrom<MatrixJson> for CMatrix {
    type Error = Error;

    fn try_from(j: MatrixJson) -> Result<CMatrix> {
        if j.rows == 0 || j.cols == 0 {
            return Err(Error::InvalidConfig("matrix dimensions must be positive".into()));
        }
        if j.data.len() != j.rows * j.cols {
            return Err(Error::InvalidConfig(format!(
                "matrix data has {} entries, expected {}",
                j.data.len(),
                j.rows * j.cols
            )));
        }
        let m = CMatrix::from_fn(j.rows, j.cols, |r, c| {
            let [re, im] = j.data[r * j.cols + c];
            c64(re, im)
        });
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(m)
    }
}

pub fn matrix_to_json(m: &CMatrix) -> String {
    serde_json::to_string(&MatrixJson::from(m)).expect("matrix serialization cannot fail")
}

pub fn matrix_from_json(s: &str) -> Result<CMatrix> {
    let j: MatrixJson =
        serde_json::from_str(s).map_err(|e| Error::InvalidConfig(format!("bad matrix JSON: {e}")))?;
    CMatrix::try_from(j)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(rows: usize, cols: usize, v: &[f64]) -> CMatrix {
        complexify(&DMatrix::from_row_slice(rows, cols, v))
    }

    #[test]
    fn diagonal_matrix_eigenpairs() {
        let k = real(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let e = eig_general(&k).unwrap();
        assert_eq!(e.eigenvalues, vec![c64(1.0, 0.0), c64(2.0, 0.0)]);
        assert!((e.right_vectors[(1, 0)].norm() - 1.0).abs() < 1e-14);
        assert!((e.right_vectors[(0, 1)].norm() - 1.0).abs() < 1e-14);
        assert!(!e.near_defective);
    }

    #[test]
    fn jordan_block_is_flagged() {
        let k = real(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = eig_general(&k).unwrap();
        assert!(e.near_defective, "cond = {}", e.condition);
        assert!(matches!(
            e.require_diagonalizable(),
            Err(Error::NearDefective { .. })
        ));
    }

    #[test]
    fn inverse_of_diagonal() {
        let a = real(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let inv = inverse(&a).unwrap();
        assert!(max_abs(&(inv - real(2, 2, &[0.5, 0.0, 0.0, 0.25]))) < 1e-15);
        assert_eq!(inverse(&CMatrix::identity(3, 3)).unwrap(), CMatrix::identity(3, 3));
    }

    #[test]
    fn singular_inverse_rejected() {
        let a = real(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(inverse(&a), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn sylvester_identity_halves_rhs() {
        let y = CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(0.0, 0.7), c64(0.0, -0.7), c64(0.0, 0.0)]);
        let g = solve_sylvester(&CMatrix::identity(2, 2), &y).unwrap();
        assert!(max_abs(&(g - &y * c64(0.5, 0.0))) < 1e-15);
    }

    #[test]
    fn sylvester_singular_pencil() {
        let x = real(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let y = CMatrix::identity(2, 2);
        assert!(matches!(solve_sylvester(&x, &y), Err(Error::SingularPencil { .. })));
    }

    #[test]
    fn non_square_rejected() {
        let m = CMatrix::zeros(2, 3);
        assert!(matches!(eig_general(&m), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn canonical_order_keeps_ties_stable() {
        let v = [c64(1.0, 0.0), c64(0.0, 1.0), c64(1.0, 0.0), c64(0.0, -1.0)];
        assert_eq!(canonical_order(&v, 1e-12), vec![3, 1, 0, 2]);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let m = CMatrix::from_row_slice(2, 2, &[c64(1.0, -0.5), c64(0.1, 0.2), c64(3.0, 0.0), c64(-1e-300, 7.0)]);
        let s = matrix_to_json(&m);
        assert_eq!(matrix_from_json(&s).unwrap(), m);
        assert!(matrix_from_json(r#"{"rows":2,"cols":2,"data":[[1,0]]}"#).is_err());
        assert!(matrix_from_json("not json").is_err());
    }
}
