//! Biorthogonal eigensystems of non-Hermitian matrices.

use crate::error::{Error, Result};
use crate::linalg::{eig_general, inverse, max_abs, CMatrix, C64};

/// Relative gap below which two eigenvalues count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Right eigenvectors `R`, left eigenvectors `L = (R⁻¹)†` and the right Gram
/// matrix `C = R†R`. Columns are paired: `L†R = I`.
#[derive(Debug, Clone)]
pub struct BiorthogonalSystem {
    pub eigenvalues: Vec<C64>,
    pub right: CMatrix,
    pub left: CMatrix,
    pub gram_right: CMatrix,
    /// Smallest pairwise eigenvalue distance (`inf` for 1×1).
    pub min_gap: f64,
    /// Frobenius norm of the matrix the system was built from.
    pub scale: f64,
}

impl BiorthogonalSystem {
    /// Builds the system from eigenvalues and matching right eigenvectors.
    pub fn from_right(eigenvalues: Vec<C64>, right: CMatrix, scale: f64) -> Result<Self> {
        let left = inverse(&right)?.adjoint();
        let gram_right = right.adjoint() * &right;
        let min_gap = min_pairwise_gap(&eigenvalues);
        Ok(Self {
            eigenvalues,
            right,
            left,
            gram_right,
            min_gap,
            scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `⟨m_L|n_L⟩`, equal to `C⁻¹`.
    pub fn gram_left(&self) -> CMatrix {
        self.left.adjoint() * &self.left
    }

    /// `max |L†R − I|`.
    pub fn biorthogonality_error(&self) -> f64 {
        let n = self.dim();
        max_abs(&(self.left.adjoint() * &self.right - CMatrix::identity(n, n)))
    }

    /// Largest left-eigenpair residual `‖K† l_n − Λ_n* l_n‖`.
    pub fn left_residual(&self, k: &CMatrix) -> f64 {
        let kd = k.adjoint();
        (0..self.dim())
            .map(|n| {
                let l = self.left.column(n);
                (&kd * l - l * self.eigenvalues[n].conj()).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn degeneracy_threshold(&self) -> f64 {
        DEGENERACY_TOL * self.scale.max(f64::MIN_POSITIVE)
    }

    /// True when two eigenvalues are closer than `1e-10·‖K‖`.
    pub fn is_degenerate(&self) -> bool {
        self.min_gap < self.degeneracy_threshold()
    }

    /// Cluster label for every eigenvalue, joining pairs closer than `tol`
    /// (transitively).
    pub fn clusters(&self, tol: f64) -> Vec<usize> {
        cluster_labels(&self.eigenvalues, tol)
    }

    /// Index of the eigenvalue with the smallest modulus.
    pub fn index_of_min_modulus(&self) -> usize {
        let mut best = 0;
        for (i, z) in self.eigenvalues.iter().enumerate() {
            if z.norm() < self.eigenvalues[best].norm() {
                best = i;
            }
        }
        best
    }

    pub fn check_state(&self, n: usize) -> Result<()> {
        if n >= self.dim() {
            Err(Error::StateIndex {
                index: n,
                dim: self.dim(),
            })
        } else {
            Ok(())
        }
    }
}

fn min_pairwise_gap(values: &[C64]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..values.len() {
        for j in (i + 1)..values.len() {
            gap = gap.min((values[i] - values[j]).norm());
        }
    }
    gap
}

/// Transitive clustering of complex values at distance `tol`.
pub fn cluster_labels(values: &[C64], tol: f64) -> Vec<usize> {
    let n = values.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn root(label: &mut [usize], mut i: usize) -> usize {
        while label[i] != i {
            label[i] = label[label[i]];
            i = label[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (values[i] - values[j]).norm() < tol {
                let (a, b) = (root(&mut label, i), root(&mut label, j));
                if a != b {
                    label[b.max(a)] = a.min(b);
                }
            }
        }
    }
    (0..n).map(|i| root(&mut label, i)).collect()
}

/// Biorthogonal system of `k`: unit-norm right vectors, `L = (R⁻¹)†`.
///
/// Fails with `NearDefective` when the eigenvector matrix is too badly
/// conditioned. Degeneracies are not an error here; they are recorded in
/// `min_gap` and checked by the tensor routines.
pub fn build_biortho(k: &CMatrix) -> Result<BiorthogonalSystem> {
    let eig = eig_general(k)?.require_diagonalizable()?;
    BiorthogonalSystem::from_right(eig.eigenvalues, eig.right_vectors, k.norm())
}

/// Applies `|n_R⟩ → e^{r_n}|n_R⟩`, `|n_L⟩ → e^{−r_n*}|n_L⟩`.
pub fn gauge_rescale(sys: &BiorthogonalSystem, r: &[C64]) -> Result<BiorthogonalSystem> {
    if r.len() != sys.dim() {
        return Err(Error::ShapeMismatch(format!(
            "gauge vector has length {}, system has dimension {}",
            r.len(),
            sys.dim()
        )));
    }
    let mut out = sys.clone();
    for (n, rn) in r.iter().enumerate() {
        let sr = rn.exp();
        let sl = (-rn.conj()).exp();
        for i in 0..sys.dim() {
            out.right[(i, n)] *= sr;
            out.left[(i, n)] *= sl;
        }
    }
    out.gram_right = out.right.adjoint() * &out.right;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;

    #[test]
    fn two_by_two_gram_entry() {
        let (a, b) = (2.0, 0.5);
        let k = CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(a, 0.0), c64(b, 0.0), c64(0.0, 0.0)]);
        let sys = build_biortho(&k).unwrap();
        // right vectors (±√a, √b)/√(a+b) up to phase
        let c01 = sys.gram_right[(0, 1)];
        assert!((c01.norm() - (a - b) / (a + b)).abs() < 1e-12);
        assert!(sys.biorthogonality_error() < 1e-12);
    }

    #[test]
    fn zero_gauge_is_identity() {
        let k = CMatrix::from_row_slice(2, 2, &[c64(1.0, 0.5), c64(2.0, 0.0), c64(0.3, 0.0), c64(-1.0, 0.0)]);
        let sys = build_biortho(&k).unwrap();
        let g = gauge_rescale(&sys, &[c64(0.0, 0.0); 2]).unwrap();
        assert_eq!(g.right, sys.right);
        assert_eq!(g.left, sys.left);
    }

    #[test]
    fn clusters_are_transitive() {
        let v = [c64(0.0, 0.0), c64(0.6, 0.0), c64(1.2, 0.0), c64(5.0, 0.0)];
        assert_eq!(cluster_labels(&v, 0.7), vec![0, 0, 0, 3]);
    }

    #[test]
    fn wrong_gauge_length() {
        let sys = build_biortho(&CMatrix::identity(2, 2)).unwrap();
        assert!(gauge_rescale(&sys, &[c64(0.0, 0.0)]).is_err());
    }
}
