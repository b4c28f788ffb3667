//! Exact small-system oracle: Fock-space Majoranas, the explicit Lindblad
//! superoperator on vectorized density matrices, third-quantized
//! superoperators and the steady state from the superoperator kernel.
//!
//! Vectorization stacks columns, so `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)` and the
//! Hilbert–Schmidt product is the plain vector product.

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::geo::{EigenJet, OperatorFamily, TensorOptions};
use crate::linalg::{c64, eig_general, max_abs, CMatrix, CVector, C64};
use crate::quad::{bath_matrix, LiouvillianFamily, MajoranaCorrelation};

pub const MAX_MODES: usize = 4;
/// Largest mode count accepted by [`SuperopFamily`].
pub const MAX_FAMILY_MODES: usize = 3;
const KERNEL_GAP: f64 = 1e-8;

/// Jordan–Wigner Majoranas on `n` modes, site-major:
/// `w_{2j} = c_j + c_j†`, `w_{2j+1} = i(c_j − c_j†)` (0-based), with
/// `c_j = Z⊗…⊗Z⊗a⊗1⊗…` and `a = |0⟩⟨1|`.
#[derive(Debug, Clone)]
pub struct FockRep {
    pub n: usize,
    pub majoranas: Vec<CMatrix>,
    /// `W = iⁿ w_0 w_1 ⋯ w_{2n−1}`.
    pub parity: CMatrix,
}

impl FockRep {
    pub fn hilbert_dim(&self) -> usize {
        1 << self.n
    }

    /// `wᵀ𝐇w = Σ 𝐇_ij w_i w_j`.
    pub fn quadratic_operator(&self, h: &CMatrix) -> Result<CMatrix> {
        self.check_square(h)?;
        let d = self.hilbert_dim();
        let mut out = CMatrix::zeros(d, d);
        for (i, wi) in self.majoranas.iter().enumerate() {
            for (j, wj) in self.majoranas.iter().enumerate() {
                if h[(i, j)] != c64(0.0, 0.0) {
                    out += wi * wj * h[(i, j)];
                }
            }
        }
        Ok(out)
    }

    /// `Σ_i l_i w_i`.
    pub fn linear_operator(&self, l: &CVector) -> Result<CMatrix> {
        if l.len() != 2 * self.n {
            return Err(Error::ShapeMismatch(format!("vector has length {}, expected {}", l.len(), 2 * self.n)));
        }
        let d = self.hilbert_dim();
        Ok(self
            .majoranas
            .iter()
            .zip(l.iter())
            .fold(CMatrix::zeros(d, d), |acc, (w, c)| acc + w * *c))
    }

    /// `Γ_ij = ½ Tr(ρ[w_i, w_j])`.
    pub fn correlation(&self, rho: &CMatrix) -> MajoranaCorrelation {
        let m = 2 * self.n;
        let gamma = CMatrix::from_fn(m, m, |i, j| {
            let wi = &self.majoranas[i];
            let wj = &self.majoranas[j];
            (rho * (wi * wj - wj * wi)).trace() * c64(0.5, 0.0)
        });
        MajoranaCorrelation { gamma }
    }

    fn check_square(&self, h: &CMatrix) -> Result<()> {
        let m = 2 * self.n;
        if h.nrows() != m || h.ncols() != m {
            return Err(Error::ShapeMismatch(format!("expected {m}x{m}, got {}x{}", h.nrows(), h.ncols())));
        }
        Ok(())
    }
}

pub fn build_fock(n: usize) -> Result<FockRep> {
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one mode".into()));
    }
    if n > MAX_MODES {
        return Err(Error::TooLarge { n, max: MAX_MODES });
    }
    let one = c64(1.0, 0.0);
    let zero = c64(0.0, 0.0);
    let a = CMatrix::from_row_slice(2, 2, &[zero, one, zero, zero]);
    let z = CMatrix::from_row_slice(2, 2, &[one, zero, zero, -one]);
    let id = CMatrix::identity(2, 2);
    let mut majoranas = Vec::with_capacity(2 * n);
    for j in 0..n {
        let mut c = CMatrix::identity(1, 1);
        for s in 0..n {
            let f = match s.cmp(&j) {
                std::cmp::Ordering::Less => &z,
                std::cmp::Ordering::Equal => &a,
                std::cmp::Ordering::Greater => &id,
            };
            c = c.kronecker(f);
        }
        let cd = c.adjoint();
        majoranas.push(&c + &cd);
        majoranas.push((&c - &cd) * c64(0.0, 1.0));
    }
    let d = 1 << n;
    let mut parity = CMatrix::identity(d, d) * c64(0.0, 1.0).powu(n as u32);
    for w in &majoranas {
        parity *= w;
    }
    Ok(FockRep { n, majoranas, parity })
}

/// `ρ ↦ Aρ`.
pub fn left_mul(a: &CMatrix) -> CMatrix {
    CMatrix::identity(a.nrows(), a.nrows()).kronecker(a)
}

/// `ρ ↦ ρA`.
pub fn right_mul(a: &CMatrix) -> CMatrix {
    a.transpose().kronecker(&CMatrix::identity(a.nrows(), a.nrows()))
}

/// Column-stacked `vec(ρ)`.
pub fn vectorize(rho: &CMatrix) -> CVector {
    CVector::from_column_slice(rho.as_slice())
}

pub fn unvectorize(v: &CVector, d: usize) -> CMatrix {
    CMatrix::from_column_slice(d, d, v.as_slice())
}

/// Lindblad superoperator of `H = wᵀ𝐇w` and jumps `L_k = Σ_i (l_k)_i w_i`.
pub fn build_superop(fock: &FockRep, h: &CMatrix, bath_vectors: &[CVector]) -> Result<CMatrix> {
    let d = fock.hilbert_dim();
    let ham = fock.quadratic_operator(h)?;
    let mut s = (left_mul(&ham) - right_mul(&ham)) * c64(0.0, -1.0);
    for l in bath_vectors {
        let jump = fock.linear_operator(l)?;
        let ldl = jump.adjoint() * &jump;
        s += jump.map(|z| z.conj()).kronecker(&jump) - (left_mul(&ldl) + right_mul(&ldl)) * c64(0.5, 0.0);
    }
    debug_assert_eq!(s.nrows(), d * d);
    Ok(s)
}

/// Lindblad superoperator written through the bath matrix:
/// `Σ_ij M_ij (w_i ρ w_j − ½{w_j w_i, ρ})`. Linear in `(𝐇, M)`.
pub fn build_superop_from_bath(fock: &FockRep, h: &CMatrix, m: &CMatrix) -> Result<CMatrix> {
    fock.check_square(m)?;
    let ham = fock.quadratic_operator(h)?;
    let mut s = (left_mul(&ham) - right_mul(&ham)) * c64(0.0, -1.0);
    let half = c64(0.5, 0.0);
    for (i, wi) in fock.majoranas.iter().enumerate() {
        for (j, wj) in fock.majoranas.iter().enumerate() {
            let mij = m[(i, j)];
            if mij == c64(0.0, 0.0) {
                continue;
            }
            let ww = wj * wi;
            // w_j is real symmetric or imaginary antisymmetric, so conj(w_j) = w_jᵀ
            let sandwich = wj.transpose().kronecker(wi);
            s += (sandwich - (left_mul(&ww) + right_mul(&ww)) * half) * mij;
        }
    }
    Ok(s)
}

/// Same as [`build_superop_from_bath`] with `M` assembled from jump vectors.
pub fn build_superop_via_bath(fock: &FockRep, h: &CMatrix, bath_vectors: &[CVector]) -> Result<CMatrix> {
    build_superop_from_bath(fock, h, &bath_matrix(fock.n, bath_vectors)?)
}

/// Third-quantized maps `â_j(ρ) = −(i/2)W[w_j, ρ]`, `â_j†(ρ) = −(i/2)W{w_j, ρ}`.
pub struct ThirdQuantized {
    pub a: Vec<CMatrix>,
    pub a_dag: Vec<CMatrix>,
}

pub fn third_quant_superops(fock: &FockRep) -> Result<ThirdQuantized> {
    if fock.n > MAX_MODES {
        return Err(Error::TooLarge { n: fock.n, max: MAX_MODES });
    }
    let wl = left_mul(&fock.parity);
    let f = c64(0.0, -0.5);
    let mut a = Vec::new();
    let mut a_dag = Vec::new();
    for w in &fock.majoranas {
        let (l, r) = (left_mul(w), right_mul(w));
        a.push(&wl * (&l - &r) * f);
        a_dag.push(&wl * (&l + &r) * f);
    }
    Ok(ThirdQuantized { a, a_dag })
}

/// `−Σ_ij (X_ij â_i†â_j + ½ Y_ij â_i†â_j†)`.
pub fn quadratic_form_superop(tq: &ThirdQuantized, x: &CMatrix, y: &CMatrix) -> CMatrix {
    let m = tq.a.len();
    let d = tq.a[0].nrows();
    let mut out = CMatrix::zeros(d, d);
    for i in 0..m {
        for j in 0..m {
            if x[(i, j)] != c64(0.0, 0.0) {
                out -= &tq.a_dag[i] * &tq.a[j] * x[(i, j)];
            }
            if y[(i, j)] != c64(0.0, 0.0) {
                out -= &tq.a_dag[i] * &tq.a_dag[j] * (y[(i, j)] * 0.5);
            }
        }
    }
    out
}

/// AGP superoperator `−Σ_ij (𝒳_ij â_i†â_j + ½ 𝒴_ij â_i†â_j†)`, with the
/// same overall sign as the Liouvillian in [`quadratic_form_superop`].
pub fn agp_superop(tq: &ThirdQuantized, agp: &crate::quad::AgpQuadratic) -> CMatrix {
    quadratic_form_superop(tq, &agp.xcal, &agp.ycal)
}

/// `max |Tr(ℒ(E_ab))|`: how far the superoperator is from trace preserving.
pub fn trace_preservation_error(superop: &CMatrix) -> f64 {
    let d = (superop.nrows() as f64).sqrt().round() as usize;
    let id = vectorize(&CMatrix::identity(d, d));
    (superop.adjoint() * id).iter().fold(0.0, |a, z| a.max(z.norm()))
}

/// `max |ℒ(ρ†) − ℒ(ρ)†|` over the matrix-unit basis.
pub fn hermiticity_preservation_error(superop: &CMatrix) -> f64 {
    let d = (superop.nrows() as f64).sqrt().round() as usize;
    let mut worst: f64 = 0.0;
    for a in 0..d {
        for b in 0..d {
            let mut e = CMatrix::zeros(d, d);
            e[(a, b)] = c64(1.0, 0.0);
            let img = unvectorize(&(superop * vectorize(&e)), d);
            let img_adj = unvectorize(&(superop * vectorize(&e.adjoint())), d);
            worst = worst.max(max_abs(&(img_adj - img.adjoint())));
        }
    }
    worst
}

#[derive(Debug, Clone)]
pub struct NessState {
    /// Hermitian, unit trace.
    pub rho: CMatrix,
    pub correlation: MajoranaCorrelation,
    /// Distance from the kernel eigenvalue to the next one.
    pub gap: f64,
    pub kernel_eigenvalue: C64,
}

/// Steady state from the eigenvalue of smallest modulus.
pub fn ness_from_kernel(fock: &FockRep, superop: &CMatrix) -> Result<NessState> {
    let d = fock.hilbert_dim();
    let eig = eig_general(superop)?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].norm().total_cmp(&eig.eigenvalues[b].norm()));
    let k = order[0];
    let gap = order
        .get(1)
        .map(|&j| (eig.eigenvalues[j] - eig.eigenvalues[k]).norm())
        .unwrap_or(f64::INFINITY);
    if gap <= KERNEL_GAP {
        return Err(Error::DegenerateKernel { gap });
    }
    let mut rho = unvectorize(&eig.right_vectors.column(k).clone_owned(), d);
    let tr = rho.trace();
    if tr.norm() < 1e-14 {
        return Err(Error::DegenerateKernel { gap });
    }
    rho /= tr;
    let rho = (&rho + rho.adjoint()) * c64(0.5, 0.0);
    Ok(NessState {
        correlation: fock.correlation(&rho),
        rho,
        gap,
        kernel_eigenvalue: eig.eigenvalues[k],
    })
}

/// `∂ρ` solving `ℒ∂ρ = −(∂ℒ)ρ` with `Tr ∂ρ = 0`, by least squares on the
/// system augmented with the trace row.
pub fn ness_derivative(superop: &CMatrix, d_superop: &CMatrix, rho: &CMatrix) -> Result<CMatrix> {
    let d = rho.nrows();
    let n2 = d * d;
    let mut a = CMatrix::zeros(n2 + 1, n2);
    a.view_mut((0, 0), (n2, n2)).copy_from(superop);
    for i in 0..d {
        a[(n2, i + i * d)] = c64(1.0, 0.0);
    }
    let rhs = -(d_superop * vectorize(rho));
    let mut b = CVector::zeros(n2 + 1);
    b.rows_mut(0, n2).copy_from(&rhs);
    let iters = crate::linalg::svd_iterations(&a);
    let x = nalgebra::SVD::try_new(a, true, true, f64::EPSILON, iters)
        .ok_or(Error::NonConvergence)?
        .solve(&b, 1e-13 * superop.norm().max(1.0))
        .map_err(|_| Error::NonConvergence)?;
    let out = unvectorize(&x, d);
    Ok((&out + out.adjoint()) * c64(0.5, 0.0))
}

/// Operator `G = ¼ wᵀKw + ¼Tr(KΓ)` built from a log-derivative matrix `K`.
pub fn log_derivative_operator(fock: &FockRep, gamma: &CMatrix, k: &CMatrix) -> Result<CMatrix> {
    let d = fock.hilbert_dim();
    let q = fock.quadratic_operator(k)?;
    Ok(q * c64(0.25, 0.0) + CMatrix::identity(d, d) * ((k * gamma).trace() * 0.25))
}

/// Symmetric logarithmic derivative `G` with `∂ρ = Gρ + ρG`, solved in the
/// eigenbasis of `ρ`.
pub fn symmetric_log_derivative(rho: &CMatrix, drho: &CMatrix) -> Result<CMatrix> {
    let eig = SymmetricEigen::new((rho + rho.adjoint()) * c64(0.5, 0.0));
    let v = &eig.eigenvectors;
    let p = &eig.eigenvalues;
    let mut g = v.adjoint() * drho * v;
    for a in 0..p.len() {
        for b in 0..p.len() {
            let s = p[a] + p[b];
            if s <= 1e-14 {
                return Err(Error::PureStateSingular);
            }
            g[(a, b)] /= s;
        }
    }
    Ok(v * g * v.adjoint())
}

/// `½Tr(ρ{G_μ, G_ν})` from density-matrix derivatives.
pub fn bures_density(rho: &CMatrix, drho_mu: &CMatrix, drho_nu: &CMatrix) -> Result<f64> {
    let gm = symmetric_log_derivative(rho, drho_mu)?;
    let gn = symmetric_log_derivative(rho, drho_nu)?;
    Ok((rho * (&gm * &gn + &gn * &gm)).trace().re * 0.5)
}

/// `Tr(∂_μρ ∂_νρ)/Tr ρ²`.
pub fn zeta_tilde_density(rho: &CMatrix, drho_mu: &CMatrix, drho_nu: &CMatrix) -> f64 {
    (drho_mu * drho_nu).trace().re / (rho * rho).trace().re
}

/// Connected form `Tr(∂_μρ∂_νρ)/Trρ² − Tr(ρ∂_μρ)Tr(ρ∂_νρ)/(Trρ²)²`.
pub fn zeta_tilde_density_connected(rho: &CMatrix, drho_mu: &CMatrix, drho_nu: &CMatrix) -> f64 {
    let p = (rho * rho).trace().re;
    let a = (rho * drho_mu).trace().re;
    let b = (rho * drho_nu).trace().re;
    zeta_tilde_density(rho, drho_mu, drho_nu) - a * b / (p * p)
}

/// A Liouvillian family seen as an operator family of `4ⁿ × 4ⁿ`
/// superoperators. The steady state is the eigenvector of smallest modulus.
pub struct SuperopFamily<'a, F: LiouvillianFamily + ?Sized> {
    pub family: &'a F,
    pub fock: FockRep,
}

pub fn superop_as_family<F: LiouvillianFamily + ?Sized>(family: &F) -> Result<SuperopFamily<'_, F>> {
    let n = family.modes();
    if n > MAX_FAMILY_MODES {
        return Err(Error::TooLarge { n, max: MAX_FAMILY_MODES });
    }
    Ok(SuperopFamily {
        family,
        fock: build_fock(n)?,
    })
}

impl<F: LiouvillianFamily + ?Sized> OperatorFamily for SuperopFamily<'_, F> {
    fn dim(&self) -> usize {
        1 << (2 * self.fock.n)
    }

    fn num_params(&self) -> usize {
        self.family.num_params()
    }

    fn evaluate(&self, lambda: &[f64]) -> Result<CMatrix> {
        let liou = self.family.liouvillian(lambda)?;
        build_superop_from_bath(&self.fock, &liou.h, &liou.m)
    }

    fn derivative(&self, mu: usize, lambda: &[f64]) -> Option<Result<CMatrix>> {
        let dh = self.family.d_hamiltonian(mu, lambda)?;
        let dm = self.family.d_bath(mu, lambda)?;
        Some(dh.and_then(|dh| dm.and_then(|dm| build_superop_from_bath(&self.fock, &dh, &dm))))
    }

    fn param_names(&self) -> Vec<String> {
        self.family.param_names()
    }
}

/// Eigen-jet of the superoperator family and the index of its steady state.
pub fn ness_jet<F: LiouvillianFamily + ?Sized>(
    fam: &SuperopFamily<'_, F>,
    lambda: &[f64],
    opts: &TensorOptions,
) -> Result<(EigenJet, usize)> {
    let jet = EigenJet::compute(fam, lambda, opts)?;
    let n = jet.sys.index_of_min_modulus();
    Ok((jet, n))
}
