//! Quadratic fermionic Liouvillians in the Majorana representation.
//!
//! A model is a Majorana Hamiltonian `H = wᵀ𝐇w` (𝐇 antisymmetric, purely
//! imaginary) and jump operators `L_k = Σ_i (l_k)_i w_i` collected in the
//! bath matrix `M = Σ_k l_k l_k†`. The steady state is Gaussian with
//! correlation matrix `Γ_ij = ½⟨[w_i, w_j]⟩` solving `XΓ + ΓXᵀ = Y`, where
//! `X = 4i𝐇 + 2 Re M` and `Y = −4i Im M`.

use nalgebra::SymmetricEigen;

use crate::biortho::cluster_labels;
use crate::error::{Error, Result};
use crate::geo::{Degeneracy, GeoTensor, TensorKind};
use crate::linalg::{
    c64, eig_general, hermiticity_error, inverse, max_abs, max_imag, solve_sylvester_pair, CMatrix, CVector,
    SpectralSylvester, C64,
};

const STRUCTURE_TOL: f64 = 1e-12;
const BATH_TOL: f64 = 1e-10;

fn re_part(m: &CMatrix) -> CMatrix {
    m.map(|z| c64(z.re, 0.0))
}

fn im_part(m: &CMatrix) -> CMatrix {
    m.map(|z| c64(z.im, 0.0))
}

fn x_of(h: &CMatrix, m: &CMatrix) -> CMatrix {
    h * c64(0.0, 4.0) + re_part(m) * c64(2.0, 0.0)
}

fn y_of(m: &CMatrix) -> CMatrix {
    im_part(m) * c64(0.0, -4.0)
}

/// Validated model with its derived `X` and `Y`.
#[derive(Debug, Clone)]
pub struct QuadraticLiouvillian {
    pub n: usize,
    pub h: CMatrix,
    pub m: CMatrix,
    pub x: CMatrix,
    pub y: CMatrix,
}

fn check_hamiltonian(n: usize, h: &CMatrix) -> Result<()> {
    if h.nrows() != 2 * n || h.ncols() != 2 * n {
        return Err(Error::ShapeMismatch(format!(
            "Majorana Hamiltonian must be {0}x{0}, got {1}x{2}",
            2 * n,
            h.nrows(),
            h.ncols()
        )));
    }
    let scale = max_abs(h).max(1.0);
    let asym = max_abs(&(h + h.transpose()));
    let herm = hermiticity_error(h);
    if asym > STRUCTURE_TOL * scale || herm > STRUCTURE_TOL * scale {
        return Err(Error::BadHamiltonian(format!(
            "needs H = -H^T = H^dag (antisymmetry error {asym:.3e}, hermiticity error {herm:.3e})"
        )));
    }
    Ok(())
}

fn check_bath(n: usize, m: &CMatrix) -> Result<()> {
    if m.nrows() != 2 * n || m.ncols() != 2 * n {
        return Err(Error::ShapeMismatch(format!(
            "bath matrix must be {0}x{0}, got {1}x{2}",
            2 * n,
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = max_abs(m).max(1.0);
    let herm = hermiticity_error(m);
    if herm > BATH_TOL * scale {
        return Err(Error::BadBath(format!("not Hermitian (error {herm:.3e})")));
    }
    let min_ev = SymmetricEigen::new((m + m.adjoint()) * c64(0.5, 0.0))
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_ev < -BATH_TOL * scale {
        return Err(Error::BadBath(format!("not positive semidefinite (eigenvalue {min_ev:.3e})")));
    }
    Ok(())
}

/// `M = Σ_k l_k l_k†`.
pub fn bath_matrix(n: usize, bath_vectors: &[CVector]) -> Result<CMatrix> {
    let mut m = CMatrix::zeros(2 * n, 2 * n);
    for l in bath_vectors {
        if l.len() != 2 * n {
            return Err(Error::ShapeMismatch(format!(
                "bath vector has length {}, expected {}",
                l.len(),
                2 * n
            )));
        }
        m += l * l.adjoint();
    }
    Ok(m)
}

pub fn build_liouvillian(n: usize, h: &CMatrix, bath_vectors: &[CVector]) -> Result<QuadraticLiouvillian> {
    let m = bath_matrix(n, bath_vectors)?;
    build_liouvillian_from_bath(n, h, &m)
}

/// Same as [`build_liouvillian`] with the bath matrix given directly.
pub fn build_liouvillian_from_bath(n: usize, h: &CMatrix, m: &CMatrix) -> Result<QuadraticLiouvillian> {
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one fermionic mode".into()));
    }
    check_hamiltonian(n, h)?;
    check_bath(n, m)?;
    // symmetrize away rounding so that X is exactly real and Y exactly imaginary antisymmetric
    let h = (h - h.transpose()) * c64(0.5, 0.0);
    let h = h.map(|z| c64(0.0, z.im));
    let m = (m + m.adjoint()) * c64(0.5, 0.0);
    let x = x_of(&h, &m);
    let y = y_of(&m);
    Ok(QuadraticLiouvillian { n, h, m, x, y })
}

/// Matrix `V` with `c_j = Σ_l V_jl w_l`: `V_{j,2j} = 1/2`, `V_{j,2j+1} = −i/2`
/// (0-based).
fn majorana_map(n: usize) -> CMatrix {
    let mut v = CMatrix::zeros(n, 2 * n);
    for j in 0..n {
        v[(j, 2 * j)] = c64(0.5, 0.0);
        v[(j, 2 * j + 1)] = c64(0.0, -0.5);
    }
    v
}

/// Majorana matrix of `Σ A_ij c_i†c_j + ½Σ (B_ij c_i†c_j† + h.c.)`, up to a
/// constant. `A` must be Hermitian and `B` antisymmetric.
pub fn majorana_hamiltonian(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::ShapeMismatch("hopping and pairing matrices must be n x n".into()));
    }
    let scale = max_abs(a).max(max_abs(b)).max(1.0);
    if hermiticity_error(a) > STRUCTURE_TOL * scale {
        return Err(Error::BadHamiltonian("hopping matrix is not Hermitian".into()));
    }
    if max_abs(&(b + b.transpose())) > STRUCTURE_TOL * scale {
        return Err(Error::BadHamiltonian("pairing matrix is not antisymmetric".into()));
    }
    let v = majorana_map(n);
    let vb = v.map(|z| z.conj());
    let half = c64(0.5, 0.0);
    let t = vb.transpose() * a * &v + vb.transpose() * b * &vb * half + v.transpose() * b.adjoint() * &v * half;
    Ok((&t - t.transpose()) * half)
}

/// Majorana coefficients of `L = Σ_j (u_j c_j + v_j c_j†)`.
pub fn jump_vector(u: &[C64], v: &[C64]) -> Result<CVector> {
    if u.len() != v.len() {
        return Err(Error::ShapeMismatch("annihilation and creation parts differ in length".into()));
    }
    let n = u.len();
    let map = majorana_map(n);
    let mut l = CVector::zeros(2 * n);
    for j in 0..n {
        for i in 0..2 * n {
            l[i] += u[j] * map[(j, i)] + v[j] * map[(j, i)].conj();
        }
    }
    Ok(l)
}

/// Rapidities `x_j` with `X = U diag(x) U⁻¹`.
#[derive(Debug, Clone)]
pub struct Rapidities {
    pub values: Vec<C64>,
    pub u: CMatrix,
    pub u_inv: CMatrix,
}

impl Rapidities {
    pub fn min_re(&self) -> f64 {
        self.values.iter().map(|z| z.re).fold(f64::INFINITY, f64::min)
    }
}

pub fn rapidities(liou: &QuadraticLiouvillian) -> Result<Rapidities> {
    let eig = eig_general(&liou.x)?.require_diagonalizable()?;
    let u_inv = inverse(&eig.right_vectors)?;
    Ok(Rapidities {
        values: eig.eigenvalues,
        u: eig.right_vectors,
        u_inv,
    })
}

fn uniqueness_tol(x: &CMatrix) -> f64 {
    STRUCTURE_TOL * x.norm().max(1.0)
}

/// Whether rapidities with smallest real part `min_re` guarantee a unique
/// steady state for the matrix `x`.
pub fn steady_state_unique(x: &CMatrix, min_re: f64) -> bool {
    min_re > uniqueness_tol(x)
}

/// Majorana correlation matrix of the steady state.
#[derive(Debug, Clone)]
pub struct MajoranaCorrelation {
    pub gamma: CMatrix,
}

impl MajoranaCorrelation {
    /// Eigenvalues of the Hermitian matrix `Γ`, ascending.
    pub fn spectrum(&self) -> Vec<f64> {
        hermitian_spectrum(&self.gamma)
    }

    /// Deviation from `Γ = −Γᵀ = Γ†`.
    pub fn structure_error(&self) -> f64 {
        max_abs(&(&self.gamma + self.gamma.transpose())).max(hermiticity_error(&self.gamma))
    }
}

fn hermitian_spectrum(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new((m + m.adjoint()) * c64(0.5, 0.0))
        .eigenvalues
        .iter()
        .cloned()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Solves `XΓ + ΓXᵀ = Y` after checking `min Re x_j > 0`.
pub fn steady_state_gamma(liou: &QuadraticLiouvillian) -> Result<MajoranaCorrelation> {
    Ok(MajoranaCorrelation {
        gamma: steady_state_solver(liou)?.solve(&liou.y)?,
    })
}

fn steady_state_solver(liou: &QuadraticLiouvillian) -> Result<SpectralSylvester> {
    let eig = eig_general(&liou.x)?;
    let min_re = eig.eigenvalues.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    if !(min_re > uniqueness_tol(&liou.x)) {
        return Err(Error::NonUniqueSteadyState { min_re });
    }
    SpectralSylvester::new(&liou.x)
}

/// Gauge-fixed AGP of a diagonalizable matrix in operator form:
/// `Σ_{i≠j} P_i ∂X P_j / (x_i − x_j)`, with clusters merged if requested.
pub fn spectral_agp(x: &CMatrix, dx: &[CMatrix], degeneracy: Degeneracy) -> Result<Vec<CMatrix>> {
    let eig = eig_general(x)?.require_diagonalizable()?;
    let u = eig.right_vectors;
    let u_inv = inverse(&u)?;
    let vals = eig.eigenvalues;
    let n = vals.len();
    let labels = match degeneracy {
        Degeneracy::MergeClusters { tol } => cluster_labels(&vals, tol),
        Degeneracy::Error => (0..n).collect(),
    };
    let thresh = 1e-10 * x.norm().max(1.0);
    dx.iter()
        .map(|d| {
            let f = &u_inv * d * &u;
            let mut b = CMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if i == j || labels[i] == labels[j] {
                        continue;
                    }
                    let diff = vals[i] - vals[j];
                    if diff.norm() < thresh {
                        return Err(Error::DegenerateRapidities { gap: diff.norm() });
                    }
                    b[(i, j)] = f[(i, j)] / diff;
                }
            }
            Ok(&u * b * &u_inv)
        })
        .collect()
}

/// AGP matrices `𝒳^μ`, `𝒴^μ` of a quadratic Liouvillian.
#[derive(Debug, Clone)]
pub struct AgpQuadratic {
    pub direction: usize,
    pub xcal: CMatrix,
    pub ycal: CMatrix,
}

/// A quadratic Liouvillian depending on real parameters.
pub trait LiouvillianFamily: Sync {
    fn modes(&self) -> usize;
    fn num_params(&self) -> usize;
    fn hamiltonian(&self, lambda: &[f64]) -> Result<CMatrix>;
    fn bath(&self, lambda: &[f64]) -> Result<CMatrix>;

    fn d_hamiltonian(&self, _mu: usize, _lambda: &[f64]) -> Option<Result<CMatrix>> {
        None
    }

    fn d_bath(&self, _mu: usize, _lambda: &[f64]) -> Option<Result<CMatrix>> {
        None
    }

    fn param_names(&self) -> Vec<String> {
        (0..self.num_params()).map(|i| format!("p{i}")).collect()
    }

    fn liouvillian(&self, lambda: &[f64]) -> Result<QuadraticLiouvillian> {
        if lambda.len() != self.num_params() {
            return Err(Error::ShapeMismatch(format!(
                "parameter point has {} entries, family has {} parameters",
                lambda.len(),
                self.num_params()
            )));
        }
        build_liouvillian_from_bath(self.modes(), &self.hamiltonian(lambda)?, &self.bath(lambda)?)
    }
}

/// How `∂Γ` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DGammaMethod {
    /// Differentiated Sylvester equation.
    Analytic,
    /// Central difference of `Γ`.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub degeneracy: Degeneracy,
    pub dgamma: DGammaMethod,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            degeneracy: Degeneracy::Error,
            dgamma: DGammaMethod::Analytic,
        }
    }
}

impl QuadOptions {
    /// Merges rapidity clusters, as needed for translation-invariant chains.
    pub fn merged() -> Self {
        Self {
            degeneracy: Degeneracy::MergeClusters { tol: 1e-9 },
            ..Self::default()
        }
    }
}

fn step_for(x: f64) -> f64 {
    crate::geo::fd_step(x)
}

fn shifted(lambda: &[f64], mu: usize, h: f64) -> Vec<f64> {
    let mut p = lambda.to_vec();
    p[mu] += h;
    p
}

/// `(∂_μ H, ∂_μ M)`, analytic when available.
fn model_derivatives<F: LiouvillianFamily + ?Sized>(fam: &F, lambda: &[f64], mu: usize) -> Result<(CMatrix, CMatrix)> {
    let h = step_for(lambda[mu]);
    let two_h = c64(2.0 * h, 0.0);
    let dh = match fam.d_hamiltonian(mu, lambda) {
        Some(d) => d?,
        None => (fam.hamiltonian(&shifted(lambda, mu, h))? - fam.hamiltonian(&shifted(lambda, mu, -h))?) / two_h,
    };
    let dm = match fam.d_bath(mu, lambda) {
        Some(d) => d?,
        None => (fam.bath(&shifted(lambda, mu, h))? - fam.bath(&shifted(lambda, mu, -h))?) / two_h,
    };
    Ok((dh, dm))
}

/// Steady state with its parameter derivatives and AGP matrices.
#[derive(Debug, Clone)]
pub struct NessJet {
    pub lambda: Vec<f64>,
    pub liou: QuadraticLiouvillian,
    pub gamma: CMatrix,
    pub dgamma: Vec<CMatrix>,
    pub dx: Vec<CMatrix>,
    pub xcal: Vec<CMatrix>,
}

impl NessJet {
    pub fn compute<F: LiouvillianFamily + ?Sized>(fam: &F, lambda: &[f64], opts: &QuadOptions) -> Result<Self> {
        let liou = fam.liouvillian(lambda)?;
        let solver = steady_state_solver(&liou)?;
        let gamma = solver.solve(&liou.y)?;
        let d = fam.num_params();
        let mut dx = Vec::with_capacity(d);
        let mut dgamma = Vec::with_capacity(d);
        for mu in 0..d {
            let (dh, dm) = model_derivatives(fam, lambda, mu)?;
            let dxm = x_of(&dh, &dm);
            let dym = y_of(&dm);
            let dg = match opts.dgamma {
                DGammaMethod::Analytic => {
                    let rhs = dym - &dxm * &gamma - &gamma * dxm.transpose();
                    solver.solve(&rhs)?
                }
                DGammaMethod::FiniteDifference => {
                    let h = step_for(lambda[mu]);
                    let gp = steady_state_gamma(&fam.liouvillian(&shifted(lambda, mu, h))?)?.gamma;
                    let gm = steady_state_gamma(&fam.liouvillian(&shifted(lambda, mu, -h))?)?.gamma;
                    (gp - gm) / c64(2.0 * h, 0.0)
                }
            };
            dx.push(dxm);
            dgamma.push(dg);
        }
        let xcal = spectral_agp(&liou.x, &dx, opts.degeneracy)?;
        Ok(Self {
            lambda: lambda.to_vec(),
            liou,
            gamma,
            dgamma,
            dx,
            xcal,
        })
    }

    pub fn num_params(&self) -> usize {
        self.dgamma.len()
    }

    /// `𝒴^μ = ∂_μΓ + 𝒳^μΓ + Γ𝒳^μᵀ`.
    pub fn ycal(&self, mu: usize) -> CMatrix {
        &self.dgamma[mu] + &self.xcal[mu] * &self.gamma + &self.gamma * self.xcal[mu].transpose()
    }

    pub fn agp(&self, mu: usize) -> AgpQuadratic {
        AgpQuadratic {
            direction: mu,
            xcal: self.xcal[mu].clone(),
            ycal: self.ycal(mu),
        }
    }

    /// `ζ_μν = ½Tr(∂_μΓ ∂_νΓ) + Tr(𝒳^μ Γ ∂_νΓ)`.
    pub fn zeta(&self) -> CMatrix {
        zeta_from_parts(&self.gamma, &self.dgamma, &self.xcal)
    }

    pub fn bures(&self) -> Result<CMatrix> {
        gaussian_tensor(&self.gamma, &self.dgamma, bures_metric)
    }

    pub fn zeta_tilde(&self) -> Result<CMatrix> {
        gaussian_tensor(&self.gamma, &self.dgamma, |g, a, b| Ok(zeta_tilde_gaussian(g, a, b)))
    }
}

fn zeta_from_parts(gamma: &CMatrix, dgamma: &[CMatrix], xcal: &[CMatrix]) -> CMatrix {
    let d = dgamma.len();
    CMatrix::from_fn(d, d, |mu, nu| {
        let a = (&dgamma[mu] * &dgamma[nu]).trace() * c64(0.5, 0.0);
        let b = (&xcal[mu] * gamma * &dgamma[nu]).trace();
        a + b
    })
}

fn gaussian_tensor(
    gamma: &CMatrix,
    dgamma: &[CMatrix],
    f: impl Fn(&CMatrix, &CMatrix, &CMatrix) -> Result<f64>,
) -> Result<CMatrix> {
    let d = dgamma.len();
    let mut out = CMatrix::zeros(d, d);
    for mu in 0..d {
        for nu in 0..d {
            out[(mu, nu)] = c64(f(gamma, &dgamma[mu], &dgamma[nu])?, 0.0);
        }
    }
    Ok(out)
}

pub fn agp_quadratic<F: LiouvillianFamily + ?Sized>(
    fam: &F,
    lambda: &[f64],
    mu: usize,
    opts: &QuadOptions,
) -> Result<AgpQuadratic> {
    Ok(NessJet::compute(fam, lambda, opts)?.agp(mu))
}

/// Steady-state NH-QGT of a quadratic Liouvillian family.
pub fn zeta_ness<F: LiouvillianFamily + ?Sized>(fam: &F, lambda: &[f64], opts: &QuadOptions) -> Result<GeoTensor> {
    let jet = NessJet::compute(fam, lambda, opts)?;
    Ok(GeoTensor::new(TensorKind::Zeta, None, jet.zeta(), lambda))
}

/// `Γ` in its eigenbasis: eigenvalues and `V†AV` for each given matrix.
fn eigenbasis(gamma: &CMatrix, mats: &[&CMatrix]) -> (Vec<f64>, Vec<CMatrix>) {
    let eig = SymmetricEigen::new((gamma + gamma.adjoint()) * c64(0.5, 0.0));
    let v = eig.eigenvectors;
    let rot = mats.iter().map(|m| v.adjoint() * *m * &v).collect();
    (eig.eigenvalues.iter().cloned().collect(), rot)
}

const PURE_TOL: f64 = 1e-10;

/// Logarithmic-derivative matrix `K` solving `ΓKΓ − K = ∂Γ`.
///
/// The operator `G = ¼ wᵀKw + const` satisfies `∂ρ = Gρ + ρG`.
pub fn log_derivative(gamma: &CMatrix, dgamma: &CMatrix) -> Result<CMatrix> {
    let eig = SymmetricEigen::new((gamma + gamma.adjoint()) * c64(0.5, 0.0));
    let v = &eig.eigenvectors;
    let g = &eig.eigenvalues;
    let mut k = v.adjoint() * dgamma * v;
    for i in 0..g.len() {
        for j in 0..g.len() {
            let den = g[i] * g[j] - 1.0;
            if den.abs() < PURE_TOL {
                return Err(Error::PureStateSingular);
            }
            k[(i, j)] /= c64(den, 0.0);
        }
    }
    Ok(v * k * v.adjoint())
}

/// Bures metric `(1/8) Σ_jk (∂_μΓ)_jk (∂_νΓ)_kj / (1 − γ_jγ_k)` in the
/// eigenbasis of `Γ`.
pub fn bures_metric(gamma: &CMatrix, d_mu: &CMatrix, d_nu: &CMatrix) -> Result<f64> {
    let (g, rot) = eigenbasis(gamma, &[d_mu, d_nu]);
    let mut acc = c64(0.0, 0.0);
    for j in 0..g.len() {
        for k in 0..g.len() {
            let den = 1.0 - g[j] * g[k];
            if den.abs() < PURE_TOL {
                return Err(Error::PureStateSingular);
            }
            acc += rot[0][(j, k)] * rot[1][(k, j)] / den;
        }
    }
    Ok(acc.re / 8.0)
}

/// Closed form `½ Σ_jk (∂_μΓ)_jk (∂_νΓ)_kj / ((1 + γ_j²)(1 + γ_k²))`.
///
/// This is the connected (Fubini–Study) tensor of the normalized right
/// steady-state vector. The unconnected ratio `Tr(∂ρ∂ρ)/Tr ρ²` differs by
/// `¼ p_μ p_ν`, see [`log_purity_derivative`].
pub fn zeta_tilde_gaussian(gamma: &CMatrix, d_mu: &CMatrix, d_nu: &CMatrix) -> f64 {
    let (g, rot) = eigenbasis(gamma, &[d_mu, d_nu]);
    let mut acc = c64(0.0, 0.0);
    for j in 0..g.len() {
        for k in 0..g.len() {
            acc += rot[0][(j, k)] * rot[1][(k, j)] / ((1.0 + g[j] * g[j]) * (1.0 + g[k] * g[k]));
        }
    }
    acc.re / 2.0
}

/// `p_μ = ∂_μ log Tr ρ² = Tr((1 + Γ²)⁻¹ Γ ∂_μΓ)`.
pub fn log_purity_derivative(gamma: &CMatrix, dgamma: &CMatrix) -> f64 {
    let (g, rot) = eigenbasis(gamma, &[dgamma]);
    (0..g.len())
        .map(|j| g[j] / (1.0 + g[j] * g[j]) * rot[0][(j, j)].re)
        .sum()
}

/// `Tr(∂_μρ ∂_νρ)/Tr ρ²` for a Gaussian state: the closed form plus
/// `¼ p_μ p_ν`.
pub fn zeta_tilde_gaussian_unconnected(gamma: &CMatrix, d_mu: &CMatrix, d_nu: &CMatrix) -> f64 {
    zeta_tilde_gaussian(gamma, d_mu, d_nu) + 0.25 * log_purity_derivative(gamma, d_mu) * log_purity_derivative(gamma, d_nu)
}

/// A chain of identical two-Majorana unit cells with translation-invariant
/// couplings. Blocks are indexed by the cell distance `r = j − j′`.
pub trait LatticeModel: Sync {
    fn num_params(&self) -> usize;
    fn param_names(&self) -> Vec<String>;
    /// Largest `|r|` with a nonzero block.
    fn range(&self) -> usize;
    fn h_block(&self, r: isize, lambda: &[f64]) -> CMatrix;
    fn m_block(&self, r: isize, lambda: &[f64]) -> CMatrix;
    fn dh_block(&self, mu: usize, r: isize, lambda: &[f64]) -> CMatrix;
    fn dm_block(&self, mu: usize, r: isize, lambda: &[f64]) -> CMatrix;

    /// Closed-form `γ(k)` and `∂_μγ(k)`, when the model wants them used.
    fn analytic_gamma_k(&self, _k: f64, _lambda: &[f64]) -> Option<Result<(CMatrix, Vec<CMatrix>)>> {
        None
    }
}

/// `Σ_d B(d) e^{−ikd}`. The `±d` terms are added pairwise so that `k` and
/// `−k` give exactly transposed/conjugated blocks; the weak-coupling pencil
/// amplifies any rounding asymmetry by `1/g²`.
fn fourier(model: &dyn Fn(isize) -> CMatrix, range: usize, k: f64) -> CMatrix {
    let mut out = model(0);
    for d in 1..=range as isize {
        let (s, c) = (k * d as f64).sin_cos();
        out += model(d) * c64(c, -s) + model(-d) * c64(c, s);
    }
    out
}

pub fn h_k<M: LatticeModel + ?Sized>(model: &M, k: f64, lambda: &[f64]) -> CMatrix {
    fourier(&|r| model.h_block(r, lambda), model.range(), k)
}

pub fn m_k<M: LatticeModel + ?Sized>(model: &M, k: f64, lambda: &[f64]) -> CMatrix {
    fourier(&|r| model.m_block(r, lambda), model.range(), k)
}

/// `x(k) = 4i h(k) + m(k) + mᵀ(−k)` and `y(k) = −2(m(k) − mᵀ(−k))`.
pub fn kspace_blocks<M: LatticeModel + ?Sized>(model: &M, k: f64, lambda: &[f64]) -> (CMatrix, CMatrix) {
    let h = h_k(model, k, lambda);
    let m = m_k(model, k, lambda);
    let mt = m_k(model, -k, lambda).transpose();
    (&h * c64(0.0, 4.0) + &m + &mt, (m - mt) * c64(-2.0, 0.0))
}

fn kspace_derivative_blocks<M: LatticeModel + ?Sized>(model: &M, mu: usize, k: f64, lambda: &[f64]) -> (CMatrix, CMatrix) {
    let r = model.range();
    let h = fourier(&|d| model.dh_block(mu, d, lambda), r, k);
    let m = fourier(&|d| model.dm_block(mu, d, lambda), r, k);
    let mt = fourier(&|d| model.dm_block(mu, d, lambda), r, -k).transpose();
    (&h * c64(0.0, 4.0) + &m + &mt, (m - mt) * c64(-2.0, 0.0))
}

/// Solves `x(k)γ + γxᵀ(−k) = y(k)`.
pub fn gamma_k<M: LatticeModel + ?Sized>(model: &M, k: f64, lambda: &[f64]) -> Result<CMatrix> {
    let (x, y) = kspace_blocks(model, k, lambda);
    let (xm, _) = kspace_blocks(model, -k, lambda);
    solve_sylvester_pair(&x, &xm.transpose(), &y)
}

/// Per-k contribution `½Tr(∂_μγ ∂_νγ) + Tr(𝒳(k) γ ∂_νγ)` together with `γ`
/// and `∂γ`.
pub struct KPointJet {
    pub k: f64,
    pub gamma: CMatrix,
    pub dgamma: Vec<CMatrix>,
    pub xcal: Vec<CMatrix>,
}

impl KPointJet {
    pub fn compute<M: LatticeModel + ?Sized>(model: &M, k: f64, lambda: &[f64]) -> Result<Self> {
        let d = model.num_params();
        let (x, y) = kspace_blocks(model, k, lambda);
        let (xm, _) = kspace_blocks(model, -k, lambda);
        let xmt = xm.transpose();
        let dblocks: Vec<(CMatrix, CMatrix)> = (0..d).map(|mu| kspace_derivative_blocks(model, mu, k, lambda)).collect();
        let dx: Vec<CMatrix> = dblocks.iter().map(|b| b.0.clone()).collect();
        let xcal = spectral_agp(&x, &dx, Degeneracy::Error)?;
        let (gamma, dgamma) = match model.analytic_gamma_k(k, lambda) {
            Some(r) => r?,
            None => {
                let gamma = solve_sylvester_pair(&x, &xmt, &y)?;
                let mut dgamma = Vec::with_capacity(d);
                for mu in 0..d {
                    let (dxm_t, _) = kspace_derivative_blocks(model, mu, -k, lambda);
                    let dxm_t = dxm_t.transpose();
                    let rhs = &dblocks[mu].1 - &dblocks[mu].0 * &gamma - &gamma * dxm_t;
                    dgamma.push(solve_sylvester_pair(&x, &xmt, &rhs)?);
                }
                (gamma, dgamma)
            }
        };
        Ok(Self { k, gamma, dgamma, xcal })
    }

    pub fn zeta(&self) -> CMatrix {
        zeta_from_parts(&self.gamma, &self.dgamma, &self.xcal)
    }
}

/// Boundary condition of a finite chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// `k_m = 2πm/L`.
    #[default]
    Periodic,
    /// Bonds across the boundary change sign; `k_m = (2m + 1)π/L`.
    Antiperiodic,
}

impl Boundary {
    pub fn k_grid(&self, l: usize) -> Vec<f64> {
        let shift = match self {
            Boundary::Periodic => 0.0,
            Boundary::Antiperiodic => 0.5,
        };
        (0..l).map(|m| 2.0 * std::f64::consts::PI * (m as f64 + shift) / l as f64).collect()
    }

    fn wrap_sign(&self) -> f64 {
        match self {
            Boundary::Periodic => 1.0,
            Boundary::Antiperiodic => -1.0,
        }
    }
}

/// Brillouin-zone sum of the steady-state NH-QGT over `k_m = 2πm/L`.
pub fn zeta_ness_k<M: LatticeModel + ?Sized>(model: &M, lambda: &[f64], l: usize) -> Result<GeoTensor> {
    zeta_ness_k_with(model, lambda, l, Boundary::Periodic)
}

/// [`zeta_ness_k`] on the momentum grid of the given boundary condition.
pub fn zeta_ness_k_with<M: LatticeModel + ?Sized>(
    model: &M,
    lambda: &[f64],
    l: usize,
    boundary: Boundary,
) -> Result<GeoTensor> {
    let d = model.num_params();
    let mut acc = CMatrix::zeros(d, d);
    for k in boundary.k_grid(l) {
        acc += KPointJet::compute(model, k, lambda)?.zeta();
    }
    Ok(GeoTensor::new(TensorKind::Zeta, None, acc, lambda))
}

/// Real-space Majorana matrices of a lattice model on `l` periodic cells:
/// block `(j, j′)` collects every `r ≡ j − j′ (mod l)`.
pub fn assemble_real_space(l: usize, range: usize, block: &dyn Fn(isize) -> CMatrix) -> CMatrix {
    assemble_real_space_with(l, range, Boundary::Periodic, block)
}

pub fn assemble_real_space_with(
    l: usize,
    range: usize,
    boundary: Boundary,
    block: &dyn Fn(isize) -> CMatrix,
) -> CMatrix {
    let mut out = CMatrix::zeros(2 * l, 2 * l);
    let r = range as isize;
    for j in 0..l {
        for d in -r..=r {
            let raw = j as isize - d;
            let jp = raw.rem_euclid(l as isize);
            // each wrap around the ring contributes one boundary sign
            let wraps = (raw - jp) / l as isize;
            let sign = boundary.wrap_sign().powi(wraps.abs() as i32);
            let b = block(d);
            let jp = jp as usize;
            for a in 0..2 {
                for c in 0..2 {
                    out[(2 * j + a, 2 * jp + c)] += b[(a, c)] * sign;
                }
            }
        }
    }
    out
}

/// A lattice model on a finite chain, seen as a Liouvillian family.
pub struct LatticeChain<'a, M: LatticeModel + ?Sized> {
    pub model: &'a M,
    pub l: usize,
    pub boundary: Boundary,
}

impl<'a, M: LatticeModel + ?Sized> LatticeChain<'a, M> {
    pub fn periodic(model: &'a M, l: usize) -> Self {
        Self {
            model,
            l,
            boundary: Boundary::Periodic,
        }
    }

    pub fn antiperiodic(model: &'a M, l: usize) -> Self {
        Self {
            model,
            l,
            boundary: Boundary::Antiperiodic,
        }
    }

    fn assemble(&self, block: &dyn Fn(isize) -> CMatrix) -> CMatrix {
        assemble_real_space_with(self.l, self.model.range(), self.boundary, block)
    }
}

impl<M: LatticeModel + ?Sized> LiouvillianFamily for LatticeChain<'_, M> {
    fn modes(&self) -> usize {
        self.l
    }

    fn num_params(&self) -> usize {
        self.model.num_params()
    }

    fn param_names(&self) -> Vec<String> {
        self.model.param_names()
    }

    fn hamiltonian(&self, lambda: &[f64]) -> Result<CMatrix> {
        Ok(self.assemble(&|r| self.model.h_block(r, lambda)))
    }

    fn bath(&self, lambda: &[f64]) -> Result<CMatrix> {
        Ok(self.assemble(&|r| self.model.m_block(r, lambda)))
    }

    fn d_hamiltonian(&self, mu: usize, lambda: &[f64]) -> Option<Result<CMatrix>> {
        Some(Ok(self.assemble(&|r| self.model.dh_block(mu, r, lambda))))
    }

    fn d_bath(&self, mu: usize, lambda: &[f64]) -> Option<Result<CMatrix>> {
        Some(Ok(self.assemble(&|r| self.model.dm_block(mu, r, lambda))))
    }
}

/// Largest imaginary part of a tensor, used as a realness diagnostic.
pub fn imaginary_residue(m: &CMatrix) -> f64 {
    max_imag(m)
}
