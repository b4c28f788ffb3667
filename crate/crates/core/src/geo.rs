//! Geometric tensors of eigenstates of parameterized non-Hermitian operators.
//!
//! Everything is computed from an [`EigenJet`]: the biorthogonal system at a
//! parameter point together with the first derivatives of every right and
//! left eigenvector. The jet comes either from first-order perturbation
//! theory (the gauge-fixed AGP, default) or from a finite-difference stencil
//! with eigenstate continuation.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::biortho::{build_biortho, cluster_labels, BiorthogonalSystem};
use crate::error::{Error, Result};
use crate::linalg::{c64, hermiticity_error, CMatrix, MatrixJson, C64};

/// A square matrix `K(λ)` depending on `d` real parameters.
pub trait OperatorFamily: Sync {
    fn dim(&self) -> usize;
    fn num_params(&self) -> usize;
    fn evaluate(&self, lambda: &[f64]) -> Result<CMatrix>;

    /// Analytic `∂_μ K`, if the family knows it.
    fn derivative(&self, _mu: usize, _lambda: &[f64]) -> Option<Result<CMatrix>> {
        None
    }

    fn param_names(&self) -> Vec<String> {
        (0..self.num_params()).map(|i| format!("p{i}")).collect()
    }
}

/// `K(λ) = K₀ + Σ_μ λ_μ V_μ`.
#[derive(Debug, Clone)]
pub struct LinearFamily {
    pub base: CMatrix,
    pub directions: Vec<CMatrix>,
}

impl LinearFamily {
    pub fn new(base: CMatrix, directions: Vec<CMatrix>) -> Result<Self> {
        let n = base.nrows();
        if base.ncols() != n {
            return Err(Error::NotSquare {
                rows: n,
                cols: base.ncols(),
            });
        }
        if directions.iter().any(|v| v.nrows() != n || v.ncols() != n) {
            return Err(Error::ShapeMismatch(
                "direction matrices must match the base matrix".into(),
            ));
        }
        Ok(Self { base, directions })
    }
}

impl OperatorFamily for LinearFamily {
    fn dim(&self) -> usize {
        self.base.nrows()
    }

    fn num_params(&self) -> usize {
        self.directions.len()
    }

    fn evaluate(&self, lambda: &[f64]) -> Result<CMatrix> {
        check_point(self, lambda)?;
        let mut k = self.base.clone();
        for (v, &x) in self.directions.iter().zip(lambda) {
            k += v * c64(x, 0.0);
        }
        Ok(k)
    }

    fn derivative(&self, mu: usize, _lambda: &[f64]) -> Option<Result<CMatrix>> {
        self.directions.get(mu).cloned().map(Ok)
    }
}

/// Family defined by a closure; derivatives come from finite differences.
pub struct FnFamily<F> {
    pub dim: usize,
    pub num_params: usize,
    pub f: F,
}

impl<F> OperatorFamily for FnFamily<F>
where
    F: Fn(&[f64]) -> CMatrix + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn num_params(&self) -> usize {
        self.num_params
    }

    fn evaluate(&self, lambda: &[f64]) -> Result<CMatrix> {
        check_point(self, lambda)?;
        Ok((self.f)(lambda))
    }
}

fn check_point<F: OperatorFamily + ?Sized>(fam: &F, lambda: &[f64]) -> Result<()> {
    if lambda.len() != fam.num_params() {
        return Err(Error::ShapeMismatch(format!(
            "parameter point has {} entries, family has {} parameters",
            lambda.len(),
            fam.num_params()
        )));
    }
    if lambda.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Central-difference step `ε^{1/3}·max(1, |x|)`.
pub fn fd_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}

fn shifted(lambda: &[f64], mu: usize, h: f64) -> Vec<f64> {
    let mut p = lambda.to_vec();
    p[mu] += h;
    p
}

/// Central difference of `K` along direction `mu`, optionally with one
/// Richardson step.
pub fn finite_difference<F: OperatorFamily + ?Sized>(
    fam: &F,
    lambda: &[f64],
    mu: usize,
    richardson: bool,
) -> Result<CMatrix> {
    let h = fd_step(lambda[mu]);
    let cd = |h: f64| -> Result<CMatrix> {
        let kp = fam.evaluate(&shifted(lambda, mu, h))?;
        let km = fam.evaluate(&shifted(lambda, mu, -h))?;
        Ok((kp - km) / c64(2.0 * h, 0.0))
    };
    if richardson {
        let coarse = cd(h)?;
        let fine = cd(0.5 * h)?;
        Ok((fine * c64(4.0, 0.0) - coarse) / c64(3.0, 0.0))
    } else {
        cd(h)
    }
}

/// `∂_μ K`, analytic when available. Also returns the finite-difference step
/// when one was used.
pub fn operator_derivative<F: OperatorFamily + ?Sized>(
    fam: &F,
    lambda: &[f64],
    mu: usize,
    richardson: bool,
) -> Result<(CMatrix, Option<f64>)> {
    if mu >= fam.num_params() {
        return Err(Error::ShapeMismatch(format!(
            "direction {mu} out of range for {} parameters",
            fam.num_params()
        )));
    }
    match fam.derivative(mu, lambda) {
        Some(d) => Ok((d?, None)),
        None => Ok((
            finite_difference(fam, lambda, mu, richardson)?,
            Some(fd_step(lambda[mu])),
        )),
    }
}

/// Largest relative discrepancy between analytic and central-difference
/// derivatives over all directions; `None` for families without analytic
/// derivatives.
pub fn derivative_consistency<F: OperatorFamily + ?Sized>(fam: &F, lambda: &[f64]) -> Result<Option<f64>> {
    let mut worst: Option<f64> = None;
    for mu in 0..fam.num_params() {
        if let Some(d) = fam.derivative(mu, lambda) {
            let d = d?;
            let fd = finite_difference(fam, lambda, mu, true)?;
            let rel = (&d - fd).norm() / d.norm().max(1e-300);
            worst = Some(worst.map_or(rel, |w: f64| w.max(rel)));
        }
    }
    Ok(worst)
}

/// Treatment of (near-)degenerate eigenvalues in the AGP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Degeneracy {
    /// Fail with `DegenerateSpectrum` when `μ_reg = 0` and a gap is below
    /// `1e-10·‖K‖`.
    Error,
    /// Eigenvalues closer than `tol` form clusters; AGP elements inside a
    /// cluster are set to zero. This is the spectral-projector form of the
    /// gauge-fixed AGP and does not depend on the basis chosen inside a
    /// cluster.
    MergeClusters { tol: f64 },
}

/// How eigenvector derivatives are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JetMethod {
    /// `∂R = R a` with the AGP elements `a`, plus a diagonal term keeping the
    /// right vectors unit-normalized to first order.
    Perturbative,
    /// Central differences of eigenvectors at `λ ± h`, states paired by
    /// maximal `|⟨n_L(λ)|m_R(λ±h)⟩|`.
    Stencil,
}

#[derive(Debug, Clone, Copy)]
pub struct TensorOptions {
    pub mu_reg: f64,
    pub degeneracy: Degeneracy,
    pub jet: JetMethod,
    /// Richardson extrapolation for every finite difference taken.
    pub richardson: bool,
}

impl Default for TensorOptions {
    fn default() -> Self {
        Self {
            mu_reg: 0.0,
            degeneracy: Degeneracy::Error,
            jet: JetMethod::Perturbative,
            richardson: false,
        }
    }
}

impl TensorOptions {
    pub fn merged(tol: f64) -> Self {
        Self {
            degeneracy: Degeneracy::MergeClusters { tol },
            ..Self::default()
        }
    }
}

/// Gauge-fixed AGP elements `⟨m_L|𝒜_μ|n_R⟩` (zero diagonal).
#[derive(Debug, Clone)]
pub struct AgpMatrix {
    pub direction: usize,
    pub mu_reg: f64,
    pub elements: CMatrix,
}

impl AgpMatrix {
    /// The operator `𝒜 = Σ_{mn} |m_R⟩ a_mn ⟨n_L|`.
    pub fn operator(&self, sys: &BiorthogonalSystem) -> CMatrix {
        &sys.right * &self.elements * sys.left.adjoint()
    }

    pub fn frobenius_norm_sq(&self, sys: &BiorthogonalSystem) -> f64 {
        self.operator(sys).norm_squared()
    }
}

/// AGP elements `(Λ_n* − Λ_m*)/(|Λ_n − Λ_m|² + μ²)·⟨m_L|∂K|n_R⟩` in the basis
/// of `sys`.
pub fn agp_in_basis(
    sys: &BiorthogonalSystem,
    dk: &CMatrix,
    mu_reg: f64,
    degeneracy: Degeneracy,
) -> Result<CMatrix> {
    let n = sys.dim();
    let labels = match degeneracy {
        Degeneracy::MergeClusters { tol } => cluster_labels(&sys.eigenvalues, tol),
        Degeneracy::Error => (0..n).collect(),
    };
    let thresh = sys.degeneracy_threshold();
    let f = sys.left.adjoint() * dk * &sys.right;
    let mut a = CMatrix::zeros(n, n);
    for m in 0..n {
        for k in 0..n {
            if m == k || labels[m] == labels[k] {
                continue;
            }
            let delta = sys.eigenvalues[k] - sys.eigenvalues[m];
            if mu_reg == 0.0 && delta.norm() < thresh {
                return Err(Error::DegenerateSpectrum { gap: delta.norm() });
            }
            a[(m, k)] = delta.conj() / (delta.norm_sqr() + mu_reg * mu_reg) * f[(m, k)];
        }
    }
    Ok(a)
}

/// `‖∂K − ℱ − [𝒜, K]‖` with `ℱ = Σ_n ∂Λ_n |n_R⟩⟨n_L|`.
pub fn agp_residual(sys: &BiorthogonalSystem, k: &CMatrix, dk: &CMatrix, agp: &AgpMatrix) -> f64 {
    let n = sys.dim();
    let f = sys.left.adjoint() * dk * &sys.right;
    let dlam = CMatrix::from_fn(n, n, |i, j| if i == j { f[(i, i)] } else { c64(0.0, 0.0) });
    let fcal = &sys.right * dlam * sys.left.adjoint();
    let a = agp.operator(sys);
    (dk - fcal - (&a * k - k * &a)).norm()
}

/// Eigensystem at `λ` with first derivatives of all right and left vectors.
#[derive(Debug, Clone)]
pub struct EigenJet {
    pub lambda: Vec<f64>,
    pub sys: BiorthogonalSystem,
    pub dk: Vec<CMatrix>,
    pub agp: Vec<CMatrix>,
    pub d_right: Vec<CMatrix>,
    pub d_left: Vec<CMatrix>,
    pub mu_reg: f64,
    pub fd_step: Option<f64>,
}

impl EigenJet {
    pub fn compute<F: OperatorFamily + ?Sized>(fam: &F, lambda: &[f64], opts: &TensorOptions) -> Result<Self> {
        check_point(fam, lambda)?;
        let k = fam.evaluate(lambda)?;
        let sys = build_biortho(&k)?;
        let mut dk = Vec::with_capacity(fam.num_params());
        let mut step = None;
        for mu in 0..fam.num_params() {
            let (d, h) = operator_derivative(fam, lambda, mu, opts.richardson)?;
            step = step.or(h);
            dk.push(d);
        }
        match opts.jet {
            JetMethod::Perturbative => Self::perturbative(lambda.to_vec(), sys, dk, opts).map(|mut j| {
                j.fd_step = step;
                j
            }),
            JetMethod::Stencil => {
                let agp = dk
                    .iter()
                    .map(|d| agp_in_basis(&sys, d, opts.mu_reg, opts.degeneracy))
                    .collect::<Result<Vec<_>>>()?;
                let mut d_right = Vec::new();
                let mut d_left = Vec::new();
                let mut h_used = None;
                for mu in 0..fam.num_params() {
                    let (dr, dl, h) = stencil_derivative(fam, lambda, mu, &sys, opts.richardson)?;
                    d_right.push(dr);
                    d_left.push(dl);
                    h_used = h_used.or(Some(h));
                }
                Ok(Self {
                    lambda: lambda.to_vec(),
                    sys,
                    dk,
                    agp,
                    d_right,
                    d_left,
                    mu_reg: opts.mu_reg,
                    fd_step: h_used,
                })
            }
        }
    }

    /// Perturbative jet from a ready system and operator derivatives.
    pub fn perturbative(lambda: Vec<f64>, sys: BiorthogonalSystem, dk: Vec<CMatrix>, opts: &TensorOptions) -> Result<Self> {
        let n = sys.dim();
        let mut agp = Vec::with_capacity(dk.len());
        let mut d_right = Vec::with_capacity(dk.len());
        let mut d_left = Vec::with_capacity(dk.len());
        for d in &dk {
            let a = agp_in_basis(&sys, d, opts.mu_reg, opts.degeneracy)?;
            let ra = &sys.right * &a;
            // diagonal gauge term keeps ⟨n_R|n_R⟩ = 1 to first order
            let c: Vec<C64> = (0..n).map(|j| -sys.right.column(j).dotc(&ra.column(j))).collect();
            let mut dr = ra;
            let mut dl = -(&sys.left * a.adjoint());
            for j in 0..n {
                let rj = sys.right.column(j) * c[j];
                let lj = sys.left.column(j) * c[j].conj();
                let mut col = dr.column_mut(j);
                col += rj;
                let mut col = dl.column_mut(j);
                col -= lj;
            }
            agp.push(a);
            d_right.push(dr);
            d_left.push(dl);
        }
        Ok(Self {
            lambda,
            sys,
            dk,
            agp,
            d_right,
            d_left,
            mu_reg: opts.mu_reg,
            fd_step: None,
        })
    }

    pub fn num_params(&self) -> usize {
        self.dk.len()
    }

    pub fn dim(&self) -> usize {
        self.sys.dim()
    }

    /// Jet after the λ-dependent gauge change `R → e^{r}R`, given `r_n` and
    /// `∂_μ r_n` at the current point.
    pub fn regauge(&self, r: &[C64], dr: &[Vec<C64>]) -> Result<Self> {
        let n = self.dim();
        if r.len() != n || dr.len() != self.num_params() || dr.iter().any(|v| v.len() != n) {
            return Err(Error::ShapeMismatch("gauge function has the wrong shape".into()));
        }
        let sys = crate::biortho::gauge_rescale(&self.sys, r)?;
        let mut out = self.clone();
        for mu in 0..self.num_params() {
            for j in 0..n {
                let er = r[j].exp();
                let el = (-r[j].conj()).exp();
                let drj = dr[mu][j];
                for i in 0..n {
                    out.d_right[mu][(i, j)] = er * (self.d_right[mu][(i, j)] + drj * self.sys.right[(i, j)]);
                    out.d_left[mu][(i, j)] = el * (self.d_left[mu][(i, j)] - drj.conj() * self.sys.left[(i, j)]);
                }
                for m in 0..n {
                    // ⟨m_L|𝒜|j_R⟩ picks up e^{r_j − r_m}
                    out.agp[mu][(m, j)] = self.agp[mu][(m, j)] * (r[j] - r[m]).exp();
                }
            }
        }
        out.sys = sys;
        Ok(out)
    }

    /// Berry connection `⟨n_L|∂_μ n_R⟩`.
    pub fn berry(&self, n: usize, mu: usize) -> C64 {
        self.sys.left.column(n).dotc(&self.d_right[mu].column(n))
    }

    /// Dual expression `−⟨∂_μ n_L|n_R⟩`.
    pub fn berry_dual(&self, n: usize, mu: usize) -> C64 {
        -self.d_left[mu].column(n).dotc(&self.sys.right.column(n))
    }

    /// Covariant derivatives `|D_μ m_R⟩` of all right vectors.
    pub fn covariant_right(&self, mu: usize) -> CMatrix {
        let mut d = self.d_right[mu].clone();
        for m in 0..self.dim() {
            let a = self.berry(m, mu);
            let col = self.sys.right.column(m) * a;
            let mut dc = d.column_mut(m);
            dc -= col;
        }
        d
    }

    /// Covariant derivatives `|D_μ m_L⟩ = |∂_μ m_L⟩ + A_μ* |m_L⟩`.
    pub fn covariant_left(&self, mu: usize) -> CMatrix {
        let mut d = self.d_left[mu].clone();
        for m in 0..self.dim() {
            let a = self.berry(m, mu).conj();
            let col = self.sys.left.column(m) * a;
            let mut dc = d.column_mut(m);
            dc += col;
        }
        d
    }

    fn params_matrix(&self, f: impl Fn(usize, usize) -> C64) -> CMatrix {
        let d = self.num_params();
        CMatrix::from_fn(d, d, f)
    }

    /// `η_μν = ⟨∂_μ n_L|∂_ν n_R⟩ − ⟨∂_μ n_L|n_R⟩⟨n_L|∂_ν n_R⟩`.
    pub fn eta(&self, n: usize) -> Result<CMatrix> {
        self.sys.check_state(n)?;
        let r = self.sys.right.column(n);
        Ok(self.params_matrix(|mu, nu| {
            let dl = self.d_left[mu].column(n);
            let dr = self.d_right[nu].column(n);
            dl.dotc(&dr) - dl.dotc(&r) * self.berry(n, nu)
        }))
    }

    pub fn zeta(&self, n: usize, route: ZetaRoute) -> Result<CMatrix> {
        self.sys.check_state(n)?;
        Ok(match route {
            ZetaRoute::Overlap => self.zeta_overlap(n),
            ZetaRoute::Projector => self.zeta_projector(n),
            ZetaRoute::Agp => self.zeta_agp(n),
        })
    }

    /// `Σ_m ⟨n_L|m_L⟩⟨D_μ m_R|D_ν n_R⟩`.
    fn zeta_overlap(&self, n: usize) -> CMatrix {
        let gl = self.sys.gram_left();
        let dr: Vec<CMatrix> = (0..self.num_params()).map(|mu| self.covariant_right(mu)).collect();
        self.params_matrix(|mu, nu| {
            let target = dr[nu].column(n);
            (0..self.dim())
                .map(|m| gl[(n, m)] * dr[mu].column(m).dotc(&target))
                .sum()
        })
    }

    /// `Σ_m (C⁻¹)_nm ⟨∂_μ m_R|1 − P_m† − P_n + P_m† P_n|∂_ν n_R⟩`, with the
    /// projectors applied to vectors.
    fn zeta_projector(&self, n: usize) -> CMatrix {
        let cinv = self.sys.gram_left();
        let (r, l) = (&self.sys.right, &self.sys.left);
        // P_m v = r_m ⟨m_L|v⟩,  P_m† v = l_m ⟨m_R|v⟩
        self.params_matrix(|mu, nu| {
            let v = self.d_right[nu].column(n).clone_owned();
            let pn_v = r.column(n) * l.column(n).dotc(&v);
            let mut total = c64(0.0, 0.0);
            for m in 0..self.dim() {
                let w = &v - &pn_v;
                let w = &w - l.column(m) * r.column(m).dotc(&w);
                total += cinv[(n, m)] * self.d_right[mu].column(m).dotc(&w);
            }
            total
        })
    }

    /// `⟨n_L|𝒜_μ† 𝒜_ν|n_R⟩` with the gauge-fixed AGP.
    fn zeta_agp(&self, n: usize) -> CMatrix {
        let ops: Vec<CMatrix> = self
            .agp
            .iter()
            .map(|a| &self.sys.right * a * self.sys.left.adjoint())
            .collect();
        let l = self.sys.left.column(n);
        let r = self.sys.right.column(n);
        let al: Vec<_> = ops.iter().map(|a| a * l).collect();
        let ar: Vec<_> = ops.iter().map(|a| a * r).collect();
        self.params_matrix(|mu, nu| al[mu].dotc(&ar[nu]))
    }

    /// `⟨n_L|n_L⟩⟨D_μ n_R|D_ν n_R⟩`, divided by `⟨n_L|n_L⟩⟨n_R|n_R⟩` when
    /// `rescaled`.
    pub fn zeta_limited(&self, n: usize, rescaled: bool) -> Result<CMatrix> {
        self.sys.check_state(n)?;
        let dr: Vec<_> = (0..self.num_params())
            .map(|mu| self.covariant_right(mu).column(n).clone_owned())
            .collect();
        let pref = if rescaled {
            1.0 / self.sys.right.column(n).norm_squared()
        } else {
            self.sys.left.column(n).norm_squared()
        };
        Ok(self.params_matrix(|mu, nu| dr[mu].dotc(&dr[nu]) * pref))
    }

    /// `‖∂_μ P_n‖²/‖P_n‖²` for `P_n = |n_R⟩⟨n_L|`, from covariant derivatives.
    pub fn projector_deformation(&self, n: usize, mu: usize) -> Result<f64> {
        self.sys.check_state(n)?;
        let r = self.sys.right.column(n);
        let l = self.sys.left.column(n);
        let dr = self.covariant_right(mu).column(n).clone_owned();
        let dl = self.covariant_left(mu).column(n).clone_owned();
        let (rr, ll) = (r.norm_squared(), l.norm_squared());
        let cross = l.dotc(&dl) * r.dotc(&dr) + dl.dotc(&l) * dr.dotc(&r);
        Ok(dr.norm_squared() / rr + dl.norm_squared() / ll + cross.re / (ll * rr))
    }

    /// Operator form of the AGP in direction `mu`.
    pub fn agp_operator(&self, mu: usize) -> CMatrix {
        &self.sys.right * &self.agp[mu] * self.sys.left.adjoint()
    }
}

/// Eigenvector derivatives along `mu` from a central-difference stencil.
fn stencil_derivative<F: OperatorFamily + ?Sized>(
    fam: &F,
    lambda: &[f64],
    mu: usize,
    sys: &BiorthogonalSystem,
    richardson: bool,
) -> Result<(CMatrix, CMatrix, f64)> {
    let h = fd_step(lambda[mu]);
    let cd = |h: f64| -> Result<(CMatrix, CMatrix)> {
        let (rp, lp) = continued_vectors(fam, &shifted(lambda, mu, h), sys)?;
        let (rm, lm) = continued_vectors(fam, &shifted(lambda, mu, -h), sys)?;
        let s = c64(2.0 * h, 0.0);
        Ok(((rp - rm) / s, (lp - lm) / s))
    };
    let (dr, dl) = if richardson {
        let (r1, l1) = cd(h)?;
        let (r2, l2) = cd(0.5 * h)?;
        let four = c64(4.0, 0.0);
        let three = c64(3.0, 0.0);
        ((r2 * four - r1) / three, (l2 * four - l1) / three)
    } else {
        cd(h)?
    };
    Ok((dr, dl, h))
}

/// Eigenvectors at a nearby point, paired with `sys` and scaled so that
/// `⟨n_L(λ)|n_R(λ′)⟩ = 1`.
fn continued_vectors<F: OperatorFamily + ?Sized>(
    fam: &F,
    lambda: &[f64],
    sys: &BiorthogonalSystem,
) -> Result<(CMatrix, CMatrix)> {
    let other = build_biortho(&fam.evaluate(lambda)?)?;
    let n = sys.dim();
    let overlap = sys.left.adjoint() * &other.right;
    let mut used = vec![false; n];
    let mut right = CMatrix::zeros(n, n);
    let mut left = CMatrix::zeros(n, n);
    for s in 0..n {
        let mut best = None;
        let mut best_val = 0.0;
        for m in 0..n {
            let v = overlap[(s, m)].norm();
            if v > best_val {
                best_val = v;
                best = Some(m);
            }
        }
        let m = match best {
            Some(m) if best_val >= 0.5 && !used[m] => m,
            _ => {
                return Err(Error::ContinuationAmbiguous {
                    state: s,
                    overlap: best_val,
                })
            }
        };
        used[m] = true;
        let z = overlap[(s, m)];
        right.set_column(s, &(other.right.column(m) / z));
        left.set_column(s, &(other.left.column(m) * z.conj()));
    }
    Ok((right, left))
}

/// Which tensor a [`GeoTensor`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorKind {
    Chi,
    Eta,
    Zeta,
    ZetaLimited,
    ZetaLimitedRescaled,
    Bures,
}

impl TensorKind {
    pub fn name(&self) -> &'static str {
        match self {
            TensorKind::Chi => "chi",
            TensorKind::Eta => "eta",
            TensorKind::Zeta => "zeta",
            TensorKind::ZetaLimited => "zeta_limited",
            TensorKind::ZetaLimitedRescaled => "zeta_limited_rescaled",
            TensorKind::Bures => "bures",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "chi" => TensorKind::Chi,
            "eta" => TensorKind::Eta,
            "zeta" => TensorKind::Zeta,
            "zeta_limited" => TensorKind::ZetaLimited,
            "zeta_limited_rescaled" => TensorKind::ZetaLimitedRescaled,
            "bures" => TensorKind::Bures,
            _ => return None,
        })
    }
}

/// Route used for ζ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZetaRoute {
    Projector,
    Agp,
    #[default]
    Overlap,
}

/// A `d×d` complex tensor over parameter directions.
#[derive(Debug, Clone, Serialize)]
pub struct GeoTensor {
    pub kind: TensorKind,
    /// Eigenstate index; `None` for quantities not tied to one eigenvector.
    pub state: Option<usize>,
    #[serde(serialize_with = "serialize_matrix")]
    pub values: CMatrix,
    pub lambda: Vec<f64>,
    pub mu_reg: f64,
    pub fd_step: Option<f64>,
}

fn serialize_matrix<S: serde::Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    MatrixJson::from(m).serialize(s)
}

impl GeoTensor {
    pub fn new(kind: TensorKind, state: Option<usize>, values: CMatrix, lambda: &[f64]) -> Self {
        Self {
            kind,
            state,
            values,
            lambda: lambda.to_vec(),
            mu_reg: 0.0,
            fd_step: None,
        }
    }

    fn from_jet(kind: TensorKind, n: usize, values: CMatrix, jet: &EigenJet) -> Self {
        Self {
            kind,
            state: Some(n),
            values,
            lambda: jet.lambda.clone(),
            mu_reg: jet.mu_reg,
            fd_step: jet.fd_step,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, mu: usize, nu: usize) -> C64 {
        self.values[(mu, nu)]
    }

    /// Real part: the Fubini–Study metric when `kind == Chi`.
    pub fn metric(&self) -> DMatrix<f64> {
        self.values.map(|z| z.re)
    }

    /// `−2·Im`: the Berry curvature when `kind == Chi`.
    pub fn berry_curvature(&self) -> DMatrix<f64> {
        self.values.map(|z| -2.0 * z.im)
    }

    /// Largest entry of `values − values†`.
    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.values)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.values + self.values.adjoint()) * c64(0.5, 0.0);
        SymmetricEigen::new(h).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.values *= c64(s, 0.0);
        self
    }
}

/// AGP elements of `fam` at `λ` along direction `mu`.
pub fn agp_elements<F: OperatorFamily + ?Sized>(
    fam: &F,
    lambda: &[f64],
    mu: usize,
    opts: &TensorOptions,
) -> Result<(BiorthogonalSystem, AgpMatrix)> {
    check_point(fam, lambda)?;
    let sys = build_biortho(&fam.evaluate(lambda)?)?;
    let (dk, _) = operator_derivative(fam, lambda, mu, opts.richardson)?;
    let elements = agp_in_basis(&sys, &dk, opts.mu_reg, opts.degeneracy)?;
    Ok((
        sys,
        AgpMatrix {
            direction: mu,
            mu_reg: opts.mu_reg,
            elements,
        },
    ))
}

/// Hermitian quantum geometric tensor by a sum over states, using a
/// Hermitian eigensolver independent of the non-Hermitian machinery.
pub fn chi_hermitian<F: OperatorFamily + ?Sized>(
    fam: &F,
    lambda: &[f64],
    n: usize,
    opts: &TensorOptions,
) -> Result<GeoTensor> {
    check_point(fam, lambda)?;
    let k = fam.evaluate(lambda)?;
    let scale = k.norm().max(1.0);
    let dev = hermiticity_error(&k);
    if dev > 1e-12 * scale {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let dim = k.nrows();
    if n >= dim {
        return Err(Error::StateIndex { index: n, dim });
    }
    let eig = SymmetricEigen::new((&k + k.adjoint()) * c64(0.5, 0.0));
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let e: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let v = CMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
    let d = fam.num_params();
    let mut step = None;
    let mut elems = Vec::with_capacity(d);
    for mu in 0..d {
        let (dk, h) = operator_derivative(fam, lambda, mu, opts.richardson)?;
        step = step.or(h);
        elems.push(v.adjoint() * dk * &v);
    }
    let thresh = 1e-10 * scale;
    for m in 0..dim {
        if m != n && (e[n] - e[m]).abs() < thresh {
            return Err(Error::DegenerateSpectrum {
                gap: (e[n] - e[m]).abs(),
            });
        }
    }
    let values = CMatrix::from_fn(d, d, |mu, nu| {
        (0..dim)
            .filter(|&m| m != n)
            .map(|m| elems[mu][(n, m)] * elems[nu][(m, n)] / ((e[n] - e[m]).powi(2)))
            .sum()
    });
    let mut t = GeoTensor::new(TensorKind::Chi, Some(n), values, lambda);
    t.fd_step = step;
    Ok(t)
}

pub fn eta_tensor<F: OperatorFamily + ?Sized>(fam: &F, lambda: &[f64], n: usize, opts: &TensorOptions) -> Result<GeoTensor> {
    let jet = EigenJet::compute(fam, lambda, opts)?;
    Ok(GeoTensor::from_jet(TensorKind::Eta, n, jet.eta(n)?, &jet))
}

pub fn zeta_tensor<F: OperatorFamily + ?Sized>(
    fam: &F,
    lambda: &[f64],
    n: usize,
    route: ZetaRoute,
    opts: &TensorOptions,
) -> Result<GeoTensor> {
    let jet = EigenJet::compute(fam, lambda, opts)?;
    Ok(GeoTensor::from_jet(TensorKind::Zeta, n, jet.zeta(n, route)?, &jet))
}

pub fn zeta_limited<F: OperatorFamily + ?Sized>(
    fam: &F,
    lambda: &[f64],
    n: usize,
    rescaled: bool,
    opts: &TensorOptions,
) -> Result<GeoTensor> {
    let jet = EigenJet::compute(fam, lambda, opts)?;
    let kind = if rescaled {
        TensorKind::ZetaLimitedRescaled
    } else {
        TensorKind::ZetaLimited
    };
    Ok(GeoTensor::from_jet(kind, n, jet.zeta_limited(n, rescaled)?, &jet))
}

pub fn berry_connection<F: OperatorFamily + ?Sized>(
    fam: &F,
    lambda: &[f64],
    n: usize,
    mu: usize,
    opts: &TensorOptions,
) -> Result<C64> {
    let jet = EigenJet::compute(fam, lambda, opts)?;
    jet.sys.check_state(n)?;
    Ok(jet.berry(n, mu))
}

pub fn projector_deformation<F: OperatorFamily + ?Sized>(
    fam: &F,
    lambda: &[f64],
    n: usize,
    mu: usize,
    opts: &TensorOptions,
) -> Result<f64> {
    let jet = EigenJet::compute(fam, lambda, opts)?;
    jet.projector_deformation(n, mu)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qubit() -> FnFamily<impl Fn(&[f64]) -> CMatrix + Sync> {
        FnFamily {
            dim: 2,
            num_params: 1,
            f: |p: &[f64]| {
                let (s, c) = p[0].sin_cos();
                CMatrix::from_row_slice(2, 2, &[c64(c, 0.0), c64(s, 0.0), c64(s, 0.0), c64(-c, 0.0)])
            },
        }
    }

    #[test]
    fn qubit_chi_is_quarter() {
        let fam = qubit();
        for theta in [0.1, 0.7, 2.0] {
            let chi = chi_hermitian(&fam, &[theta], 0, &TensorOptions::default()).unwrap();
            assert!((chi.get(0, 0) - c64(0.25, 0.0)).norm() < 1e-9);
            assert_eq!(chi.berry_curvature()[(0, 0)], 0.0);
        }
    }

    #[test]
    fn qubit_projector_deformation_is_half() {
        let fam = qubit();
        let v = projector_deformation(&fam, &[0.4], 0, 0, &TensorOptions::default()).unwrap();
        assert!((v - 0.5).abs() < 1e-9, "{v}");
    }

    #[test]
    fn commuting_family_has_zero_agp() {
        let fam = FnFamily {
            dim: 2,
            num_params: 1,
            f: |p: &[f64]| CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c64(p[0], 0.0), c64(2.0 * p[0], 0.0)])),
        };
        let (_, a) = agp_elements(&fam, &[1.0], 0, &TensorOptions::default()).unwrap();
        assert!(a.elements.norm() < 1e-12);
    }

    #[test]
    fn single_offdiagonal_perturbation() {
        let base = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c64(1.0, 0.5), c64(3.0, -1.0)]));
        let mut v = CMatrix::zeros(2, 2);
        v[(0, 1)] = c64(0.3, 0.2);
        let fam = LinearFamily::new(base, vec![v]).unwrap();
        let (sys, a) = agp_elements(&fam, &[0.0], 0, &TensorOptions::default()).unwrap();
        let expected = c64(0.3, 0.2) / (sys.eigenvalues[1] - sys.eigenvalues[0]);
        let r = sys.right[(0, 0)] / sys.right[(1, 1)];
        assert!((a.elements[(0, 1)] * r - expected).norm() < 1e-14 * 10.0);
    }

    #[test]
    fn degenerate_spectrum_detected() {
        let fam = LinearFamily::new(CMatrix::identity(2, 2), vec![CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)])]).unwrap();
        let err = agp_elements(&fam, &[0.0], 0, &TensorOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateSpectrum { .. }));
        assert!(agp_elements(&fam, &[0.0], 0, &TensorOptions::merged(1e-8)).is_ok());
    }

    #[test]
    fn tensor_kind_names_round_trip() {
        for k in [
            TensorKind::Chi,
            TensorKind::Eta,
            TensorKind::Zeta,
            TensorKind::ZetaLimited,
            TensorKind::ZetaLimitedRescaled,
            TensorKind::Bures,
        ] {
            assert_eq!(TensorKind::parse(k.name()), Some(k));
        }
    }
}
