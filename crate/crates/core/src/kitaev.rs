//! Kitaev chain with on-site gain and loss.
//!
//! Majorana blocks per cell (`w_{j,1}, w_{j,2}`):
//! `h(0) = (h/2)·σ_y`-like on-site term, nearest-neighbour `h(±1)` from
//! hopping and pairing, and the on-site bath block
//! `m(0) = g²/4 [(μ₊² + μ₋²)σ₀ + (μ₊² − μ₋²)σ_y]`. In k-space
//! `h(k) = ½γ sin k σ_x + ½(h − cos k) σ_y`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geo::{GeoTensor, TensorKind};
use crate::linalg::{c64, CMatrix};
use crate::nh_ssh::k_grid;
use crate::quad::LatticeModel;

const CRITICAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KitaevParams {
    pub h: f64,
    pub gamma: f64,
    pub g: f64,
    pub mu_plus: f64,
    pub mu_minus: f64,
    /// Number of sites.
    pub l: usize,
}

impl KitaevParams {
    pub fn validate(&self) -> Result<()> {
        if self.l == 0 {
            return Err(Error::InvalidConfig("L must be positive".into()));
        }
        if self.g < 0.0 || self.mu_plus < 0.0 || self.mu_minus < 0.0 {
            return Err(Error::InvalidConfig("g, mu_plus and mu_minus must be non-negative".into()));
        }
        lambda_ratio(self.mu_plus, self.mu_minus).map(|_| ())
    }

    pub fn lambda_ratio(&self) -> Result<f64> {
        lambda_ratio(self.mu_plus, self.mu_minus)
    }

    pub fn chain(&self, weak_coupling: bool) -> KitaevChain {
        KitaevChain {
            g: self.g,
            mu_plus: self.mu_plus,
            mu_minus: self.mu_minus,
            weak_coupling,
        }
    }
}

/// `Λ = (μ₊² − μ₋²)/(μ₊² + μ₋²)`.
pub fn lambda_ratio(mu_plus: f64, mu_minus: f64) -> Result<f64> {
    let s = mu_plus * mu_plus + mu_minus * mu_minus;
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::InvalidConfig("mu_plus^2 + mu_minus^2 must be positive".into()));
    }
    Ok((mu_plus * mu_plus - mu_minus * mu_minus) / s)
}

/// `D = (h − cos k)² + γ² sin²k`.
fn denom(h: f64, gamma: f64, k: f64) -> f64 {
    let (s, c) = k.sin_cos();
    (h - c).powi(2) + gamma * gamma * s * s
}

/// Bogoliubov angle `atan2(γ sin k, h − cos k)`.
pub fn phi_k(h: f64, gamma: f64, k: f64) -> Result<f64> {
    if denom(h, gamma, k).sqrt() < CRITICAL_TOL {
        return Err(Error::UndefinedAngle { k });
    }
    let (s, c) = k.sin_cos();
    Ok((gamma * s).atan2(h - c))
}

/// `(∂_hφ, ∂_γφ) = (−γ sin k, sin k (h − cos k)) / D`.
pub fn dphi(h: f64, gamma: f64, k: f64) -> Result<(f64, f64)> {
    let d = denom(h, gamma, k);
    if d.sqrt() < CRITICAL_TOL {
        return Err(Error::UndefinedAngle { k });
    }
    let (s, c) = k.sin_cos();
    Ok((-gamma * s / d, s * (h - c) / d))
}

fn angle_data(h: f64, gamma: f64, k: f64) -> Result<(f64, f64, [f64; 2])> {
    let d = denom(h, gamma, k);
    if d.sqrt() < CRITICAL_TOL {
        return Err(Error::CriticalKPoint { k });
    }
    let (s, c) = k.sin_cos();
    let sin2 = gamma * gamma * s * s / d;
    let cos2 = (h - c).powi(2) / d;
    Ok((sin2, cos2, [-gamma * s / d, s * (h - c) / d]))
}

fn sym_tensor(m: [[f64; 2]; 2], lambda: &[f64]) -> GeoTensor {
    GeoTensor::new(
        TensorKind::Zeta,
        None,
        CMatrix::from_fn(2, 2, |i, j| c64(m[i][j], 0.0)),
        lambda,
    )
}

fn bz_sum(p: &KitaevParams, weight: impl Fn(f64, f64) -> f64) -> Result<[[f64; 2]; 2]> {
    let mut acc = [[0.0; 2]; 2];
    for k in k_grid(p.l) {
        let (s2, c2, d) = angle_data(p.h, p.gamma, k)?;
        let w = weight(s2, c2);
        for i in 0..2 {
            for j in 0..2 {
                acc[i][j] += w * d[i] * d[j];
            }
        }
    }
    Ok(acc)
}

/// `Λ² Σ_k sin²φ_k ∂_μφ_k ∂_νφ_k` over `(h, γ)`.
pub fn zeta_kitaev_sum(p: &KitaevParams) -> Result<GeoTensor> {
    p.validate()?;
    let l2 = p.lambda_ratio()?.powi(2);
    let acc = bz_sum(p, |s2, _| l2 * s2)?;
    Ok(sym_tensor(acc, &[p.h, p.gamma]))
}

/// `Λ² Σ_k ∂_μφ_k ∂_νφ_k / (1 + Λ² cos²φ_k)²`.
pub fn zeta_tilde_kitaev_sum(p: &KitaevParams) -> Result<GeoTensor> {
    p.validate()?;
    let l2 = p.lambda_ratio()?.powi(2);
    let acc = bz_sum(p, |_, c2| l2 / (1.0 + l2 * c2).powi(2))?;
    let mut t = sym_tensor(acc, &[p.h, p.gamma]);
    t.kind = TensorKind::ZetaLimitedRescaled;
    Ok(t)
}

/// `(1/2π)∫ f(k) dk` for a smooth periodic integrand by the trapezoid rule,
/// doubling the grid until successive values agree to `1e-14`.
fn periodic_mean(f: impl Fn(f64) -> f64) -> f64 {
    let mut n = 256usize;
    let mean = |n: usize| (0..n).map(|m| f(2.0 * PI * m as f64 / n as f64)).sum::<f64>() / n as f64;
    let mut prev = mean(n);
    while n < (1 << 22) {
        n *= 2;
        let cur = mean(n);
        if (cur - prev).abs() <= 1e-14 * cur.abs() {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// Thermodynamic-limit tensor per site over `(h, γ)`.
///
/// `|h| < 1`: `Λ²/(8|γ|)·diag(3/(1 − h²), (1 + 3|γ|)/(1 + |γ|)³)`.
/// `|h| > 1`: closed forms for `ζ_hh` and `ζ_γh`; `ζ_γγ` is the
/// Brillouin-zone integral evaluated by spectrally convergent quadrature.
pub fn zeta_kitaev_thermo(h: f64, gamma: f64, lambda: f64) -> Result<GeoTensor> {
    if ((h.abs()) - 1.0).abs() < CRITICAL_TOL {
        return Err(Error::OnCriticalLine(format!("|h| = 1 (h = {h})")));
    }
    let l2 = lambda * lambda;
    let m = if h.abs() < 1.0 {
        let g = gamma.abs();
        if g < CRITICAL_TOL {
            return Err(Error::BranchDomainError("gamma = 0 inside |h| < 1".into()));
        }
        let hh = 3.0 * l2 / (8.0 * g * (1.0 - h * h));
        let gg = l2 * (1.0 + 3.0 * g) / (8.0 * g * (1.0 + g).powi(3));
        [[hh, 0.0], [0.0, gg]]
    } else {
        let q = h * h + gamma * gamma - 1.0;
        let hh = 0.375 * l2 * gamma.powi(4) * h.abs() / ((h * h - 1.0) * q.powf(2.5));
        let gh = -0.375 * l2 * h.signum() * gamma.powi(3) / q.powf(2.5);
        let gg = l2
            * periodic_mean(|k| {
                let (s, c) = k.sin_cos();
                let d = (h - c).powi(2) + gamma * gamma * s * s;
                gamma * gamma * s.powi(4) * (h - c).powi(2) / d.powi(3)
            });
        [[hh, gh], [gh, gg]]
    };
    Ok(sym_tensor(m, &[h, gamma]))
}

/// Lattice-model form of the chain, parameterized by `λ = (h, γ)`.
#[derive(Debug, Clone, Copy)]
pub struct KitaevChain {
    pub g: f64,
    pub mu_plus: f64,
    pub mu_minus: f64,
    /// Use the `g → 0` closed form of `γ(k)` instead of the Sylvester solve.
    pub weak_coupling: bool,
}

fn offdiag(a: f64, b: f64) -> CMatrix {
    // [[0, i a], [i b, 0]]
    CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(0.0, a), c64(0.0, b), c64(0.0, 0.0)])
}

impl KitaevChain {
    fn lambda(&self) -> f64 {
        lambda_ratio(self.mu_plus, self.mu_minus).unwrap_or(0.0)
    }
}

impl LatticeModel for KitaevChain {
    fn num_params(&self) -> usize {
        2
    }

    fn param_names(&self) -> Vec<String> {
        vec!["h".into(), "gamma".into()]
    }

    fn range(&self) -> usize {
        1
    }

    fn h_block(&self, r: isize, p: &[f64]) -> CMatrix {
        let (h, g) = (p[0], p[1]);
        match r {
            0 => offdiag(-h / 2.0, h / 2.0),
            1 => offdiag((1.0 + g) / 4.0, -(1.0 - g) / 4.0),
            -1 => offdiag((1.0 - g) / 4.0, -(1.0 + g) / 4.0),
            _ => CMatrix::zeros(2, 2),
        }
    }

    fn m_block(&self, r: isize, _p: &[f64]) -> CMatrix {
        if r != 0 {
            return CMatrix::zeros(2, 2);
        }
        let g2 = self.g * self.g / 4.0;
        let s = self.mu_plus.powi(2) + self.mu_minus.powi(2);
        let d = self.mu_plus.powi(2) - self.mu_minus.powi(2);
        // s σ₀ + d σ_y
        CMatrix::from_row_slice(2, 2, &[c64(s, 0.0), c64(0.0, -d), c64(0.0, d), c64(s, 0.0)]) * c64(g2, 0.0)
    }

    fn dh_block(&self, mu: usize, r: isize, _p: &[f64]) -> CMatrix {
        match (mu, r) {
            (0, 0) => offdiag(-0.5, 0.5),
            (1, 1) => offdiag(0.25, 0.25),
            (1, -1) => offdiag(-0.25, -0.25),
            _ => CMatrix::zeros(2, 2),
        }
    }

    fn dm_block(&self, _mu: usize, _r: isize, _p: &[f64]) -> CMatrix {
        CMatrix::zeros(2, 2)
    }

    fn analytic_gamma_k(&self, k: f64, p: &[f64]) -> Option<Result<(CMatrix, Vec<CMatrix>)>> {
        if !self.weak_coupling {
            return None;
        }
        Some(weak_coupling_gamma(p[0], p[1], self.lambda(), k))
    }
}

fn pauli_xy(ax: f64, ay: f64) -> CMatrix {
    // ax σ_x + ay σ_y
    CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(ax, -ay), c64(ax, ay), c64(0.0, 0.0)])
}

/// `γ(k) = −Λ cosφ sinφ σ_x − Λ cos²φ σ_y` and its `(h, γ)` derivatives.
pub fn weak_coupling_gamma(h: f64, gamma: f64, lambda: f64, k: f64) -> Result<(CMatrix, Vec<CMatrix>)> {
    let phi = phi_k(h, gamma, k)?;
    let (dh, dg) = dphi(h, gamma, k)?;
    let (s, c) = phi.sin_cos();
    let g = pauli_xy(-lambda * c * s, -lambda * c * c);
    // d/dφ: −Λ cos2φ σ_x + Λ sin2φ σ_y
    let (s2, c2) = (2.0 * phi).sin_cos();
    let dg_dphi = pauli_xy(-lambda * c2, lambda * s2);
    Ok((g, vec![&dg_dphi * c64(dh, 0.0), &dg_dphi * c64(dg, 0.0)]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(h: f64, gamma: f64, l: usize) -> KitaevParams {
        KitaevParams {
            h,
            gamma,
            g: 0.1,
            mu_plus: 1.0,
            mu_minus: 0.5,
            l,
        }
    }

    #[test]
    fn h_zero_gamma_one() {
        for k in [0.3, 1.1, 2.9] {
            let (dh, _) = dphi(0.0, 1.0, k).unwrap();
            assert!((dh + k.sin()).abs() < 1e-15);
            let phi = phi_k(0.0, 1.0, k).unwrap();
            assert!((phi.sin().powi(2) - k.sin().powi(2)).abs() < 1e-14);
        }
        let p = params(0.0, 1.0, 64);
        let lam = p.lambda_ratio().unwrap();
        let z = zeta_kitaev_sum(&p).unwrap();
        assert!((z.get(0, 0).re - 0.375 * lam * lam * 64.0).abs() < 1e-12);
        let th = zeta_kitaev_thermo(0.0, 1.0, lam).unwrap();
        assert!((th.get(0, 0).re - 0.375 * lam * lam).abs() < 1e-15);
        assert!((th.get(1, 1).re - lam * lam / 16.0).abs() < 1e-15);
        assert_eq!(th.get(0, 1).re, 0.0);
    }

    #[test]
    fn outer_branch_value() {
        let th = zeta_kitaev_thermo(2.0, 1.0, 1.0).unwrap();
        assert!((th.get(0, 0).re - 1.0 / 128.0).abs() < 1e-15);
    }

    #[test]
    fn zero_pairing_outside() {
        let z = zeta_kitaev_sum(&params(1.5, 0.0, 32)).unwrap();
        assert!(z.values.norm() == 0.0);
    }

    #[test]
    fn k_zero_derivatives_vanish() {
        assert_eq!(dphi(0.3, 0.7, 0.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn undefined_angle() {
        assert!(matches!(phi_k(1.0, 0.5, 0.0), Err(Error::UndefinedAngle { .. })));
        assert!(matches!(zeta_kitaev_thermo(1.0, 0.5, 1.0), Err(Error::OnCriticalLine(_))));
        assert!(matches!(zeta_kitaev_thermo(0.5, 0.0, 1.0), Err(Error::BranchDomainError(_))));
    }
}
