//! Non-Hermitian SSH chain with intercell hopping fixed to 1.
//!
//! Bloch matrix `h(k) = [[0, t − δ + e^{−ik}], [t + δ + e^{ik}, 0]]` with
//! energies `±√ε(k)`, `ε = 1 + t² − δ² + 2t cos k − 2iδ sin k`.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geo::{GeoTensor, OperatorFamily, TensorKind};
use crate::linalg::{c64, CMatrix, CVector, C64};

const CRITICAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SshParams {
    pub t: f64,
    pub delta: f64,
    /// Number of unit cells (= number of k points).
    pub l: usize,
}

impl SshParams {
    pub fn new(t: f64, delta: f64, l: usize) -> Result<Self> {
        if l < 2 {
            return Err(Error::InvalidConfig(format!("L must be at least 2, got {l}")));
        }
        if !t.is_finite() || !delta.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self { t, delta, l })
    }
}

/// `k_m = 2πm/L`, `m = 0..L`.
pub fn k_grid(l: usize) -> Vec<f64> {
    (0..l).map(|m| 2.0 * std::f64::consts::PI * m as f64 / l as f64).collect()
}

pub fn epsilon(t: f64, delta: f64, k: f64) -> C64 {
    let (s, c) = k.sin_cos();
    c64(1.0 + t * t - delta * delta + 2.0 * t * c, -2.0 * delta * s)
}

pub fn bloch(t: f64, delta: f64, k: f64) -> CMatrix {
    let e = C64::from_polar(1.0, k);
    CMatrix::from_row_slice(
        2,
        2,
        &[c64(0.0, 0.0), c64(t - delta, 0.0) + e.conj(), c64(t + delta, 0.0) + e, c64(0.0, 0.0)],
    )
}

/// Phase label `(s₁, s₂)`: `s₁ = +` iff `|t − δ| > 1`, `s₂ = +` iff `|t + δ| > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SshPhase {
    pub s1: bool,
    pub s2: bool,
}

impl fmt::Display for SshPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = |b: bool| if b { '+' } else { '-' };
        write!(f, "({},{})", s(self.s1), s(self.s2))
    }
}

pub fn classify_phase(t: f64, delta: f64) -> Result<SshPhase> {
    let (a, b) = ((t - delta).abs(), (t + delta).abs());
    if (a - 1.0).abs() < CRITICAL_TOL || (b - 1.0).abs() < CRITICAL_TOL {
        return Err(Error::OnCriticalLine(format!("|t - delta| = {a}, |t + delta| = {b}")));
    }
    Ok(SshPhase { s1: a > 1.0, s2: b > 1.0 })
}

/// Phase-dependent term of the thermodynamic tensor.
pub fn phase_function(t: f64, delta: f64, phase: SshPhase) -> Result<f64> {
    let denom = match (phase.s1, phase.s2) {
        (true, true) => 0.5 * (delta - t) * (delta + t),
        (false, true) => delta * (delta + t),
        (true, false) => delta * (delta - t),
        (false, false) => return Ok(0.0),
    };
    if denom.abs() < CRITICAL_TOL {
        return Err(Error::FSingular);
    }
    Ok(1.0 / denom)
}

/// Per-k summand `[[ζ_tt, ζ_tδ], [ζ_δt, ζ_δδ]]`.
pub fn zeta_summand(t: f64, delta: f64, k: f64) -> Result<[[f64; 2]; 2]> {
    let e2 = epsilon(t, delta, k).norm_sqr();
    if e2.sqrt() < CRITICAL_TOL {
        return Err(Error::CriticalKPoint { k });
    }
    let (s, c) = k.sin_cos();
    let w = 1.0 / (4.0 * e2);
    let tt = (delta * delta + s * s) * w;
    let dd = (t + c) * (t + c) * w;
    let td = -(t + c) * delta * w;
    Ok([[tt, td], [td, dd]])
}

fn real_tensor(m: [[f64; 2]; 2], kind: TensorKind, lambda: &[f64]) -> GeoTensor {
    let values = CMatrix::from_fn(2, 2, |i, j| c64(m[i][j], 0.0));
    GeoTensor::new(kind, None, values, lambda)
}

/// Brillouin-zone sum of the per-k tensor over `(t, δ)`.
pub fn zeta_finite_sum(p: &SshParams) -> Result<GeoTensor> {
    let mut acc = [[0.0; 2]; 2];
    for k in k_grid(p.l) {
        let s = zeta_summand(p.t, p.delta, k)?;
        for i in 0..2 {
            for j in 0..2 {
                acc[i][j] += s[i][j];
            }
        }
    }
    Ok(real_tensor(acc, TensorKind::Zeta, &[p.t, p.delta]))
}

/// Thermodynamic-limit tensor per unit cell.
pub fn zeta_thermodynamic(t: f64, delta: f64) -> Result<GeoTensor> {
    let phase = classify_phase(t, delta)?;
    let f = phase_function(t, delta, phase)?;
    let a = 1.0 / ((delta + t).powi(2) - 1.0).abs();
    let b = 1.0 / ((delta - t).powi(2) - 1.0).abs();
    let m = [[(a + b + f) / 16.0, (a - b) / 16.0], [(a - b) / 16.0, (a + b - f) / 16.0]];
    Ok(real_tensor(m, TensorKind::Zeta, &[t, delta]))
}

/// Closed-form eigenpairs at one k. Index 0 is the `+√ε` band. Left vectors
/// are stored as kets, so `⟨ψ_L| = left[i]†`.
#[derive(Debug, Clone)]
pub struct SshEigenstates {
    pub energies: [C64; 2],
    pub right: [CVector; 2],
    pub left: [CVector; 2],
}

pub fn ssh_eigenstates(t: f64, delta: f64, k: f64) -> Result<SshEigenstates> {
    let eps = epsilon(t, delta, k);
    if eps.norm() < CRITICAL_TOL {
        return Err(Error::CriticalKPoint { k });
    }
    let root = eps.sqrt();
    let e = C64::from_polar(1.0, k);
    let r2 = (c64(t + delta, 0.0) + e) / root;
    let l2 = (c64(t - delta, 0.0) + e.conj()) / root;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let vec2 = |a: C64, b: C64| CVector::from_vec(vec![a * h, b * h]);
    let one = c64(1.0, 0.0);
    Ok(SshEigenstates {
        energies: [root, -root],
        right: [vec2(one, r2), vec2(-one, r2)],
        // bra components (±1, l2)/√2, conjugated into kets
        left: [vec2(one, l2.conj()), vec2(-one, l2.conj())],
    })
}

/// The 2×2 Bloch matrix at fixed k as a family over `(t, δ)`.
#[derive(Debug, Clone, Copy)]
pub struct SshBlochFamily {
    pub k: f64,
}

impl OperatorFamily for SshBlochFamily {
    fn dim(&self) -> usize {
        2
    }

    fn num_params(&self) -> usize {
        2
    }

    fn evaluate(&self, lambda: &[f64]) -> Result<CMatrix> {
        if lambda.len() != 2 {
            return Err(Error::ShapeMismatch("SSH Bloch family takes (t, delta)".into()));
        }
        Ok(bloch(lambda[0], lambda[1], self.k))
    }

    fn derivative(&self, mu: usize, _lambda: &[f64]) -> Option<Result<CMatrix>> {
        let (z, o) = (c64(0.0, 0.0), c64(1.0, 0.0));
        match mu {
            0 => Some(Ok(CMatrix::from_row_slice(2, 2, &[z, o, o, z]))),
            1 => Some(Ok(CMatrix::from_row_slice(2, 2, &[z, -o, o, z]))),
            _ => None,
        }
    }

    fn param_names(&self) -> Vec<String> {
        vec!["t".into(), "delta".into()]
    }
}
