#![allow(dead_code)]

use nhgeo::linalg::{c64, CMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let a = random_complex(rng, n);
    (&a + a.adjoint()) * c64(0.5, 0.0)
}

pub fn random_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-0.5..0.5)).collect()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    nhgeo::linalg::max_abs(m)
}

pub fn rel_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    max_abs(&(a - b)) / max_abs(b).max(1e-300)
}

use nhgeo::linalg::CVector;
use nhgeo::quad::LiouvillianFamily;
use nhgeo::Result;

/// Imaginary antisymmetric (hence Hermitian) `2n × 2n` matrix.
pub fn random_majorana_hamiltonian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let m = 2 * n;
    let a = CMatrix::from_fn(m, m, |_, _| c64(rng.random_range(-1.0..1.0), 0.0));
    (&a - a.transpose()) * c64(0.0, 0.5)
}

pub fn random_vector(rng: &mut ChaCha8Rng, len: usize) -> CVector {
    CVector::from_fn(len, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn random_bath(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<CVector> {
    (0..count).map(|_| random_vector(rng, 2 * n)).collect()
}

/// Two-parameter family `𝐇 = H0 + λ0 H1 + λ1² H2`, jumps
/// `l_i = a_i + λ1 b_i + 0.3 λ0 b_{1−i}`, with analytic derivatives.
pub struct RandomFamily {
    pub n: usize,
    pub h: [CMatrix; 3],
    pub a: [CVector; 2],
    pub b: [CVector; 2],
}

impl RandomFamily {
    pub fn new(rng: &mut ChaCha8Rng, n: usize) -> Self {
        Self {
            n,
            h: [0, 1, 2].map(|_| random_majorana_hamiltonian(rng, n)),
            a: [0, 1].map(|_| random_vector(rng, 2 * n)),
            b: [0, 1].map(|_| random_vector(rng, 2 * n) * c64(0.5, 0.0)),
        }
    }

    fn jumps(&self, p: &[f64]) -> Vec<CVector> {
        (0..2)
            .map(|i| &self.a[i] + &self.b[i] * c64(p[1], 0.0) + &self.b[1 - i] * c64(0.3 * p[0], 0.0))
            .collect()
    }

    fn d_jumps(&self, mu: usize) -> Vec<CVector> {
        (0..2)
            .map(|i| if mu == 0 { &self.b[1 - i] * c64(0.3, 0.0) } else { self.b[i].clone() })
            .collect()
    }
}

impl LiouvillianFamily for RandomFamily {
    fn modes(&self) -> usize {
        self.n
    }

    fn num_params(&self) -> usize {
        2
    }

    fn hamiltonian(&self, p: &[f64]) -> Result<CMatrix> {
        Ok(&self.h[0] + &self.h[1] * c64(p[0], 0.0) + &self.h[2] * c64(p[1] * p[1], 0.0))
    }

    fn bath(&self, p: &[f64]) -> Result<CMatrix> {
        nhgeo::quad::bath_matrix(self.n, &self.jumps(p))
    }

    fn d_hamiltonian(&self, mu: usize, p: &[f64]) -> Option<Result<CMatrix>> {
        Some(Ok(if mu == 0 { self.h[1].clone() } else { &self.h[2] * c64(2.0 * p[1], 0.0) }))
    }

    fn d_bath(&self, mu: usize, p: &[f64]) -> Option<Result<CMatrix>> {
        let l = self.jumps(p);
        let dl = self.d_jumps(mu);
        let m = 2 * self.n;
        let mut out = CMatrix::zeros(m, m);
        for i in 0..2 {
            out += &dl[i] * l[i].adjoint() + &l[i] * dl[i].adjoint();
        }
        Some(Ok(out))
    }
}
