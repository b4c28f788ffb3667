mod common;

use common::{random_bath, random_majorana_hamiltonian, rng, RandomFamily};
use nhgeo::geo::Degeneracy;
use nhgeo::kitaev::{weak_coupling_gamma, KitaevParams};
use nhgeo::linalg::{c64, max_abs, max_imag, CMatrix, CVector};
use nhgeo::quad::*;
use nhgeo::Error;
use proptest::prelude::*;
use rand::Rng;

fn single_mode(g: f64, mp: f64, mm: f64) -> QuadraticLiouvillian {
    let one = [c64(1.0, 0.0)];
    let zero = [c64(0.0, 0.0)];
    let loss = jump_vector(&one, &zero).unwrap() * c64(g * mm, 0.0);
    let gain = jump_vector(&zero, &one).unwrap() * c64(g * mp, 0.0);
    build_liouvillian(1, &CMatrix::zeros(2, 2), &[loss, gain]).unwrap()
}

#[test]
fn single_mode_matrices() {
    let (g, mp, mm) = (0.6, 0.9, 0.4);
    let liou = single_mode(g, mp, mm);
    let s = mp * mp + mm * mm;
    let d = mp * mp - mm * mm;
    let x = CMatrix::identity(2, 2) * c64(g * g * s / 2.0, 0.0);
    let y = CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(0.0, g * g * d), c64(0.0, -g * g * d), c64(0.0, 0.0)]);
    assert!(max_abs(&(&liou.x - x)) < 1e-15);
    assert!(max_abs(&(&liou.y - y)) < 1e-15);
    let rap = rapidities(&liou).unwrap();
    for v in &rap.values {
        assert!((v - c64(g * g * s / 2.0, 0.0)).norm() < 1e-14);
    }
    let gamma = steady_state_gamma(&liou).unwrap().gamma;
    assert!((gamma[(0, 1)] - c64(0.0, d / s)).norm() < 1e-12);
    let bal = steady_state_gamma(&single_mode(g, 0.5, 0.5)).unwrap();
    assert!(max_abs(&bal.gamma) < 1e-15);
}

#[test]
fn structure_of_random_models() {
    let mut r = rng(2);
    for n in 1..=4 {
        let h = random_majorana_hamiltonian(&mut r, n);
        let liou = build_liouvillian(n, &h, &random_bath(&mut r, n, 2 * n)).unwrap();
        assert!(max_imag(&liou.x) < 1e-12);
        assert!(liou.y.iter().all(|z| z.re.abs() < 1e-12));
        assert!(max_abs(&(&liou.y + liou.y.transpose())) < 1e-12);
        let g = steady_state_gamma(&liou).unwrap();
        let res = &liou.x * &g.gamma + &g.gamma * liou.x.transpose() - &liou.y;
        assert!(max_abs(&res) < 1e-9);
        assert!(g.structure_error() < 1e-10);
        let sp = g.spectrum();
        assert!(sp[0] >= -1.0 - 1e-9 && sp[sp.len() - 1] <= 1.0 + 1e-9);
        let rap = rapidities(&liou).unwrap();
        let diag = CMatrix::from_diagonal(&CVector::from_vec(rap.values.clone()));
        assert!(max_abs(&(&rap.u * diag * &rap.u_inv - &liou.x)) < 1e-9);
    }
}

#[test]
fn no_bath_gives_x_from_hamiltonian_only() {
    let mut r = rng(3);
    let h = random_majorana_hamiltonian(&mut r, 2);
    let liou = build_liouvillian(2, &h, &[]).unwrap();
    assert!(max_abs(&liou.y) == 0.0);
    assert!(max_abs(&(&liou.x - &h * c64(0.0, 4.0))) < 1e-15);
    assert!(matches!(steady_state_gamma(&liou), Err(Error::NonUniqueSteadyState { .. })));
}

#[test]
fn invalid_inputs() {
    let bad_h = CMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)]);
    assert!(matches!(build_liouvillian(1, &bad_h, &[]), Err(Error::BadHamiltonian(_))));
    let neg = CMatrix::identity(2, 2) * c64(-1.0, 0.0);
    assert!(matches!(build_liouvillian_from_bath(1, &CMatrix::zeros(2, 2), &neg), Err(Error::BadBath(_))));
    assert!(matches!(build_liouvillian(2, &CMatrix::zeros(2, 2), &[]), Err(Error::ShapeMismatch(_))));
}

/// Family whose Liouvillian does not depend on the parameter.
struct Frozen(RandomFamily);

impl LiouvillianFamily for Frozen {
    fn modes(&self) -> usize {
        self.0.n
    }
    fn num_params(&self) -> usize {
        1
    }
    fn hamiltonian(&self, _p: &[f64]) -> nhgeo::Result<CMatrix> {
        self.0.hamiltonian(&[0.1, 0.2])
    }
    fn bath(&self, _p: &[f64]) -> nhgeo::Result<CMatrix> {
        self.0.bath(&[0.1, 0.2])
    }
}

#[test]
fn parameter_independent_liouvillian_is_flat() {
    let f = Frozen(RandomFamily::new(&mut rng(6), 2));
    let jet = NessJet::compute(&f, &[0.3], &QuadOptions::default()).unwrap();
    let a = jet.agp(0);
    assert!(max_abs(&a.xcal) < 1e-9 && max_abs(&a.ycal) < 1e-9);
    assert!(max_abs(&jet.zeta()) < 1e-12);
}

/// `X(λ) = U diag(x(λ)) U⁻¹` with fixed `U`: only the rapidities move.
#[test]
fn fixed_eigenbasis_gives_zero_xcal() {
    // single mode, bath scaled by λ: X ∝ λ·I, Y ∝ λ, Γ fixed
    struct Scaled;
    impl LiouvillianFamily for Scaled {
        fn modes(&self) -> usize {
            1
        }
        fn num_params(&self) -> usize {
            1
        }
        fn hamiltonian(&self, _p: &[f64]) -> nhgeo::Result<CMatrix> {
            Ok(CMatrix::zeros(2, 2))
        }
        fn bath(&self, p: &[f64]) -> nhgeo::Result<CMatrix> {
            Ok(single_mode(p[0], 1.0, 0.3).m)
        }
    }
    let jet = NessJet::compute(&Scaled, &[0.8], &QuadOptions::merged()).unwrap();
    let a = jet.agp(0);
    assert!(max_abs(&a.xcal) < 1e-12);
    assert!(max_abs(&(&a.ycal - &jet.dgamma[0])) < 1e-12);
}

#[test]
fn agp_structure_and_realness() {
    let mut r = rng(9);
    for _ in 0..5 {
        let f = RandomFamily::new(&mut r, 3);
        let lam = common::random_point(&mut r, 2);
        let jet = NessJet::compute(&f, &lam, &QuadOptions::default()).unwrap();
        for mu in 0..2 {
            let a = jet.agp(mu);
            assert!(max_imag(&a.xcal) < 1e-10);
            assert!(a.ycal.iter().all(|z| z.re.abs() < 1e-10));
            assert!(max_abs(&(&a.ycal + a.ycal.transpose())) < 1e-10);
        }
        let z = jet.zeta();
        assert!(max_imag(&z) < 1e-9 * max_abs(&z).max(1.0));
    }
}

#[test]
fn analytic_and_finite_difference_dgamma_agree() {
    let f = RandomFamily::new(&mut rng(10), 2);
    let lam = [0.25, -0.3];
    let a = NessJet::compute(&f, &lam, &QuadOptions::default()).unwrap();
    let opts = QuadOptions {
        dgamma: DGammaMethod::FiniteDifference,
        ..QuadOptions::default()
    };
    let b = NessJet::compute(&f, &lam, &opts).unwrap();
    for mu in 0..2 {
        assert!(max_abs(&(&a.dgamma[mu] - &b.dgamma[mu])) < 1e-7);
    }
}

#[test]
fn degenerate_rapidities_reported() {
    let x = CMatrix::identity(2, 2);
    let dx = vec![CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)])];
    assert!(matches!(spectral_agp(&x, &dx, Degeneracy::Error), Err(Error::DegenerateRapidities { .. })));
    let merged = spectral_agp(&x, &dx, Degeneracy::MergeClusters { tol: 1e-9 }).unwrap();
    assert!(max_abs(&merged[0]) == 0.0);
}

/// Two-band lattice model with random hopping and a jump spanning two cells.
struct RandomBand {
    h: [CMatrix; 2],
    u: CVector,
    v: CVector,
}

impl RandomBand {
    fn new(r: &mut rand_chacha::ChaCha8Rng) -> Self {
        let h0 = random_majorana_hamiltonian(r, 1);
        let h1 = CMatrix::from_fn(2, 2, |_, _| c64(0.0, r.random_range(-1.0..1.0)));
        Self {
            h: [h0, h1],
            u: common::random_vector(r, 2),
            v: common::random_vector(r, 2),
        }
    }
}

impl LatticeModel for RandomBand {
    fn num_params(&self) -> usize {
        1
    }
    fn param_names(&self) -> Vec<String> {
        vec!["s".into()]
    }
    fn range(&self) -> usize {
        1
    }
    fn h_block(&self, r: isize, p: &[f64]) -> CMatrix {
        match r {
            0 => &self.h[0] * c64(p[0], 0.0),
            1 => self.h[1].clone(),
            // 𝐇 imaginary antisymmetric ⇒ h(−r) = −h(r)ᵀ
            -1 => -self.h[1].transpose(),
            _ => CMatrix::zeros(2, 2),
        }
    }
    fn m_block(&self, r: isize, _p: &[f64]) -> CMatrix {
        match r {
            0 => &self.u * self.u.adjoint() + &self.v * self.v.adjoint(),
            1 => &self.v * self.u.adjoint(),
            -1 => &self.u * self.v.adjoint(),
            _ => CMatrix::zeros(2, 2),
        }
    }
    fn dh_block(&self, _mu: usize, r: isize, _p: &[f64]) -> CMatrix {
        if r == 0 {
            self.h[0].clone()
        } else {
            CMatrix::zeros(2, 2)
        }
    }
    fn dm_block(&self, _mu: usize, _r: isize, _p: &[f64]) -> CMatrix {
        CMatrix::zeros(2, 2)
    }
}

#[test]
fn kspace_blocks_diagonalize_real_space() {
    let model = RandomBand::new(&mut rng(12));
    let l = 5;
    let lam = [0.7];
    let chain = LatticeChain::periodic(&model, l);
    let liou = chain.liouvillian(&lam).unwrap();
    for k in Boundary::Periodic.k_grid(l) {
        let (x, y) = kspace_blocks(&model, k, &lam);
        for a in 0..2 {
            let mut c = CVector::zeros(2);
            c[a] = c64(1.0, 0.0);
            let v = CVector::from_fn(2 * l, |i, _| C64exp(k * (i / 2) as f64) * c[i % 2]);
            let w = CVector::from_fn(2 * l, |i, _| C64exp(k * (i / 2) as f64) * (&x * &c)[i % 2]);
            assert!((&liou.x * &v - w).norm() < 1e-12);
            let w = CVector::from_fn(2 * l, |i, _| C64exp(k * (i / 2) as f64) * (&y * &c)[i % 2]);
            assert!((&liou.y * &v - w).norm() < 1e-12);
        }
    }
    let zr = zeta_ness(&chain, &lam, &QuadOptions::merged()).unwrap();
    let zk = zeta_ness_k(&model, &lam, l).unwrap();
    assert!(common::rel_diff(&zr.values, &zk.values) < 1e-8);
}

#[allow(non_snake_case)]
fn C64exp(phase: f64) -> nhgeo::linalg::C64 {
    nhgeo::linalg::C64::from_polar(1.0, phase)
}

fn kitaev(g: f64, mp: f64, mm: f64) -> KitaevParams {
    KitaevParams {
        h: 0.6,
        gamma: 0.9,
        g,
        mu_plus: mp,
        mu_minus: mm,
        l: 8,
    }
}

#[test]
fn kitaev_kspace_matrices() {
    let p = kitaev(0.7, 1.0, 0.5);
    let chain = p.chain(false);
    let (s2, d2) = (p.mu_plus.powi(2) + p.mu_minus.powi(2), p.mu_plus.powi(2) - p.mu_minus.powi(2));
    for k in [0.4, 2.2] {
        let (x, y) = kspace_blocks(&chain, k, &[p.h, p.gamma]);
        let g2 = p.g * p.g;
        let a = 2.0 * p.gamma * k.sin();
        let b = 2.0 * (p.h - k.cos());
        // (g²/2)s σ₀ + i a σ_x + i b σ_y
        let expect = CMatrix::from_row_slice(
            2,
            2,
            &[c64(g2 * s2 / 2.0, 0.0), c64(b, a), c64(-b, a), c64(g2 * s2 / 2.0, 0.0)],
        );
        assert!(max_abs(&(&x - expect)) < 1e-14);
        // −g² d σ_y
        let expect_y = CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(0.0, g2 * d2), c64(0.0, -g2 * d2), c64(0.0, 0.0)]);
        assert!(max_abs(&(&y - expect_y)) < 1e-14);
    }
}

#[test]
fn symmetric_bath_gives_zero_y() {
    let p = kitaev(0.7, 0.8, 0.8);
    let (_, y) = kspace_blocks(&p.chain(false), 1.3, &[p.h, p.gamma]);
    assert!(max_abs(&y) < 1e-15);
    assert!(max_abs(&gamma_k(&p.chain(false), 1.3, &[p.h, p.gamma]).unwrap()) < 1e-15);
    assert!(max_abs(&zeta_ness_k(&p.chain(false), &[p.h, p.gamma], 8).unwrap().values) < 1e-14);
}

fn weak_coupling_deviation(g: f64) -> f64 {
    let p = kitaev(g, 1.0, 0.5);
    let chain = p.chain(false);
    let lam = p.lambda_ratio().unwrap();
    [0.3, 1.2, 2.6]
        .iter()
        .map(|&k| {
            let full = gamma_k(&chain, k, &[p.h, p.gamma]).unwrap();
            let (weak, _) = weak_coupling_gamma(p.h, p.gamma, lam, k).unwrap();
            (full - weak).norm()
        })
        .fold(0.0, f64::max)
}

#[test]
fn weak_coupling_limit_is_second_order() {
    let gs = [1e-2, 1e-3, 1e-4];
    let dev: Vec<f64> = gs.iter().map(|&g| weak_coupling_deviation(g)).collect();
    assert!(dev[1] < 1e-5, "{dev:?}");
    for i in 0..2 {
        let slope = (dev[i].ln() - dev[i + 1].ln()) / (gs[i].ln() - gs[i + 1].ln());
        assert!((slope - 2.0).abs() < 0.2, "slope {slope} {dev:?}");
    }
}

#[test]
fn log_derivative_cases() {
    let mut r = rng(14);
    let f = RandomFamily::new(&mut r, 2);
    let jet = NessJet::compute(&f, &[0.1, 0.1], &QuadOptions::default()).unwrap();
    let k = log_derivative(&jet.gamma, &jet.dgamma[0]).unwrap();
    let res = &jet.gamma * &k * &jet.gamma - &k - &jet.dgamma[0];
    assert!(max_abs(&res) < 1e-9);
    let zero = CMatrix::zeros(4, 4);
    let k0 = log_derivative(&zero, &jet.dgamma[1]).unwrap();
    assert!(max_abs(&(k0 + &jet.dgamma[1])) < 1e-15);
    // pure single mode
    let pure = CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(0.0, 1.0), c64(0.0, -1.0), c64(0.0, 0.0)]);
    assert!(matches!(log_derivative(&pure, &pure), Err(Error::PureStateSingular)));
}

#[test]
fn bures_dual_route_and_psd() {
    let mut r = rng(15);
    for _ in 0..5 {
        let f = RandomFamily::new(&mut r, 3);
        let lam = common::random_point(&mut r, 2);
        let jet = NessJet::compute(&f, &lam, &QuadOptions::default()).unwrap();
        let b = jet.bures().unwrap();
        for mu in 0..2 {
            let k = log_derivative(&jet.gamma, &jet.dgamma[mu]).unwrap();
            for nu in 0..2 {
                let via_k = -(&k * &jet.dgamma[nu]).trace().re / 8.0;
                assert!((b[(mu, nu)].re - via_k).abs() < 1e-10 * via_k.abs().max(1.0));
            }
        }
        assert!((b[(0, 1)] - b[(1, 0)]).norm() < 1e-12);
        let det = b[(0, 0)].re * b[(1, 1)].re - b[(0, 1)].re.powi(2);
        assert!(b[(0, 0)].re >= 0.0 && det >= -1e-10);
    }
}

#[test]
fn zeta_tilde_maximally_mixed_and_kitaev_form() {
    let mut r = rng(16);
    let d = {
        let a = random_majorana_hamiltonian(&mut r, 2);
        a
    };
    let zero = CMatrix::zeros(4, 4);
    let half = (&d * &d).trace().re * 0.5;
    assert!((zeta_tilde_gaussian(&zero, &d, &d) - half).abs() < 1e-14);

    let p = kitaev(0.2, 1.0, 0.4);
    let chain = p.chain(true);
    let lam = p.lambda_ratio().unwrap();
    let closed = nhgeo::kitaev::zeta_tilde_kitaev_sum(&p).unwrap();
    let mut acc = CMatrix::zeros(2, 2);
    let mut lower = CMatrix::zeros(2, 2);
    for k in Boundary::Periodic.k_grid(p.l) {
        let jet = KPointJet::compute(&chain, k, &[p.h, p.gamma]).unwrap();
        let (dh, dg) = nhgeo::kitaev::dphi(p.h, p.gamma, k).unwrap();
        let dp = [dh, dg];
        for mu in 0..2 {
            for nu in 0..2 {
                let v = zeta_tilde_gaussian(&jet.gamma, &jet.dgamma[mu], &jet.dgamma[nu]);
                acc[(mu, nu)] += c64(v, 0.0);
                lower[(mu, nu)] += c64(lam * lam * dp[mu] * dp[nu] / (1.0 + lam * lam).powi(2), 0.0);
            }
            let diag = zeta_tilde_gaussian(&jet.gamma, &jet.dgamma[mu], &jet.dgamma[mu]);
            let base = lam * lam * dp[mu] * dp[mu];
            assert!(diag <= base * (1.0 + 1e-12) && diag >= base / (1.0 + lam * lam).powi(2) * (1.0 - 1e-12));
        }
    }
    assert!(common::rel_diff(&acc, &closed.values) < 1e-8);
    assert!(closed.get(0, 0).re >= lower[(0, 0)].re);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn steady_state_is_physical(seed in 0u64..10_000, n in 1usize..4) {
        let mut r = rng(seed);
        let h = random_majorana_hamiltonian(&mut r, n);
        let liou = build_liouvillian(n, &h, &random_bath(&mut r, n, n + 1)).unwrap();
        let g = steady_state_gamma(&liou).unwrap();
        let sp = g.spectrum();
        prop_assert!(sp[0] >= -1.0 - 1e-9 && sp[sp.len() - 1] <= 1.0 + 1e-9);
        prop_assert!(g.structure_error() < 1e-9);
    }
}
