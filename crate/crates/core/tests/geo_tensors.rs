mod common;

use common::*;
use nhgeo::biortho::build_biortho;
use nhgeo::geo::*;
use nhgeo::linalg::{c64, CMatrix, C64};
use rand::Rng;

/// Nonlinear two-parameter family with analytic derivatives.
struct Quadratic {
    k0: CMatrix,
    k1: [CMatrix; 2],
    k2: CMatrix,
}

impl Quadratic {
    fn random(rng: &mut rand_chacha::ChaCha8Rng, n: usize, hermitian: bool) -> Self {
        let mut draw = || {
            if hermitian {
                random_hermitian(rng, n)
            } else {
                random_complex(rng, n)
            }
        };
        Quadratic {
            k0: draw(),
            k1: [draw(), draw()],
            k2: draw(),
        }
    }
}

impl OperatorFamily for Quadratic {
    fn dim(&self) -> usize {
        self.k0.nrows()
    }
    fn num_params(&self) -> usize {
        2
    }
    fn evaluate(&self, p: &[f64]) -> nhgeo::Result<CMatrix> {
        Ok(&self.k0 + &self.k1[0] * c64(p[0], 0.0) + &self.k1[1] * c64(p[1], 0.0) + &self.k2 * c64(p[0] * p[1], 0.0))
    }
    fn derivative(&self, mu: usize, p: &[f64]) -> Option<nhgeo::Result<CMatrix>> {
        Some(Ok(&self.k1[mu] + &self.k2 * c64(p[1 - mu], 0.0)))
    }
}

#[test]
fn hermitian_collapse_to_chi() {
    let mut r = rng(1);
    let opts = TensorOptions::default();
    for _ in 0..5 {
        let fam = Quadratic::random(&mut r, 6, true);
        let p = random_point(&mut r, 2);
        for n in [0, 3] {
            let chi = chi_hermitian(&fam, &p, n, &opts).unwrap().values;
            let jet = EigenJet::compute(&fam, &p, &opts).unwrap();
            assert!(max_abs(&(jet.eta(n).unwrap() - &chi)) < 1e-9);
            for route in [ZetaRoute::Overlap, ZetaRoute::Projector, ZetaRoute::Agp] {
                assert!(max_abs(&(jet.zeta(n, route).unwrap() - &chi)) < 1e-9);
            }
            assert!(max_abs(&(jet.zeta_limited(n, false).unwrap() - &chi)) < 1e-9);
        }
    }
}

#[test]
fn routes_agree_and_gauge_invariance() {
    let mut r = rng(2);
    let opts = TensorOptions::default();
    for _ in 0..10 {
        let fam = Quadratic::random(&mut r, 6, false);
        let p = random_point(&mut r, 2);
        let jet = EigenJet::compute(&fam, &p, &opts).unwrap();
        let gr: Vec<C64> = (0..6).map(|_| c64(r.random_range(-1.0..1.0), r.random_range(-3.0..3.0))).collect();
        let dgr: Vec<Vec<C64>> = (0..2)
            .map(|_| (0..6).map(|_| c64(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0))).collect())
            .collect();
        let g = jet.regauge(&gr, &dgr).unwrap();
        for n in 0..6 {
            let z = jet.zeta(n, ZetaRoute::Overlap).unwrap();
            assert!(rel_diff(&jet.zeta(n, ZetaRoute::Projector).unwrap(), &z) < 1e-8);
            assert!(rel_diff(&jet.zeta(n, ZetaRoute::Agp).unwrap(), &z) < 1e-8);
            assert!(rel_diff(&g.zeta(n, ZetaRoute::Overlap).unwrap(), &z) < 1e-9);
            assert!(rel_diff(&g.eta(n).unwrap(), &jet.eta(n).unwrap()) < 1e-9);
            let zl = jet.zeta_limited(n, false).unwrap();
            assert!(rel_diff(&g.zeta_limited(n, false).unwrap(), &zl) < 1e-9);
            assert!(rel_diff(&g.zeta_limited(n, true).unwrap(), &jet.zeta_limited(n, true).unwrap()) < 1e-9);
            // Berry connection shifts by ∂r
            for mu in 0..2 {
                let shift = g.berry(n, mu) - jet.berry(n, mu) - dgr[mu][n];
                assert!(shift.norm() < 1e-9);
                assert!((jet.berry(n, mu) - jet.berry_dual(n, mu)).norm() < 1e-8);
                let pd = jet.projector_deformation(n, mu).unwrap();
                assert!((g.projector_deformation(n, mu).unwrap() - pd).abs() < 1e-9 * pd.max(1.0));
            }
        }
    }
}

#[test]
fn stencil_matches_perturbative() {
    let mut r = rng(3);
    for _ in 0..5 {
        let fam = Quadratic::random(&mut r, 5, false);
        let p = random_point(&mut r, 2);
        let a = EigenJet::compute(&fam, &p, &TensorOptions::default()).unwrap();
        let s = EigenJet::compute(
            &fam,
            &p,
            &TensorOptions {
                jet: JetMethod::Stencil,
                richardson: true,
                ..TensorOptions::default()
            },
        )
        .unwrap();
        for n in 0..5 {
            assert!(rel_diff(&s.zeta(n, ZetaRoute::Overlap).unwrap(), &a.zeta(n, ZetaRoute::Overlap).unwrap()) < 1e-5);
            assert!(rel_diff(&s.eta(n).unwrap(), &a.eta(n).unwrap()) < 1e-5);
        }
    }
}

#[test]
fn sum_rule_and_agp_residual() {
    let mut r = rng(4);
    let opts = TensorOptions::default();
    for _ in 0..5 {
        let fam = Quadratic::random(&mut r, 5, false);
        let p = random_point(&mut r, 2);
        let jet = EigenJet::compute(&fam, &p, &opts).unwrap();
        let k = fam.evaluate(&p).unwrap();
        for mu in 0..2 {
            let total: C64 = (0..5).map(|n| jet.zeta(n, ZetaRoute::Overlap).unwrap()[(mu, mu)]).sum();
            let norm = jet.agp_operator(mu).norm_squared();
            assert!((total - c64(norm, 0.0)).norm() < 1e-8 * norm.max(1.0));
            let (sys, agp) = agp_elements(&fam, &p, mu, &opts).unwrap();
            let dk = fam.derivative(mu, &p).unwrap().unwrap();
            assert!(agp_residual(&sys, &k, &dk, &agp) < 1e-8 * k.norm());
        }
    }
}

#[test]
fn projector_deformation_matches_direct_difference() {
    let mut r = rng(5);
    let opts = TensorOptions::default();
    for _ in 0..5 {
        let fam = Quadratic::random(&mut r, 5, false);
        let p = random_point(&mut r, 2);
        let sys = build_biortho(&fam.evaluate(&p).unwrap()).unwrap();
        for n in [0, 2, 4] {
            let proj = |q: &[f64]| -> CMatrix {
                let s = build_biortho(&fam.evaluate(q).unwrap()).unwrap();
                // nearest eigenvalue to follow state n
                let m = (0..5)
                    .min_by(|&a, &b| {
                        (s.eigenvalues[a] - sys.eigenvalues[n])
                            .norm()
                            .total_cmp(&(s.eigenvalues[b] - sys.eigenvalues[n]).norm())
                    })
                    .unwrap();
                s.right.column(m) * s.left.column(m).adjoint()
            };
            for mu in 0..2 {
                let h = 1e-5;
                let mut pp = p.clone();
                pp[mu] += h;
                let mut pm = p.clone();
                pm[mu] -= h;
                let dp = (proj(&pp) - proj(&pm)) / c64(2.0 * h, 0.0);
                let direct = dp.norm_squared() / proj(&p).norm_squared();
                let four = projector_deformation(&fam, &p, n, mu, &opts).unwrap();
                assert!((four - direct).abs() < 1e-6 * direct.max(1.0), "{four} {direct}");
            }
        }
    }
}

#[test]
fn limited_tensor_is_psd() {
    let mut r = rng(6);
    for _ in 0..10 {
        let fam = Quadratic::random(&mut r, 6, false);
        let p = random_point(&mut r, 2);
        for n in 0..6 {
            let t = zeta_limited(&fam, &p, n, false, &TensorOptions::default()).unwrap();
            assert!(t.hermiticity_error() < 1e-9 * max_abs(&t.values).max(1.0));
            assert!(t.min_eigenvalue() > -1e-10 * max_abs(&t.values).max(1.0));
        }
    }
}

#[test]
fn parameter_independent_family_is_flat() {
    let mut r = rng(7);
    let k0 = random_complex(&mut r, 4);
    let fam = LinearFamily::new(k0, vec![CMatrix::zeros(4, 4), CMatrix::zeros(4, 4)]).unwrap();
    let opts = TensorOptions::default();
    for n in 0..4 {
        assert!(max_abs(&zeta_tensor(&fam, &[0.1, 0.2], n, ZetaRoute::Overlap, &opts).unwrap().values) == 0.0);
        assert!(berry_connection(&fam, &[0.1, 0.2], n, 0, &opts).unwrap().norm() == 0.0);
        assert!(projector_deformation(&fam, &[0.1, 0.2], n, 1, &opts).unwrap() == 0.0);
    }
}

#[test]
fn analytic_derivative_consistency() {
    let mut r = rng(8);
    let fam = Quadratic::random(&mut r, 4, false);
    let worst = derivative_consistency(&fam, &[0.3, -0.2]).unwrap().unwrap();
    assert!(worst < 1e-5);
}
