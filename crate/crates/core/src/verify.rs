//! Self-checks behind `nhgeo verify`: oracle equivalences, gauge invariance
//! and closed-form regressions on seeded random instances.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::brute::{
    build_fock, build_superop_from_bath, ness_derivative, ness_from_kernel, ness_jet, quadratic_form_superop,
    superop_as_family, third_quant_superops,
};
use crate::error::Result;
use crate::geo::{chi_hermitian, EigenJet, LinearFamily, TensorOptions, ZetaRoute};
use crate::kitaev::{weak_coupling_gamma, zeta_kitaev_thermo, KitaevParams};
use crate::linalg::{c64, max_abs, CMatrix, C64};
use crate::nh_ssh::{zeta_finite_sum, zeta_summand, zeta_thermodynamic, SshBlochFamily, SshParams};
use crate::quad::{
    build_liouvillian, build_liouvillian_from_bath, gamma_k, steady_state_gamma, zeta_ness_k_with, Boundary,
    LatticeChain, LiouvillianFamily, NessJet, QuadOptions,
};
use crate::scan::{Axis, Model, ScanSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

/// Deliberate corruptions used to confirm the checks can fail.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Mutation {
    /// Negate the quadratic AGP matrix `𝒳` before it enters ζ_NESS.
    pub flip_agp_sign: bool,
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Check = fn(Level, Mutation) -> Result<(bool, String)>;

const CHECKS: &[(&str, Check)] = &[
    ("hermitian-collapse", hermitian_collapse),
    ("gauge-invariance", gauge_invariance),
    ("zeta-routes", zeta_routes),
    ("nh-ssh-closed-form", ssh_closed_form),
    ("third-quantization", third_quantization),
    ("steady-state-vs-kernel", steady_state_vs_kernel),
    ("zeta-ness-vs-superoperator", zeta_ness_vs_superop),
    ("eta-on-ness", eta_on_ness),
    ("kitaev-closed-forms", kitaev_closed_forms),
    ("weak-coupling-order", weak_coupling_order),
    ("gaussian-vs-density-matrix", gaussian_vs_density),
    ("criticality-peaks", criticality_peaks),
];

pub fn run(level: Level, mutation: Mutation) -> Vec<CheckReport> {
    CHECKS
        .iter()
        .map(|(name, check)| {
            let start = Instant::now();
            let (passed, detail) = match check(level, mutation) {
                Ok(r) => r,
                Err(e) => (false, format!("{}: {e}", e.name())),
            };
            CheckReport {
                name,
                passed,
                detail,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn cplx(r: &mut ChaCha8Rng) -> C64 {
    c64(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
}

fn random_matrix(r: &mut ChaCha8Rng, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| cplx(r))
}

fn random_hermitian(r: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let a = random_matrix(r, n);
    (&a + a.adjoint()) * c64(0.5, 0.0)
}

/// Imaginary antisymmetric `2n×2n`.
fn random_majorana(r: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let a = CMatrix::from_fn(2 * n, 2 * n, |_, _| c64(0.0, r.random_range(-1.0..1.0)));
    (&a - a.transpose()) * c64(0.5, 0.0)
}

fn random_bath(r: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let a = random_matrix(r, 2 * n);
    &a * a.adjoint() * c64(0.5, 0.0)
}

fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    max_abs(&(a - b)) / max_abs(b).max(1e-300).max(1.0)
}

fn verdict(worst: f64, tol: f64) -> (bool, String) {
    (worst <= tol, format!("worst {worst:.2e} (tol {tol:.0e})"))
}

fn hermitian_collapse(level: Level, _: Mutation) -> Result<(bool, String)> {
    let mut r = rng(11);
    let count = if level == Level::Full { 20 } else { 5 };
    let opts = TensorOptions::default();
    let mut worst = 0.0f64;
    for _ in 0..count {
        let fam = LinearFamily::new(random_hermitian(&mut r, 6), vec![random_hermitian(&mut r, 6), random_hermitian(&mut r, 6)])?;
        let jet = EigenJet::compute(&fam, &[0.0, 0.0], &opts)?;
        let chi = chi_hermitian(&fam, &[0.0, 0.0], 0, &opts)?.values;
        for t in [jet.zeta(0, ZetaRoute::default())?, jet.eta(0)?, jet.zeta_limited(0, false)?] {
            worst = worst.max(max_abs(&(t - &chi)));
        }
    }
    Ok(verdict(worst, 1e-9))
}

fn random_family(r: &mut ChaCha8Rng, n: usize) -> Result<LinearFamily> {
    LinearFamily::new(random_matrix(r, n), vec![random_matrix(r, n), random_matrix(r, n)])
}

fn gauge_invariance(level: Level, _: Mutation) -> Result<(bool, String)> {
    let mut r = rng(12);
    let (families, gauges) = if level == Level::Full { (20, 20) } else { (4, 5) };
    let opts = TensorOptions::default();
    let mut worst = 0.0f64;
    for _ in 0..families {
        let fam = random_family(&mut r, 6)?;
        let jet = EigenJet::compute(&fam, &[0.1, -0.2], &opts)?;
        let base = [jet.eta(0)?, jet.zeta(0, ZetaRoute::default())?, jet.zeta_limited(0, true)?];
        for _ in 0..gauges {
            let g: Vec<C64> = (0..6).map(|_| cplx(&mut r)).collect();
            let dg: Vec<Vec<C64>> = (0..2).map(|_| (0..6).map(|_| cplx(&mut r)).collect()).collect();
            let j2 = jet.regauge(&g, &dg)?;
            let moved = [j2.eta(0)?, j2.zeta(0, ZetaRoute::default())?, j2.zeta_limited(0, true)?];
            for (a, b) in moved.iter().zip(&base) {
                worst = worst.max(rel(a, b));
            }
        }
    }
    Ok(verdict(worst, 1e-9))
}

fn zeta_routes(level: Level, _: Mutation) -> Result<(bool, String)> {
    let mut r = rng(13);
    let count = if level == Level::Full { 50 } else { 10 };
    let mut worst = 0.0f64;
    for _ in 0..count {
        let fam = random_family(&mut r, 6)?;
        let jet = EigenJet::compute(&fam, &[0.0, 0.0], &TensorOptions::default())?;
        let o = jet.zeta(0, ZetaRoute::Overlap)?;
        worst = worst.max(rel(&jet.zeta(0, ZetaRoute::Agp)?, &o));
        worst = worst.max(rel(&jet.zeta(0, ZetaRoute::Projector)?, &o));
    }
    Ok(verdict(worst, 1e-8))
}

fn ssh_closed_form(level: Level, _: Mutation) -> Result<(bool, String)> {
    let mut r = rng(14);
    let mut worst = 0.0f64;
    for _ in 0..if level == Level::Full { 100 } else { 20 } {
        let (t, d, k) = (r.random_range(-2.0..2.0), r.random_range(-1.0..1.0), r.random_range(0.0..std::f64::consts::TAU));
        let jet = EigenJet::compute(&SshBlochFamily { k }, &[t, d], &TensorOptions::default())?;
        let s = zeta_summand(t, d, k)?;
        let z = jet.zeta(0, ZetaRoute::default())?;
        for mu in 0..2 {
            for nu in 0..2 {
                // the odd-in-k imaginary part of ζ_tδ cancels in the zone sum
                worst = worst.max((z[(mu, nu)].re - s[mu][nu]).abs() / s[mu][nu].abs().max(1.0));
            }
        }
    }
    let sym = zeta_finite_sum(&SshParams::new(0.0, 0.0, 64)?)?;
    let sym_err = (sym.get(0, 0).re - 8.0).abs().max((sym.get(1, 1).re - 8.0).abs()).max(sym.get(0, 1).norm());
    let mut ok = worst <= 1e-8 && sym_err <= 1e-12;
    let mut detail = format!("per-k {worst:.2e}, symmetric point {sym_err:.2e}");
    if level == Level::Full {
        let mut thermo = 0.0f64;
        for (t, d) in [(2.0, 0.5), (0.9, 0.5), (0.9, -0.5), (0.1, 0.2)] {
            let sum = zeta_finite_sum(&SshParams::new(t, d, 4096)?)?.scaled(1.0 / 4096.0);
            let th = zeta_thermodynamic(t, d)?;
            for (mu, nu) in [(0, 0), (1, 1)] {
                thermo = thermo.max(((sum.get(mu, nu) - th.get(mu, nu)) / th.get(mu, nu)).norm());
            }
        }
        ok &= thermo <= 5e-3;
        detail.push_str(&format!(", L=4096 vs thermodynamic {thermo:.2e}"));
    }
    Ok((ok, detail))
}

fn third_quantization(level: Level, _: Mutation) -> Result<(bool, String)> {
    let mut r = rng(15);
    let max_n = if level == Level::Full { 3 } else { 2 };
    let (mut car, mut recon) = (0.0f64, 0.0f64);
    for n in 1..=max_n {
        let fock = build_fock(n)?;
        let tq = third_quant_superops(&fock)?;
        let dim = tq.a[0].nrows();
        for i in 0..2 * n {
            for j in 0..2 * n {
                let anti = &tq.a[i] * &tq.a_dag[j] + &tq.a_dag[j] * &tq.a[i];
                let expect = if i == j { CMatrix::identity(dim, dim) } else { CMatrix::zeros(dim, dim) };
                car = car.max(max_abs(&(anti - expect)));
                car = car.max(max_abs(&(&tq.a[i] * &tq.a[j] + &tq.a[j] * &tq.a[i])));
            }
        }
        for _ in 0..3 {
            let liou = build_liouvillian_from_bath(n, &random_majorana(&mut r, n), &random_bath(&mut r, n))?;
            let direct = build_superop_from_bath(&fock, &liou.h, &liou.m)?;
            recon = recon.max(max_abs(&(direct - quadratic_form_superop(&tq, &liou.x, &liou.y))));
        }
    }
    Ok((car <= 1e-12 && recon <= 1e-10, format!("CAR {car:.2e}, reconstruction {recon:.2e}")))
}

fn kitaev_point(g: f64) -> KitaevParams {
    KitaevParams {
        h: 0.4,
        gamma: 0.8,
        g,
        mu_plus: 1.0,
        mu_minus: 0.6,
        l: 3,
    }
}

fn steady_state_vs_kernel(level: Level, _: Mutation) -> Result<(bool, String)> {
    let mut r = rng(16);
    let mut worst = 0.0f64;
    let fock = build_fock(2)?;
    for _ in 0..if level == Level::Full { 10 } else { 3 } {
        let liou = build_liouvillian_from_bath(2, &random_majorana(&mut r, 2), &random_bath(&mut r, 2))?;
        let ness = ness_from_kernel(&fock, &build_superop_from_bath(&fock, &liou.h, &liou.m)?)?;
        worst = worst.max(max_abs(&(steady_state_gamma(&liou)?.gamma - ness.correlation.gamma)));
    }
    if level == Level::Full {
        let p = kitaev_point(0.1);
        let chain = p.chain(false);
        let fam = LatticeChain::periodic(&chain, 3);
        let lam = [p.h, p.gamma];
        let liou = fam.liouvillian(&lam)?;
        let fock = build_fock(3)?;
        let ness = ness_from_kernel(&fock, &build_superop_from_bath(&fock, &liou.h, &liou.m)?)?;
        worst = worst.max(max_abs(&(steady_state_gamma(&liou)?.gamma - ness.correlation.gamma)));
    }
    // single mode: Γ₁₂ = iΛ
    let (mp, mm) = (0.9, 0.4);
    let loss = crate::quad::jump_vector(&[c64(mm, 0.0)], &[c64(0.0, 0.0)])?;
    let gain = crate::quad::jump_vector(&[c64(0.0, 0.0)], &[c64(mp, 0.0)])?;
    let g1 = steady_state_gamma(&build_liouvillian(1, &CMatrix::zeros(2, 2), &[loss, gain])?)?.gamma;
    let lam = crate::kitaev::lambda_ratio(mp, mm)?;
    let single = (g1[(0, 1)] - c64(0.0, lam)).norm();
    Ok((worst <= 1e-8 && single <= 1e-12, format!("kernel {worst:.2e}, single mode {single:.2e}")))
}

/// ζ_NESS from the quadratic AGP on a two-site antiperiodic Kitaev chain,
/// compared with the generic engine on the 16×16 superoperator and with the
/// momentum-space sum.
fn zeta_ness_vs_superop(level: Level, mutation: Mutation) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let points: &[(f64, f64)] = if level == Level::Full {
        &[(0.4, 0.8), (1.7, 0.5), (-0.6, 1.2), (0.9, -0.7), (2.3, 1.1)]
    } else {
        &[(0.4, 0.8), (1.7, 0.5)]
    };
    let p = kitaev_point(0.9);
    let chain = p.chain(false);
    let fam = LatticeChain::antiperiodic(&chain, 2);
    let sf = superop_as_family(&fam)?;
    let opts = TensorOptions::merged(1e-7);
    for &(h, g) in points {
        let lam = [h, g];
        let mut jet = NessJet::compute(&fam, &lam, &QuadOptions::merged())?;
        if mutation.flip_agp_sign {
            for x in &mut jet.xcal {
                *x = -&*x;
            }
        }
        let quad = jet.zeta();
        let (ej, n) = ness_jet(&sf, &lam, &opts)?;
        let generic = ej.zeta(n, ZetaRoute::default())?;
        let kspace = zeta_ness_k_with(&chain, &lam, 2, Boundary::Antiperiodic)?.values;
        worst = worst.max(rel(&quad, &generic)).max(rel(&kspace, &generic));
    }
    if level == Level::Full {
        let p3 = kitaev_point(0.7);
        let chain3 = p3.chain(false);
        let fam3 = LatticeChain::periodic(&chain3, 3);
        let sf3 = superop_as_family(&fam3)?;
        let lam = [p3.h, p3.gamma];
        let mut jet = NessJet::compute(&fam3, &lam, &QuadOptions::merged())?;
        if mutation.flip_agp_sign {
            for x in &mut jet.xcal {
                *x = -&*x;
            }
        }
        let (ej, n) = ness_jet(&sf3, &lam, &opts)?;
        worst = worst.max(rel(&jet.zeta(), &ej.zeta(n, ZetaRoute::default())?));
    }
    Ok(verdict(worst, 1e-6))
}

fn eta_on_ness(level: Level, _: Mutation) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let p = kitaev_point(0.9);
    let chain = p.chain(false);
    let mut cases: Vec<(LatticeChain<'_, _>, [f64; 2])> = vec![(LatticeChain::antiperiodic(&chain, 2), [0.4, 0.8])];
    if level == Level::Full {
        cases.push((LatticeChain::periodic(&chain, 1), [0.3, 0.5]));
        cases.push((LatticeChain::antiperiodic(&chain, 2), [1.6, -0.4]));
    }
    for (fam, lam) in &cases {
        let sf = superop_as_family(fam)?;
        let (jet, n) = ness_jet(&sf, lam, &TensorOptions::merged(1e-7))?;
        worst = worst.max(max_abs(&jet.eta(n)?));
    }
    Ok(verdict(worst, 1e-9))
}

fn kitaev_closed_forms(level: Level, _: Mutation) -> Result<(bool, String)> {
    let base = KitaevParams {
        h: 0.0,
        gamma: 1.0,
        g: 0.1,
        mu_plus: 1.0,
        mu_minus: 0.5,
        l: 64,
    };
    let lam = base.lambda_ratio()?;
    let z = crate::kitaev::zeta_kitaev_sum(&base)?;
    let exact = (z.get(0, 0).re - 0.375 * lam * lam * 64.0).abs();
    let mut worst = 0.0f64;
    let pts: &[(f64, f64)] = if level == Level::Full { &[(0.0, 1.0), (0.5, 0.7), (2.0, 1.0)] } else { &[(0.5, 0.7)] };
    for &(h, gamma) in pts {
        let p = KitaevParams { h, gamma, l: 2048, ..base };
        let sum = crate::kitaev::zeta_kitaev_sum(&p)?.scaled(1.0 / 2048.0);
        let th = zeta_kitaev_thermo(h, gamma, lam)?;
        for (mu, nu) in [(0, 0), (1, 1)] {
            worst = worst.max(((sum.get(mu, nu) - th.get(mu, nu)) / th.get(mu, nu)).norm());
        }
    }
    Ok((exact <= 1e-12 && worst <= 5e-3, format!("h=0 exact {exact:.2e}, L=2048 relative {worst:.2e}")))
}

fn weak_coupling_order(_: Level, _: Mutation) -> Result<(bool, String)> {
    let gs = [1e-2, 1e-3, 1e-4];
    let mut dev = Vec::new();
    for &g in &gs {
        let p = KitaevParams { g, ..kitaev_point(g) };
        let chain = p.chain(false);
        let lam = p.lambda_ratio()?;
        let mut d = 0.0f64;
        for k in [0.3, 1.2, 2.6] {
            let full = gamma_k(&chain, k, &[p.h, p.gamma])?;
            let (weak, _) = weak_coupling_gamma(p.h, p.gamma, lam, k)?;
            d = d.max((full - weak).norm());
        }
        dev.push(d);
    }
    let slopes: Vec<f64> = (0..2).map(|i| (dev[i] / dev[i + 1]).ln() / (gs[i] / gs[i + 1]).ln()).collect();
    let ok = slopes.iter().all(|s| (s - 2.0).abs() <= 0.2);
    Ok((ok, format!("slopes {:.3}, {:.3}", slopes[0], slopes[1])))
}

fn gaussian_vs_density(level: Level, _: Mutation) -> Result<(bool, String)> {
    let mut r = rng(17);
    let fock = build_fock(2)?;
    let mut worst = 0.0f64;
    for _ in 0..if level == Level::Full { 10 } else { 3 } {
        let h = [random_majorana(&mut r, 2), random_majorana(&mut r, 2)];
        let m = [random_bath(&mut r, 2), random_bath(&mut r, 2)];
        let fam = crate::scan::LinearLiouvillian::new(h[0].clone(), m[0].clone() * c64(4.0, 0.0), vec![h[1].clone()], vec![m[1].clone()])?;
        let lam = [0.3];
        let jet = NessJet::compute(&fam, &lam, &QuadOptions::default())?;
        let liou = fam.liouvillian(&lam)?;
        let superop = build_superop_from_bath(&fock, &liou.h, &liou.m)?;
        let rho = ness_from_kernel(&fock, &superop)?.rho;
        let dsuper = build_superop_from_bath(&fock, &fam.dh[0], &fam.dm[0])?;
        let drho = ness_derivative(&superop, &dsuper, &rho)?;
        let bures = crate::brute::bures_density(&rho, &drho, &drho)?;
        let tilde = crate::brute::zeta_tilde_density_connected(&rho, &drho, &drho);
        worst = worst.max((jet.bures()?[(0, 0)].re - bures).abs() / bures.abs().max(1.0));
        worst = worst.max((jet.zeta_tilde()?[(0, 0)].re - tilde).abs() / tilde.abs().max(1.0));
    }
    Ok(verdict(worst, 1e-8))
}

/// Sweep peaks sit next to the critical lines. Quick mode uses a coarser grid.
fn criticality_peaks(level: Level, _: Mutation) -> Result<(bool, String)> {
    let (l, steps) = if level == Level::Full { (1024.0, 201) } else { (256.0, 41) };
    let peak = |model: &str, params: &[(&str, f64)], axis: &str, lo: f64, hi: f64, col: (usize, usize)| -> Result<Vec<f64>> {
        let model = Model::load(model, &Default::default())?;
        let spec = ScanSpec {
            model: model.name().into(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).chain([("L".to_string(), l)]).collect(),
            axes: vec![Axis {
                name: axis.into(),
                min: lo,
                max: hi,
                steps,
            }],
            ..ScanSpec::default()
        };
        let rows = crate::scan::run_sweep(&spec, &model, None)?;
        Ok(rows
            .iter()
            .map(|r| r.values[0].as_ref().map(|m| m[col].re).unwrap_or(f64::NAN))
            .collect())
    };
    let argmax = |v: &[f64], from: usize, to: usize| {
        (from..to).filter(|&i| v[i].is_finite()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap_or(from)
    };
    let step = 2.0 / (steps - 1) as f64;
    let mut worst = 0.0f64;
    let kit = peak("kitaev-dissipative", &[("gamma", 1.0)], "h", 0.0, 2.0, (0, 0))?;
    worst = worst.max(((argmax(&kit, 0, steps) as f64 * step) - 1.0).abs() / step);
    let ssh = peak("nh-ssh", &[("delta", 0.5)], "t", 0.0, 2.0, (0, 0))?;
    let half = steps / 2;
    worst = worst.max(((argmax(&ssh, 0, half) as f64 * step) - 0.5).abs() / step);
    worst = worst.max(((argmax(&ssh, half, steps) as f64 * step) - 1.5).abs() / step);
    Ok((worst <= 1.0 + 1e-9, format!("largest peak offset {worst:.2} grid steps")))
}

/// Convenience for callers that only need the overall verdict.
pub fn all_passed(reports: &[CheckReport]) -> bool {
    reports.iter().all(|r| r.passed)
}

