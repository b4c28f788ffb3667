//! Model registry, parameter grids and sweep output used by the `nhgeo` CLI.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::brute::{ness_jet, superop_as_family};
use crate::error::{Error, Result};
use crate::geo::{chi_hermitian, Degeneracy, EigenJet, LinearFamily, OperatorFamily, TensorKind, TensorOptions, ZetaRoute};
use crate::kitaev::{KitaevChain, KitaevParams};
use crate::linalg::{canonical_order, eig_general, matrix_from_json, CMatrix, MatrixJson, C64};
use crate::nh_ssh::{bloch, epsilon, k_grid, zeta_summand, SshBlochFamily, SshParams};
use crate::quad::{
    bures_metric, kspace_blocks, steady_state_unique, zeta_tilde_gaussian, Boundary, KPointJet, LatticeChain,
    LiouvillianFamily, NessJet, QuadOptions,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Params = BTreeMap<String, f64>;

/// Which eigenstate the tensors refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateSel {
    /// Liouvillian steady state (for plain matrices: smallest |eigenvalue|).
    Ness,
    Index(usize),
}

impl fmt::Display for StateSel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSel::Ness => write!(f, "ness"),
            StateSel::Index(i) => write!(f, "{i}"),
        }
    }
}

impl FromStr for StateSel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("ness") {
            return Ok(StateSel::Ness);
        }
        s.parse()
            .map(StateSel::Index)
            .map_err(|_| Error::InvalidConfig(format!("state must be \"ness\" or an index, got {s:?}")))
    }
}

impl Serialize for StateSel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            StateSel::Ness => s.serialize_str("ness"),
            StateSel::Index(i) => s.serialize_u64(*i as u64),
        }
    }
}

impl<'de> Deserialize<'de> for StateSel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Index(usize),
            Name(String),
        }
        match Repr::deserialize(d)? {
            Repr::Index(i) => Ok(StateSel::Index(i)),
            Repr::Name(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::InvalidConfig(format!("format must be csv or json, got {s:?}"))),
        }
    }
}

/// One sweep axis, `steps` points from `min` to `max` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        let last = self.steps.saturating_sub(1).max(1) as f64;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.max
                } else {
                    self.min + (self.max - self.min) * i as f64 / last
                }
            })
            .collect()
    }
}

impl FromStr for Axis {
    type Err = Error;

    /// `name:min:max:steps`
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("axis must look like name:min:max:steps, got {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 || parts[0].is_empty() {
            return Err(bad());
        }
        Ok(Axis {
            name: parts[0].to_string(),
            min: parts[1].parse().map_err(|_| bad())?,
            max: parts[2].parse().map_err(|_| bad())?,
            steps: parts[3].parse().map_err(|_| bad())?,
        })
    }
}

/// Matrix files for the file-driven models.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFiles {
    /// `K` for `matrix-file`, the Majorana Hamiltonian `𝐇` for `quad-liouville`.
    #[serde(default)]
    pub matrix_file: Option<PathBuf>,
    /// One direction `∂_μK` (or `∂_μ𝐇`) per parameter `p<μ>`.
    #[serde(default)]
    pub param_files: Vec<PathBuf>,
    #[serde(default)]
    pub bath_file: Option<PathBuf>,
    #[serde(default)]
    pub bath_param_files: Vec<PathBuf>,
}

/// Everything a tensor evaluation, sweep or spectrum needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub model: String,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub axes: Vec<Axis>,
    #[serde(default = "default_tensors")]
    pub tensors: Vec<TensorKind>,
    #[serde(default)]
    pub state: Option<StateSel>,
    #[serde(default)]
    pub mu_reg: f64,
    /// Merge eigenvalue clusters closer than this instead of failing.
    #[serde(default)]
    pub merge_tol: Option<f64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub files: ModelFiles,
}

fn default_tensors() -> Vec<TensorKind> {
    vec![TensorKind::Zeta]
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            model: String::new(),
            params: Params::new(),
            axes: Vec::new(),
            tensors: default_tensors(),
            state: None,
            mu_reg: 0.0,
            merge_tol: None,
            output: None,
            format: Format::Csv,
            files: ModelFiles::default(),
        }
    }
}

impl ScanSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn degeneracy(&self) -> Degeneracy {
        match self.merge_tol {
            Some(tol) => Degeneracy::MergeClusters { tol },
            None => Degeneracy::Error,
        }
    }

    pub fn tensor_options(&self) -> TensorOptions {
        TensorOptions {
            mu_reg: self.mu_reg,
            degeneracy: self.degeneracy(),
            ..TensorOptions::default()
        }
    }

    pub fn quad_options(&self) -> QuadOptions {
        QuadOptions {
            degeneracy: self.degeneracy(),
            ..QuadOptions::default()
        }
    }

    /// Checks everything that does not need numerics. `sweep` requires one or
    /// two axes; otherwise axes must be absent.
    pub fn validate(&self, model: &Model, sweep: bool) -> Result<()> {
        let known = model.param_specs();
        let find = |name: &str| known.iter().find(|p| p.name == name);
        for name in self.params.keys() {
            if find(name).is_none() {
                return Err(Error::InvalidConfig(format!(
                    "unknown parameter {name:?} for model {}",
                    model.name()
                )));
            }
        }
        if self.tensors.is_empty() {
            return Err(Error::InvalidConfig("no tensors requested".into()));
        }
        if !self.mu_reg.is_finite() || self.mu_reg < 0.0 {
            return Err(Error::InvalidConfig("mu_reg must be finite and non-negative".into()));
        }
        if let Some(tol) = self.merge_tol {
            if !(tol > 0.0) || !tol.is_finite() {
                return Err(Error::InvalidConfig("merge_tol must be positive".into()));
            }
        }
        if sweep {
            if self.axes.is_empty() || self.axes.len() > 2 {
                return Err(Error::InvalidConfig(format!("a sweep needs 1 or 2 axes, got {}", self.axes.len())));
            }
        } else if !self.axes.is_empty() {
            return Err(Error::InvalidConfig("axes are only used by sweep".into()));
        }
        for (i, ax) in self.axes.iter().enumerate() {
            let spec = find(&ax.name)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown axis {:?} for model {}", ax.name, model.name())))?;
            if spec.kind != ParamKind::Real {
                return Err(Error::InvalidConfig(format!("{} cannot be swept", ax.name)));
            }
            if ax.steps < 2 {
                return Err(Error::InvalidConfig(format!("axis {} needs at least 2 steps, got {}", ax.name, ax.steps)));
            }
            if !ax.min.is_finite() || !ax.max.is_finite() {
                return Err(Error::InvalidConfig(format!("axis {} has non-finite bounds", ax.name)));
            }
            if self.params.contains_key(&ax.name) {
                return Err(Error::InvalidConfig(format!("{} is both an axis and a fixed parameter", ax.name)));
            }
            if self.axes[..i].iter().any(|a| a.name == ax.name) {
                return Err(Error::InvalidConfig(format!("axis {} given twice", ax.name)));
            }
        }
        let full = model.complete(&self.params)?;
        model.check_values(&full)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Real,
    /// Positive integer.
    Count,
    /// 0 or 1.
    Flag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub default: f64,
    pub kind: ParamKind,
}

fn real(name: &str, default: f64) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        default,
        kind: ParamKind::Real,
    }
}

/// A quadratic Liouvillian linear in its parameters:
/// `𝐇(λ) = 𝐇₀ + Σ λ_μ 𝐇_μ`, `M(λ) = M₀ + Σ λ_μ M_μ`.
#[derive(Debug, Clone)]
pub struct LinearLiouvillian {
    pub n: usize,
    pub h: CMatrix,
    pub m: CMatrix,
    pub dh: Vec<CMatrix>,
    pub dm: Vec<CMatrix>,
}

impl LinearLiouvillian {
    pub fn new(h: CMatrix, m: CMatrix, mut dh: Vec<CMatrix>, mut dm: Vec<CMatrix>) -> Result<Self> {
        let dim = h.nrows();
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::ShapeMismatch(format!("Majorana Hamiltonian must be 2n x 2n, got {dim}x{}", h.ncols())));
        }
        let d = dh.len().max(dm.len());
        dh.resize(d, CMatrix::zeros(dim, dim));
        dm.resize(d, CMatrix::zeros(dim, dim));
        for a in std::iter::once(&h).chain([&m]).chain(&dh).chain(&dm) {
            if a.nrows() != dim || a.ncols() != dim {
                return Err(Error::ShapeMismatch(format!("expected {dim}x{dim}, got {}x{}", a.nrows(), a.ncols())));
            }
        }
        Ok(Self { n: dim / 2, h, m, dh, dm })
    }

    fn at(&self, base: &CMatrix, dirs: &[CMatrix], lambda: &[f64]) -> CMatrix {
        let mut out = base.clone();
        for (d, &x) in dirs.iter().zip(lambda) {
            out += d * C64::new(x, 0.0);
        }
        out
    }
}

impl LiouvillianFamily for LinearLiouvillian {
    fn modes(&self) -> usize {
        self.n
    }

    fn num_params(&self) -> usize {
        self.dh.len()
    }

    fn hamiltonian(&self, lambda: &[f64]) -> Result<CMatrix> {
        Ok(self.at(&self.h, &self.dh, lambda))
    }

    fn bath(&self, lambda: &[f64]) -> Result<CMatrix> {
        Ok(self.at(&self.m, &self.dm, lambda))
    }

    fn d_hamiltonian(&self, mu: usize, _lambda: &[f64]) -> Option<Result<CMatrix>> {
        self.dh.get(mu).cloned().map(Ok)
    }

    fn d_bath(&self, mu: usize, _lambda: &[f64]) -> Option<Result<CMatrix>> {
        self.dm.get(mu).cloned().map(Ok)
    }

    fn param_names(&self) -> Vec<String> {
        indexed_names(self.num_params())
    }
}

fn indexed_names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("p{i}")).collect()
}

/// A registered model, with any matrix files already loaded.
#[derive(Debug, Clone)]
pub enum Model {
    NhSsh,
    Kitaev,
    Quad(LinearLiouvillian),
    Matrix(LinearFamily),
}

fn read_matrix(path: &Path) -> Result<CMatrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    matrix_from_json(&text).map_err(|e| match e {
        Error::InvalidConfig(msg) => Error::InvalidConfig(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn read_all(paths: &[PathBuf]) -> Result<Vec<CMatrix>> {
    paths.iter().map(|p| read_matrix(p)).collect()
}

impl Model {
    pub const NAMES: [&'static str; 4] = ["nh-ssh", "kitaev-dissipative", "quad-liouville", "matrix-file"];

    pub fn load(name: &str, files: &ModelFiles) -> Result<Self> {
        let unused = |what: &str, present: bool| {
            if present {
                Err(Error::InvalidConfig(format!("model {name} takes no {what}")))
            } else {
                Ok(())
            }
        };
        match name {
            "nh-ssh" | "kitaev-dissipative" => {
                unused("matrix files", files.matrix_file.is_some() || files.bath_file.is_some())?;
                unused("parameter files", !files.param_files.is_empty() || !files.bath_param_files.is_empty())?;
                Ok(if name == "nh-ssh" { Model::NhSsh } else { Model::Kitaev })
            }
            "quad-liouville" => {
                let h = match &files.matrix_file {
                    Some(p) => read_matrix(p)?,
                    None => return Err(Error::InvalidConfig("quad-liouville needs --matrix-file with the Hamiltonian".into())),
                };
                let m = match &files.bath_file {
                    Some(p) => read_matrix(p)?,
                    None => CMatrix::zeros(h.nrows(), h.ncols()),
                };
                let fam = LinearLiouvillian::new(h, m, read_all(&files.param_files)?, read_all(&files.bath_param_files)?)?;
                Ok(Model::Quad(fam))
            }
            "matrix-file" => {
                unused("bath files", files.bath_file.is_some() || !files.bath_param_files.is_empty())?;
                let k = match &files.matrix_file {
                    Some(p) => read_matrix(p)?,
                    None => return Err(Error::InvalidConfig("matrix-file needs --matrix-file".into())),
                };
                Ok(Model::Matrix(LinearFamily::new(k, read_all(&files.param_files)?)?))
            }
            _ => Err(Error::InvalidConfig(format!(
                "unknown model {name:?}; known: {}",
                Self::NAMES.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::NhSsh => "nh-ssh",
            Model::Kitaev => "kitaev-dissipative",
            Model::Quad(_) => "quad-liouville",
            Model::Matrix(_) => "matrix-file",
        }
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let count = |name: &str, default: f64| ParamSpec {
            name: name.into(),
            default,
            kind: ParamKind::Count,
        };
        match self {
            Model::NhSsh => vec![real("t", 0.0), real("delta", 0.0), count("L", 64.0)],
            Model::Kitaev => vec![
                real("h", 0.5),
                real("gamma", 1.0),
                real("g", 0.1),
                real("mu_plus", 1.0),
                real("mu_minus", 0.5),
                count("L", 64.0),
                ParamSpec {
                    name: "weak_coupling".into(),
                    default: 1.0,
                    kind: ParamKind::Flag,
                },
            ],
            Model::Quad(f) => indexed_names(f.num_params()).iter().map(|n| real(n, 0.0)).collect(),
            Model::Matrix(f) => indexed_names(f.num_params()).iter().map(|n| real(n, 0.0)).collect(),
        }
    }

    /// Parameters spanning the tensor indices, in index order.
    pub fn directions(&self) -> Vec<String> {
        match self {
            Model::NhSsh => vec!["t".into(), "delta".into()],
            Model::Kitaev => vec!["h".into(), "gamma".into()],
            Model::Quad(f) => f.param_names(),
            Model::Matrix(f) => indexed_names(f.num_params()),
        }
    }

    /// `given` with defaults filled in for every parameter it lacks.
    pub fn complete(&self, given: &Params) -> Result<Params> {
        let mut out = Params::new();
        for spec in self.param_specs() {
            out.insert(spec.name.clone(), given.get(&spec.name).copied().unwrap_or(spec.default));
        }
        if let Some(extra) = given.keys().find(|k| !out.contains_key(*k)) {
            return Err(Error::InvalidConfig(format!("unknown parameter {extra:?} for model {}", self.name())));
        }
        Ok(out)
    }

    pub fn check_values(&self, p: &Params) -> Result<()> {
        for spec in self.param_specs() {
            let v = p[&spec.name];
            let ok = match spec.kind {
                ParamKind::Real => v.is_finite(),
                ParamKind::Count => v.fract() == 0.0 && (1.0..=1e9).contains(&v),
                ParamKind::Flag => v == 0.0 || v == 1.0,
            };
            if !ok {
                return Err(Error::InvalidConfig(format!("invalid value {v} for {}", spec.name)));
            }
        }
        Ok(())
    }

    fn point(&self, p: &Params) -> Vec<f64> {
        self.directions().iter().map(|n| p[n]).collect()
    }

    /// Every requested tensor at one parameter point. Failures are reported
    /// per tensor.
    pub fn evaluate(&self, p: &Params, spec: &ScanSpec) -> Vec<Result<CMatrix>> {
        let kinds = &spec.tensors;
        let out = match self {
            Model::NhSsh => ssh_tensors(p, kinds, spec),
            Model::Kitaev => kitaev_tensors(p, kinds, spec),
            Model::Quad(f) => quad_tensors(f, &self.point(p), kinds, spec),
            Model::Matrix(f) => matrix_tensors(f, &self.point(p), kinds, spec),
        };
        match out {
            Ok(v) => v,
            Err(e) => vec![Err(e); kinds.len()],
        }
    }

    /// Spectrum at one point: eigenvalues of `K` (per k for the SSH chain) or
    /// rapidities of the Liouvillian.
    pub fn spectrum(&self, p: &Params, ks: Option<&[f64]>) -> Result<SpectrumReport> {
        self.check_values(p)?;
        let mut per_k = Vec::new();
        let mut all = Vec::new();
        let mut liouvillian = None;
        match self {
            Model::NhSsh => {
                let sp = SshParams::new(p["t"], p["delta"], p["L"] as usize)?;
                for k in ks.map(<[f64]>::to_vec).unwrap_or_else(|| k_grid(sp.l)) {
                    let vals = sorted(eig_general(&bloch(sp.t, sp.delta, k))?.eigenvalues);
                    all.extend_from_slice(&vals);
                    per_k.push(KSpectrum { k, values: pairs(&vals) });
                }
            }
            Model::Kitaev => {
                let (kp, chain) = kitaev_params(p)?;
                let mut unique = true;
                for k in ks.map(<[f64]>::to_vec).unwrap_or_else(|| k_grid(kp.l)) {
                    let (x, _) = kspace_blocks(&chain, k, &[kp.h, kp.gamma]);
                    let vals = sorted(eig_general(&x)?.eigenvalues);
                    unique &= steady_state_unique(&x, min_re(&vals));
                    all.extend_from_slice(&vals);
                    per_k.push(KSpectrum { k, values: pairs(&vals) });
                }
                liouvillian = Some(unique);
            }
            Model::Quad(f) => {
                if ks.is_some() {
                    return Err(Error::InvalidConfig("quad-liouville has no momentum".into()));
                }
                let liou = f.liouvillian(&self.point(p))?;
                all = eig_general(&liou.x)?.eigenvalues;
                liouvillian = Some(steady_state_unique(&liou.x, min_re(&all)));
            }
            Model::Matrix(f) => {
                if ks.is_some() {
                    return Err(Error::InvalidConfig("matrix-file has no momentum".into()));
                }
                all = eig_general(&f.evaluate(&self.point(p))?)?.eigenvalues;
            }
        }
        let all = sorted(all);
        Ok(SpectrumReport {
            model: self.name().into(),
            params: p.clone(),
            kind: if liouvillian.is_some() { "rapidities" } else { "eigenvalues" },
            count: all.len(),
            min_re: liouvillian.map(|_| min_re(&all)),
            steady_state_unique: liouvillian,
            values: pairs(&all),
            k_points: (!per_k.is_empty()).then_some(per_k),
        })
    }
}

fn sorted(values: Vec<C64>) -> Vec<C64> {
    let scale = values.iter().map(|z| z.norm()).fold(1.0, f64::max);
    canonical_order(&values, 1e-12 * scale).into_iter().map(|i| values[i]).collect()
}

fn pairs(values: &[C64]) -> Vec<[f64; 2]> {
    values.iter().map(|z| [z.re, z.im]).collect()
}

fn min_re(values: &[C64]) -> f64 {
    values.iter().map(|z| z.re).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Serialize)]
pub struct KSpectrum {
    pub k: f64,
    pub values: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub model: String,
    pub params: Params,
    pub kind: &'static str,
    pub count: usize,
    /// Sorted by real part, then imaginary part.
    pub values: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_re: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steady_state_unique: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_points: Option<Vec<KSpectrum>>,
}

/// Compact view of a [`SpectrumReport`] for the `tensor` output.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub kind: &'static str,
    pub count: usize,
    pub min_abs: f64,
    pub max_abs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_re: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steady_state_unique: Option<bool>,
}

impl SpectrumReport {
    pub fn summary(&self) -> SpectrumSummary {
        let abs = self.values.iter().map(|[re, im]| re.hypot(*im));
        SpectrumSummary {
            kind: self.kind,
            count: self.count,
            min_abs: abs.clone().fold(f64::INFINITY, f64::min),
            max_abs: abs.fold(0.0, f64::max),
            min_re: self.min_re,
            steady_state_unique: self.steady_state_unique,
        }
    }
}

fn unsupported(kind: TensorKind, model: &str, why: &str) -> Error {
    Error::InvalidConfig(format!("{} is not available for {model}: {why}", kind.name()))
}

/// Per-tensor accumulator that keeps the first failure.
struct Accum(Vec<Result<CMatrix>>);

impl Accum {
    fn new(n: usize, d: usize) -> Self {
        Self((0..n).map(|_| Ok(CMatrix::zeros(d, d))).collect())
    }

    fn add(&mut self, i: usize, term: Result<CMatrix>) {
        if let Ok(acc) = &mut self.0[i] {
            match term {
                Ok(t) => *acc += t,
                Err(e) => self.0[i] = Err(e),
            }
        }
    }

    fn fail_all(&mut self, e: &Error) {
        for slot in &mut self.0 {
            if slot.is_ok() {
                *slot = Err(e.clone());
            }
        }
    }
}

fn ssh_tensors(p: &Params, kinds: &[TensorKind], spec: &ScanSpec) -> Result<Vec<Result<CMatrix>>> {
    let band = match spec.state.unwrap_or(StateSel::Index(0)) {
        StateSel::Index(b) if b < 2 => b,
        StateSel::Index(b) => return Err(Error::StateIndex { index: b, dim: 2 }),
        StateSel::Ness => return Err(Error::InvalidConfig("nh-ssh has bands 0 and 1, not a steady state".into())),
    };
    let sp = SshParams::new(p["t"], p["delta"], p["L"] as usize)?;
    let lambda = [sp.t, sp.delta];
    let opts = spec.tensor_options();
    let mut acc = Accum::new(kinds.len(), 2);
    for (i, kind) in kinds.iter().enumerate() {
        if *kind == TensorKind::Bures {
            acc.0[i] = Err(unsupported(*kind, "nh-ssh", "it needs a density matrix"));
        }
    }
    for k in k_grid(sp.l) {
        // the eigensolver alone does not see a gap closing at rounding level
        if let Err(e) = zeta_summand(sp.t, sp.delta, k) {
            acc.fail_all(&e);
            break;
        }
        let fam = SshBlochFamily { k };
        let jet = match EigenJet::compute(&fam, &lambda, &opts) {
            Ok(j) => j,
            Err(e) => {
                acc.fail_all(&e);
                break;
            }
        };
        // band 0 is +√ε
        let target = epsilon(sp.t, sp.delta, k).sqrt() * if band == 0 { 1.0 } else { -1.0 };
        let n = (0..2)
            .min_by(|&a, &b| (jet.sys.eigenvalues[a] - target).norm().total_cmp(&(jet.sys.eigenvalues[b] - target).norm()))
            .unwrap_or(0);
        for (i, kind) in kinds.iter().enumerate() {
            let term = match kind {
                // χ orders Hermitian eigenvalues ascending, so band 0 is the upper one
                TensorKind::Chi => chi_hermitian(&fam, &lambda, 1 - band, &opts).map(|t| t.values),
                TensorKind::Eta => jet.eta(n),
                TensorKind::Zeta => jet.zeta(n, ZetaRoute::default()),
                TensorKind::ZetaLimited => jet.zeta_limited(n, false),
                TensorKind::ZetaLimitedRescaled => jet.zeta_limited(n, true),
                TensorKind::Bures => continue,
            };
            acc.add(i, term);
        }
    }
    Ok(acc.0)
}

fn kitaev_params(p: &Params) -> Result<(KitaevParams, KitaevChain)> {
    let kp = KitaevParams {
        h: p["h"],
        gamma: p["gamma"],
        g: p["g"],
        mu_plus: p["mu_plus"],
        mu_minus: p["mu_minus"],
        l: p["L"] as usize,
    };
    kp.validate()?;
    Ok((kp, kp.chain(p["weak_coupling"] != 0.0)))
}

fn kitaev_tensors(p: &Params, kinds: &[TensorKind], spec: &ScanSpec) -> Result<Vec<Result<CMatrix>>> {
    if let Some(StateSel::Index(_)) = spec.state {
        return Err(Error::InvalidConfig("kitaev-dissipative only supports state=ness".into()));
    }
    let (kp, chain) = kitaev_params(p)?;
    let lambda = [kp.h, kp.gamma];
    let mut acc = Accum::new(kinds.len(), 2);
    let gaussian = kinds.iter().any(|k| matches!(k, TensorKind::Zeta | TensorKind::ZetaLimitedRescaled | TensorKind::Bures));
    if gaussian {
        for k in Boundary::Periodic.k_grid(kp.l) {
            let jet = match KPointJet::compute(&chain, k, &lambda) {
                Ok(j) => j,
                Err(e) => {
                    acc.fail_all(&e);
                    break;
                }
            };
            for (i, kind) in kinds.iter().enumerate() {
                let term = match kind {
                    TensorKind::Zeta => Ok(jet.zeta()),
                    TensorKind::ZetaLimitedRescaled => pairwise(&jet.gamma, &jet.dgamma, |g, a, b| Ok(zeta_tilde_gaussian(g, a, b))),
                    TensorKind::Bures => pairwise(&jet.gamma, &jet.dgamma, bures_metric),
                    _ => continue,
                };
                acc.add(i, term);
            }
        }
    }
    let finite = LatticeChain::periodic(&chain, kp.l);
    fill_superop_tensors(&mut acc, &finite, &lambda, kinds, spec);
    Ok(acc.0)
}

fn pairwise(
    gamma: &CMatrix,
    dgamma: &[CMatrix],
    f: impl Fn(&CMatrix, &CMatrix, &CMatrix) -> Result<f64>,
) -> Result<CMatrix> {
    let d = dgamma.len();
    let mut out = CMatrix::zeros(d, d);
    for mu in 0..d {
        for nu in 0..d {
            out[(mu, nu)] = C64::new(f(gamma, &dgamma[mu], &dgamma[nu])?, 0.0);
        }
    }
    Ok(out)
}

/// χ, η and the unrescaled ζ̃ of a Liouvillian come from the generic engine
/// on the superoperator, which limits them to a few modes.
fn fill_superop_tensors<F: LiouvillianFamily + ?Sized>(
    acc: &mut Accum,
    fam: &F,
    lambda: &[f64],
    kinds: &[TensorKind],
    spec: &ScanSpec,
) {
    let wanted: Vec<usize> = (0..kinds.len())
        .filter(|&i| matches!(kinds[i], TensorKind::Chi | TensorKind::Eta | TensorKind::ZetaLimited))
        .collect();
    if wanted.is_empty() {
        return;
    }
    let opts = spec.tensor_options();
    let result = superop_as_family(fam).and_then(|sf| {
        let (jet, n) = ness_jet(&sf, lambda, &opts)?;
        Ok((sf, jet, n))
    });
    for i in wanted {
        acc.0[i] = match &result {
            Err(e) => Err(e.clone()),
            Ok((sf, jet, n)) => match kinds[i] {
                TensorKind::Chi => chi_hermitian(sf, lambda, *n, &opts).map(|t| t.values),
                TensorKind::Eta => jet.eta(*n),
                _ => jet.zeta_limited(*n, false),
            },
        };
    }
}

fn quad_tensors(fam: &LinearLiouvillian, lambda: &[f64], kinds: &[TensorKind], spec: &ScanSpec) -> Result<Vec<Result<CMatrix>>> {
    if let Some(StateSel::Index(_)) = spec.state {
        return Err(Error::InvalidConfig("quad-liouville only supports state=ness".into()));
    }
    let mut acc = Accum::new(kinds.len(), fam.num_params());
    let gaussian = kinds.iter().any(|k| matches!(k, TensorKind::Zeta | TensorKind::ZetaLimitedRescaled | TensorKind::Bures));
    if gaussian {
        match NessJet::compute(fam, lambda, &spec.quad_options()) {
            Err(e) => acc.fail_all(&e),
            Ok(jet) => {
                for (i, kind) in kinds.iter().enumerate() {
                    let term = match kind {
                        TensorKind::Zeta => Ok(jet.zeta()),
                        TensorKind::ZetaLimitedRescaled => jet.zeta_tilde(),
                        TensorKind::Bures => jet.bures(),
                        _ => continue,
                    };
                    acc.add(i, term);
                }
            }
        }
    }
    fill_superop_tensors(&mut acc, fam, lambda, kinds, spec);
    Ok(acc.0)
}

fn matrix_tensors(fam: &LinearFamily, lambda: &[f64], kinds: &[TensorKind], spec: &ScanSpec) -> Result<Vec<Result<CMatrix>>> {
    let opts = spec.tensor_options();
    let jet = EigenJet::compute(fam, lambda, &opts)?;
    let n = match spec.state.unwrap_or(StateSel::Index(0)) {
        StateSel::Ness => jet.sys.index_of_min_modulus(),
        StateSel::Index(i) => i,
    };
    jet.sys.check_state(n)?;
    Ok(kinds
        .iter()
        .map(|kind| match kind {
            TensorKind::Chi => chi_hermitian(fam, lambda, n, &opts).map(|t| t.values),
            TensorKind::Eta => jet.eta(n),
            TensorKind::Zeta => jet.zeta(n, ZetaRoute::default()),
            TensorKind::ZetaLimited => jet.zeta_limited(n, false),
            TensorKind::ZetaLimitedRescaled => jet.zeta_limited(n, true),
            TensorKind::Bures => Err(unsupported(*kind, "matrix-file", "it needs a density matrix")),
        })
        .collect())
}

/// Result of the `tensor` command.
#[derive(Debug, Clone, Serialize)]
pub struct TensorReport {
    pub nhgeo_version: &'static str,
    pub model: String,
    pub params: Params,
    pub directions: Vec<String>,
    pub state: String,
    pub mu_reg: f64,
    /// Finite-difference step, `null` when every derivative is analytic.
    pub fd_step: Option<f64>,
    pub tensors: BTreeMap<String, MatrixJson>,
    pub eigenvalues: SpectrumSummary,
}

fn default_state(model: &Model) -> StateSel {
    match model {
        Model::Kitaev | Model::Quad(_) => StateSel::Ness,
        _ => StateSel::Index(0),
    }
}

/// Evaluates a point; the first failing tensor aborts with its error.
pub fn run_tensor(spec: &ScanSpec, model: &Model) -> Result<TensorReport> {
    spec.validate(model, false)?;
    let p = model.complete(&spec.params)?;
    let values = model.evaluate(&p, spec);
    let mut tensors = BTreeMap::new();
    for (kind, v) in spec.tensors.iter().zip(values) {
        tensors.insert(kind.name().to_string(), MatrixJson::from(&v?));
    }
    let summary = model.spectrum(&p, None)?.summary();
    Ok(TensorReport {
        nhgeo_version: VERSION,
        model: model.name().into(),
        params: p,
        directions: model.directions(),
        state: spec.state.unwrap_or(default_state(model)).to_string(),
        mu_reg: spec.mu_reg,
        fd_step: None,
        tensors,
        eigenvalues: summary,
    })
}

/// One grid point of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub axis_values: Vec<f64>,
    pub values: Vec<Result<CMatrix>>,
}

impl SweepRow {
    /// `ok`, or the distinct error names of the failed tensors joined by `|`.
    pub fn status(&self) -> String {
        let mut names: Vec<&str> = Vec::new();
        for v in &self.values {
            if let Err(e) = v {
                if !names.contains(&e.name()) {
                    names.push(e.name());
                }
            }
        }
        if names.is_empty() {
            "ok".into()
        } else {
            names.join("|")
        }
    }
}

/// Grid points in row-major order over the axes (last axis fastest).
pub fn grid(axes: &[Axis]) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new()];
    for ax in axes {
        let vals = ax.values();
        points = points
            .into_iter()
            .flat_map(|p| {
                vals.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    points
}

/// Evaluates the grid on `threads` workers (all cores when `None`). Rows
/// come back in grid order whatever the thread count.
pub fn run_sweep(spec: &ScanSpec, model: &Model, threads: Option<usize>) -> Result<Vec<SweepRow>> {
    spec.validate(model, true)?;
    let points = grid(&spec.axes);
    let eval = |axis_values: &Vec<f64>| {
        let mut given = spec.params.clone();
        for (ax, &v) in spec.axes.iter().zip(axis_values) {
            given.insert(ax.name.clone(), v);
        }
        let values = match model.complete(&given) {
            Ok(p) => model.evaluate(&p, spec),
            Err(e) => vec![Err(e); spec.tensors.len()],
        };
        SweepRow {
            axis_values: axis_values.clone(),
            values,
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(|| points.par_iter().map(eval).collect()))
}

fn fmt_value(x: f64) -> String {
    format!("{x:.16e}")
}

/// `# nhgeo v<version> model=<name> ...` describing a sweep.
pub fn header_line(spec: &ScanSpec, model: &Model) -> String {
    let mut s = format!("# nhgeo v{VERSION} model={}", model.name());
    if let Ok(p) = model.complete(&spec.params) {
        for (k, v) in p.iter().filter(|(k, _)| !spec.axes.iter().any(|a| &a.name == *k)) {
            let _ = write!(s, " {k}={v}");
        }
    }
    let axes: Vec<String> = spec.axes.iter().map(|a| format!("{}:{}:{}:{}", a.name, a.min, a.max, a.steps)).collect();
    let tensors: Vec<&str> = spec.tensors.iter().map(|t| t.name()).collect();
    let _ = write!(
        s,
        " axes={} tensors={} directions={} state={} mu_reg={}",
        axes.join(";"),
        tensors.join(";"),
        model.directions().join(";"),
        spec.state.unwrap_or(default_state(model)),
        spec.mu_reg
    );
    if let Some(tol) = spec.merge_tol {
        let _ = write!(s, " merge_tol={tol}");
    }
    s
}

pub fn column_names(spec: &ScanSpec, model: &Model) -> Vec<String> {
    let d = model.directions().len();
    let mut cols: Vec<String> = spec.axes.iter().map(|a| a.name.clone()).collect();
    for t in &spec.tensors {
        for mu in 0..d {
            for nu in 0..d {
                cols.push(format!("{}_{mu}{nu}_re", t.name()));
                cols.push(format!("{}_{mu}{nu}_im", t.name()));
            }
        }
    }
    cols.push("status".into());
    cols
}

pub fn to_csv(spec: &ScanSpec, model: &Model, rows: &[SweepRow]) -> String {
    let d = model.directions().len();
    let mut out = header_line(spec, model);
    out.push('\n');
    out.push_str(&column_names(spec, model).join(","));
    out.push('\n');
    for row in rows {
        let mut fields: Vec<String> = row.axis_values.iter().map(|&v| fmt_value(v)).collect();
        for v in &row.values {
            for mu in 0..d {
                for nu in 0..d {
                    let z = match v {
                        Ok(m) => m[(mu, nu)],
                        Err(_) => C64::new(f64::NAN, f64::NAN),
                    };
                    fields.push(fmt_value(z.re));
                    fields.push(fmt_value(z.im));
                }
            }
        }
        fields.push(row.status());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct JsonRow {
    axes: BTreeMap<String, f64>,
    tensors: BTreeMap<String, Option<MatrixJson>>,
    status: String,
}

#[derive(Serialize)]
struct JsonSweep<'a> {
    nhgeo_version: &'static str,
    model: &'static str,
    params: Params,
    axes: &'a [Axis],
    directions: Vec<String>,
    state: String,
    mu_reg: f64,
    rows: Vec<JsonRow>,
}

/// JSON form of a sweep; failed tensors are `null`.
pub fn to_json(spec: &ScanSpec, model: &Model, rows: &[SweepRow]) -> String {
    let mut params = model.complete(&spec.params).unwrap_or_default();
    params.retain(|k, _| !spec.axes.iter().any(|a| &a.name == k));
    let doc = JsonSweep {
        nhgeo_version: VERSION,
        model: model.name(),
        params,
        axes: &spec.axes,
        directions: model.directions(),
        state: spec.state.unwrap_or(default_state(model)).to_string(),
        mu_reg: spec.mu_reg,
        rows: rows
            .iter()
            .map(|r| JsonRow {
                axes: spec.axes.iter().map(|a| a.name.clone()).zip(r.axis_values.iter().copied()).collect(),
                tensors: spec
                    .tensors
                    .iter()
                    .zip(&r.values)
                    .map(|(t, v)| (t.name().to_string(), v.as_ref().ok().map(MatrixJson::from)))
                    .collect(),
                status: r.status(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).unwrap_or_default();
    s.push('\n');
    s
}

/// Parsed sweep CSV: axis values and tensor components per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub status: Vec<String>,
}

impl CsvTable {
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |what: &str| Error::InvalidConfig(format!("malformed sweep CSV: {what}"));
        let mut lines = text.lines();
        let header = lines.next().filter(|l| l.starts_with("# nhgeo v")).ok_or_else(|| bad("missing header"))?;
        let columns: Vec<String> = lines.next().ok_or_else(|| bad("missing column names"))?.split(',').map(String::from).collect();
        let mut rows = Vec::new();
        let mut status = Vec::new();
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != columns.len() {
                return Err(bad("row width"));
            }
            let (last, nums) = fields.split_last().ok_or_else(|| bad("empty row"))?;
            rows.push(nums.iter().map(|f| f.parse::<f64>().map_err(|_| bad(f))).collect::<Result<Vec<_>>>()?);
            status.push(last.to_string());
        }
        Ok(Self {
            header: header.to_string(),
            columns,
            rows,
            status,
        })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}
