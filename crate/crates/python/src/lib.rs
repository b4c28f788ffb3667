//! Python bindings: the scan models (same evaluation paths as the `nhgeo`
//! binary), the closed-form lattice sums, and the quadratic-Liouvillian
//! primitives. Matrices cross the boundary as lists of lists of `complex`.

use std::collections::HashMap;

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nhgeo::geo::{GeoTensor, LinearFamily, TensorKind};
use nhgeo::kitaev::{self, KitaevParams};
use nhgeo::linalg::CMatrix;
use nhgeo::nh_ssh::{self, SshParams};
use nhgeo::quad::{self, LiouvillianFamily, NessJet};
use nhgeo::scan::{self, Axis, Format, LinearLiouvillian, Model, Params, ScanSpec, StateSel};
use nhgeo::verify;

create_exception!(nhgeo, NhgeoError, PyException, "Raised for every library error; the message starts with the error name.");

fn err(e: nhgeo::Error) -> PyErr {
    NhgeoError::new_err(format!("{}: {e}", e.name()))
}

type Rows = Vec<Vec<Complex64>>;

fn to_matrix(rows: &Rows) -> PyResult<CMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(err(nhgeo::Error::ShapeMismatch("ragged matrix rows".into())));
    }
    Ok(CMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn to_matrices(list: &[Rows]) -> PyResult<Vec<CMatrix>> {
    list.iter().map(to_matrix).collect()
}

fn from_matrix(m: &CMatrix) -> Rows {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn from_tensor(t: &GeoTensor) -> Rows {
    from_matrix(&t.values)
}

fn parse_kinds(kinds: Option<Vec<String>>) -> PyResult<Vec<TensorKind>> {
    match kinds {
        None => Ok(vec![TensorKind::Zeta]),
        Some(v) => v
            .iter()
            .map(|s| TensorKind::parse(s).ok_or_else(|| err(nhgeo::Error::InvalidConfig(format!("unknown tensor {s:?}")))))
            .collect(),
    }
}

/// A model as accepted by `nhgeo tensor` / `nhgeo sweep`.
#[pyclass(name = "Model", module = "nhgeo")]
struct PyModel {
    inner: Model,
}

impl PyModel {
    #[allow(clippy::too_many_arguments)]
    fn spec(
        &self,
        params: Option<HashMap<String, f64>>,
        tensors: Option<Vec<String>>,
        state: Option<&str>,
        mu_reg: f64,
        merge_tol: Option<f64>,
    ) -> PyResult<ScanSpec> {
        Ok(ScanSpec {
            model: self.inner.name().into(),
            params: params.unwrap_or_default().into_iter().collect(),
            tensors: parse_kinds(tensors)?,
            state: state.map(|s| s.parse::<StateSel>()).transpose().map_err(err)?,
            mu_reg,
            merge_tol,
            ..ScanSpec::default()
        })
    }
}

#[pymethods]
impl PyModel {
    /// Non-Hermitian SSH chain over `(t, delta)`; parameter `L` is the cell count.
    #[staticmethod]
    fn nh_ssh() -> Self {
        Self { inner: Model::NhSsh }
    }

    /// Dissipative Kitaev chain over `(h, gamma)`.
    #[staticmethod]
    fn kitaev() -> Self {
        Self { inner: Model::Kitaev }
    }

    /// `K(λ) = base + Σ λ_μ directions[μ]`.
    #[staticmethod]
    fn matrix(base: Rows, directions: Vec<Rows>) -> PyResult<Self> {
        let fam = LinearFamily::new(to_matrix(&base)?, to_matrices(&directions)?).map_err(err)?;
        Ok(Self { inner: Model::Matrix(fam) })
    }

    /// Quadratic Liouvillian from a Majorana Hamiltonian `h` and bath matrix
    /// `m`, each linear in the parameters.
    #[staticmethod]
    #[pyo3(signature = (h, m, dh = Vec::new(), dm = Vec::new()))]
    fn liouvillian(h: Rows, m: Rows, dh: Vec<Rows>, dm: Vec<Rows>) -> PyResult<Self> {
        let fam = LinearLiouvillian::new(to_matrix(&h)?, to_matrix(&m)?, to_matrices(&dh)?, to_matrices(&dm)?).map_err(err)?;
        Ok(Self { inner: Model::Quad(fam) })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    #[getter]
    fn directions(&self) -> Vec<String> {
        self.inner.directions()
    }

    /// Parameter names with their defaults.
    #[getter]
    fn defaults(&self) -> HashMap<String, f64> {
        self.inner.param_specs().into_iter().map(|p| (p.name, p.default)).collect()
    }

    /// Tensors at one point, as `{name: matrix}`. Raises on the first failure.
    #[pyo3(signature = (params = None, tensors = None, state = None, mu_reg = 0.0, merge_tol = None))]
    fn tensors(
        &self,
        py: Python<'_>,
        params: Option<HashMap<String, f64>>,
        tensors: Option<Vec<String>>,
        state: Option<&str>,
        mu_reg: f64,
        merge_tol: Option<f64>,
    ) -> PyResult<HashMap<&'static str, Rows>> {
        let spec = self.spec(params, tensors, state, mu_reg, merge_tol)?;
        let model = &self.inner;
        let values = py.detach(|| -> nhgeo::Result<Vec<nhgeo::Result<CMatrix>>> {
            spec.validate(model, false)?;
            let p = model.complete(&spec.params)?;
            Ok(model.evaluate(&p, &spec))
        });
        let mut out = HashMap::new();
        for (kind, v) in spec.tensors.iter().zip(values.map_err(err)?) {
            out.insert(kind.name(), from_matrix(&v.map_err(err)?));
        }
        Ok(out)
    }

    /// Grid evaluation; `axes` are `"name:min:max:steps"` strings. Returns the
    /// same CSV (or JSON) text the command-line tool writes.
    #[pyo3(signature = (axes, params = None, tensors = None, state = None, mu_reg = 0.0, merge_tol = None, format = "csv", threads = None))]
    #[allow(clippy::too_many_arguments)]
    fn sweep(
        &self,
        py: Python<'_>,
        axes: Vec<String>,
        params: Option<HashMap<String, f64>>,
        tensors: Option<Vec<String>>,
        state: Option<&str>,
        mu_reg: f64,
        merge_tol: Option<f64>,
        format: &str,
        threads: Option<usize>,
    ) -> PyResult<String> {
        let mut spec = self.spec(params, tensors, state, mu_reg, merge_tol)?;
        spec.axes = axes.iter().map(|a| a.parse::<Axis>()).collect::<nhgeo::Result<_>>().map_err(err)?;
        spec.format = format.parse::<Format>().map_err(err)?;
        let model = &self.inner;
        py.detach(|| {
            let rows = scan::run_sweep(&spec, model, threads)?;
            Ok(match spec.format {
                Format::Csv => scan::to_csv(&spec, model, &rows),
                Format::Json => scan::to_json(&spec, model, &rows),
            })
        })
        .map_err(err)
    }

    /// Spectrum (or rapidities) sorted by real part.
    #[pyo3(signature = (params = None))]
    fn spectrum(&self, params: Option<HashMap<String, f64>>) -> PyResult<Vec<Complex64>> {
        let given: Params = params.unwrap_or_default().into_iter().collect();
        let p = self.inner.complete(&given).map_err(err)?;
        let report = self.inner.spectrum(&p, None).map_err(err)?;
        Ok(report.values.iter().map(|v| Complex64::new(v[0], v[1])).collect())
    }

    fn __repr__(&self) -> String {
        format!("Model({:?})", self.inner.name())
    }
}

/// Zone sum of ζ over `(t, delta)` for `L` cells.
#[pyfunction]
fn ssh_zeta_sum(t: f64, delta: f64, l: usize) -> PyResult<Rows> {
    let p = SshParams::new(t, delta, l).map_err(err)?;
    Ok(from_tensor(&nh_ssh::zeta_finite_sum(&p).map_err(err)?))
}

/// Per-cell ζ in the thermodynamic limit.
#[pyfunction]
fn ssh_zeta_thermodynamic(t: f64, delta: f64) -> PyResult<Rows> {
    Ok(from_tensor(&nh_ssh::zeta_thermodynamic(t, delta).map_err(err)?))
}

/// Phase label such as `"(+,-)"`.
#[pyfunction]
fn ssh_phase(t: f64, delta: f64) -> PyResult<String> {
    Ok(nh_ssh::classify_phase(t, delta).map_err(err)?.to_string())
}

#[pyfunction]
#[pyo3(signature = (h, gamma, l, mu_plus = 1.0, mu_minus = 0.5))]
fn kitaev_zeta_sum(h: f64, gamma: f64, l: usize, mu_plus: f64, mu_minus: f64) -> PyResult<Rows> {
    let p = KitaevParams {
        h,
        gamma,
        g: 0.0,
        mu_plus,
        mu_minus,
        l,
    };
    Ok(from_tensor(&kitaev::zeta_kitaev_sum(&p).map_err(err)?))
}

#[pyfunction]
fn kitaev_zeta_thermodynamic(h: f64, gamma: f64, lambda_ratio: f64) -> PyResult<Rows> {
    Ok(from_tensor(&kitaev::zeta_kitaev_thermo(h, gamma, lambda_ratio).map_err(err)?))
}

/// `(μ₊² − μ₋²)/(μ₊² + μ₋²)`.
#[pyfunction]
fn lambda_ratio(mu_plus: f64, mu_minus: f64) -> PyResult<f64> {
    kitaev::lambda_ratio(mu_plus, mu_minus).map_err(err)
}

/// `(X, Y)` of the quadratic Liouvillian with Hamiltonian `h` and bath `m`.
#[pyfunction]
fn liouvillian_xy(h: Rows, m: Rows) -> PyResult<(Rows, Rows)> {
    let h = to_matrix(&h)?;
    let liou = quad::build_liouvillian_from_bath(h.nrows() / 2, &h, &to_matrix(&m)?).map_err(err)?;
    Ok((from_matrix(&liou.x), from_matrix(&liou.y)))
}

#[pyfunction]
fn rapidities(h: Rows, m: Rows) -> PyResult<Vec<Complex64>> {
    let h = to_matrix(&h)?;
    let liou = quad::build_liouvillian_from_bath(h.nrows() / 2, &h, &to_matrix(&m)?).map_err(err)?;
    Ok(quad::rapidities(&liou).map_err(err)?.values)
}

/// Steady-state Majorana correlation matrix Γ.
#[pyfunction]
fn steady_state_gamma(h: Rows, m: Rows) -> PyResult<Rows> {
    let h = to_matrix(&h)?;
    let liou = quad::build_liouvillian_from_bath(h.nrows() / 2, &h, &to_matrix(&m)?).map_err(err)?;
    Ok(from_matrix(&quad::steady_state_gamma(&liou).map_err(err)?.gamma))
}

/// ζ, Bures and rescaled ζ̃ of a Liouvillian steady state, from the
/// Gaussian closed forms.
#[pyfunction]
#[pyo3(signature = (h, m, dh, dm, point = None, merge_tol = None))]
fn ness_tensors<'py>(
    py: Python<'py>,
    h: Rows,
    m: Rows,
    dh: Vec<Rows>,
    dm: Vec<Rows>,
    point: Option<Vec<f64>>,
    merge_tol: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let fam = LinearLiouvillian::new(to_matrix(&h)?, to_matrix(&m)?, to_matrices(&dh)?, to_matrices(&dm)?).map_err(err)?;
    let lam = point.unwrap_or_else(|| vec![0.0; fam.num_params()]);
    let mut opts = quad::QuadOptions::default();
    if let Some(tol) = merge_tol {
        opts.degeneracy = nhgeo::geo::Degeneracy::MergeClusters { tol };
    }
    let jet = NessJet::compute(&fam, &lam, &opts).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("zeta", from_matrix(&jet.zeta()))?;
    out.set_item("bures", from_matrix(&jet.bures().map_err(err)?))?;
    out.set_item("zeta_limited_rescaled", from_matrix(&jet.zeta_tilde().map_err(err)?))?;
    out.set_item("gamma", from_matrix(&jet.gamma))?;
    Ok(out)
}

/// Built-in self-checks as `(name, passed, detail)` tuples.
#[pyfunction]
#[pyo3(signature = (level = "quick"))]
fn self_check(py: Python<'_>, level: &str) -> PyResult<Vec<(&'static str, bool, String)>> {
    let level = match level {
        "quick" => verify::Level::Quick,
        "full" => verify::Level::Full,
        other => return Err(err(nhgeo::Error::InvalidConfig(format!("unknown level {other:?}")))),
    };
    let reports = py.detach(|| verify::run(level, verify::Mutation::default()));
    Ok(reports.into_iter().map(|r| (r.name, r.passed, r.detail)).collect())
}

#[pymodule]
#[pyo3(name = "nhgeo")]
fn nhgeo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", scan::VERSION)?;
    m.add("NhgeoError", m.py().get_type::<NhgeoError>())?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(ssh_zeta_sum, m)?)?;
    m.add_function(wrap_pyfunction!(ssh_zeta_thermodynamic, m)?)?;
    m.add_function(wrap_pyfunction!(ssh_phase, m)?)?;
    m.add_function(wrap_pyfunction!(kitaev_zeta_sum, m)?)?;
    m.add_function(wrap_pyfunction!(kitaev_zeta_thermodynamic, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(liouvillian_xy, m)?)?;
    m.add_function(wrap_pyfunction!(rapidities, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(ness_tensors, m)?)?;
    m.add_function(wrap_pyfunction!(self_check, m)?)?;
    Ok(())
}
