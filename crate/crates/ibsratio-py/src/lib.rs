//! Python bindings for the sequential risk-ratio / odds-ratio estimators.
//!
//! Build with `cargo build --release -p ibsratio-py`; the resulting
//! `libibsratio_py.so` imports as the module `ibsratio_py` once renamed to
//! `ibsratio_py.so` (see python/smoke_test.py for a loader that does this).

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ibsratio::analysis;
use ibsratio::error::Error;
use ibsratio::montecarlo;
use ibsratio::{EstimatorConfig, Session, TargetParameter};

fn to_py_err(err: Error) -> PyErr {
    match err {
        Error::InvalidConfig(_) | Error::InfeasibleCell(_) => {
            PyValueError::new_err(err.to_string())
        }
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

fn parse_param(name: &str) -> PyResult<TargetParameter> {
    name.parse().map_err(to_py_err)
}

/// One run of the estimation procedure.
#[pyclass(frozen)]
struct EstimationResult {
    #[pyo3(get)]
    r: u64,
    #[pyo3(get)]
    estimate: f64,
    #[pyo3(get)]
    n_prime: u64,
    #[pyo3(get)]
    n_dprime: u64,
    #[pyo3(get)]
    consumed1: u64,
    #[pyo3(get)]
    consumed2: u64,
    #[pyo3(get)]
    pairs: u64,
}

#[pymethods]
impl EstimationResult {
    fn __repr__(&self) -> String {
        format!(
            "EstimationResult(estimate={}, n_prime={}, n_dprime={}, consumed1={}, \
             consumed2={}, pairs={})",
            self.estimate, self.n_prime, self.n_dprime, self.consumed1, self.consumed2,
            self.pairs
        )
    }
}

/// Monte Carlo aggregate for one grid cell.
#[pyclass(frozen)]
struct CellStatistics {
    #[pyo3(get)]
    p1: f64,
    #[pyo3(get)]
    p2: f64,
    #[pyo3(get)]
    r: u64,
    #[pyo3(get)]
    replications: u64,
    #[pyo3(get)]
    cell_seed: u64,
    #[pyo3(get)]
    mean_estimate: f64,
    #[pyo3(get)]
    mse_or_relmse: f64,
    #[pyo3(get)]
    mean_consumed1: f64,
    #[pyo3(get)]
    mean_consumed2: f64,
    #[pyo3(get)]
    mean_pairs: f64,
    #[pyo3(get)]
    sef: f64,
    #[pyo3(get)]
    efficiency: f64,
    #[pyo3(get)]
    se_mean: f64,
    #[pyo3(get)]
    se_mse: f64,
}

impl From<montecarlo::CellStatistics> for CellStatistics {
    fn from(c: montecarlo::CellStatistics) -> Self {
        CellStatistics {
            p1: c.p1,
            p2: c.p2,
            r: c.r,
            replications: c.replications,
            cell_seed: c.cell_seed,
            mean_estimate: c.mean_estimate,
            mse_or_relmse: c.mse_or_relmse,
            mean_consumed1: c.mean_consumed1,
            mean_consumed2: c.mean_consumed2,
            mean_pairs: c.mean_pairs,
            sef: c.sef,
            efficiency: c.efficiency,
            se_mean: c.se_mean,
            se_mse: c.se_mse,
        }
    }
}

/// Exact-series value with a rigorous truncation bracket.
#[pyclass(frozen)]
struct PmfBracket {
    #[pyo3(get)]
    lower: f64,
    #[pyo3(get)]
    upper: f64,
    #[pyo3(get)]
    residual_mass: f64,
}

#[pymethods]
impl PmfBracket {
    fn __repr__(&self) -> String {
        format!(
            "PmfBracket(lower={}, upper={}, residual_mass={})",
            self.lower, self.upper, self.residual_mass
        )
    }
}

#[pyfunction]
fn required_successes(param: &str, mu_bar: f64) -> PyResult<u64> {
    ibsratio::required_successes(mu_bar, parse_param(param)?).map_err(to_py_err)
}

#[pyfunction]
fn harmonic(k: u64) -> f64 {
    ibsratio::harmonic(k)
}

#[pyfunction]
fn point_estimate(param: &str, r: u64, n_prime: u64, n_dprime: u64) -> PyResult<f64> {
    ibsratio::point_estimate(parse_param(param)?, r, n_prime, n_dprime).map_err(to_py_err)
}

#[pyfunction]
#[pyo3(signature = (param, mu_bar, p1, p2, seed = 0))]
fn estimate(param: &str, mu_bar: f64, p1: f64, p2: f64, seed: u64) -> PyResult<EstimationResult> {
    let param = parse_param(param)?;
    let config = EstimatorConfig::new(mu_bar, param).map_err(to_py_err)?;
    let model = ibsratio::PopulationModel::new(p1, p2).map_err(to_py_err)?;
    let mut session = Session::simulated(model, seed);
    let res = ibsratio::run_estimation(param, config, &mut session).map_err(to_py_err)?;
    Ok(EstimationResult {
        r: config.r(),
        estimate: res.estimate,
        n_prime: res.n_prime,
        n_dprime: res.n_dprime,
        consumed1: res.consumed1,
        consumed2: res.consumed2,
        pairs: res.pairs,
    })
}

/// Estimate from recorded pairs: a list of (bit1, bit2) tuples.
#[pyfunction]
#[pyo3(signature = (param, mu_bar, pairs, seed = 0))]
fn estimate_replay(
    param: &str,
    mu_bar: f64,
    pairs: Vec<(u8, u8)>,
    seed: u64,
) -> PyResult<EstimationResult> {
    let param = parse_param(param)?;
    let config = EstimatorConfig::new(mu_bar, param).map_err(to_py_err)?;
    for &(b1, b2) in &pairs {
        if b1 > 1 || b2 > 1 {
            return Err(PyValueError::new_err("pair bits must be 0 or 1"));
        }
    }
    let (bits1, bits2) = pairs.into_iter().unzip();
    let mut session = Session::replay(bits1, bits2, seed);
    let res = ibsratio::run_estimation(param, config, &mut session).map_err(to_py_err)?;
    Ok(EstimationResult {
        r: config.r(),
        estimate: res.estimate,
        n_prime: res.n_prime,
        n_dprime: res.n_dprime,
        consumed1: res.consumed1,
        consumed2: res.consumed2,
        pairs: res.pairs,
    })
}

#[pyfunction]
fn true_parameter(param: &str, p1: f64, p2: f64) -> PyResult<f64> {
    analysis::true_parameter(parse_param(param)?, p1, p2).map_err(to_py_err)
}

#[pyfunction]
fn transformed_success_probability(param: &str, p1: f64, p2: f64) -> PyResult<f64> {
    analysis::transformed_success_probability(parse_param(param)?, p1, p2).map_err(to_py_err)
}

#[pyfunction]
fn mse_upper_bound(param: &str, r: u64, p: f64) -> PyResult<(f64, f64)> {
    analysis::mse_upper_bound(parse_param(param)?, r, p).map_err(to_py_err)
}

#[pyfunction]
fn variance_efficiency_factor(param: &str, r: u64, p: f64) -> PyResult<f64> {
    analysis::variance_efficiency_factor(parse_param(param)?, r, p).map_err(to_py_err)
}

#[pyfunction]
fn expected_consumption(param: &str, r: u64, p1: f64, p2: f64) -> PyResult<(f64, f64)> {
    analysis::expected_consumption(parse_param(param)?, r, p1, p2).map_err(to_py_err)
}

#[pyfunction]
fn pairs_upper_bound(r: u64, alpha: u64, p1: f64, p2: f64) -> PyResult<f64> {
    analysis::pairs_upper_bound(r, alpha, p1, p2).map_err(to_py_err)
}

#[pyfunction]
fn sef_lower_bound(r: u64, alpha: u64, p1: f64, p2: f64) -> PyResult<f64> {
    analysis::sef_lower_bound(r, alpha, p1, p2).map_err(to_py_err)
}

#[pyfunction]
fn joint_consumption_pmf(
    r: u64,
    alpha: u64,
    p1: f64,
    p2: f64,
    n1: u64,
    n2: u64,
) -> PyResult<f64> {
    analysis::joint_consumption_pmf(r, alpha, p1, p2, n1, n2).map_err(to_py_err)
}

#[pyfunction]
#[pyo3(signature = (r, alpha, p1, p2, tail_tol = 1e-6))]
fn expected_pairs_exact(
    r: u64,
    alpha: u64,
    p1: f64,
    p2: f64,
    tail_tol: f64,
) -> PyResult<PmfBracket> {
    let b = analysis::expected_pairs_exact(r, alpha, p1, p2, tail_tol).map_err(to_py_err)?;
    Ok(PmfBracket { lower: b.lower, upper: b.upper, residual_mass: b.residual_mass })
}

#[pyfunction]
fn cramer_rao_numerator(param: &str, p1: f64, p2: f64) -> PyResult<f64> {
    analysis::cramer_rao_numerator(parse_param(param)?, p1, p2).map_err(to_py_err)
}

#[pyfunction]
fn observed_efficiency(
    param: &str,
    p1: f64,
    p2: f64,
    mean_pairs: f64,
    mse: f64,
) -> PyResult<f64> {
    analysis::observed_efficiency(parse_param(param)?, p1, p2, mean_pairs, mse)
        .map_err(to_py_err)
}

#[pyfunction]
fn efficiency_lower_bound_r_dependent(
    param: &str,
    r: u64,
    p1: f64,
    p2: f64,
    sef_value: f64,
) -> PyResult<f64> {
    analysis::efficiency_lower_bound_r_dependent(parse_param(param)?, r, p1, p2, sef_value)
        .map_err(to_py_err)
}

#[pyfunction]
fn efficiency_bound_rho(param: &str, r: u64, rho: f64) -> PyResult<f64> {
    analysis::efficiency_bound_rho(parse_param(param)?, r, rho).map_err(to_py_err)
}

#[pyfunction]
fn efficiency_bound_pmax(param: &str, r: u64, p_max: f64) -> PyResult<f64> {
    analysis::efficiency_bound_pmax(parse_param(param)?, r, p_max).map_err(to_py_err)
}

#[pyfunction]
fn asymptotic_efficiency_bound(param: &str, mu_bar: f64) -> PyResult<(f64, f64)> {
    analysis::asymptotic_efficiency_bound(parse_param(param)?, mu_bar).map_err(to_py_err)
}

#[pyfunction]
fn rr_feasible_interval(rho: f64, p_sup: f64) -> PyResult<(f64, f64)> {
    analysis::rr_feasible_interval(rho, p_sup).map_err(to_py_err)
}

#[pyfunction]
fn resolve_cell(rho: f64, big_r: f64) -> PyResult<(f64, f64)> {
    montecarlo::resolve_cell(rho, big_r).map_err(to_py_err)
}

#[pyfunction]
#[pyo3(signature = (param, mu_bar, rho, big_r, replications, master_seed = 0))]
fn run_cell(
    param: &str,
    mu_bar: f64,
    rho: f64,
    big_r: f64,
    replications: u64,
    master_seed: u64,
) -> PyResult<CellStatistics> {
    montecarlo::run_cell(parse_param(param)?, mu_bar, rho, big_r, replications, master_seed)
        .map(CellStatistics::from)
        .map_err(to_py_err)
}

#[pymodule]
fn ibsratio_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<EstimationResult>()?;
    m.add_class::<CellStatistics>()?;
    m.add_class::<PmfBracket>()?;
    m.add_function(wrap_pyfunction!(required_successes, m)?)?;
    m.add_function(wrap_pyfunction!(harmonic, m)?)?;
    m.add_function(wrap_pyfunction!(point_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_replay, m)?)?;
    m.add_function(wrap_pyfunction!(true_parameter, m)?)?;
    m.add_function(wrap_pyfunction!(transformed_success_probability, m)?)?;
    m.add_function(wrap_pyfunction!(mse_upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(variance_efficiency_factor, m)?)?;
    m.add_function(wrap_pyfunction!(expected_consumption, m)?)?;
    m.add_function(wrap_pyfunction!(pairs_upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(sef_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(joint_consumption_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(expected_pairs_exact, m)?)?;
    m.add_function(wrap_pyfunction!(cramer_rao_numerator, m)?)?;
    m.add_function(wrap_pyfunction!(observed_efficiency, m)?)?;
    m.add_function(wrap_pyfunction!(efficiency_lower_bound_r_dependent, m)?)?;
    m.add_function(wrap_pyfunction!(efficiency_bound_rho, m)?)?;
    m.add_function(wrap_pyfunction!(efficiency_bound_pmax, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotic_efficiency_bound, m)?)?;
    m.add_function(wrap_pyfunction!(rr_feasible_interval, m)?)?;
    m.add_function(wrap_pyfunction!(resolve_cell, m)?)?;
    m.add_function(wrap_pyfunction!(run_cell, m)?)?;
    Ok(())
}
