//! Python bindings.
//!
//! Numbers cross the boundary as text: any argument is converted with
//! `str()` and parsed exactly (so `Fraction`, `int` and decimal strings all
//! work), and results come back as `fractions.Fraction`. Reports are returned
//! as plain dicts decoded from the library's JSON form.

use pyo3::exceptions::{PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyList;

use mms_core::harness::{gen_instance, verify_allocation, Family, GeneratorSpec};
use mms_core::number::{format_rational, parse_rational, Rational};
use mms_core::solve::{solve as core_solve, AlphaMode, FptasReport};
use mms_core::{iteration_bound, run_fptas, shares, Allocation, Error, FptasConfig, OracleLimits, ThresholdVector};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Capacity(_) | Error::Inconsistency(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_rational(obj: &Bound<'_, PyAny>) -> PyResult<Rational> {
    parse_rational(&obj.str()?.to_cow()?).map_err(py_err)
}

fn to_rationals(obj: &Bound<'_, PyAny>) -> PyResult<Vec<Rational>> {
    obj.try_iter()?.map(|item| to_rational(&item?)).collect()
}

fn fraction<'py>(py: Python<'py>, value: &Rational) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?.getattr("Fraction")?.call1((format_rational(value),))
}

fn from_json<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.getattr("loads")?.call1((text,))
}

fn to_json(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    let py = obj.py();
    py.import("json")?.getattr("dumps")?.call1((obj,))?.extract()
}

fn limits(max_items: u32, max_agents: usize) -> OracleLimits {
    OracleLimits { max_items, max_agents }
}

/// An additive valuation matrix with exact rational entries.
#[pyclass(name = "Instance", module = "mms_fair", frozen)]
struct PyInstance {
    inner: mms_core::Instance,
}

#[pymethods]
impl PyInstance {
    #[new]
    fn new(valuations: &Bound<'_, PyAny>) -> PyResult<Self> {
        let rows = valuations
            .try_iter()?
            .map(|row| to_rationals(&row?))
            .collect::<PyResult<_>>()?;
        let inner = mms_core::Instance::new(rows).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = mms_core::Instance::from_json(text).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn valuations<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let rows = PyList::empty(py);
        for row in self.inner.valuations() {
            let values = row.iter().map(|v| fraction(py, v)).collect::<PyResult<Vec<_>>>()?;
            rows.append(PyList::new(py, values)?)?;
        }
        Ok(rows)
    }

    fn value<'py>(&self, py: Python<'py>, agent: usize, item: usize) -> PyResult<Bound<'py, PyAny>> {
        if agent >= self.inner.n() || item >= self.inner.m() {
            return Err(PyIndexError::new_err(format!("no value for agent {agent}, item {item}")));
        }
        fraction(py, self.inner.value(agent, item))
    }

    fn __repr__(&self) -> String {
        format!("Instance(n={}, m={})", self.inner.n(), self.inner.m())
    }
}

/// Truncated proportional share of `values` among `n` agents.
#[pyfunction]
fn tps<'py>(py: Python<'py>, values: &Bound<'py, PyAny>, n: usize) -> PyResult<Bound<'py, PyAny>> {
    let share = shares::tps(&to_rationals(values)?, n).map_err(py_err)?;
    fraction(py, &share)
}

/// Exact maximin share and an optimal partition of item indices.
#[pyfunction]
#[pyo3(signature = (values, n, max_items = 16, max_agents = 5))]
fn mms<'py>(
    py: Python<'py>,
    values: &Bound<'py, PyAny>,
    n: usize,
    max_items: u32,
    max_agents: usize,
) -> PyResult<(Bound<'py, PyAny>, Vec<Vec<usize>>)> {
    let values = to_rationals(values)?;
    let witness = py
        .detach(|| shares::mms_exact(&values, n, &limits(max_items, max_agents)))
        .map_err(py_err)?;
    Ok((fraction(py, &witness.value)?, witness.partition))
}

/// Runs the allocator against `alpha` (a sequence) or `mode` ("tps" or "oracle").
#[pyfunction]
#[pyo3(signature = (instance, alpha = None, mode = "tps"))]
fn solve<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    alpha: Option<&Bound<'py, PyAny>>,
    mode: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let mode = match (alpha, mode) {
        (Some(a), _) => AlphaMode::Explicit(ThresholdVector::new(to_rationals(a)?).map_err(py_err)?),
        (None, "tps") => AlphaMode::Tps,
        (None, "oracle") => AlphaMode::Oracle(OracleLimits::default()),
        (None, other) => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    };
    let report = py.detach(|| core_solve(&instance.inner, &mode)).map_err(py_err)?;
    from_json(py, &report.to_json())
}

/// Threshold descent with step `epsilon`; `oracle=True` adds MMS ratios.
#[pyfunction]
#[pyo3(signature = (instance, epsilon, oracle = false))]
fn fptas<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    epsilon: &Bound<'py, PyAny>,
    oracle: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = FptasConfig::new(to_rational(epsilon)?).map_err(py_err)?;
    let inst = &instance.inner;
    let report = py
        .detach(|| {
            let bound = iteration_bound(inst.n(), &cfg.epsilon);
            let outcome = run_fptas(inst, &cfg)?;
            FptasReport::new(inst, outcome, bound, oracle.then_some(&OracleLimits::default()))
        })
        .map_err(py_err)?;
    from_json(py, &report.to_json())
}

/// Builds an instance from a generator family name.
#[pyfunction]
#[pyo3(signature = (family, n = 3, m = 0, seed = 0, water_count = 4, value = None))]
fn generate(
    family: &str,
    n: usize,
    m: usize,
    seed: u64,
    water_count: usize,
    value: Option<&Bound<'_, PyAny>>,
) -> PyResult<PyInstance> {
    let family: Family = family.parse().map_err(py_err)?;
    let mut spec = GeneratorSpec::new(family, n, m, seed);
    spec.water_count = water_count;
    if family == Family::Tightness {
        spec.m = 5 + water_count;
    }
    spec.value = value.map(to_rational).transpose()?;
    let inner = gen_instance(&spec).map_err(py_err)?;
    Ok(PyInstance { inner })
}

/// Exact values and ratios of an allocation dict as returned by `solve`.
#[pyfunction]
#[pyo3(signature = (instance, allocation, alpha = None, oracle = false))]
fn verify<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    allocation: &Bound<'py, PyAny>,
    alpha: Option<&Bound<'py, PyAny>>,
    oracle: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let alloc = Allocation::from_json(&to_json(allocation)?).map_err(py_err)?;
    let alpha = alpha
        .map(|a| ThresholdVector::new(to_rationals(a)?).map_err(py_err))
        .transpose()?;
    let report = verify_allocation(&instance.inner, &alloc, alpha.as_ref(), oracle.then_some(&OracleLimits::default()))
        .map_err(py_err)?;
    let text = serde_json::to_string(&report).expect("report serializes");
    from_json(py, &text)
}

#[pymodule]
fn mms_fair(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_function(wrap_pyfunction!(tps, m)?)?;
    m.add_function(wrap_pyfunction!(mms, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(fptas, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("APPROXIMATION_FACTOR", "7/9")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use pyo3::types::PyModule;

    fn with_module<F: for<'py> FnOnce(Python<'py>, &Bound<'py, PyModule>)>(f: F) {
        Python::initialize();
        Python::attach(|py| {
            let module = PyModule::new(py, "mms_fair").unwrap();
            mms_fair(&module).unwrap();
            f(py, &module);
        });
    }

    #[test]
    fn tps_returns_a_fraction() {
        with_module(|py, m| {
            let values = PyList::new(py, [1, 1, 1]).unwrap();
            let share = m.getattr("tps").unwrap().call1((values, 3)).unwrap();
            assert_eq!(share.str().unwrap().to_cow().unwrap(), "1");
            assert_eq!(share.get_type().name().unwrap().to_cow().unwrap(), "Fraction");
        });
    }

    #[test]
    fn solve_tightness_dict() {
        with_module(|py, m| {
            let inst = m.getattr("generate").unwrap().call1(("tightness",)).unwrap();
            let kwargs = pyo3::types::PyDict::new(py);
            kwargs.set_item("mode", "oracle").unwrap();
            let report = m.getattr("solve").unwrap().call((inst,), Some(&kwargs)).unwrap();
            let min: String = report.get_item("min_ratio").unwrap().extract().unwrap();
            assert_eq!(min, "7/9");
        });
    }

    #[test]
    fn errors_map_to_python_exceptions() {
        with_module(|py, m| {
            let rows = PyList::new(py, [PyList::new(py, [1, -1]).unwrap()]).unwrap();
            let err = m.getattr("Instance").unwrap().call1((rows,)).unwrap_err();
            assert!(err.is_instance_of::<PyValueError>(py));
            let err = m.getattr("generate").unwrap().call1(("nope",)).unwrap_err();
            assert!(err.is_instance_of::<PyValueError>(py));
        });
    }
}
