//! Python bindings. Rationals cross the boundary as `"n/d"` strings, which
//! `fractions.Fraction` parses directly; structured results as JSON text.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use zipper_core::arith::{format_rational, parse_rational, pow2, Rational};
use zipper_core::{horseshoe, mdim, symbolic, vanishing, zipper, Error, Word};

fn err(e: Error) -> PyErr {
    match e {
        Error::Parse(_) | Error::InvalidParameter(_) | Error::InvalidWord(_) | Error::DomainViolation(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn q(s: &str) -> PyResult<Rational> {
    if let Some(e) = s.trim().strip_prefix("2^") {
        let e: i64 = e.parse().map_err(|_| PyValueError::new_err(format!("bad exponent in {s:?}")))?;
        return Ok(pow2(e));
    }
    parse_rational(s).map_err(err)
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

#[pyclass(name = "Parameter", frozen)]
struct PyParameter(zipper_core::Parameter);

#[pymethods]
impl PyParameter {
    /// `Parameter("3/10,7/10,4/5,1/10")`
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        zipper_core::Parameter::parse(spec).map(PyParameter).map_err(err)
    }

    fn coords(&self) -> Vec<String> {
        self.0.to_strings().to_vec()
    }

    /// Slopes and region flags, as JSON.
    fn derived(&self) -> String {
        to_json(&self.0.derived())
    }

    /// `(I_ω, J_ω)` as pairs of `"n/d"` strings.
    fn tile(&self, word: &str) -> PyResult<((String, String), (String, String))> {
        let w: Word = word.parse().map_err(err)?;
        let (i, j) = self.0.tile(&w);
        let f = format_rational;
        Ok(((f(&i.lo), f(&i.hi)), (f(&j.lo), f(&j.hi))))
    }

    /// Enclosure of `Z(x)` of width at most `eps`.
    #[pyo3(signature = (x, eps = "2^-30"))]
    fn eval(&self, x: &str, eps: &str) -> PyResult<(String, String)> {
        let y = zipper::eval(&self.0, &q(x)?, &q(eps)?).map_err(err)?;
        Ok((format_rational(&y.lo), format_rational(&y.hi)))
    }

    /// Breakpoints of the level-`k` approximant and its sup-distance bound.
    fn approximant(&self, k: usize) -> PyResult<(Vec<(String, String)>, String)> {
        let (f, e) = zipper::approximant(&self.0, k).map_err(err)?;
        let pts = f.points().iter().map(|(x, y)| (format_rational(x), format_rational(y))).collect();
        Ok((pts, format_rational(&e)))
    }

    /// Hölder and hypersensitivity enclosures, as JSON.
    #[pyo3(signature = (bits = 40))]
    fn regularity(&self, bits: u64) -> PyResult<String> {
        zipper_core::regularity::hypersensitivity(&self.0, bits).map(|r| to_json(&r)).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Parameter(\"{}\")", self.0.to_strings().join(","))
    }
}

#[pyclass(name = "HorseshoeCertificate", frozen)]
struct PyHorseshoe(horseshoe::HorseshoeCertificate);

#[pymethods]
impl PyHorseshoe {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text).map(PyHorseshoe).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> String {
        to_json(&self.0)
    }

    #[getter]
    fn order(&self) -> usize {
        self.0.order
    }

    #[getter]
    fn words(&self) -> Vec<String> {
        self.0.words.iter().map(|w| w.to_string()).collect()
    }

    /// `(ok, violations as JSON)`.
    fn verify(&self) -> (bool, String) {
        let v = horseshoe::verify(&self.0);
        (v.ok, to_json(&v.violations))
    }
}

#[pyfunction]
fn search(p: &PyParameter, k: usize) -> PyResult<PyHorseshoe> {
    horseshoe::search(&p.0, k).map(PyHorseshoe).map_err(err)
}

/// Realizes a total order of `k(l+1)` symbols `(i, j)`; JSON certificate.
#[pyfunction]
fn realize_order(p: &PyParameter, k: usize, l: usize, order: Vec<(usize, usize)>) -> PyResult<String> {
    let r = symbolic::realize_order(&p.0, k, l, &order).map_err(err)?;
    symbolic::check_order_realization(&r).map_err(err)?;
    Ok(to_json(&r))
}

#[pyfunction]
#[pyo3(signature = (p, map, width = "2^-20"))]
fn embed(p: &PyParameter, map: Vec<usize>, width: &str) -> PyResult<String> {
    let e = symbolic::embed(&p.0, &map, &q(width)?).map_err(err)?;
    symbolic::check_embedding(&e).map_err(err)?;
    Ok(to_json(&e))
}

/// Rows of the certified lower-bound table, as JSON.
#[pyfunction]
#[pyo3(signature = (p, eps, depth = 10, n_max = 20))]
fn mdim_table(p: &PyParameter, eps: Vec<String>, depth: usize, n_max: usize) -> PyResult<String> {
    let eps: Vec<Rational> = eps.iter().map(|e| q(e)).collect::<PyResult<_>>()?;
    mdim::mdim_table(&p.0, &eps, depth, n_max).map(|r| to_json(&r)).map_err(err)
}

#[pyclass(name = "SequenceSpec", frozen)]
struct PySequence(vanishing::SequenceSpec);

#[pymethods]
impl PySequence {
    /// Certified choice of `k` scales for `p`.
    #[staticmethod]
    #[pyo3(signature = (p, k, bits = 60))]
    fn choose(p: &PyParameter, k: usize, bits: u64) -> PyResult<Self> {
        vanishing::choose_sequence(&p.0, k, bits).map(PySequence).map_err(err)
    }

    #[staticmethod]
    fn from_exponents(exponents: Vec<i128>) -> Self {
        PySequence(vanishing::SequenceSpec::from_exponents(exponents))
    }

    #[getter]
    fn exponents(&self) -> Vec<i128> {
        self.0.exponents.clone()
    }

    fn gaps_hold(&self) -> bool {
        self.0.gaps_hold()
    }

    fn modulus_holds(&self) -> bool {
        self.0.modulus_holds()
    }

    /// Breakpoints of `h^n` as dyadic strings such as `"2^-1 + 2^-171"`.
    fn homeo(&self, n: usize) -> PyResult<Vec<(String, String)>> {
        let (h, _) = vanishing::build_homeo(&self.0, n).map_err(err)?;
        Ok(h.points.iter().map(|(x, y)| (x.to_string(), y.to_string())).collect())
    }

    /// Card-bound CSV of the cover at `eps` and whether every lemma check passed.
    fn cover(&self, eps: &str) -> PyResult<(String, bool)> {
        let c = vanishing::cover_and_classify(&self.0, &q(eps)?, self.0.len()).map_err(err)?;
        Ok((c.to_csv(), c.all_ok()))
    }

    /// `(upper rate, ratio)` upper ends in the conjugated metric.
    #[pyo3(signature = (p, eps, n_max = 20, depth = 4))]
    fn conjugated_rate(&self, p: &PyParameter, eps: &str, n_max: usize, depth: usize) -> PyResult<(f64, f64)> {
        let r = vanishing::conjugated_rate(&p.0, &self.0, &q(eps)?, n_max, depth).map_err(err)?;
        let f = zipper_core::arith::to_f64;
        Ok((f(&r.estimate.upper.hi), f(&r.ratio.hi)))
    }
}

#[pymodule]
fn zipper_maps(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParameter>()?;
    m.add_class::<PyHorseshoe>()?;
    m.add_class::<PySequence>()?;
    m.add_function(wrap_pyfunction!(search, m)?)?;
    m.add_function(wrap_pyfunction!(realize_order, m)?)?;
    m.add_function(wrap_pyfunction!(embed, m)?)?;
    m.add_function(wrap_pyfunction!(mdim_table, m)?)?;
    Ok(())
}
