//! Python bindings: layouts, keyboards, decoding, mixture fitting,
//! simulation, metrics and the service message handler.

use std::sync::Arc;

use ankle_keys::corpus::{Lexicon, PhraseSet};
use ankle_keys::decoder::Decoder;
use ankle_keys::geometry::{self, NormalizedPosition, Posture};
use ankle_keys::layout::{disambiguation_score, fit_gmm_1d, layout_count, layout_count_range, GmmParams};
use ankle_keys::service::Registry;
use ankle_keys::session::{self, SessionConfig};
use ankle_keys::simulator::{simulate_session, TypistModel};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: ankle_keys::Error) -> PyErr {
    PyValueError::new_err(format!("{}: {e}", e.kind()))
}

fn posture(s: &str) -> PyResult<Posture> {
    s.parse().map_err(err)
}

/// Contiguous letter groups, written like `"abc|def|...|wxyz"`.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct LetterLayout(geometry::LetterLayout);

#[pymethods]
impl LetterLayout {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        spec.parse().map(LetterLayout).map_err(err)
    }

    #[getter]
    fn groups(&self) -> Vec<String> {
        self.0.groups().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.n_groups()
    }

    fn split(&self, group: usize, at: usize) -> Option<LetterLayout> {
        self.0.split_group(group, at).map(LetterLayout)
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("LetterLayout('{}')", self.0)
    }
}

#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct Keyboard(geometry::Keyboard);

#[pymethods]
impl Keyboard {
    /// Equal-width keys with the space key in the middle.
    #[staticmethod]
    fn uniform(posture_name: &str, layout: &LetterLayout) -> PyResult<Self> {
        geometry::Keyboard::uniform(posture(posture_name)?, layout.0.clone())
            .map(Keyboard)
            .map_err(err)
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        geometry::Keyboard::from_toml_str(text).map(Keyboard).map_err(err)
    }

    fn to_toml(&self) -> String {
        self.0.to_toml_string()
    }

    #[getter]
    fn n_keys(&self) -> usize {
        self.0.n_keys()
    }

    #[getter]
    fn space_key_index(&self) -> usize {
        self.0.space_key_index()
    }

    #[getter]
    fn posture(&self) -> String {
        self.0.posture().to_string()
    }

    /// `(lo, hi, center, sigma)` per key.
    fn keys(&self) -> Vec<(f64, f64, f64, f64)> {
        self.0.keys().iter().map(|k| (k.lo, k.hi, k.center, k.sigma)).collect()
    }

    fn key_at(&self, position: f64) -> PyResult<usize> {
        Ok(self.0.normalized_to_key(NormalizedPosition::new(position).map_err(err)?))
    }

    fn signature(&self, word: &str) -> PyResult<Vec<usize>> {
        self.0.signature(word).map_err(err)
    }
}

#[pyclass(name = "Lexicon", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyLexicon(Lexicon);

/// Words with frequencies, from `word<TAB>frequency` text.
#[pyfunction]
fn lexicon_from_tsv(text: &str) -> PyResult<PyLexicon> {
    Lexicon::parse_str(text).map(PyLexicon).map_err(err)
}

#[pymethods]
impl PyLexicon {
    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn truncated(&self, n: usize) -> PyLexicon {
        PyLexicon(self.0.truncated(n))
    }

    fn words(&self) -> Vec<String> {
        self.0.entries().iter().map(|e| e.word.clone()).collect()
    }
}

#[pyclass(name = "Decoder", frozen)]
pub struct PyDecoder(Arc<Decoder>);

#[pymethods]
impl PyDecoder {
    #[new]
    #[pyo3(signature = (keyboard, lexicon, sigma=None))]
    fn new(keyboard: &Keyboard, lexicon: &PyLexicon, sigma: Option<f64>) -> PyResult<Self> {
        let kb = keyboard.0.clone();
        let mut sm = ankle_keys::decoder::SpatialModel::from_keyboard(&kb).map_err(err)?;
        if let Some(s) = sigma {
            sm = sm.with_sigma(s).map_err(err)?;
        }
        Decoder::new(kb, sm, lexicon.0.clone())
            .map(|d| PyDecoder(Arc::new(d)))
            .map_err(err)
    }

    /// `(word, score)` pairs for a key sequence, in rank order.
    #[pyo3(signature = (keys, max_out=50))]
    fn exact(&self, keys: Vec<usize>, max_out: usize) -> PyResult<Vec<(String, f64)>> {
        let list = self.0.exact(&keys, max_out).map_err(err)?;
        Ok(list.candidates.into_iter().map(|c| (c.word, c.score)).collect())
    }

    /// `(word, posterior)` pairs for normalized tap positions.
    #[pyo3(signature = (positions, max_out=50))]
    fn bayes(&self, positions: Vec<f64>, max_out: usize) -> PyResult<Vec<(String, f64)>> {
        let xs = positions
            .into_iter()
            .map(NormalizedPosition::new)
            .collect::<ankle_keys::Result<Vec<_>>>()
            .map_err(err)?;
        let list = self.0.bayes(&xs, max_out).map_err(err)?;
        Ok(list.candidates.into_iter().map(|c| (c.word, c.score)).collect())
    }
}

#[pyfunction]
fn count_layouts(k: usize) -> PyResult<u64> {
    layout_count(k).map_err(err)
}

#[pyfunction]
fn count_layouts_range(k_min: usize, k_max: usize) -> PyResult<u64> {
    layout_count_range(k_min, k_max).map_err(err)
}

/// Share of words found in the top `top_n` candidates of their signature.
#[pyfunction]
#[pyo3(signature = (layout, lexicon, top_n=3))]
fn disambiguation(layout: &LetterLayout, lexicon: &PyLexicon, top_n: usize) -> PyResult<f64> {
    Ok(disambiguation_score(&layout.0, &lexicon.0, top_n).map_err(err)?.value())
}

/// `(weight, mean, variance)` per component, sorted by mean.
#[pyfunction]
#[pyo3(signature = (samples, n_components, seed=0))]
fn fit_gmm(samples: Vec<f64>, n_components: usize, seed: u64) -> PyResult<Vec<(f64, f64, f64)>> {
    let params = GmmParams { seed, ..GmmParams::default() };
    let m = fit_gmm_1d(&samples, n_components, &params).map_err(err)?;
    Ok(m.components.iter().map(|c| (c.weight, c.mean, c.variance)).collect())
}

/// Types `phrases` with a Gaussian typist; returns `(metrics_json, log_text)`.
#[pyfunction]
#[pyo3(signature = (decoder, phrases, sigma, seed=1))]
fn simulate(decoder: &PyDecoder, phrases: Vec<String>, sigma: f64, seed: u64) -> PyResult<(String, String)> {
    let set = PhraseSet::new(&phrases).map_err(err)?;
    let model = TypistModel::with_sigma(decoder.0.keyboard(), sigma, seed);
    let r = simulate_session(&model, decoder.0.clone(), &set, SessionConfig::default()).map_err(err)?;
    let metrics = serde_json::to_string(&r.metrics).expect("metrics serialize");
    Ok((metrics, session::log_to_string(&r.log)))
}

/// Metrics of a session log as JSON.
#[pyfunction]
fn metrics_from_log(log_text: &str) -> PyResult<String> {
    let log = session::read_log(log_text.as_bytes()).map_err(err)?;
    let report = session::compute_metrics(&log, None).map_err(err)?;
    Ok(serde_json::to_string(&report).expect("metrics serialize"))
}

/// In-process service endpoint: feed protocol lines, get reply lines.
#[pyclass(frozen)]
pub struct Service(Registry);

#[pymethods]
impl Service {
    #[new]
    fn new(decoder: &PyDecoder, phrases: Vec<String>) -> PyResult<Self> {
        let set = PhraseSet::new(&phrases).map_err(err)?;
        Ok(Service(Registry::new(decoder.0.clone(), set, SessionConfig::default())))
    }

    fn handle_line(&self, line: &str) -> Vec<String> {
        self.0.handle_line(line)
    }
}

#[pymodule]
fn pyankle(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<LetterLayout>()?;
    m.add_class::<Keyboard>()?;
    m.add_class::<PyLexicon>()?;
    m.add_class::<PyDecoder>()?;
    m.add_class::<Service>()?;
    m.add_function(wrap_pyfunction!(lexicon_from_tsv, m)?)?;
    m.add_function(wrap_pyfunction!(count_layouts, m)?)?;
    m.add_function(wrap_pyfunction!(count_layouts_range, m)?)?;
    m.add_function(wrap_pyfunction!(disambiguation, m)?)?;
    m.add_function(wrap_pyfunction!(fit_gmm, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(metrics_from_log, m)?)?;
    Ok(())
}
