use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::Serialize;

use conflict_eeg::erp::{self, ErpWaveform, FrnWindow};
use conflict_eeg::pipeline::{self, Command, Config};
use conflict_eeg::preprocess::{self, FilterSpec};
use conflict_eeg::signal::{self, ChannelLayout, EegRecording};
use conflict_eeg::stats;
use conflict_eeg::task::{self, ProtocolConfig};

fn err(e: conflict_eeg::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Serialized through JSON so results arrive as plain dicts and lists.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn config(config_toml: Option<&str>, participants: Option<u32>) -> PyResult<Config> {
    let cfg = match config_toml {
        Some(text) => Config::from_toml(text).map_err(err)?,
        None => Config::default(),
    };
    Ok(match participants {
        Some(n) => cfg.with_participants(n),
        None => cfg,
    })
}

/// Multichannel EEG; samples in µV, one row per channel.
#[pyclass(name = "Recording", module = "conflict_eeg_py")]
struct PyRecording {
    inner: EegRecording,
}

#[pymethods]
impl PyRecording {
    #[new]
    #[pyo3(signature = (sample_rate_hz, channels, rows, references=Vec::new()))]
    fn new(sample_rate_hz: f64, channels: Vec<String>, rows: Vec<Vec<f64>>, references: Vec<String>) -> PyResult<Self> {
        let layout = ChannelLayout::new(&channels, &references).map_err(err)?;
        let inner = EegRecording::from_rows(sample_rate_hz, layout, rows).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn sample_rate_hz(&self) -> f64 {
        self.inner.sample_rate_hz()
    }

    #[getter]
    fn channel_names(&self) -> Vec<String> {
        self.inner.layout().names().to_vec()
    }

    #[getter]
    fn reference_labels(&self) -> Vec<String> {
        self.inner.layout().reference_labels().to_vec()
    }

    #[getter]
    fn n_samples(&self) -> usize {
        self.inner.n_samples()
    }

    #[getter]
    fn n_channels(&self) -> usize {
        self.inner.n_channels()
    }

    fn channel(&self, label: &str) -> PyResult<Vec<f64>> {
        Ok(self.inner.channel_by_label(label).map_err(err)?.to_vec())
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.rows().map(|r| r.to_vec()).collect()
    }

    fn rereference(&self, references: Vec<String>) -> PyResult<Self> {
        Ok(Self {
            inner: signal::rereference(&self.inner, &references).map_err(err)?,
        })
    }

    fn select(&self, labels: Vec<String>) -> PyResult<Self> {
        Ok(Self {
            inner: signal::select_channels(&self.inner, &labels).map_err(err)?,
        })
    }

    /// Zero-phase Butterworth band-pass.
    #[pyo3(signature = (high_pass_hz=1.0, low_pass_hz=40.0, order=4))]
    fn bandpass(&self, high_pass_hz: f64, low_pass_hz: f64, order: usize) -> PyResult<Self> {
        let spec = FilterSpec {
            high_pass_hz,
            low_pass_hz,
            order,
            ..FilterSpec::default()
        };
        Ok(Self {
            inner: preprocess::bandpass(&self.inner, &spec).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Recording({} channels, {} samples at {} Hz)",
            self.inner.n_channels(),
            self.inner.n_samples(),
            self.inner.sample_rate_hz()
        )
    }
}

/// Blocked-radius schedule: trial dicts with `d_level`, `block_id`, `trial_id`.
#[pyfunction]
fn blocked_schedule<'py>(py: Python<'py>, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let plan = task::build_blocked_schedule(&ProtocolConfig::blocked(), seed).map_err(err)?;
    to_py(py, &plan.entries)
}

/// Oddball sessions for one participant, one list of trials per session.
#[pyfunction]
fn oddball_schedule<'py>(py: Python<'py>, participant: usize) -> PyResult<Bound<'py, PyAny>> {
    let plans = task::build_oddball_schedule(&ProtocolConfig::oddball(), participant).map_err(err)?;
    let entries: Vec<_> = plans.iter().map(|p| &p.entries).collect();
    to_py(py, &entries)
}

#[pyfunction]
fn paired_ttest<'py>(py: Python<'py>, xs: Vec<f64>, ys: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &stats::paired_ttest(&xs, &ys).map_err(err)?)
}

/// Most negative point of a waveform inside the window, plus the window area.
#[pyfunction]
#[pyo3(signature = (times_ms, values, start_ms=120.0, end_ms=220.0))]
fn frn_peak<'py>(
    py: Python<'py>,
    times_ms: Vec<f64>,
    values: Vec<f64>,
    start_ms: f64,
    end_ms: f64,
) -> PyResult<Bound<'py, PyAny>> {
    if times_ms.len() != values.len() {
        return Err(PyValueError::new_err("times_ms and values differ in length"));
    }
    let w = ErpWaveform {
        roi_label: "input".into(),
        channels: Vec::new(),
        times_ms,
        values,
        n_epochs: 1,
    };
    to_py(py, &erp::frn_peak(&w, FrnWindow { start_ms, end_ms }).map_err(err)?)
}

/// Behavior cohort: one list of trial records per participant.
#[pyfunction]
#[pyo3(signature = (seed=1, config_toml=None, participants=None))]
fn simulate_behavior<'py>(
    py: Python<'py>,
    seed: u64,
    config_toml: Option<&str>,
    participants: Option<u32>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config(config_toml, participants)?;
    to_py(py, &pipeline::simulate_behavior(&cfg, seed).map_err(err)?)
}

/// Runs every stage in memory and returns the results document as a dict.
#[pyfunction]
#[pyo3(signature = (seed=1, config_toml=None, participants=None))]
fn run_all<'py>(
    py: Python<'py>,
    seed: u64,
    config_toml: Option<&str>,
    participants: Option<u32>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config(config_toml, participants)?;
    let results = py.detach(|| pipeline::run_all_in_memory(&cfg, seed)).map_err(err)?;
    to_py(py, &results)
}

/// Runs one CLI stage against `out`; returns the written paths.
#[pyfunction]
#[pyo3(signature = (stage, out, seed=1, config_toml=None, participants=None))]
fn run_stage(
    py: Python<'_>,
    stage: &str,
    out: PathBuf,
    seed: u64,
    config_toml: Option<&str>,
    participants: Option<u32>,
) -> PyResult<Vec<String>> {
    let cmd: Command = stage.parse().map_err(err)?;
    let cfg = config(config_toml, participants)?;
    let files = py.detach(|| pipeline::run(cmd, &cfg, seed, &out)).map_err(err)?;
    Ok(files.into_iter().map(|p| p.display().to_string()).collect())
}

#[pyfunction]
fn default_config_toml() -> PyResult<String> {
    Config::default().to_toml().map_err(err)
}

#[pymodule]
fn conflict_eeg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRecording>()?;
    m.add_function(wrap_pyfunction!(blocked_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(oddball_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(paired_ttest, m)?)?;
    m.add_function(wrap_pyfunction!(frn_peak, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_behavior, m)?)?;
    m.add_function(wrap_pyfunction!(run_all, m)?)?;
    m.add_function(wrap_pyfunction!(run_stage, m)?)?;
    m.add_function(wrap_pyfunction!(default_config_toml, m)?)?;
    Ok(())
}
