//! Thin Python adapter over [`gridmmo::env::Env`].
//!
//! Only flat buffers and scalars cross the boundary: observations leave as
//! little-endian `f32` bytes (one row of `obs_len` per agent) and actions
//! arrive as a flat list of `num_agents * len(action_dims)` integers.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use gridmmo::config::{GameConfig, Profile};
use gridmmo::env::Env;
use gridmmo::minigame::MinigameKind;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Env", unsendable)]
pub struct PyEnv {
    env: Env,
}

impl PyEnv {
    fn frame_bytes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let ep = self.env.episode().ok_or_else(|| value_err("reset before step"))?;
        let bytes: Vec<u8> = ep.frame.data.iter().flat_map(|x| x.to_le_bytes()).collect();
        Ok(PyBytes::new(py, &bytes))
    }
}

#[pymethods]
impl PyEnv {
    /// `overrides` holds `KEY=VALUE` strings applied on top of the profile.
    #[new]
    #[pyo3(signature = (profile = "mini", overrides = Vec::new()))]
    fn new(profile: &str, overrides: Vec<String>) -> PyResult<Self> {
        let mut cfg = GameConfig::new(profile.parse::<Profile>().map_err(value_err)?);
        for a in &overrides {
            cfg.apply_assignment(a).map_err(value_err)?;
        }
        Ok(PyEnv { env: Env::new(cfg).map_err(value_err)? })
    }

    #[pyo3(signature = (seed, game = None))]
    fn reset<'py>(&mut self, py: Python<'py>, seed: u64, game: Option<&str>) -> PyResult<Bound<'py, PyBytes>> {
        let kind = game.map(|g| g.parse::<MinigameKind>()).transpose().map_err(value_err)?;
        self.env.reset(seed, kind).map_err(value_err)?;
        self.frame_bytes(py)
    }

    /// Returns `(obs, rewards, dones, done)`.
    #[allow(clippy::type_complexity)]
    fn step<'py>(
        &mut self,
        py: Python<'py>,
        actions: Vec<i64>,
    ) -> PyResult<(Bound<'py, PyBytes>, Vec<f64>, Vec<bool>, bool)> {
        let out = self.env.step(&actions).map_err(value_err)?;
        Ok((self.frame_bytes(py)?, out.rewards, out.dones, out.done))
    }

    fn close(&mut self) {}

    #[getter]
    fn num_agents(&self) -> usize {
        self.env.num_agents()
    }

    #[getter]
    fn obs_len(&self) -> usize {
        self.env.layout().len
    }

    #[getter]
    fn action_dims(&self) -> Vec<(String, usize)> {
        self.env.layout().actions.dims.iter().map(|(n, k)| (n.to_string(), *k)).collect()
    }

    #[getter]
    fn noop_action(&self) -> Vec<i64> {
        self.env.layout().actions.noop()
    }

    #[getter]
    fn tick(&self) -> u32 {
        self.env.episode().map_or(0, |e| e.tick())
    }

    /// Layout manifest: length, components (`name rows cols offset`) and feature columns.
    fn layout(&self) -> String {
        self.env.layout().manifest()
    }
}

#[pymodule]
fn gridmmo_native(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEnv>()?;
    Ok(())
}
