//! Shared run artifacts: step policies, exit statuses and sampled time series.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::grid::{Grid, GridFunction};

/// Time-step control for the explicit integrators.
#[derive(Clone, Debug, PartialEq)]
pub struct StepPolicy {
    /// CFL number in (0, 1].
    pub cfl: f64,
    /// Hard ceiling on dt.
    pub dt_max: f64,
    /// Floor below which a run is aborted as blow-up suspected.
    pub dt_min: f64,
    /// Sup-norm abort threshold.
    pub sup_cap: f64,
    /// Tolerance on |mean| for mean-free preconditions.
    pub mean_tol: f64,
    /// Keep every k-th step as a full snapshot (1 = every step).
    pub snapshot_stride: usize,
    /// Damping rate (per unit time) of the 8th-order grid filter that
    /// absorbs radiation from under-resolved boundary layers. The filter
    /// leaves a window around the origin untouched and is O(h^8) on
    /// resolved modes; 0 disables it.
    pub filter_rate: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            dt_max: 5e-3,
            dt_min: 1e-12,
            sup_cap: 1e6,
            mean_tol: 1e-8,
            snapshot_stride: 1,
            filter_rate: 40.0,
        }
    }
}

impl StepPolicy {
    /// Per-step filter factor for a step of size dt; capped for stability.
    pub fn filter_strength(&self, dt: f64) -> f64 {
        (self.filter_rate * dt).min(0.5)
    }
}

impl StepPolicy {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(crate::Error::InvalidParameter(format!(
                "cfl must be in (0,1], got {}",
                self.cfl
            )));
        }
        if !(self.dt_min > 0.0 && self.dt_min < self.dt_max) {
            return Err(crate::Error::InvalidParameter(format!(
                "need 0 < dt_min < dt_max (got {} / {})",
                self.dt_min, self.dt_max
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(crate::Error::InvalidParameter(
                "snapshot_stride must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// How a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RunStatus {
    Completed,
    BlowupSuspected,
    NumericalFailure,
    ShiftEscape,
}

/// Named scalar time series sampled at every accepted step.
#[derive(Clone, Debug, Default)]
pub struct SeriesBundle {
    pub t: Vec<f64>,
    pub columns: BTreeMap<String, Vec<f64>>,
}

impl SeriesBundle {
    pub fn push(&mut self, t: f64, row: &[(&str, f64)]) {
        self.t.push(t);
        for (name, v) in row {
            self.columns
                .entry((*name).to_string())
                .or_default()
                .push(*v);
        }
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.columns.get(name).map(|v| v.as_slice())
    }

    /// (t, column) pairs for a named series.
    pub fn samples(&self, name: &str) -> Vec<(f64, f64)> {
        match self.columns.get(name) {
            Some(col) => self.t.iter().copied().zip(col.iter().copied()).collect(),
            None => Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Evolution record of a scalar field: snapshots (with tendencies, so that
/// time interpolation between steps is fourth order) plus diagnostics.
#[derive(Clone, Debug)]
pub struct FieldTrajectory {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub tendencies: Vec<Vec<f64>>,
    pub series: SeriesBundle,
    pub status: RunStatus,
}

impl FieldTrajectory {
    pub fn state_at(&self, k: usize) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: self.states[k].clone(),
        }
    }

    pub fn last_state(&self) -> GridFunction {
        self.state_at(self.states.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the last stored time <= t.
    pub fn index_at(&self, t: f64) -> usize {
        match self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
        {
            Ok(k) => k,
            Err(k) => k.saturating_sub(1),
        }
    }
}
