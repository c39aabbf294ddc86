//! Turning a resolved configuration into a scenario and framed samples.

use dispatchlearn_core::grid::fixtures::{case1, ieee14};
use dispatchlearn_core::regret::{NetworkScenario, Scenario};
use dispatchlearn_core::{CaseKind, ContextSample};

use crate::config::{DataSpec, ResolvedConfig};
use crate::data_io::{frame, load_csv, split_samples, synth_generate, DataError, Dataset};
use crate::gridfile::{self, GridCase, GridFileError};
use crate::bench::ZONES;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Grid(#[from] GridFileError),
    #[error("{0}")]
    Mismatch(String),
}

/// The bundled system for a case: the five-unit system for the ED cases,
/// IEEE 14-bus for the network case.
pub fn default_grid(case: CaseKind) -> GridCase {
    match case {
        CaseKind::Ed1h | CaseKind::Ed24h => case1().into(),
        CaseKind::Dcopf => ieee14().into(),
    }
}

pub fn scenario_for(case: CaseKind, grid: GridCase, regularization: f64) -> Scenario {
    match case {
        CaseKind::Ed1h | CaseKind::Ed24h => Scenario::ed(grid.fleet),
        CaseKind::Dcopf => Scenario {
            fleet: grid.fleet,
            network: Some(NetworkScenario {
                topology: grid.topology,
                zone_buses: grid.zone_buses,
                regularization,
            }),
        },
    }
}

pub fn load_grid(config: &ResolvedConfig) -> Result<GridCase, RunError> {
    match &config.grid_file {
        Some(path) => Ok(gridfile::load(path)?),
        None => Ok(default_grid(config.training.case)),
    }
}

/// The hourly CSV named in the data settings, or synthetic data for `seed`.
pub fn load_dataset(spec: &DataSpec, seed: u64) -> Result<Dataset, RunError> {
    match &spec.csv {
        Some(path) => Ok(load_csv(path)?),
        None => Ok(synth_generate(seed, spec.days, ZONES)),
    }
}

/// Frames and splits a dataset for a case.
pub fn split_for(
    dataset: &Dataset,
    case: CaseKind,
    spec: &DataSpec,
) -> Result<(Vec<ContextSample>, Vec<ContextSample>), RunError> {
    let framed = frame(dataset, case, spec.load_scale);
    Ok(split_samples(&framed, spec.offset, spec.train, spec.test)?)
}

/// Everything a training or evaluation run needs.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub train: Vec<ContextSample>,
    pub test: Vec<ContextSample>,
}

pub fn check_compatible(scenario: &Scenario, dataset: &Dataset, case: CaseKind) -> Result<(), RunError> {
    if let Some(net) = &scenario.network {
        if dataset.zone_count != net.zone_buses.len() {
            return Err(RunError::Mismatch(format!(
                "dataset has {} zones, grid maps {}",
                dataset.zone_count,
                net.zone_buses.len()
            )));
        }
        match dataset.line_count() {
            Some(l) if l == net.topology.line_count() => {}
            Some(l) => {
                return Err(RunError::Mismatch(format!(
                    "dataset has {l} reactance columns, grid has {} lines",
                    net.topology.line_count()
                )))
            }
            None => {
                return Err(RunError::Mismatch(format!(
                    "case {} needs reactance columns",
                    case.name()
                )))
            }
        }
    }
    Ok(())
}

pub fn prepare(config: &ResolvedConfig, dataset: &Dataset) -> Result<Prepared, RunError> {
    let case = config.training.case;
    let scenario = scenario_for(case, load_grid(config)?, config.regularization);
    check_compatible(&scenario, dataset, case)?;
    let (train, test) = split_for(dataset, case, &config.data)?;
    Ok(Prepared { scenario, train, test })
}
