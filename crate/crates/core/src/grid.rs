//! Network data model, incidence matrices and DC PTDF construction.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{Lu, Matrix, Singular, PIVOT_TOL};

pub mod fixtures;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("invalid topology: {0}")]
    InvalidTopology(&'static str),
    #[error("{what} refers to bus {bus} but the network has {bus_count} buses")]
    UnknownBus {
        what: &'static str,
        bus: usize,
        bus_count: usize,
    },
    #[error("line {line} has non-positive reactance {reactance}")]
    NonPositiveReactance { line: usize, reactance: f64 },
    #[error("line {line} limits [{min}, {max}] do not bracket zero flow")]
    BadLineLimits { line: usize, min: f64, max: f64 },
    #[error("network is disconnected: bus {bus} unreachable from the slack")]
    Disconnected { bus: usize },
    #[error("reduced susceptance matrix is singular: {0}")]
    SingularNetwork(Singular),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("generator {index}: {reason}")]
    InvalidGenerator { index: usize, reason: &'static str },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Series reactance in per unit.
    pub reactance: f64,
    /// Lower flow limit in MW (≤ 0).
    pub limit_min: f64,
    /// Upper flow limit in MW (≥ 0).
    pub limit_max: f64,
}

impl Line {
    pub fn symmetric(from: usize, to: usize, reactance: f64, limit: f64) -> Self {
        Self {
            from,
            to,
            reactance,
            limit_min: -limit,
            limit_max: limit,
        }
    }
}

/// Buses are zero-based. Each generator and the single external tie sit at
/// exactly one bus, which is what makes `M` and `N` one-hot per column.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkTopology {
    pub bus_count: usize,
    pub lines: Vec<Line>,
    pub slack_bus: usize,
    pub gen_bus: Vec<usize>,
    pub ext_bus: usize,
}

impl NetworkTopology {
    /// A single bus holding every generator and the external tie; the ED case.
    pub fn single_bus(gen_count: usize) -> Self {
        Self {
            bus_count: 1,
            lines: Vec::new(),
            slack_bus: 0,
            gen_bus: vec![0; gen_count],
            ext_bus: 0,
        }
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    pub fn gen_count(&self) -> usize {
        self.gen_bus.len()
    }

    pub fn reactances(&self) -> Vec<f64> {
        self.lines.iter().map(|l| l.reactance).collect()
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.bus_count == 0 {
            return Err(GridError::InvalidTopology("no buses"));
        }
        self.check_bus("slack bus", self.slack_bus)?;
        self.check_bus("external tie", self.ext_bus)?;
        for &b in &self.gen_bus {
            self.check_bus("generator", b)?;
        }
        for (i, line) in self.lines.iter().enumerate() {
            self.check_bus("line endpoint", line.from)?;
            self.check_bus("line endpoint", line.to)?;
            if line.from == line.to {
                return Err(GridError::InvalidTopology("line connects a bus to itself"));
            }
            if !(line.reactance > 0.0) {
                return Err(GridError::NonPositiveReactance {
                    line: i,
                    reactance: line.reactance,
                });
            }
            if !(line.limit_min <= 0.0 && 0.0 <= line.limit_max) {
                return Err(GridError::BadLineLimits {
                    line: i,
                    min: line.limit_min,
                    max: line.limit_max,
                });
            }
        }
        self.check_connected()
    }

    fn check_bus(&self, what: &'static str, bus: usize) -> Result<(), GridError> {
        if bus >= self.bus_count {
            Err(GridError::UnknownBus {
                what,
                bus,
                bus_count: self.bus_count,
            })
        } else {
            Ok(())
        }
    }

    fn check_connected(&self) -> Result<(), GridError> {
        let mut seen = vec![false; self.bus_count];
        let mut stack = vec![self.slack_bus];
        seen[self.slack_bus] = true;
        while let Some(b) = stack.pop() {
            for line in &self.lines {
                let next = if line.from == b {
                    line.to
                } else if line.to == b {
                    line.from
                } else {
                    continue;
                };
                if !seen[next] {
                    seen[next] = true;
                    stack.push(next);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(bus) => Err(GridError::Disconnected { bus }),
            None => Ok(()),
        }
    }
}

/// Generator data. Costs are in $/MW and limits in MW.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeneratorFleet {
    pub costs: Vec<f64>,
    pub p_min: Vec<f64>,
    pub p_max: Vec<f64>,
    pub ext_cost: f64,
}

impl GeneratorFleet {
    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let n = self.costs.len();
        for len in [self.p_min.len(), self.p_max.len()] {
            if len != n {
                return Err(GridError::Dimension {
                    expected: n,
                    got: len,
                });
            }
        }
        for i in 0..n {
            if !(self.costs[i] > 0.0) {
                return Err(GridError::InvalidGenerator {
                    index: i,
                    reason: "cost must be positive",
                });
            }
            if !(self.p_min[i] <= self.p_max[i]) {
                return Err(GridError::InvalidGenerator {
                    index: i,
                    reason: "p_min exceeds p_max",
                });
            }
        }
        if !(self.ext_cost > 0.0) {
            return Err(GridError::InvalidGenerator {
                index: n,
                reason: "external cost must be positive",
            });
        }
        Ok(())
    }
}

/// `gen_map` (M, buses × generators), `ext_map` (N, buses × 1) and the
/// signed line-bus incidence (lines × buses, +1 at `from`, −1 at `to`).
#[derive(Debug, Clone, PartialEq)]
pub struct Incidence {
    pub gen_map: Matrix,
    pub ext_map: Matrix,
    pub line_bus: Matrix,
}

pub fn build_incidence(topology: &NetworkTopology) -> Result<Incidence, GridError> {
    let n = topology.bus_count;
    for &b in &topology.gen_bus {
        topology.check_bus("generator", b)?;
    }
    topology.check_bus("external tie", topology.ext_bus)?;
    let mut gen_map = Matrix::zeros(n, topology.gen_count());
    for (g, &b) in topology.gen_bus.iter().enumerate() {
        gen_map[(b, g)] = 1.0;
    }
    let mut ext_map = Matrix::zeros(n, 1);
    ext_map[(topology.ext_bus, 0)] = 1.0;
    let mut line_bus = Matrix::zeros(topology.line_count(), n);
    for (l, line) in topology.lines.iter().enumerate() {
        topology.check_bus("line endpoint", line.from)?;
        topology.check_bus("line endpoint", line.to)?;
        line_bus[(l, line.from)] = 1.0;
        line_bus[(l, line.to)] = -1.0;
    }
    Ok(Incidence {
        gen_map,
        ext_map,
        line_bus,
    })
}

/// Lines × buses sensitivity of line flows to bus injections balanced at
/// the slack. The slack column is zero.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PtdfMatrix {
    pub entries: Matrix,
    pub slack_bus: usize,
}

impl PtdfMatrix {
    pub fn line_count(&self) -> usize {
        self.entries.rows()
    }

    pub fn bus_count(&self) -> usize {
        self.entries.cols()
    }

    #[inline]
    pub fn get(&self, line: usize, bus: usize) -> f64 {
        self.entries[(line, bus)]
    }
}

/// Intermediate products of the PTDF construction, kept for the reactance
/// pullback.
#[derive(Debug, Clone)]
pub(crate) struct PtdfFactors {
    pub ptdf: PtdfMatrix,
    /// `A_r · B_r⁻¹` over non-slack buses (lines × (buses − 1)).
    pub flow_basis: Matrix,
    /// Non-slack bus index for each reduced column.
    pub reduced_buses: Vec<usize>,
    pub line_bus: Matrix,
}

pub fn build_ptdf(topology: &NetworkTopology, reactances: &[f64]) -> Result<PtdfMatrix, GridError> {
    ptdf_factors(topology, reactances).map(|f| f.ptdf)
}

pub(crate) fn ptdf_factors(
    topology: &NetworkTopology,
    reactances: &[f64],
) -> Result<PtdfFactors, GridError> {
    let lines = topology.line_count();
    if reactances.len() != lines {
        return Err(GridError::Dimension {
            expected: lines,
            got: reactances.len(),
        });
    }
    let mut checked = topology.clone();
    for (line, &x) in checked.lines.iter_mut().zip(reactances) {
        line.reactance = x;
    }
    checked.validate()?;

    let n = topology.bus_count;
    let slack = topology.slack_bus;
    let reduced_buses: Vec<usize> = (0..n).filter(|&b| b != slack).collect();
    let nr = reduced_buses.len();
    let line_bus = build_incidence(topology)?.line_bus;

    // A_r: incidence without the slack column
    let mut a_r = Matrix::zeros(lines, nr);
    for l in 0..lines {
        for (j, &b) in reduced_buses.iter().enumerate() {
            a_r[(l, j)] = line_bus[(l, b)];
        }
    }
    // B_r = A_rᵀ diag(1/x) A_r
    let mut b_r = Matrix::zeros(nr, nr);
    for l in 0..lines {
        let y = 1.0 / reactances[l];
        for i in 0..nr {
            let ai = a_r[(l, i)];
            if ai == 0.0 {
                continue;
            }
            for j in 0..nr {
                b_r[(i, j)] += ai * y * a_r[(l, j)];
            }
        }
    }
    let flow_basis = if nr == 0 {
        Matrix::zeros(lines, 0)
    } else {
        let inv = Lu::factor(&b_r, PIVOT_TOL)
            .map_err(GridError::SingularNetwork)?
            .inverse();
        a_r.matmul(&inv)
    };

    let mut entries = Matrix::zeros(lines, n);
    for l in 0..lines {
        let y = 1.0 / reactances[l];
        for (j, &b) in reduced_buses.iter().enumerate() {
            entries[(l, b)] = y * flow_basis[(l, j)];
        }
    }
    Ok(PtdfFactors {
        ptdf: PtdfMatrix {
            entries,
            slack_bus: slack,
        },
        flow_basis,
        reduced_buses,
        line_bus,
    })
}

/// `T · injections`.
pub fn line_flows(ptdf: &PtdfMatrix, injections: &[f64]) -> Result<Vec<f64>, GridError> {
    if injections.len() != ptdf.bus_count() {
        return Err(GridError::Dimension {
            expected: ptdf.bus_count(),
            got: injections.len(),
        });
    }
    Ok(ptdf.entries.mul_vec(injections))
}

/// Net injection per bus `M·p + N·s − d`.
pub fn net_injections(topology: &NetworkTopology, p: &[f64], s: f64, load: &[f64]) -> Vec<f64> {
    let mut inj: Vec<f64> = load.iter().map(|d| -d).collect();
    for (g, &b) in topology.gen_bus.iter().enumerate() {
        inj[b] += p[g];
    }
    inj[topology.ext_bus] += s;
    inj
}
