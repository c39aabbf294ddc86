//! Real-time-market regret of a predicted dispatch and its gradient.
//!
//! The dispatch computed from predicted parameters is corrected to the one
//! computed from realized parameters. Ramping a unit up costs `φ⁺·MCP` per
//! MW, ramping it down costs `φ⁻·MCP`; the sum over units and the external
//! tie is the regret. Network cases add the absolute zone-load error.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{GeneratorFleet, NetworkTopology};
use crate::linalg::Matrix;
use crate::opt::{
    solution_sensitivity, solve_dispatch, BarrierSettings, DispatchInstance, DispatchSolution, OptError, Param,
};
use crate::predictor::{clamp_loads, impedance_to_ptdf, ContextSample, ModelGradients, PredictionModel, PredictorError};

/// Differences at or below this are treated as zero by the indicator
/// sub-gradients.
pub const KINK_TOL: f64 = 1e-9;

/// Smallest load handed to the solver.
pub const LOAD_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegretError {
    #[error(transparent)]
    Opt(#[from] OptError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error("{what}: expected length {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("network scenario needs an impedance model and true reactances")]
    MissingImpedance,
}

/// Market clearing prices; bid and offer prices follow from the penalties.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PriceBook {
    pub mcp: Vec<f64>,
    pub mcp_ext: f64,
}

impl PriceBook {
    /// MCP equal to the generator operating costs.
    pub fn from_fleet(fleet: &GeneratorFleet) -> Self {
        Self {
            mcp: fleet.costs.clone(),
            mcp_ext: fleet.ext_cost,
        }
    }

    /// `φ⁺·MCP`, paid for ramping up.
    pub fn bid_prices(&self, penalties: &PenaltySetting) -> Vec<f64> {
        self.mcp.iter().zip(&penalties.phi_up).map(|(m, f)| m * f).collect()
    }

    /// `MCP/φ⁻`, received when ramping down.
    pub fn offer_prices(&self, penalties: &PenaltySetting) -> Vec<f64> {
        self.mcp.iter().zip(&penalties.phi_down).map(|(m, f)| m / f).collect()
    }

    pub fn mean_mcp(&self) -> f64 {
        if self.mcp.is_empty() {
            return self.mcp_ext;
        }
        self.mcp.iter().sum::<f64>() / self.mcp.len() as f64
    }
}

/// Ramp penalty factors relative to MCP.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PenaltySetting {
    pub phi_up: Vec<f64>,
    pub phi_down: Vec<f64>,
    pub phi_up_ext: f64,
    pub phi_down_ext: f64,
}

/// `(φ⁻, φ⁺)` per generator for the five case-1 settings.
pub const TABLE1: [[(f64, f64); 5]; 5] = [
    [(1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0)],
    [(1.05, 1.1), (1.1, 1.2), (1.15, 1.25), (1.2, 1.3), (1.25, 1.35)],
    [(1.1, 1.2), (1.15, 1.3), (1.2, 1.35), (1.25, 1.4), (1.3, 1.45)],
    [(1.2, 1.35), (1.25, 1.45), (1.3, 1.55), (1.35, 1.65), (1.4, 1.75)],
    [(1.35, 1.65), (1.4, 1.75), (1.45, 1.85), (1.5, 1.95), (1.55, 2.05)],
];

/// Uniform `(φ⁻, φ⁺)` for the five network-case settings.
pub const CASE2: [(f64, f64); 5] = [(1.0, 1.0), (1.02, 1.06), (1.05, 1.1), (1.08, 1.15), (1.12, 1.22)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PenaltyFamily {
    Table1,
    Case2,
}

impl PenaltySetting {
    /// The single place where `(φ⁻, φ⁺)` pairs become down/up factors:
    /// `φ⁺` prices ramping up (load was underestimated), `φ⁻` ramping down.
    pub fn from_minus_plus(pairs: &[(f64, f64)], ext: (f64, f64)) -> Self {
        Self {
            phi_down: pairs.iter().map(|p| p.0).collect(),
            phi_up: pairs.iter().map(|p| p.1).collect(),
            phi_down_ext: ext.0,
            phi_up_ext: ext.1,
        }
    }

    pub fn uniform(gens: usize, phi_down: f64, phi_up: f64) -> Self {
        Self::from_minus_plus(&vec![(phi_down, phi_up); gens], (phi_down, phi_up))
    }

    /// Setting `k` (1-based) of a preset family for `gens` generators.
    /// `table1` factors are per generator and need exactly five units; the
    /// external tie takes the last unit's factors.
    pub fn preset(family: PenaltyFamily, k: usize, gens: usize) -> Option<Self> {
        if !(1..=5).contains(&k) {
            return None;
        }
        match family {
            PenaltyFamily::Table1 => {
                let row = &TABLE1[k - 1];
                (gens == row.len()).then(|| Self::from_minus_plus(row, row[row.len() - 1]))
            }
            PenaltyFamily::Case2 => {
                let (down, up) = CASE2[k - 1];
                Some(Self::uniform(gens, down, up))
            }
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            phi_up: self.phi_up.iter().map(|v| v * k).collect(),
            phi_down: self.phi_down.iter().map(|v| v * k).collect(),
            phi_up_ext: self.phi_up_ext * k,
            phi_down_ext: self.phi_down_ext * k,
        }
    }

    /// `φ⁺ ≥ φ⁻ ≥ 1` elementwise.
    pub fn is_ordered(&self) -> bool {
        self.phi_up
            .iter()
            .zip(&self.phi_down)
            .chain(core::iter::once((&self.phi_up_ext, &self.phi_down_ext)))
            .all(|(u, d)| u >= d && *d >= 1.0)
    }
}

/// Real-time corrections from the predicted to the realized dispatch.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RampCorrection {
    pub r_up: Vec<f64>,
    pub r_down: Vec<f64>,
    pub s_up: f64,
    pub s_down: f64,
    /// Zone load over-forecast, network cases only.
    pub d_over: Vec<f64>,
    pub d_under: Vec<f64>,
}

fn pos(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn split(pred: &[f64], truth: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let over = pred.iter().zip(truth).map(|(a, b)| pos(a - b)).collect();
    let under = pred.iter().zip(truth).map(|(a, b)| pos(b - a)).collect();
    (over, under)
}

impl RampCorrection {
    pub fn from_dispatch(p_pred: &[f64], s_pred: f64, p_true: &[f64], s_true: f64) -> Self {
        let (r_down, r_up) = split(p_pred, p_true);
        Self {
            r_up,
            r_down,
            s_up: pos(s_true - s_pred),
            s_down: pos(s_pred - s_true),
            d_over: Vec::new(),
            d_under: Vec::new(),
        }
    }

    pub fn with_load_deviation(mut self, load_pred: &[f64], load_true: &[f64]) -> Self {
        let (over, under) = split(load_pred, load_true);
        self.d_over = over;
        self.d_under = under;
        self
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let s = |v: &[f64]| v.iter().map(|x| x * alpha).collect();
        Self {
            r_up: s(&self.r_up),
            r_down: s(&self.r_down),
            s_up: self.s_up * alpha,
            s_down: self.s_down * alpha,
            d_over: self.d_over.clone(),
            d_under: self.d_under.clone(),
        }
    }
}

pub fn ramp_correction(pred: &DispatchSolution, truth: &DispatchSolution) -> RampCorrection {
    RampCorrection::from_dispatch(&pred.p, pred.s, &truth.p, truth.s)
}

/// Priced regret in $.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegretValue {
    pub total: f64,
    /// Generator ramp-up payments.
    pub up_cost: f64,
    /// Generator ramp-down payments.
    pub down_cost: f64,
    /// External tie corrections, both directions.
    pub ext_cost: f64,
    pub regularization: f64,
}

impl RegretValue {
    fn from_parts(up_cost: f64, down_cost: f64, ext_cost: f64, regularization: f64) -> Self {
        Self {
            total: up_cost + down_cost + ext_cost + regularization,
            up_cost,
            down_cost,
            ext_cost,
            regularization,
        }
    }

    pub fn add(&self, other: &RegretValue) -> Self {
        Self::from_parts(
            self.up_cost + other.up_cost,
            self.down_cost + other.down_cost,
            self.ext_cost + other.ext_cost,
            self.regularization + other.regularization,
        )
    }
}

fn weighted(a: &[f64], b: &[f64], r: &[f64]) -> f64 {
    a.iter().zip(b).zip(r).map(|((x, y), z)| x * y * z).sum()
}

pub fn ed_regret(corr: &RampCorrection, prices: &PriceBook, penalties: &PenaltySetting) -> RegretValue {
    let up = weighted(&penalties.phi_up, &prices.mcp, &corr.r_up);
    let down = weighted(&penalties.phi_down, &prices.mcp, &corr.r_down);
    let ext = penalties.phi_up_ext * prices.mcp_ext * corr.s_up + penalties.phi_down_ext * prices.mcp_ext * corr.s_down;
    RegretValue::from_parts(up, down, ext, 0.0)
}

/// ED regret plus `weight·(1ᵀd_over + 1ᵀd_under)` over zone loads.
pub fn dcopf_regret(
    corr: &RampCorrection,
    load_pred: &[f64],
    load_true: &[f64],
    prices: &PriceBook,
    penalties: &PenaltySetting,
    weight: f64,
) -> RegretValue {
    let ed = ed_regret(corr, prices, penalties);
    let deviation: f64 = load_pred.iter().zip(load_true).map(|(a, b)| (a - b).abs()).sum();
    RegretValue::from_parts(ed.up_cost, ed.down_cost, ed.ext_cost, weight * deviation)
}

fn indicator(x: f64) -> f64 {
    if x > KINK_TOL {
        1.0
    } else {
        0.0
    }
}

/// `∂L/∂(p_pred, s_pred)` in LP variable order.
pub fn dispatch_gradient(
    p_pred: &[f64],
    s_pred: f64,
    p_true: &[f64],
    s_true: f64,
    prices: &PriceBook,
    penalties: &PenaltySetting,
) -> Vec<f64> {
    let mut g: Vec<f64> = (0..p_pred.len())
        .map(|i| {
            let diff = p_pred[i] - p_true[i];
            prices.mcp[i] * (penalties.phi_down[i] * indicator(diff) - penalties.phi_up[i] * indicator(-diff))
        })
        .collect();
    let diff = s_pred - s_true;
    g.push(prices.mcp_ext * (penalties.phi_down_ext * indicator(diff) - penalties.phi_up_ext * indicator(-diff)));
    g
}

/// `∂(1ᵀd_over + 1ᵀd_under)/∂load_pred`.
pub fn load_deviation_gradient(load_pred: &[f64], load_true: &[f64]) -> Vec<f64> {
    load_pred
        .iter()
        .zip(load_true)
        .map(|(a, b)| indicator(a - b) - indicator(b - a))
        .collect()
}

/// Network data for DCOPF scenarios.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkScenario {
    pub topology: NetworkTopology,
    /// Bus of each load zone.
    pub zone_buses: Vec<usize>,
    /// Weight on the zone-load deviation term, $/MW.
    pub regularization: f64,
}

/// What one prediction is dispatched against: a fleet, optionally a network.
///
/// Without a network every model output is the total load of one period,
/// each dispatched by its own ED. With a network the outputs are zone
/// loads of a single DCOPF period.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scenario {
    pub fleet: GeneratorFleet,
    pub network: Option<NetworkScenario>,
}

/// Regret of one sample and its gradient with respect to the raw model
/// outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputRegret {
    pub value: RegretValue,
    /// Regret of each dispatch period; `value` is their sum.
    pub period_values: Vec<RegretValue>,
    pub corrections: Vec<RampCorrection>,
    pub load_pred: Vec<f64>,
    pub reactances_pred: Option<Vec<f64>>,
    /// `∂L/∂(load outputs)`.
    pub load_grad: Vec<f64>,
    /// `∂L/∂(reactance outputs)`.
    pub reactance_grad: Option<Vec<f64>>,
    pub pred_solutions: Vec<DispatchSolution>,
}

/// Regret and gradients with respect to model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRegret {
    pub output: OutputRegret,
    pub load_model: ModelGradients,
    pub impedance_model: Option<ModelGradients>,
}

impl Scenario {
    pub fn ed(fleet: GeneratorFleet) -> Self {
        Self { fleet, network: None }
    }

    fn bus_loads(&self, net: &NetworkScenario, zones: &[f64]) -> Vec<f64> {
        let mut load = vec![0.0; net.topology.bus_count];
        for (z, &b) in net.zone_buses.iter().enumerate() {
            load[b] += zones[z];
        }
        load
    }

    /// Dispatch instances for a load vector (and reactances in network cases).
    pub fn instances(&self, loads: &[f64], reactances: Option<&[f64]>) -> Result<Vec<DispatchInstance>, RegretError> {
        let mut loads = loads.to_vec();
        clamp_loads(&mut loads, LOAD_FLOOR);
        match &self.network {
            None => Ok(loads
                .iter()
                .map(|d| DispatchInstance::ed(self.fleet.clone(), vec![*d]))
                .collect()),
            Some(net) => {
                if loads.len() != net.zone_buses.len() {
                    return Err(RegretError::Dimension {
                        what: "zone loads",
                        expected: net.zone_buses.len(),
                        got: loads.len(),
                    });
                }
                let x = reactances.ok_or(RegretError::MissingImpedance)?;
                let ptdf = impedance_to_ptdf(x, &net.topology).map_err(OptError::from)?.into_ptdf();
                Ok(vec![DispatchInstance::dcopf(
                    self.fleet.clone(),
                    self.bus_loads(net, &loads),
                    net.topology.clone(),
                    ptdf,
                )])
            }
        }
    }

    /// Dispatch under the realized parameters of a sample.
    pub fn truth_dispatch(
        &self,
        sample: &ContextSample,
        settings: &BarrierSettings,
    ) -> Result<Vec<DispatchSolution>, RegretError> {
        self.instances(&sample.true_load, sample.true_reactances.as_deref())?
            .iter()
            .map(|inst| Ok(solve_dispatch(inst, settings)?.1))
            .collect()
    }

    /// Regret of predicted outputs against precomputed truth solutions,
    /// with `∂L/∂outputs` when `with_gradient` is set.
    pub fn output_regret(
        &self,
        load_pred: &[f64],
        reactances_pred: Option<&[f64]>,
        sample: &ContextSample,
        truth: &[DispatchSolution],
        prices: &PriceBook,
        penalties: &PenaltySetting,
        settings: &BarrierSettings,
        with_gradient: bool,
    ) -> Result<OutputRegret, RegretError> {
        if load_pred.len() != sample.true_load.len() {
            return Err(RegretError::Dimension {
                what: "load prediction",
                expected: sample.true_load.len(),
                got: load_pred.len(),
            });
        }
        let instances = self.instances(load_pred, reactances_pred)?;
        let mut value = RegretValue::default();
        let mut corrections = Vec::with_capacity(instances.len());
        let mut period_values = Vec::with_capacity(instances.len());
        let mut pred_solutions = Vec::with_capacity(instances.len());
        let mut load_grad = vec![0.0; load_pred.len()];
        let mut reactance_grad = None;

        for (k, (inst, true_sol)) in instances.iter().zip(truth).enumerate() {
            let (lp, sol) = solve_dispatch(inst, settings)?;
            let mut corr = ramp_correction(&sol, true_sol);
            let v = match &self.network {
                None => ed_regret(&corr, prices, penalties),
                Some(net) => {
                    corr = corr.with_load_deviation(load_pred, &sample.true_load);
                    dcopf_regret(&corr, load_pred, &sample.true_load, prices, penalties, net.regularization)
                }
            };
            value = value.add(&v);
            period_values.push(v);
            corrections.push(corr);

            if with_gradient {
                let dx = dispatch_gradient(&sol.p, sol.s, &true_sol.p, true_sol.s, prices, penalties);
                match &self.network {
                    None => {
                        let jac = solution_sensitivity(&lp, &sol.barrier, &[Param::Load { bus: 0 }])?;
                        load_grad[k] = jac.pullback(&dx)[0];
                    }
                    Some(net) => {
                        let (lg, rg) = self.network_gradient(net, &lp, &sol, &dx, load_pred, sample, reactances_pred)?;
                        load_grad = lg;
                        reactance_grad = Some(rg);
                    }
                }
            }
            pred_solutions.push(sol);
        }
        Ok(OutputRegret {
            value,
            period_values,
            corrections,
            load_pred: load_pred.to_vec(),
            reactances_pred: reactances_pred.map(<[f64]>::to_vec),
            load_grad,
            reactance_grad,
            pred_solutions,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn network_gradient(
        &self,
        net: &NetworkScenario,
        lp: &crate::opt::LinearProgram,
        sol: &DispatchSolution,
        dx: &[f64],
        load_pred: &[f64],
        sample: &ContextSample,
        reactances_pred: Option<&[f64]>,
    ) -> Result<(Vec<f64>, Vec<f64>), RegretError> {
        let topology = &net.topology;
        let buses = topology.bus_count;
        let lines = topology.line_count();
        let slack = topology.slack_bus;
        let mut params: Vec<Param> = (0..buses).map(|bus| Param::Load { bus }).collect();
        for line in 0..lines {
            for bus in (0..buses).filter(|&b| b != slack) {
                params.push(Param::Ptdf { line, bus });
            }
        }
        let jac = solution_sensitivity(lp, &sol.barrier, &params)?;
        let grads = jac.pullback(dx);

        let reg = load_deviation_gradient(load_pred, &sample.true_load);
        let load_grad: Vec<f64> = net
            .zone_buses
            .iter()
            .zip(&reg)
            .map(|(&b, r)| grads[b] + net.regularization * r)
            .collect();

        let mut grad_t = Matrix::zeros(lines, buses);
        for (param, g) in params.iter().zip(&grads).skip(buses) {
            if let Param::Ptdf { line, bus } = *param {
                grad_t[(line, bus)] = *g;
            }
        }
        let x = reactances_pred.ok_or(RegretError::MissingImpedance)?;
        let pull = impedance_to_ptdf(x, topology).map_err(OptError::from)?;
        let reactance_grad = pull.reactance_gradient(&grad_t).map_err(OptError::from)?;
        Ok((load_grad, reactance_grad))
    }
}

/// Regret of a sample under the given models and `∂L/∂θ` for each model:
/// the dispatch gradient is pulled back through the barrier sensitivities,
/// the PTDF construction and the networks.
#[allow(clippy::too_many_arguments)]
pub fn regret_gradient(
    scenario: &Scenario,
    load_model: &PredictionModel,
    impedance_model: Option<&PredictionModel>,
    sample: &ContextSample,
    truth: &[DispatchSolution],
    prices: &PriceBook,
    penalties: &PenaltySetting,
    settings: &BarrierSettings,
) -> Result<ModelRegret, RegretError> {
    let load_pred = load_model.forward(&sample.features)?;
    let reactances = match (&scenario.network, impedance_model) {
        (None, _) => None,
        (Some(_), Some(m)) => Some(m.forward(&sample.features)?),
        (Some(_), None) => return Err(RegretError::MissingImpedance),
    };
    let output = scenario.output_regret(
        &load_pred,
        reactances.as_deref(),
        sample,
        truth,
        prices,
        penalties,
        settings,
        true,
    )?;
    let load_grads = load_model.backward(&sample.features, &output.load_grad)?;
    let impedance_grads = match (impedance_model, &output.reactance_grad) {
        (Some(m), Some(g)) => Some(m.backward(&sample.features, g)?),
        _ => None,
    };
    Ok(ModelRegret {
        output,
        load_model: load_grads,
        impedance_model: impedance_grads,
    })
}
