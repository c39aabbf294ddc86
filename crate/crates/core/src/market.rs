//! Real-time-market settlement and network reporting.

use alloc::vec::Vec;

use crate::grid::{build_ptdf, line_flows, net_injections, Line, NetworkTopology, PtdfMatrix};
use crate::opt::{solve_dispatch, BarrierSettings, DispatchInstance, DispatchSolution, OptError, Variant};
use crate::predictor::ContextSample;
use crate::regret::{ed_regret, ramp_correction, PenaltySetting, PriceBook, RegretError, Scenario};

/// Flows within this many MW of a limit count as at the limit.
pub const LIMIT_TOL: f64 = 1e-6;

/// DCOPF costs within this relative gap of ED count as ED-optimal.
pub const OPTIMAL_REL_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SettlementLine {
    pub up_mw: f64,
    pub down_mw: f64,
    /// $ paid for ramping up.
    pub up_payment: f64,
    /// $ paid for ramping down.
    pub down_payment: f64,
}

impl SettlementLine {
    pub fn total(&self) -> f64 {
        self.up_payment + self.down_payment
    }
}

/// What the demand side pays to correct the predicted schedule.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SettlementReport {
    pub generators: Vec<SettlementLine>,
    pub external: SettlementLine,
    pub total: f64,
}

pub fn rtm_settlement(
    pred: &DispatchSolution,
    truth: &DispatchSolution,
    prices: &PriceBook,
    penalties: &PenaltySetting,
) -> SettlementReport {
    let corr = ramp_correction(pred, truth);
    let generators = (0..corr.r_up.len())
        .map(|i| SettlementLine {
            up_mw: corr.r_up[i],
            down_mw: corr.r_down[i],
            up_payment: penalties.phi_up[i] * prices.mcp[i] * corr.r_up[i],
            down_payment: penalties.phi_down[i] * prices.mcp[i] * corr.r_down[i],
        })
        .collect();
    let external = SettlementLine {
        up_mw: corr.s_up,
        down_mw: corr.s_down,
        up_payment: penalties.phi_up_ext * prices.mcp_ext * corr.s_up,
        down_payment: penalties.phi_down_ext * prices.mcp_ext * corr.s_down,
    };
    SettlementReport {
        generators,
        external,
        total: ed_regret(&corr, prices, penalties).total,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LineState {
    Within,
    AtLimit,
    Over,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LineStatus {
    pub flow: f64,
    /// `|flow|` over the limit on the flow's side.
    pub utilization: f64,
    pub state: LineState,
    /// MW beyond the limit, 0 unless over.
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CongestionReport {
    pub lines: Vec<LineStatus>,
    pub violations: usize,
    pub max_violation: f64,
}

pub fn congestion_report(flows: &[f64], lines: &[Line]) -> CongestionReport {
    let statuses: Vec<LineStatus> = flows
        .iter()
        .zip(lines)
        .map(|(&flow, line)| {
            let limit = if flow >= 0.0 { line.limit_max } else { -line.limit_min };
            let utilization = if limit > 0.0 { flow.abs() / limit } else { 0.0 };
            let violation = (flow - line.limit_max).max(line.limit_min - flow).max(0.0);
            let state = if violation > LIMIT_TOL {
                LineState::Over
            } else if (flow - line.limit_max).abs() <= LIMIT_TOL || (flow - line.limit_min).abs() <= LIMIT_TOL {
                LineState::AtLimit
            } else {
                LineState::Within
            };
            LineStatus {
                flow,
                utilization,
                state,
                violation: if state == LineState::Over { violation } else { 0.0 },
            }
        })
        .collect();
    CongestionReport {
        violations: statuses.iter().filter(|s| s.state == LineState::Over).count(),
        max_violation: statuses.iter().map(|s| s.violation).fold(0.0, f64::max),
        lines: statuses,
    }
}

/// Operating cost of a network dispatch against the unconstrained optimum.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CostComparison {
    pub dcopf_cost: f64,
    pub ed_cost: f64,
    /// `dcopf_cost − ed_cost`.
    pub gap: f64,
    pub relative_gap: f64,
}

impl CostComparison {
    /// Within `rel` of the ED cost.
    pub fn at_parity(&self, rel: f64) -> bool {
        self.relative_gap <= rel
    }
}

pub fn operational_cost_comparison(dcopf: &DispatchSolution, ed: &DispatchSolution) -> CostComparison {
    let gap = dcopf.objective - ed.objective;
    CostComparison {
        dcopf_cost: dcopf.objective,
        ed_cost: ed.objective,
        gap,
        relative_gap: gap / ed.objective.abs().max(1e-12),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FeasibilityCase {
    ViolatingSuboptimal,
    ViolatingOptimal,
    FeasibleSuboptimal,
    FeasibleOptimal,
}

/// Places a predicted dispatch in one of four cases: whether its realized
/// flows (under the true network) break a limit, and whether its cost
/// matches the ED optimum.
pub fn classify(realized_flows: &[f64], lines: &[Line], cost: &CostComparison) -> FeasibilityCase {
    let violating = congestion_report(realized_flows, lines).violations > 0;
    let optimal = cost.relative_gap.abs() <= OPTIMAL_REL_GAP;
    match (violating, optimal) {
        (true, false) => FeasibilityCase::ViolatingSuboptimal,
        (true, true) => FeasibilityCase::ViolatingOptimal,
        (false, false) => FeasibilityCase::FeasibleSuboptimal,
        (false, true) => FeasibilityCase::FeasibleOptimal,
    }
}

/// Flows a dispatch would produce on the real network.
pub fn realized_flows(
    topology: &NetworkTopology,
    true_ptdf: &PtdfMatrix,
    sol: &DispatchSolution,
    true_load: &[f64],
) -> Result<Vec<f64>, OptError> {
    let inj = net_injections(topology, &sol.p, sol.s, true_load);
    Ok(line_flows(true_ptdf, &inj)?)
}

/// Largest `α ∈ [0, alpha_max]` for which the DCOPF with PTDF
/// `T + α·direction` still costs the ED optimum, found by bisection to
/// `alpha_tol`. Assumes the parity set along the ray is an interval.
pub fn gray_region_extent(
    instance: &DispatchInstance,
    direction: &PtdfMatrix,
    alpha_max: f64,
    alpha_tol: f64,
    settings: &BarrierSettings,
) -> Result<f64, OptError> {
    let (topology, base) = match &instance.variant {
        Variant::Dcopf { topology, ptdf } => (topology, ptdf),
        Variant::Ed => return Err(OptError::MissingPtdf),
    };
    let (_, ed) = solve_dispatch(&instance.as_ed(), settings)?;
    let at_parity = |alpha: f64| -> Result<bool, OptError> {
        let mut ptdf = base.clone();
        for (t, d) in ptdf.entries.as_mut_slice().iter_mut().zip(direction.entries.as_slice()) {
            *t += alpha * d;
        }
        let inst = DispatchInstance::dcopf(instance.fleet.clone(), instance.load.clone(), topology.clone(), ptdf);
        let (_, dc) = solve_dispatch(&inst, settings)?;
        Ok(operational_cost_comparison(&dc, &ed).relative_gap <= OPTIMAL_REL_GAP)
    };
    if !at_parity(0.0)? {
        return Ok(0.0);
    }
    if at_parity(alpha_max)? {
        return Ok(alpha_max);
    }
    let (mut lo, mut hi) = (0.0, alpha_max);
    while hi - lo > alpha_tol {
        let mid = 0.5 * (lo + hi);
        if at_parity(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Market outcome of one sample under a forecast.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HourReport {
    pub timestamp: i64,
    /// One settlement per dispatch period of the sample.
    pub settlements: Vec<SettlementReport>,
    pub regret: f64,
    /// Network cases only: flows of the predicted dispatch on the true
    /// network under the true load.
    pub congestion: Option<CongestionReport>,
    /// Network cases only: DCOPF with the predicted PTDF and the true load
    /// against ED with the true load.
    pub cost: Option<CostComparison>,
    pub case: Option<FeasibilityCase>,
    pub reactances_pred: Option<Vec<f64>>,
}

/// Settles one sample and, with a network, checks the predicted dispatch
/// against the true network and compares operating costs.
pub fn simulate_hour(
    scenario: &Scenario,
    load_pred: &[f64],
    reactances_pred: Option<&[f64]>,
    sample: &ContextSample,
    prices: &PriceBook,
    penalties: &PenaltySetting,
    settings: &BarrierSettings,
) -> Result<HourReport, RegretError> {
    let truth = scenario.truth_dispatch(sample, settings)?;
    let out = scenario.output_regret(load_pred, reactances_pred, sample, &truth, prices, penalties, settings, false)?;
    let settlements = out
        .pred_solutions
        .iter()
        .zip(&truth)
        .map(|(p, t)| rtm_settlement(p, t, prices, penalties))
        .collect();
    let (mut congestion, mut cost, mut case) = (None, None, None);
    if let Some(net) = &scenario.network {
        let true_x = sample.true_reactances.as_deref().ok_or(RegretError::MissingImpedance)?;
        let pred_x = reactances_pred.ok_or(RegretError::MissingImpedance)?;
        let true_ptdf = build_ptdf(&net.topology, true_x).map_err(OptError::from)?;
        let true_inst = &scenario.instances(&sample.true_load, Some(true_x))?[0];
        let pred_sol = &out.pred_solutions[0];
        let flows = realized_flows(&net.topology, &true_ptdf, pred_sol, &true_inst.load)?;
        congestion = Some(congestion_report(&flows, &net.topology.lines));

        let mixed = &scenario.instances(&sample.true_load, Some(pred_x))?[0];
        let (_, dc) = solve_dispatch(mixed, settings)?;
        let (_, ed) = solve_dispatch(&true_inst.as_ed(), settings)?;
        let comparison = operational_cost_comparison(&dc, &ed);
        let dc_flows = realized_flows(&net.topology, &true_ptdf, &dc, &true_inst.load)?;
        case = Some(classify(&dc_flows, &net.topology.lines, &comparison));
        cost = Some(comparison);
    }
    Ok(HourReport {
        timestamp: sample.timestamp,
        settlements,
        regret: out.value.total,
        congestion,
        cost,
        case,
        reactances_pred: reactances_pred.map(<[f64]>::to_vec),
    })
}
