//! ED and DCOPF as [`LinearProgram`]s over `x = (p, s)`.
//!
//! Inequality row layout: `p ≤ p_max` (G rows), `−p ≤ −p_min` (G rows),
//! `−s ≤ 0`, then for DCOPF the upper line rows (L) and lower line rows (L).

use alloc::vec;
use alloc::vec::Vec;

use super::{
    solve_barrier, BarrierSettings, BarrierSolution, Coefficient, LinearProgram, OptError, Param,
    ParamTag,
};
use crate::grid::{line_flows, net_injections, GeneratorFleet, NetworkTopology, PtdfMatrix};
use crate::linalg::{dot, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub enum Variant {
    Ed,
    Dcopf {
        topology: NetworkTopology,
        ptdf: PtdfMatrix,
    },
}

/// One ED or DCOPF problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchInstance {
    pub fleet: GeneratorFleet,
    /// MW per bus. ED only uses the total.
    pub load: Vec<f64>,
    pub variant: Variant,
}

impl DispatchInstance {
    pub fn ed(fleet: GeneratorFleet, load: Vec<f64>) -> Self {
        Self {
            fleet,
            load,
            variant: Variant::Ed,
        }
    }

    pub fn dcopf(fleet: GeneratorFleet, load: Vec<f64>, topology: NetworkTopology, ptdf: PtdfMatrix) -> Self {
        Self {
            fleet,
            load,
            variant: Variant::Dcopf { topology, ptdf },
        }
    }

    /// The same load served without network constraints.
    pub fn as_ed(&self) -> Self {
        Self::ed(self.fleet.clone(), self.load.clone())
    }

    pub fn total_load(&self) -> f64 {
        self.load.iter().sum()
    }

    pub fn gen_count(&self) -> usize {
        self.fleet.len()
    }

    /// Inequality rows contributed by the ED part.
    pub fn ed_row_count(&self) -> usize {
        2 * self.gen_count() + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchSolution {
    /// MW per generator.
    pub p: Vec<f64>,
    /// External supply, MW.
    pub s: f64,
    /// `cᵀp + c_ext·s` in $.
    pub objective: f64,
    /// Line flows `T(Mp + Ns − d)` for DCOPF.
    pub flows: Option<Vec<f64>>,
    pub mu: f64,
    pub multipliers: Vec<f64>,
    pub barrier: BarrierSolution,
}

impl DispatchSolution {
    /// `(p, s)` as one vector, the LP variable order.
    pub fn decision(&self) -> Vec<f64> {
        let mut x = self.p.clone();
        x.push(self.s);
        x
    }
}

fn check_instance(instance: &DispatchInstance) -> Result<(), OptError> {
    instance.fleet.validate()?;
    if let Variant::Dcopf { topology, ptdf } = &instance.variant {
        topology.validate()?;
        for (what, expected, got) in [
            ("load vector", topology.bus_count, instance.load.len()),
            ("generator buses", instance.gen_count(), topology.gen_count()),
            ("PTDF columns", topology.bus_count, ptdf.bus_count()),
            ("PTDF rows", topology.line_count(), ptdf.line_count()),
        ] {
            if expected != got {
                return Err(OptError::Dimension {
                    what,
                    expected,
                    got,
                });
            }
        }
    }
    Ok(())
}

/// `min cᵀp + c_ext·s` s.t. `1ᵀp + s = 1ᵀd`, `p_min ≤ p ≤ p_max`, `s ≥ 0`.
pub fn assemble_ed(instance: &DispatchInstance) -> Result<LinearProgram, OptError> {
    check_instance(instance)?;
    let fleet = &instance.fleet;
    let g = fleet.len();
    let n = g + 1;

    let mut cost = fleet.costs.clone();
    cost.push(fleet.ext_cost);

    let eq = Matrix::from_vec(1, n, vec![1.0; n]);
    let eq_rhs = vec![instance.total_load()];

    let m = 2 * g + 1;
    let mut ineq = Matrix::zeros(m, n);
    let mut h = vec![0.0; m];
    for i in 0..g {
        ineq[(i, i)] = 1.0;
        h[i] = fleet.p_max[i];
        ineq[(g + i, i)] = -1.0;
        h[g + i] = -fleet.p_min[i];
    }
    ineq[(2 * g, g)] = -1.0;

    let params = (0..instance.load.len())
        .map(|bus| ParamTag {
            param: Param::Load { bus },
            partials: vec![(Coefficient::EqRhs(0), 1.0)],
        })
        .collect();

    let mut start: Vec<f64> = fleet
        .p_min
        .iter()
        .zip(&fleet.p_max)
        .map(|(lo, hi)| 0.5 * (lo + hi))
        .collect();
    let committed: f64 = start.iter().sum();
    start.push((instance.total_load() - committed).max(1.0) + 1.0);

    Ok(LinearProgram {
        cost,
        eq_matrix: eq,
        eq_rhs,
        ineq_matrix: ineq,
        ineq_rhs: h,
        params,
        start: Some(start),
    })
}

/// ED plus `p_line_min ≤ T(Mp + Ns − d) ≤ p_line_max`. Loads and every
/// non-slack PTDF entry are tagged as parameters.
pub fn assemble_dcopf(instance: &DispatchInstance) -> Result<LinearProgram, OptError> {
    let (topology, ptdf) = match &instance.variant {
        Variant::Dcopf { topology, ptdf } => (topology, ptdf),
        Variant::Ed => return Err(OptError::MissingPtdf),
    };
    let mut lp = assemble_ed(instance)?;
    let g = instance.gen_count();
    let n = g + 1;
    let lines = topology.line_count();
    let buses = topology.bus_count;
    let base = instance.ed_row_count();
    let up = |l: usize| base + l;
    let lo = |l: usize| base + lines + l;

    let t = &ptdf.entries;
    let td = t.mul_vec(&instance.load);
    let mut ineq = Matrix::zeros(base + 2 * lines, n);
    for r in 0..base {
        ineq.row_mut(r).copy_from_slice(lp.ineq_matrix.row(r));
    }
    let mut h = lp.ineq_rhs.clone();
    h.resize(base + 2 * lines, 0.0);
    for (l, line) in topology.lines.iter().enumerate() {
        for (j, &b) in topology.gen_bus.iter().enumerate() {
            ineq[(up(l), j)] = t[(l, b)];
            ineq[(lo(l), j)] = -t[(l, b)];
        }
        ineq[(up(l), g)] = t[(l, topology.ext_bus)];
        ineq[(lo(l), g)] = -t[(l, topology.ext_bus)];
        h[up(l)] = line.limit_max + td[l];
        h[lo(l)] = -line.limit_min - td[l];
    }

    for tag in &mut lp.params {
        if let Param::Load { bus } = tag.param {
            for l in 0..lines {
                tag.partials.push((Coefficient::IneqRhs(up(l)), t[(l, bus)]));
                tag.partials.push((Coefficient::IneqRhs(lo(l)), -t[(l, bus)]));
            }
        }
    }
    for l in 0..lines {
        for b in (0..buses).filter(|&b| b != ptdf.slack_bus) {
            let mut partials = Vec::new();
            for (j, &gb) in topology.gen_bus.iter().enumerate() {
                if gb == b {
                    partials.push((Coefficient::IneqMatrix(up(l), j), 1.0));
                    partials.push((Coefficient::IneqMatrix(lo(l), j), -1.0));
                }
            }
            if topology.ext_bus == b {
                partials.push((Coefficient::IneqMatrix(up(l), g), 1.0));
                partials.push((Coefficient::IneqMatrix(lo(l), g), -1.0));
            }
            let d = instance.load[b];
            if d != 0.0 {
                partials.push((Coefficient::IneqRhs(up(l)), d));
                partials.push((Coefficient::IneqRhs(lo(l)), -d));
            }
            lp.params.push(ParamTag {
                param: Param::Ptdf { line: l, bus: b },
                partials,
            });
        }
    }
    lp.ineq_matrix = ineq;
    lp.ineq_rhs = h;
    lp.validate()?;
    Ok(lp)
}

/// Assembles and solves an instance; returns the LP for later sensitivity
/// queries.
pub fn solve_dispatch(
    instance: &DispatchInstance,
    settings: &BarrierSettings,
) -> Result<(LinearProgram, DispatchSolution), OptError> {
    let lp = match instance.variant {
        Variant::Ed => assemble_ed(instance)?,
        Variant::Dcopf { .. } => assemble_dcopf(instance)?,
    };
    let g = instance.gen_count();
    let barrier = if pinned_to_minimum(instance) {
        pinned_solution(&lp, settings.mu_target)
    } else {
        solve_barrier(&lp, settings)?
    };
    let p = barrier.x[..g].to_vec();
    let s = barrier.x[g];
    let flows = match &instance.variant {
        Variant::Ed => None,
        Variant::Dcopf { topology, ptdf } => {
            let inj = net_injections(topology, &p, s, &instance.load);
            Some(line_flows(ptdf, &inj)?)
        }
    };
    let sol = DispatchSolution {
        objective: dot(&lp.cost, &barrier.x),
        p,
        s,
        flows,
        mu: barrier.mu,
        multipliers: barrier.multipliers.clone(),
        barrier,
    };
    Ok((lp, sol))
}

/// Load exactly equal to the committed minimum leaves the feasible set a
/// single point with no interior; the barrier method cannot start there.
fn pinned_to_minimum(instance: &DispatchInstance) -> bool {
    let floor: f64 = instance.fleet.p_min.iter().sum();
    let total = instance.total_load();
    (total - floor).abs() <= 1e-12 * (1.0 + total.abs())
}

fn pinned_solution(lp: &LinearProgram, mu: f64) -> BarrierSolution {
    let g = lp.var_count() - 1;
    let mut x: Vec<f64> = (0..g).map(|i| -lp.ineq_rhs[g + i]).collect();
    x.push(0.0);
    let gx = lp.ineq_matrix.mul_vec(&x);
    let slack: Vec<f64> = lp.ineq_rhs.iter().zip(&gx).map(|(h, v)| h - v).collect();
    BarrierSolution {
        objective: dot(&lp.cost, &x),
        multipliers: vec![0.0; slack.len()],
        eq_duals: vec![0.0; lp.eq_count()],
        x,
        slack,
        mu,
        newton_steps: 0,
    }
}
