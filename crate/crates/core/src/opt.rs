//! LP assembly for ED/DCOPF, the log-barrier solver, and differentiation of
//! the barrier optimality conditions.

use alloc::vec::Vec;

use crate::grid::GridError;
use crate::linalg::{Matrix, Singular};

mod assemble;
mod barrier;
mod sensitivity;

pub use assemble::{
    assemble_dcopf, assemble_ed, solve_dispatch, DispatchInstance, DispatchSolution, Variant,
};
pub use barrier::{solve_barrier, BarrierSettings, BarrierSolution};
pub use sensitivity::{solution_sensitivity, Jacobian};

/// Evaluation barrier coefficient.
pub const MU_EVAL: f64 = 1e-9;
/// Cap used while training the 24-hour model.
pub const MU_TRAIN_CAP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("LP has no strictly feasible point (phase-one residual {residual:e})")]
    Infeasible { residual: f64 },
    #[error("LP objective is unbounded below")]
    Unbounded,
    #[error("Newton iteration did not converge at mu={mu:e} (decrement {decrement:e}, equality residual {eq_residual:e})")]
    NoConvergence {
        mu: f64,
        decrement: f64,
        eq_residual: f64,
    },
    #[error("KKT system is singular: {0}")]
    DegenerateSensitivity(Singular),
    #[error("DCOPF assembly needs a PTDF matrix")]
    MissingPtdf,
    #[error("parameter {0:?} is not tagged in this LP")]
    UnknownParameter(Param),
    #[error("parameter tag references a coefficient outside the LP")]
    BadTag,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// An LP input that predictions feed into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Param {
    /// Load at a bus, MW.
    Load { bus: usize },
    /// PTDF entry `T[line, bus]`.
    Ptdf { line: usize, bus: usize },
}

/// A coefficient of the LP data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coefficient {
    EqRhs(usize),
    IneqRhs(usize),
    EqMatrix(usize, usize),
    IneqMatrix(usize, usize),
}

/// Partial derivatives of LP coefficients with respect to one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTag {
    pub param: Param,
    pub partials: Vec<(Coefficient, f64)>,
}

/// `min cᵀx  s.t.  E·x = b_eq,  G·x ≤ h`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub eq_matrix: Matrix,
    pub eq_rhs: Vec<f64>,
    pub ineq_matrix: Matrix,
    pub ineq_rhs: Vec<f64>,
    pub params: Vec<ParamTag>,
    /// Starting point that strictly satisfies the inequalities, if known.
    pub start: Option<Vec<f64>>,
}

impl LinearProgram {
    pub fn new(
        cost: Vec<f64>,
        eq_matrix: Matrix,
        eq_rhs: Vec<f64>,
        ineq_matrix: Matrix,
        ineq_rhs: Vec<f64>,
    ) -> Result<Self, OptError> {
        let lp = Self {
            cost,
            eq_matrix,
            eq_rhs,
            ineq_matrix,
            ineq_rhs,
            params: Vec::new(),
            start: None,
        };
        lp.validate()?;
        Ok(lp)
    }

    pub fn var_count(&self) -> usize {
        self.cost.len()
    }

    pub fn eq_count(&self) -> usize {
        self.eq_rhs.len()
    }

    pub fn ineq_count(&self) -> usize {
        self.ineq_rhs.len()
    }

    pub fn tag(&self, param: Param) -> Option<&ParamTag> {
        self.params.iter().find(|t| t.param == param)
    }

    pub fn validate(&self) -> Result<(), OptError> {
        let n = self.var_count();
        let dim = |what, expected, got| {
            if expected == got {
                Ok(())
            } else {
                Err(OptError::Dimension {
                    what,
                    expected,
                    got,
                })
            }
        };
        if n == 0 {
            return Err(OptError::Dimension {
                what: "variables",
                expected: 1,
                got: 0,
            });
        }
        dim("equality columns", n, self.eq_matrix.cols())?;
        dim("equality rows", self.eq_rhs.len(), self.eq_matrix.rows())?;
        dim("inequality columns", n, self.ineq_matrix.cols())?;
        dim("inequality rows", self.ineq_rhs.len(), self.ineq_matrix.rows())?;
        if let Some(start) = &self.start {
            dim("start point", n, start.len())?;
        }
        let (p, m) = (self.eq_count(), self.ineq_count());
        for tag in &self.params {
            for (coef, _) in &tag.partials {
                let ok = match *coef {
                    Coefficient::EqRhs(i) => i < p,
                    Coefficient::IneqRhs(i) => i < m,
                    Coefficient::EqMatrix(i, j) => i < p && j < n,
                    Coefficient::IneqMatrix(i, j) => i < m && j < n,
                };
                if !ok {
                    return Err(OptError::BadTag);
                }
            }
        }
        Ok(())
    }
}
