//! Implicit differentiation of the barrier central point.
//!
//! At the center, `c + Gᵀz + Eᵀν = 0` and `Ex = b` with `z_i = μ/(h − Gx)_i`.
//! Differentiating both with respect to a parameter `y` gives
//!
//! ```txt
//! [GᵀWG  Eᵀ] [dx]   [−dGᵀz − dEᵀν + GᵀW(dh − dG·x)]
//! [E     0 ] [dν] = [db − dE·x                     ]
//! ```
//!
//! with `W = diag(z/s)`. The matrix is shared by every parameter, so it is
//! factored once and each tagged parameter costs one solve.

use alloc::vec;
use alloc::vec::Vec;

use super::barrier::KKT_PIVOT_TOL;
use super::{BarrierSolution, Coefficient, LinearProgram, OptError, Param};
use crate::linalg::{EquilibratedLu, Matrix};

/// `∂x*/∂y`, one column per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub params: Vec<Param>,
    /// variables × parameters
    pub matrix: Matrix,
}

impl Jacobian {
    pub fn column(&self, param: Param) -> Option<Vec<f64>> {
        self.params
            .iter()
            .position(|p| *p == param)
            .map(|j| self.matrix.column(j))
    }

    /// `vᵀ · J`, the pullback of a gradient on `x` onto the parameters.
    pub fn pullback(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.tr_mul_vec(v)
    }
}

pub fn solution_sensitivity(
    lp: &LinearProgram,
    sol: &BarrierSolution,
    params: &[Param],
) -> Result<Jacobian, OptError> {
    let n = lp.var_count();
    let p = lp.eq_count();
    if sol.x.len() != n {
        return Err(OptError::Dimension {
            what: "solution",
            expected: n,
            got: sol.x.len(),
        });
    }
    let g = &lp.ineq_matrix;
    let weights: Vec<f64> = sol
        .multipliers
        .iter()
        .zip(&sol.slack)
        .map(|(z, s)| z / s)
        .collect();

    let mut kkt = Matrix::zeros(n + p, n + p);
    for (i, w) in weights.iter().enumerate() {
        let row = g.row(i);
        for a in 0..n {
            let ra = row[a];
            if ra == 0.0 {
                continue;
            }
            for b in 0..n {
                kkt[(a, b)] += w * ra * row[b];
            }
        }
    }
    for i in 0..p {
        for j in 0..n {
            let e = lp.eq_matrix[(i, j)];
            kkt[(n + i, j)] = e;
            kkt[(j, n + i)] = e;
        }
    }
    let factor = EquilibratedLu::factor(&kkt, KKT_PIVOT_TOL).map_err(OptError::DegenerateSensitivity)?;

    let mut matrix = Matrix::zeros(n, params.len());
    for (col, &param) in params.iter().enumerate() {
        let tag = lp.tag(param).ok_or(OptError::UnknownParameter(param))?;
        // Perturbation of the inequality slack, dh − dG·x, and the direct
        // stationarity term −dGᵀz − dEᵀν.
        let mut dslack = vec![0.0; lp.ineq_count()];
        let mut rhs = vec![0.0; n + p];
        for &(coef, d) in &tag.partials {
            match coef {
                Coefficient::IneqRhs(i) => dslack[i] += d,
                Coefficient::IneqMatrix(i, j) => {
                    dslack[i] -= d * sol.x[j];
                    rhs[j] -= d * sol.multipliers[i];
                }
                Coefficient::EqRhs(i) => rhs[n + i] += d,
                Coefficient::EqMatrix(i, j) => {
                    rhs[n + i] -= d * sol.x[j];
                    rhs[j] -= d * sol.eq_duals[i];
                }
            }
        }
        let weighted: Vec<f64> = dslack.iter().zip(&weights).map(|(d, w)| d * w).collect();
        let gw = g.tr_mul_vec(&weighted);
        for (r, v) in rhs.iter_mut().zip(&gw) {
            *r += v;
        }
        let dx = factor.solve(&rhs);
        for i in 0..n {
            matrix[(i, col)] = dx[i];
        }
    }
    Ok(Jacobian {
        params: params.to_vec(),
        matrix,
    })
}
