//! Path-following log-barrier method.
//!
//! Each stage centers `cᵀx/μ − Σ ln(h − Gx)` subject to `Ex = b` with damped
//! Newton steps, then shrinks μ geometrically. A phase-one problem supplies
//! a strictly interior start when the LP does not come with one.

use alloc::vec;
use alloc::vec::Vec;

use super::{LinearProgram, OptError};
use crate::linalg::{dot, norm_inf, EquilibratedLu, Lu, Matrix, PIVOT_TOL};
use crate::math::sqrt;

/// Pivot threshold for equilibrated KKT factorizations.
pub(crate) const KKT_PIVOT_TOL: f64 = 1e-14;

const MAX_NEWTON_PER_STAGE: usize = 200;
const UNBOUNDED_NORM: f64 = 1e12;
// Inside the quadratic region the decrement halves every step unless the
// gradient is dominated by cancellation error (c/μ against Σ g/s).
const STALL_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSettings {
    /// Barrier coefficient at termination.
    pub mu_target: f64,
    /// Final centering tolerance on half the squared Newton decrement.
    pub tol: f64,
    pub mu_initial: f64,
    /// Geometric reduction of μ between stages.
    pub mu_factor: f64,
}

impl Default for BarrierSettings {
    fn default() -> Self {
        Self {
            mu_target: super::MU_EVAL,
            tol: 1e-14,
            mu_initial: 1.0,
            mu_factor: 0.2,
        }
    }
}

impl BarrierSettings {
    pub fn with_mu(mu_target: f64) -> Self {
        Self {
            mu_target,
            ..Self::default()
        }
    }
}

/// The barrier central point at `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSolution {
    pub x: Vec<f64>,
    /// `h − Gx`, all strictly positive.
    pub slack: Vec<f64>,
    /// Inequality multipliers `z_i = μ / slack_i`.
    pub multipliers: Vec<f64>,
    /// Equality multipliers.
    pub eq_duals: Vec<f64>,
    pub mu: f64,
    pub objective: f64,
    pub newton_steps: usize,
}

impl BarrierSolution {
    /// `Σ z_i · slack_i`, equal to `μ·m` on the central path.
    pub fn complementarity(&self) -> f64 {
        dot(&self.multipliers, &self.slack)
    }
}

struct Problem<'a> {
    cost: &'a [f64],
    eq: &'a Matrix,
    eq_rhs: &'a [f64],
    ineq: &'a Matrix,
    ineq_rhs: &'a [f64],
}

struct Centered {
    eq_scaled_duals: Vec<f64>,
    steps: usize,
}

impl Problem<'_> {
    fn slack(&self, x: &[f64]) -> Vec<f64> {
        let gx = self.ineq.mul_vec(x);
        self.ineq_rhs.iter().zip(&gx).map(|(h, g)| h - g).collect()
    }

    fn eq_residual(&self, x: &[f64]) -> Vec<f64> {
        let ex = self.eq.mul_vec(x);
        self.eq_rhs.iter().zip(&ex).map(|(b, e)| b - e).collect()
    }

    fn eq_tolerance(&self) -> f64 {
        1e-9 * (1.0 + norm_inf(self.eq_rhs))
    }

    /// Damped Newton centering at fixed μ. `x` must strictly satisfy the
    /// inequalities; the equality residual is driven to zero along the way.
    fn center(
        &self,
        x: &mut [f64],
        mu: f64,
        tol: f64,
        mut stop: impl FnMut(&[f64]) -> bool,
    ) -> Result<Centered, OptError> {
        let n = x.len();
        let p = self.eq_rhs.len();
        let mut last_dec = f64::INFINITY;
        let mut best_dec = f64::INFINITY;
        let mut stalls = 0;
        let mut duals = vec![0.0; p];
        for step in 0..MAX_NEWTON_PER_STAGE {
            let slack = self.slack(x);
            debug_assert!(slack.iter().all(|s| *s > 0.0));
            let inv_s: Vec<f64> = slack.iter().map(|s| 1.0 / s).collect();
            let mut grad = self.ineq.tr_mul_vec(&inv_s);
            for (g, c) in grad.iter_mut().zip(self.cost) {
                *g += c / mu;
            }
            let mut kkt = Matrix::zeros(n + p, n + p);
            for (i, s_inv) in inv_s.iter().enumerate() {
                let w = s_inv * s_inv;
                let row = self.ineq.row(i);
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
                    let e = self.eq[(i, j)];
                    kkt[(n + i, j)] = e;
                    kkt[(j, n + i)] = e;
                }
            }
            let eq_res = self.eq_residual(x);
            let mut rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
            rhs.extend_from_slice(&eq_res);
            let sol = EquilibratedLu::factor(&kkt, KKT_PIVOT_TOL)
                .map_err(OptError::DegenerateSensitivity)?
                .solve(&rhs);
            let dx = &sol[..n];
            duals.copy_from_slice(&sol[n..]);

            let hdx = {
                let gdx = self.ineq.mul_vec(dx);
                gdx.iter()
                    .zip(&inv_s)
                    .map(|(g, si)| (g * si) * (g * si))
                    .sum::<f64>()
            };
            let decrement = sqrt(hdx.max(0.0));
            let eq_norm = norm_inf(&eq_res);
            let feasible_eq = eq_norm <= self.eq_tolerance();
            if feasible_eq && 0.5 * hdx <= tol {
                return Ok(Centered {
                    eq_scaled_duals: duals,
                    steps: step,
                });
            }
            // Roundoff floor: accept a tiny decrement that stopped shrinking.
            if feasible_eq && 0.5 * hdx <= STALL_FLOOR {
                if decrement >= 0.5 * best_dec {
                    stalls += 1;
                    if stalls >= 3 {
                        return Ok(Centered {
                            eq_scaled_duals: duals,
                            steps: step,
                        });
                    }
                } else {
                    stalls = 0;
                }
            }
            best_dec = best_dec.min(decrement);
            last_dec = decrement;

            let mut t = if decrement > 0.25 {
                1.0 / (1.0 + decrement)
            } else {
                1.0
            };
            if !feasible_eq {
                t = 1.0;
            }
            let gdx = self.ineq.mul_vec(dx);
            for (s, g) in slack.iter().zip(&gdx) {
                if *g > 0.0 {
                    t = t.min(0.99 * s / g);
                }
            }
            for (xi, di) in x.iter_mut().zip(dx) {
                *xi += t * di;
            }
            if norm_inf(x) > UNBOUNDED_NORM {
                return Err(OptError::Unbounded);
            }
            if stop(x) {
                return Ok(Centered {
                    eq_scaled_duals: duals,
                    steps: step + 1,
                });
            }
        }
        let eq_residual = norm_inf(&self.eq_residual(x));
        Err(OptError::NoConvergence {
            mu,
            decrement: last_dec,
            eq_residual,
        })
    }
}

fn mu_stages(settings: &BarrierSettings) -> impl Iterator<Item = f64> + '_ {
    let mut mu = settings.mu_initial.max(settings.mu_target);
    let mut done = false;
    core::iter::from_fn(move || {
        if done {
            return None;
        }
        let current = mu;
        if current <= settings.mu_target {
            done = true;
            return Some(settings.mu_target);
        }
        mu = (mu * settings.mu_factor).max(settings.mu_target);
        Some(current)
    })
}

/// Least-norm correction of `x` onto `{x : Ex = b}`.
fn project_onto_equalities(problem: &Problem<'_>, x: &mut [f64]) -> Result<(), OptError> {
    let p = problem.eq_rhs.len();
    if p == 0 {
        return Ok(());
    }
    let e = problem.eq;
    let eet = e.matmul(&e.transpose());
    let lu = Lu::factor(&eet, PIVOT_TOL).map_err(OptError::DegenerateSensitivity)?;
    let r = problem.eq_residual(x);
    let y = lu.solve(&r);
    let corr = e.tr_mul_vec(&y);
    x.iter_mut().zip(&corr).for_each(|(xi, ci)| *xi += ci);
    Ok(())
}

/// Finds a strictly interior point by minimizing the worst violation `t`
/// over `Gx − t ≤ h, Ex = b, t ≥ −1`.
fn phase_one(problem: &Problem<'_>, start: &[f64], settings: &BarrierSettings) -> Result<Vec<f64>, OptError> {
    let n = start.len();
    let m = problem.ineq_rhs.len();
    let p = problem.eq_rhs.len();
    let mut x0 = start.to_vec();
    project_onto_equalities(problem, &mut x0)?;
    let worst = problem
        .slack(&x0)
        .iter()
        .fold(f64::NEG_INFINITY, |w, s| w.max(-s));
    let mut z = x0.clone();
    z.push(worst.max(-0.5) + 1.0);

    let mut cost = vec![0.0; n + 1];
    cost[n] = 1.0;
    let mut eq = Matrix::zeros(p, n + 1);
    for i in 0..p {
        eq.row_mut(i)[..n].copy_from_slice(problem.eq.row(i));
    }
    let mut ineq = Matrix::zeros(m + 1, n + 1);
    for i in 0..m {
        ineq.row_mut(i)[..n].copy_from_slice(problem.ineq.row(i));
        ineq[(i, n)] = -1.0;
    }
    ineq[(m, n)] = -1.0;
    let mut ineq_rhs = problem.ineq_rhs.to_vec();
    ineq_rhs.push(1.0);
    let aux = Problem {
        cost: &cost,
        eq: &eq,
        eq_rhs: problem.eq_rhs,
        ineq: &ineq,
        ineq_rhs: &ineq_rhs,
    };
    let tol = aux.eq_tolerance();
    let phase_settings = BarrierSettings {
        mu_target: 1e-10,
        ..*settings
    };
    let strictly_inside = |z: &[f64]| z[n] < 0.0 && norm_inf(&aux.eq_residual(z)) <= tol;
    for mu in mu_stages(&phase_settings) {
        aux.center(&mut z, mu, 1e-8, |z| strictly_inside(z))?;
        if strictly_inside(&z) {
            z.truncate(n);
            return Ok(z);
        }
    }
    Err(OptError::Infeasible {
        residual: z[n].max(0.0),
    })
}

/// Solves the barrier problem at `settings.mu_target` by path following.
pub fn solve_barrier(lp: &LinearProgram, settings: &BarrierSettings) -> Result<BarrierSolution, OptError> {
    lp.validate()?;
    let problem = Problem {
        cost: &lp.cost,
        eq: &lp.eq_matrix,
        eq_rhs: &lp.eq_rhs,
        ineq: &lp.ineq_matrix,
        ineq_rhs: &lp.ineq_rhs,
    };
    let n = lp.var_count();
    let start = lp.start.clone().unwrap_or_else(|| vec![0.0; n]);
    let interior = problem.slack(&start).iter().all(|s| *s > 0.0);
    let mut x = if interior {
        start
    } else {
        phase_one(&problem, &start, settings)?
    };

    let mut steps = 0;
    let mut last = None;
    for mu in mu_stages(settings) {
        let tol = if mu <= settings.mu_target {
            settings.tol
        } else {
            1e-6
        };
        let centered = problem.center(&mut x, mu, tol, |_| false)?;
        steps += centered.steps;
        last = Some((mu, centered));
    }
    let (mu, centered) = last.expect("at least one barrier stage");
    let slack = problem.slack(&x);
    let multipliers: Vec<f64> = slack.iter().map(|s| mu / s).collect();
    let eq_duals = centered.eq_scaled_duals.iter().map(|w| w * mu).collect();
    let objective = dot(&lp.cost, &x);
    Ok(BarrierSolution {
        x,
        slack,
        multipliers,
        eq_duals,
        mu,
        objective,
        newton_steps: steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lp(cost: &[f64], eq: &[&[f64]], b: &[f64], g: &[&[f64]], h: &[f64]) -> LinearProgram {
        let n = cost.len();
        let e = if eq.is_empty() {
            Matrix::zeros(0, n)
        } else {
            Matrix::from_rows(eq)
        };
        LinearProgram::new(cost.to_vec(), e, b.to_vec(), Matrix::from_rows(g), h.to_vec()).unwrap()
    }

    #[test]
    fn equality_pinned_variable() {
        let lp = lp(&[1.0], &[&[1.0]], &[3.0], &[&[1.0], &[-1.0]], &[10.0, 0.0]);
        let sol = solve_barrier(&lp, &BarrierSettings::default()).unwrap();
        assert_abs_diff_eq!(sol.x[0], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn box_lp_goes_to_lower_corner() {
        let lp = lp(
            &[1.0, 2.0],
            &[],
            &[],
            &[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0]],
            &[4.0, 1.0, 4.0, 2.0],
        );
        let sol = solve_barrier(&lp, &BarrierSettings::default()).unwrap();
        assert_abs_diff_eq!(sol.objective, -5.0, epsilon = 1e-7);
    }

    #[test]
    fn infeasible_lp_is_reported() {
        // x ≤ 1 and x ≥ 2
        let lp = lp(&[1.0], &[], &[], &[&[1.0], &[-1.0]], &[1.0, -2.0]);
        match solve_barrier(&lp, &BarrierSettings::default()) {
            Err(OptError::Infeasible { residual }) => assert!(residual > 0.4),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn unbounded_lp_is_reported() {
        let lp = lp(&[-1.0], &[], &[], &[&[-1.0]], &[0.0]);
        assert_eq!(
            solve_barrier(&lp, &BarrierSettings::default()),
            Err(OptError::Unbounded)
        );
    }

    #[test]
    fn central_path_complementarity() {
        let lp = lp(
            &[1.0, 1.0],
            &[&[1.0, 1.0]],
            &[1.0],
            &[&[-1.0, 0.0], &[0.0, -1.0], &[1.0, 0.0]],
            &[0.0, 0.0, 0.7],
        );
        let settings = BarrierSettings::with_mu(1e-6);
        let sol = solve_barrier(&lp, &settings).unwrap();
        let m = lp.ineq_count() as f64;
        assert!((sol.complementarity() - 1e-6 * m).abs() <= 1e-8 * 1e-6 * m);
    }

    #[test]
    fn stages_end_exactly_at_target() {
        let s = BarrierSettings::with_mu(1e-3);
        let stages: Vec<f64> = mu_stages(&s).collect();
        assert_eq!(*stages.last().unwrap(), 1e-3);
        assert_eq!(stages[0], 1.0);
        assert!(stages.windows(2).all(|w| w[1] < w[0]));
    }
}
