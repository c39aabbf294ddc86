//! Independent oracles shared by the integration tests. Nothing here calls
//! into the solver or PTDF code it is used to check.

#![allow(dead_code)]

use dispatchlearn_core::grid::{GeneratorFleet, NetworkTopology};
use rand::Rng;

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-12 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for r in k + 1..n {
            let f = a[r][k] / a[k][k];
            for c in k..n {
                a[r][c] -= f * a[k][c];
            }
            b[r] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// DC power flow: bus angles from `B·θ = P` with the slack angle fixed at
/// zero, then flows `(θ_from − θ_to)/x`.
pub fn dc_power_flow(topology: &NetworkTopology, reactances: &[f64], injections: &[f64]) -> Vec<f64> {
    let n = topology.bus_count;
    let mut b = vec![vec![0.0; n]; n];
    for (line, &x) in topology.lines.iter().zip(reactances) {
        let y = 1.0 / x;
        b[line.from][line.from] += y;
        b[line.to][line.to] += y;
        b[line.from][line.to] -= y;
        b[line.to][line.from] -= y;
    }
    let keep: Vec<usize> = (0..n).filter(|&i| i != topology.slack_bus).collect();
    let reduced: Vec<Vec<f64>> = keep
        .iter()
        .map(|&i| keep.iter().map(|&j| b[i][j]).collect())
        .collect();
    let rhs: Vec<f64> = keep.iter().map(|&i| injections[i]).collect();
    let theta_r = gauss_solve(reduced, rhs).expect("connected network");
    let mut theta = vec![0.0; n];
    for (k, &i) in keep.iter().enumerate() {
        theta[i] = theta_r[k];
    }
    topology
        .lines
        .iter()
        .zip(reactances)
        .map(|(l, &x)| (theta[l.from] - theta[l.to]) / x)
        .collect()
}

/// Cheapest-first stacking with the external supply as an unlimited unit.
/// Returns `(p, s, cost)`.
pub fn merit_order(fleet: &GeneratorFleet, load: f64) -> (Vec<f64>, f64, f64) {
    let mut p = fleet.p_min.clone();
    let mut remaining = load - p.iter().sum::<f64>();
    assert!(remaining >= -1e-12, "load below committed minimum");
    let mut order: Vec<usize> = (0..fleet.len()).collect();
    order.sort_by(|&a, &b| fleet.costs[a].total_cmp(&fleet.costs[b]));
    let mut s = 0.0;
    let mut ext_used = false;
    for &i in &order {
        if fleet.ext_cost < fleet.costs[i] && !ext_used {
            s = remaining.max(0.0);
            remaining = 0.0;
            ext_used = true;
        }
        let add = remaining.min(fleet.p_max[i] - p[i]).max(0.0);
        p[i] += add;
        remaining -= add;
    }
    if remaining > 0.0 {
        s += remaining;
    }
    let cost = p.iter().zip(&fleet.costs).map(|(a, c)| a * c).sum::<f64>() + s * fleet.ext_cost;
    (p, s, cost)
}

/// Dense LP data for the oracle: `min cᵀx, Ex = b, Gx ≤ h`.
#[derive(Debug, Clone)]
pub struct DenseLp {
    pub cost: Vec<f64>,
    pub eq: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub ineq: Vec<Vec<f64>>,
    pub h: Vec<f64>,
}

fn combinations(m: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    if k > m {
        return;
    }
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + m - k {
                break;
            }
            if i == 0 && idx[0] == m - k {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Minimum objective over all basic feasible solutions.
pub fn vertex_enumeration(lp: &DenseLp) -> Option<f64> {
    let n = lp.cost.len();
    let p = lp.eq.len();
    let m = lp.ineq.len();
    let mut best: Option<f64> = None;
    let scale = 1.0 + lp.h.iter().chain(&lp.b).fold(0.0f64, |a, v| a.max(v.abs()));
    if n == p {
        if let Some(x) = gauss_solve(lp.eq.clone(), lp.b.clone()) {
            return Some(x.iter().zip(&lp.cost).map(|(a, c)| a * c).sum());
        }
        return None;
    }
    combinations(m, n - p, |active| {
        let mut a = lp.eq.clone();
        let mut rhs = lp.b.clone();
        for &i in active {
            a.push(lp.ineq[i].clone());
            rhs.push(lp.h[i]);
        }
        if let Some(x) = gauss_solve(a, rhs) {
            let feasible = lp.ineq.iter().zip(&lp.h).all(|(g, h)| {
                g.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() <= h + 1e-9 * scale
            }) && lp.eq.iter().zip(&lp.b).all(|(e, b)| {
                (e.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() - b).abs() <= 1e-9 * scale
            });
            if feasible {
                let obj: f64 = x.iter().zip(&lp.cost).map(|(a, c)| a * c).sum();
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
    });
    best
}

fn cut_through(rng: &mut impl Rng, center: &[f64], a: Vec<f64>) -> (Vec<f64>, f64) {
    let at: f64 = a.iter().zip(center).map(|(x, y)| x * y).sum();
    (a, at + rng.random_range(0.1..1.0))
}

fn maybe_equality(rng: &mut impl Rng, center: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = center.len();
    if n > 1 && rng.random_bool(0.5) {
        let e: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
        let b = e.iter().zip(center).map(|(x, y)| x * y).sum();
        (vec![e], vec![b])
    } else {
        (Vec::new(), Vec::new())
    }
}

/// Few variables, many constraints: box bounds around a random center plus
/// random cuts passing near it, up to `max_rows` inequalities in total.
pub fn random_lp_tall(rng: &mut impl Rng, max_vars: usize, max_rows: usize) -> DenseLp {
    let n = rng.random_range(1..=max_vars);
    let center: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut ineq = Vec::new();
    let mut h = Vec::new();
    for i in 0..n {
        let mut up = vec![0.0; n];
        up[i] = 1.0;
        h.push(center[i] + rng.random_range(0.5..2.0));
        ineq.push(up);
        let mut lo = vec![0.0; n];
        lo[i] = -1.0;
        h.push(-(center[i] - rng.random_range(0.5..2.0)));
        ineq.push(lo);
    }
    let cuts = rng.random_range(0..=max_rows - 2 * n);
    for _ in 0..cuts {
        let a = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (a, b) = cut_through(rng, &center, a);
        ineq.push(a);
        h.push(b);
    }
    let (eq, b) = maybe_equality(rng, &center);
    let cost = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    DenseLp { cost, eq, b, ineq, h }
}

/// Many variables, few surplus constraints: lower bounds, one positive
/// budget row that keeps the region bounded, and up to `extra` random cuts.
pub fn random_lp_wide(rng: &mut impl Rng, max_vars: usize, extra: usize) -> DenseLp {
    let n = rng.random_range(1..=max_vars);
    let center: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut ineq = Vec::new();
    let mut h = Vec::new();
    for i in 0..n {
        let mut lo = vec![0.0; n];
        lo[i] = -1.0;
        h.push(-(center[i] - rng.random_range(0.5..2.0)));
        ineq.push(lo);
    }
    let budget = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let (a, b) = cut_through(rng, &center, budget);
    ineq.push(a);
    h.push(b + 1.0);
    for _ in 0..rng.random_range(0..=extra) {
        let a = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (a, b) = cut_through(rng, &center, a);
        ineq.push(a);
        h.push(b);
    }
    let (eq, b) = maybe_equality(rng, &center);
    let cost = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    DenseLp { cost, eq, b, ineq, h }
}

/// `|a − b| ≤ max(rel·|b|, abs)`.
pub fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= (rel * b.abs()).max(abs)
}

pub fn random_fleet(rng: &mut impl Rng, units: usize) -> GeneratorFleet {
    let mut costs: Vec<f64> = (0..units).map(|_| rng.random_range(10.0..100.0)).collect();
    costs.sort_by(|a, b| a.total_cmp(b));
    GeneratorFleet {
        costs,
        p_min: vec![0.0; units],
        p_max: (0..units).map(|_| rng.random_range(1.0..10.0)).collect(),
        ext_cost: 150.0,
    }
}
