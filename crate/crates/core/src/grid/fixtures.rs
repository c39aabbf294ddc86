//! Bundled test systems.
//!
//! The same data ships as text under `crates/dispatchlearn/fixtures/`; a test
//! there checks that the files parse back to exactly these values.

use alloc::vec;
use alloc::vec::Vec;

use super::{GeneratorFleet, Line, NetworkTopology};

/// A network, its fleet, and the bus each load zone is attached to.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CaseFixture {
    pub name: &'static str,
    pub topology: NetworkTopology,
    pub fleet: GeneratorFleet,
    pub zone_buses: Vec<usize>,
}

/// External power price assumed for the five-unit system; above every unit.
pub const CASE1_EXT_COST: f64 = 800.0;

/// Five units at 300..700 $/MW with capacities 2, 4, 3, 5, 6 on one bus.
///
/// Capacities are published in kW against $/MW costs; they are taken as MW.
pub fn case1() -> CaseFixture {
    CaseFixture {
        name: "case1",
        topology: NetworkTopology::single_bus(5),
        fleet: GeneratorFleet {
            costs: vec![300.0, 400.0, 500.0, 600.0, 700.0],
            p_min: vec![0.0; 5],
            p_max: vec![2.0, 4.0, 3.0, 5.0, 6.0],
            ext_cost: CASE1_EXT_COST,
        },
        zone_buses: vec![0],
    }
}

/// Standard IEEE 14-bus branch reactances (per unit), `(from, to, x)` with
/// one-based bus numbers.
pub const IEEE14_BRANCHES: [(usize, usize, f64); 20] = [
    (1, 2, 0.05917),
    (1, 5, 0.22304),
    (2, 3, 0.19797),
    (2, 4, 0.17632),
    (2, 5, 0.17388),
    (3, 4, 0.17103),
    (4, 5, 0.04211),
    (4, 7, 0.20912),
    (4, 9, 0.55618),
    (5, 6, 0.25202),
    (6, 11, 0.19890),
    (6, 12, 0.25581),
    (6, 13, 0.13027),
    (7, 8, 0.17615),
    (7, 9, 0.11001),
    (9, 10, 0.08450),
    (9, 14, 0.27038),
    (10, 11, 0.19207),
    (12, 13, 0.19988),
    (13, 14, 0.34802),
];

/// Symmetric line limits in MW, same order as [`IEEE14_BRANCHES`]. Not part
/// of the standard case: about 1.1 times the largest flow of the
/// unconstrained dispatch over two weeks of synthetic load, with a 10 MW
/// floor, so busy corridors run close to their limit at the daily peak.
pub const IEEE14_LINE_LIMITS: [f64; 20] = [
    37.0, 37.0, 24.0, 40.0, 40.0, 34.0, 16.0, 32.0, 19.0, 46.0, 10.0, 10.0, 34.0, 10.0, 32.0, 10.0,
    20.0, 10.0, 10.0, 10.0,
];

/// Seven units, 10..70 $/MW. Only six capacities are published
/// (60, 70, 40, 40, 50, 20); the seventh unit gets a placeholder 30 MW.
pub const IEEE14_GEN_BUSES: [usize; 7] = [1, 2, 3, 6, 8, 11, 13];
pub const IEEE14_GEN_COSTS: [f64; 7] = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0];
pub const IEEE14_GEN_PMAX: [f64; 7] = [60.0, 70.0, 40.0, 40.0, 50.0, 20.0, 30.0];
pub const IEEE14_EXT_COST: f64 = 100.0;
/// One-based bus for each of the eight load zones.
pub const IEEE14_ZONE_BUSES: [usize; 8] = [2, 3, 4, 5, 6, 9, 13, 14];

pub fn ieee14() -> CaseFixture {
    let lines = IEEE14_BRANCHES
        .iter()
        .zip(IEEE14_LINE_LIMITS)
        .map(|(&(f, t, x), lim)| Line::symmetric(f - 1, t - 1, x, lim))
        .collect();
    CaseFixture {
        name: "ieee14",
        topology: NetworkTopology {
            bus_count: 14,
            lines,
            slack_bus: 0,
            gen_bus: IEEE14_GEN_BUSES.iter().map(|b| b - 1).collect(),
            ext_bus: 0,
        },
        fleet: GeneratorFleet {
            costs: IEEE14_GEN_COSTS.to_vec(),
            p_min: vec![0.0; 7],
            p_max: IEEE14_GEN_PMAX.to_vec(),
            ext_cost: IEEE14_EXT_COST,
        },
        zone_buses: IEEE14_ZONE_BUSES.iter().map(|b| b - 1).collect(),
    }
}
