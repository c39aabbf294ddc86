//! Plain-text network and fleet description.
//!
//! One record per line, `#` starts a comment, buses are one-based:
//!
//! ```text
//! name ieee14
//! buses 14
//! slack 1
//! external 1 100        # bus, $/MW
//! line 1 2 0.05917 37   # from, to, reactance (pu), symmetric limit (MW)
//! gen 1 10 0 60         # bus, $/MW, p_min, p_max
//! zone 2                # bus of the next load zone
//! ```
//!
//! `line` also accepts a fifth number, in which case the two limits are
//! `min max`.

use std::path::Path;

use dispatchlearn_core::grid::fixtures::CaseFixture;
use dispatchlearn_core::{GeneratorFleet, GridError, Line, NetworkTopology};

#[derive(Debug, thiserror::Error)]
pub enum GridFileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing `{0}` record")]
    Missing(&'static str),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A parsed grid file. Same shape as the bundled fixtures, with an owned name.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCase {
    pub name: String,
    pub topology: NetworkTopology,
    pub fleet: GeneratorFleet,
    pub zone_buses: Vec<usize>,
}

impl From<CaseFixture> for GridCase {
    fn from(f: CaseFixture) -> Self {
        Self {
            name: f.name.to_string(),
            topology: f.topology,
            fleet: f.fleet,
            zone_buses: f.zone_buses,
        }
    }
}

pub fn parse(text: &str) -> Result<GridCase, GridFileError> {
    let mut name = None;
    let mut buses = None;
    let mut slack = None;
    let mut external = None;
    let mut lines = Vec::new();
    let mut gen_bus = Vec::new();
    let mut fleet = GeneratorFleet {
        costs: Vec::new(),
        p_min: Vec::new(),
        p_max: Vec::new(),
        ext_cost: 0.0,
    };
    let mut zone_buses = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut words = body.split_whitespace();
        let keyword = words.next().unwrap();
        let args: Vec<&str> = words.collect();
        let err = |message: String| GridFileError::Syntax { line, message };
        let num = |k: usize| -> Result<f64, GridFileError> {
            args[k]
                .parse::<f64>()
                .map_err(|_| err(format!("{keyword}: {:?} is not a number", args[k])))
        };
        let bus = |k: usize| -> Result<usize, GridFileError> {
            match args[k].parse::<usize>() {
                Ok(b) if b >= 1 => Ok(b - 1),
                _ => Err(err(format!("{keyword}: {:?} is not a one-based bus", args[k]))),
            }
        };
        let arity = |n: &[usize]| -> Result<(), GridFileError> {
            if n.contains(&args.len()) {
                Ok(())
            } else {
                Err(err(format!("{keyword} takes {n:?} fields, got {}", args.len())))
            }
        };
        match keyword {
            "name" => {
                arity(&[1])?;
                name = Some(args[0].to_string());
            }
            "buses" => {
                arity(&[1])?;
                buses = Some(
                    args[0]
                        .parse::<usize>()
                        .map_err(|_| err(format!("buses: {:?} is not a count", args[0])))?,
                );
            }
            "slack" => {
                arity(&[1])?;
                slack = Some(bus(0)?);
            }
            "external" => {
                arity(&[2])?;
                external = Some((bus(0)?, num(1)?));
            }
            "line" => {
                arity(&[4, 5])?;
                let (from, to, x) = (bus(0)?, bus(1)?, num(2)?);
                lines.push(if args.len() == 4 {
                    Line::symmetric(from, to, x, num(3)?)
                } else {
                    Line {
                        from,
                        to,
                        reactance: x,
                        limit_min: num(3)?,
                        limit_max: num(4)?,
                    }
                });
            }
            "gen" => {
                arity(&[4])?;
                gen_bus.push(bus(0)?);
                fleet.costs.push(num(1)?);
                fleet.p_min.push(num(2)?);
                fleet.p_max.push(num(3)?);
            }
            "zone" => {
                arity(&[1])?;
                zone_buses.push(bus(0)?);
            }
            other => return Err(err(format!("unknown record {other:?}"))),
        }
    }
    let (ext_bus, ext_cost) = external.ok_or(GridFileError::Missing("external"))?;
    fleet.ext_cost = ext_cost;
    let topology = NetworkTopology {
        bus_count: buses.ok_or(GridFileError::Missing("buses"))?,
        lines,
        slack_bus: slack.ok_or(GridFileError::Missing("slack"))?,
        gen_bus,
        ext_bus,
    };
    topology.validate()?;
    fleet.validate()?;
    if let Some(&b) = zone_buses.iter().find(|&&b| b >= topology.bus_count) {
        return Err(GridError::UnknownBus {
            what: "zone",
            bus: b,
            bus_count: topology.bus_count,
        }
        .into());
    }
    Ok(GridCase {
        name: name.ok_or(GridFileError::Missing("name"))?,
        topology,
        fleet,
        zone_buses,
    })
}

pub fn load(path: &Path) -> Result<GridCase, GridFileError> {
    parse(&std::fs::read_to_string(path)?)
}

pub fn render(case: &GridCase) -> String {
    let t = &case.topology;
    let mut out = String::new();
    out.push_str(&format!("name {}\nbuses {}\nslack {}\n", case.name, t.bus_count, t.slack_bus + 1));
    out.push_str(&format!("external {} {}\n", t.ext_bus + 1, case.fleet.ext_cost));
    for l in &t.lines {
        if l.limit_min == -l.limit_max {
            out.push_str(&format!("line {} {} {} {}\n", l.from + 1, l.to + 1, l.reactance, l.limit_max));
        } else {
            out.push_str(&format!(
                "line {} {} {} {} {}\n",
                l.from + 1,
                l.to + 1,
                l.reactance,
                l.limit_min,
                l.limit_max
            ));
        }
    }
    for (g, b) in t.gen_bus.iter().enumerate() {
        out.push_str(&format!(
            "gen {} {} {} {}\n",
            b + 1,
            case.fleet.costs[g],
            case.fleet.p_min[g],
            case.fleet.p_max[g]
        ));
    }
    for z in &case.zone_buses {
        out.push_str(&format!("zone {}\n", z + 1));
    }
    out
}
