//! CSV and JSON reports.
//!
//! Every CSV starts with `# key = value` lines describing the run. CSV files
//! hold no wall-clock data, so reruns with the same configuration produce
//! identical bytes; wall time only goes into the JSON history.

use std::io::Write;
use std::path::Path;

use dispatchlearn_core::market::{FeasibilityCase, HourReport, LineState};
use dispatchlearn_core::training::Metrics;
use dispatchlearn_core::TrainingHistory;
use serde::Serialize;

use crate::data_io::format_time;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Writes `header` as comment lines followed by the CSV body.
pub fn write_with_header(path: &Path, header: &[String], body: &[u8]) -> Result<(), ReportError> {
    let write = || -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for line in header {
            writeln!(f, "# {line}")?;
        }
        f.write_all(body)?;
        f.flush()
    };
    write().map_err(|source| ReportError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn csv_body(rows: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<(), csv::Error>) -> Result<Vec<u8>, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    rows(&mut w)?;
    w.into_inner().map_err(|e| ReportError::Csv(e.into_error().into()))
}

/// `epoch,train_regret,train_mse,train_loss,skipped`.
pub fn history_csv(history: &TrainingHistory) -> Result<Vec<u8>, ReportError> {
    csv_body(|w| {
        w.write_record(["epoch", "train_regret", "train_mse", "train_loss", "skipped"])?;
        for e in &history.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.train_regret.to_string(),
                e.train_mse.to_string(),
                e.train_loss.to_string(),
                e.skipped.to_string(),
            ])?;
        }
        Ok(())
    })
}

#[derive(Serialize)]
struct HistoryJson<'a> {
    config: &'a [String],
    best_epoch: usize,
    epochs: &'a [dispatchlearn_core::training::EpochRecord],
    test: Option<MetricsSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub mean_regret: f64,
    pub mean_mse: f64,
    pub mean_signed_error: f64,
    pub failed: usize,
    pub instances: usize,
}

impl From<&Metrics> for MetricsSummary {
    fn from(m: &Metrics) -> Self {
        Self {
            mean_regret: m.mean_regret,
            mean_mse: m.mean_mse,
            mean_signed_error: m.mean_signed_error,
            failed: m.failed,
            instances: m.instances.len(),
        }
    }
}

pub fn history_json(history: &TrainingHistory, header: &[String]) -> Result<String, ReportError> {
    Ok(serde_json::to_string_pretty(&HistoryJson {
        config: header,
        best_epoch: history.best_epoch,
        epochs: &history.epochs,
        test: history.test.as_ref().map(MetricsSummary::from),
    })?)
}

/// One row of the ILO/SLO comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub setting: String,
    pub regret_ilo_train: f64,
    pub regret_ilo_test: f64,
    pub regret_slo_train: f64,
    pub regret_slo_test: f64,
}

pub fn compare_csv(rows: &[CompareRow]) -> Result<Vec<u8>, ReportError> {
    csv_body(|w| {
        for r in rows {
            w.serialize(r)?;
        }
        Ok(())
    })
}

fn state_name(s: LineState) -> &'static str {
    match s {
        LineState::Within => "within",
        LineState::AtLimit => "at_limit",
        LineState::Over => "over",
    }
}

fn case_name(c: FeasibilityCase) -> &'static str {
    match c {
        FeasibilityCase::ViolatingSuboptimal => "violating_suboptimal",
        FeasibilityCase::ViolatingOptimal => "violating_optimal",
        FeasibilityCase::FeasibleSuboptimal => "feasible_suboptimal",
        FeasibilityCase::FeasibleOptimal => "feasible_optimal",
    }
}

/// A simulated hour with the split it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulatedHour {
    pub part: &'static str,
    pub report: HourReport,
}

/// `timestamp,part,period,unit,up_mw,down_mw,up_payment,down_payment`;
/// the external tie is unit `ext`.
pub fn settlement_csv(hours: &[SimulatedHour]) -> Result<Vec<u8>, ReportError> {
    csv_body(|w| {
        w.write_record(["timestamp", "part", "period", "unit", "up_mw", "down_mw", "up_payment", "down_payment"])?;
        for h in hours {
            let ts = format_time(h.report.timestamp);
            for (k, s) in h.report.settlements.iter().enumerate() {
                let units = s
                    .generators
                    .iter()
                    .enumerate()
                    .map(|(g, l)| ((g + 1).to_string(), l))
                    .chain(std::iter::once(("ext".to_string(), &s.external)));
                for (unit, l) in units {
                    w.write_record([
                        ts.clone(),
                        h.part.to_string(),
                        k.to_string(),
                        unit,
                        l.up_mw.to_string(),
                        l.down_mw.to_string(),
                        l.up_payment.to_string(),
                        l.down_payment.to_string(),
                    ])?;
                }
            }
        }
        Ok(())
    })
}

/// `timestamp,part,settlement,regret` per hour.
pub fn hourly_csv(hours: &[SimulatedHour]) -> Result<Vec<u8>, ReportError> {
    csv_body(|w| {
        w.write_record(["timestamp", "part", "settlement", "regret"])?;
        for h in hours {
            let total: f64 = h.report.settlements.iter().map(|s| s.total).sum();
            w.write_record([
                format_time(h.report.timestamp),
                h.part.to_string(),
                total.to_string(),
                h.report.regret.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// `timestamp,part,line,flow,utilization,state,violation`.
pub fn congestion_csv(hours: &[SimulatedHour]) -> Result<Vec<u8>, ReportError> {
    csv_body(|w| {
        w.write_record(["timestamp", "part", "line", "flow", "utilization", "state", "violation"])?;
        for h in hours {
            let Some(c) = &h.report.congestion else { continue };
            for (l, s) in c.lines.iter().enumerate() {
                w.write_record([
                    format_time(h.report.timestamp),
                    h.part.to_string(),
                    (l + 1).to_string(),
                    s.flow.to_string(),
                    s.utilization.to_string(),
                    state_name(s.state).to_string(),
                    s.violation.to_string(),
                ])?;
            }
        }
        Ok(())
    })
}

/// `timestamp,part,dcopf_cost,ed_cost,gap,relative_gap,case`.
pub fn operational_cost_csv(hours: &[SimulatedHour]) -> Result<Vec<u8>, ReportError> {
    csv_body(|w| {
        w.write_record(["timestamp", "part", "dcopf_cost", "ed_cost", "gap", "relative_gap", "case"])?;
        for h in hours {
            let (Some(c), Some(k)) = (&h.report.cost, h.report.case) else { continue };
            w.write_record([
                format_time(h.report.timestamp),
                h.part.to_string(),
                c.dcopf_cost.to_string(),
                c.ed_cost.to_string(),
                c.gap.to_string(),
                c.relative_gap.to_string(),
                case_name(k).to_string(),
            ])?;
        }
        Ok(())
    })
}

/// `timestamp,part,x1..xL`: raw predicted reactances per hour.
pub fn impedance_csv(hours: &[SimulatedHour]) -> Result<Vec<u8>, ReportError> {
    csv_body(|w| {
        let lines = hours
            .iter()
            .find_map(|h| h.report.reactances_pred.as_ref().map(Vec::len))
            .unwrap_or(0);
        let mut header = vec!["timestamp".to_string(), "part".to_string()];
        header.extend((1..=lines).map(|l| format!("x{l}")));
        w.write_record(&header)?;
        for h in hours {
            let Some(x) = &h.report.reactances_pred else { continue };
            let mut row = vec![format_time(h.report.timestamp), h.part.to_string()];
            row.extend(x.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        Ok(())
    })
}

/// Totals over the simulated hours.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub hours: usize,
    pub failed: usize,
    pub total_settlement: f64,
    pub total_regret: f64,
    pub hours_with_violations: usize,
    /// Share of network hours whose operating cost is within 1e-4 of ED.
    pub parity_fraction: Option<f64>,
    pub total_dcopf_cost: Option<f64>,
    pub total_ed_cost: Option<f64>,
}

pub const PARITY_REL_GAP: f64 = 1e-4;

pub fn summarize(hours: &[SimulatedHour], failed: usize) -> SimulationSummary {
    let costs: Vec<_> = hours.iter().filter_map(|h| h.report.cost).collect();
    let network = !costs.is_empty();
    SimulationSummary {
        hours: hours.len(),
        failed,
        total_settlement: hours
            .iter()
            .flat_map(|h| &h.report.settlements)
            .map(|s| s.total)
            .sum(),
        total_regret: hours.iter().map(|h| h.report.regret).sum(),
        hours_with_violations: hours
            .iter()
            .filter(|h| h.report.congestion.as_ref().is_some_and(|c| c.violations > 0))
            .count(),
        parity_fraction: network.then(|| {
            costs.iter().filter(|c| c.at_parity(PARITY_REL_GAP)).count() as f64 / costs.len() as f64
        }),
        total_dcopf_cost: network.then(|| costs.iter().map(|c| c.dcopf_cost).sum()),
        total_ed_cost: network.then(|| costs.iter().map(|c| c.ed_cost).sum()),
    }
}
