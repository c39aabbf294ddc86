//! Hourly zone-load datasets: CSV ingestion, the synthetic generator,
//! chronological splits and framing into per-case training samples.
//!
//! CSV layout, one row per hour:
//!
//! ```text
//! timestamp,zone1,...,zoneN[,x1,...,xL],feat_<name>,...
//! ```
//!
//! `timestamp` is `YYYY-MM-DDTHH:MM:SS` (UTC, no offset). `zone*` columns are
//! MW, `x*` columns are line reactances in per unit and `feat_*` columns are
//! context features in file order.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, Timelike};
use dispatchlearn_core::grid::fixtures::IEEE14_BRANCHES;
use dispatchlearn_core::{CaseKind, ContextSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// Zone base loads in MW; zones beyond eight reuse them cyclically.
pub const ZONE_BASES: [f64; 8] = [20.0, 14.0, 24.0, 18.0, 12.0, 22.0, 26.0, 16.0];
pub const DAILY_SWING: f64 = 0.3;
pub const WEEKEND_DROP: f64 = 0.08;
pub const NOISE_FRACTION: f64 = 0.02;
pub const REACTANCE_SWING: f64 = 0.05;

/// Synthetic data starts on a Thursday, so a five-day training window
/// holds both weekdays and a weekend.
pub fn synth_start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2023, 1, 5).unwrap().and_hms_opt(0, 0, 0).unwrap()
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("dataset is empty")]
    Empty,
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
    #[error("missing column {0}")]
    MissingColumn(String),
    #[error("invalid split: {0}")]
    Split(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Hourly samples with per-zone loads and, optionally, line reactances.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub zone_count: usize,
    pub feature_names: Vec<String>,
    pub samples: Vec<ContextSample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn line_count(&self) -> Option<usize> {
        self.samples.first()?.true_reactances.as_ref().map(Vec::len)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let dim = self.feature_names.len();
        for (i, s) in self.samples.iter().enumerate() {
            let line = i + 2;
            let row = |message: String| DataError::Row { line, message };
            if s.features.len() != dim {
                return Err(row(format!("{} features, expected {dim}", s.features.len())));
            }
            if s.true_load.len() != self.zone_count {
                return Err(row(format!("{} zones, expected {}", s.true_load.len(), self.zone_count)));
            }
            if let Some(z) = s.true_load.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return Err(row(format!("zone{} load {} is not a finite non-negative number", z + 1, s.true_load[z])));
            }
            if let Some(x) = &s.true_reactances {
                if let Some(l) = x.iter().position(|v| !v.is_finite() || *v <= 0.0) {
                    return Err(row(format!("reactance x{} = {} is not positive", l + 1, x[l])));
                }
            }
            if let Some(f) = s.features.iter().position(|v| !v.is_finite()) {
                return Err(row(format!("feature {} is not finite", self.feature_names[f])));
            }
            if i > 0 && s.timestamp <= self.samples[i - 1].timestamp {
                return Err(row("timestamps must be strictly increasing".into()));
            }
        }
        Ok(())
    }
}

fn parse_time(s: &str) -> Option<i64> {
    NaiveDateTime::parse_from_str(s.trim(), TIME_FORMAT)
        .ok()
        .map(|t| t.and_utc().timestamp())
}

pub fn format_time(ts: i64) -> String {
    DateTime::from_timestamp(ts, 0)
        .map(|t| t.naive_utc().format(TIME_FORMAT).to_string())
        .unwrap_or_else(|| ts.to_string())
}

enum Column {
    Zone(usize),
    Reactance(usize),
    Feature(usize),
}

fn numbered(name: &str, prefix: &str) -> Option<usize> {
    name.strip_prefix(prefix)?.parse::<usize>().ok().filter(|n| *n >= 1)
}

pub fn read_csv<R: Read>(reader: R) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("timestamp") {
        return Err(DataError::MissingColumn("timestamp".into()));
    }
    let mut columns = Vec::new();
    let mut feature_names = Vec::new();
    let (mut zones, mut lines) = (0, 0);
    for name in headers.iter().skip(1) {
        if let Some(n) = numbered(name, "zone") {
            zones = zones.max(n);
            columns.push(Column::Zone(n - 1));
        } else if let Some(n) = numbered(name, "x") {
            lines = lines.max(n);
            columns.push(Column::Reactance(n - 1));
        } else if let Some(f) = name.strip_prefix("feat_") {
            columns.push(Column::Feature(feature_names.len()));
            feature_names.push(f.to_string());
        } else {
            return Err(DataError::Row {
                line: 1,
                message: format!("unknown column {name:?}"),
            });
        }
    }
    let zone_cols = columns.iter().filter(|c| matches!(c, Column::Zone(_))).count();
    if zones == 0 || zone_cols != zones {
        return Err(DataError::MissingColumn(format!("zone1..zone{}", zones.max(1))));
    }
    let x_cols = columns.iter().filter(|c| matches!(c, Column::Reactance(_))).count();
    if x_cols != lines {
        return Err(DataError::MissingColumn(format!("x1..x{lines}")));
    }

    let mut samples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record?;
        if record.len() != headers.len() {
            return Err(DataError::Row {
                line,
                message: format!("{} fields, expected {}", record.len(), headers.len()),
            });
        }
        let timestamp = parse_time(&record[0]).ok_or_else(|| DataError::Row {
            line,
            message: format!("bad timestamp {:?}", &record[0]),
        })?;
        let mut load = vec![0.0; zones];
        let mut x = vec![0.0; lines];
        let mut features = vec![0.0; feature_names.len()];
        for (col, cell) in columns.iter().zip(record.iter().skip(1)) {
            let v: f64 = cell.parse().map_err(|_| DataError::Row {
                line,
                message: format!("non-numeric cell {cell:?}"),
            })?;
            match *col {
                Column::Zone(z) => load[z] = v,
                Column::Reactance(l) => x[l] = v,
                Column::Feature(f) => features[f] = v,
            }
        }
        samples.push(ContextSample {
            timestamp,
            features,
            true_load: load,
            true_reactances: (lines > 0).then_some(x),
        });
    }
    if samples.is_empty() {
        return Err(DataError::Empty);
    }
    let ds = Dataset {
        zone_count: zones,
        feature_names,
        samples,
    };
    ds.validate()?;
    Ok(ds)
}

pub fn load_csv(path: &Path) -> Result<Dataset, DataError> {
    read_csv(std::fs::File::open(path)?)
}

pub fn write_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    let lines = dataset.line_count().unwrap_or(0);
    let mut header = vec!["timestamp".to_string()];
    header.extend((1..=dataset.zone_count).map(|z| format!("zone{z}")));
    header.extend((1..=lines).map(|l| format!("x{l}")));
    header.extend(dataset.feature_names.iter().map(|f| format!("feat_{f}")));
    w.write_record(&header)?;
    for s in &dataset.samples {
        let mut row = vec![format_time(s.timestamp)];
        row.extend(s.true_load.iter().map(f64::to_string));
        if let Some(x) = &s.true_reactances {
            row.extend(x.iter().map(f64::to_string));
        }
        row.extend(s.features.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<(), DataError> {
    write_csv(dataset, std::fs::File::create(path)?)
}

/// The weekday term averages to zero over a week, so a zone's long-run
/// mean is its base.
fn zone_load(base: f64, phase: f64, hour: usize, weekend: bool) -> f64 {
    let daily = 1.0 + DAILY_SWING * (2.0 * PI * (hour % 24) as f64 / 24.0 + phase).sin();
    let week = if weekend { 2.0 / 7.0 - 1.0 } else { 2.0 / 7.0 };
    base * (daily + WEEKEND_DROP * week)
}

/// Seeded hourly data starting at [`synth_start`].
///
/// Features: `hour_sin`, `hour_cos`, `dow0..dow6` (Monday = 0), `prev_zone*`
/// (the previous hour's loads) and `temp`. Reactances follow the IEEE 14-bus
/// branches.
pub fn synth_generate(seed: u64, days: usize, zone_count: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bases: Vec<f64> = (0..zone_count).map(|z| ZONE_BASES[z % ZONE_BASES.len()]).collect();
    let phases: Vec<f64> = (0..zone_count).map(|_| rng.random_range(-0.5..0.5)).collect();
    let line_phases: Vec<f64> = IEEE14_BRANCHES.iter().map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let noise = Normal::new(0.0, 1.0).unwrap();
    let start = synth_start();

    let draw = |hour: usize, weekend: bool, rng: &mut ChaCha8Rng| -> Vec<f64> {
        bases
            .iter()
            .zip(&phases)
            .map(|(&b, &ph)| (zone_load(b, ph, hour, weekend) + NOISE_FRACTION * b * noise.sample(rng)).max(0.0))
            .collect()
    };
    // The hour before the start seeds the lag features.
    let mut prev = draw(23, false, &mut rng);

    let mut feature_names = vec!["hour_sin".to_string(), "hour_cos".to_string()];
    feature_names.extend((0..7).map(|d| format!("dow{d}")));
    feature_names.extend((1..=zone_count).map(|z| format!("prev_zone{z}")));
    feature_names.push("temp".into());

    let mut samples = Vec::with_capacity(days * 24);
    for h in 0..days * 24 {
        let t = start + chrono::Duration::hours(h as i64);
        let dow = t.weekday().num_days_from_monday() as usize;
        let hour = t.hour() as usize;
        let angle = 2.0 * PI * hour as f64 / 24.0;
        let load = draw(hour, dow >= 5, &mut rng);
        let temp = 5.0 + 6.0 * (angle - 1.5 * PI / 2.0).sin() + noise.sample(&mut rng);
        let mut features = vec![angle.sin(), angle.cos()];
        features.extend((0..7).map(|d| if d == dow { 1.0 } else { 0.0 }));
        features.extend_from_slice(&prev);
        features.push(temp);
        let reactances = IEEE14_BRANCHES
            .iter()
            .zip(&line_phases)
            .map(|(&(_, _, x), &ph)| x * (1.0 + REACTANCE_SWING * (angle + ph).sin()))
            .collect();
        samples.push(ContextSample {
            timestamp: t.and_utc().timestamp(),
            features,
            true_load: load.clone(),
            true_reactances: Some(reactances),
        });
        prev = load;
    }
    Dataset {
        zone_count,
        feature_names,
        samples,
    }
}

/// Chronological split, `train` samples then `test` samples, from `offset`.
pub fn split_samples(
    samples: &[ContextSample],
    offset: usize,
    train: usize,
    test: usize,
) -> Result<(Vec<ContextSample>, Vec<ContextSample>), DataError> {
    if train == 0 || test == 0 {
        return Err(DataError::Split("train and test parts must be non-empty".into()));
    }
    if offset + train + test > samples.len() {
        return Err(DataError::Split(format!(
            "{} samples requested from offset {offset}, {} available",
            train + test,
            samples.len()
        )));
    }
    let a = samples[offset..offset + train].to_vec();
    let b = samples[offset + train..offset + train + test].to_vec();
    Ok((a, b))
}

/// Chronological split of an hourly dataset by days.
pub fn split(dataset: &Dataset, train_days: usize, test_days: usize) -> Result<(Dataset, Dataset), DataError> {
    let (a, b) = split_samples(&dataset.samples, 0, train_days * 24, test_days * 24)?;
    let part = |samples| Dataset {
        zone_count: dataset.zone_count,
        feature_names: dataset.feature_names.clone(),
        samples,
    };
    Ok((part(a), part(b)))
}

/// Turns hourly zone data into samples for one case.
///
/// * `Ed1h`: one sample per hour, target the zone total times `load_scale`.
/// * `Ed24h`: one sample per whole day, features of its first hour, target
///   the 24 scaled hourly totals.
/// * `Dcopf`: one sample per hour, targets the scaled zone loads and the
///   reactances.
pub fn frame(dataset: &Dataset, case: CaseKind, load_scale: f64) -> Vec<ContextSample> {
    let total = |s: &ContextSample| s.true_load.iter().sum::<f64>() * load_scale;
    match case {
        CaseKind::Ed1h => dataset
            .samples
            .iter()
            .map(|s| ContextSample {
                timestamp: s.timestamp,
                features: s.features.clone(),
                true_load: vec![total(s)],
                true_reactances: None,
            })
            .collect(),
        CaseKind::Ed24h => dataset
            .samples
            .chunks_exact(24)
            .map(|day| ContextSample {
                timestamp: day[0].timestamp,
                features: day[0].features.clone(),
                true_load: day.iter().map(total).collect(),
                true_reactances: None,
            })
            .collect(),
        CaseKind::Dcopf => dataset
            .samples
            .iter()
            .map(|s| ContextSample {
                timestamp: s.timestamp,
                features: s.features.clone(),
                true_load: s.true_load.iter().map(|v| v * load_scale).collect(),
                true_reactances: s.true_reactances.clone(),
            })
            .collect(),
    }
}
