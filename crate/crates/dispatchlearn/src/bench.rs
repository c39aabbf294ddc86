//! The seeded synthetic benchmark: one data setup per case, ILO and SLO
//! trained under every penalty preset of the case's family.

use dispatchlearn_core::regret::{PenaltyFamily, Scenario};
use dispatchlearn_core::training::{train, ModelSet, TrainingError};
use dispatchlearn_core::{CaseKind, ContextSample, PenaltySetting, Pipeline, TrainingConfig, TrainingHistory};

use crate::data_io::{frame, split_samples, synth_generate, DataError, ZONE_BASES};
use crate::run::{default_grid, scenario_for};

pub const ZONES: usize = 8;
/// Scales the eight-zone total onto the five-unit system (mean about 11 MW).
pub const ED_LOAD_SCALE: f64 = 11.0 / 152.0;
/// $/MW on the zone-load deviation term of the network regret.
pub const NETWORK_REGULARIZATION: f64 = 1.0;

/// Samples, offsets and split sizes of one case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaseLayout {
    pub days: usize,
    pub offset: usize,
    pub train: usize,
    pub test: usize,
}

impl CaseLayout {
    pub fn standard(case: CaseKind) -> Self {
        match case {
            CaseKind::Ed1h => Self { days: 7, offset: 0, train: 120, test: 48 },
            CaseKind::Ed24h => Self { days: 9, offset: 0, train: 6, test: 3 },
            CaseKind::Dcopf => Self { days: 1, offset: 0, train: 9, test: 6 },
        }
    }
}

pub fn load_scale(case: CaseKind) -> f64 {
    match case {
        CaseKind::Ed1h | CaseKind::Ed24h => ED_LOAD_SCALE,
        CaseKind::Dcopf => 1.0,
    }
}

pub fn penalty_family(case: CaseKind) -> PenaltyFamily {
    match case {
        CaseKind::Ed1h | CaseKind::Ed24h => PenaltyFamily::Table1,
        CaseKind::Dcopf => PenaltyFamily::Case2,
    }
}

pub fn scenario(case: CaseKind) -> Scenario {
    scenario_for(case, default_grid(case), NETWORK_REGULARIZATION)
}

/// Penalty preset `k` (1-based) for a case.
pub fn preset_penalties(case: CaseKind, k: usize) -> Option<PenaltySetting> {
    PenaltySetting::preset(penalty_family(case), k, scenario(case).fleet.len())
}

/// Framed train and test samples of the synthetic data for `seed`.
pub fn case_samples(case: CaseKind, seed: u64) -> Result<(Vec<ContextSample>, Vec<ContextSample>), DataError> {
    let layout = CaseLayout::standard(case);
    let data = synth_generate(seed, layout.days, ZONES);
    debug_assert_eq!(data.zone_count, ZONE_BASES.len());
    let framed = frame(&data, case, load_scale(case));
    split_samples(&framed, layout.offset, layout.train, layout.test)
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub models: ModelSet,
    pub history: TrainingHistory,
}

/// Trains one pipeline on a case with preset learning rates and epochs.
pub fn run(
    pipeline: Pipeline,
    case: CaseKind,
    penalties: PenaltySetting,
    seed: u64,
    train_set: &[ContextSample],
    test_set: &[ContextSample],
) -> Result<RunResult, TrainingError> {
    let config = TrainingConfig::preset(pipeline, case, penalties, seed);
    let (models, history) = train(&config, &scenario(case), train_set, Some(test_set), &|| 0.0)?;
    Ok(RunResult { models, history })
}
