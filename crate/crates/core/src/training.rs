//! ILO and SLO training loops and evaluation.
//!
//! Both pipelines run full-batch gradient descent over the same framed
//! samples. ILO descends the market regret through the dispatch LP; SLO
//! descends the squared prediction error and only solves the LP to report
//! regret.
//!
//! Losses are expressed in standardized output units so one learning rate
//! means the same thing in every case: the regret of an output is divided by
//! `mean MCP · σ`, squared errors by `σ²`, where `σ` is the output scale
//! fitted on the training targets. The training loss is the mean over
//! samples of the per-sample sum over outputs.

use alloc::vec::Vec;

use crate::opt::{BarrierSettings, DispatchSolution, OptError, MU_EVAL, MU_TRAIN_CAP};
use crate::predictor::{
    ContextSample, FeatureScaler, ModelGradients, OutputHead, OutputScaler, PredictionModel, PredictorError,
};
use crate::regret::{
    OutputRegret, PenaltySetting, PriceBook, RegretError, RegretValue, Scenario,
};

/// Share of samples that may fail in one epoch before training aborts.
pub const MAX_SKIP_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Pipeline {
    Ilo,
    Slo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum CaseKind {
    /// Hour-ahead total load, one ED per sample.
    #[cfg_attr(feature = "serde", serde(rename = "ed-1h"))]
    Ed1h,
    /// Next 24 hourly totals from the context at the window start.
    #[cfg_attr(feature = "serde", serde(rename = "ed-24h"))]
    Ed24h,
    /// Hour-ahead zone loads and line reactances, one DCOPF per sample.
    Dcopf,
}

impl CaseKind {
    pub fn name(self) -> &'static str {
        match self {
            CaseKind::Ed1h => "ed-1h",
            CaseKind::Ed24h => "ed-24h",
            CaseKind::Dcopf => "dcopf",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainingConfig {
    pub pipeline: Pipeline,
    pub case: CaseKind,
    pub load_learning_rate: f64,
    /// Impedance model rate, DCOPF only.
    pub impedance_learning_rate: f64,
    pub epochs: usize,
    /// Barrier coefficient used while training.
    pub mu_train: f64,
    /// Barrier coefficient used for reported metrics.
    pub mu_eval: f64,
    pub penalties: PenaltySetting,
    pub seed: u64,
    pub hidden: Vec<usize>,
}

impl TrainingConfig {
    /// Learning rates, epochs and barrier bounds of the reference setup.
    pub fn preset(pipeline: Pipeline, case: CaseKind, penalties: PenaltySetting, seed: u64) -> Self {
        use CaseKind::*;
        use Pipeline::*;
        let (load_lr, imp_lr, epochs) = match (case, pipeline) {
            (Ed1h, Ilo) => (5e-3, 0.0, 100),
            (Ed1h, Slo) => (5e-3, 0.0, 250),
            (Ed24h, Ilo) => (1e-4, 0.0, 100),
            (Ed24h, Slo) => (1e-3, 0.0, 100),
            (Dcopf, Ilo) => (3e-4, 4e-3, 100),
            (Dcopf, Slo) => (5e-3, 2e-3, 100),
        };
        let mu_train = match case {
            Ed1h => MU_EVAL,
            Ed24h | Dcopf => MU_TRAIN_CAP,
        };
        Self {
            pipeline,
            case,
            load_learning_rate: load_lr,
            impedance_learning_rate: imp_lr,
            epochs,
            mu_train,
            mu_eval: MU_EVAL,
            penalties,
            seed,
            hidden: crate::predictor::HIDDEN.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<(), TrainingError> {
        if self.epochs == 0 {
            return Err(TrainingError::Config("epochs must be at least 1"));
        }
        if !(self.load_learning_rate > 0.0) {
            return Err(TrainingError::Config("learning rates must be positive"));
        }
        if self.case == CaseKind::Dcopf && !(self.impedance_learning_rate > 0.0) {
            return Err(TrainingError::Config("learning rates must be positive"));
        }
        if !(self.mu_train > 0.0 && self.mu_eval > 0.0) {
            return Err(TrainingError::Config("barrier coefficients must be positive"));
        }
        Ok(())
    }

    fn train_settings(&self) -> BarrierSettings {
        BarrierSettings::with_mu(self.mu_train)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainingError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("epoch {epoch}: {skipped} of {total} samples failed")]
    TooManySkipped { epoch: usize, skipped: usize, total: usize },
    #[error("epoch {epoch}: non-finite gradient")]
    NonFinite { epoch: usize },
    #[error("all {failed} samples failed")]
    AllFailed { failed: usize },
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Regret(#[from] RegretError),
}

/// The load model, plus the impedance model for network cases.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelSet {
    pub load: PredictionModel,
    pub impedance: Option<PredictionModel>,
}

impl ModelSet {
    /// Seeded initialization with scalers fitted on the training samples.
    /// The output layers start at zero, so the first predictions are the
    /// training means.
    pub fn init(config: &TrainingConfig, scenario: &Scenario, train: &[ContextSample]) -> Result<Self, TrainingError> {
        let first = train.first().ok_or(TrainingError::EmptyDataset)?;
        let input = first.features.len();
        let features = FeatureScaler::fit(train.iter().map(|s| s.features.as_slice()));
        let mut load = PredictionModel::new(input, &config.hidden, OutputHead::Load(first.true_load.len()), config.seed);
        load.features = features.clone();
        load.output = OutputScaler::fit_load(train.iter().map(|s| s.true_load.as_slice()));
        zero_output_layer(&mut load);

        let impedance = match &scenario.network {
            None => None,
            Some(net) => {
                let lines = net.topology.line_count();
                let mut m = PredictionModel::new(
                    input,
                    &config.hidden,
                    OutputHead::Impedance(lines),
                    config.seed.wrapping_add(1),
                );
                m.features = features;
                let targets: Vec<&[f64]> = train
                    .iter()
                    .map(|s| s.true_reactances.as_deref().ok_or(RegretError::MissingImpedance))
                    .collect::<Result<_, _>>()?;
                m.output = OutputScaler::fit_impedance(targets);
                zero_output_layer(&mut m);
                Some(m)
            }
        };
        Ok(Self { load, impedance })
    }

    pub fn predict(&self, sample: &ContextSample) -> Result<(Vec<f64>, Option<Vec<f64>>), PredictorError> {
        let load = self.load.forward(&sample.features)?;
        let reactances = match &self.impedance {
            Some(m) => Some(m.forward(&sample.features)?),
            None => None,
        };
        Ok((load, reactances))
    }
}

fn zero_output_layer(model: &mut PredictionModel) {
    if let Some(last) = model.layers.last_mut() {
        last.weights.as_mut_slice().iter_mut().for_each(|w| *w = 0.0);
        last.bias.iter_mut().for_each(|b| *b = 0.0);
    }
}

/// Metrics of one epoch, computed for the model before that epoch's update.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean regret in $ per sample.
    pub train_regret: f64,
    /// Mean squared load error in MW² per output.
    pub train_mse: f64,
    /// The pipeline's own objective.
    pub train_loss: f64,
    pub skipped: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose model was kept.
    pub best_epoch: usize,
    pub test: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InstanceMetrics {
    pub timestamp: i64,
    pub regret: RegretValue,
    pub squared_error: f64,
    /// Mean of `prediction − truth` over load outputs.
    pub signed_error: f64,
    pub load_pred: Vec<f64>,
    pub reactances_pred: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Metrics {
    pub mean_regret: f64,
    /// Mean squared load error, MW² per output.
    pub mean_mse: f64,
    pub mean_signed_error: f64,
    pub failed: usize,
    pub instances: Vec<InstanceMetrics>,
}

/// Everything a training run needs besides the samples.
#[derive(Debug, Clone)]
pub struct TrainingSetup<'a> {
    pub config: &'a TrainingConfig,
    pub scenario: &'a Scenario,
    pub prices: &'a PriceBook,
}

fn load_errors(pred: &[f64], truth: &[f64]) -> (f64, f64) {
    let n = pred.len().max(1) as f64;
    let sq = pred.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
    let signed = pred.iter().zip(truth).map(|(a, b)| a - b).sum::<f64>() / n;
    (sq, signed)
}

fn is_solver_failure(e: &RegretError) -> bool {
    matches!(e, RegretError::Opt(_))
}

struct EpochSums {
    load: ModelGradients,
    impedance: Option<ModelGradients>,
    regret: f64,
    mse: f64,
    loss: f64,
    count: usize,
    skipped: usize,
}

/// One pass over the training samples at the current parameters.
fn epoch_pass(
    setup: &TrainingSetup<'_>,
    models: &ModelSet,
    train: &[ContextSample],
    truth: &[Option<Vec<DispatchSolution>>],
) -> Result<EpochSums, TrainingError> {
    let config = setup.config;
    let settings = config.train_settings();
    let mut sums = EpochSums {
        load: ModelGradients::zeros_like(&models.load),
        impedance: models.impedance.as_ref().map(ModelGradients::zeros_like),
        regret: 0.0,
        mse: 0.0,
        loss: 0.0,
        count: 0,
        skipped: 0,
    };
    let norm = regret_norm(setup.prices, &models.load);
    for (sample, truth) in train.iter().zip(truth) {
        let Some(truth) = truth else {
            sums.skipped += 1;
            continue;
        };
        match config.pipeline {
            Pipeline::Ilo => {
                let (load_pred, reactances) = models.predict(sample)?;
                let result = setup.scenario.output_regret(
                    &load_pred,
                    reactances.as_deref(),
                    sample,
                    truth,
                    setup.prices,
                    &config.penalties,
                    &settings,
                    true,
                );
                let out = match result {
                    Ok(o) => o,
                    Err(e) if is_solver_failure(&e) => {
                        log::warn!("sample at {} skipped: {e}", sample.timestamp);
                        sums.skipped += 1;
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                };
                let (loss, scaled) = normalized_regret(&out, &norm);
                sums.load.add_assign(&models.load.backward(&sample.features, &scaled)?);
                if let (Some(acc), Some(m), Some(g)) = (&mut sums.impedance, &models.impedance, &out.reactance_grad) {
                    let n = mean(&norm);
                    let scaled: Vec<f64> = g.iter().map(|v| v / n).collect();
                    acc.add_assign(&m.backward(&sample.features, &scaled)?);
                }
                sums.loss += loss;
                sums.regret += out.value.total;
                sums.mse += load_errors(&load_pred, &sample.true_load).0;
                sums.count += 1;
            }
            Pipeline::Slo => {
                let (load_pred, reactances) = models.predict(sample)?;
                let report = setup.scenario.output_regret(
                    &load_pred,
                    reactances.as_deref(),
                    sample,
                    truth,
                    setup.prices,
                    &config.penalties,
                    &settings,
                    false,
                );
                let out = match report {
                    Ok(o) => o,
                    Err(e) if is_solver_failure(&e) => {
                        log::warn!("sample at {} skipped: {e}", sample.timestamp);
                        sums.skipped += 1;
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                };
                let (g, loss) = squared_error_gradient(&models.load.output, &load_pred, &sample.true_load);
                sums.load.add_assign(&models.load.backward(&sample.features, &g)?);
                sums.loss += loss;
                if let (Some(acc), Some(m), Some(pred), Some(t)) = (
                    &mut sums.impedance,
                    &models.impedance,
                    &reactances,
                    &sample.true_reactances,
                ) {
                    let (g, loss) = squared_error_gradient(&m.output, pred, t);
                    acc.add_assign(&m.backward(&sample.features, &g)?);
                    sums.loss += loss;
                }
                sums.regret += out.value.total;
                sums.mse += load_errors(&load_pred, &sample.true_load).0;
                sums.count += 1;
            }
        }
    }
    Ok(sums)
}

fn regret_norm(prices: &PriceBook, model: &PredictionModel) -> Vec<f64> {
    let m = prices.mean_mcp();
    model.output.scale.iter().map(|s| m * s).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Regret in standardized units and its gradient on the load outputs.
/// When each output is its own dispatch period, period `k` is divided by
/// output `k`'s norm; zone outputs of one period share the mean norm.
fn normalized_regret(out: &OutputRegret, norm: &[f64]) -> (f64, Vec<f64>) {
    if out.period_values.len() == norm.len() {
        let loss = out.period_values.iter().zip(norm).map(|(v, n)| v.total / n).sum();
        let grad = out.load_grad.iter().zip(norm).map(|(g, n)| g / n).collect();
        (loss, grad)
    } else {
        let n = mean(norm);
        (out.value.total / n, out.load_grad.iter().map(|g| g / n).collect())
    }
}

/// `Σ ((pred − truth)/σ)²` and its gradient with respect to `pred`.
fn squared_error_gradient(scaler: &OutputScaler, pred: &[f64], truth: &[f64]) -> (Vec<f64>, f64) {
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(truth)
        .zip(&scaler.scale)
        .map(|((p, t), s)| {
            let e = (p - t) / s;
            loss += e * e;
            2.0 * e / s
        })
        .collect();
    (grad, loss)
}

/// Trains with the configured pipeline. `clock` returns seconds on some
/// monotone scale and is only used for the wall-time column.
pub fn train(
    config: &TrainingConfig,
    scenario: &Scenario,
    train: &[ContextSample],
    test: Option<&[ContextSample]>,
    clock: &dyn Fn() -> f64,
) -> Result<(ModelSet, TrainingHistory), TrainingError> {
    config.validate()?;
    if train.is_empty() {
        return Err(TrainingError::EmptyDataset);
    }
    let prices = PriceBook::from_fleet(&scenario.fleet);
    let setup = TrainingSetup {
        config,
        scenario,
        prices: &prices,
    };
    let settings = config.train_settings();
    let truth: Vec<Option<Vec<DispatchSolution>>> = train
        .iter()
        .map(|s| match scenario.truth_dispatch(s, &settings) {
            Ok(t) => Ok(Some(t)),
            Err(e) if is_solver_failure(&e) => {
                log::warn!("truth dispatch failed at {}: {e}", s.timestamp);
                Ok(None)
            }
            Err(e) => Err(e),
        })
        .collect::<Result<_, RegretError>>()?;

    let mut models = ModelSet::init(config, scenario, train)?;
    let mut best = (f64::INFINITY, 0usize, models.clone());
    let mut history = TrainingHistory::default();
    let start = clock();
    for epoch in 1..=config.epochs {
        let sums = epoch_pass(&setup, &models, train, &truth)?;
        if sums.skipped as f64 > MAX_SKIP_FRACTION * train.len() as f64 {
            return Err(TrainingError::TooManySkipped {
                epoch,
                skipped: sums.skipped,
                total: train.len(),
            });
        }
        let n = sums.count.max(1) as f64;
        let mut sums = sums;
        sums.load.scale(1.0 / n);
        if let Some(g) = &mut sums.impedance {
            g.scale(1.0 / n);
        }
        let record = EpochRecord {
            epoch,
            train_regret: sums.regret / n,
            train_mse: sums.mse / n,
            train_loss: sums.loss / n,
            skipped: sums.skipped,
            wall_seconds: clock() - start,
        };
        let score = match config.pipeline {
            Pipeline::Ilo => record.train_regret,
            Pipeline::Slo => record.train_loss,
        };
        if score < best.0 {
            best = (score, epoch, models.clone());
        }
        log::debug!(
            "{} {:?} epoch {epoch}: regret {:.4} mse {:.4}",
            config.case.name(),
            config.pipeline,
            record.train_regret,
            record.train_mse
        );
        history.epochs.push(record);

        if !sums.load.is_finite() || sums.impedance.as_ref().is_some_and(|g| !g.is_finite()) {
            return Err(TrainingError::NonFinite { epoch });
        }
        models.load.sgd_step(&sums.load, config.load_learning_rate)?;
        if let (Some(m), Some(g)) = (&mut models.impedance, &sums.impedance) {
            m.sgd_step(g, config.impedance_learning_rate)?;
        }
    }
    history.best_epoch = best.1;
    let models = best.2;
    if let Some(test) = test {
        history.test = Some(evaluate(&models, scenario, test, &config.penalties, config.mu_eval)?);
    }
    Ok((models, history))
}

/// ILO training; the config's pipeline must be ILO.
pub fn train_ilo(
    config: &TrainingConfig,
    scenario: &Scenario,
    samples: &[ContextSample],
    test: Option<&[ContextSample]>,
    clock: &dyn Fn() -> f64,
) -> Result<(ModelSet, TrainingHistory), TrainingError> {
    if config.pipeline != Pipeline::Ilo {
        return Err(TrainingError::Config("train_ilo needs the ILO pipeline"));
    }
    train(config, scenario, samples, test, clock)
}

/// SLO training; the config's pipeline must be SLO.
pub fn train_slo(
    config: &TrainingConfig,
    scenario: &Scenario,
    samples: &[ContextSample],
    test: Option<&[ContextSample]>,
    clock: &dyn Fn() -> f64,
) -> Result<(ModelSet, TrainingHistory), TrainingError> {
    if config.pipeline != Pipeline::Slo {
        return Err(TrainingError::Config("train_slo needs the SLO pipeline"));
    }
    train(config, scenario, samples, test, clock)
}

/// Something that predicts the parameters of a sample.
pub trait Forecaster {
    fn forecast(&self, sample: &ContextSample) -> Result<(Vec<f64>, Option<Vec<f64>>), PredictorError>;
}

impl Forecaster for ModelSet {
    fn forecast(&self, sample: &ContextSample) -> Result<(Vec<f64>, Option<Vec<f64>>), PredictorError> {
        self.predict(sample)
    }
}

/// Predicts the realized values; the zero-regret reference.
#[derive(Debug, Clone, Copy, Default)]
pub struct TruthOracle;

impl Forecaster for TruthOracle {
    fn forecast(&self, sample: &ContextSample) -> Result<(Vec<f64>, Option<Vec<f64>>), PredictorError> {
        Ok((sample.true_load.clone(), sample.true_reactances.clone()))
    }
}

/// Mean regret and load error at barrier coefficient `mu`. Failed samples
/// are counted and left out of the means.
pub fn evaluate(
    models: &dyn Forecaster,
    scenario: &Scenario,
    samples: &[ContextSample],
    penalties: &PenaltySetting,
    mu: f64,
) -> Result<Metrics, TrainingError> {
    if samples.is_empty() {
        return Err(TrainingError::EmptyDataset);
    }
    let prices = PriceBook::from_fleet(&scenario.fleet);
    let settings = BarrierSettings::with_mu(mu);
    let mut instances = Vec::with_capacity(samples.len());
    let mut failed = 0;
    for sample in samples {
        let (load, reactances) = models.forecast(sample)?;
        let result = scenario.truth_dispatch(sample, &settings).and_then(|truth| {
            scenario.output_regret(
                &load,
                reactances.as_deref(),
                sample,
                &truth,
                &prices,
                penalties,
                &settings,
                false,
            )
        });
        match result {
            Ok(out) => {
                let (sq, signed) = load_errors(&load, &sample.true_load);
                instances.push(InstanceMetrics {
                    timestamp: sample.timestamp,
                    regret: out.value,
                    squared_error: sq,
                    signed_error: signed,
                    load_pred: load,
                    reactances_pred: reactances,
                });
            }
            Err(e) if is_solver_failure(&e) => {
                log::warn!("evaluation failed at {}: {e}", sample.timestamp);
                failed += 1;
            }
            Err(e) => return Err(e.into()),
        }
    }
    if instances.is_empty() {
        return Err(TrainingError::AllFailed { failed });
    }
    let n = instances.len() as f64;
    Ok(Metrics {
        mean_regret: instances.iter().map(|i| i.regret.total).sum::<f64>() / n,
        mean_mse: instances.iter().map(|i| i.squared_error).sum::<f64>() / n,
        mean_signed_error: instances.iter().map(|i| i.signed_error).sum::<f64>() / n,
        failed,
        instances,
    })
}

impl From<OptError> for TrainingError {
    fn from(e: OptError) -> Self {
        TrainingError::Regret(RegretError::Opt(e))
    }
}
