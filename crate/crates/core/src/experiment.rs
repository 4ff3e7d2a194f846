//! Task-weight and network-density sweeps.

use log::info;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetContainer, Splits, WaveformKey};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::model::{ModelConfig, MtlModel, TaskWeights, Variant};
use crate::scalar::Scalar;
use crate::train::{train, TrainConfig, TrainHistory};

pub const WEIGHT_SWEEP_SNR_DB: i32 = -2;

/// `w_s` from 0 to 1 in steps of 0.1.
pub fn default_weight_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Sparser, base, denser and the two deeper variants.
pub fn default_density_configs() -> Vec<ModelConfig> {
    vec![
        ModelConfig::dense(4, 2, 128, 2, 128),
        ModelConfig::dense(8, 4, 256, 4, 256),
        ModelConfig::dense(16, 8, 512, 8, 512),
        ModelConfig::default().with_variant(Variant::C2Sh),
        ModelConfig::default().with_variant(Variant::C2ShTasks),
    ]
}

/// Held-out records used to score each sweep run.
#[derive(Clone, Copy)]
pub struct EvalSet<'a> {
    pub data: &'a DatasetContainer,
    pub keys: &'a [WaveformKey],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub label: String,
    pub model: ModelConfig,
    pub weights: TaskWeights,
    pub param_count: usize,
    pub history: TrainHistory,
    pub report: EvalReport,
}

/// Builds a fresh model from `model_cfg`, trains it and scores it on `eval`.
pub fn run_one<T: Scalar>(
    label: String,
    model_cfg: &ModelConfig,
    data: &DatasetContainer,
    splits: &Splits,
    cfg: &TrainConfig,
    eval: EvalSet<'_>,
    confusion_snr: Option<i32>,
) -> Result<(SweepRun, MtlModel<T>)> {
    let mut model = MtlModel::<T>::build(model_cfg.clone(), cfg.seed)?;
    info!("{label}: {} parameters", model.param_count());
    let history = train(&mut model, data, splits, cfg)?;
    let report = evaluate(&model, eval.data, eval.keys, confusion_snr)?;
    Ok((
        SweepRun {
            label,
            model: model_cfg.clone(),
            weights: cfg.weights,
            param_count: model.param_count(),
            history,
            report,
        },
        model,
    ))
}

/// One run per `w_s` in `grid`; `w_m = 1 - w_s`. Endpoints train a single head.
pub fn sweep_task_weights<T: Scalar>(
    data: &DatasetContainer,
    splits: &Splits,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    grid: &[f64],
    eval: EvalSet<'_>,
) -> Result<Vec<SweepRun>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("weight grid is empty".into()));
    }
    let weights = grid
        .iter()
        .map(|&w_s| TaskWeights::from_signal_weight(w_s))
        .collect::<Result<Vec<_>>>()?;
    let mut runs = Vec::with_capacity(grid.len());
    for w in weights {
        let cfg = TrainConfig { weights: w, ..cfg.clone() };
        let label = format!("w_s={:.1}", w.w_s());
        let (run, _) = run_one::<T>(label, model_cfg, data, splits, &cfg, eval, None)?;
        runs.push(run);
    }
    Ok(runs)
}

pub fn sweep_density<T: Scalar>(
    data: &DatasetContainer,
    splits: &Splits,
    configs: &[ModelConfig],
    cfg: &TrainConfig,
    eval: EvalSet<'_>,
) -> Result<Vec<SweepRun>> {
    let mut runs = Vec::with_capacity(configs.len());
    for mc in configs {
        mc.validate()?;
        let (run, _) = run_one::<T>(mc.label(), mc, data, splits, cfg, eval, None)?;
        runs.push(run);
    }
    Ok(runs)
}

/// Accuracy band `(max - min)` of `(modulation, signal)` over runs whose
/// `w_s` lies strictly inside (0, 1), at `snr`.
pub fn interior_band(runs: &[SweepRun], snr: i32) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = runs
        .iter()
        .filter(|r| r.weights.w_s() > 1e-9 && r.weights.w_s() < 1.0 - 1e-9)
        .filter_map(|r| r.report.at(snr).map(|c| (c.mod_acc(), c.sig_acc())))
        .collect();
    if pts.is_empty() {
        return None;
    }
    let band = |f: fn(&(f64, f64)) -> f64| {
        let v: Vec<f64> = pts.iter().map(f).collect();
        v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
    };
    Some((band(|p| p.0), band(|p| p.1)))
}
