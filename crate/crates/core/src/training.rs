//! Full-batch Adam training with periodic RAR-D resampling.

use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point;
use crate::loss::{loss_and_gradient, InteriorData, LossBreakdown, LossData, LossWeights};
use crate::networks::{DualNetwork, Order, Side};
use crate::problems::ProblemDefinition;
use crate::reporting::ErrorReport;
use crate::sampling::{rard_resample, sample_subdomain, substream, CollocationSet, RardConfig, ResampleStats, SamplingError};

/// Stream of the training seed used for resampling draws.
const RESAMPLE_STREAM: u64 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("shape mismatch: {0} parameters, {1} gradient entries, {2} moments")]
    Shape(usize, usize, usize),
    #[error("non-finite gradient entry {index}")]
    NonFiniteGradient { index: usize },
    #[error("non-finite loss at step {step}: {loss:?}")]
    NonFinite {
        step: usize,
        loss: LossBreakdown,
        /// Parameters of the last step with a finite loss.
        last_good: Box<DualNetwork>,
    },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

/// One bias-corrected Adam update of `theta` in place.
pub fn adam_step(theta: &mut [f64], grad: &[f64], state: &mut AdamState, hyper: &AdamConfig) -> Result<(), TrainError> {
    if theta.len() != grad.len() || state.m.len() != theta.len() || state.v.len() != theta.len() {
        return Err(TrainError::Shape(theta.len(), grad.len(), state.m.len()));
    }
    if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
        return Err(TrainError::NonFiniteGradient { index });
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - hyper.beta1.powi(t);
    let c2 = 1.0 - hyper.beta2.powi(t);
    for i in 0..theta.len() {
        let g = grad[i];
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        theta[i] -= hyper.learning_rate * mh / (vh.sqrt() + hyper.epsilon);
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub total_steps: usize,
    #[serde(default = "default_log_period")]
    pub log_period: usize,
    #[serde(default = "default_checkpoint_period")]
    pub checkpoint_period: usize,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default)]
    pub weights: LossWeights,
    /// `None` trains on the fixed initial sets.
    #[serde(default)]
    pub rard: Option<RardConfig>,
    /// Resampling seed; experiment configs override it with their own seed.
    #[serde(skip)]
    pub seed: u64,
}

fn default_log_period() -> usize {
    100
}

fn default_checkpoint_period() -> usize {
    5000
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.log_period == 0 {
            return Err("train.log_period must be at least 1".into());
        }
        if !self.total_steps.is_multiple_of(self.log_period) {
            return Err(format!(
                "train.total_steps ({}) must be a multiple of train.log_period ({})",
                self.total_steps, self.log_period
            ));
        }
        if self.checkpoint_period == 0 {
            return Err("train.checkpoint_period must be at least 1".into());
        }
        let a = &self.adam;
        if !(a.learning_rate > 0.0 && a.learning_rate.is_finite()) {
            return Err("train.adam.learning_rate must be positive".into());
        }
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2)) {
            return Err("train.adam.beta1 and beta2 must lie in [0, 1)".into());
        }
        if !(a.epsilon > 0.0) {
            return Err("train.adam.epsilon must be positive".into());
        }
        if let Some(r) = &self.rard {
            r.validate()?;
            if r.warmup_steps > self.total_steps {
                return Err(format!(
                    "train.rard.warmup_steps ({}) exceeds train.total_steps ({})",
                    r.warmup_steps, self.total_steps
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub step: usize,
    #[serde(flatten)]
    pub loss: LossBreakdown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResampleEvent {
    pub step: usize,
    pub side: Side,
    #[serde(flatten)]
    pub stats: ResampleStats,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<HistoryEntry>,
    pub resample_events: Vec<ResampleEvent>,
    pub final_params: Vec<f64>,
    pub wall_clock_seconds: f64,
    /// Filled in by callers that evaluate the trained model.
    pub errors: Option<ErrorReport>,
}

impl TrainReport {
    /// Loss history as CSV with a header row.
    pub fn history_csv(&self) -> String {
        let mut s = format!("step,{}\n", LossBreakdown::CSV_HEADER);
        for h in &self.history {
            let c = h.loss.components();
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                h.step, c[0], c[1], c[2], c[3], c[4], c[5], h.loss.total
            ));
        }
        s
    }
}

/// Hooks for streaming artifacts while training runs.
pub trait TrainObserver {
    fn on_log(&mut self, _entry: &HistoryEntry) {}
    fn on_resample(&mut self, _event: &ResampleEvent) {}
    fn on_checkpoint(&mut self, _step: usize, _dual: &DualNetwork, _adam: &AdamState) {}
}

/// Observer that ignores everything.
pub struct Silent;

impl TrainObserver for Silent {}

/// `|interior residual|` of `dual` at `pts`.
pub fn interior_residual_magnitudes(dual: &DualNetwork, def: &ProblemDefinition, side: Side, pts: &[Point]) -> Vec<f64> {
    let data = InteriorData::new(def, side, pts);
    let jets = dual.net(side).forward_batch(pts, Order::Laplacian).0;
    data.residuals(&jets).into_iter().map(f64::abs).collect()
}

fn resample_side(
    dual: &DualNetwork,
    def: &ProblemDefinition,
    colloc: &mut CollocationSet,
    side: Side,
    cfg: &RardConfig,
    rng: &mut ChaCha8Rng,
) -> Result<ResampleStats, TrainError> {
    let decomp = &def.decomposition;
    let (points, stats) = rard_resample(
        colloc.interior(side),
        |n, r| sample_subdomain(decomp, side, n, r),
        |pool| interior_residual_magnitudes(dual, def, side, pool),
        cfg,
        rng,
    )?;
    *colloc.interior_mut(side) = points;
    Ok(stats)
}

/// Runs `cfg.total_steps` Adam steps on `dual` in place. Interior sets of
/// `colloc` are replaced at RAR-D events; all other sets stay fixed.
pub fn train(
    dual: &mut DualNetwork,
    def: &ProblemDefinition,
    colloc: &mut CollocationSet,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainReport, TrainError> {
    cfg.validate().map_err(TrainError::Config)?;
    let start = Instant::now();
    let mut data = LossData::new(def, colloc);
    let mut adam = AdamState::new(dual.param_count());
    let mut rng = substream(cfg.seed, RESAMPLE_STREAM);
    let mut theta = dual.params();
    let mut history = Vec::with_capacity(cfg.total_steps / cfg.log_period);
    let mut events = Vec::new();
    for step in 1..=cfg.total_steps {
        let (loss, grad) = loss_and_gradient(dual, &data, &cfg.weights);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(TrainError::NonFinite {
                step,
                loss,
                last_good: Box::new(dual.clone()),
            });
        }
        adam_step(&mut theta, &grad, &mut adam, &cfg.adam)?;
        let last_good = dual.params();
        dual.set_params(&theta).expect("parameter length is fixed");
        if theta.iter().any(|t| !t.is_finite()) {
            let mut good = dual.clone();
            good.set_params(&last_good).unwrap();
            return Err(TrainError::NonFinite {
                step,
                loss,
                last_good: Box::new(good),
            });
        }
        if step % cfg.log_period == 0 {
            let entry = HistoryEntry { step, loss };
            observer.on_log(&entry);
            history.push(entry);
        }
        if let Some(r) = &cfg.rard {
            if r.is_event(step, cfg.total_steps) {
                for side in [Side::Side1, Side::Side2] {
                    let stats = resample_side(dual, def, colloc, side, r, &mut rng)?;
                    data.set_interior(def, side, colloc.interior(side));
                    let ev = ResampleEvent { step, side, stats };
                    observer.on_resample(&ev);
                    events.push(ev);
                }
            }
        }
        if step % cfg.checkpoint_period == 0 {
            observer.on_checkpoint(step, dual, &adam);
        }
    }
    Ok(TrainReport {
        history,
        resample_events: events,
        final_params: theta,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        errors: None,
    })
}
