//! x0-prediction training with AdamW and condition updating at the noisy
//! pose.

use std::collections::BTreeSet;

use log::info;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::{Architecture, ScoreModel};
use super::schedule::make_schedule;
use super::ScoreError;
use crate::cloud::{local_context, DEFAULT_K, DEFAULT_M};
use crate::derived_rng;
use crate::geom::Pose9;
use crate::planner::PlacementRecord;
use crate::scenes::SceneName;

/// Examples per gradient chunk; chunks are summed in index order so the
/// reduction is independent of thread scheduling.
const GRAD_CHUNK: usize = 8;
const NOISE_RETRIES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub k: usize,
    pub m: usize,
    pub leave_out: Option<SceneName>,
    pub arch: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 300,
            batch_size: 32,
            lr: 1e-3,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            k: DEFAULT_K,
            m: DEFAULT_M,
            leave_out: None,
            arch: Architecture::default(),
        }
    }
}

/// Records available to training after the leave-out filter.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    records: Vec<PlacementRecord>,
    leave_out: Option<SceneName>,
}

impl TrainingSet {
    pub fn new(records: Vec<PlacementRecord>, leave_out: Option<SceneName>) -> Result<Self, ScoreError> {
        let records: Vec<_> = records.into_iter().filter(|r| Some(r.scene) != leave_out).collect();
        if records.is_empty() {
            return Err(ScoreError::DataFormat("no training records after filtering".into()));
        }
        for r in &records {
            if r.scene_cloud.is_empty() || r.object_cloud.is_empty() {
                return Err(ScoreError::DataFormat(format!("record {} of {} has an empty cloud", r.index, r.scene)));
            }
            if !r.label.to_array().iter().all(|v| v.is_finite()) {
                return Err(ScoreError::DataFormat(format!("record {} of {} has a non-finite label", r.index, r.scene)));
            }
        }
        Ok(Self { records, leave_out })
    }

    pub fn records(&self) -> &[PlacementRecord] {
        &self.records
    }

    pub fn leave_out(&self) -> Option<SceneName> {
        self.leave_out
    }

    pub fn scenes(&self) -> BTreeSet<SceneName> {
        self.records.iter().map(|r| r.scene).collect()
    }
}

/// SHA-256 over the record contents in order.
pub fn dataset_hash(records: &[PlacementRecord]) -> String {
    let mut h = Sha256::new();
    for r in records {
        h.update(r.scene.as_str().as_bytes());
        h.update((r.index as u64).to_le_bytes());
        for v in r.label.to_array() {
            h.update(v.to_le_bytes());
        }
        for p in &r.scene_cloud {
            for v in p.to_array() {
                h.update(v.to_le_bytes());
            }
        }
        for p in &r.object_cloud {
            for v in p.to_array() {
                h.update(v.to_le_bytes());
            }
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// AdamW moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: ScoreModel<f32>,
    pub v: ScoreModel<f32>,
}

impl AdamState {
    pub fn new(arch: &Architecture) -> Self {
        Self { step: 0, m: ScoreModel::zeros(arch), v: ScoreModel::zeros(arch) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainMetadata {
    pub seed: u64,
    pub epochs: usize,
    pub dataset_hash: String,
    pub leave_out: Option<SceneName>,
    pub scenes: Vec<SceneName>,
    pub t_train: usize,
    pub k: usize,
    pub m: usize,
    pub final_loss: f64,
}

/// Trained parameters, optimizer state and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ScoreModel<f32>,
    pub adam: AdamState,
    pub metadata: TrainMetadata,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    /// Mean per-example loss of every epoch.
    pub loss_curve: Vec<f64>,
}

fn adamw_step(model: &mut ScoreModel<f32>, grads: &ScoreModel<f32>, adam: &mut AdamState, lr: f64, config: &TrainConfig) {
    adam.step += 1;
    let t = adam.step as i32;
    let bc1 = 1.0 - config.beta1.powi(t);
    let bc2 = 1.0 - config.beta2.powi(t);
    let (b1, b2) = (config.beta1 as f32, config.beta2 as f32);
    let (lr, wd, eps) = (lr as f32, config.weight_decay as f32, config.adam_eps as f32);
    let (bc1, bc2) = (bc1 as f32, bc2 as f32);
    let update = |p: &mut f32, g: f32, m: &mut f32, v: &mut f32| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let mh = *m / bc1;
        let vh = *v / bc2;
        *p -= lr * (mh / (vh.sqrt() + eps) + wd * *p);
    };
    for (((layer, g), m), v) in model.layers.iter_mut().zip(&grads.layers).zip(&mut adam.m.layers).zip(&mut adam.v.layers) {
        ndarray::Zip::from(&mut layer.w).and(&g.w).and(&mut m.w).and(&mut v.w).for_each(|p, &g, m, v| update(p, g, m, v));
        ndarray::Zip::from(&mut layer.b).and(&g.b).and(&mut m.b).and(&mut v.b).for_each(|p, &g, m, v| update(p, g, m, v));
    }
}

struct Example<'a> {
    record: &'a PlacementRecord,
    t: usize,
    x_t: [f64; 9],
}

/// Trains a fresh model on `set`.
pub fn train(set: &TrainingSet, config: &TrainConfig) -> Result<TrainOutput, ScoreError> {
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(ScoreError::DataFormat("epochs and batch size must be positive".into()));
    }
    let schedule = make_schedule(config.arch.t_train);
    let mut model = ScoreModel::<f32>::init(&config.arch, config.seed);
    let mut adam = AdamState::new(&config.arch);
    let records = set.records();
    let batches_per_epoch = records.len().div_ceil(config.batch_size);
    let total_steps = (batches_per_epoch * config.epochs) as f64;
    let mut loss_curve = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut rng = derived_rng(config.seed, &[1, epoch as u64]);
        let mut order: Vec<usize> = (0..records.len()).collect();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            let mut examples = Vec::with_capacity(batch.len());
            for &i in batch {
                let record = &records[i];
                let t = rng.random_range(1..=config.arch.t_train);
                let x0 = record.label.to_array();
                let mut x_t = None;
                for _ in 0..NOISE_RETRIES {
                    let noise: [f64; 9] = std::array::from_fn(|_| rng.sample(StandardNormal));
                    let candidate = schedule.q_sample(&x0, t, &noise);
                    if Pose9::from_array(&candidate).rotation().is_ok() {
                        x_t = Some(candidate);
                        break;
                    }
                }
                let x_t = x_t.ok_or_else(|| ScoreError::DataFormat("degenerate noisy rotation".into()))?;
                examples.push(Example { record, t, x_t });
            }
            let partials: Vec<(f64, ScoreModel<f32>)> = examples
                .par_chunks(GRAD_CHUNK)
                .map(|chunk| {
                    let mut grads = ScoreModel::<f32>::zeros(&config.arch);
                    let mut loss = 0.0f64;
                    for ex in chunk {
                        let obs = local_context(
                            &ex.record.scene_cloud,
                            &ex.record.object_cloud,
                            &Pose9::from_array(&ex.x_t),
                            config.k,
                            config.m,
                        )
                        .expect("rotation checked when drawing the noise");
                        loss += model.loss_and_grad(&obs, &ex.x_t, ex.t, &ex.record.label.to_array(), &mut grads) as f64;
                    }
                    (loss, grads)
                })
                .collect();
            let mut grads = ScoreModel::<f32>::zeros(&config.arch);
            let mut batch_loss = 0.0;
            for (l, g) in &partials {
                batch_loss += l;
                grads.add_scaled(g, 1.0);
            }
            grads.scale(1.0 / examples.len() as f32);
            if !batch_loss.is_finite() || !grads.is_finite() {
                return Err(ScoreError::NonFiniteLoss { epoch, batch: batch_idx, loss: batch_loss / examples.len() as f64 });
            }
            epoch_loss += batch_loss;
            let progress = adam.step as f64 / total_steps;
            let lr = config.lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
            adamw_step(&mut model, &grads, &mut adam, lr, config);
            if !model.is_finite() {
                return Err(ScoreError::NonFiniteLoss { epoch, batch: batch_idx, loss: batch_loss / examples.len() as f64 });
            }
        }
        let mean = epoch_loss / records.len() as f64;
        info!("epoch {epoch}: loss {mean:.6}");
        loss_curve.push(mean);
    }

    let metadata = TrainMetadata {
        seed: config.seed,
        epochs: config.epochs,
        dataset_hash: dataset_hash(records),
        leave_out: set.leave_out(),
        scenes: set.scenes().into_iter().collect(),
        t_train: config.arch.t_train,
        k: config.k,
        m: config.m,
        final_loss: *loss_curve.last().expect("at least one epoch"),
    };
    Ok(TrainOutput { checkpoint: Checkpoint { model, adam, metadata }, loss_curve })
}
