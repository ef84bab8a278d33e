//! Reverse diffusion over poses with condition updating and optional
//! stability guidance.

use std::time::Instant;

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{stability_grad, GuidanceConfig, GuideError};
use crate::cloud::{featurize, local_context, ObjectPoint, ScenePoint, DEFAULT_K, DEFAULT_M};
use crate::derived_rng;
use crate::geom::{ConvexBody, Pose9};
use crate::planner::{validate_placement, PlacementOutcome, ValidationConfig};
use crate::scenes::SceneSpec;
use crate::score::{make_schedule, ScoreModel};

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub guidance: GuidanceConfig,
    /// `false` runs the plain reverse process and never evaluates the loss.
    pub guided: bool,
    pub k: usize,
    pub m: usize,
    pub validation: ValidationConfig,
    /// Keep the state after every step.
    pub trace: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            guidance: GuidanceConfig::default(),
            guided: true,
            k: DEFAULT_K,
            m: DEFAULT_M,
            validation: ValidationConfig::default(),
            trace: false,
        }
    }
}

impl SamplerConfig {
    pub fn unguided() -> Self {
        Self { guided: false, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    pub outcome: PlacementOutcome,
    /// The chain hit a degenerate rotation twice in one step and stopped.
    pub flagged: bool,
    pub trace: Vec<[f64; 9]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub chains: Vec<ChainResult>,
    /// Seconds spent featurizing the scene (robustness field included).
    pub featurize_time: f64,
    /// Seconds for the whole call.
    pub total_time: f64,
}

impl SampleBatch {
    pub fn outcomes(&self) -> impl Iterator<Item = &PlacementOutcome> {
        self.chains.iter().map(|c| &c.outcome)
    }
}

fn draw(rng: &mut ChaCha8Rng) -> [f64; 9] {
    std::array::from_fn(|_| rng.sample(StandardNormal))
}

/// Replaces the rotation block with its SO(3) projection.
fn project(x: &[f64; 9]) -> Option<[f64; 9]> {
    Pose9::from_array(x).orthogonalized().ok().map(|p| p.to_array())
}

fn run_chain(
    model: &ScoreModel<f32>,
    scene: &SceneSpec,
    object: &ConvexBody,
    scene_cloud: &[ScenePoint],
    object_cloud: &[ObjectPoint],
    config: &SamplerConfig,
    mut rng: ChaCha8Rng,
) -> Result<ChainResult, GuideError> {
    let schedule = make_schedule(model.arch.t_train);
    let g = &config.guidance;
    let mut trace = Vec::new();
    let mut flagged = false;

    let mut x = draw(&mut rng);
    if project(&x).is_none() {
        x = draw(&mut rng);
        flagged = project(&x).is_none();
    }
    if !flagged {
        for (i, (t, t_prev)) in schedule.inference_steps(g.steps).into_iter().enumerate() {
            let pose = Pose9::from_array(&x).orthogonalized()?;
            let obs = local_context(scene_cloud, object_cloud, &pose, config.k, config.m)?;
            let mut x0 = model.predict_x0(&obs, &x, t);
            if config.guided && i % g.interval == 0 {
                let grad = stability_grad(&pose, scene_cloud, object_cloud, g.d_max)?;
                for (a, b) in x0.iter_mut().zip(&grad) {
                    *a -= g.gamma * b;
                }
            }
            let post = schedule.posterior(t, t_prev);
            let mean = post.mean(&x0, &x);
            let step = |xi: &[f64; 9]| -> [f64; 9] { std::array::from_fn(|j| mean[j] + post.sigma * xi[j]) };
            let mut next = project(&step(&draw(&mut rng)));
            if next.is_none() {
                next = project(&step(&draw(&mut rng)));
            }
            match next {
                Some(n) => x = n,
                None => {
                    flagged = true;
                    break;
                }
            }
            if config.trace {
                trace.push(x);
            }
        }
    }

    let outcome = if flagged {
        log::warn!("sampling chain stopped on a degenerate rotation");
        PlacementOutcome {
            pose: Pose9::from_array(&x),
            stable: false,
            penetration_free: false,
            min_robustness: None,
            median_robustness: None,
            wall_time: 0.0,
        }
    } else {
        validate_placement(scene, object, &Pose9::from_array(&x), &config.validation)?
    };
    Ok(ChainResult { outcome, flagged, trace })
}

/// Runs `config.guidance.batch` chains on precomputed clouds. Chain `c`
/// draws from the stream `(seed, c)`.
pub fn sample_with_clouds(
    model: &ScoreModel<f32>,
    scene: &SceneSpec,
    object: &ConvexBody,
    scene_cloud: &[ScenePoint],
    object_cloud: &[ObjectPoint],
    config: &SamplerConfig,
    seed: u64,
) -> Result<Vec<ChainResult>, GuideError> {
    config.guidance.validate(model.arch.t_train)?;
    (0..config.guidance.batch)
        .into_par_iter()
        .map(|c| run_chain(model, scene, object, scene_cloud, object_cloud, config, derived_rng(seed, &[c as u64])))
        .collect()
}

/// Featurizes the scene, then samples a batch of placements.
pub fn sample_placements(
    model: &ScoreModel<f32>,
    scene: &SceneSpec,
    object: &ConvexBody,
    config: &SamplerConfig,
    seed: u64,
) -> Result<SampleBatch, GuideError> {
    let start = Instant::now();
    let feature_seed = derived_rng(seed, &[u64::MAX]).next_u64();
    let (scene_cloud, object_cloud) = featurize(scene, object, feature_seed)?;
    let featurize_time = start.elapsed().as_secs_f64();
    let chains = sample_with_clouds(model, scene, object, &scene_cloud, &object_cloud, config, seed)?;
    Ok(SampleBatch { chains, featurize_time, total_time: start.elapsed().as_secs_f64() })
}
