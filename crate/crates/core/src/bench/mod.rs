//! Evaluation metrics and protocols: validity and V/PF rates, post-placement
//! robustness statistics, planning time, and the benchmark report.

mod report;
mod svg;

pub use report::{run_benchmark, BenchConfig, EvalReport, ModelEntry, RobustnessRow, TimeRow, ValidityRow};
pub use svg::render_field_svg;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::RngCore;

use crate::cloud::{featurize, ObjectPoint, ScenePoint};
use crate::derived_rng;
use crate::geom::ConvexBody;
use crate::guide::{sample_with_clouds, GuideError, SamplerConfig};
use crate::planner::{ExpertPlanner, PlacementOutcome, PlannerError, ValidationConfig};
use crate::scenes::{augment_scene, build_scene, AugmentParams, SceneError, SceneName, SceneSpec};
use crate::score::{ScoreError, ScoreModel};
use crate::statics::StaticsError;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("no checkpoint for leave-out scene {scene}: {reason}")]
    MissingCheckpoint { scene: String, reason: String },
    #[error("invalid benchmark config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Statics(#[from] StaticsError),
    #[error(transparent)]
    Guide(#[from] GuideError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Placement counts of one sample set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Rates {
    pub total: usize,
    pub valid: usize,
    pub penetration_free: usize,
}

impl Rates {
    pub fn from_outcomes<'a>(outcomes: impl IntoIterator<Item = &'a PlacementOutcome>) -> Self {
        let mut r = Rates::default();
        for o in outcomes {
            r.total += 1;
            r.valid += o.valid() as usize;
            r.penetration_free += o.penetration_free as usize;
        }
        r
    }

    pub fn merge(&self, other: &Rates) -> Rates {
        Rates {
            total: self.total + other.total,
            valid: self.valid + other.valid,
            penetration_free: self.penetration_free + other.penetration_free,
        }
    }

    /// Valid placements in percent of all placements.
    pub fn validity(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        100.0 * self.valid as f64 / self.total as f64
    }

    /// Valid placements in percent of penetration-free ones; 0 when none is
    /// penetration-free.
    pub fn valid_over_pf(&self) -> f64 {
        if self.penetration_free == 0 {
            return 0.0;
        }
        100.0 * self.valid as f64 / self.penetration_free as f64
    }
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, sd: f64::NAN, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, sd, n }
    }
}

/// Fixed-precision rendering with `inf` and `nan` spelled out.
pub fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.4}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PlannerKind {
    Expert,
    Unguided,
    Guided,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 3] = [PlannerKind::Expert, PlannerKind::Unguided, PlannerKind::Guided];

    pub fn as_str(&self) -> &'static str {
        match self {
            PlannerKind::Expert => "expert",
            PlannerKind::Unguided => "unguided",
            PlannerKind::Guided => "guided",
        }
    }
}

/// One augmented copy of a base scene with its featurized clouds.
pub struct Variation {
    pub scene: SceneSpec,
    pub augment: AugmentParams,
    pub scene_cloud: Vec<ScenePoint>,
    pub object_cloud: Vec<ObjectPoint>,
}

/// Augmented variation `index` of `name`, drawn from the stream
/// `(seed, scene, index)`.
pub fn make_variation(
    name: SceneName,
    dims: &BTreeMap<String, f64>,
    object: &ConvexBody,
    seed: u64,
    index: usize,
) -> Result<Variation, BenchError> {
    let base = build_scene(name, dims)?;
    let scene_tag = SceneName::ALL.iter().position(|s| *s == name).expect("known scene") as u64;
    let mut rng = derived_rng(seed, &[scene_tag, index as u64]);
    let augment = AugmentParams::sample(&mut rng);
    let (scene, _) = augment_scene(&base, &augment)?;
    let (scene_cloud, object_cloud) = featurize(&scene, object, rng.next_u64())?;
    Ok(Variation { scene, augment, scene_cloud, object_cloud })
}

/// Sampling configuration of one planner.
#[derive(Debug, Clone)]
pub struct PlanSettings {
    pub sampler: SamplerConfig,
    pub expert_budget: usize,
}

/// Plans `n` placements on a variation.
pub fn plan_on_variation(
    kind: PlannerKind,
    model: Option<&ScoreModel<f32>>,
    variation: &Variation,
    object: &ConvexBody,
    n: usize,
    settings: &PlanSettings,
    seed: u64,
) -> Result<Vec<PlacementOutcome>, BenchError> {
    match kind {
        PlannerKind::Expert => {
            let mut expert = ExpertPlanner::new(&variation.scene, object, &variation.scene_cloud);
            expert.validation = settings.sampler.validation.clone();
            (0..n)
                .map(|i| {
                    let s = derived_rng(seed, &[i as u64]).next_u64();
                    Ok(expert.sample(s, settings.expert_budget)?)
                })
                .collect()
        }
        PlannerKind::Unguided | PlannerKind::Guided => {
            let model = model.ok_or_else(|| BenchError::InvalidConfig("learned planner needs a model".into()))?;
            let mut config = settings.sampler.clone();
            config.guided = kind == PlannerKind::Guided;
            config.guidance.batch = n;
            let chains = sample_with_clouds(
                model,
                &variation.scene,
                object,
                &variation.scene_cloud,
                &variation.object_cloud,
                &config,
                seed,
            )?;
            Ok(chains.into_iter().map(|c| c.outcome).collect())
        }
    }
}

fn check_split(n: usize, variations: usize) -> Result<usize, BenchError> {
    if variations == 0 || n == 0 || !n.is_multiple_of(variations) {
        return Err(BenchError::InvalidConfig(format!(
            "{n} placements cannot be split evenly over {variations} variations"
        )));
    }
    Ok(n / variations)
}

/// Validity and V/PF of a learned planner over `variations` augmented copies
/// of a scene, `n / variations` samples each.
#[allow(clippy::too_many_arguments)]
pub fn eval_validity(
    kind: PlannerKind,
    model: &ScoreModel<f32>,
    name: SceneName,
    dims: &BTreeMap<String, f64>,
    object: &ConvexBody,
    n: usize,
    variations: usize,
    settings: &PlanSettings,
    seed: u64,
) -> Result<Rates, BenchError> {
    let per = check_split(n, variations)?;
    let mut rates = Rates::default();
    for v in 0..variations {
        let variation = make_variation(name, dims, object, seed, v)?;
        let outcomes = plan_on_variation(kind, Some(model), &variation, object, per, settings, derived_rng(seed, &[v as u64, 1]).next_u64())?;
        rates = rates.merge(&Rates::from_outcomes(&outcomes));
    }
    Ok(rates)
}

/// Min and median post-placement robustness over valid placements: the
/// per-variation averages, then mean and sd across variations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessStats {
    pub min: MeanSd,
    pub median: MeanSd,
    pub valid: usize,
}

impl RobustnessStats {
    pub fn from_variations(per_variation: &[Vec<PlacementOutcome>]) -> Self {
        let mut mins = Vec::new();
        let mut medians = Vec::new();
        let mut valid = 0;
        for outcomes in per_variation {
            let pairs: Vec<(f64, f64)> = outcomes
                .iter()
                .filter(|o| o.valid())
                .filter_map(|o| Some((o.min_robustness?, o.median_robustness?)))
                .collect();
            if pairs.is_empty() {
                continue;
            }
            valid += pairs.len();
            mins.push(pairs.iter().map(|p| p.0).sum::<f64>() / pairs.len() as f64);
            medians.push(pairs.iter().map(|p| p.1).sum::<f64>() / pairs.len() as f64);
        }
        Self { min: MeanSd::of(&mins), median: MeanSd::of(&medians), valid }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn eval_robustness(
    kind: PlannerKind,
    model: Option<&ScoreModel<f32>>,
    name: SceneName,
    dims: &BTreeMap<String, f64>,
    object: &ConvexBody,
    n: usize,
    variations: usize,
    settings: &PlanSettings,
    seed: u64,
) -> Result<RobustnessStats, BenchError> {
    let per = check_split(n, variations)?;
    let mut all = Vec::with_capacity(variations);
    for v in 0..variations {
        let variation = make_variation(name, dims, object, seed, v)?;
        all.push(plan_on_variation(kind, model, &variation, object, per, settings, derived_rng(seed, &[v as u64, 2]).next_u64())?);
    }
    Ok(RobustnessStats::from_variations(&all))
}

/// Seconds per valid placement over `repeats` runs of `plan`, which returns
/// the outcomes of one batch. A run without valid placements counts as
/// `+inf`. Runs execute on a single worker thread.
pub fn time_per_valid(
    repeats: usize,
    mut plan: impl FnMut(usize) -> Result<Vec<PlacementOutcome>, BenchError> + Send,
) -> Result<MeanSd, BenchError> {
    if repeats == 0 {
        return Err(BenchError::InvalidConfig("timing needs at least one repeat".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| BenchError::InvalidConfig(e.to_string()))?;
    let times = pool.install(|| -> Result<Vec<f64>, BenchError> {
        (0..repeats)
            .map(|r| {
                let start = Instant::now();
                let outcomes = plan(r)?;
                let elapsed = start.elapsed().as_secs_f64();
                let valid = outcomes.iter().filter(|o| o.valid()).count();
                Ok(if valid == 0 { f64::INFINITY } else { elapsed / valid as f64 })
            })
            .collect()
    })?;
    Ok(MeanSd::of(&times))
}

/// Planning time per valid placement, including featurization (the scene
/// robustness field) and validation.
#[allow(clippy::too_many_arguments)]
pub fn eval_time(
    kind: PlannerKind,
    model: Option<&ScoreModel<f32>>,
    name: SceneName,
    dims: &BTreeMap<String, f64>,
    object: &ConvexBody,
    batch: usize,
    repeats: usize,
    settings: &PlanSettings,
    seed: u64,
) -> Result<MeanSd, BenchError> {
    let mut settings = settings.clone();
    settings.sampler.validation = ValidationConfig { robustness_points: None, ..settings.sampler.validation };
    time_per_valid(repeats, |r| {
        let variation = make_variation(name, dims, object, seed, r)?;
        plan_on_variation(kind, model, &variation, object, batch, &settings, derived_rng(seed, &[r as u64, 3]).next_u64())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Pose9;

    fn outcome(valid: bool, pf: bool) -> PlacementOutcome {
        PlacementOutcome {
            pose: Pose9::identity(),
            stable: valid,
            penetration_free: pf,
            min_robustness: valid.then_some(1.0),
            median_robustness: valid.then_some(2.0),
            wall_time: 0.0,
        }
    }

    #[test]
    fn rate_arithmetic() {
        let all: Vec<_> = (0..10).map(|_| outcome(true, true)).collect();
        let r = Rates::from_outcomes(&all);
        assert_eq!((r.validity(), r.valid_over_pf()), (100.0, 100.0));

        let mut mixed: Vec<_> = (0..50).map(|_| outcome(true, true)).collect();
        mixed.extend((0..30).map(|_| outcome(false, true)));
        mixed.extend((0..20).map(|_| outcome(false, false)));
        let r = Rates::from_outcomes(&mixed);
        assert_eq!(r.validity(), 50.0);
        assert_eq!(r.valid_over_pf(), 62.5);
        assert!(r.valid_over_pf() >= r.validity());
    }

    #[test]
    fn mean_sd() {
        let m = MeanSd::of(&[1.0, 2.0, 3.0]);
        assert_eq!((m.mean, m.sd, m.n), (2.0, 1.0, 3));
        assert_eq!(MeanSd::of(&[4.0]).sd, 0.0);
        assert!(MeanSd::of(&[]).mean.is_nan());
        assert_eq!(fmt_value(f64::INFINITY), "inf");
        assert_eq!(fmt_value(1.5), "1.5000");
    }

    #[test]
    fn robustness_stats_skip_invalid_placements() {
        let v1 = vec![outcome(true, true), outcome(false, true)];
        let mut v2 = vec![outcome(true, true)];
        v2[0].min_robustness = Some(3.0);
        let s = RobustnessStats::from_variations(&[v1, v2, vec![outcome(false, false)]]);
        assert_eq!(s.valid, 2);
        assert_eq!(s.min.n, 2);
        assert_eq!(s.min.mean, 2.0);
        assert!(s.min.mean <= s.median.mean);
    }

    #[test]
    fn stub_planner_time_is_positive_with_an_sd_over_repeats() {
        let t = time_per_valid(5, |_| {
            std::hint::black_box((0..1000).sum::<u64>());
            Ok(vec![outcome(true, true), outcome(false, false)])
        })
        .unwrap();
        assert_eq!(t.n, 5);
        assert!(t.mean > 0.0 && t.sd.is_finite());
        let none = time_per_valid(1, |_| Ok(vec![outcome(false, false)])).unwrap();
        assert!(none.mean.is_infinite());
    }

    #[test]
    fn uneven_split_is_rejected() {
        assert!(check_split(10, 3).is_err());
        assert_eq!(check_split(40, 4).unwrap(), 10);
    }
}
