//! Acceptance run: prints PASS or FAIL for criteria 1 to 9.
//!
//! Criteria 1 to 5 and 9 are exact or oracle checks and abort the run when
//! they fail. Criteria 6 to 8 depend on training scale and hardware; they
//! are measured and reported without aborting.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use nalgebra::Vector3;
use ndarray::Axis;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stabledrop::bench::{make_variation, plan_on_variation, run_benchmark, BenchConfig, ModelEntry, PlanSettings, PlannerKind, Rates, RobustnessStats};
use stabledrop::cloud::{featurize, local_context, ObjectPoint, Observation, ScenePoint};
use stabledrop::geom::{make_cuboid, sample_surface, ConvexBody, Pose9, Rotation6, EPS_CONTACT};
use stabledrop::guide::{sample_placements, sample_with_clouds, stability_grad, stability_loss, GuidanceConfig, SamplerConfig};
use stabledrop::planner::{generate_dataset, read_dataset, validate_placement, DatasetOptions, ExpertPlanner, ValidationConfig};
use stabledrop::scenes::{augment_scene, build_scene, default_object, AugmentParams, SceneName};
use stabledrop::score::{checkpoint_to_bytes, train, Architecture, Checkpoint, ScoreModel, TrainConfig, TrainingSet};
use stabledrop::statics::{detect_contacts, equilibrium_feasible, robustness_field, ExternalForce, RobustnessSolver, StaticsConfig};

/// Contact tolerance for the directional guidance comparison of learned
/// placements (m).
const EVAL_CONTACT_EPS: f64 = 0.02;
const DESK_PER_SCENE: usize = 32;
const DESK_EPOCHS: usize = 300;
const SAMPLING_SEEDS: u64 = 5;

struct Report {
    lines: Vec<(u32, bool, bool, String)>,
}

impl Report {
    /// Records a criterion; `hard` ones abort the run when they fail.
    fn record(&mut self, id: u32, pass: bool, hard: bool, detail: String) {
        println!("criterion {id}: {} {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push((id, pass, hard, detail));
    }
}

// 1 and 2: statics

fn ground() -> ConvexBody {
    make_cuboid(Vector3::new(10.0, 10.0, 0.1), 1.0, 0.5)
        .unwrap()
        .with_id("ground")
        .with_pose(Pose9::from_translation(Vector3::new(0.0, 0.0, -0.05)))
        .fixed()
}

fn block(id: &str, extents: Vector3<f64>, mass: f64, at: Vector3<f64>, yaw: f64) -> ConvexBody {
    make_cuboid(extents, mass, 0.5).unwrap().with_id(id).with_pose(Pose9::new(at, Rotation6::from_yaw(yaw)))
}

fn lp_robustness(bodies: &[ConvexBody], body: usize, p: Vector3<f64>, e: Vector3<f64>) -> f64 {
    let config = StaticsConfig::default();
    let contacts = detect_contacts(bodies, config.contact_eps).unwrap();
    RobustnessSolver::new(bodies, &contacts, &config).unwrap().robustness_on(body, &p, &e).unwrap()
}

fn bisection_oracle(bodies: &[ConvexBody], body: usize, p: Vector3<f64>, e: Vector3<f64>) -> f64 {
    let config = StaticsConfig::default();
    let contacts = detect_contacts(bodies, config.contact_eps).unwrap();
    let feasible = |f: f64| {
        let ext = ExternalForce { body, point: p, force: e * f };
        equilibrium_feasible(bodies, &contacts, Some(&ext), &config).unwrap()
    };
    if feasible(1e5) {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (0.0, 1e5);
    while hi - lo > 1e-7 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn criterion_1(report: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut unbounded = 0;
    let mut agree = true;
    for case in 0..50 {
        let ext1 = Vector3::new(rng.random_range(0.4..1.5), rng.random_range(0.4..1.5), rng.random_range(0.3..1.5));
        let yaw = rng.random_range(0.0..std::f64::consts::TAU);
        let mut bodies = vec![ground(), block("a", ext1, rng.random_range(0.5..3.0), Vector3::new(0.0, 0.0, ext1.z / 2.0), yaw)];
        if case % 2 == 1 {
            let ext2 = Vector3::new(rng.random_range(0.3..1.0), rng.random_range(0.3..1.0), rng.random_range(0.2..1.0));
            let off = Vector3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), ext1.z + ext2.z / 2.0);
            let r = bodies[1].pose.rotation().unwrap();
            let at = r * Vector3::new(off.x, off.y, 0.0) + Vector3::new(0.0, 0.0, off.z);
            bodies.push(block("b", ext2, rng.random_range(0.5..3.0), Vector3::zeros(), 0.0).with_pose(Pose9::from_rotation(&r, at)));
        }
        let body = 1 + rng.random_range(0..bodies.len() - 1);
        let s = &sample_surface(&bodies[body], 1, case)[0];
        let lp = lp_robustness(&bodies, body, s.position, -s.normal);
        let oracle = bisection_oracle(&bodies, body, s.position, -s.normal);
        if oracle.is_infinite() {
            unbounded += 1;
            agree &= lp.is_infinite() || lp > 1e5;
        } else {
            worst = worst.max((lp - oracle).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = agree && worst < 1e-4 && secs < 60.0;
    report.record(1, pass, true, format!("max |LP - bisection| = {worst:.2e} N over 50 scenes ({unbounded} unbounded), {secs:.1} s"));
}

fn criterion_2(report: &mut Report) {
    let scene = vec![ground(), block("cube", Vector3::repeat(1.0), 1.0, Vector3::new(0.0, 0.0, 0.5), 0.0)];
    let side = lp_robustness(&scene, 1, Vector3::new(0.5, 0.0, 0.5), -Vector3::x());
    let top = lp_robustness(&scene, 1, Vector3::new(0.0, 0.0, 1.0), -Vector3::z());
    let pass = (side - 4.905).abs() < 1e-3 && top == f64::INFINITY;
    report.record(2, pass, true, format!("side push {side:.6} N (expect 4.905), top press {top}"));
}

// 3: gradients

fn unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize()
}

fn guidance_instance(seed: u64) -> (Pose9, Vec<ScenePoint>, Vec<ObjectPoint>) {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let scene = (0..40)
        .map(|_| {
            let position = Vector3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.05..0.05));
            ScenePoint { position, normal: unit(&mut rng), feature: rng.random_range(0.0..1.0) }
        })
        .collect();
    let object = (0..30)
        .map(|_| {
            let position = Vector3::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05));
            ObjectPoint { position, normal: unit(&mut rng) }
        })
        .collect();
    let a1 = Vector3::x() + unit(&mut rng) * 0.4;
    let a2 = Vector3::y() + unit(&mut rng) * 0.4;
    let t = Vector3::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), rng.random_range(0.0..0.08));
    (Pose9::new(t, Rotation6::new(a1, a2)), scene, object)
}

fn random_observation(seed: u64, n_scene: usize, n_object: usize) -> Observation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = || Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    Observation {
        scene: (0..n_scene).map(|_| ScenePoint { position: v(), normal: Vector3::z(), feature: 0.5 }).collect(),
        object: (0..n_object).map(|_| ObjectPoint { position: v(), normal: Vector3::x() }).collect(),
        centroid: v(),
    }
}

fn random_pose(seed: u64) -> [f64; 9] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::array::from_fn(|_| rng.random_range(-1.0..1.0))
}

/// Relative error of f32 parameter gradients against f64 central
/// differences on a sample of weights and biases of every layer.
fn denoiser_gradient_error() -> f64 {
    let arch = Architecture::default();
    let model64 = ScoreModel::<f32>::init(&arch, 3).cast::<f64>();
    let model = model64.cast::<f32>();
    let obs = random_observation(1, 12, 10);
    let (xt, x0) = (random_pose(2), random_pose(3));
    let mut grads = ScoreModel::<f32>::zeros(&arch);
    model.loss_and_grad(&obs, &xt, 37, &x0, &mut grads);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-4;
    let (mut num, mut den) = (0.0, 0.0);
    for li in 0..model64.layers.len() {
        for _ in 0..12 {
            let (mut plus, mut minus) = (model64.clone(), model64.clone());
            let analytic = if rng.random_bool(0.3) {
                let col = rng.random_range(0..model64.layers[li].b.len());
                plus.layers[li].b[col] += h;
                minus.layers[li].b[col] -= h;
                grads.layers[li].b[col] as f64
            } else {
                let w = &model64.layers[li].w;
                let at = (rng.random_range(0..w.nrows()), rng.random_range(0..w.ncols()));
                plus.layers[li].w[at] += h;
                minus.layers[li].w[at] -= h;
                grads.layers[li].w[at] as f64
            };
            let fd = (plus.loss(&obs, &xt, 37, &x0) - minus.loss(&obs, &xt, 37, &x0)) / (2.0 * h);
            num += (analytic - fd).powi(2);
            den += fd * fd;
        }
    }
    (num / den).sqrt()
}

fn criterion_3(report: &mut Report) {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let (p, s, o) = guidance_instance(seed);
        let g = stability_grad(&p, &s, &o, 0.05).unwrap();
        let x = p.to_array();
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..9 {
            let (mut a, mut b) = (x, x);
            a[i] += h;
            b[i] -= h;
            let fd = (stability_loss(&Pose9::from_array(&a), &s, &o, 0.05).unwrap()
                - stability_loss(&Pose9::from_array(&b), &s, &o, 0.05).unwrap())
                / (2.0 * h);
            num += (g[i] - fd).powi(2);
            den += fd * fd;
        }
        worst = worst.max((num / den).sqrt());
    }
    let model_err = denoiser_gradient_error();
    let pass = worst < 1e-5 && model_err < 1e-3;
    report.record(3, pass, true, format!("guidance max rel err {worst:.2e} (f64, 20 instances), denoiser rel err {model_err:.2e} (f32)"));
}

// 4: exact equivalences

fn strip_time(chains: &mut [stabledrop::guide::ChainResult]) {
    for c in chains {
        c.outcome.wall_time = 0.0;
    }
}

fn criterion_4(report: &mut Report) {
    let arch = Architecture {
        encoder_widths: vec![16, 16, 32],
        latent_dim: 32,
        time_dim: 16,
        denoiser_widths: vec![32, 16, 32],
        ..Architecture::default()
    };
    let model = ScoreModel::<f32>::init(&arch, 1);
    let scene = build_scene(SceneName::Shelf, &BTreeMap::new()).unwrap();
    let object = default_object();
    let (sc, oc) = featurize(&scene, &object, 4).unwrap();

    let mut bitwise = true;
    let mut rotations_ok = true;
    let mut worst_orth: f64 = 0.0;
    for seed in 0..3 {
        let guidance = GuidanceConfig { gamma: 0.0, interval: 1, steps: 10, batch: 4, ..GuidanceConfig::default() };
        let config = SamplerConfig { guidance, k: 4, m: 64, validation: ValidationConfig::quick(), trace: true, ..SamplerConfig::default() };
        let mut guided = sample_with_clouds(&model, &scene, &object, &sc, &oc, &config, seed).unwrap();
        let plain_config = SamplerConfig { guided: false, ..config };
        let mut plain = sample_with_clouds(&model, &scene, &object, &sc, &oc, &plain_config, seed).unwrap();
        strip_time(&mut guided);
        strip_time(&mut plain);
        bitwise &= guided == plain;
        for chain in &guided {
            for x in &chain.trace {
                let r = Pose9::from_array(x).rotation().unwrap();
                let err = (r.transpose() * r - nalgebra::Matrix3::identity()).abs().max().max((r.determinant() - 1.0).abs());
                worst_orth = worst_orth.max(err);
            }
            rotations_ok &= !chain.flagged;
        }
    }
    rotations_ok &= worst_orth < 1e-9;

    let big = ScoreModel::<f32>::init(&Architecture::default(), 0);
    let x = ScoreModel::<f32>::encoder_input(&random_observation(7, 300, 200));
    let mut idx: Vec<usize> = (0..x.nrows()).collect();
    idx.reverse();
    idx.swap(3, 77);
    let permuted = x.select(Axis(0), &idx);
    let perm_ok = big.encode(x.view()) == big.encode(permuted.view());

    let pose = Pose9::new(Vector3::new(0.3, -0.2, 1.1), Rotation6::from_yaw(0.7));
    let shift = Vector3::new(3.25, -1.5, 0.75);
    let moved: Vec<ScenePoint> = sc.iter().map(|s| ScenePoint { position: s.position + shift, ..*s }).collect();
    let a = local_context(&sc, &oc, &pose, 8, 512).unwrap();
    let b = local_context(&moved, &oc, &Pose9::new(pose.translation + shift, pose.rot6), 8, 512).unwrap();
    let mut obs_diff: f64 = 0.0;
    for (p, q) in a.scene.iter().zip(&b.scene) {
        obs_diff = obs_diff.max((p.position - q.position).norm()).max((p.normal - q.normal).norm()).max((p.feature - q.feature).abs());
    }
    for (p, q) in a.object.iter().zip(&b.object) {
        obs_diff = obs_diff.max((p.position - q.position).norm()).max((p.normal - q.normal).norm());
    }
    let same_shape = a.scene.len() == b.scene.len() && a.object.len() == b.object.len();
    let translation_ok = same_shape && obs_diff < 1e-9;

    let pass = bitwise && rotations_ok && perm_ok && translation_ok;
    report.record(
        4,
        pass,
        true,
        format!(
            "gamma=0 bitwise {bitwise}, SO(3) max err {worst_orth:.1e}, permutation invariant {perm_ok}, \
             translated observation max diff {obs_diff:.1e}"
        ),
    );
}

// 5: augmentation equivariance of expert placements

fn criterion_5(report: &mut Report) {
    let object = default_object();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let (mut valid, mut trials) = (0, 0);
    for (i, name) in SceneName::ALL.into_iter().enumerate() {
        let scene = build_scene(name, &BTreeMap::new()).unwrap();
        let (cloud, _) = featurize(&scene, &object, 70 + i as u64).unwrap();
        let planner = ExpertPlanner::new(&scene, &object, &cloud);
        for trial in 0..25 {
            let out = planner.sample(500 + trial, 10_000).unwrap();
            let params = AugmentParams::sample(&mut rng);
            let (aug, transform) = augment_scene(&scene, &params).unwrap();
            let mapped = transform.compose(&out.pose).unwrap();
            trials += 1;
            valid += validate_placement(&aug, &object, &mapped, &ValidationConfig::quick()).unwrap().valid() as usize;
        }
    }
    report.record(5, valid == trials, true, format!("{valid}/{trials} mapped expert placements valid"));
}

// 6 to 8: learned model

fn toy_overfit_ratio() -> f64 {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.jsonl");
    let options = DatasetOptions { scenes: vec![SceneName::Table, SceneName::Shelf], per_scene: 5, seed: 11, ..Default::default() };
    generate_dataset(&options, &data).unwrap();
    let set = TrainingSet::new(read_dataset(&data).unwrap().1, None).unwrap();
    let config = TrainConfig { seed: 0, epochs: 300, batch_size: 2, ..TrainConfig::default() };
    let curve = train(&set, &config).unwrap().loss_curve;
    let tail = &curve[curve.len() - 10..];
    curve[0] / (tail.iter().sum::<f64>() / tail.len() as f64)
}

/// Trained on shelf, cantilever and balance; table is the unseen scene.
fn desk_model(dir: &Path) -> Checkpoint {
    let data = dir.join("desk.jsonl");
    let scenes = vec![SceneName::Shelf, SceneName::Cantilever, SceneName::Balance];
    generate_dataset(&DatasetOptions { scenes, per_scene: DESK_PER_SCENE, seed: 3, ..Default::default() }, &data).unwrap();
    let set = TrainingSet::new(read_dataset(&data).unwrap().1, Some(SceneName::Table)).unwrap();
    let config = TrainConfig { seed: 1, epochs: DESK_EPOCHS, leave_out: Some(SceneName::Table), ..TrainConfig::default() };
    train(&set, &config).unwrap().checkpoint
}

struct DeskEval {
    strict: BTreeMap<PlannerKind, Rates>,
    relaxed: BTreeMap<PlannerKind, Rates>,
    robustness: BTreeMap<PlannerKind, RobustnessStats>,
}

/// Batch-10 sampling on augmented copies of the unseen scene, one per
/// sampling seed, with both learned planners sharing seeds.
fn evaluate_desk(model: &ScoreModel<f32>) -> DeskEval {
    let object = default_object();
    let settings = PlanSettings {
        sampler: SamplerConfig {
            validation: ValidationConfig { contact_eps: EVAL_CONTACT_EPS, robustness_points: Some(1024), seed: 0 },
            ..SamplerConfig::default()
        },
        expert_budget: 10_000,
    };
    let mut eval = DeskEval { strict: BTreeMap::new(), relaxed: BTreeMap::new(), robustness: BTreeMap::new() };
    let mut per_seed: BTreeMap<PlannerKind, Vec<Vec<_>>> = BTreeMap::new();
    for seed in 0..SAMPLING_SEEDS {
        let variation = make_variation(SceneName::Table, &BTreeMap::new(), &object, seed, 0).unwrap();
        for kind in [PlannerKind::Unguided, PlannerKind::Guided] {
            let outcomes = plan_on_variation(kind, Some(model), &variation, &object, 10, &settings, seed).unwrap();
            let strict: Vec<_> = outcomes
                .iter()
                .map(|o| validate_placement(&variation.scene, &object, &o.pose, &ValidationConfig::quick()).unwrap())
                .collect();
            let s = eval.strict.entry(kind).or_default();
            *s = s.merge(&Rates::from_outcomes(&strict));
            let r = eval.relaxed.entry(kind).or_default();
            *r = r.merge(&Rates::from_outcomes(&outcomes));
            per_seed.entry(kind).or_default().push(outcomes);
        }
    }
    for (kind, outcomes) in per_seed {
        eval.robustness.insert(kind, RobustnessStats::from_variations(&outcomes));
    }
    eval
}

fn criterion_6(report: &mut Report, ratio: f64, desk_secs: f64, eval: &DeskEval) {
    let guided = eval.strict[&PlannerKind::Guided];
    let unguided = eval.strict[&PlannerKind::Unguided];
    let relaxed = eval.relaxed[&PlannerKind::Guided];
    let pass = ratio >= 10.0 && guided.validity() >= 20.0;
    report.record(
        6,
        pass,
        false,
        format!(
            "toy overfit loss ratio {ratio:.2} (need >= 10); unseen-scene validity guided {:.1}% / unguided {:.1}% \
             at eps {EPS_CONTACT} (need >= 20%), guided {:.1}% at eps {EVAL_CONTACT_EPS}; desk training {desk_secs:.0} s",
            guided.validity(),
            unguided.validity(),
            relaxed.validity()
        ),
    );
}

fn criterion_7(report: &mut Report, eval: &DeskEval) {
    let (g, u) = (eval.relaxed[&PlannerKind::Guided], eval.relaxed[&PlannerKind::Unguided]);
    let (gr, ur) = (eval.robustness[&PlannerKind::Guided].min.mean, eval.robustness[&PlannerKind::Unguided].min.mean);
    let gain = gr / ur - 1.0;
    let pass = g.valid_over_pf() >= u.valid_over_pf() && gr.is_finite() && ur.is_finite() && gain >= 0.10;
    report.record(
        7,
        pass,
        false,
        format!(
            "over {SAMPLING_SEEDS} seeds at eps {EVAL_CONTACT_EPS}: V/PF guided {:.1}% vs unguided {:.1}%, \
             mean min robustness guided {gr:.3} N vs unguided {ur:.3} N ({:+.0}%, need >= +10%)",
            g.valid_over_pf(),
            u.valid_over_pf(),
            100.0 * gain
        ),
    );
}

fn criterion_8(report: &mut Report, model: &ScoreModel<f32>) {
    let mut field_worst: f64 = 0.0;
    for name in SceneName::ALL {
        let scene = build_scene(name, &BTreeMap::new()).unwrap();
        let samples = scene.surface_sampler().sample(1024, &mut ChaCha8Rng::seed_from_u64(8));
        let start = Instant::now();
        robustness_field(&scene.all_bodies(), &samples, &scene.statics_config()).unwrap();
        field_worst = field_worst.max(start.elapsed().as_secs_f64());
    }
    let scene = build_scene(SceneName::Table, &BTreeMap::new()).unwrap();
    let guidance = GuidanceConfig { interval: 1, steps: 50, batch: 10, ..GuidanceConfig::default() };
    let config = SamplerConfig { guidance, validation: ValidationConfig::quick(), ..SamplerConfig::default() };
    let start = Instant::now();
    sample_placements(model, &scene, &default_object(), &config, 0).unwrap();
    let sample_secs = start.elapsed().as_secs_f64();
    let workers = rayon::current_num_threads();
    let pass = field_worst < 10.0 && sample_secs < 30.0;
    report.record(
        8,
        pass,
        false,
        format!("slowest 1024-point field {field_worst:.2} s (< 10), guided batch-10 sampling {sample_secs:.2} s (< 30), {workers} worker(s)"),
    );
}

// 9: determinism

fn small_arch() -> Architecture {
    Architecture {
        encoder_widths: vec![16, 16, 32],
        latent_dim: 32,
        time_dim: 16,
        denoiser_widths: vec![32, 16, 32],
        ..Architecture::default()
    }
}

fn criterion_9(report: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name);
    let options = DatasetOptions { scenes: vec![SceneName::Table, SceneName::Shelf], per_scene: 3, seed: 9, ..Default::default() };
    generate_dataset(&options, &path("a.jsonl")).unwrap();
    generate_dataset(&options, &path("b.jsonl")).unwrap();
    let dataset_same = fs::read(path("a.jsonl")).unwrap() == fs::read(path("b.jsonl")).unwrap();

    let records = read_dataset(&path("a.jsonl")).unwrap().1;
    let config = TrainConfig { epochs: 3, batch_size: 2, leave_out: Some(SceneName::Table), arch: small_arch(), ..TrainConfig::default() };
    let set = TrainingSet::new(records, Some(SceneName::Table)).unwrap();
    let first = train(&set, &config).unwrap().checkpoint;
    let second = train(&set, &config).unwrap().checkpoint;
    let training_same = checkpoint_to_bytes(&first).unwrap() == checkpoint_to_bytes(&second).unwrap();
    stabledrop::score::save_checkpoint(&first, &path("table.ckpt")).unwrap();

    let scene = build_scene(SceneName::Table, &BTreeMap::new()).unwrap();
    let guidance = GuidanceConfig { steps: 8, batch: 4, ..GuidanceConfig::default() };
    let sconfig = SamplerConfig { guidance, k: 4, m: 64, validation: ValidationConfig::quick(), ..SamplerConfig::default() };
    let poses = |seed| -> Vec<[f64; 9]> {
        let batch = sample_placements(&first.model, &scene, &default_object(), &sconfig, seed).unwrap();
        batch.outcomes().map(|o| o.pose.to_array()).collect()
    };
    let sampling_same = poses(21) == poses(21);

    let bench = BenchConfig {
        seed: 2,
        scenes: vec![SceneName::Table],
        placements: 2,
        variations: 1,
        robustness_points: 32,
        expert_budget: 2000,
        timing: false,
        k: 4,
        m: 64,
        guidance: GuidanceConfig { steps: 6, ..GuidanceConfig::default() },
        models: vec![ModelEntry { leave_out: SceneName::Table, checkpoint: "table.ckpt".into() }],
        ..BenchConfig::default()
    };
    let ra = run_benchmark(&bench, dir.path(), &path("ra")).unwrap();
    run_benchmark(&bench, dir.path(), &path("rb")).unwrap();
    let reports_same = ra.files.iter().all(|f| {
        let name = f.file_name().unwrap();
        fs::read(f).unwrap() == fs::read(path("rb").join(name)).unwrap()
    });

    let pass = dataset_same && training_same && sampling_same && reports_same;
    report.record(
        9,
        pass,
        true,
        format!("identical reruns: dataset {dataset_same}, checkpoint {training_same}, samples {sampling_same}, reports {reports_same}"),
    );
}

fn main() {
    let mut report = Report { lines: Vec::new() };
    criterion_1(&mut report);
    criterion_2(&mut report);
    criterion_3(&mut report);
    criterion_4(&mut report);
    criterion_5(&mut report);
    criterion_9(&mut report);

    let ratio = toy_overfit_ratio();
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let desk = desk_model(dir.path());
    let desk_secs = start.elapsed().as_secs_f64();
    let eval = evaluate_desk(&desk.model);
    criterion_6(&mut report, ratio, desk_secs, &eval);
    criterion_7(&mut report, &eval);
    criterion_8(&mut report, &desk.model);

    report.lines.sort_by_key(|l| l.0);
    println!("\nacceptance summary");
    for (id, pass, _, _) in &report.lines {
        println!("  {id}: {}", if *pass { "PASS" } else { "FAIL" });
    }
    let broken: Vec<u32> = report.lines.iter().filter(|l| l.2 && !l.1).map(|l| l.0).collect();
    if !broken.is_empty() {
        eprintln!("exact criteria failed: {broken:?}");
        std::process::exit(1);
    }
}
