//! Full benchmark: every leave-one-scene-out model on its unseen scene and
//! on the scenes it was trained on, written as CSV tables, a Markdown
//! report and robustness field figures.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{
    fmt_value, make_variation, plan_on_variation, render_field_svg, time_per_valid, BenchError, MeanSd, PlanSettings,
    PlannerKind, Rates, RobustnessStats,
};
use crate::cloud::{DEFAULT_K, DEFAULT_M};
use crate::derived_rng;
use crate::geom::EPS_CONTACT;
use crate::guide::{GuidanceConfig, SamplerConfig};
use crate::planner::{ObjectSpec, ValidationConfig};
use crate::scenes::{build_scene, SceneName};
use crate::score::{load_checkpoint, Checkpoint};
use crate::statics::robustness_field;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub leave_out: SceneName,
    /// Relative paths resolve against the config file's directory.
    pub checkpoint: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub seed: u64,
    pub scenes: Vec<SceneName>,
    /// Placements per scene and planner.
    pub placements: usize,
    pub variations: usize,
    /// Contact tolerance used when validating placements (m).
    pub contact_eps: f64,
    pub robustness_points: usize,
    pub expert_budget: usize,
    pub timing: bool,
    pub timing_repeats: usize,
    pub timing_batch: usize,
    pub k: usize,
    pub m: usize,
    pub guidance: GuidanceConfig,
    pub object: ObjectSpec,
    pub scene_dims: BTreeMap<SceneName, BTreeMap<String, f64>>,
    pub models: Vec<ModelEntry>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scenes: SceneName::ALL.to_vec(),
            placements: 40,
            variations: 4,
            contact_eps: EPS_CONTACT,
            robustness_points: 1024,
            expert_budget: 10_000,
            timing: true,
            timing_repeats: 5,
            timing_batch: 10,
            k: DEFAULT_K,
            m: DEFAULT_M,
            guidance: GuidanceConfig::default(),
            object: ObjectSpec::default(),
            scene_dims: BTreeMap::new(),
            models: Vec::new(),
        }
    }
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        toml::from_str(text).map_err(|e| BenchError::InvalidConfig(e.to_string()))
    }

    fn settings(&self, with_field: bool) -> PlanSettings {
        PlanSettings {
            sampler: SamplerConfig {
                guidance: self.guidance.clone(),
                guided: true,
                k: self.k,
                m: self.m,
                validation: ValidationConfig {
                    contact_eps: self.contact_eps,
                    robustness_points: with_field.then_some(self.robustness_points),
                    seed: self.seed,
                },
                trace: false,
            },
            expert_budget: self.expert_budget,
        }
    }
}

/// `table1.csv` row: one model and learned planner.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidityRow {
    pub model: String,
    pub planner: PlannerKind,
    /// Per known scene.
    pub known: Vec<(SceneName, Rates)>,
    pub unknown: Rates,
}

impl ValidityRow {
    pub fn ks_validity(&self) -> f64 {
        mean(self.known.iter().map(|(_, r)| r.validity()))
    }

    pub fn ks_vpf(&self) -> f64 {
        mean(self.known.iter().map(|(_, r)| r.valid_over_pf()))
    }

    pub fn all_validity(&self) -> f64 {
        0.5 * (self.ks_validity() + self.unknown.validity())
    }

    pub fn all_vpf(&self) -> f64 {
        0.5 * (self.ks_vpf() + self.unknown.valid_over_pf())
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// `table2.csv` and `table3.csv` row.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessRow {
    pub scene: SceneName,
    pub planner: PlannerKind,
    pub stats: RobustnessStats,
}

/// `table4.csv` row.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeRow {
    pub scene: SceneName,
    pub planner: PlannerKind,
    pub seconds: MeanSd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub validity: Vec<ValidityRow>,
    pub robustness: Vec<RobustnessRow>,
    pub timing: Vec<TimeRow>,
    pub files: Vec<PathBuf>,
}

fn scene_tag(name: SceneName) -> u64 {
    SceneName::ALL.iter().position(|s| *s == name).expect("known scene") as u64
}

fn load_models(config: &BenchConfig, base_dir: &Path) -> Result<Vec<(SceneName, Checkpoint)>, BenchError> {
    let mut out = Vec::new();
    for &scene in &config.scenes {
        let missing = |reason: String| BenchError::MissingCheckpoint { scene: scene.to_string(), reason };
        let entry = config
            .models
            .iter()
            .find(|m| m.leave_out == scene)
            .ok_or_else(|| missing("no model entry with this leave-out scene".into()))?;
        let path = base_dir.join(&entry.checkpoint);
        let ckpt = load_checkpoint(&path).map_err(|e| missing(format!("{}: {e}", path.display())))?;
        if ckpt.metadata.leave_out != Some(scene) {
            let tag = ckpt.metadata.leave_out.map(|s| s.to_string()).unwrap_or_else(|| "none".into());
            return Err(missing(format!("{} was trained with leave-out {tag}", path.display())));
        }
        out.push((scene, ckpt));
    }
    Ok(out)
}

/// Runs the benchmark described by `config` and writes `table1.csv` to
/// `table4.csv`, `report.md` and one `field_<scene>.svg` per scene into
/// `out_dir`.
pub fn run_benchmark(config: &BenchConfig, base_dir: &Path, out_dir: &Path) -> Result<EvalReport, BenchError> {
    if config.scenes.is_empty() {
        return Err(BenchError::InvalidConfig("no scenes selected".into()));
    }
    if config.variations == 0 || !config.placements.is_multiple_of(config.variations) || config.placements == 0 {
        return Err(BenchError::InvalidConfig(format!(
            "{} placements cannot be split evenly over {} variations",
            config.placements, config.variations
        )));
    }
    let models = load_models(config, base_dir)?;
    let object = config.object.body()?;
    let per = config.placements / config.variations;
    let full = config.settings(true);
    let quick = config.settings(false);
    let dims = |s: SceneName| config.scene_dims.get(&s).cloned().unwrap_or_default();

    let mut validity = Vec::new();
    let mut robustness = Vec::new();
    let mut timing = Vec::new();
    for (unknown, ckpt) in &models {
        let model = &ckpt.model;
        let u_tag = scene_tag(*unknown);
        log::info!("evaluating the {unknown}-out model");

        // unseen scene: validity and robustness for all planners
        let mut per_planner: BTreeMap<PlannerKind, Vec<Vec<_>>> = BTreeMap::new();
        for v in 0..config.variations {
            let variation = make_variation(*unknown, &dims(*unknown), &object, config.seed, v)?;
            let sample_seed = derived_rng(config.seed, &[u_tag, v as u64, 0]).next_u64();
            for kind in PlannerKind::ALL {
                let outcomes = plan_on_variation(kind, Some(model), &variation, &object, per, &full, sample_seed)?;
                per_planner.entry(kind).or_default().push(outcomes);
            }
        }
        for (kind, outcomes) in &per_planner {
            robustness.push(RobustnessRow {
                scene: *unknown,
                planner: *kind,
                stats: RobustnessStats::from_variations(outcomes),
            });
        }

        // known scenes: validity only
        let known_scenes: Vec<SceneName> =
            ckpt.metadata.scenes.iter().copied().filter(|s| s != unknown).collect();
        let mut known: BTreeMap<PlannerKind, Vec<(SceneName, Rates)>> = BTreeMap::new();
        for &scene in &known_scenes {
            let k_tag = scene_tag(scene);
            let mut rates: BTreeMap<PlannerKind, Rates> = BTreeMap::new();
            for v in 0..config.variations {
                let variation = make_variation(scene, &dims(scene), &object, config.seed, v)?;
                let sample_seed = derived_rng(config.seed, &[u_tag, v as u64, 1 + k_tag]).next_u64();
                for kind in [PlannerKind::Unguided, PlannerKind::Guided] {
                    let outcomes = plan_on_variation(kind, Some(model), &variation, &object, per, &quick, sample_seed)?;
                    let r = rates.entry(kind).or_default();
                    *r = r.merge(&Rates::from_outcomes(&outcomes));
                }
            }
            for (kind, r) in rates {
                known.entry(kind).or_default().push((scene, r));
            }
        }
        for kind in [PlannerKind::Unguided, PlannerKind::Guided] {
            let unknown_rates = per_planner[&kind].iter().fold(Rates::default(), |acc, o| acc.merge(&Rates::from_outcomes(o)));
            validity.push(ValidityRow {
                model: format!("{unknown}_out"),
                planner: kind,
                known: known.remove(&kind).unwrap_or_default(),
                unknown: unknown_rates,
            });
        }

        if config.timing {
            for kind in PlannerKind::ALL {
                let seconds = time_per_valid(config.timing_repeats, |r| {
                    let variation = make_variation(*unknown, &dims(*unknown), &object, config.seed ^ 0x7157, r)?;
                    let seed = derived_rng(config.seed, &[u_tag, r as u64, 9]).next_u64();
                    plan_on_variation(kind, Some(model), &variation, &object, config.timing_batch, &quick, seed)
                })?;
                timing.push(TimeRow { scene: *unknown, planner: kind, seconds });
            }
        }
    }

    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let mut write = |name: &str, text: String| -> Result<(), BenchError> {
        let path = out_dir.join(name);
        fs::write(&path, text)?;
        files.push(path);
        Ok(())
    };
    let t1 = table1(&validity);
    let t2 = table_robustness(&robustness, |s| s.min);
    let t3 = table_robustness(&robustness, |s| s.median);
    let t4 = table4(&timing);
    write("table1.csv", t1.clone())?;
    write("table2.csv", t2.clone())?;
    write("table3.csv", t3.clone())?;
    write("table4.csv", t4.clone())?;
    let mut figures = Vec::new();
    for &scene in &config.scenes {
        let name = format!("field_{scene}.svg");
        write(&name, field_figure(scene, &dims(scene), config.seed)?)?;
        figures.push(name);
    }
    write("report.md", markdown(config, &models, [&t1, &t2, &t3, &t4], &figures))?;
    Ok(EvalReport { validity, robustness, timing, files })
}

fn table1(rows: &[ValidityRow]) -> String {
    let mut s = String::from(
        "model,planner,ks_valid_pct,us_valid_pct,all_valid_pct,ks_vpf_pct,us_vpf_pct,all_vpf_pct,us_total,us_valid,us_penetration_free\n",
    );
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.model,
            r.planner.as_str(),
            fmt_value(r.ks_validity()),
            fmt_value(r.unknown.validity()),
            fmt_value(r.all_validity()),
            fmt_value(r.ks_vpf()),
            fmt_value(r.unknown.valid_over_pf()),
            fmt_value(r.all_vpf()),
            r.unknown.total,
            r.unknown.valid,
            r.unknown.penetration_free
        )
        .unwrap();
    }
    for kind in [PlannerKind::Unguided, PlannerKind::Guided] {
        let sel: Vec<&ValidityRow> = rows.iter().filter(|r| r.planner == kind).collect();
        if sel.is_empty() {
            continue;
        }
        let avg = |f: &dyn Fn(&ValidityRow) -> f64| fmt_value(mean(sel.iter().map(|r| f(r))));
        writeln!(
            s,
            "average,{},{},{},{},{},{},{},,,",
            kind.as_str(),
            avg(&|r| r.ks_validity()),
            avg(&|r| r.unknown.validity()),
            avg(&|r| r.all_validity()),
            avg(&|r| r.ks_vpf()),
            avg(&|r| r.unknown.valid_over_pf()),
            avg(&|r| r.all_vpf()),
        )
        .unwrap();
    }
    s
}

fn table_robustness(rows: &[RobustnessRow], pick: impl Fn(&RobustnessStats) -> MeanSd) -> String {
    let mut s = String::from("scene,planner,mean_n,sd_n,variations,valid_placements\n");
    for r in rows {
        let v = pick(&r.stats);
        writeln!(s, "{},{},{},{},{},{}", r.scene, r.planner.as_str(), fmt_value(v.mean), fmt_value(v.sd), v.n, r.stats.valid)
            .unwrap();
    }
    for kind in PlannerKind::ALL {
        let means: Vec<f64> = rows.iter().filter(|r| r.planner == kind).map(|r| pick(&r.stats).mean).collect();
        if !means.is_empty() {
            writeln!(s, "average,{},{},,,", kind.as_str(), fmt_value(mean(means.into_iter()))).unwrap();
        }
    }
    s
}

fn table4(rows: &[TimeRow]) -> String {
    let mut s = String::from("scene,planner,mean_s,sd_s,repeats\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{}",
            r.scene,
            r.planner.as_str(),
            fmt_value(r.seconds.mean),
            fmt_value(r.seconds.sd),
            r.seconds.n
        )
        .unwrap();
    }
    s
}

fn field_figure(
    scene: SceneName,
    dims: &BTreeMap<String, f64>,
    seed: u64,
) -> Result<String, BenchError> {
    let spec = build_scene(scene, dims)?;
    let mut rng = derived_rng(seed, &[scene_tag(scene), u64::MAX]);
    let samples = spec.surface_sampler().sample(1024, &mut rng);
    let field = robustness_field(&spec.all_bodies(), &samples, &spec.statics_config())?;
    let points: Vec<_> = samples.iter().map(|s| s.position).collect();
    let values: Vec<f64> = field.iter().map(|f| if f.failed { f64::NAN } else { f.value }).collect();
    Ok(render_field_svg(&format!("{scene} robustness field"), &points, &values))
}

fn csv_to_markdown(csv: &str) -> String {
    let mut out = String::new();
    for (i, line) in csv.lines().enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        writeln!(out, "| {} |", cells.join(" | ")).unwrap();
        if i == 0 {
            writeln!(out, "|{}", "---|".repeat(cells.len())).unwrap();
        }
    }
    out
}

fn markdown(config: &BenchConfig, models: &[(SceneName, Checkpoint)], tables: [&String; 4], figures: &[String]) -> String {
    let mut s = String::from("# Placement benchmark\n\n");
    s.push_str("## Models\n\n| leave-out | seed | epochs | dataset sha256 | final loss |\n|---|---|---|---|---|\n");
    for (scene, ckpt) in models {
        let m = &ckpt.metadata;
        writeln!(s, "| {scene} | {} | {} | {} | {} |", m.seed, m.epochs, m.dataset_hash, fmt_value(m.final_loss)).unwrap();
    }
    let titles = [
        "Validity and valid-over-penetration-free rates (%)",
        "Minimum scene robustness after placing (N)",
        "Median scene robustness after placing (N)",
        "Planning time per valid placement (s)",
    ];
    for (i, (title, table)) in titles.iter().zip(tables).enumerate() {
        writeln!(s, "\n## Table {}: {title}\n", i + 1).unwrap();
        if i == 3 && !config.timing {
            s.push_str("Timing disabled in this run.\n");
        } else {
            s.push_str(&csv_to_markdown(table));
        }
    }
    s.push_str("\n## Robustness fields\n\n");
    for f in figures {
        writeln!(s, "![{f}]({f})").unwrap();
    }
    s.push_str("\n## Configuration\n\n```toml\n");
    s.push_str(&toml::to_string(config).unwrap_or_default());
    s.push_str("```\n");
    s
}
