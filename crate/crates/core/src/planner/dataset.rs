//! Expert placement datasets as JSON lines: one header line, then one
//! record per line with base64 little-endian f32 cloud payloads.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExpertPlanner, PlannerError};
use crate::cloud::{featurize, ObjectPoint, ScenePoint, OBJECT_POINTS, SCENE_POINTS};
use crate::geom::{ConvexBody, Pose9, EPS_CONTACT};
use crate::scenes::{augment_scene, build_scene, placed_cube, AugmentParams, SceneError, SceneName, SceneSpec, SizeReading};

pub const DATASET_FORMAT: &str = "stabledrop-placements";
pub const DATASET_VERSION: u32 = 1;
const RECORD_FIELDS: [&str; 8] = [
    "scene",
    "index",
    "yaw",
    "translation",
    "shuffle_seed",
    "label",
    "scene_cloud",
    "object_cloud",
];
/// Records generated in parallel before each write.
const CHUNK: usize = 32;

/// The placed cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub size: f64,
    pub reading: SizeReading,
    pub mass: f64,
    pub mu: f64,
}

impl Default for ObjectSpec {
    fn default() -> Self {
        Self { size: 2.0, reading: SizeReading::Volume, mass: 1.0, mu: 0.5 }
    }
}

impl ObjectSpec {
    pub fn body(&self) -> Result<ConvexBody, SceneError> {
        placed_cube(self.size, self.reading, self.mass, self.mu)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetOptions {
    pub scenes: Vec<SceneName>,
    pub per_scene: usize,
    pub seed: u64,
    /// Expert proposals allowed per record.
    pub budget: usize,
    pub object: ObjectSpec,
    pub contact_eps: f64,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            scenes: SceneName::ALL.to_vec(),
            per_scene: 800,
            seed: 0,
            budget: 10_000,
            object: ObjectSpec::default(),
            contact_eps: EPS_CONTACT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub fields: Vec<String>,
    pub units: BTreeMap<String, String>,
    pub scene_points: usize,
    pub object_points: usize,
    pub seed: u64,
    pub per_scene: usize,
    pub scenes: Vec<SceneName>,
    pub scene_dims: BTreeMap<SceneName, BTreeMap<String, f64>>,
    pub object: ObjectSpec,
    pub contact_eps: f64,
}

impl DatasetHeader {
    fn new(options: &DatasetOptions) -> Self {
        let units = [
            ("translation", "m"),
            ("yaw", "rad"),
            ("label", "translation m, then the first two rotation columns"),
            ("scene_cloud", "f32 x 9: position m, normal, one-hot (1,0), robustness feature r/(r+10N), INF -> 1"),
            ("object_cloud", "f32 x 8: body-frame position m, normal, one-hot (0,1)"),
        ];
        Self {
            format: DATASET_FORMAT.to_string(),
            version: DATASET_VERSION,
            fields: RECORD_FIELDS.iter().map(|s| s.to_string()).collect(),
            units: units.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            scene_points: SCENE_POINTS,
            object_points: OBJECT_POINTS,
            seed: options.seed,
            per_scene: options.per_scene,
            scenes: options.scenes.clone(),
            scene_dims: options.scenes.iter().map(|s| (*s, s.default_dims())).collect(),
            object: options.object.clone(),
            contact_eps: options.contact_eps,
        }
    }
}

/// One expert placement in an augmented scene.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementRecord {
    pub scene: SceneName,
    pub index: usize,
    pub augment: AugmentParams,
    pub scene_cloud: Vec<ScenePoint>,
    pub object_cloud: Vec<ObjectPoint>,
    pub label: Pose9,
}

impl PlacementRecord {
    /// The augmented scene the label was generated in.
    pub fn scene_spec(&self, header: &DatasetHeader) -> Result<SceneSpec, SceneError> {
        let dims = header.scene_dims.get(&self.scene).cloned().unwrap_or_default();
        let base = build_scene(self.scene, &dims)?;
        Ok(augment_scene(&base, &self.augment)?.0)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    scene: SceneName,
    index: usize,
    yaw: f64,
    translation: [f64; 3],
    shuffle_seed: u64,
    label: [f64; 9],
    scene_cloud: String,
    object_cloud: String,
}

fn encode_f32(values: impl Iterator<Item = f64>) -> String {
    let bytes: Vec<u8> = values.flat_map(|v| (v as f32).to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode_f32(text: &str, expected: usize) -> Result<Vec<f64>, PlannerError> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| PlannerError::DataFormat(format!("bad base64 payload: {e}")))?;
    if bytes.len() != 4 * expected {
        return Err(PlannerError::DataFormat(format!(
            "payload has {} bytes, expected {}",
            bytes.len(),
            4 * expected
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

fn round_f32(v: f64) -> f64 {
    v as f32 as f64
}

fn round_vec(v: Vector3<f64>) -> Vector3<f64> {
    v.map(round_f32)
}

fn generate_record(
    options: &DatasetOptions,
    base: &SceneSpec,
    object: &ConvexBody,
    index: usize,
) -> Result<PlacementRecord, PlannerError> {
    let scene_tag = SceneName::ALL.iter().position(|s| *s == base.name).unwrap_or(0) as u64;
    let mut rng = crate::derived_rng(options.seed, &[scene_tag, index as u64]);
    let augment = AugmentParams::sample(&mut rng);
    let (feature_seed, expert_seed): (u64, u64) = (rng.random(), rng.random());
    let (scene, _) = augment_scene(base, &augment)?;
    let (mut scene_cloud, mut object_cloud) = featurize(&scene, object, feature_seed)?;
    let mut planner = ExpertPlanner::new(&scene, object, &scene_cloud);
    planner.validation.contact_eps = options.contact_eps;
    let outcome = planner.sample(expert_seed, options.budget).map_err(|e| match e {
        PlannerError::Exhausted { budget } => PlannerError::RecordExhausted {
            scene: base.name.to_string(),
            record: index,
            budget,
        },
        other => other,
    })?;
    let mut shuffle = ChaCha8Rng::seed_from_u64(augment.shuffle_seed);
    scene_cloud.shuffle(&mut shuffle);
    object_cloud.shuffle(&mut shuffle);
    for p in &mut scene_cloud {
        *p = ScenePoint {
            position: round_vec(p.position),
            normal: round_vec(p.normal),
            feature: round_f32(p.feature),
        };
    }
    for p in &mut object_cloud {
        *p = ObjectPoint { position: round_vec(p.position), normal: round_vec(p.normal) };
    }
    Ok(PlacementRecord {
        scene: base.name,
        index,
        augment,
        scene_cloud,
        object_cloud,
        label: outcome.pose,
    })
}

fn record_line(r: &PlacementRecord) -> Result<String, PlannerError> {
    let line = RecordLine {
        scene: r.scene,
        index: r.index,
        yaw: r.augment.yaw,
        translation: r.augment.translation.into(),
        shuffle_seed: r.augment.shuffle_seed,
        label: r.label.to_array(),
        scene_cloud: encode_f32(r.scene_cloud.iter().flat_map(|p| p.to_array())),
        object_cloud: encode_f32(r.object_cloud.iter().flat_map(|p| p.to_array())),
    };
    serde_json::to_string(&line).map_err(|e| PlannerError::DataFormat(e.to_string()))
}

/// Writes `header` and `records` to `out`.
pub fn write_dataset(header: &DatasetHeader, records: &[PlacementRecord], out: &Path) -> Result<(), PlannerError> {
    let mut w = BufWriter::new(File::create(out)?);
    writeln!(w, "{}", serde_json::to_string(header).map_err(|e| PlannerError::DataFormat(e.to_string()))?)?;
    for r in records {
        writeln!(w, "{}", record_line(r)?)?;
    }
    w.flush()?;
    Ok(())
}

/// Generates `per_scene` expert placements for every scene, each in a fresh
/// augmentation, and streams them to `out` in (scene, index) order. Returns
/// the number of records written.
pub fn generate_dataset(options: &DatasetOptions, out: &Path) -> Result<usize, PlannerError> {
    if options.per_scene == 0 {
        return Err(PlannerError::DataFormat("per_scene must be at least 1".into()));
    }
    let object = options.object.body()?;
    let bases = options
        .scenes
        .iter()
        .map(|s| build_scene(*s, &BTreeMap::new()))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, usize)> = (0..bases.len())
        .flat_map(|s| (0..options.per_scene).map(move |i| (s, i)))
        .collect();
    let header = DatasetHeader::new(options);
    let mut w = BufWriter::new(File::create(out)?);
    writeln!(w, "{}", serde_json::to_string(&header).map_err(|e| PlannerError::DataFormat(e.to_string()))?)?;
    let mut written = 0;
    for chunk in jobs.chunks(CHUNK) {
        let lines = chunk
            .par_iter()
            .map(|&(s, i)| generate_record(options, &bases[s], &object, i).and_then(|r| record_line(&r)))
            .collect::<Result<Vec<_>, _>>()?;
        for line in lines {
            writeln!(w, "{line}")?;
            written += 1;
        }
        log::info!("dataset: {written}/{} records", jobs.len());
    }
    w.flush()?;
    Ok(written)
}

/// Reads a dataset file written by [`generate_dataset`].
pub fn read_dataset(path: &Path) -> Result<(DatasetHeader, Vec<PlacementRecord>), PlannerError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let first = lines
        .next()
        .ok_or_else(|| PlannerError::DataFormat("empty dataset file".into()))??;
    let header: DatasetHeader =
        serde_json::from_str(&first).map_err(|e| PlannerError::DataFormat(format!("header: {e}")))?;
    if header.format != DATASET_FORMAT || header.version != DATASET_VERSION {
        return Err(PlannerError::DataFormat(format!(
            "unsupported dataset {} version {}",
            header.format, header.version
        )));
    }
    let mut records = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RecordLine = serde_json::from_str(&line)
            .map_err(|e| PlannerError::DataFormat(format!("record {}: {e}", n + 1)))?;
        let scene_cloud = decode_f32(&rec.scene_cloud, header.scene_points * ScenePoint::WIDTH)?
            .chunks_exact(ScenePoint::WIDTH)
            .map(ScenePoint::from_slice)
            .collect();
        let object_cloud = decode_f32(&rec.object_cloud, header.object_points * ObjectPoint::WIDTH)?
            .chunks_exact(ObjectPoint::WIDTH)
            .map(ObjectPoint::from_slice)
            .collect();
        records.push(PlacementRecord {
            scene: rec.scene,
            index: rec.index,
            augment: AugmentParams {
                yaw: rec.yaw,
                translation: Vector3::from(rec.translation),
                shuffle_seed: rec.shuffle_seed,
            },
            scene_cloud,
            object_cloud,
            label: Pose9::from_array(&rec.label),
        });
    }
    Ok((header, records))
}
