//! The four benchmark scenes, the placed object, scene augmentation and the
//! scene file format.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::geom::{make_cuboid, ConvexBody, FaceFilter, GeomError, Pose9, Rotation6, SurfaceSampler, GROUND_ID};
use crate::statics::{detect_contacts, equilibrium_feasible, StaticsConfig, StaticsError, STANDARD_GRAVITY};

/// Margin (m) by which the ground extends past the structure footprint.
pub const GROUND_MARGIN: f64 = 0.3;
pub const GROUND_THICKNESS: f64 = 0.1;
/// Half-width (m) of the per-axis augmentation translation range.
pub const AUGMENT_TRANSLATION: f64 = 5.0;

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("unknown scene {0}")]
    UnknownScene(String),
    #[error("unknown dimension {0}")]
    UnknownDim(String),
    #[error("invalid dimension {0}")]
    InvalidDim(String),
    #[error("base scene is not in equilibrium: {0}")]
    UnstableBaseScene(String),
    #[error(transparent)]
    Statics(#[from] StaticsError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("parse error at line {line}, column {column}: {message}")]
    ParseError { line: usize, column: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneName {
    Table,
    Cantilever,
    Balance,
    Shelf,
}

impl SceneName {
    pub const ALL: [SceneName; 4] = [SceneName::Table, SceneName::Cantilever, SceneName::Balance, SceneName::Shelf];

    pub fn as_str(&self) -> &'static str {
        match self {
            SceneName::Table => "table",
            SceneName::Cantilever => "cantilever",
            SceneName::Balance => "balance",
            SceneName::Shelf => "shelf",
        }
    }

    /// Default named dimensions (m, kg).
    pub fn default_dims(&self) -> BTreeMap<String, f64> {
        let entries: &[(&str, f64)] = match self {
            SceneName::Table => &[
                ("slab_x", 2.0),
                ("slab_y", 2.0),
                ("slab_z", 0.2),
                ("slab_mass", 1.0),
                ("slab_offset_x", 0.0),
                ("leg_w", 0.2),
                ("leg_h", 1.0),
                ("leg_offset", 0.4),
                ("leg_mass", 1.0),
                ("mu", 0.5),
            ],
            SceneName::Shelf => &[
                ("slab_x", 4.0),
                ("slab_y", 1.0),
                ("slab_z", 0.2),
                ("slab_mass", 1.0),
                ("wall_w", 0.2),
                ("wall_h", 1.0),
                ("wall_offset", 1.9),
                ("wall_mass", 1.0),
                ("mu", 0.5),
            ],
            SceneName::Cantilever => &[
                ("support_x", 1.0),
                ("support_y", 1.0),
                ("support_h", 1.0),
                ("support_mass", 1.0),
                ("slab_x", 3.0),
                ("slab_z", 0.2),
                ("slab_mass", 1.0),
                ("overhang", 1.8),
                ("weight_x", 0.4),
                ("weight_z", 0.4),
                ("weight_offset_x", -0.5),
                ("weight_mass", 1.0),
                ("mu", 0.5),
            ],
            SceneName::Balance => &[
                ("depth", 1.0),
                ("leg_w", 0.2),
                ("leg_h", 1.0),
                ("leg_offset", 1.4),
                ("leg_mass", 1.0),
                ("bottom_x", 4.0),
                ("slab_z", 0.2),
                ("bottom_mass", 1.0),
                ("mid_leg_h", 0.8),
                ("mid_leg_mass", 1.0),
                ("top_x", 2.4),
                ("top_mass", 1.0),
                ("mu", 0.5),
            ],
        };
        entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }
}

impl fmt::Display for SceneName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SceneName {
    type Err = SceneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SceneName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| SceneError::UnknownScene(s.to_string()))
    }
}

/// A benchmark scene: free bodies resting on a fixed ground cuboid.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub name: SceneName,
    pub bodies: Vec<ConvexBody>,
    pub ground: ConvexBody,
    pub gravity: Vector3<f64>,
    pub dims: BTreeMap<String, f64>,
}

impl SceneSpec {
    /// Ground first, then the free bodies.
    pub fn all_bodies(&self) -> Vec<ConvexBody> {
        let mut all = Vec::with_capacity(self.bodies.len() + 1);
        all.push(self.ground.clone());
        all.extend(self.bodies.iter().cloned());
        all
    }

    /// All bodies plus `object` as the last entry.
    pub fn with_object(&self, object: ConvexBody) -> Vec<ConvexBody> {
        let mut all = self.all_bodies();
        all.push(object);
        all
    }

    /// Sampler over the free bodies and the upper face of the ground.
    pub fn surface_sampler(&self) -> SurfaceSampler {
        SurfaceSampler::new(
            std::iter::once((&self.ground, FaceFilter::Upward))
                .chain(self.bodies.iter().map(|b| (b, FaceFilter::All))),
        )
    }

    pub fn statics_config(&self) -> StaticsConfig {
        StaticsConfig { gravity: self.gravity, ..Default::default() }
    }

    /// Checks that no pair penetrates and that gravity alone is balanced.
    pub fn check_equilibrium(&self) -> Result<(), SceneError> {
        let bodies = self.all_bodies();
        let config = self.statics_config();
        let contacts = match detect_contacts(&bodies, config.contact_eps) {
            Ok(c) => c,
            Err(StaticsError::PenetratingScene { a, b, .. }) => {
                return Err(SceneError::UnstableBaseScene(format!("{a} penetrates {b}")));
            }
            Err(e) => return Err(e.into()),
        };
        if equilibrium_feasible(&bodies, &contacts, None, &config)? {
            Ok(())
        } else {
            Err(SceneError::UnstableBaseScene(self.name.to_string()))
        }
    }
}

fn cuboid(id: &str, extents: [f64; 3], mass: f64, mu: f64, centre: [f64; 3]) -> Result<ConvexBody, SceneError> {
    Ok(make_cuboid(Vector3::from(extents), mass, mu)?
        .with_id(id)
        .with_pose(Pose9::from_translation(Vector3::from(centre))))
}

/// Fixed ground cuboid with its top at `z = 0` covering the footprint of
/// `bodies` plus a margin.
pub fn make_ground(bodies: &[ConvexBody], mu: f64) -> Result<ConvexBody, SceneError> {
    let (mut lo, mut hi) = (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY));
    for b in bodies {
        let (blo, bhi) = b.world_aabb();
        lo = lo.inf(&blo);
        hi = hi.sup(&bhi);
    }
    if bodies.is_empty() {
        lo = Vector3::repeat(-1.0);
        hi = Vector3::repeat(1.0);
    }
    let extents = [
        hi.x - lo.x + 2.0 * GROUND_MARGIN,
        hi.y - lo.y + 2.0 * GROUND_MARGIN,
        GROUND_THICKNESS,
    ];
    let centre = [(lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0, -GROUND_THICKNESS / 2.0];
    Ok(cuboid(GROUND_ID, extents, 1.0, mu, centre)?.fixed())
}

/// Builds a benchmark scene with optional dimension overrides.
pub fn build_scene(name: SceneName, overrides: &BTreeMap<String, f64>) -> Result<SceneSpec, SceneError> {
    let mut dims = name.default_dims();
    for (k, v) in overrides {
        if !dims.contains_key(k) {
            return Err(SceneError::UnknownDim(k.clone()));
        }
        let is_offset = k.contains("offset");
        if !v.is_finite() || (!is_offset && *v <= 0.0) {
            return Err(SceneError::InvalidDim(format!("{k} = {v}")));
        }
        dims.insert(k.clone(), *v);
    }
    let d = |k: &str| dims[k];
    let mu = d("mu");
    let bodies = match name {
        SceneName::Table => {
            let (lw, lh, lo) = (d("leg_w"), d("leg_h"), d("leg_offset"));
            let mut bodies = Vec::new();
            for (i, (sx, sy)) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)].into_iter().enumerate() {
                bodies.push(cuboid(
                    &format!("leg_{i}"),
                    [lw, lw, lh],
                    d("leg_mass"),
                    mu,
                    [sx * lo, sy * lo, lh / 2.0],
                )?);
            }
            bodies.push(cuboid(
                "slab",
                [d("slab_x"), d("slab_y"), d("slab_z")],
                d("slab_mass"),
                mu,
                [d("slab_offset_x"), 0.0, lh + d("slab_z") / 2.0],
            )?);
            bodies
        }
        SceneName::Shelf => {
            let (ww, wh, wo) = (d("wall_w"), d("wall_h"), d("wall_offset"));
            let depth = d("slab_y");
            vec![
                cuboid("wall_left", [ww, depth, wh], d("wall_mass"), mu, [-wo, 0.0, wh / 2.0])?,
                cuboid("wall_right", [ww, depth, wh], d("wall_mass"), mu, [wo, 0.0, wh / 2.0])?,
                cuboid("slab", [d("slab_x"), depth, d("slab_z")], d("slab_mass"), mu, [0.0, 0.0, wh + d("slab_z") / 2.0])?,
            ]
        }
        SceneName::Cantilever => {
            let (sx, sy, sh) = (d("support_x"), d("support_y"), d("support_h"));
            let (lx, lz) = (d("slab_x"), d("slab_z"));
            let right = sx / 2.0 + d("overhang");
            let slab_cx = right - lx / 2.0;
            let (wx, wz) = (d("weight_x"), d("weight_z"));
            vec![
                cuboid("support", [sx, sy, sh], d("support_mass"), mu, [0.0, 0.0, sh / 2.0])?,
                cuboid("slab", [lx, sy, lz], d("slab_mass"), mu, [slab_cx, 0.0, sh + lz / 2.0])?,
                cuboid(
                    "counterweight",
                    [wx, sy, wz],
                    d("weight_mass"),
                    mu,
                    [d("weight_offset_x"), 0.0, sh + lz + wz / 2.0],
                )?,
            ]
        }
        SceneName::Balance => {
            let (depth, lw, lh, lo) = (d("depth"), d("leg_w"), d("leg_h"), d("leg_offset"));
            let sz = d("slab_z");
            let mh = d("mid_leg_h");
            vec![
                cuboid("leg_left", [lw, depth, lh], d("leg_mass"), mu, [-lo, 0.0, lh / 2.0])?,
                cuboid("leg_right", [lw, depth, lh], d("leg_mass"), mu, [lo, 0.0, lh / 2.0])?,
                cuboid("bottom_slab", [d("bottom_x"), depth, sz], d("bottom_mass"), mu, [0.0, 0.0, lh + sz / 2.0])?,
                cuboid("mid_leg", [lw, depth, mh], d("mid_leg_mass"), mu, [0.0, 0.0, lh + sz + mh / 2.0])?,
                cuboid("top_slab", [d("top_x"), depth, sz], d("top_mass"), mu, [0.0, 0.0, lh + sz + mh + sz / 2.0])?,
            ]
        }
    };
    let ground = make_ground(&bodies, mu)?;
    let scene = SceneSpec {
        name,
        bodies,
        ground,
        gravity: Vector3::new(0.0, 0.0, -STANDARD_GRAVITY),
        dims,
    };
    scene.check_equilibrium()?;
    Ok(scene)
}

/// How the placed object's "size" is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeReading {
    /// Size is the volume (m³); edge = size^(1/3).
    Volume,
    /// Size is the edge length (m).
    Edge,
}

/// The cube placed into scenes, with its bottom face at `z = -edge/2` in
/// the body frame.
pub fn placed_cube(size: f64, reading: SizeReading, mass: f64, mu: f64) -> Result<ConvexBody, SceneError> {
    let edge = match reading {
        SizeReading::Volume => size.cbrt(),
        SizeReading::Edge => size,
    };
    Ok(make_cuboid(Vector3::repeat(edge), mass, mu)?.with_id("object"))
}

/// Default placed object: a 1 kg cube of volume 2 m³.
pub fn default_object() -> ConvexBody {
    placed_cube(2.0, SizeReading::Volume, 1.0, 0.5).expect("default object is valid")
}

/// Yaw about the gravity axis, then translation, then point shuffling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub yaw: f64,
    pub translation: Vector3<f64>,
    pub shuffle_seed: u64,
}

impl AugmentParams {
    pub fn identity() -> Self {
        Self { yaw: 0.0, translation: Vector3::zeros(), shuffle_seed: 0 }
    }

    pub fn sample(rng: &mut impl Rng) -> Self {
        let yaw = rng.random_range(0.0..std::f64::consts::TAU);
        let translation = Vector3::from_fn(|_, _| rng.random_range(-AUGMENT_TRANSLATION..AUGMENT_TRANSLATION));
        Self { yaw, translation, shuffle_seed: rng.random() }
    }

    /// Rigid transform from the original frame to the augmented frame.
    pub fn transform(&self) -> Pose9 {
        Pose9::new(self.translation, Rotation6::from_yaw(self.yaw))
    }
}

/// Applies `params` to every body (ground included). Returns the augmented
/// scene and the transform from the original world frame.
pub fn augment_scene(scene: &SceneSpec, params: &AugmentParams) -> Result<(SceneSpec, Pose9), SceneError> {
    let transform = params.transform();
    let move_body = |b: &ConvexBody| -> Result<ConvexBody, SceneError> {
        let mut b = b.clone();
        b.pose = transform.compose(&b.pose)?;
        Ok(b)
    };
    let bodies = scene.bodies.iter().map(move_body).collect::<Result<_, _>>()?;
    let ground = move_body(&scene.ground)?;
    Ok((SceneSpec { bodies, ground, ..scene.clone() }, transform))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    name: SceneName,
    gravity: [f64; 3],
    dims: BTreeMap<String, Spanned<f64>>,
    ground: BodyFile,
    bodies: Vec<BodyFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BodyFile {
    id: String,
    extents: Spanned<[f64; 3]>,
    translation: [f64; 3],
    rotation6: [f64; 6],
    mass: Spanned<f64>,
    mu: Spanned<f64>,
    #[serde(default)]
    fixed: bool,
}

impl BodyFile {
    fn from_body(b: &ConvexBody) -> Result<Self, SceneError> {
        let e = b
            .extents
            .ok_or_else(|| SceneError::InvalidDim(format!("body {} is not a cuboid", b.id)))?;
        let p = b.pose.to_array();
        Ok(Self {
            id: b.id.clone(),
            extents: Spanned::new(0..0, [e.x, e.y, e.z]),
            translation: [p[0], p[1], p[2]],
            rotation6: [p[3], p[4], p[5], p[6], p[7], p[8]],
            mass: Spanned::new(0..0, b.mass),
            mu: Spanned::new(0..0, b.mu),
            fixed: b.fixed,
        })
    }

    fn into_body(self, text: &str) -> Result<ConvexBody, SceneError> {
        let bad = |span: std::ops::Range<usize>, message: String| {
            let (line, column) = line_column(text, span.start);
            SceneError::ParseError { line, column, message }
        };
        let mass = *self.mass.get_ref();
        if !(mass.is_finite() && mass > 0.0) {
            return Err(bad(self.mass.span(), format!("mass of {} must be positive, got {mass}", self.id)));
        }
        let mu = *self.mu.get_ref();
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(bad(self.mu.span(), format!("mu of {} must be nonnegative, got {mu}", self.id)));
        }
        let extents = *self.extents.get_ref();
        if extents.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(bad(self.extents.span(), format!("extents of {} must be positive", self.id)));
        }
        let mut pose = [0.0; 9];
        pose[..3].copy_from_slice(&self.translation);
        pose[3..].copy_from_slice(&self.rotation6);
        let pose = Pose9::from_array(&pose);
        pose.rotation()?;
        let body = make_cuboid(Vector3::from(extents), mass, mu)?.with_id(self.id).with_pose(pose);
        Ok(if self.fixed { body.fixed() } else { body })
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Serializes a scene to its TOML text form.
pub fn scene_to_string(scene: &SceneSpec) -> Result<String, SceneError> {
    let file = SceneFile {
        name: scene.name,
        gravity: scene.gravity.into(),
        dims: scene.dims.iter().map(|(k, v)| (k.clone(), Spanned::new(0..0, *v))).collect(),
        ground: BodyFile::from_body(&scene.ground)?,
        bodies: scene.bodies.iter().map(BodyFile::from_body).collect::<Result<_, _>>()?,
    };
    toml::to_string(&file).map_err(|e| SceneError::ParseError { line: 0, column: 0, message: e.to_string() })
}

/// Parses the TOML text form of a scene.
pub fn scene_from_str(text: &str) -> Result<SceneSpec, SceneError> {
    let file: SceneFile = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        SceneError::ParseError { line, column, message: e.message().to_string() }
    })?;
    let known = file.name.default_dims();
    let mut dims = BTreeMap::new();
    for (key, value) in file.dims {
        let (line, column) = line_column(text, value.span().start);
        let v = *value.get_ref();
        if !known.contains_key(&key) {
            let message = format!("unknown dimension `{key}` for scene {}", file.name);
            return Err(SceneError::ParseError { line, column, message });
        }
        if !v.is_finite() || (!key.contains("offset") && v <= 0.0) {
            let message = format!("dimension `{key}` must be positive, got {v}");
            return Err(SceneError::ParseError { line, column, message });
        }
        dims.insert(key, v);
    }
    Ok(SceneSpec {
        name: file.name,
        bodies: file.bodies.into_iter().map(|b| b.into_body(text)).collect::<Result<_, _>>()?,
        ground: file.ground.into_body(text)?,
        gravity: Vector3::from(file.gravity),
        dims,
    })
}

pub fn save_scene(scene: &SceneSpec, path: &Path) -> Result<(), SceneError> {
    std::fs::write(path, scene_to_string(scene)?)?;
    Ok(())
}

pub fn load_scene(path: &Path) -> Result<SceneSpec, SceneError> {
    scene_from_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statics::{robustness_field, RobustnessSolver};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn default(name: SceneName) -> SceneSpec {
        build_scene(name, &BTreeMap::new()).unwrap()
    }

    fn downward_robustness(scene: &SceneSpec, p: Vector3<f64>) -> f64 {
        let bodies = scene.all_bodies();
        let config = scene.statics_config();
        let contacts = detect_contacts(&bodies, config.contact_eps).unwrap();
        RobustnessSolver::new(&bodies, &contacts, &config)
            .unwrap()
            .robustness(&p, &-Vector3::z())
            .unwrap()
    }

    #[test]
    fn every_default_scene_is_stable() {
        for name in SceneName::ALL {
            let scene = default(name);
            assert!(scene.check_equilibrium().is_ok(), "{name}");
            let ids: std::collections::HashSet<_> = scene.all_bodies().iter().map(|b| b.id.clone()).collect();
            assert_eq!(ids.len(), scene.bodies.len() + 1);
            assert!(scene.bodies.iter().all(|b| b.mass == 1.0));
        }
    }

    #[test]
    fn body_counts_match_the_descriptions() {
        assert_eq!(default(SceneName::Shelf).bodies.len(), 3);
        assert_eq!(default(SceneName::Balance).bodies.len(), 5);
        assert_eq!(default(SceneName::Table).bodies.len(), 5);
        assert_eq!(default(SceneName::Cantilever).bodies.len(), 3);
    }

    #[test]
    fn shelf_slab_has_two_four_point_patches() {
        let scene = default(SceneName::Shelf);
        let bodies = scene.all_bodies();
        let contacts = detect_contacts(&bodies, 1e-4).unwrap();
        let slab = bodies.iter().position(|b| b.id == "slab").unwrap();
        let on_slab = contacts.iter().filter(|c| c.body_a == slab || c.body_b == slab).count();
        assert_eq!(on_slab, 8);
    }

    #[test]
    fn heavy_offset_slab_is_rejected() {
        let overrides = BTreeMap::from([("slab_mass".to_string(), 1e6), ("slab_offset_x".to_string(), 1.0)]);
        assert!(matches!(
            build_scene(SceneName::Table, &overrides),
            Err(SceneError::UnstableBaseScene(_))
        ));
    }

    #[test]
    fn bad_overrides_are_rejected() {
        let unknown = BTreeMap::from([("legs".to_string(), 1.0)]);
        assert!(matches!(build_scene(SceneName::Table, &unknown), Err(SceneError::UnknownDim(_))));
        let negative = BTreeMap::from([("leg_h".to_string(), -1.0)]);
        assert!(matches!(build_scene(SceneName::Table, &negative), Err(SceneError::InvalidDim(_))));
    }

    #[test]
    fn default_object_has_volume_two() {
        let cube = default_object();
        assert!((cube.volume() - 2.0).abs() < 1e-12);
        assert_eq!(placed_cube(2.0, SizeReading::Edge, 1.0, 0.5).unwrap().volume(), 8.0);
    }

    #[test]
    fn table_centre_is_more_robust_than_edge() {
        let scene = default(SceneName::Table);
        let centre = downward_robustness(&scene, Vector3::new(0.0, 0.0, 1.2));
        let edge = downward_robustness(&scene, Vector3::new(0.95, 0.0, 1.2));
        assert!(centre > edge, "{centre} vs {edge}");
        // slab tips about the outer leg edge at x = 0.5
        assert!((edge - 9.81 * 0.5 / 0.45).abs() < 1e-6, "{edge}");
    }

    #[test]
    fn cantilever_tip_is_limited_by_the_counterweight() {
        let scene = default(SceneName::Cantilever);
        let tip = downward_robustness(&scene, Vector3::new(2.3, 0.0, 1.2));
        assert!((tip - 0.7 * 9.81 / 1.8).abs() < 1e-6, "{tip}");
    }

    #[test]
    fn identity_augmentation_keeps_the_scene() {
        let scene = default(SceneName::Balance);
        let (aug, _) = augment_scene(&scene, &AugmentParams::identity()).unwrap();
        for (a, b) in aug.all_bodies().iter().zip(scene.all_bodies()) {
            let (pa, pb) = (a.pose.to_array(), b.pose.to_array());
            assert!(pa.iter().zip(pb).all(|(x, y)| (x - y).abs() < 1e-15));
        }
    }

    #[test]
    fn half_turn_twice_is_the_identity() {
        let scene = default(SceneName::Shelf);
        let params = AugmentParams { yaw: std::f64::consts::PI, translation: Vector3::zeros(), shuffle_seed: 0 };
        let (once, _) = augment_scene(&scene, &params).unwrap();
        let (twice, _) = augment_scene(&once, &params).unwrap();
        for (a, b) in twice.all_bodies().iter().zip(scene.all_bodies()) {
            let ra = a.rotation();
            let rb = b.rotation();
            assert!((ra - rb).abs().max() < 1e-12);
            assert!((a.pose.translation - b.pose.translation).norm() < 1e-12);
        }
    }

    #[test]
    fn sampled_augmentations_are_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let p = AugmentParams::sample(&mut rng);
            assert!((0.0..std::f64::consts::TAU).contains(&p.yaw));
            assert!(p.translation.iter().all(|v| v.abs() <= AUGMENT_TRANSLATION));
        }
    }

    #[test]
    fn quarter_turn_permutes_the_field() {
        let scene = default(SceneName::Table);
        let params = AugmentParams { yaw: std::f64::consts::FRAC_PI_2, translation: Vector3::zeros(), shuffle_seed: 0 };
        let (rot, transform) = augment_scene(&scene, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let samples = scene.surface_sampler().sample(256, &mut rng);
        let r = transform.rotation().unwrap();
        let moved: Vec<_> = samples
            .iter()
            .map(|s| crate::geom::SurfaceSample {
                position: r * s.position + transform.translation,
                normal: r * s.normal,
                body_id: s.body_id.clone(),
            })
            .collect();
        let sorted = |bodies: &[ConvexBody], samples: &[crate::geom::SurfaceSample]| {
            let mut v: Vec<f64> = robustness_field(bodies, samples, &scene.statics_config())
                .unwrap()
                .iter()
                .map(|f| {
                    assert!(!f.failed);
                    f.value
                })
                .collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let a = sorted(&scene.all_bodies(), &samples);
        let b = sorted(&rot.all_bodies(), &moved);
        for (x, y) in a.iter().zip(&b) {
            assert!(x == y || (x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn scene_file_round_trips_exactly() {
        for name in SceneName::ALL {
            let scene = default(name);
            let (aug, _) = augment_scene(&scene, &AugmentParams::sample(&mut ChaCha8Rng::seed_from_u64(3))).unwrap();
            let text = scene_to_string(&aug).unwrap();
            let back = scene_from_str(&text).unwrap();
            assert_eq!(back, aug);
        }
    }

    #[test]
    fn save_and_load_through_a_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.scene");
        let scene = default(SceneName::Table);
        save_scene(&scene, &path).unwrap();
        assert_eq!(load_scene(&path).unwrap(), scene);
    }

    #[test]
    fn negative_mass_is_a_parse_error_with_position() {
        let text = scene_to_string(&default(SceneName::Shelf)).unwrap();
        let line_no = text.lines().position(|l| l.starts_with("mass = 1")).unwrap();
        let bad: Vec<String> = text
            .lines()
            .enumerate()
            .map(|(i, l)| if i == line_no { "mass = -1.0".to_string() } else { l.to_string() })
            .collect();
        let bad = bad.join("\n");
        match scene_from_str(&bad) {
            Err(SceneError::ParseError { line, column, message }) => {
                assert_eq!(line, line_no + 1);
                assert_eq!(column, 8);
                assert!(message.contains("mass"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn misspelled_key_is_a_parse_error_naming_it() {
        let text = scene_to_string(&default(SceneName::Shelf)).unwrap();
        for (from, to) in [("\nmu = 0.5", "\nfrictionn = 0.5"), ("mu = 0.5", "frictionn = 0.5")] {
            let bad = text.replacen(from, to, 1);
            match scene_from_str(&bad) {
                Err(SceneError::ParseError { line, message, .. }) => {
                    assert!(line > 0);
                    assert!(message.contains("frictionn"), "{message}");
                }
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn unknown_dims_are_rejected() {
        let text = scene_to_string(&default(SceneName::Shelf)).unwrap();
        let bad = text.replacen("wall_w", "wall_ww", 1);
        match scene_from_str(&bad) {
            Err(SceneError::ParseError { line, message, .. }) => {
                assert!(line > 0);
                assert!(message.contains("wall_ww"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
