//! Stable placement planning for rigid assemblies.
//!
//! The crate computes the robustness of multi-object frictional assemblies,
//! trains a small score-based diffusion model over placement poses
//! conditioned on scene and object point clouds, and steers its sampler with
//! the gradient of a stability loss.

pub mod bench;
pub mod cloud;
pub mod geom;
pub mod guide;
pub mod lp;
pub mod planner;
pub mod scenes;
pub mod score;
pub mod statics;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent RNG stream for `seed` and up to three integer tags (scene,
/// record, chain, ...).
pub fn derived_rng(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    assert!(tags.len() <= 3, "at most three tags");
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    for (i, t) in tags.iter().enumerate() {
        bytes[8 * (i + 1)..8 * (i + 2)].copy_from_slice(&t.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}
