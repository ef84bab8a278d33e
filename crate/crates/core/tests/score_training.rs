use std::path::Path;

use stabledrop::planner::{generate_dataset, read_dataset, DatasetOptions, PlacementRecord};
use stabledrop::scenes::SceneName;
use stabledrop::score::{
    checkpoint_from_bytes, checkpoint_to_bytes, load_checkpoint, save_checkpoint, train, ScoreError, TrainConfig,
    TrainingSet, CHECKPOINT_VERSION,
};

fn toy_records(dir: &Path, scenes: Vec<SceneName>, per_scene: usize) -> Vec<PlacementRecord> {
    let path = dir.join("toy.jsonl");
    let options = DatasetOptions { scenes, per_scene, seed: 11, ..DatasetOptions::default() };
    generate_dataset(&options, &path).unwrap();
    read_dataset(&path).unwrap().1
}

fn toy_config(epochs: usize) -> TrainConfig {
    TrainConfig { seed: 5, epochs, batch_size: 4, ..TrainConfig::default() }
}

#[test]
fn toy_training_reduces_loss() {
    let dir = tempfile::tempdir().unwrap();
    let records = toy_records(dir.path(), vec![SceneName::Table, SceneName::Shelf], 5);
    assert_eq!(records.len(), 10);
    let set = TrainingSet::new(records, None).unwrap();
    let config = TrainConfig { batch_size: 2, ..toy_config(40) };
    let out = train(&set, &config).unwrap();
    let first = out.loss_curve[0];
    let tail = out.loss_curve[35..].iter().sum::<f64>() / 5.0;
    assert!(first / tail >= 1.3, "{first} -> {tail}");
    assert_eq!(out.checkpoint.metadata.final_loss, *out.loss_curve.last().unwrap());
}

#[test]
fn leave_out_filters_records_and_training_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let records = toy_records(dir.path(), vec![SceneName::Cantilever, SceneName::Shelf], 3);
    let set = TrainingSet::new(records.clone(), Some(SceneName::Cantilever)).unwrap();
    assert_eq!(set.records().len(), 3);
    assert!(set.records().iter().all(|r| r.scene != SceneName::Cantilever));
    assert!(!set.scenes().contains(&SceneName::Cantilever));

    let a = train(&set, &toy_config(2)).unwrap();
    let b = train(&set, &toy_config(2)).unwrap();
    assert_eq!(a.loss_curve, b.loss_curve);
    assert_eq!(a.checkpoint.metadata.final_loss.to_bits(), b.checkpoint.metadata.final_loss.to_bits());
    assert_eq!(a.checkpoint, b.checkpoint);
    assert_eq!(a.checkpoint.metadata.leave_out, Some(SceneName::Cantilever));

    let only_cantilever: Vec<_> = records.into_iter().filter(|r| r.scene == SceneName::Cantilever).collect();
    assert!(matches!(
        TrainingSet::new(only_cantilever, Some(SceneName::Cantilever)),
        Err(ScoreError::DataFormat(_))
    ));
}

#[test]
fn checkpoint_round_trip_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let records = toy_records(dir.path(), vec![SceneName::Shelf], 2);
    let set = TrainingSet::new(records, None).unwrap();
    let ckpt = train(&set, &toy_config(1)).unwrap().checkpoint;

    let path = dir.path().join("model.ckpt");
    save_checkpoint(&ckpt, &path).unwrap();
    let loaded = load_checkpoint(&path).unwrap();
    assert_eq!(loaded, ckpt);
    let bytes = checkpoint_to_bytes(&ckpt).unwrap();
    assert_eq!(checkpoint_to_bytes(&loaded).unwrap(), bytes);

    let truncated = &bytes[..bytes.len() - 7];
    assert!(matches!(checkpoint_from_bytes(truncated), Err(ScoreError::CorruptPayload(_))));
    assert!(matches!(checkpoint_from_bytes(&bytes[..20]), Err(ScoreError::CorruptPayload(_))));

    let mut bad_magic = bytes.clone();
    bad_magic[0] ^= 0xff;
    assert!(matches!(checkpoint_from_bytes(&bad_magic), Err(ScoreError::VersionMismatch(_))));

    let mut bad_version = bytes.clone();
    bad_version[8..12].copy_from_slice(&(CHECKPOINT_VERSION + 1).to_le_bytes());
    assert!(matches!(checkpoint_from_bytes(&bad_version), Err(ScoreError::VersionMismatch(_))));

    let mut nan = bytes.clone();
    let at = nan.len() - 4;
    nan[at..].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(matches!(checkpoint_from_bytes(&nan), Err(ScoreError::CorruptPayload(_))));
}
