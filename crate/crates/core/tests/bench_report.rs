use std::fs;
use std::path::Path;

use stabledrop::bench::{run_benchmark, BenchConfig, BenchError, ModelEntry, PlannerKind};
use stabledrop::guide::GuidanceConfig;
use stabledrop::planner::{generate_dataset, read_dataset, DatasetOptions};
use stabledrop::scenes::SceneName;
use stabledrop::score::{save_checkpoint, train, Architecture, TrainConfig, TrainingSet};

fn small_arch() -> Architecture {
    Architecture {
        encoder_widths: vec![16, 16, 32],
        latent_dim: 32,
        time_dim: 16,
        denoiser_widths: vec![32, 16, 32],
        ..Architecture::default()
    }
}

fn write_models(dir: &Path) {
    let data = dir.join("data.jsonl");
    let options = DatasetOptions { scenes: vec![SceneName::Table, SceneName::Shelf], per_scene: 3, seed: 2, ..Default::default() };
    generate_dataset(&options, &data).unwrap();
    let records = read_dataset(&data).unwrap().1;
    for scene in [SceneName::Table, SceneName::Shelf] {
        let set = TrainingSet::new(records.clone(), Some(scene)).unwrap();
        let config = TrainConfig { epochs: 3, batch_size: 2, leave_out: Some(scene), arch: small_arch(), ..Default::default() };
        let out = train(&set, &config).unwrap();
        save_checkpoint(&out.checkpoint, &dir.join(format!("{scene}.ckpt"))).unwrap();
    }
}

fn config() -> BenchConfig {
    BenchConfig {
        seed: 4,
        scenes: vec![SceneName::Table, SceneName::Shelf],
        placements: 4,
        variations: 2,
        robustness_points: 32,
        expert_budget: 2000,
        timing: false,
        k: 4,
        m: 64,
        guidance: GuidanceConfig { steps: 6, ..GuidanceConfig::default() },
        models: [SceneName::Table, SceneName::Shelf]
            .iter()
            .map(|s| ModelEntry { leave_out: *s, checkpoint: format!("{s}.ckpt").into() })
            .collect(),
        ..BenchConfig::default()
    }
}

#[test]
fn benchmark_writes_consistent_reproducible_reports() {
    let dir = tempfile::tempdir().unwrap();
    write_models(dir.path());
    let cfg = config();
    let text = toml::to_string(&cfg).unwrap();
    assert_eq!(BenchConfig::from_toml(&text).unwrap(), cfg);

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let report = run_benchmark(&cfg, dir.path(), &a).unwrap();
    run_benchmark(&cfg, dir.path(), &b).unwrap();
    let names = ["table1.csv", "table2.csv", "table3.csv", "table4.csv", "report.md", "field_table.svg", "field_shelf.svg"];
    for name in names {
        let bytes = fs::read(a.join(name)).unwrap();
        assert_eq!(bytes, fs::read(b.join(name)).unwrap(), "{name} differs between runs");
    }
    assert_eq!(report.files.len(), names.len());

    // one unguided and one guided row per model, every count reconciles
    assert_eq!(report.validity.len(), 4);
    for row in &report.validity {
        assert_eq!(row.unknown.total, cfg.placements);
        assert!(row.unknown.valid <= row.unknown.penetration_free);
        assert_eq!(row.known.len(), 1);
        assert!(row.known[0].0.to_string() != row.model.trim_end_matches("_out"));
        assert!((0.0..=100.0).contains(&row.unknown.validity()));
    }
    assert_eq!(report.robustness.len(), 6);
    assert!(report.robustness.iter().any(|r| r.planner == PlannerKind::Expert && r.stats.valid > 0));
    assert!(report.timing.is_empty());

    let md = fs::read_to_string(a.join("report.md")).unwrap();
    assert!(md.contains("field_table.svg") && md.contains("table_out"));
    let t1 = fs::read_to_string(a.join("table1.csv")).unwrap();
    assert_eq!(t1.lines().count(), 1 + 4 + 2);
}

#[test]
fn mismatched_or_missing_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_models(dir.path());
    let mut cfg = config();
    cfg.models[0].checkpoint = "shelf.ckpt".into();
    let err = run_benchmark(&cfg, dir.path(), &dir.path().join("out")).unwrap_err();
    assert!(matches!(err, BenchError::MissingCheckpoint { ref scene, .. } if scene == "table"), "{err}");

    let mut cfg = config();
    cfg.models.pop();
    assert!(matches!(run_benchmark(&cfg, dir.path(), &dir.path().join("out")), Err(BenchError::MissingCheckpoint { .. })));
    assert!(!dir.path().join("out").exists());
}
