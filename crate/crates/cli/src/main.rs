//! `stabledrop`: scenes, robustness fields, datasets, training, sampling and
//! the benchmark harness from the command line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use stabledrop::bench::{fmt_value, render_field_svg, run_benchmark, BenchConfig};
use stabledrop::derived_rng;
use stabledrop::geom::EPS_CONTACT;
use stabledrop::guide::{sample_placements, GuidanceConfig, SamplerConfig};
use stabledrop::planner::{generate_dataset, read_dataset, DatasetOptions, ObjectSpec, ValidationConfig};
use stabledrop::scenes::{build_scene, load_scene, save_scene, SceneName};
use stabledrop::score::{load_checkpoint, save_checkpoint, train, TrainConfig, TrainingSet};
use stabledrop::statics::robustness_field;

#[derive(Parser)]
#[command(name = "stabledrop", version, about = "Stable placement planning with robustness-guided diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a named benchmark scene to a scene file.
    Scene {
        #[arg(long)]
        name: SceneName,
        #[arg(long)]
        out: PathBuf,
        /// Dimension override such as `slab_z=0.3`; repeatable.
        #[arg(long = "set", value_parser = parse_override)]
        overrides: Vec<(String, f64)>,
    },
    /// Sample a scene surface and compute its robustness field.
    Robustness {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 1024)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Generate expert placements for training.
    Dataset {
        /// `all` or a comma-separated list of scene names.
        #[arg(long, default_value = "all")]
        scenes: String,
        #[arg(long, default_value_t = 800)]
        per_scene: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the placement model, optionally holding one scene out.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        leave_out: Option<SceneName>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch loss CSV; defaults to the checkpoint path with a `.loss.csv` suffix.
        #[arg(long)]
        loss_curve: Option<PathBuf>,
    },
    /// Sample placements in a scene with a trained model.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 10)]
        batch: usize,
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
        #[arg(long, default_value_t = 2)]
        interval: usize,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value_t = 0.05)]
        d_max: f64,
        /// Plain reverse diffusion without the stability term.
        #[arg(long)]
        unguided: bool,
        #[arg(long, default_value_t = EPS_CONTACT)]
        contact_eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the benchmark described by a TOML config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_override(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("bad value in `{s}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_scenes(list: &str) -> Result<Vec<SceneName>> {
    if list.trim() == "all" {
        return Ok(SceneName::ALL.to_vec());
    }
    list.split(',')
        .map(|s| s.trim().parse::<SceneName>().map_err(|e| anyhow::anyhow!("{e}")))
        .collect()
}

fn num(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "INF".to_string()
    } else {
        format!("{v}")
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_robustness(scene: &Path, points: usize, seed: u64, out: &Path, svg: Option<&Path>) -> Result<()> {
    let spec = load_scene(scene).with_context(|| format!("loading {}", scene.display()))?;
    let samples = spec.surface_sampler().sample(points, &mut derived_rng(seed, &[]));
    let field = robustness_field(&spec.all_bodies(), &samples, &spec.statics_config())?;
    let mut csv = String::from("x,y,z,nx,ny,nz,body_id,robustness\n");
    for (s, f) in samples.iter().zip(&field) {
        let (p, n) = (s.position, s.normal);
        let value = if f.failed { "NAN".to_string() } else { num(f.value) };
        writeln!(csv, "{},{},{},{},{},{},{},{value}", p.x, p.y, p.z, n.x, n.y, n.z, s.body_id)?;
    }
    write_file(out, &csv)?;
    let failed = field.iter().filter(|f| f.failed).count();
    if failed > 0 {
        log::warn!("{failed} of {points} points failed to solve");
    }
    if let Some(svg) = svg {
        let pts: Vec<_> = samples.iter().map(|s| s.position).collect();
        let values: Vec<f64> = field.iter().map(|f| if f.failed { f64::NAN } else { f.value }).collect();
        let title = scene.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        write_file(svg, &render_field_svg(&format!("{title} robustness field"), &pts, &values))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    data: &Path,
    leave_out: Option<SceneName>,
    seed: u64,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    out: &Path,
    loss_curve: Option<PathBuf>,
) -> Result<()> {
    let (_, records) = read_dataset(data).with_context(|| format!("reading {}", data.display()))?;
    let set = TrainingSet::new(records, leave_out)?;
    let config = TrainConfig { seed, epochs, batch_size, lr, leave_out, ..TrainConfig::default() };
    log::info!("training on {} records", set.records().len());
    let output = train(&set, &config)?;
    save_checkpoint(&output.checkpoint, out)?;
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in output.loss_curve.iter().enumerate() {
        writeln!(csv, "{},{l}", i + 1)?;
    }
    let curve = loss_curve.unwrap_or_else(|| {
        let mut p = out.as_os_str().to_owned();
        p.push(".loss.csv");
        PathBuf::from(p)
    });
    write_file(&curve, &csv)?;
    println!("final loss {}", fmt_value(output.checkpoint.metadata.final_loss));
    Ok(())
}

fn cmd_sample(model: &Path, scene: &Path, config: SamplerConfig, seed: u64, out: &Path) -> Result<()> {
    let ckpt = load_checkpoint(model).with_context(|| format!("loading {}", model.display()))?;
    let spec = load_scene(scene).with_context(|| format!("loading {}", scene.display()))?;
    let object = ObjectSpec::default().body()?;
    let batch = sample_placements(&ckpt.model, &spec, &object, &config, seed)?;
    let mut csv = String::from("chain,tx,ty,tz,a1x,a1y,a1z,a2x,a2y,a2z,stable,penetration_free,valid,min_robustness,median_robustness,flagged\n");
    for (i, c) in batch.chains.iter().enumerate() {
        let o = &c.outcome;
        let pose = o.pose.to_array().map(|v| v.to_string()).join(",");
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        writeln!(
            csv,
            "{i},{pose},{},{},{},{},{},{}",
            o.stable,
            o.penetration_free,
            o.valid(),
            opt(o.min_robustness),
            opt(o.median_robustness),
            c.flagged
        )?;
    }
    write_file(out, &csv)?;
    let valid = batch.outcomes().filter(|o| o.valid()).count();
    println!("{valid}/{} valid placements in {:.2}s", batch.chains.len(), batch.total_time);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Scene { name, out, overrides } => {
            let overrides: BTreeMap<_, _> = overrides.into_iter().collect();
            let scene = build_scene(name, &overrides)?;
            save_scene(&scene, &out)?;
        }
        Command::Robustness { scene, points, seed, out, svg } => {
            if points == 0 {
                bail!("--points must be at least 1");
            }
            cmd_robustness(&scene, points, seed, &out, svg.as_deref())?;
        }
        Command::Dataset { scenes, per_scene, seed, budget, out } => {
            let options = DatasetOptions { scenes: parse_scenes(&scenes)?, per_scene, seed, budget, ..DatasetOptions::default() };
            let n = generate_dataset(&options, &out)?;
            println!("wrote {n} records to {}", out.display());
        }
        Command::Train { data, leave_out, seed, epochs, batch_size, lr, out, loss_curve } => {
            cmd_train(&data, leave_out, seed, epochs, batch_size, lr, &out, loss_curve)?;
        }
        Command::Sample { model, scene, batch, gamma, interval, steps, d_max, unguided, contact_eps, seed, out } => {
            let config = SamplerConfig {
                guidance: GuidanceConfig { gamma, interval, d_max, steps, batch },
                guided: !unguided,
                validation: ValidationConfig { contact_eps, seed, ..ValidationConfig::default() },
                ..SamplerConfig::default()
            };
            cmd_sample(&model, &scene, config, seed, &out)?;
        }
        Command::Bench { config, out } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let bench = BenchConfig::from_toml(&text)?;
            let base = config.parent().unwrap_or(Path::new("."));
            let report = run_benchmark(&bench, base, &out)?;
            for f in &report.files {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(err) = run(Cli::parse()) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
