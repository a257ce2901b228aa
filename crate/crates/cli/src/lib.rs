//! Command implementations behind the `oitlab` binary.

pub mod args;

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use oitlab::dataset::{self, DatasetError, DatasetParams};
use oitlab::dfaoit::{extract_frame, resolve_records};
use oitlab::image::{write_ppm, PpmError};
use oitlab::metrics::{error_map, QualityReport};
use oitlab::mlp::{self, load_weights, save_weights, AdamConfig, MlpError, MlpWeights, TrainConfig, DFAOIT_DIMS};
use oitlab::raster::{gen_layered_scene, load_scene, rasterize_scene, SceneError};
use oitlab::resolve::{render_frame, RenderConfig, RenderError, Resolver};
use oitlab::{FrameFragmentBuffer, Scene};
use thiserror::Error;

pub use args::Cli;
use args::{BenchArgs, Command, CompareArgs, GenDataArgs, RenderArgs, SceneArgs, TrainArgs};

pub const THREADS_ENV: &str = "OITLAB_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Network(#[from] MlpError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Image(#[from] PpmError),
}

impl CliError {
    /// 2 for usage errors, 1 for everything that fails at run time.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Sizes the global rayon pool from `OITLAB_THREADS`, if set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("{THREADS_ENV}={value} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| usage(format!("cannot configure {threads} threads: {e}")))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData(a) => cmd_gen_data(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Render(a) => cmd_render(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Bench(a) => {
            println!("{}", cmd_bench(&a)?);
            Ok(())
        }
    }
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{} does not exist", path.display())))
    }
}

fn require_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => {
            Err(usage(format!("directory {} does not exist", p.display())))
        }
        _ => Ok(()),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn cmd_gen_data(a: &GenDataArgs) -> Result<(), CliError> {
    require_parent(&a.out)?;
    let mut params = DatasetParams {
        layers_min: a.layers_min,
        layers_max: a.layers_max,
        alpha_min: a.alpha_min,
        alpha_max: a.alpha_max,
        resolution: a.resolution,
        master_seed: a.seed,
        target_example_count: a.count,
        scene_count: 0,
    };
    params.scene_count = a.scenes.unwrap_or_else(|| a.count.div_ceil(a.resolution.max(1).pow(2)).max(1));
    if let Err(e) = params.validate() {
        return Err(usage(e.to_string()));
    }
    let records = dataset::generate_dataset(&params)?;
    dataset::write_dataset(&records, &a.out)?;
    println!("wrote {} records from {} scenes to {}", records.len(), params.scene_count, a.out.display());
    println!("n,count");
    for (n, count) in dataset::n_histogram(&records) {
        println!("{n},{count}");
    }
    Ok(())
}

pub fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    require_file(&a.data)?;
    require_parent(&a.out)?;
    if !(0.0..1.0).contains(&a.val_frac) {
        return Err(usage(format!("--val-frac {} not in [0, 1)", a.val_frac)));
    }
    let history_path = a.history.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".history.csv");
        p.into()
    });
    require_parent(&history_path)?;

    let records = dataset::read_dataset(&a.data)?;
    let (train, val) = if a.val_frac > 0.0 {
        dataset::split(&records, a.val_frac, a.seed)?
    } else {
        (records, Vec::new())
    };
    let train_set = dataset::to_training_set(&train);
    let val_set = dataset::to_training_set(&val);
    let config = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        seed: a.seed,
        adam: AdamConfig { lr: a.lr, ..AdamConfig::default() },
        ..TrainConfig::default()
    };
    let started = Instant::now();
    let (net, history) = mlp::train(&train_set, Some(&val_set), &config, a.seed).map_err(|e| match e {
        MlpError::InvalidConfig(m) => usage(m),
        other => other.into(),
    })?;
    save_weights(&net, &a.out)?;
    write_file(&history_path, mlp::history_csv(&history))?;

    let last = history.last().expect("at least one epoch");
    println!(
        "trained {} epochs on {} records in {:.1}s",
        history.len(),
        train_set.len(),
        started.elapsed().as_secs_f64()
    );
    println!("final train mse {:.6e}", last.train_mse);
    match last.val_mse {
        Some(v) => println!("final val mse {v:.6e} ({} records)", val_set.len()),
        None => println!("final val mse n/a"),
    }
    println!("weights: {}", a.out.display());
    println!("history: {}", history_path.display());
    Ok(())
}

impl SceneArgs {
    fn validate(&self) -> Result<(), CliError> {
        if self.width == 0 || self.height == 0 {
            return Err(usage("--width and --height must be positive"));
        }
        if let Some(p) = &self.scene {
            require_file(p)?;
        }
        Ok(())
    }

    /// Loads or generates the scene; `default_layers` applies when neither
    /// `--scene` nor `--gen-layers` was given.
    pub fn scene(&self, default_layers: Option<usize>) -> Result<Scene, CliError> {
        if let Some(p) = &self.scene {
            return Ok(load_scene(p)?);
        }
        let layers = self
            .gen_layers
            .or(default_layers)
            .ok_or_else(|| usage("either --scene or --gen-layers is required"))?;
        gen_layered_scene(
            self.gen_seed,
            layers,
            self.gen_alpha_min,
            self.gen_alpha_max,
            self.palette_seed.unwrap_or(self.gen_seed),
        )
        .map_err(|e| usage(e.to_string()))
    }

    fn frame(&self, default_layers: Option<usize>) -> Result<FrameFragmentBuffer, CliError> {
        self.validate()?;
        let scene = self.scene(default_layers)?;
        let mut frame = rasterize_scene(&scene, self.width, self.height);
        frame.sort_all();
        Ok(frame)
    }
}

fn with_k(resolver: Resolver, k: Option<usize>) -> Result<Resolver, CliError> {
    match (resolver, k) {
        (Resolver::Ht { .. }, Some(k)) => Resolver::ht(k).ok_or_else(|| usage("--k must be at least 1")),
        _ => Ok(resolver),
    }
}

fn load_net(resolvers: &[Resolver], weights: Option<&Path>) -> Result<Option<MlpWeights>, CliError> {
    if !resolvers.iter().any(Resolver::needs_weights) {
        return Ok(None);
    }
    let path = weights.ok_or_else(|| usage("the dfaoit resolver requires --weights"))?;
    require_file(path)?;
    Ok(Some(load_weights(path)?))
}

pub fn cmd_render(a: &RenderArgs) -> Result<(), CliError> {
    require_parent(&a.out)?;
    let resolver = with_k(a.resolver, a.k)?;
    let net = load_net(&[resolver], a.weights.as_deref())?;
    let frame = a.scene.frame(None)?;
    let image = render_frame(&frame, &RenderConfig { background: a.background, resolver }, net.as_ref())?;
    write_ppm(&image, &a.out)?;
    println!(
        "{} {}x{} fragments={} max_depth={} -> {}",
        resolver,
        frame.width(),
        frame.height(),
        frame.fragment_count(),
        frame.max_depth_complexity(),
        a.out.display()
    );
    Ok(())
}

pub fn cmd_compare(a: &CompareArgs) -> Result<(), CliError> {
    if !a.out.is_dir() {
        fs::create_dir_all(&a.out).map_err(|source| CliError::Io { path: a.out.clone(), source })?;
    }
    let resolvers = a.resolvers.iter().map(|&r| with_k(r, a.k)).collect::<Result<Vec<_>, _>>()?;
    let net = load_net(&resolvers, a.weights.as_deref())?;
    let frame = a.scene.frame(None)?;

    let exact = render_frame(&frame, &RenderConfig { background: a.background, resolver: Resolver::Exact }, None)?;
    write_ppm(&exact, a.out.join("exact.ppm"))?;
    let mut csv = format!("{}\n", QualityReport::CSV_HEADER);
    for &resolver in &resolvers {
        let image = render_frame(&frame, &RenderConfig { background: a.background, resolver }, net.as_ref())?;
        let report = QualityReport::measure(resolver.name(), &image, &exact).expect("same frame size");
        let map = error_map(&image, &exact).expect("same frame size");
        write_ppm(&image, a.out.join(format!("{}.ppm", resolver.name())))?;
        write_ppm(&map, a.out.join(format!("{}_error.ppm", resolver.name())))?;
        csv.push_str(&report.csv_row());
        csv.push('\n');
    }
    write_file(&a.out.join("compare.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

/// Median wall-clock times of one frame's stages plus work counters.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub width: usize,
    pub height: usize,
    pub reps: usize,
    pub fragments: usize,
    /// Pixels with three or more fragments, i.e. those that run the network.
    pub transparent_pixels: usize,
    pub raster_ms: f64,
    pub feature_extraction_ms: f64,
    pub inference_ms: f64,
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "resolution: {}x{}", self.width, self.height)?;
        writeln!(f, "reps: {}", self.reps)?;
        writeln!(f, "fragments: {}", self.fragments)?;
        writeln!(f, "transparent_pixels: {}", self.transparent_pixels)?;
        writeln!(f, "raster_ms: {:.3}", self.raster_ms)?;
        writeln!(f, "feature_extraction_ms: {:.3}", self.feature_extraction_ms)?;
        writeln!(f, "inference_ms: {:.3}", self.inference_ms)?;
        write!(f, "total_ms: {:.3}", self.feature_extraction_ms + self.inference_ms)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Default scene is a generated 20-layer stack.
pub fn cmd_bench(a: &BenchArgs) -> Result<BenchReport, CliError> {
    if a.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    a.scene.validate()?;
    let net = match &a.weights {
        Some(p) => {
            require_file(p)?;
            load_weights(p)?
        }
        None => MlpWeights::he_uniform(&DFAOIT_DIMS, a.seed),
    };
    let scene = a.scene.scene(Some(20))?;
    let background = oitlab::Rgb::WHITE;
    let (mut raster, mut extract, mut infer) = (Vec::new(), Vec::new(), Vec::new());
    let mut counters = (0, 0);
    for _ in 0..a.reps {
        let t = Instant::now();
        let frame = rasterize_scene(&scene, a.scene.width, a.scene.height);
        raster.push(ms_since(t));

        let t = Instant::now();
        let features = extract_frame(&frame);
        extract.push(ms_since(t));

        let t = Instant::now();
        let pixels = resolve_records(&features.records, &net, background)?;
        infer.push(ms_since(t));
        debug_assert_eq!(pixels.len(), frame.width() * frame.height());

        counters = (frame.fragment_count(), features.records.iter().filter(|r| r.n > 2).count());
    }
    Ok(BenchReport {
        width: a.scene.width,
        height: a.scene.height,
        reps: a.reps,
        fragments: counters.0,
        transparent_pixels: counters.1,
        raster_ms: median(raster),
        feature_extraction_ms: median(extract),
        inference_ms: median(infer),
    })
}
