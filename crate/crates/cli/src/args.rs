use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use oitlab::resolve::Resolver;
use oitlab::Rgb;

#[derive(Debug, Parser)]
#[command(name = "oitlab", version, about = "Order-independent transparency laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a training dataset from procedural layered scenes.
    GenData(GenDataArgs),
    /// Train the feature-to-color network on a dataset.
    Train(TrainArgs),
    /// Render a scene with one resolver to a PPM image.
    Render(RenderArgs),
    /// Compare resolvers against the exact A-buffer image.
    Compare(CompareArgs),
    /// Time rasterization, feature extraction and inference.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200_000)]
    pub count: usize,
    /// Square render size of each scene.
    #[arg(long, default_value_t = 64)]
    pub resolution: usize,
    /// Number of scenes; by default just enough to reach `--count`.
    #[arg(long)]
    pub scenes: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub layers_min: usize,
    #[arg(long, default_value_t = 50)]
    pub layers_max: usize,
    #[arg(long, default_value_t = 0.01)]
    pub alpha_min: f32,
    #[arg(long, default_value_t = 0.85)]
    pub alpha_max: f32,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset file written by `gen-data`.
    #[arg(long)]
    pub data: PathBuf,
    /// Weights file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 4096)]
    pub batch: usize,
    /// Held-out fraction; 0 trains on everything.
    #[arg(long, default_value_t = 0.1)]
    pub val_frac: f64,
    /// Seeds the split, the shuffles and the initialization.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Loss-history CSV; defaults to `<out>.history.csv`.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SceneArgs {
    /// Scene JSON file.
    #[arg(long, conflicts_with = "gen_layers")]
    pub scene: Option<PathBuf>,
    /// Generate a layered scene with this many layers instead of loading one.
    #[arg(long)]
    pub gen_layers: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub gen_seed: u64,
    /// Vertex-color seed of the generated scene; defaults to `--gen-seed`.
    #[arg(long)]
    pub palette_seed: Option<u64>,
    #[arg(long, default_value_t = 0.01)]
    pub gen_alpha_min: f32,
    #[arg(long, default_value_t = 0.85)]
    pub gen_alpha_max: f32,
    #[arg(long, default_value_t = 512)]
    pub width: usize,
    #[arg(long, default_value_t = 512)]
    pub height: usize,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long, default_value = "exact")]
    pub resolver: Resolver,
    /// Exactly composited layers for `ht`.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value = "1,1,1", value_parser = parse_rgb)]
    pub background: Rgb,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long, value_delimiter = ',', default_value = "wsum,wavg,wboit,ht,dfaoit")]
    pub resolvers: Vec<Resolver>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value = "1,1,1", value_parser = parse_rgb)]
    pub background: Rgb,
    /// Directory for the CSV, the images and the error maps.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Network to time; a randomly initialized one is used otherwise.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses `r,g,b` with every channel in `[0, 1]`.
pub fn parse_rgb(s: &str) -> Result<Rgb, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected r,g,b, got `{s}`"));
    }
    let mut c = [0.0f32; 3];
    for (dst, p) in c.iter_mut().zip(&parts) {
        let v: f32 = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(format!("channel {v} outside [0, 1]"));
        }
        *dst = v;
    }
    Ok(Rgb::from_array(c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgb_values() {
        assert_eq!(parse_rgb("0.2, 0.5,1").unwrap(), Rgb::new(0.2, 0.5, 1.0));
        assert!(parse_rgb("0.2,0.5").is_err());
        assert!(parse_rgb("0.2,x,1").is_err());
        assert!(parse_rgb("0.2,1.5,1").is_err());
    }

    #[test]
    fn arguments_are_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
