//! Command-line front end of the `semm` binary.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::edit::{EditConfig, EditSession, Keyframe};
use crate::error::{Error, Result};
use crate::evaluation::evaluate;
use crate::io::{load_displacement, load_distance_field, preview_png, save_displacement, save_distance_field, save_lines};
use crate::losses::{distance_field_loss, mean_abs_difference, perceptual_detail_distance};
use crate::mesh::{apply_displacement, bake_displacement, laplacian_smooth, load_obj, save_obj};
use crate::model::{evaluate_split_losses, DetailModel, LatentCode, TrainConfig, AGE_CENTER};
use crate::raster::{DisplacementMap, JointSample};
use crate::service::{serve, ServiceConfig};
use crate::structure::{distance_transform, extract_lines, LineEdit};
use crate::synth::{build_corpus, Corpus, CorpusConfig, Split};

#[derive(Debug, Parser)]
#[command(name = "semm", version, about = "Editable facial detail displacement maps")]
pub struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic corpus to a directory.
    SynthCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        subjects: usize,
        #[arg(long, default_value_t = 8)]
        expressions: usize,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
    },
    /// Fit a model to a corpus directory.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// TOML training settings; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        latent_dim: Option<usize>,
    },
    /// Compare two rasters, report training losses, or run the held-out
    /// statistics.
    Eval(EvalArgs),
    /// Print the latent code of a displacement map as JSON.
    Encode {
        #[command(flatten)]
        input: ModelInput,
        /// Write the code here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode a JSON latent code to rasters.
    Decode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        code: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        df_out: Option<PathBuf>,
    },
    /// Bake the detail of a mesh over its smoothed version into a map.
    Bake {
        #[arg(long)]
        mesh: PathBuf,
        /// Smoothed base mesh; computed with Laplacian smoothing when absent.
        #[arg(long)]
        smooth: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        #[arg(long, default_value_t = 0.5)]
        step: f64,
        #[arg(long, default_value_t = 256)]
        resolution: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Displace a mesh along its normals by a map.
    Apply {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        disp: PathBuf,
        #[arg(long, default_value_t = 0)]
        subdiv: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract the wrinkle-line map of a displacement map.
    ExtractLines {
        #[arg(long)]
        disp: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        df_out: Option<PathBuf>,
    },
    /// Apply a JSON list of draw/erase strokes.
    EditLines {
        #[command(flatten)]
        input: ModelInput,
        #[arg(long)]
        edit: PathBuf,
        #[arg(long)]
        refine_steps: Option<usize>,
        #[command(flatten)]
        output: EditOutputArgs,
        #[arg(long)]
        lines_out: Option<PathBuf>,
    },
    /// Set the blendshape weights.
    EditExpression {
        #[command(flatten)]
        input: ModelInput,
        /// Comma-separated weights in [0, 1].
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        weights: Vec<f64>,
        #[command(flatten)]
        output: EditOutputArgs,
    },
    /// Age or rejuvenate to a target age.
    EditAge {
        #[command(flatten)]
        input: ModelInput,
        #[arg(long)]
        target: f64,
        #[command(flatten)]
        output: EditOutputArgs,
    },
    /// Render a blendshape animation from JSON keyframes.
    Animate {
        #[command(flatten)]
        input: ModelInput,
        #[arg(long)]
        keyframes: PathBuf,
        #[arg(long, default_value_t = 24.0)]
        fps: f64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the HTTP editing service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    /// Truncated distance-field loss of two distance-field PNGs.
    Df,
    Perceptual,
    MeanAbs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Two raster PNGs to compare.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub pair: Option<Vec<PathBuf>>,
    #[arg(long, value_enum, default_value_t = Metric::Perceptual)]
    pub metric: Metric,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Report the loss breakdown on this split's evaluation batch.
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
    /// Write the held-out statistics as JSON here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

/// A model and the displacement map to work on.
#[derive(Debug, Args)]
pub struct ModelInput {
    #[arg(long)]
    pub model: PathBuf,
    /// Displacement PNG with its `.meta` sidecar.
    #[arg(long)]
    pub disp: PathBuf,
    /// Distance-field PNG; derived from the extracted lines when absent.
    #[arg(long)]
    pub df: Option<PathBuf>,
    #[arg(long, default_value_t = AGE_CENTER)]
    pub age: f64,
    /// Blendshape weights of the input; neutral when absent.
    #[arg(long, value_delimiter = ',')]
    pub expression: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct EditOutputArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Shaded relief of the result.
    #[arg(long)]
    pub preview: Option<PathBuf>,
}

/// Keyframe file of `semm animate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyframeFile {
    pub keyframes: Vec<Keyframe>,
}

/// Written next to animation frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnimationManifest {
    pub fps: f64,
    pub frames: Vec<String>,
    pub weights: Vec<Vec<f64>>,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code: 0 on success, 2 on usage errors, 1 on
/// runtime errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let seed = cli.seed;
    match &cli.command {
        Command::SynthCorpus { out, subjects, expressions, resolution } => {
            let cfg = CorpusConfig::new(*subjects, *expressions, *resolution, seed);
            let corpus = build_corpus(&cfg, out)?;
            println!("{} samples written to {}", corpus.samples.len(), out.display());
        }
        Command::Train { corpus, out, config, steps, latent_dim } => {
            let mut cfg = match config {
                Some(p) => toml::from_str::<TrainConfig>(&std::fs::read_to_string(p)?).map_err(|e| Error::Config(e.to_string()))?,
                None => TrainConfig::default(),
            };
            cfg.seed = seed;
            cfg.steps = steps.unwrap_or(cfg.steps);
            cfg.latent_dim = latent_dim.unwrap_or(cfg.latent_dim);
            let corpus = Corpus::load(corpus)?;
            let model = DetailModel::fit(&corpus, &cfg)?;
            model.save(out)?;
            println!("{}", serde_json::to_string_pretty(&model.metadata.final_losses)?);
        }
        Command::Eval(args) => eval(args, seed)?,
        Command::Encode { input, out } => {
            let (model, sample) = load_input(input)?;
            let z = model.encode(&sample)?;
            let text = serde_json::to_string(&z)?;
            match out {
                Some(p) => std::fs::write(p, text)?,
                None => println!("{text}"),
            }
        }
        Command::Decode { model, code, out, df_out } => {
            let model = DetailModel::load(model)?;
            let z: LatentCode = serde_json::from_str(&std::fs::read_to_string(code)?)?;
            let (disp, df) = model.decode(&z)?;
            save_displacement(out, &disp)?;
            if let Some(p) = df_out {
                save_distance_field(p, &df)?;
            }
        }
        Command::Bake { mesh, smooth, iterations, step, resolution, out } => {
            let orig = load_obj(mesh)?;
            let base = match smooth {
                Some(p) => load_obj(p)?,
                None => laplacian_smooth(&orig, *iterations, *step)?,
            };
            save_displacement(out, &bake_displacement(&orig, &base, *resolution)?)?;
        }
        Command::Apply { mesh, disp, subdiv, out } => {
            let m = apply_displacement(&load_obj(mesh)?, &load_displacement(disp)?, *subdiv)?;
            save_obj(out, &m)?;
        }
        Command::ExtractLines { disp, out, df_out } => {
            let lines = extract_lines(&load_displacement(disp)?);
            save_lines(out, &lines)?;
            if let Some(p) = df_out {
                save_distance_field(p, &distance_transform(&lines))?;
            }
        }
        Command::EditLines { input, edit, refine_steps, output, lines_out } => {
            let mut session = open_session(input)?;
            let edit: LineEdit = serde_json::from_str(&std::fs::read_to_string(edit)?)?;
            let steps = refine_steps.unwrap_or(session.config().refine_steps);
            let out = session.edit_lines(&edit, steps)?;
            write_output(output, &out.sample.disp)?;
            if let Some(p) = lines_out {
                save_lines(p, session.lines())?;
            }
        }
        Command::EditExpression { input, weights, output } => {
            let mut session = open_session(input)?;
            write_output(output, &session.edit_expression(weights)?.sample.disp)?;
        }
        Command::EditAge { input, target, output } => {
            let mut session = open_session(input)?;
            write_output(output, &session.edit_age(*target)?.sample.disp)?;
        }
        Command::Animate { input, keyframes, fps, out_dir } => {
            let session = open_session(input)?;
            let file: KeyframeFile = serde_json::from_str(&std::fs::read_to_string(keyframes)?)?;
            let frames = session.animate(&file.keyframes, *fps)?;
            std::fs::create_dir_all(out_dir)?;
            let mut names = Vec::with_capacity(frames.len());
            for (i, f) in frames.iter().enumerate() {
                let name = format!("frame_{i:04}.png");
                save_displacement(out_dir.join(&name), f)?;
                names.push(name);
            }
            let weights = crate::edit::animation_weights(&file.keyframes, *fps, session.model().n_e())?;
            let manifest = AnimationManifest { fps: *fps, frames: names, weights };
            std::fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        }
        Command::Serve { config } => {
            let mut cfg = ServiceConfig::load(config)?;
            if cfg.seed == 0 {
                cfg.seed = seed;
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(&cfg))?;
        }
    }
    Ok(())
}

fn eval(args: &EvalArgs, seed: u64) -> Result<()> {
    if let Some(pair) = &args.pair {
        let v = pair_metric(&pair[0], &pair[1], args.metric)?;
        println!("{v}");
        return Ok(());
    }
    let (Some(model), Some(corpus)) = (&args.model, &args.corpus) else {
        return Err(Error::InvalidInput("eval needs --pair, or --model with --corpus".into()));
    };
    let model = Arc::new(DetailModel::load(model)?);
    let corpus = Corpus::load(corpus)?;
    if let Some(split) = args.split {
        let split = match split {
            SplitArg::Train => Split::Train,
            SplitArg::Test => Split::Test,
        };
        let samples: Vec<_> = corpus.split(split).collect();
        let cfg = model.metadata.train_config.clone().unwrap_or_default();
        let losses = evaluate_split_losses(&model, &samples, &cfg.weights_for(model.resolution()), cfg.eval_items, cfg.seed)?;
        println!("{}", serde_json::to_string_pretty(&losses)?);
    }
    if let Some(path) = &args.report {
        let report = evaluate(model, &corpus, seed)?;
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
        println!("{}", serde_json::to_string_pretty(&report)?);
    }
    Ok(())
}

/// Value printed by `semm eval --pair a b --metric m`.
pub fn pair_metric(a: &Path, b: &Path, metric: Metric) -> Result<f64> {
    match metric {
        Metric::Df => {
            let (a, b) = (load_distance_field(a)?, load_distance_field(b)?);
            distance_field_loss(&a, &b, a.truncation())
        }
        Metric::Perceptual => perceptual_detail_distance(&load_displacement(a)?, &load_displacement(b)?),
        Metric::MeanAbs => mean_abs_difference(&load_displacement(a)?, &load_displacement(b)?),
    }
}

fn load_input(input: &ModelInput) -> Result<(Arc<DetailModel>, JointSample)> {
    let model = Arc::new(DetailModel::load(&input.model)?);
    let disp = load_displacement(&input.disp)?;
    let df = match &input.df {
        Some(p) => load_distance_field(p)?,
        None => distance_transform(&extract_lines(&disp)),
    };
    let expression = input.expression.clone().unwrap_or_else(|| vec![0.0; model.n_e()]);
    let sample = JointSample::new(disp, df, expression, input.age)?;
    Ok((model, sample))
}

fn open_session(input: &ModelInput) -> Result<EditSession> {
    let (model, sample) = load_input(input)?;
    EditSession::with_config(model, sample, EditConfig::default())
}

fn write_output(output: &EditOutputArgs, disp: &DisplacementMap) -> Result<()> {
    save_displacement(&output.out, disp)?;
    if let Some(p) = &output.preview {
        std::fs::write(p, preview_png(disp)?)?;
    }
    Ok(())
}
