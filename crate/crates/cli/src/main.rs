use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use intrinsic_core::apps::{run_edit, EditOp, EditRequest, DEFAULT_TAU};
use intrinsic_core::formation::grayscale_oracle;
use intrinsic_core::image::{read_image, srgb_to_linear};
use intrinsic_core::kv::KvDoc;
use intrinsic_core::metrics::{evaluate_dataset, MetricConfig};
use intrinsic_core::nn::{grad_check, NetSpec, Network, Tensor};
use intrinsic_core::pipeline::{
    ablation_variants, resolve_paths, run_ablation, train_stage, variant_net_spec, GrayInput, Pipeline, TREND_VARIANTS,
};
use intrinsic_core::synth::{gen_dataset, Dataset, SceneParams, Split};
use intrinsic_core::{ColorSpace, Error, IntrinsicComponents, LinearImage, EPS};

/// Colorful diffuse intrinsic decomposition toolkit.
///
/// Relative paths are taken from `--root` (default: the current directory).
/// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
/// 3 numerical failure.
#[derive(Parser, Debug)]
#[command(name = "intrinsic", version, about)]
struct Cli {
    /// Workspace directory that relative paths are resolved against.
    #[arg(long, global = true, default_value = ".")]
    root: PathBuf,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GrayMode {
    /// Grayscale decomposition from the scene's ground-truth albedo.
    Oracle,
    /// The run's stage-0 network.
    Net,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Op {
    Despecularize,
    Whitebalance,
    RecoverHighlights,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a procedural dataset.
    Gen {
        /// Scene parameters (key = value); defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the configured resolution.
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Train one network (a pipeline stage, an ablation variant or `baseline`).
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Run directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        stage: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Decompose an image, a scene directory, or one split of a dataset.
    Decompose {
        /// Run directory with chroma, albedo and diffuse checkpoints.
        #[arg(long)]
        run: PathBuf,
        /// Image file (PNG is read as sRGB) or scene directory.
        #[arg(long, conflicts_with = "dataset")]
        input: Option<PathBuf>,
        /// Dataset manifest; every scene of `--split` is decomposed.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, value_enum, default_value = "oracle")]
        gray: GrayMode,
        /// Output directory (one component directory per scene for datasets).
        #[arg(long)]
        out: PathBuf,
        /// Use the baseline network's albedo instead of the pipeline.
        #[arg(long)]
        baseline: bool,
    },
    /// Score predicted albedos against a dataset.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// Directory of predicted component directories, one per scene id.
        #[arg(long)]
        pred: PathBuf,
        /// Split to score; all scenes if omitted.
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        lmse_window: Option<usize>,
    },
    /// Apply an illumination-aware edit to a components directory.
    Edit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        op: Op,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        exposure: f32,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f32,
        /// Keep positive residual when white balancing.
        #[arg(long)]
        keep_residual: bool,
    },
    /// Compare analytic and finite-difference gradients of a small network.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Take the architecture of `--stage` from this config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "chroma")]
        stage: String,
        #[arg(long, default_value_t = 8)]
        size: usize,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
    /// Train ablation variants over several seeds and compare them.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated seeds.
        #[arg(long, default_value = "1,2,3", value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Comma-separated variants; the trend set if omitted.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        /// Test scenes scored per variant; 0 for all.
        #[arg(long, default_value_t = 0)]
        test_limit: usize,
        /// Ignored; seeds come from `--seeds`.
        #[arg(long, hide = true)]
        seed: Option<u64>,
    },
}

fn load_config(path: &Path) -> anyhow::Result<KvDoc> {
    let doc = KvDoc::load(path)?;
    Ok(resolve_paths(&doc, path.parent().unwrap_or(Path::new("."))))
}

fn read_input_image(path: &Path) -> anyhow::Result<LinearImage> {
    let img = read_image(path)?;
    Ok(match img.color_space() {
        ColorSpace::Srgb => srgb_to_linear(&img)?,
        _ => img,
    })
}

fn decompose_one(
    pipeline: &Pipeline,
    baseline: Option<&Network>,
    image: &LinearImage,
    gt: Option<&IntrinsicComponents>,
    gray: GrayMode,
) -> anyhow::Result<IntrinsicComponents> {
    if let Some(net) = baseline {
        let albedo = intrinsic_core::pipeline::infer_baseline(net, image)?;
        let shading = intrinsic_core::formation::divide(image, &albedo, EPS)?.with_color_space(ColorSpace::Linear)?;
        return Ok(IntrinsicComponents::from_diffuse(image.clone(), albedo, shading)?);
    }
    match gray {
        GrayMode::Oracle => {
            let gt = gt.context("oracle gray input needs a scene directory with ground-truth albedo")?;
            let (ga, gs) = grayscale_oracle(image, &gt.albedo, EPS)?;
            Ok(pipeline.decompose(
                image,
                GrayInput::Given {
                    gray_albedo: &ga,
                    gray_shading: &gs,
                },
            )?)
        }
        GrayMode::Net => Ok(pipeline.decompose(image, GrayInput::Network)?),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let root = cli.root.clone();
    let at = |p: &Path| root.join(p);
    match cli.cmd {
        Cmd::Gen {
            config,
            out,
            count,
            seed,
            resolution,
        } => {
            let mut params = match config {
                Some(c) => SceneParams::from_kv(&KvDoc::load(&at(&c))?)?,
                None => SceneParams::default(),
            };
            if let Some(s) = seed {
                params.seed = s;
            }
            if let Some(r) = resolution {
                params.resolution = r;
            }
            let ds = gen_dataset(&params, count, &at(&out))?;
            println!("wrote {} scenes to {}", ds.entries().len(), at(&out).display());
        }
        Cmd::Train {
            config,
            out,
            stage,
            seed,
        } => {
            let mut doc = load_config(&at(&config))?;
            if let Some(s) = seed {
                doc.set("seed", s);
            }
            let spec = ablation_variants(&stage)?;
            let outcome = train_stage(&spec, &doc, &at(&out))?;
            println!(
                "{stage}: val mse {:.6} -> {:.6}, checkpoint {}",
                outcome.initial_val_mse(),
                outcome.final_val_mse(),
                outcome.checkpoint.display()
            );
        }
        Cmd::Decompose {
            run,
            input,
            dataset,
            split,
            gray,
            out,
            baseline,
        } => {
            let run = at(&run);
            let pipeline = Pipeline::load(&run)?;
            let base = if baseline {
                let doc = KvDoc::load(&run.join("config"))?;
                let spec = ablation_variants("baseline")?;
                Some(intrinsic_core::pipeline::load_network(&run, &doc, &spec)?)
            } else {
                None
            };
            let out = at(&out);
            match (input, dataset) {
                (Some(input), None) => {
                    let input = at(&input);
                    let (image, gt) = if input.is_dir() {
                        let gt = IntrinsicComponents::load(&input)?;
                        (gt.image.clone(), Some(gt))
                    } else {
                        (read_input_image(&input)?, None)
                    };
                    decompose_one(&pipeline, base.as_ref(), &image, gt.as_ref(), gray)?.save(&out)?;
                }
                (None, Some(manifest)) => {
                    let ds = Dataset::load(&at(&manifest))?;
                    let split = Split::parse(&split)?;
                    let mut n = 0;
                    for entry in ds.split(split) {
                        let scene = ds.load_scene(entry)?;
                        let c = &scene.components;
                        decompose_one(&pipeline, base.as_ref(), &c.image, Some(c), gray)?.save(&out.join(&entry.id))?;
                        n += 1;
                    }
                    println!("decomposed {n} scenes into {}", out.display());
                }
                _ => bail!(Error::Config("give exactly one of --input and --dataset".into())),
            }
        }
        Cmd::Eval {
            dataset,
            pred,
            split,
            out,
            lmse_window,
        } => {
            let split = split.map(|s| Split::parse(&s)).transpose()?;
            let config = MetricConfig {
                lmse_window,
                ..MetricConfig::default()
            };
            let report = evaluate_dataset(&at(&dataset), &at(&pred), split, &config)?;
            report.write(&at(&out))?;
            print!("{}", report.summary());
        }
        Cmd::Edit {
            input,
            op,
            out,
            exposure,
            tau,
            keep_residual,
        } => {
            let op = match op {
                Op::Despecularize => EditOp::Despecularize,
                Op::Whitebalance => EditOp::Whitebalance { keep_residual },
                Op::RecoverHighlights => EditOp::RecoverHighlights { exposure, tau },
            };
            run_edit(&EditRequest {
                components: at(&input),
                op,
                output: at(&out),
            })?;
        }
        Cmd::Gradcheck {
            seed,
            config,
            stage,
            size,
            tol,
        } => {
            let spec = ablation_variants(&stage)?;
            let arch = match config {
                Some(c) => variant_net_spec(&load_config(&at(&c))?, &spec)?,
                None => {
                    NetSpec::new(spec.in_channels(), spec.out_channels(), &[3, 4, 5]).with_out_level(spec.out_level)
                }
            };
            let net = Network::new(arch, seed)?;
            let m = net.spec().size_multiple();
            let side = size.div_ceil(m) * m;
            let x = Tensor::uniform([1, net.spec().in_channels, side, side], 0.0, 1.0, seed);
            let report = grad_check(&net, &x, seed);
            print!("{report}");
            println!(
                "max relative error {:.3e} (tolerance {tol:.0e})",
                report.max_rel_error()
            );
            if !report.passes(tol) {
                bail!(Error::Numerical(format!(
                    "gradient check failed: {:.3e} >= {tol:.0e}",
                    report.max_rel_error()
                )));
            }
        }
        Cmd::Ablate {
            config,
            out,
            seeds,
            variants,
            test_limit,
            seed: _,
        } => {
            let doc = load_config(&at(&config))?;
            let names: Vec<&str> = if variants.is_empty() {
                TREND_VARIANTS.to_vec()
            } else {
                variants.iter().map(String::as_str).collect()
            };
            let report = run_ablation(&doc, &names, &seeds, &at(&out), test_limit)?;
            print!("{}", report.summary());
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) => 1,
        Some(Error::Numerical(_)) => 3,
        Some(_) => 2,
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .parse_default_env()
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
