//! Command-line front end: `orient`, `interpolate`, `eval` and `synth`.
//!
//! Exit codes: 0 on success, 1 on input or configuration errors, 2 on
//! internal invariant violations.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dipolar::cloud::PointCloud;
use dipolar::error::{Error, Result};
use dipolar::evaluation::{generate, ShapeKind, SyntheticShape};
use dipolar::io::{self, write_report, PlyFlavor};
use dipolar::patching::ConfidenceStrategy;
use dipolar::pipeline::{self, FlipTo, InterpolateParams, OrientParams};

#[derive(Parser)]
#[command(
    name = "dipolar",
    about = "Consistent point-cloud normal orientation via dipole field propagation",
    version
)]
struct Cli {
    /// Cap the worker thread pool.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutputArgs {
    /// Output cloud path (PLY).
    #[arg(long)]
    out: PathBuf,

    /// Write the run report here.
    #[arg(long)]
    report: Option<PathBuf>,

    /// Write ascii PLY instead of binary-little-endian.
    #[arg(long)]
    ascii: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Orient a cloud from scratch.
    Orient {
        /// Input cloud (XYZ or PLY).
        input: PathBuf,

        #[command(flatten)]
        output: OutputArgs,

        /// Voxel width as a fraction of the unit cube.
        #[arg(long, default_value_t = 1.0 / 25.0)]
        voxel_width: f64,

        /// Patches below this size are merged into a neighbor.
        #[arg(long, default_value_t = 100)]
        min_patch: usize,

        /// Planarity threshold on the smallest normalized eigenvalue.
        #[arg(long, default_value_t = 0.00015)]
        planar_thresh: f64,

        /// Neighborhood size for normal estimation and consistency weights.
        #[arg(long, default_value_t = 16)]
        knn: usize,

        /// Diffusion passes after propagation.
        #[arg(long, default_value_t = 1)]
        diffusion_passes: usize,

        /// Clouds above this size run on a per-patch subsample.
        #[arg(long, default_value_t = 500_000)]
        subsample_above: usize,

        /// Fraction of each patch kept in the subsample.
        #[arg(long, default_value_t = 0.1)]
        subsample_fraction: f64,

        /// Seed for the subsample draw.
        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Confidence provider: uniform, consistency, or file:<path>.
        #[arg(long, default_value = "uniform")]
        confidence: String,

        /// Fix the global sign afterwards: <index>:<+x|-x|+y|-y|+z|-z>.
        #[arg(long)]
        flip_to: Option<String>,

        /// Ignore any input normals and re-estimate them.
        #[arg(long)]
        reestimate: bool,
    },

    /// Orient points lacking normals from the points that have them.
    Interpolate {
        /// Cloud with the points to orient. Without --given it must mix
        /// rows with and without normals.
        input: PathBuf,

        /// Separate cloud supplying the given oriented normals.
        #[arg(long)]
        given: Option<PathBuf>,

        #[command(flatten)]
        output: OutputArgs,

        /// Let a final diffusion pass re-correct the given normals too.
        #[arg(long)]
        recorrect: bool,

        /// Neighborhood size for estimating missing unsigned normals.
        #[arg(long, default_value_t = 16)]
        knn: usize,

        /// Confidence provider: uniform, consistency, or file:<path>.
        #[arg(long, default_value = "uniform")]
        confidence: String,
    },

    /// Score an estimated orientation against index-aligned ground truth.
    Eval {
        /// Estimated cloud (must carry normals).
        #[arg(long)]
        estimate: PathBuf,

        /// Ground-truth cloud.
        #[arg(long)]
        truth: PathBuf,

        /// Write the run report here.
        #[arg(long)]
        report: Option<PathBuf>,

        /// Write the estimate recolored by correctness (gray/red) here.
        #[arg(long)]
        colorize_out: Option<PathBuf>,

        /// Write ascii PLY instead of binary-little-endian.
        #[arg(long)]
        ascii: bool,
    },

    /// Generate a synthetic ground-truth shape.
    Synth {
        /// sphere | torus | slab | cube | nested-spheres
        #[arg(long)]
        shape: String,

        /// Sample count (at least 100).
        #[arg(long)]
        n: usize,

        /// Gaussian noise along the true normal, as a fraction of the
        /// bounding-box diagonal.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,

        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Output path; .xyz writes text rows, anything else PLY.
        #[arg(long)]
        out: PathBuf,

        /// Drop normals from the output (XYZ only): positions-only input
        /// for a full orient run.
        #[arg(long)]
        strip_normals: bool,

        /// Write ascii PLY instead of binary-little-endian.
        #[arg(long)]
        ascii: bool,
    },
}

fn flavor(ascii: bool) -> PlyFlavor {
    if ascii {
        PlyFlavor::Ascii
    } else {
        PlyFlavor::BinaryLittleEndian
    }
}

fn confidence_strategy(choice: &str, knn: usize, cloud: &PointCloud) -> Result<ConfidenceStrategy> {
    if let Some(path) = choice.strip_prefix("file:") {
        let values = io::read_confidence_file(path, cloud.len())?;
        return Ok(ConfidenceStrategy::External(values));
    }
    match choice {
        "uniform" => Ok(ConfidenceStrategy::Uniform),
        "consistency" => Ok(ConfidenceStrategy::Consistency { k: knn }),
        other => Err(Error::InvalidConfig(format!(
            "confidence must be uniform, consistency or file:<path>, got '{other}'"
        ))),
    }
}

fn write_outputs(
    cloud: &PointCloud,
    report: &io::EvalReport,
    output: &OutputArgs,
) -> Result<()> {
    io::write_cloud(cloud, &output.out, flavor(output.ascii), None)?;
    if let Some(path) = &output.report {
        write_report(report, path)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Orient {
            input,
            output,
            voxel_width,
            min_patch,
            planar_thresh,
            knn,
            diffusion_passes,
            subsample_above,
            subsample_fraction,
            seed,
            confidence,
            flip_to,
            reestimate,
        } => {
            let started = std::time::Instant::now();
            let (cloud, file) = io::parse_cloud(&input)?;
            let params = OrientParams {
                voxel_width,
                min_patch_size: min_patch,
                planarity_threshold: planar_thresh,
                knn,
                diffusion_passes,
                subsample_threshold: subsample_above,
                subsample_fraction,
                seed,
                confidence: confidence_strategy(&confidence, knn, &cloud)?,
                flip_to: flip_to.as_deref().map(FlipTo::parse).transpose()?,
                reestimate_normals: reestimate,
            };
            let mut outcome = pipeline::orient(cloud, &params)?;
            outcome
                .report
                .timing("total", started.elapsed().as_secs_f64());
            write_outputs(&outcome.cloud, &outcome.report, &output)?;
            println!(
                "oriented {} points ({} in file) into {} patches ({} planar); {} patch flips, {} diffusion flips",
                outcome.cloud.len(),
                file.points,
                outcome.report.patches,
                outcome.report.planar_patches,
                outcome.report.flips_propagation,
                outcome.report.flips_diffusion,
            );
            Ok(())
        }

        Command::Interpolate {
            input,
            given,
            output,
            recorrect,
            knn,
            confidence,
        } => {
            let (mut cloud, _) = io::parse_cloud(&input)?;
            if let Some(given_path) = given {
                let (given_cloud, given_file) = io::parse_cloud(&given_path)?;
                if !given_file.has_normals {
                    return Err(Error::NoGivenNormals);
                }
                cloud = merge_given(given_cloud, cloud);
            }
            let params = InterpolateParams {
                knn,
                confidence: confidence_strategy(&confidence, knn, &cloud)?,
                recorrect,
            };
            let outcome = pipeline::interpolate(cloud, &params)?;
            write_outputs(&outcome.cloud, &outcome.report, &output)?;
            println!(
                "interpolated orientation for {} of {} points ({} low-confidence, {} re-corrections)",
                outcome
                    .report
                    .params
                    .iter()
                    .find(|(k, _)| k == "oriented")
                    .map(|(_, v)| v.as_str())
                    .unwrap_or("0"),
                outcome.cloud.len(),
                outcome.report.low_confidence,
                outcome.report.flips_diffusion,
            );
            Ok(())
        }

        Command::Eval {
            estimate,
            truth,
            report,
            colorize_out,
            ascii,
        } => {
            let (est, _) = io::parse_cloud(&estimate)?;
            let (gt, _) = io::parse_cloud(&truth)?;
            let (a, eval_report) = pipeline::evaluate(&est, &gt)?;
            if let Some(path) = report {
                write_report(&eval_report, path)?;
            }
            if let Some(path) = colorize_out {
                io::write_cloud(&est, path, flavor(ascii), Some(&gt))?;
            }
            println!(
                "accuracy {:.4}% over {} points (global sign {})",
                a.percent, a.total, a.sign
            );
            Ok(())
        }

        Command::Synth {
            shape,
            n,
            noise,
            seed,
            out,
            strip_normals,
            ascii,
        } => {
            let kind: ShapeKind = shape.parse()?;
            let cloud = generate(&SyntheticShape {
                kind,
                samples: n,
                noise_sigma: noise,
                seed,
            })?;
            if is_xyz(&out) {
                io::xyz::write(&cloud, &out, strip_normals)?;
            } else {
                if strip_normals {
                    return Err(Error::InvalidConfig(
                        "--strip-normals needs an .xyz output (ply always carries normals)"
                            .into(),
                    ));
                }
                io::write_cloud(&cloud, &out, flavor(ascii), None)?;
            }
            println!("wrote {} {} samples to {}", n, kind.name(), out.display());
            Ok(())
        }
    }
}

fn is_xyz(path: &Path) -> bool {
    path.extension()
        .map(|e| e.eq_ignore_ascii_case("xyz") || e.eq_ignore_ascii_case("txt"))
        .unwrap_or(false)
}

/// Concatenate a given-normals cloud with the points to orient; the given
/// block keeps its flags, the rest are treated as unsigned estimates.
fn merge_given(given: PointCloud, new_points: PointCloud) -> PointCloud {
    let total = given.len() + new_points.len();
    let mut positions = given.positions;
    positions.extend_from_slice(&new_points.positions);
    let mut normals = given.normals;
    if new_points.has_normals() {
        normals.extend_from_slice(&new_points.normals);
    } else {
        normals.extend(std::iter::repeat_n(dipolar::Vec3::ZERO, new_points.len()));
    }
    let mut normal_given = given.normal_given;
    normal_given.extend(std::iter::repeat_n(false, new_points.len()));
    PointCloud {
        positions,
        normals,
        confidence: Vec::new(),
        normal_given,
        flipped_by_diffusion: vec![false; total],
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not configure {threads} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
