//! Command-line front end for the mask pipeline: lattice inspection,
//! encoding, decoding, spectrum analysis, fitting, super-resolution and
//! subdivision refinement.
//!
//! Every command is reproducible byte-for-byte given identical inputs and
//! flags, and echoes its numeric flags into a run-manifest JSON next to its
//! outputs. Exit codes: 0 success, 1 runtime error, 2 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fourier_mask::codec::{
    encode_mask, reconstruct, spectrum_analysis_dataset, EncoderConfig, SpectrumReport,
};
use fourier_mask::fitter::{
    self, fit_mask, load_coefficients, load_mlp, FitConfig, FitMode, FitResult,
};
use fourier_mask::lattice::FrequencyLattice;
use fourier_mask::maskio::{load_mask, save_mask, MaskFormat};
use fourier_mask::renderer::{subdivision_refine, trace_csv, PointSource, RefinementConfig};
use fourier_mask::siren::SirenParams;
use fourier_mask::upsampler::super_resolve;
use fourier_mask::{CoefficientField, MaskRaster};

#[derive(Parser)]
#[command(name = "fourier-mask", version, about = "Binary masks as truncated 2D Fourier series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Global,
    #[value(name = "per-pixel")]
    PerPixel,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SourceArg {
    #[value(name = "exact-implicit")]
    ExactImplicit,
    Mlp,
}

#[derive(Subcommand)]
enum Command {
    /// Print the frequency lattice for a maximum frequency and its size
    Lattice {
        /// Maximum harmonic frequency
        #[arg(long)]
        f: u32,
    },
    /// Encode a binary mask into a global coefficient file
    Encode {
        /// Input mask (.pgm, .txt or .rle.json)
        #[arg(long = "in")]
        input: PathBuf,
        /// Maximum harmonic frequency (must stay below min(h, w)/2)
        #[arg(long)]
        f: u32,
        /// Logit amplitude applied to the 0/1 mask before projection
        #[arg(long, default_value_t = 8.0)]
        alpha: f64,
        /// Output coefficient JSON
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct a mask raster from a coefficient file
    Decode {
        /// Coefficient JSON
        #[arg(long = "in")]
        input: PathBuf,
        /// Raster height
        #[arg(long)]
        h: usize,
        /// Raster width
        #[arg(long)]
        w: usize,
        /// Scaling factor: the output is (h 2^(s-1)) x (w 2^(s-1))
        #[arg(long, default_value_t = 1)]
        s: u32,
        /// Output mask file
        #[arg(long)]
        out: PathBuf,
        /// Threshold the output to 0/1 before writing
        #[arg(long)]
        binarize: bool,
    },
    /// Mean reconstruction loss per retained frequency over a mask dataset
    Spectrum {
        /// Directory of mask files (recursed, lexicographic order)
        #[arg(long)]
        dataset: PathBuf,
        /// Highest maximum frequency to analyze
        #[arg(long)]
        fmax: u32,
        /// Logit amplitude for the encoder
        #[arg(long, default_value_t = 8.0)]
        alpha: f64,
        /// Output CSV; a JSON twin is written next to it
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit coefficients (and optionally the MLP head) to a target mask
    Fit {
        /// Target binary mask
        #[arg(long)]
        target: PathBuf,
        /// Coefficient layout
        #[arg(long, value_enum, default_value_t = ModeArg::Global)]
        mode: ModeArg,
        /// Maximum harmonic frequency
        #[arg(long)]
        f: u32,
        /// Train the sine-MLP head alongside the coefficients
        #[arg(long)]
        mlp: bool,
        /// Optimization steps
        #[arg(long, default_value_t = 3000)]
        steps: usize,
        /// Learning rate
        #[arg(long, default_value_t = 5.0)]
        lr: f64,
        /// Seed for any randomized initialization
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (coefficients.json, history.csv, optional mlp.json)
        #[arg(long)]
        out: PathBuf,
    },
    /// Super-resolve a coefficient file or fit directory
    Upscale {
        /// Coefficient JSON or a fit directory
        #[arg(long = "in")]
        input: PathBuf,
        /// Scaling factor
        #[arg(long)]
        s: u32,
        /// Output mask file
        #[arg(long)]
        out: PathBuf,
    },
    /// Subdivision-refine a fitted mask to higher resolution
    Render {
        /// Fit directory
        #[arg(long = "in")]
        input: PathBuf,
        /// Subdivision steps (resolution doubles per step)
        #[arg(long, default_value_t = 3)]
        steps: u32,
        /// Points re-evaluated per step
        #[arg(long, default_value_t = 784)]
        points: usize,
        /// Where replacement values come from
        #[arg(long, value_enum, default_value_t = SourceArg::ExactImplicit)]
        source: SourceArg,
        /// Output mask file
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV trace of the selected points
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn run(command: Command) -> CliResult {
    match command {
        Command::Lattice { f } => {
            let lattice = FrequencyLattice::build(f);
            println!("{}", serde_json::to_string(&lattice)?);
            println!("c = {}", lattice.len());
            Ok(())
        }
        Command::Encode { input, f, alpha, out } => {
            let mask = load_mask(&input)?;
            let field = encode_mask(&mask, &EncoderConfig::new(f).with_alpha(alpha))?;
            fitter::save_coefficients(&field, &out)?;
            write_manifest(
                &sibling_manifest(&out),
                serde_json::json!({
                    "command": "encode",
                    "in": input,
                    "out": out,
                    "f": f,
                    "alpha": alpha,
                    "h": mask.height(),
                    "w": mask.width(),
                }),
            )
        }
        Command::Decode { input, h, w, s, out, binarize } => {
            let field = load_coefficients(&input)?;
            let raster = reconstruct(&field, h, w, s)?;
            save_mask(&raster, &out, binarize)?;
            write_manifest(
                &sibling_manifest(&out),
                serde_json::json!({
                    "command": "decode",
                    "in": input,
                    "out": out,
                    "h": h,
                    "w": w,
                    "s": s,
                    "binarize": binarize,
                }),
            )
        }
        Command::Spectrum { dataset, fmax, alpha, out } => {
            let threads = worker_threads();
            let report = spectrum_analysis_dataset(&dataset, fmax, alpha, threads)?;
            write_report(&report, &out)?;
            write_manifest(
                &sibling_manifest(&out),
                serde_json::json!({
                    "command": "spectrum",
                    "dataset": dataset,
                    "out": out,
                    "fmax": fmax,
                    "alpha": alpha,
                    "n_masks": report.rows.first().map(|r| r.n_masks),
                }),
            )
        }
        Command::Fit { target, mode, f, mlp, steps, lr, seed, out } => {
            let raster = load_mask(&target)?;
            let config = FitConfig {
                mode: match mode {
                    ModeArg::Global => FitMode::Global,
                    ModeArg::PerPixel => FitMode::PerPixel,
                },
                f,
                use_mlp: mlp,
                steps,
                learning_rate: lr,
                seed,
                ..FitConfig::default()
            };
            let result = fit_mask(&raster, &config)?;
            fitter::save_result(&result, &out)?;
            write_manifest(
                &out.join("manifest.json"),
                serde_json::json!({
                    "command": "fit",
                    "target": target,
                    "out": out,
                    "mode": match mode { ModeArg::Global => "global", ModeArg::PerPixel => "per-pixel" },
                    "f": f,
                    "mlp": mlp,
                    "steps": steps,
                    "lr": lr,
                    "seed": seed,
                    "h": result.height,
                    "w": result.width,
                    "final_iou": result.final_iou,
                }),
            )
        }
        Command::Upscale { input, s, out } => {
            let raster = if input.is_dir() {
                let result = load_fit_dir(&input)?;
                fitter::predict(&result, s)?
            } else {
                let field = load_coefficients(&input)?;
                let (h, w) = field_dims(&field, &input)?;
                super_resolve(&field, h, w, s)?
            };
            save_raster(&raster, &out)?;
            write_manifest(
                &sibling_manifest(&out),
                serde_json::json!({
                    "command": "upscale",
                    "in": input,
                    "out": out,
                    "s": s,
                }),
            )
        }
        Command::Render { input, steps, points, source, out, trace } => {
            let result = load_fit_dir(&input)?;
            let config = RefinementConfig {
                steps,
                points_per_step: points,
                point_source: match source {
                    SourceArg::ExactImplicit => PointSource::ExactImplicit,
                    SourceArg::Mlp => PointSource::Mlp,
                },
                ..RefinementConfig::default()
            };
            let refined = subdivision_refine(
                &result.coefficients,
                result.mlp.as_ref(),
                None,
                result.height,
                result.width,
                &config,
            )?;
            save_raster(&refined.raster, &out)?;
            if let Some(trace_path) = trace {
                std::fs::write(&trace_path, trace_csv(&refined.trace))?;
            }
            write_manifest(
                &sibling_manifest(&out),
                serde_json::json!({
                    "command": "render",
                    "in": input,
                    "out": out,
                    "steps": steps,
                    "points": points,
                    "source": match source {
                        SourceArg::ExactImplicit => "exact-implicit",
                        SourceArg::Mlp => "mlp",
                    },
                }),
            )
        }
    }
}

/// Worker cap for dataset commands; 0 means the machine's parallelism.
fn worker_threads() -> usize {
    std::env::var("FMK_THREADS").ok().and_then(|v| v.parse().ok()).unwrap_or(0)
}

fn sibling_manifest(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn write_manifest(path: &Path, value: serde_json::Value) -> CliResult {
    std::fs::write(path, serde_json::to_string_pretty(&value)?)?;
    Ok(())
}

fn write_report(report: &SpectrumReport, out: &Path) -> CliResult {
    std::fs::write(out, report.to_csv())?;
    std::fs::write(out.with_extension("json"), report.to_json())?;
    Ok(())
}

/// Soft rasters go to pgm as-is; the binary-only formats binarize first.
fn save_raster(raster: &MaskRaster, out: &Path) -> CliResult {
    let binarize = matches!(
        MaskFormat::from_path(out),
        Some(MaskFormat::TextGrid) | Some(MaskFormat::RleJson)
    );
    save_mask(raster, out, binarize)?;
    Ok(())
}

/// Raster dims for evaluating a coefficient file: per-pixel fields carry
/// them; global fields read them from the encode manifest next to the file.
fn field_dims(field: &CoefficientField, input: &Path) -> Result<(usize, usize), String> {
    if let Some(dims) = field.dims() {
        return Ok(dims);
    }
    let manifest_path = sibling_manifest(input);
    let text = std::fs::read_to_string(&manifest_path).map_err(|_| {
        format!(
            "global coefficient files carry no raster dims; expected them in {}",
            manifest_path.display()
        )
    })?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", manifest_path.display()))?;
    match (value["h"].as_u64(), value["w"].as_u64()) {
        (Some(h), Some(w)) if h > 0 && w > 0 => Ok((h as usize, w as usize)),
        _ => Err(format!("{} has no usable h/w fields", manifest_path.display())),
    }
}

/// Reassemble a FitResult from a fit directory (manifest supplies the dims;
/// the loss history is not needed for inference).
fn load_fit_dir(dir: &Path) -> Result<FitResult, Box<dyn std::error::Error>> {
    let field = load_coefficients(&dir.join(fitter::COEFFS_FILE))?;
    let (height, width) = match field.dims() {
        Some(dims) => dims,
        None => {
            let text = std::fs::read_to_string(dir.join("manifest.json")).map_err(|e| {
                format!("{}: {e} (needed for the raster dims of a global fit)", dir.display())
            })?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            match (value["h"].as_u64(), value["w"].as_u64()) {
                (Some(h), Some(w)) if h > 0 && w > 0 => (h as usize, w as usize),
                _ => return Err(format!("{}/manifest.json has no usable h/w", dir.display()).into()),
            }
        }
    };
    let mlp_path = dir.join(fitter::MLP_FILE);
    let mlp: Option<SirenParams> =
        if mlp_path.exists() { Some(load_mlp(&mlp_path)?) } else { None };
    Ok(FitResult {
        coefficients: field,
        mlp,
        loss_history: Vec::new(),
        final_iou: 0.0,
        height,
        width,
    })
}
