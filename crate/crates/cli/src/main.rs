//! `roadrand`: generate randomized road-marking labels and compute the
//! statistics, loss weights and metrics around them.
//!
//! Exit status: 0 success, 1 failure or partial failure, 2 invalid input or
//! configuration.

mod commands;
mod schema;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "roadrand", version, about = "Road layout randomization for road-marking segmentation datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate randomized labels for target classes from source labels.
    Generate(GenerateArgs),
    /// Count per-class pixels and occurrences over a label manifest.
    Stats {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        palette: Option<PathBuf>,
    },
    /// Compute class loss weights from a stats file.
    Weights {
        #[arg(long)]
        stats: PathBuf,
        /// eq, fb or tb.
        #[arg(long)]
        scheme: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        palette: Option<PathBuf>,
        /// Let the background class enter the median.
        #[arg(long)]
        include_background: bool,
    },
    /// Evaluate predicted labels against ground truth.
    Eval {
        #[arg(long)]
        pred_manifest: PathBuf,
        #[arg(long)]
        gt_manifest: PathBuf,
        /// Comma-separated class names.
        #[arg(long, default_value = "bus_stop,diagonal_stripes,warning_triangle,zigzag")]
        classes: String,
        #[arg(long)]
        out: PathBuf,
        /// Table output; defaults to the report path with a .csv extension.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// per_image or pooled.
        #[arg(long, default_value = "per_image")]
        averaging: String,
        #[arg(long, default_value_t = 255)]
        ignore_id: u8,
        #[arg(long)]
        palette: Option<PathBuf>,
    },
    /// Paste synthesized road surface into an original image.
    Composite {
        #[arg(long)]
        original: PathBuf,
        #[arg(long)]
        synth: PathBuf,
        #[arg(long)]
        label: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        feather: u32,
        /// Scene-class config JSON (road, marking and ignore ids).
        #[arg(long)]
        scene: Option<PathBuf>,
    },
    /// Print the palette with template parameters as JSON.
    Describe {
        #[arg(long)]
        palette: Option<PathBuf>,
        #[arg(long)]
        class: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render labels through the palette colour table.
    Preview {
        /// A single label PNG.
        #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
        label: Option<PathBuf>,
        /// A label manifest; `--out` is then a directory.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        palette: Option<PathBuf>,
    },
    /// Print a shipped JSON schema, or list their names.
    Schema {
        name: Option<String>,
    },
    /// Evaluate the synthesis loss combinators on random feature pyramids.
    SynthlossDemo {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
pub struct GenerateArgs {
    /// Manifest of source labels (JSONL).
    #[arg(long)]
    sources: Option<PathBuf>,
    /// Calibration JSON used for entries without their own.
    #[arg(long)]
    calib: Option<PathBuf>,
    /// Randomization config JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run config JSON bundling the other settings.
    #[arg(long)]
    run_config: Option<PathBuf>,
    #[arg(long)]
    palette: Option<PathBuf>,
    /// Target classes, comma-separated or repeated.
    #[arg(long = "class", value_delimiter = ',')]
    classes: Vec<String>,
    /// Labels per target class.
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Also write colour renderings.
    #[arg(long)]
    preview: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => commands::generate(args),
        Command::Stats { manifest, out, palette } => commands::stats(&manifest, &out, palette.as_deref()),
        Command::Weights {
            stats,
            scheme,
            out,
            palette,
            include_background,
        } => commands::weights(&stats, &scheme, &out, palette.as_deref(), include_background),
        Command::Eval {
            pred_manifest,
            gt_manifest,
            classes,
            out,
            csv,
            averaging,
            ignore_id,
            palette,
        } => commands::eval(commands::EvalArgs {
            pred_manifest,
            gt_manifest,
            classes,
            out,
            csv,
            averaging,
            ignore_id,
            palette,
        }),
        Command::Composite {
            original,
            synth,
            label,
            out,
            feather,
            scene,
        } => commands::composite(&original, &synth, &label, &out, feather, scene.as_deref()),
        Command::Describe { palette, class, out } => commands::describe(palette.as_deref(), class.as_deref(), out.as_deref()),
        Command::Preview {
            label,
            manifest,
            out,
            palette,
        } => commands::preview(label.as_deref(), manifest.as_deref(), &out, palette.as_deref()),
        Command::Schema { name } => commands::print_schema(name.as_deref()),
        Command::SynthlossDemo { seed, out } => commands::synthloss_demo(seed, out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            let line = serde_json::json!({ "message": f.message, "exit_code": f.code });
            eprintln!("error: {}", f.message);
            eprintln!("{line}");
            ExitCode::from(f.code)
        }
    }
}
