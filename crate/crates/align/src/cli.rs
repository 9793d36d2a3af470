//! Command-line surface. Exit codes: 0 success, 2 usage, 3 bad or missing
//! input data, 4 internal fault. Results go to stdout, diagnostics to stderr.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use salience_core::emphasis::{class_emphasis_diff, emergent_feature_map};
use salience_core::lrp::{lrp, Rule};
use salience_core::metrics::{cosine_similarity, spearman};
use salience_core::spectral::{spectral_residual, SpectralParams};
use salience_core::Heatmap;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::fixtures::{generate_fixtures, FixtureSpec};
use crate::model_io::load_model;
use crate::pgm::{load_grayscale, load_image, save_grayscale};
use crate::pipeline::{methods_in_log, run_pipeline, summarise};
use crate::records::{load_detections, load_scores};
use crate::report::{render_stats, write_report};

/// Worker-count override; 0 or unset means one worker per core.
pub const THREADS_ENV: &str = "SALIENCE_ALIGN_THREADS";

pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "salience-align",
    version,
    about = "Compare explanation heatmaps with human gaze maps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Epsilon,
    Z,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectral-residual saliency map of an image (PGM or PPM) written as PGM
    Saliency {
        #[arg(long = "in", value_name = "IMAGE")]
        input: PathBuf,
        #[arg(long, value_name = "MAP")]
        out: PathBuf,
        /// Side of the square working grid (power of two)
        #[arg(long, default_value_t = 64)]
        size: usize,
        /// Side of the log-spectrum averaging filter (odd)
        #[arg(long, default_value_t = 3)]
        avg_kernel: usize,
        /// Gaussian blur sigma on the working grid
        #[arg(long, default_value_t = 2.5)]
        sigma: f64,
    },
    /// Relevance heatmap of an image under a model, written as PGM
    Lrp {
        /// Model manifest (TOML); weights default to the sibling .bin file
        #[arg(long, value_name = "MANIFEST")]
        model: PathBuf,
        #[arg(long = "in", value_name = "IMAGE")]
        input: PathBuf,
        /// Comma-separated output mask, one entry per model output [default: all ones]
        #[arg(long, value_delimiter = ',', value_name = "W1,W2,...")]
        mask: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value_t = RuleArg::Epsilon)]
        rule: RuleArg,
        /// Stabiliser for the epsilon rule
        #[arg(long, default_value_t = 1e-7)]
        epsilon: f64,
        #[arg(long, value_name = "MAP")]
        out: PathBuf,
    },
    /// Cosine similarity and Spearman correlation of two maps.
    /// Prints `cosine<TAB>value` then `spearman<TAB>value`
    Compare {
        #[arg(long, value_name = "MAP")]
        a: PathBuf,
        #[arg(long, value_name = "MAP")]
        b: PathBuf,
    },
    /// Per-class mean emphasis difference (A minus B).
    /// Maps are `<frame_id>.pgm` files; prints `rank<TAB>class<TAB>mean_diff<TAB>n`
    Emphasis {
        #[arg(long, value_name = "DIR")]
        a: PathBuf,
        #[arg(long, value_name = "DIR")]
        b: PathBuf,
        /// Detections CSV: frame_id,class_name,confidence,x,y,w,h
        #[arg(long, value_name = "FILE")]
        det: PathBuf,
        #[arg(long, default_value_t = salience_core::emphasis::DEFAULT_MIN_CONFIDENCE)]
        min_confidence: f64,
    },
    /// Emergent-feature map: where the driving map emphasises more than the imagenet map
    Subtract {
        #[arg(long, value_name = "MAP")]
        driving: PathBuf,
        #[arg(long, value_name = "MAP")]
        imagenet: PathBuf,
        #[arg(long, value_name = "MAP")]
        out: PathBuf,
    },
    /// Medians, ratios, ANOVA and Mann-Whitney tests for a score log.
    /// Prints tab-separated `median`, `mannwhitney` and `anova` records
    Stats {
        /// Score log CSV: frame_id,method,cosine,spearman,attention
        #[arg(long, value_name = "FILE")]
        scores: PathBuf,
    },
    /// Generate a seeded synthetic dataset with models and a runnable fixture.cfg
    Fixtures {
        /// Fixture parameters (TOML) [default: built-in standard fixture]
        #[arg(long, value_name = "FILE")]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Run the full pipeline described by a config file
    Run {
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        /// Worker count; overrides SALIENCE_ALIGN_THREADS (0 = one per core)
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the text report from a finished run's output directory
    Report {
        #[arg(long, value_name = "DIR")]
        dir: PathBuf,
    },
}

fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if v.trim().is_empty() => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV}={v:?} is not a worker count"))),
        Err(_) => Ok(0),
    }
}

/// Every `<stem>.pgm` in a directory, keyed by stem.
fn load_map_dir(dir: &Path) -> Result<BTreeMap<String, Heatmap>> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("pgm") {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
        out.insert(stem.to_string(), load_grayscale(&path)?);
    }
    Ok(out)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Saliency { input, out, size, avg_kernel, sigma } => {
            let params = SpectralParams { internal_size: size, avg_kernel, blur_sigma: sigma };
            let map = spectral_residual(&load_image(&input)?, &params)?;
            save_grayscale(&map, &out)
        }
        Command::Lrp { model, input, mask, rule, epsilon, out } => {
            let model = load_model(&model)?;
            let image = load_image(&input)?;
            let mask = mask.unwrap_or_else(|| vec![1.0; model.output_len()]);
            let rule = match rule {
                RuleArg::Epsilon => Rule::Epsilon(epsilon),
                RuleArg::Z => Rule::Z,
            };
            let relevance = lrp(&model, &image, &mask, rule)?;
            save_grayscale(&relevance.input_heatmap, &out)
        }
        Command::Compare { a, b } => {
            let (a, b) = (load_grayscale(&a)?, load_grayscale(&b)?);
            let c = cosine_similarity(&a, &b)?;
            let s = spearman(&a, &b)?;
            println!("cosine\t{c:?}\nspearman\t{s:?}");
            Ok(())
        }
        Command::Emphasis { a, b, det, min_confidence } => {
            let (maps_a, maps_b) = (load_map_dir(&a)?, load_map_dir(&b)?);
            let detections = load_detections(&det)?;
            let report = class_emphasis_diff(&maps_a, &maps_b, &detections, min_confidence)?;
            for (i, c) in report.classes.iter().enumerate() {
                println!("{}\t{}\t{:?}\t{}", i + 1, c.class_name, c.mean_diff, c.n_observations);
            }
            let s = report.skips;
            eprintln!(
                "skipped {} low-confidence detections, {} empty boxes, {} zero-mass frames",
                s.low_confidence, s.empty_box, s.zero_mass_frames
            );
            Ok(())
        }
        Command::Subtract { driving, imagenet, out } => {
            let map = emergent_feature_map(&load_grayscale(&driving)?, &load_grayscale(&imagenet)?)?;
            save_grayscale(&map, &out)
        }
        Command::Stats { scores } => {
            let rows = load_scores(&scores)?;
            let (summaries, anova) = summarise(&rows, &methods_in_log(&rows));
            print!("{}", render_stats(&summaries, &anova));
            Ok(())
        }
        Command::Fixtures { spec, seed, out } => {
            let spec = match spec {
                Some(p) => FixtureSpec::load(p)?,
                None => FixtureSpec::default(),
            };
            let summary = generate_fixtures(&spec, seed, &out)?;
            println!("frames\t{}", summary.frames);
            println!("attentive\t{}", summary.attentive);
            println!("config\t{}", summary.config.display());
            Ok(())
        }
        Command::Run { config, threads } => {
            let config = PipelineConfig::load(&config)?;
            let threads = match threads {
                Some(t) => t,
                None => threads_from_env()?,
            };
            let output = run_pipeline(&config, threads)?;
            write_report(&output, &config.output_dir)?;
            for n in &output.notes {
                eprintln!("note: {n}");
            }
            if !output.skipped.is_empty() {
                eprintln!("skipped {} of {} frames (see skipped.csv)", output.skipped.len(), output.n_filtered);
            }
            println!("report\t{}", config.output_dir.join("report.txt").display());
            Ok(())
        }
        Command::Report { dir } => {
            let path = dir.join("report.txt");
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            print!("{text}");
            Ok(())
        }
    }
}

/// Parses `args` (including the program name) and runs the command; returns the exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
