//! `detkit` command-line front end.
//!
//! Exit codes: 0 on success, 1 on a domain error (bad input data, I/O), 2 on
//! a usage error (unknown subcommand, invalid flag value).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use detkit::blur::augment_directory;
use detkit::dataset::{compute_stats, load_annotation_dir, stats_to_report};
use detkit::detfile::{format_detections, read_detection_file};
use detkit::eval::{compare_runs, comparison_to_table};
use detkit::losses::parse_loss_terms;
use detkit::record::{collect_samples, pack, unpack, ArchiveTriple, Layout};
use detkit::{head_output_shape, nms, GaussianKernelSpec, NmsConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Table,
    JsonLines,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Verbosity {
    Quiet,
    #[default]
    Normal,
    Verbose,
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GlobalConfig {
    pub verbosity: Verbosity,
    /// Reserved for stochastic augmentations; no current subcommand draws
    /// random numbers.
    pub seed: Option<u64>,
    pub output_format: OutputFormat,
}

#[derive(Debug, Parser)]
#[command(name = "detkit", version, about = "Detection pipeline toolkit", arg_required_else_help = true)]
struct Cli {
    /// Output format for results
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,
    /// Suppress warnings
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// Print progress details
    #[arg(short, long, global = true)]
    verbose: bool,
    /// Random seed (reserved)
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-class statistics and imbalance ratio of VOC annotations
    Stats(StatsArgs),
    /// Gaussian-blur every PGM/PPM image of a directory tree
    Blur(BlurArgs),
    /// Pack images and annotations into .lst/.idx/.rec files
    Pack(PackArgs),
    /// Restore images and annotations from an archive
    Unpack(UnpackArgs),
    /// Top-k truncation and non-maximum suppression of a detection file
    Nms(NmsArgs),
    /// Compare mean confidence of two detection runs
    Eval(EvalArgs),
    /// Box, objectness and class loss of a term list
    Loss(LossArgs),
    /// Output shape of a detection head
    Shape(ShapeArgs),
}

#[derive(Debug, Args)]
struct StatsArgs {
    /// Directory of .xml annotation files
    #[arg(long)]
    annotations: PathBuf,
}

fn positive_sigma(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err("sigma must be > 0".into())
    }
}

#[derive(Debug, Args)]
struct BlurArgs {
    /// Gaussian standard deviation
    #[arg(long, default_value_t = 1.0, value_parser = positive_sigma, allow_negative_numbers = true)]
    sigma: f64,
    /// Kernel half-width; the kernel is (2r+1)x(2r+1)
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    radius: u32,
    /// Input directory
    #[arg(long = "in")]
    input: PathBuf,
    /// Output directory
    #[arg(long = "out")]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LayoutArg {
    Yolo,
    Voc,
}

#[derive(Debug, Args)]
struct PackArgs {
    /// Directory of images
    #[arg(long)]
    images: PathBuf,
    /// Directory of same-stem annotation files
    #[arg(long)]
    annotations: PathBuf,
    /// Output stem; writes <stem>.lst, <stem>.idx, <stem>.rec
    #[arg(long)]
    out: PathBuf,
    /// Annotation layout: yolo (.txt labels) or voc (.xml)
    #[arg(long, value_enum, default_value_t = LayoutArg::Yolo)]
    layout: LayoutArg,
}

#[derive(Debug, Args)]
struct UnpackArgs {
    /// Archive stem
    #[arg(long)]
    stem: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

fn unit_threshold(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err("thresh must be in (0,1]".into())
    }
}

#[derive(Debug, Args)]
struct NmsArgs {
    /// Detection file
    #[arg(long = "in")]
    input: PathBuf,
    /// IoU above which a lower-confidence box is suppressed
    #[arg(long, default_value_t = 0.45, value_parser = unit_threshold, allow_negative_numbers = true)]
    thresh: f64,
    /// Detections kept before suppression
    #[arg(long, default_value_t = 400, value_parser = clap::value_parser!(u64).range(1..))]
    topk: u64,
    /// Suppress across class labels
    #[arg(long)]
    class_agnostic: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Directory of baseline detection files
    #[arg(long)]
    baseline: PathBuf,
    /// Directory of improved detection files
    #[arg(long)]
    improved: PathBuf,
}

#[derive(Debug, Args)]
struct LossArgs {
    /// Term file: `box <8 coords>`, `obj <logit> <target>`, `cls <logit> <target>`
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Debug, Args)]
struct ShapeArgs {
    /// Grid size N
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    grid: u64,
    /// Number of classes M
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    classes: u64,
}

struct Ctx<'a> {
    cfg: GlobalConfig,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn warn(&mut self, msg: &str) -> Result<()> {
        if self.cfg.verbosity != Verbosity::Quiet {
            writeln!(self.err, "warning: {msg}")?;
        }
        Ok(())
    }

    fn info(&mut self, msg: &str) -> Result<()> {
        if self.cfg.verbosity == Verbosity::Verbose {
            writeln!(self.err, "{msg}")?;
        }
        Ok(())
    }

    fn json(&mut self, value: &impl serde::Serialize) -> Result<()> {
        writeln!(self.out, "{}", serde_json::to_string(value)?)?;
        Ok(())
    }

    fn table(&self) -> bool {
        self.cfg.output_format == OutputFormat::Table
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    2
                }
            };
        }
    };

    let cfg = GlobalConfig {
        verbosity: if cli.quiet {
            Verbosity::Quiet
        } else if cli.verbose {
            Verbosity::Verbose
        } else {
            Verbosity::Normal
        },
        seed: cli.seed,
        output_format: cli.format,
    };
    let mut ctx = Ctx { cfg, out, err };
    match dispatch(&cli.command, &mut ctx) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(ctx.err, "error: {}", error_chain(&e));
            1
        }
    }
}

/// Joins an error and its causes with `: `, skipping causes whose message
/// the outer errors already include.
fn error_chain(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if msg.contains(&text) {
            continue;
        }
        if !msg.is_empty() {
            msg.push_str(": ");
        }
        msg.push_str(&text);
    }
    msg
}

fn dispatch(command: &Command, ctx: &mut Ctx) -> Result<()> {
    match command {
        Command::Stats(a) => stats(a, ctx),
        Command::Blur(a) => blur(a, ctx),
        Command::Pack(a) => pack_cmd(a, ctx),
        Command::Unpack(a) => unpack_cmd(a, ctx),
        Command::Nms(a) => nms_cmd(a, ctx),
        Command::Eval(a) => eval(a, ctx),
        Command::Loss(a) => loss(a, ctx),
        Command::Shape(a) => shape(a, ctx),
    }
}

fn stats(a: &StatsArgs, ctx: &mut Ctx) -> Result<()> {
    let records = load_annotation_dir(&a.annotations)?;
    ctx.info(&format!("parsed {} annotation files", records.len()))?;
    let report = compute_stats(&records);
    if ctx.table() {
        write!(ctx.out, "{}", stats_to_report(&report))?;
    } else {
        for c in &report.per_class {
            ctx.json(c)?;
        }
        ctx.json(&json!({
            "majority": report.majority,
            "minority": report.minority,
            "imbalance_ratio": report.imbalance_ratio,
            "total_objects": report.total_objects(),
        }))?;
    }
    Ok(())
}

fn blur(a: &BlurArgs, ctx: &mut Ctx) -> Result<()> {
    let spec = GaussianKernelSpec::new(a.sigma, a.radius as usize)?;
    let report = augment_directory(&a.input, &a.output, &spec)?;
    for s in &report.skipped {
        ctx.warn(&format!("skipped {}: {}", s.path.display(), s.reason))?;
    }
    if ctx.table() {
        writeln!(
            ctx.out,
            "written {}  copied {}  skipped {}",
            report.written,
            report.copied,
            report.skipped.len()
        )?;
    } else {
        ctx.json(&report)?;
    }
    Ok(())
}

fn pack_cmd(a: &PackArgs, ctx: &mut Ctx) -> Result<()> {
    let layout = match a.layout {
        LayoutArg::Yolo => Layout::Yolo,
        LayoutArg::Voc => Layout::Voc,
    };
    let entries = collect_samples(&a.images, &a.annotations, layout)?;
    let triple = pack(&entries, &a.out)?;
    if ctx.table() {
        writeln!(ctx.out, "packed {} records", entries.len())?;
        for p in [&triple.lst_path, &triple.idx_path, &triple.rec_path] {
            writeln!(ctx.out, "{}", p.display())?;
        }
    } else {
        ctx.json(&json!({
            "records": entries.len(),
            "lst": triple.lst_path,
            "idx": triple.idx_path,
            "rec": triple.rec_path,
        }))?;
    }
    Ok(())
}

fn unpack_cmd(a: &UnpackArgs, ctx: &mut Ctx) -> Result<()> {
    let triple = ArchiveTriple::from_stem(&a.stem);
    let n = unpack(&triple, &a.out)?;
    if ctx.table() {
        writeln!(ctx.out, "restored {n} records")?;
    } else {
        ctx.json(&json!({ "records": n }))?;
    }
    Ok(())
}

fn nms_cmd(a: &NmsArgs, ctx: &mut Ctx) -> Result<()> {
    let file = read_detection_file::<f64>(&a.input)?;
    let cfg = NmsConfig::new(a.thresh, a.topk as usize)?.class_agnostic(a.class_agnostic);
    let kept = nms(&file.detections, &cfg);
    ctx.info(&format!("kept {} of {} detections", kept.len(), file.detections.len()))?;
    if ctx.table() {
        write!(ctx.out, "{}", format_detections(&kept)?)?;
    } else {
        for d in &kept {
            ctx.json(d)?;
        }
    }
    Ok(())
}

fn eval(a: &EvalArgs, ctx: &mut Ctx) -> Result<()> {
    let report = compare_runs(&a.baseline, &a.improved)?;
    for id in &report.unmatched {
        ctx.warn(&format!("unmatched image {id}"))?;
    }
    if ctx.table() {
        write!(ctx.out, "{}", comparison_to_table(&report))?;
    } else {
        for row in &report.per_image {
            ctx.json(row)?;
        }
        ctx.json(&json!({
            "global_baseline_mean": report.global_baseline_mean,
            "global_improved_mean": report.global_improved_mean,
            "global_delta": report.global_delta,
            "matched_pairs": report.matched_pairs,
            "unmatched": report.unmatched,
        }))?;
    }
    Ok(())
}

fn loss(a: &LossArgs, ctx: &mut Ctx) -> Result<()> {
    let text = fs::read_to_string(&a.input).with_context(|| a.input.display().to_string())?;
    let terms = parse_loss_terms::<f64>(&text).with_context(|| a.input.display().to_string())?;
    let b = terms.compose()?;
    if ctx.table() {
        for (name, v) in [("l_box", b.l_box), ("l_obj", b.l_obj), ("l_cls", b.l_cls), ("total", b.total)] {
            writeln!(ctx.out, "{name:<6} {v:.6}")?;
        }
    } else {
        ctx.json(&b)?;
    }
    Ok(())
}

fn shape(a: &ShapeArgs, ctx: &mut Ctx) -> Result<()> {
    let s = head_output_shape(a.grid as usize, a.classes as usize)?;
    if ctx.table() {
        writeln!(ctx.out, "{} {} {}", s.grid_n, s.grid_n, s.channels)?;
    } else {
        ctx.json(&s)?;
    }
    Ok(())
}
