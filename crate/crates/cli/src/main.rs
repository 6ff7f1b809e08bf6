//! `explain`: finds several minimal pixel sets that each reproduce a
//! classifier's label on a PPM image, and writes them out as PBM masks next to
//! a saliency heatmap and a JSON report.

mod report;
mod synthetic;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use explain_core::classifier::make_external_classifier;
use explain_core::floodlight::SearchParams;
use explain_core::imaging::pnm::{decode_ppm, encode_pbm, encode_ppm};
use explain_core::oracle::{enumerate_exact_explanations, exact_responsibility, uniform_cells, CellGrid};
use explain_core::partition::PartitionKind;
use explain_core::responsibility::{default_min_side, RefinementContext};
use explain_core::{rex, ClassifierHandle, Image, MaskingColour, Mode, PartitionStrategy, Rational, RexConfig};
use serde::Serialize;

use report::{mask_file_name, RunReport};

#[derive(Debug, Parser)]
#[command(name = "explain", version, about = "Multiple minimal explanations for black-box image classifiers")]
#[command(args_conflicts_with_subcommands = true, subcommand_negates_reqs = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exhaustive ground truth on a uniform cell grid (fixture generation).
    #[command(hide = true)]
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
struct Source {
    /// Classifier subprocess speaking the JSON-lines protocol.
    #[arg(long, value_name = "CMD", conflicts_with = "synthetic")]
    classifier_cmd: Option<String>,
    /// In-process classifier: constant:L, green-count:T, patch-or:X0,Y0,X1,Y1[;...],
    /// patch-threshold:K;X0,Y0,X1,Y1[;...].
    #[arg(long, value_name = "NAME:ARGS")]
    synthetic: Option<String>,
    /// Seconds to wait for each subprocess answer.
    #[arg(long, default_value_t = 30)]
    timeout_secs: u64,
}

impl Source {
    fn open(&self, image: &Image) -> Result<(ClassifierHandle, String)> {
        match (&self.classifier_cmd, &self.synthetic) {
            (Some(cmd), None) => {
                let handle = make_external_classifier(cmd, Duration::from_secs(self.timeout_secs))
                    .with_context(|| format!("starting classifier {cmd:?}"))?;
                Ok((handle, cmd.clone()))
            }
            (None, Some(spec)) => Ok((synthetic::build(spec, image)?, spec.clone())),
            _ => bail!("exactly one of --classifier-cmd or --synthetic is required"),
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Input image (binary PPM).
    #[arg(long, required = true)]
    input: Option<PathBuf>,
    /// Output directory; created if missing.
    #[arg(long, required = true)]
    out: Option<PathBuf>,
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ranking iterations.
    #[arg(long, default_value_t = 20)]
    iterations: usize,
    /// Floodlight searches.
    #[arg(long, default_value_t = 10)]
    floodlights: usize,
    #[arg(long, default_value_t = 10)]
    max_explanations: usize,
    /// Largest admissible Sørensen–Dice overlap between explanations.
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, value_name = "R,G,B", default_value = "234,234,234")]
    mask_colour: MaskingColour,
    #[arg(long, default_value = "grid", value_parser = ["grid", "diagonal"])]
    strategy: String,
    #[arg(long, default_value = "floodlight", value_parser = ["floodlight", "recursive"])]
    mode: String,
    /// Initial floodlight radius in pixels [default: min(width, height) / 8].
    #[arg(long)]
    radius: Option<f64>,
    /// Radius expansions per search step.
    #[arg(long)]
    expansions: Option<usize>,
    /// Radius multiplier per expansion.
    #[arg(long)]
    expansion_coeff: Option<f64>,
    /// Hill-climbing steps per search.
    #[arg(long)]
    steps: Option<usize>,
    /// Regions with a shorter side are not split [default: ⌈min(width, height) / 10⌉].
    #[arg(long)]
    min_side: Option<usize>,
    #[arg(long, default_value_t = 10)]
    max_depth: usize,
    /// What stays masked while sibling parts are scored.
    #[arg(long, default_value = "witness", value_parser = ["witness", "untouched"])]
    refinement_context: String,
    /// Worker threads [default: available parallelism]; outputs do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Record wall-clock per stage in the report (makes reports differ between runs).
    #[arg(long)]
    timings: bool,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    source: Source,
    /// Uniform grid of COLSxROWS cells, at most 20 in total.
    #[arg(long, value_name = "COLSxROWS", default_value = "2x2")]
    cells: String,
    #[arg(long, value_name = "R,G,B", default_value = "234,234,234")]
    mask_colour: MaskingColour,
}

fn read_image(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode_ppm(&bytes).with_context(|| format!("decoding {}", path.display()))
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn config_from(args: &RunArgs, width: usize, height: usize) -> Result<RexConfig> {
    let defaults = SearchParams::for_image(width, height);
    let search = SearchParams {
        steps: args.steps.unwrap_or(defaults.steps),
        expansions: args.expansions.unwrap_or(defaults.expansions),
        expansion_coeff: args.expansion_coeff.unwrap_or(defaults.expansion_coeff),
        radius: args.radius.unwrap_or(defaults.radius),
    };
    let kind: PartitionKind = args.strategy.parse().map_err(anyhow::Error::msg)?;
    let config = RexConfig {
        iterations: args.iterations,
        floodlights: args.floodlights,
        max_explanations: args.max_explanations,
        delta: args.delta,
        colour: args.mask_colour,
        strategy: PartitionStrategy {
            kind,
            ..PartitionStrategy::default()
        },
        // resolved here so the report echoes the values actually used
        search: Some(search),
        seed: args.seed,
        min_side: Some(args.min_side.unwrap_or_else(|| default_min_side(width, height))),
        max_depth: args.max_depth,
        context: args.refinement_context.parse::<RefinementContext>()?,
        mode: args.mode.parse::<Mode>()?,
        workers: args
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        ..RexConfig::default()
    };
    config.validate()?;
    Ok(config)
}

/// Exit status 0 with at least one explanation, 2 with none.
fn run(args: &RunArgs) -> Result<ExitCode> {
    let (Some(input), Some(out)) = (&args.input, &args.out) else {
        bail!("--input and --out are required");
    };
    let image = read_image(input)?;
    let (w, h) = image.dims();
    let config = config_from(args, w, h)?;
    let (classifier, description) = args.source.open(&image)?;
    log::info!("explaining {} ({w}x{h}) with {description}", input.display());

    let outcome = rex::<f64>(&image, &classifier, &config)?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write(out, "landscape.csv", outcome.landscape.to_csv().as_bytes())?;
    write(out, "landscape.ppm", &encode_ppm(&outcome.landscape.to_heatmap()))?;
    for (k, e) in outcome.explanations.iter().enumerate() {
        write(out, &mask_file_name(k), &encode_pbm(&e.pixels))?;
    }
    let report = RunReport::new(input, description, config, &outcome, args.timings);
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    write(out, "report.json", json.as_bytes())?;

    log::info!(
        "{} explanation(s), {} classifier calls",
        outcome.explanations.len(),
        outcome.budget.total
    );
    Ok(if outcome.explanations.is_empty() {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

#[derive(Serialize)]
struct OracleReport {
    label: i64,
    cells: usize,
    sperner_bound: u64,
    /// Cell indices of every minimal sufficient subset.
    explanations: Vec<Vec<usize>>,
    /// Exact responsibility of each cell, as a reduced fraction.
    responsibility: Vec<String>,
}

fn oracle(args: &OracleArgs) -> Result<ExitCode> {
    let image = read_image(&args.input)?;
    let (cols, rows) = args
        .cells
        .split_once('x')
        .and_then(|(c, r)| Some((c.parse::<usize>().ok()?, r.parse::<usize>().ok()?)))
        .with_context(|| format!("--cells must look like 4x4, got {:?}", args.cells))?;
    let (w, h) = image.dims();
    if cols == 0 || rows == 0 || cols > w || rows > h {
        bail!("a {cols}x{rows} grid does not fit a {w}x{h} image");
    }
    let (classifier, _) = args.source.open(&image)?;
    let label = classifier.classify(&image)?.label;
    let grid = CellGrid::new(uniform_cells(w, h, cols, rows), image, classifier, label)?;
    let n = grid.len();
    let explanations = enumerate_exact_explanations(&grid, args.mask_colour)?
        .into_iter()
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect())
        .collect();
    let responsibility = (0..n)
        .map(|i| exact_responsibility::<Rational>(&grid, i, args.mask_colour).map(|r| r.to_string()))
        .collect::<Result<_, _>>()?;
    let report = OracleReport {
        label,
        cells: n,
        sperner_bound: explain_core::oracle::sperner_bound(n),
        explanations,
        responsibility,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap's own usage status (2) is reserved for runs without explanations
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Some(Command::Oracle(args)) => oracle(args),
        None => run(&cli.run),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
