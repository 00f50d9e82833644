//! Command-line front door for the pipeline:
//!
//!   geolect simulate  — generate a synthetic corpus from a scenario config
//!   geolect compare   — ingest, select two token sets, bin, compare, render
//!   geolect render    — re-render a cached grid file to SVG
//!
//! `compare` stages every artifact and moves them into the output
//! directory only after the whole pipeline has succeeded, so a failed run
//! leaves no partial outputs. Re-running with identical inputs produces
//! byte-identical artifacts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};

use geolect::grid::{
    bin_counts, delta, read_grid, write_count_grid, Extent, GridFile, GridSpec,
};
use geolect::render::{render_angle_histogram, render_counts, render_delta, render_scatter, MapStyle};
use geolect::stats::{angle_histogram, format_report, frequency_comparison};
use geolect::synth::{generate, load_scenario};
use geolect::token::{load_token_sets, MatchConfig, TokenSet};
use geolect::{ingest_path, select, CorpusFilter, IngestReport};

/// Environment variable holding the default token-set config path.
const CONFIG_ENV: &str = "GEOLECT_CONFIG";

#[derive(Parser)]
#[command(name = "geolect", version, about = "Micro-scale geolocation analysis of language use")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare where two token sets are used: ingest, select, bin,
    /// compute divergence stats, and write maps, charts, and a report.
    Compare(CompareArgs),
    /// Generate a synthetic corpus from a scenario config.
    Simulate(SimulateArgs),
    /// Render a cached grid file to an SVG map.
    Render(RenderArgs),
}

#[derive(Args)]
struct CompareArgs {
    /// Input corpus file(s): newline-delimited records (repeatable).
    #[arg(long, required = true)]
    input: Vec<PathBuf>,

    /// Token-set config file; defaults to $GEOLECT_CONFIG.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Name of the target set in the config.
    #[arg(long)]
    target_set: String,

    /// Name of the reference set in the config.
    #[arg(long)]
    reference_set: String,

    /// Analysis extent as lonmin,lonmax,latmin,latmax.
    /// Defaults to the Buenos Aires (CABA) box.
    #[arg(long, value_parser = parse_extent, default_value = "-58.531725,-58.355148,-34.705446,-34.538162")]
    extent: Extent,

    /// Grid size as NxM (longitude x latitude bins).
    #[arg(long, value_parser = parse_grid_size, default_value = "200x200")]
    grid: (usize, usize),

    /// Language filter; pass an empty string to keep all languages.
    #[arg(long, default_value = "es")]
    lang: String,

    /// Keep only records at or after this RFC 3339 instant.
    #[arg(long)]
    since: Option<String>,

    /// Keep only records strictly before this RFC 3339 instant.
    #[arg(long)]
    until: Option<String>,

    /// Output directory for the artifacts.
    #[arg(long, default_value = "geolect-out")]
    out: PathBuf,

    /// Abort on the first malformed input line instead of counting it.
    #[arg(long)]
    strict: bool,

    /// Style override as key=value (repeatable). Keys: canvas_px,
    /// max_marker_px, alpha, color_pos, color_neg, color_mono, background.
    #[arg(long = "style", value_name = "KEY=VALUE")]
    style: Vec<String>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario config file.
    #[arg(long)]
    scenario: PathBuf,

    /// Corpus file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// Grid file produced by `compare` (counts or delta kind).
    #[arg(long)]
    grid: PathBuf,

    /// SVG file to write.
    #[arg(long)]
    out: PathBuf,

    /// Style override as key=value (repeatable).
    #[arg(long = "style", value_name = "KEY=VALUE")]
    style: Vec<String>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compare(args) => cmd_compare(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Render(args) => cmd_render(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

// --- flag parsing ----------------------------------------------------------

fn parse_extent(s: &str) -> Result<Extent, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err("expected lonmin,lonmax,latmin,latmax".into());
    }
    let vals: Result<Vec<f64>, _> = parts.iter().map(|p| p.trim().parse::<f64>()).collect();
    let v = vals.map_err(|e| e.to_string())?;
    Extent::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

fn parse_grid_size(s: &str) -> Result<(usize, usize), String> {
    let (n, m) = s.split_once(['x', 'X']).ok_or("expected NxM, e.g. 200x200")?;
    let n = n.trim().parse::<usize>().map_err(|e| e.to_string())?;
    let m = m.trim().parse::<usize>().map_err(|e| e.to_string())?;
    if n == 0 || m == 0 {
        return Err("grid sizes must be at least 1".into());
    }
    Ok((n, m))
}

fn parse_instant(s: &str) -> Result<DateTime<Utc>> {
    Ok(DateTime::parse_from_rfc3339(s)
        .with_context(|| format!("bad timestamp `{s}`"))?
        .with_timezone(&Utc))
}

fn build_style(overrides: &[String]) -> Result<MapStyle> {
    let mut style = MapStyle::default();
    for pair in overrides {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| anyhow!("style override `{pair}` is not KEY=VALUE"))?;
        match key {
            "canvas_px" => style.canvas_px = value.parse().context("canvas_px")?,
            "max_marker_px" => style.max_marker_px = value.parse().context("max_marker_px")?,
            "alpha" => style.alpha = value.parse().context("alpha")?,
            "color_pos" => style.color_pos = value.to_string(),
            "color_neg" => style.color_neg = value.to_string(),
            "color_mono" => style.color_mono = value.to_string(),
            "background" => style.background = Some(value.to_string()),
            other => bail!("unknown style key `{other}`"),
        }
    }
    style.validate()?;
    Ok(style)
}

/// Deterministic, filesystem-safe artifact stem for a set name.
fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '-' })
        .collect()
}

// --- compare ---------------------------------------------------------------

fn find_set<'a>(sets: &'a [TokenSet], name: &str) -> Result<&'a TokenSet> {
    sets.iter()
        .find(|s| s.name == name)
        .ok_or_else(|| anyhow!("no token set named `{name}` in the config"))
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    if args.target_set == args.reference_set {
        bail!("target and reference sets must differ");
    }
    let style = build_style(&args.style)?;
    let config_path = match args.config {
        Some(p) => p,
        None => PathBuf::from(
            std::env::var(CONFIG_ENV)
                .map_err(|_| anyhow!("pass --config or set ${CONFIG_ENV}"))?,
        ),
    };
    let sets = load_token_sets(&config_path)?;
    let target_set = find_set(&sets, &args.target_set)?;
    let reference_set = find_set(&sets, &args.reference_set)?;

    let (n, m) = args.grid;
    let spec = GridSpec::new(args.extent, n, m)?;
    let lang = if args.lang.is_empty() { None } else { Some(args.lang.clone()) };
    let time_range = match (&args.since, &args.until) {
        (None, None) => None,
        (since, until) => Some((
            since.as_deref().map(parse_instant).transpose()?.unwrap_or(DateTime::<Utc>::MIN_UTC),
            until.as_deref().map(parse_instant).transpose()?.unwrap_or(DateTime::<Utc>::MAX_UTC),
        )),
    };
    let filter = CorpusFilter::new(args.extent, lang, time_range)?;

    let mut corpus = Vec::new();
    let mut report = IngestReport::default();
    for path in &args.input {
        let (tweets, r) = ingest_path(path, &filter, args.strict)
            .with_context(|| format!("ingesting {}", path.display()))?;
        corpus.extend(tweets);
        report.accepted += r.accepted;
        report.rejected_parse += r.rejected_parse;
        report.rejected_filter += r.rejected_filter;
    }

    let cfg = MatchConfig::default();
    let target_tweets = select(&corpus, target_set, &cfg);
    let reference_tweets = select(&corpus, reference_set, &cfg);
    let target_grid = bin_counts(&target_tweets, &spec);
    let reference_grid = bin_counts(&reference_tweets, &spec);

    let stats = frequency_comparison(&target_grid, &reference_grid)?;
    let angles = angle_histogram(&target_grid, &reference_grid)?;
    let d = delta(&target_grid, &reference_grid)?;
    let report_text = format_report(&target_set.name, &reference_set.name, &spec, &stats, &angles);

    let t = sanitize(&target_set.name);
    let r = sanitize(&reference_set.name);
    let mut artifacts: Vec<(String, Vec<u8>)> = Vec::new();
    artifacts.push((format!("counts_{t}.svg"), render_counts(&target_grid, &style).into_bytes()));
    artifacts.push((format!("counts_{r}.svg"), render_counts(&reference_grid, &style).into_bytes()));
    let mut grid_bytes = Vec::new();
    write_count_grid(&mut grid_bytes, &target_grid)?;
    artifacts.push((format!("counts_{t}.grid"), grid_bytes));
    let mut grid_bytes = Vec::new();
    write_count_grid(&mut grid_bytes, &reference_grid)?;
    artifacts.push((format!("counts_{r}.grid"), grid_bytes));
    artifacts.push((format!("delta_{t}_vs_{r}.svg"), render_delta(&d, &style).into_bytes()));
    artifacts.push((format!("scatter_{t}_vs_{r}.svg"), render_scatter(&stats, &style).into_bytes()));
    artifacts.push((format!("angles_{t}_vs_{r}.svg"), render_angle_histogram(&angles, &style).into_bytes()));
    artifacts.push((format!("report_{t}_vs_{r}.txt"), report_text.into_bytes()));

    write_dir_atomically(&args.out, &artifacts)?;

    println!(
        "ingested {} records ({} parse failures, {} filtered out)",
        report.accepted, report.rejected_parse, report.rejected_filter
    );
    println!(
        "{}: {} records, {}: {} records, grid {}x{}",
        target_set.name,
        stats.n_target,
        reference_set.name,
        stats.n_reference,
        spec.n,
        spec.m
    );
    println!(
        "r = {:.4}, p = {:.3e}, slope = {:.4}, k_exact = {:.4}, angle std = {:.2} deg",
        stats.regression.pearson_r,
        stats.regression.p_value,
        stats.regression.slope,
        stats.k_exact,
        angles.std_deg
    );
    println!("wrote {} artifacts to {}", artifacts.len(), args.out.display());
    Ok(())
}

/// Stage files next to the destination, then move them in. If the
/// destination directory does not exist yet the staging directory is
/// renamed over in one step; otherwise files move one by one. Any
/// failure before the move phase removes the staging directory.
fn write_dir_atomically(out_dir: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
    let parent = out_dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent)?;
    let stem = out_dir.file_name().and_then(|s| s.to_str()).unwrap_or("out");
    let staging = parent.join(format!(".{stem}.tmp-{}", std::process::id()));

    let stage = || -> Result<()> {
        fs::create_dir_all(&staging)?;
        for (name, bytes) in files {
            fs::write(staging.join(name), bytes)?;
        }
        if !out_dir.exists() {
            fs::rename(&staging, out_dir)?;
        } else {
            for (name, _) in files {
                fs::rename(staging.join(name), out_dir.join(name))?;
            }
            fs::remove_dir(&staging)?;
        }
        Ok(())
    };
    stage().map_err(|e| {
        let _ = fs::remove_dir_all(&staging);
        e
    })
}

// --- simulate ----------------------------------------------------------------

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let scenario = load_scenario(&args.scenario)?;
    let tweets = generate(&scenario)?;

    let mut target_hits = 0u64;
    let mut reference_hits = 0u64;
    let cfg = MatchConfig::default();
    let target_set = TokenSet::new("target", vec![scenario.target_token.clone()])?;
    let reference_set = TokenSet::new("reference", vec![scenario.reference_token.clone()])?;
    let mut body = String::new();
    for t in &tweets {
        if geolect::matches(&t.text, &target_set, &cfg) {
            target_hits += 1;
        }
        if geolect::matches(&t.text, &reference_set, &cfg) {
            reference_hits += 1;
        }
        body.push_str(&t.to_record_line());
        body.push('\n');
    }

    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let tmp = args.out.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(body.as_bytes())?;
    }
    fs::rename(&tmp, &args.out)?;

    println!(
        "wrote {} records to {} (`{}` in {}, `{}` in {})",
        tweets.len(),
        args.out.display(),
        scenario.target_token,
        target_hits,
        scenario.reference_token,
        reference_hits
    );
    Ok(())
}

// --- render -------------------------------------------------------------------

fn cmd_render(args: RenderArgs) -> Result<()> {
    let style = build_style(&args.style)?;
    let file = fs::File::open(&args.grid)
        .with_context(|| format!("opening {}", args.grid.display()))?;
    let svg = match read_grid(std::io::BufReader::new(file))? {
        GridFile::Counts(grid) => render_counts(&grid, &style),
        GridFile::Delta(grid) => render_delta(&grid, &style),
    };
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let tmp = args.out.with_extension("tmp");
    fs::write(&tmp, svg)?;
    fs::rename(&tmp, &args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}
