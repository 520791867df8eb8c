use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use jsp_core::container::{export_csv, load_container, save_container, Payload};
use jsp_core::franson::{synthesize_interferograms, NoiseModel};
use jsp_core::harness::{
    aligned_phase, binary_test_image, evaluate, logo_truth, logo_truth_from_path, run_logo_demo, run_sweep,
    LogoSpec, SchedulePreset, SweepSpec, LOGO_RMSE_THRESHOLD, LOGO_SCALE_RAD,
};
use jsp_core::mice::reconstruct;
use jsp_core::render::{render_curve_svg, render_heatmap, render_panels, PaletteSpec};
use jsp_core::sideband::{carrier_frequency_check, extract_ac_set};
use jsp_core::{Error, InitialGuess, ReconstructionConfig, Result, SidebandFilter, StateSpec};
use ndarray::Array2;
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Shears {
    #[value(name = "8x8")]
    S8,
    #[value(name = "32x32")]
    S32,
}

impl From<Shears> for SchedulePreset {
    fn from(s: Shears) -> Self {
        match s {
            Shears::S8 => SchedulePreset::Shears8x8,
            Shears::S32 => SchedulePreset::Shears32x32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImageKind {
    Png,
    Svg,
}

impl ImageKind {
    fn ext(self) -> &'static str {
        match self {
            ImageKind::Png => "png",
            ImageKind::Svg => "svg",
        }
    }
}

/// Simulate multi-shear interferograms of a biphoton state and reconstruct its joint spectral phase.
#[derive(Debug, Parser)]
#[command(name = "jsp", version)]
pub struct Cli {
    /// Base seed for noise and random initial guesses.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// Directory that receives every output file.
    #[arg(long, global = true, default_value = ".")]
    pub output_dir: PathBuf,
    /// Format of tabular outputs; `csv` also exports containers as CSV.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    /// Disable shot noise and accidental coincidences.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// State spec -> ground-truth container.
    Generate(GenerateArgs),
    /// State + schedule + noise -> interferogram container.
    Simulate(SimulateArgs),
    /// Interferograms -> AC container.
    Extract(ExtractArgs),
    /// AC container -> reconstruction container.
    Reconstruct(ReconstructArgs),
    /// Monte-Carlo sweep over peak counts.
    Sweep(SweepArgs),
    /// Image-derived phase demonstration.
    Logo(LogoArgs),
    /// Container -> heatmaps.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct StateArg {
    /// State spec JSON; the built-in default state when omitted.
    #[arg(long)]
    pub state: Option<PathBuf>,
}

impl StateArg {
    fn load(&self) -> Result<StateSpec> {
        match &self.state {
            Some(p) => StateSpec::load(p),
            None => Ok(StateSpec::default()),
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub state: StateArg,
    #[arg(long, default_value = "truth.mjsi")]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub state: StateArg,
    #[arg(long, value_enum, default_value_t = Shears::S8)]
    pub shears: Shears,
    /// Expected coincidences at the brightest pixel of the set.
    #[arg(long, default_value_t = 5000.0)]
    pub n_max: f64,
    #[arg(long, default_value = "interferograms.mjsi")]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Interferogram container.
    #[arg(long)]
    pub input: PathBuf,
    /// Sideband window radius in Fourier bins.
    #[arg(long, default_value_t = SidebandFilter::DEFAULT_RADIUS)]
    pub radius: f64,
    /// Keep the delay carrier on the AC maps.
    #[arg(long)]
    pub keep_carrier: bool,
    #[arg(long, default_value = "ac.mjsi")]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// AC container.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub mask_epsilon: f64,
    /// Start from a random phase instead of a flat field (uses --seed).
    #[arg(long)]
    pub random_init: bool,
    /// Ground-truth container to score the retrieved phase against.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value = "result.mjsi")]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep spec JSON; defaults apply to missing fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[command(flatten)]
    pub state: StateArg,
}

#[derive(Debug, Args)]
pub struct LogoArgs {
    /// Grayscale image used as phase; a built-in binary pattern when omitted.
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Phase in radians at full image brightness.
    #[arg(long, default_value_t = LOGO_SCALE_RAD)]
    pub scale: f64,
    #[arg(long, value_enum, default_value_t = Shears::S32)]
    pub shears: Shears,
    #[arg(long, default_value_t = 5000.0)]
    pub n_max: f64,
    #[command(flatten)]
    pub state: StateArg,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Any container written by this tool.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ImageKind::Png)]
    pub image: ImageKind,
    /// Prefix of the written files; the input file stem when omitted.
    #[arg(long)]
    pub prefix: Option<String>,
}

pub fn run(cli: &Cli) -> Result<()> {
    fs::create_dir_all(&cli.output_dir)?;
    match &cli.command {
        Command::Generate(a) => generate(cli, a),
        Command::Simulate(a) => simulate(cli, a),
        Command::Extract(a) => extract(cli, a),
        Command::Reconstruct(a) => reconstruct_cmd(cli, a),
        Command::Sweep(a) => sweep(cli, a),
        Command::Logo(a) => logo(cli, a),
        Command::Render(a) => render(cli, a),
    }
}

fn out_path(cli: &Cli, name: &str) -> PathBuf {
    cli.output_dir.join(name)
}

fn stem(name: &str) -> String {
    Path::new(name).file_stem().and_then(|s| s.to_str()).unwrap_or("out").to_string()
}

/// Writes the container and, with `--format csv`, its CSV export.
fn persist(cli: &Cli, payload: &Payload, name: &str) -> Result<PathBuf> {
    let path = out_path(cli, name);
    save_container(&path, payload)?;
    if cli.format == OutputFormat::Csv {
        export_csv(payload, &cli.output_dir, &stem(name))?;
    }
    Ok(path)
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn noise_model(cli: &Cli, n_max: f64) -> NoiseModel {
    if cli.deterministic {
        NoiseModel::deterministic(n_max)
    } else {
        NoiseModel::new(n_max)
    }
}

fn generate(cli: &Cli, a: &GenerateArgs) -> Result<()> {
    let truth = a.state.load()?.build()?;
    let path = persist(cli, &Payload::GroundTruth(truth.clone()), &a.out)?;
    print_json(&json!({ "output": path, "grid": truth.grid }))
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    let truth = a.state.load()?.build()?;
    let schedule = SchedulePreset::from(a.shears).schedule();
    for w in schedule.validate(&truth.grid)? {
        log::warn!("{w}");
    }
    let noise = noise_model(cli, a.n_max);
    let seed = cli.seed.unwrap_or(0);
    let set = synthesize_interferograms(&truth.e1, &truth.e2, &schedule, &noise, seed)?;
    let max = set.max_count();
    let path = persist(cli, &Payload::Interferograms(set), &a.out)?;
    print_json(&json!({
        "output": path,
        "pairs": schedule.num_pairs(),
        "max_count": max,
        "accidental_mean": noise.accidental_mean(),
        "seed": seed,
    }))
}

fn extract(cli: &Cli, a: &ExtractArgs) -> Result<()> {
    let set = load_container(&a.input)?.into_interferograms()?;
    let filter = SidebandFilter::new(set.schedule.tau, a.radius, SidebandFilter::DEFAULT_ORDER);
    let report = carrier_frequency_check(&set.schedule, &filter, &set.grid);
    let ac = extract_ac_set(&set, &filter, !a.keep_carrier)?;
    let path = persist(cli, &Payload::Ac(ac), &a.out)?;
    print_json(&json!({ "output": path, "carrier_check": report }))
}

fn reconstruct_cmd(cli: &Cli, a: &ReconstructArgs) -> Result<()> {
    let ac = load_container(&a.input)?.into_ac()?;
    let initial_guess = if a.random_init {
        InitialGuess::RandomPhase { seed: cli.seed.unwrap_or(0) }
    } else {
        InitialGuess::Flat
    };
    let config = ReconstructionConfig {
        iterations: a.iterations,
        mask_epsilon: a.mask_epsilon,
        initial_guess,
        ..ReconstructionConfig::default()
    };
    let result = reconstruct(&ac, &config)?;
    let mut summary = json!({
        "final_error": result.final_error(),
        "iterations": result.iterations(),
    });
    if let Some(t) = &a.truth {
        let truth = load_container(t)?.into_ground_truth()?;
        if truth.grid != ac.grid {
            return Err(Error::GridMismatch);
        }
        summary["comparison"] = serde_json::to_value(evaluate(&truth, &result)?)?;
    }
    let path = persist(cli, &Payload::Reconstruction(result), &a.out)?;
    summary["output"] = json!(path);
    fs::write(out_path(cli, &format!("{}.json", stem(&a.out))), serde_json::to_string_pretty(&summary)?)?;
    print_json(&summary)
}

fn sweep(cli: &Cli, a: &SweepArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => serde_json::from_str::<SweepSpec>(&fs::read_to_string(p)?)?,
        None => SweepSpec::default(),
    };
    if let Some(seed) = cli.seed {
        spec.base_seed = seed;
    }
    spec.deterministic |= cli.deterministic;
    let state = a.state.load()?;
    let report = run_sweep(&spec, &state, cli.workers)?;
    let json_path = out_path(cli, "sweep_report.json");
    fs::write(&json_path, report.to_json()?)?;
    let csv_path = out_path(cli, "sweep_records.csv");
    fs::write(&csv_path, report.to_csv())?;
    let curve_path = out_path(cli, "rmse_vs_nmax.svg");
    render_curve_svg(&report.curve(), &curve_path, "Weighted phase RMSE vs peak counts")?;
    match cli.format {
        OutputFormat::Json => {
            let cells: Vec<_> = report
                .cells
                .iter()
                .map(|c| json!({ "n_max": c.n_max, "mean_rmse_rad": c.mean_rmse_rad, "std_rmse_rad": c.std_rmse_rad,
                                 "failures": c.failures.len() }))
                .collect();
            print_json(&json!({ "report": json_path, "records": csv_path, "curve": curve_path, "cells": cells }))
        }
        OutputFormat::Csv => {
            println!("n_max,mean_rmse_rad,std_rmse_rad,failures");
            for c in &report.cells {
                let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                println!("{},{},{},{}", c.n_max, f(c.mean_rmse_rad), f(c.std_rmse_rad), c.failures.len());
            }
            Ok(())
        }
    }
}

fn logo(cli: &Cli, a: &LogoArgs) -> Result<()> {
    let state = a.state.load()?;
    let truth = match &a.image {
        Some(p) => logo_truth_from_path(&state, p, a.scale)?,
        None => {
            let n = state.grid.n as u32;
            logo_truth(&state, &binary_test_image(n), a.scale)?
        }
    };
    let spec = LogoSpec {
        schedule: a.shears.into(),
        n_max: a.n_max,
        seed: cli.seed.unwrap_or(0),
        deterministic: cli.deterministic,
        ..LogoSpec::default()
    };
    let out = run_logo_demo(&truth, &spec)?;
    persist(cli, &Payload::GroundTruth(truth.clone()), "logo_truth.mjsi")?;
    persist(cli, &Payload::Reconstruction(out.result.clone()), "logo_result.mjsi")?;
    let retrieved = aligned_phase(&out.result, &out.comparison);
    let truth_wrapped = truth.phase.mapv(|p| jsp_core::metrics::wrap_phase(p).unwrap_or(0.0));
    let panels = [
        (&truth_wrapped, None, "true phase"),
        (&retrieved, Some(&out.result.mask_e1), "retrieved phase"),
    ];
    let png = out_path(cli, "logo_phase.png");
    let svg = out_path(cli, "logo_phase.svg");
    render_panels(&panels, &truth.grid, &png, &PaletteSpec::phase())?;
    render_panels(&panels, &truth.grid, &svg, &PaletteSpec::phase())?;
    let summary = json!({
        "spec": spec,
        "scale_rad": a.scale,
        "comparison": out.comparison,
        "threshold_rad": LOGO_RMSE_THRESHOLD,
        "final_error": out.result.final_error(),
        "renders": [png, svg],
    });
    fs::write(out_path(cli, "logo_summary.json"), serde_json::to_string_pretty(&summary)?)?;
    print_json(&summary)
}

fn render(cli: &Cli, a: &RenderArgs) -> Result<()> {
    let payload = load_container(&a.input)?;
    let prefix = a.prefix.clone().unwrap_or_else(|| stem(&a.input.to_string_lossy()));
    let grid = payload.grid();
    let ext = a.image.ext();
    let mut written = Vec::new();
    let mut draw = |name: String, map: &Array2<f64>, mask: Option<&Array2<bool>>, spec: PaletteSpec| -> Result<()> {
        let path = out_path(cli, &format!("{prefix}_{name}.{ext}"));
        render_heatmap(map, mask, &grid, &path, &spec, &name)?;
        written.push(path);
        Ok(())
    };
    match &payload {
        Payload::GroundTruth(t) => {
            draw("amplitude".into(), &t.amplitude, None, PaletteSpec::linear())?;
            draw("phase".into(), &t.phase, None, PaletteSpec::phase())?;
        }
        Payload::Interferograms(s) => {
            let max = s.max_count() as f64;
            for ((k, l), c) in s.schedule.pairs().zip(&s.counts) {
                draw(format!("counts_k{k}_l{l}"), &c.mapv(f64::from), None, PaletteSpec::linear_range(0.0, max.max(1.0)))?;
            }
        }
        Payload::Ac(ac) => {
            for ((k, l), m) in ac.schedule.pairs().zip(&ac.ac) {
                draw(format!("ac_amplitude_k{k}_l{l}"), &m.mapv(|z| z.norm()), None, PaletteSpec::linear())?;
                draw(format!("ac_phase_k{k}_l{l}"), &m.mapv(|z| z.arg()), None, PaletteSpec::phase())?;
            }
        }
        Payload::Reconstruction(r) => {
            draw("e1_amplitude".into(), &r.e1.amplitude(), Some(&r.mask_e1), PaletteSpec::linear())?;
            draw("e1_phase".into(), &r.e1.phase(), Some(&r.mask_e1), PaletteSpec::phase())?;
            draw("e2_amplitude".into(), &r.e2.amplitude(), Some(&r.mask_e2), PaletteSpec::linear())?;
            draw("e2_phase".into(), &r.e2.phase(), Some(&r.mask_e2), PaletteSpec::phase())?;
        }
    }
    if cli.format == OutputFormat::Csv {
        written.extend(export_csv(&payload, &cli.output_dir, &prefix)?);
    }
    print_json(&json!({ "written": written }))
}
