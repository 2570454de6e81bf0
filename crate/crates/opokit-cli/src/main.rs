//! Command-line front end: plot-ready CSV tables and fit reports for the
//! ring-squeezer toolkit. Every run is deterministic given its inputs and
//! seed; rerunning a command reproduces the output byte for byte.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use opokit::cavity;
use opokit::config::{parse_with_overrides, LayoutFile, ParamsFile};
use opokit::error::{Error, ErrorClass, Result};
use opokit::fit::{estimate_threshold, fit_spectrum, ModelParam};
use opokit::homodyne::generate_trace;
use opokit::io::{self, fmt};
use opokit::ray::TransversePlane;
use opokit::squeezing::{optimal_squeezing, predicted_spectrum, pump_sweep};
use opokit::{DetectionChain, SqueezingModel};

#[derive(Parser)]
#[command(
    name = "opokit",
    version,
    about = "Ring-cavity squeezed-light toolkit: geometry, spectra, simulation, fits"
)]
struct Cli {
    /// TOML config: a cavity layout for `cavity`, squeezer parameters otherwise.
    #[arg(short, long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Write the output here instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Seed for the stochastic subcommands.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Override a config entry by dotted path, e.g. --set opo.pump_mW=150.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Ring geometry: waist scans, circular-waist solve, eigenmode report.
    Cavity(CavityArgs),
    /// Predicted squeezing / anti-squeezing spectra.
    Spectrum(SpectrumArgs),
    /// Squeezing and anti-squeezing vs pump power at a fixed probe frequency.
    PumpSweep(PumpSweepArgs),
    /// Generate a homodyne record and analyze it against a shot-noise record.
    Simulate(SimulateArgs),
    /// Fit a spectrum CSV (model parameters) or a pump CSV (threshold).
    Fit(FitArgs),
}

#[derive(Args)]
struct CavityArgs {
    /// Waist scan over mirror spacings, millimetres.
    #[arg(long, value_name = "MIN:MAX:STEP", conflicts_with_all = ["solve_circular", "eigenmode"])]
    scan: Option<String>,

    /// Solve for the spacing where the two axis waists coincide.
    #[arg(long, conflicts_with = "eigenmode")]
    solve_circular: bool,

    /// Search bracket for --solve-circular, millimetres.
    #[arg(long, value_name = "MIN:MAX", default_value = "20:24")]
    bracket: String,

    /// Eigenmode report at the configured (or overridden) spacing. Default
    /// action when no other mode is selected.
    #[arg(long)]
    eigenmode: bool,

    /// Mirror spacing override, millimetres.
    #[arg(long, value_name = "MM")]
    spacing: Option<f64>,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Lowest frequency, Hz.
    #[arg(long, default_value_t = 1e6)]
    fmin: f64,

    /// Highest frequency, Hz.
    #[arg(long, default_value_t = 200e6)]
    fmax: f64,

    /// Number of frequency points (inclusive linear grid).
    #[arg(long, default_value_t = 200)]
    points: usize,

    /// Comma-separated pump powers in mW; emits one curve pair per power.
    #[arg(long, value_name = "MW,MW,...")]
    pump_list: Option<String>,
}

#[derive(Args)]
struct PumpSweepArgs {
    /// Highest pump power, mW. Defaults to 99% of threshold; points at or
    /// above threshold are dropped with a warning.
    #[arg(long, value_name = "MW")]
    pmax: Option<f64>,

    /// Number of pump points from 0 to pmax.
    #[arg(long, default_value_t = 60)]
    points: usize,

    /// Probe frequency, Hz.
    #[arg(long, default_value_t = 3e6)]
    probe: f64,
}

#[derive(Args)]
struct SimulateArgs {
    /// Lock-angle override, degrees: 0 measures the squeezed quadrature,
    /// 90 the anti-squeezed one.
    #[arg(long, value_name = "DEG")]
    lock_deg: Option<f64>,

    /// Also write the raw time-domain record here (binary).
    #[arg(long, value_name = "FILE")]
    record_out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Spectrum CSV (freq_MHz,squeezed_dB,antisqueezed_dB[,reliable]).
    #[arg(long, value_name = "FILE", conflicts_with = "pump")]
    spectrum: Option<PathBuf>,

    /// Pump CSV (P_mW,sqz_dB,antisqz_dB); estimates the threshold power.
    #[arg(long, value_name = "FILE")]
    pump: Option<PathBuf>,

    /// Free parameters, comma separated: xi, f_hwhm, eta, rho, theta.
    #[arg(long, default_value = "xi,f_hwhm,theta")]
    free: String,

    /// Probe frequency of the pump CSV, Hz.
    #[arg(long, default_value_t = 3e6)]
    probe: f64,

    /// Fit linear relative noise powers instead of dB values.
    #[arg(long)]
    linear: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Io => 1,
                ErrorClass::Usage => 2,
                ErrorClass::Physics => 3,
                ErrorClass::Numerical => 4,
            })
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut buf = Vec::new();
    match &cli.command {
        Cmd::Cavity(a) => cmd_cavity(cli, a, &mut buf)?,
        Cmd::Spectrum(a) => cmd_spectrum(cli, a, &mut buf)?,
        Cmd::PumpSweep(a) => cmd_pump_sweep(cli, a, &mut buf)?,
        Cmd::Simulate(a) => cmd_simulate(cli, a, &mut buf)?,
        Cmd::Fit(a) => cmd_fit(cli, a, &mut buf)?,
    }
    match &cli.out {
        Some(path) => fs::write(path, &buf)?,
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Config plumbing
// ---------------------------------------------------------------------------

fn config_text(cli: &Cli) -> Result<(String, PathBuf)> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("this command needs --config <FILE>".into()))?;
    Ok((fs::read_to_string(path)?, path.clone()))
}

fn load_params(cli: &Cli) -> Result<(ParamsFile, PathBuf)> {
    let (text, path) = config_text(cli)?;
    Ok((parse_with_overrides(&text, &cli.overrides)?, path))
}

/// Loss tables referenced by the params file resolve relative to it.
fn chain_for(params: &ParamsFile, config_path: &Path) -> Result<DetectionChain> {
    let dir = config_path.parent().unwrap_or(Path::new("")).to_path_buf();
    params.detection_chain(|rel| Ok(fs::read_to_string(dir.join(rel))?))
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidParameter(format!("cannot parse {what} from '{}'", s.trim())))
}

fn parse_parts(spec: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != n {
        return Err(Error::InvalidParameter(format!(
            "{what} wants {n} colon-separated numbers, got '{spec}'"
        )));
    }
    parts.iter().map(|p| parse_f64(p, what)).collect()
}

fn linspace(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(hi > lo) {
        return Err(Error::InvalidParameter(format!(
            "grid wants at least 2 points and hi > lo, got {points} points over [{lo}, {hi}]"
        )));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|i| lo + step * i as f64).collect())
}

// ---------------------------------------------------------------------------
// cavity
// ---------------------------------------------------------------------------

fn cmd_cavity(cli: &Cli, a: &CavityArgs, out: &mut Vec<u8>) -> Result<()> {
    let (text, _) = config_text(cli)?;
    let file: LayoutFile = parse_with_overrides(&text, &cli.overrides)?;
    let layout = file.build()?;

    if let Some(spec) = &a.scan {
        let p = parse_parts(spec, 3, "--scan")?;
        let distances = cavity::grid(p[0] * 1e-3, p[1] * 1e-3, p[2] * 1e-3)?;
        let rows = cavity::waist_scan(|d| layout.with_mirror_spacing(d), &distances)?;
        return io::write_waist_scan(out, &rows);
    }

    if a.solve_circular {
        let p = parse_parts(&a.bracket, 2, "--bracket")?;
        let sol = cavity::find_circular_spacing(
            |d| layout.with_mirror_spacing(d),
            (p[0] * 1e-3, p[1] * 1e-3),
            1e-6,
        )?;
        writeln!(out, "{}", io::header("circular-waist"))?;
        writeln!(out, "key,value")?;
        writeln!(out, "spacing_mm,{}", fmt(sol.distance * 1e3))?;
        writeln!(out, "waist_um,{}", fmt(sol.waist * 1e6))?;
        return Ok(());
    }

    let layout = match a.spacing {
        Some(mm) => layout.with_mirror_spacing(mm * 1e-3)?,
        None => layout,
    };
    let mode = layout.eigenmode()?;
    let report = cavity::extraction_report(&layout)?;
    let (t, s) = (TransversePlane::Tangential, TransversePlane::Sagittal);

    writeln!(out, "{}", io::header("eigenmode-report"))?;
    writeln!(out, "key,value")?;
    if let Some(d) = layout.mirror_spacing() {
        writeln!(out, "spacing_mm,{}", fmt(d * 1e3))?;
    }
    writeln!(out, "stability_tangential,{}", fmt(layout.stability(t)))?;
    writeln!(out, "stability_sagittal,{}", fmt(layout.stability(s)))?;
    writeln!(
        out,
        "waist_tangential_um,{}",
        fmt(mode.waist_radius(t) * 1e6)
    )?;
    writeln!(out, "waist_sagittal_um,{}", fmt(mode.waist_radius(s) * 1e6))?;
    writeln!(
        out,
        "ellipticity,{}",
        fmt(mode.waist_radius(t) / mode.waist_radius(s))
    )?;
    if let Some([ft, fs_]) = report.lens_focal {
        writeln!(out, "extraction_focal_tangential_mm,{}", fmt(ft * 1e3))?;
        writeln!(out, "extraction_focal_sagittal_mm,{}", fmt(fs_ * 1e3))?;
    }
    writeln!(
        out,
        "output_waist_tangential_um,{}",
        fmt(report.output_mode.waist_radius(t) * 1e6)
    )?;
    writeln!(
        out,
        "output_waist_sagittal_um,{}",
        fmt(report.output_mode.waist_radius(s) * 1e6)
    )?;
    writeln!(
        out,
        "best_circular_overlap,{}",
        fmt(report.best_circular_overlap)
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// spectrum
// ---------------------------------------------------------------------------

fn cmd_spectrum(cli: &Cli, a: &SpectrumArgs, out: &mut Vec<u8>) -> Result<()> {
    let (params, path) = load_params(cli)?;
    let opo = params.opo()?;
    let chain = chain_for(&params, &path)?;
    let freqs = linspace(a.fmin, a.fmax, a.points)?;

    let Some(list) = &a.pump_list else {
        let pair = predicted_spectrum(&opo, &chain, &freqs)?;
        return io::write_spectrum(
            out,
            &freqs,
            Some(&pair.squeezed_db()),
            Some(&pair.antisqueezed_db()),
            None,
        );
    };

    let powers: Vec<f64> = list
        .split(',')
        .map(|p| parse_f64(p, "--pump-list entry (mW)"))
        .collect::<Result<_>>()?;
    let pairs: Vec<_> = powers
        .iter()
        .map(|&mw| {
            Ok(predicted_spectrum(
                &opo.with_pump(mw * 1e-3)?,
                &chain,
                &freqs,
            )?)
        })
        .collect::<Result<_>>()?;

    writeln!(out, "{}", io::header("spectrum"))?;
    let mut cols = vec!["freq_MHz".to_string()];
    for &mw in &powers {
        cols.push(format!("squeezed_{}mW_dB", fmt(mw)));
        cols.push(format!("antisqueezed_{}mW_dB", fmt(mw)));
    }
    writeln!(out, "{}", cols.join(","))?;
    let dbs: Vec<(Vec<f64>, Vec<f64>)> = pairs
        .iter()
        .map(|p: &opokit::squeezing::SpectrumPair<f64>| (p.squeezed_db(), p.antisqueezed_db()))
        .collect();
    for (i, &f) in freqs.iter().enumerate() {
        let mut row = vec![fmt(f / 1e6)];
        for (sq, anti) in &dbs {
            row.push(fmt(sq[i]));
            row.push(fmt(anti[i]));
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// pump-sweep
// ---------------------------------------------------------------------------

fn cmd_pump_sweep(cli: &Cli, a: &PumpSweepArgs, out: &mut Vec<u8>) -> Result<()> {
    let (params, path) = load_params(cli)?;
    let opo = params.opo()?;
    let chain = chain_for(&params, &path)?;

    let pmax = match a.pmax {
        Some(mw) => mw * 1e-3,
        None => opo.threshold_power * 0.99,
    };
    let mut powers = linspace(0.0, pmax, a.points)?;
    let requested = powers.len();
    powers.retain(|&p| p < opo.threshold_power);
    if powers.len() < requested {
        eprintln!(
            "warning: dropped {} pump point(s) at or above threshold ({} mW)",
            requested - powers.len(),
            fmt(opo.threshold_power * 1e3)
        );
    }
    let sweep = pump_sweep(&opo, &chain, a.probe, &powers)?;
    let optimum = optimal_squeezing(&opo, &chain, a.probe)?;
    io::write_pump_sweep(out, &sweep, Some(optimum))
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn cmd_simulate(cli: &Cli, a: &SimulateArgs, out: &mut Vec<u8>) -> Result<()> {
    let (params, path) = load_params(cli)?;
    let opo = params.opo()?;
    let chain = chain_for(&params, &path)?;
    let analyzer = params.analyzer_config()?;
    let mut tc = params.trace_config(cli.seed)?;
    if let Some(deg) = a.lock_deg {
        tc.lock_angle = deg.to_radians();
    }

    let record = generate_trace(&opo, &chain, &tc)?;
    let shot = generate_trace(&opo.with_pump(0.0)?, &chain, &tc.shot_variant())?;
    if let Some(p) = &a.record_out {
        let mut f = fs::File::create(p)?;
        io::write_record(&mut f, &record)?;
    }
    let spec = opokit::analyzer::analyze_spectrum(&record, &shot, &analyzer)?;

    // The measured quadrature lands in the column it is closest to; the
    // exact angle is kept in a comment.
    let lock_deg = tc.lock_angle.to_degrees();
    let folded = ((lock_deg % 180.0) + 180.0) % 180.0;
    let anti_branch = (folded - 90.0).abs() < 45.0;
    let db = spec.relative_db();
    let (sq, anti) = if anti_branch {
        (None, Some(&db[..]))
    } else {
        (Some(&db[..]), None)
    };

    let mut body = Vec::new();
    io::write_spectrum(&mut body, &spec.frequencies, sq, anti, Some(&spec.reliable))?;
    let after_header = body.iter().position(|&b| b == b'\n').map_or(0, |i| i + 1);
    out.extend_from_slice(&body[..after_header]);
    writeln!(
        out,
        "# lock angle {} deg, seed {}",
        fmt(lock_deg),
        tc.rng_seed
    )?;
    writeln!(
        out,
        "# {} segments averaged, rbw {} MHz",
        spec.segments,
        fmt(spec.rbw / 1e6)
    )?;
    out.extend_from_slice(&body[after_header..]);
    Ok(())
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

fn base_model(params: &ParamsFile, chain: &DetectionChain) -> Result<SqueezingModel> {
    let opo = params.opo()?;
    Ok(SqueezingModel {
        xi: opo.xi(),
        f_hwhm: opo.f_hwhm,
        eta: chain.total_efficiency(0.0),
        rho: opo.escape_efficiency(),
        theta: chain.phase_jitter_rms,
    })
}

fn cmd_fit(cli: &Cli, a: &FitArgs, out: &mut Vec<u8>) -> Result<()> {
    let (params, path) = load_params(cli)?;
    let chain = chain_for(&params, &path)?;
    let base = base_model(&params, &chain)?;

    let json = match (&a.spectrum, &a.pump) {
        (Some(spec_path), None) => {
            let data = io::read_spectrum_csv(fs::File::open(spec_path)?)?;
            let free: Vec<ModelParam> = a
                .free
                .split(',')
                .map(|name| match name.trim() {
                    "xi" => Ok(ModelParam::Xi),
                    "f_hwhm" => Ok(ModelParam::FHwhm),
                    "eta" => Ok(ModelParam::Eta),
                    "rho" => Ok(ModelParam::Rho),
                    "theta" => Ok(ModelParam::Theta),
                    other => Err(Error::InvalidParameter(format!(
                        "unknown fit parameter '{other}' (expected xi, f_hwhm, eta, rho, theta)"
                    ))),
                })
                .collect::<Result<_>>()?;
            let mut problem = opokit::FitProblem::new(base, &free);
            problem.linear_residuals = a.linear;
            let result = fit_spectrum(&data, &problem)?;
            serde_json::to_string_pretty(&result).expect("fit result serializes")
        }
        (None, Some(pump_path)) => {
            let points = io::read_pump_csv(fs::File::open(pump_path)?)?;
            let estimate = estimate_threshold(&points, a.probe, &base)?;
            serde_json::to_string_pretty(&estimate).expect("estimate serializes")
        }
        _ => {
            return Err(Error::InvalidParameter(
                "fit wants exactly one of --spectrum <FILE> or --pump <FILE>".into(),
            ))
        }
    };
    writeln!(out, "{json}")?;
    Ok(())
}
