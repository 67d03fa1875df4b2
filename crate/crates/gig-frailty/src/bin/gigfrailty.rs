//! Command-line front-end for the GIG frailty models: fit models to CSV
//! data, run simulation studies, profile the GIG index, and emit RFV and
//! Kaplan-Meier curves as plot-ready CSV.
//!
//! Exit codes: 0 success, 1 non-convergence or numerical failure,
//! 2 input error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use gig_frailty::baseline::CutMethod;
use gig_frailty::data::Dataset;
use gig_frailty::distributions::FrailtyLaw;
use gig_frailty::em::{fit_em, EmConfig, FitResult};
use gig_frailty::error::Error;
use gig_frailty::inference::{
    bootstrap_se, fit_parametric_weibull, kaplan_meier, profile_lambda, rfv,
    rfv_alpha_for_target, BootstrapResult,
};
use gig_frailty::optim::Optimizer;
use gig_frailty::simulate::{generate, run_study, write_study_csv, Scenario};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "gigfrailty",
    about = "Generalized inverse-Gaussian frailty models for clustered survival data",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a GIG frailty model to a CSV dataset
    Fit(FitArgs),
    /// Generate a synthetic dataset or run a Monte Carlo study
    Simulate(SimulateArgs),
    /// Profile the log-likelihood over a grid of lambda values
    Profile(ProfileArgs),
    /// Emit relative-frailty-variance curves
    Rfv(RfvArgs),
    /// Kaplan-Meier survival estimates
    Km(KmArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CutMethodArg {
    Quantile,
    Even,
}

impl From<CutMethodArg> for CutMethod {
    fn from(v: CutMethodArg) -> Self {
        match v {
            CutMethodArg::Quantile => CutMethod::FailureQuantiles,
            CutMethodArg::Even => CutMethod::EvenTime,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    Pe,
    Weibull,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct FitArgs {
    /// Input CSV: header `cluster_id,time,status,<covariates...>`
    data: PathBuf,
    /// GIG index (fixed during estimation); -0.5 IG, 0 HYP, 0.5 RIG, 1 PHYP
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Number of interior cut points of the piecewise-exponential baseline
    #[arg(long, default_value_t = 10)]
    cuts: usize,
    #[arg(long, value_enum, default_value_t = CutMethodArg::Quantile)]
    cut_method: CutMethodArg,
    #[arg(long, value_enum, default_value_t = BaselineArg::Pe)]
    baseline: BaselineArg,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Number of cluster-bootstrap resamples for standard errors
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write a machine-readable JSON report here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FrailtyArg {
    Gig,
    Gamma,
    Ge,
    Lognormal,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SimulateArgs {
    /// Frailty law of the generator
    #[arg(long, value_enum, default_value_t = FrailtyArg::Gamma)]
    frailty: FrailtyArg,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// GIG index of the generating law (only for --frailty gig)
    #[arg(long, default_value_t = 0.5)]
    gig_lambda: f64,
    #[arg(long, default_value_t = 200)]
    clusters: usize,
    #[arg(long, default_value_t = 2)]
    cluster_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run a Monte Carlo study with this many replicas instead of
    /// writing a single dataset
    #[arg(long)]
    replicas: Option<usize>,
    /// Fit specifications for the study as `lambda:cuts` pairs,
    /// e.g. `0.5:10,-0.5:10`
    #[arg(long, default_value = "0.5:10", allow_hyphen_values = true)]
    fit_specs: String,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Output CSV (dataset or study summary)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct ProfileArgs {
    data: PathBuf,
    #[arg(long, default_value_t = -5.0)]
    min: f64,
    #[arg(long, default_value_t = 5.0)]
    max: f64,
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    #[arg(long, default_value_t = 10)]
    cuts: usize,
    #[arg(long, value_enum, default_value_t = CutMethodArg::Quantile)]
    cut_method: CutMethodArg,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Output CSV with columns lambda,loglik
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct RfvArgs {
    /// Comma-separated GIG indices, one curve each
    #[arg(long, default_value = "-0.5,0,0.5,1", allow_hyphen_values = true)]
    lambdas: String,
    /// Solve alpha per lambda so that RFV(0) equals this value
    #[arg(long)]
    target_rfv0: Option<f64>,
    /// Fixed alpha for all curves (ignored when --target-rfv0 is given)
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    s_min: f64,
    #[arg(long, default_value_t = 10.0)]
    s_max: f64,
    #[arg(long, default_value_t = 0.1)]
    s_step: f64,
    /// Output CSV with columns lambda,alpha,s,rfv
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct KmArgs {
    data: PathBuf,
    /// Covariate column to split the sample into groups
    #[arg(long)]
    group: Option<String>,
    /// Output CSV with columns group,t,survival
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fit(args) => cmd_fit(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Profile(args) => cmd_profile(&args),
        Command::Rfv(args) => cmd_rfv(&args),
        Command::Km(args) => cmd_km(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Csv { .. }
        | Error::InvalidData(_)
        | Error::DimensionMismatch { .. }
        | Error::TooFewFailures { .. }
        | Error::Domain { .. }
        | Error::Io(_) => 2,
        _ => 1,
    }
}

/// Write bytes atomically: to a temporary sibling first, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> gig_frailty::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Serialize)]
struct FitReport<'a> {
    lambda: f64,
    baseline: &'a str,
    fit: &'a FitResult,
    hazard_ratios: Vec<(String, f64)>,
    bootstrap: Option<&'a BootstrapResult>,
}

fn cmd_fit(args: &FitArgs) -> gig_frailty::Result<ExitCode> {
    let data = Dataset::read_csv_path(&args.data)?;
    let cfg = EmConfig {
        tol: args.tol,
        max_iter: args.max_iter,
        k_cuts: args.cuts,
        cut_method: args.cut_method.into(),
        optimizer: Optimizer::QuasiNewtonNumericGrad,
        lambda: args.lambda,
    };
    let fit = match args.baseline {
        BaselineArg::Pe => fit_em(&data, &cfg)?,
        BaselineArg::Weibull => fit_parametric_weibull(&data, args.lambda, &cfg)?,
    };
    let boot = match args.bootstrap {
        Some(b) if matches!(args.baseline, BaselineArg::Pe) => {
            Some(bootstrap_se(&data, &cfg, b, args.seed)?)
        }
        Some(_) => {
            eprintln!("note: bootstrap standard errors are only implemented for --baseline pe");
            None
        }
        None => None,
    };

    println!(
        "GIG frailty fit  (lambda = {}, baseline = {})",
        args.lambda,
        match args.baseline {
            BaselineArg::Pe => format!("piecewise-exponential, {} cuts", args.cuts),
            BaselineArg::Weibull => "Weibull".into(),
        }
    );
    println!(
        "clusters: {}   subjects: {}   events: {}",
        data.n_clusters(),
        data.n_subjects(),
        data.n_events()
    );
    println!("log-likelihood: {:.6}   iterations: {}   converged: {}", fit.loglik, fit.n_iter, fit.converged);
    println!();
    println!("{:<20} {:>12} {:>12} {:>12}", "parameter", "estimate", "exp(est)", "boot SE");
    let mut hazard_ratios = Vec::new();
    for (j, name) in data.covariate_names().iter().enumerate() {
        let b = fit.params.beta[j];
        let se = boot
            .as_ref()
            .map(|r| format!("{:.4}", r.standard_errors[j]))
            .unwrap_or_else(|| "-".into());
        println!("{:<20} {:>12.4} {:>12.4} {:>12}", format!("beta_{name}"), b, b.exp(), se);
        hazard_ratios.push((name.clone(), b.exp()));
    }
    let alpha_se = boot
        .as_ref()
        .map(|r| format!("{:.4}", r.standard_errors[data.n_covariates()]))
        .unwrap_or_else(|| "-".into());
    println!("{:<20} {:>12.4} {:>12} {:>12}", "alpha", fit.params.alpha, "-", alpha_se);
    let var_se = boot
        .as_ref()
        .map(|r| format!("{:.4}", r.standard_errors[data.n_covariates() + 1]))
        .unwrap_or_else(|| "-".into());
    println!(
        "{:<20} {:>12.4} {:>12} {:>12}",
        "frailty variance", fit.standardized_frailty_variance, "-", var_se
    );
    if let Some(b) = &boot {
        println!();
        println!(
            "bootstrap: {} resamples, {} excluded (non-converged), seed {}",
            b.n_resamples, b.n_failed, b.seed
        );
    }

    if let Some(out) = &args.out {
        let report = FitReport {
            lambda: args.lambda,
            baseline: match args.baseline {
                BaselineArg::Pe => "pe",
                BaselineArg::Weibull => "weibull",
            },
            fit: &fit,
            hazard_ratios,
            bootstrap: boot.as_ref(),
        };
        let json = serde_json::to_vec_pretty(&report)
            .map_err(|e| Error::InvalidData(format!("serialization failed: {e}")))?;
        write_atomic(out, &json)?;
    }
    Ok(if fit.converged { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn parse_frailty(args: &SimulateArgs) -> FrailtyLaw {
    match args.frailty {
        FrailtyArg::Gig => FrailtyLaw::Gig { alpha: args.alpha, lambda: args.gig_lambda },
        FrailtyArg::Gamma => FrailtyLaw::Gamma { alpha: args.alpha },
        FrailtyArg::Ge => FrailtyLaw::GeneralizedExponential { alpha: args.alpha },
        FrailtyArg::Lognormal => FrailtyLaw::LogNormal { alpha: args.alpha },
    }
}

fn parse_fit_specs(spec: &str) -> gig_frailty::Result<Vec<(f64, usize)>> {
    spec.split(',')
        .map(|s| {
            let (l, k) = s
                .split_once(':')
                .ok_or_else(|| Error::InvalidData(format!("bad fit spec {s:?}, want lambda:cuts")))?;
            Ok((
                l.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidData(format!("bad lambda in fit spec {s:?}")))?,
                k.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidData(format!("bad cut count in fit spec {s:?}")))?,
            ))
        })
        .collect()
}

fn cmd_simulate(args: &SimulateArgs) -> gig_frailty::Result<ExitCode> {
    let scn = Scenario::standard(parse_frailty(args), args.clusters, args.cluster_size, args.seed);
    match args.replicas {
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(scn.seed);
            let data = generate(&scn, &mut rng)?;
            let mut buf = Vec::new();
            data.write_csv(&mut buf)?;
            write_atomic(&args.out, &buf)?;
            println!(
                "wrote {} subjects in {} clusters ({} events) to {}",
                data.n_subjects(),
                data.n_clusters(),
                data.n_events(),
                args.out.display()
            );
        }
        Some(replicas) => {
            let specs = parse_fit_specs(&args.fit_specs)?;
            let cfg = EmConfig { tol: args.tol, max_iter: args.max_iter, ..EmConfig::default() };
            let rows = run_study(&scn, &specs, replicas, &cfg)?;
            let mut buf = Vec::new();
            write_study_csv(&rows, &mut buf)?;
            write_atomic(&args.out, &buf)?;
            println!("wrote {} study rows to {}", rows.len(), args.out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_profile(args: &ProfileArgs) -> gig_frailty::Result<ExitCode> {
    if !(args.step > 0.0) || args.max < args.min {
        return Err(Error::InvalidData("need step > 0 and max >= min".into()));
    }
    let data = Dataset::read_csv_path(&args.data)?;
    let n = ((args.max - args.min) / args.step).round() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| args.min + i as f64 * args.step).collect();
    let cfg = EmConfig {
        tol: args.tol,
        max_iter: args.max_iter,
        k_cuts: args.cuts,
        cut_method: args.cut_method.into(),
        ..EmConfig::default()
    };
    let (points, failed) = profile_lambda(&data, &grid, &cfg)?;
    for lambda in &failed {
        eprintln!("warning: fit at lambda = {lambda} did not converge; point omitted");
    }
    let mut buf = String::from("lambda,loglik\n");
    for p in &points {
        buf.push_str(&format!("{},{}\n", p.lambda, p.loglik));
    }
    write_atomic(&args.out, buf.as_bytes())?;
    let best = points
        .iter()
        .max_by(|a, b| a.loglik.total_cmp(&b.loglik))
        .expect("profile_lambda returns at least one point");
    println!(
        "wrote {} grid points to {}; argmax lambda = {} (loglik {:.6})",
        points.len(),
        args.out.display(),
        best.lambda,
        best.loglik
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_rfv(args: &RfvArgs) -> gig_frailty::Result<ExitCode> {
    if !(args.s_step > 0.0) || args.s_max < args.s_min {
        return Err(Error::InvalidData("need s-step > 0 and s-max >= s-min".into()));
    }
    let lambdas: Vec<f64> = args
        .lambdas
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidData(format!("bad lambda {s:?}")))
        })
        .collect::<gig_frailty::Result<_>>()?;
    let n = ((args.s_max - args.s_min) / args.s_step).round() as usize;
    let mut buf = String::from("lambda,alpha,s,rfv\n");
    for &lambda in &lambdas {
        let alpha = match args.target_rfv0 {
            Some(target) => rfv_alpha_for_target(lambda, target)?,
            None => args.alpha,
        };
        let law = FrailtyLaw::Gig { alpha, lambda };
        for i in 0..=n {
            let s = args.s_min + i as f64 * args.s_step;
            buf.push_str(&format!("{lambda},{alpha},{s},{}\n", rfv(&law, s)?));
        }
    }
    write_atomic(&args.out, buf.as_bytes())?;
    println!("wrote {} RFV curves to {}", lambdas.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_km(args: &KmArgs) -> gig_frailty::Result<ExitCode> {
    let data = Dataset::read_csv_path(&args.data)?;
    // (group label, times, events)
    let mut groups: Vec<(String, Vec<f64>, Vec<bool>)> = Vec::new();
    match &args.group {
        None => {
            let (times, events) = data.times_events();
            groups.push(("all".into(), times, events));
        }
        Some(name) => {
            let j = data
                .covariate_names()
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::InvalidData(format!("no covariate column {name:?}")))?;
            for s in data.subjects() {
                let label = format!("{name}={}", s.covariates[j]);
                match groups.iter_mut().find(|(g, _, _)| *g == label) {
                    Some((_, t, e)) => {
                        t.push(s.time);
                        e.push(s.event);
                    }
                    None => groups.push((label, vec![s.time], vec![s.event])),
                }
            }
            groups.sort_by(|a, b| a.0.cmp(&b.0));
        }
    }
    let mut buf = String::from("group,t,survival\n");
    for (label, times, events) in &groups {
        for (t, s) in kaplan_meier(times, events)? {
            buf.push_str(&format!("{label},{t},{s}\n"));
        }
    }
    write_atomic(&args.out, buf.as_bytes())?;
    println!("wrote Kaplan-Meier curves for {} group(s) to {}", groups.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}
