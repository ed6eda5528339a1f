mod figures;
mod table;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use sfrkit::applications::{
    a_ratio, max_contingency, min_effective_tau, sensitivity_report, NadirConstants, NadirRegion, SecurityPolicy,
};
use sfrkit::band_approx::{
    build_tau_surface, fit_equivalent_band, mape_map, mape_tau_sweep, PfrGrid, TauSurfaceModel, TauSweepConfig,
    TimeGrid, TwoBandPfr, ZeroFastBand,
};
use sfrkit::closed_form::{self, lag_nadir, NadirKind};
use sfrkit::model::PfrBands;
use sfrkit::oracle::{integrate, IntegrationSpec, Method};
use sfrkit::scenario::Scenario;
use sfrkit::SfrError;

use figures::{mape_csv, sweep_csv, Figure};
use table::traces_csv;

#[derive(Parser)]
#[command(name = "sfrkit", version, about = "System frequency response with lag and ramp PFR")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario JSON file
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output file (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a scenario field, e.g. `system.ke_mws=7000`
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Clone)]
struct SurfaceArgs {
    /// Fast band time constant, s
    #[arg(long, default_value_t = 0.4)]
    tau1: f64,
    /// Standard band time constant, s
    #[arg(long, default_value_t = 2.0)]
    tau2: f64,
    /// Surface model JSON from `fit-surface`; otherwise the reference
    /// coefficients for (0.4, 2.0) or a fresh fit for other pairs
    #[arg(long)]
    surface: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Rk4,
    Euler,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the scenario numerically (any band mix)
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "rk4")]
        method: MethodArg,
    },
    /// Closed form next to the numerical trace, with the max gap on stderr
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Nadir of a single lag band
    Nadir {
        #[command(flatten)]
        common: Common,
    },
    /// Fit one lag band to the scenario's two lag bands
    FitBand {
        #[command(flatten)]
        common: Common,
    },
    /// Fit the equivalent-τ surface model over a PFR grid
    FitSurface {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0.4)]
        tau1: f64,
        #[arg(long, default_value_t = 2.0)]
        tau2: f64,
        /// Smallest grid value for both bands, MW
        #[arg(long, default_value_t = 10.0)]
        pfr_min: f64,
        #[arg(long, default_value_t = 200.0)]
        pfr_max: f64,
        #[arg(long, default_value_t = 10.0)]
        pfr_step: f64,
    },
    /// MAPE of the equivalent band over a fixed-total PFR split
    MapeMap {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        surface: SurfaceArgs,
        /// Total PFR split between the bands, MW
        #[arg(long, default_value_t = 210.0)]
        total: f64,
        #[arg(long, default_value_t = 10.0)]
        step: f64,
        /// Use the model limit τ₁ + a when PFR₁ = 0
        #[arg(long)]
        model_limit: bool,
    },
    /// Mean and max MAPE over (τ₁, τ₂) pairs
    TauSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        tau1_values: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        tau2_values: Option<Vec<f64>>,
    },
    /// Largest contingency that keeps the nadir within the limit
    MaxContingency {
        #[command(flatten)]
        common: Common,
        /// Frequency deviation limit, Hz (negative for under-frequency)
        #[arg(long, allow_hyphen_values = true)]
        delta_f_max: f64,
        /// Aggregate PFR time constant, s
        #[arg(long)]
        tau: f64,
        /// Contingency-to-PFR ratio (default 1/0.7)
        #[arg(long)]
        k: Option<f64>,
    },
    /// Time constant below which faster PFR stops improving the nadir
    MinTau {
        #[command(flatten)]
        common: Common,
        /// Contingency-to-PFR ratio; defaults to the scenario's P_cont / total PFR
        #[arg(long)]
        k: Option<f64>,
    },
    /// Sensitivities of the K = 1 max contingency with finite-difference checks
    Sensitivities {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        surface: SurfaceArgs,
        #[arg(long, allow_hyphen_values = true)]
        delta_f_max: f64,
        #[arg(long)]
        pfr1: f64,
        #[arg(long)]
        pfr2: f64,
    },
    /// Regenerate the data table behind a figure
    ReproduceFigure {
        #[arg(value_enum)]
        figure: Figure,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize, Deserialize)]
struct SurfaceJson {
    a: f64,
    b: f64,
    tau1_s: f64,
    tau2_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rms_residual: Option<f64>,
}

#[derive(Serialize)]
struct NadirJson {
    kind: &'static str,
    t_nadir_s: Option<f64>,
    delta_f_nadir_hz: f64,
    max_rocof_hz_per_s: f64,
}

#[derive(Serialize)]
struct BandJson {
    pfr_eq_mw: f64,
    tau_eq_s: f64,
    fit_residual_mw2: Option<f64>,
}

#[derive(Serialize)]
struct ContingencyJson {
    max_contingency_mw: f64,
    region: &'static str,
    a: f64,
    k: f64,
}

fn load_scenario(common: &Common) -> anyhow::Result<Scenario> {
    let path = common
        .scenario
        .as_deref()
        .ok_or_else(|| SfrError::InvalidInput("--scenario is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| SfrError::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    Scenario::from_json_str(&text, &common.overrides)
        .with_context(|| format!("scenario {}", path.display()))
}

fn load_surface(args: &SurfaceArgs) -> anyhow::Result<TauSurfaceModel> {
    if let Some(path) = &args.surface {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SfrError::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        let s: SurfaceJson = serde_json::from_str(&text)
            .map_err(|e| SfrError::InvalidInput(format!("surface model {}: {e}", path.display())))?;
        if s.tau1_s != args.tau1 || s.tau2_s != args.tau2 {
            return Err(SfrError::InvalidInput(format!(
                "surface model is for tau1={}, tau2={}, not {}, {}",
                s.tau1_s, s.tau2_s, args.tau1, args.tau2
            ))
            .into());
        }
        return Ok(TauSurfaceModel {
            a: s.a,
            b: s.b,
            tau1: s.tau1_s,
            tau2: s.tau2_s,
        });
    }
    let canon = TauSurfaceModel::CANONICAL;
    if args.tau1 == canon.tau1 && args.tau2 == canon.tau2 {
        return Ok(canon);
    }
    log::info!("fitting a surface model for tau1={}, tau2={}", args.tau1, args.tau2);
    Ok(build_tau_surface(args.tau1, args.tau2, &PfrGrid::default_fit(), &TimeGrid::default())?.model)
}

fn json(value: &impl Serialize) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn sim_spec(sc: &Scenario, method: Method) -> IntegrationSpec {
    IntegrationSpec {
        dt: sc.sim.dt_s,
        t_end: sc.sim.t_end_s,
        method,
    }
}

fn run(cmd: Command) -> anyhow::Result<(String, Option<PathBuf>)> {
    let (body, out) = match cmd {
        Command::Simulate { common, method } => {
            let sc = load_scenario(&common)?;
            sc.validate_bands()?;
            let method = match method {
                MethodArg::Rk4 => Method::FixedStepRk4,
                MethodArg::Euler => Method::ForwardEuler,
            };
            let tr = integrate(&sc.system()?, sc.pfr_function(), &sim_spec(&sc, method))?;
            let mut buf = Vec::new();
            tr.write_csv(&mut buf)?;
            (String::from_utf8(buf)?, common.out)
        }
        Command::Compare { common } => {
            let sc = load_scenario(&common)?;
            let sys = sc.system()?;
            let bands = sc.pfr_bands()?;
            let spec = sim_spec(&sc, Method::FixedStepRk4);
            let oracle = integrate(&sys, sc.pfr_function(), &spec)?;
            let closed = closed_form::trace(&sys, &bands, spec.t_end, spec.dt)?;
            let gap = closed.max_abs_gap(&oracle)?;
            eprintln!("max |closed_form - oracle| = {} Hz", sfrkit::format::fmt_sig(gap));
            let csv = traces_csv(spec.dt, &[("closed_form_hz", &closed.samples), ("oracle_hz", &oracle.samples)]);
            (csv, common.out)
        }
        Command::Nadir { common } => {
            let sc = load_scenario(&common)?;
            let sys = sc.system()?;
            let band = match sc.pfr_bands()? {
                PfrBands::Lag(b) if b.len() == 1 => b[0],
                _ => {
                    return Err(SfrError::InvalidInput(
                        "nadir needs exactly one lag band (use fit-band to reduce two bands)".into(),
                    )
                    .into())
                }
            };
            let n = lag_nadir(&sys, &band)?;
            let kind = match n.kind {
                NadirKind::InteriorMinimum => "interior_minimum",
                NadirKind::Asymptotic => "asymptotic",
            };
            let body = json(&NadirJson {
                kind,
                t_nadir_s: n.t_nadir,
                delta_f_nadir_hz: n.delta_f_nadir,
                max_rocof_hz_per_s: n.max_rocof,
            })?;
            (body, common.out)
        }
        Command::FitBand { common } => {
            let sc = load_scenario(&common)?;
            let tb = match sc.pfr_bands()? {
                PfrBands::Lag(b) if b.len() == 2 => {
                    let (fast, slow) = if b[0].tau <= b[1].tau { (b[0], b[1]) } else { (b[1], b[0]) };
                    TwoBandPfr::new(fast, slow)
                }
                _ => return Err(SfrError::InvalidInput("fit-band needs exactly two lag bands".into()).into()),
            };
            let times = TimeGrid::default().covering(tb.slow.tau).points()?;
            let eq = fit_equivalent_band(&tb, &times)?;
            let body = json(&BandJson {
                pfr_eq_mw: eq.pfr_eq,
                tau_eq_s: eq.tau_eq,
                fit_residual_mw2: eq.fit_residual,
            })?;
            (body, common.out)
        }
        Command::FitSurface {
            out,
            tau1,
            tau2,
            pfr_min,
            pfr_max,
            pfr_step,
        } => {
            if !(pfr_step > 0.0 && pfr_min >= 0.0 && pfr_max >= pfr_min) {
                return Err(SfrError::InvalidInput("need 0 <= pfr-min <= pfr-max and pfr-step > 0".into()).into());
            }
            let v = PfrGrid::range(pfr_min, pfr_max, pfr_step);
            let fit = build_tau_surface(tau1, tau2, &PfrGrid::rectangular(&v, &v), &TimeGrid::default())?;
            let body = json(&SurfaceJson {
                a: fit.model.a,
                b: fit.model.b,
                tau1_s: tau1,
                tau2_s: tau2,
                rms_residual: Some(fit.rms_residual),
            })?;
            (body, out)
        }
        Command::MapeMap {
            common,
            surface,
            total,
            step,
            model_limit,
        } => {
            let sc = load_scenario(&common)?;
            if !(total > 0.0 && step > 0.0 && step <= total) {
                return Err(SfrError::InvalidInput("need total > 0 and 0 < step <= total".into()).into());
            }
            let model = load_surface(&surface)?;
            let zero_fast = if model_limit {
                ZeroFastBand::ModelLimit
            } else {
                ZeroFastBand::Passthrough
            };
            let rep = mape_map(
                &sc.system()?,
                surface.tau1,
                surface.tau2,
                &PfrGrid::fixed_total(total, step),
                &model,
                &TimeGrid::default().covering(surface.tau2),
                zero_fast,
            )?;
            eprintln!(
                "mean MAPE {} %, max MAPE {} %",
                sfrkit::format::fmt_sig(rep.mean),
                sfrkit::format::fmt_sig(rep.max)
            );
            (mape_csv(&rep), common.out)
        }
        Command::TauSweep {
            common,
            tau1_values,
            tau2_values,
        } => {
            let sc = load_scenario(&common)?;
            let mut cfg = TauSweepConfig::default();
            if let Some(v) = tau1_values {
                cfg.tau1 = v;
            }
            if let Some(v) = tau2_values {
                cfg.tau2 = v;
            }
            if cfg.tau1.iter().chain(&cfg.tau2).any(|t| !(*t > 0.0 && t.is_finite())) {
                return Err(SfrError::InvalidInput("time constants must be positive".into()).into());
            }
            let rep = mape_tau_sweep(&sc.system()?, &cfg)?;
            eprintln!(
                "overall mean MAPE {} %, max MAPE {} %",
                sfrkit::format::fmt_sig(rep.mean),
                sfrkit::format::fmt_sig(rep.max)
            );
            (sweep_csv(&rep), common.out)
        }
        Command::MaxContingency {
            common,
            delta_f_max,
            tau,
            k,
        } => {
            let sc = load_scenario(&common)?;
            let sys = sc.system()?;
            let policy = SecurityPolicy {
                k_policy: k.unwrap_or(1.0 / 0.7),
                delta_f_max,
            };
            let p = max_contingency(&sys, &policy, tau)?;
            let a = a_ratio(&sys, tau);
            let region = match NadirConstants::from_ratios(policy.k_policy, a)?.region() {
                NadirRegion::Interior => "interior",
                NadirRegion::Boundary => "boundary",
                NadirRegion::Asymptotic => "asymptotic",
            };
            let body = json(&ContingencyJson {
                max_contingency_mw: p,
                region,
                a,
                k: policy.k_policy,
            })?;
            (body, common.out)
        }
        Command::MinTau { common, k } => {
            let sc = load_scenario(&common)?;
            let sys = sc.system()?;
            let k = match k {
                Some(k) => k,
                None => {
                    let total = sc.total_pfr();
                    if total == 0.0 {
                        return Err(SfrError::InvalidInput("pass --k or give the scenario PFR bands".into()).into());
                    }
                    sys.p_cont() / total
                }
            };
            let tau = min_effective_tau(&sys, k)?;
            (json(&serde_json::json!({ "k": k, "min_tau_s": tau }))?, common.out)
        }
        Command::Sensitivities {
            common,
            surface,
            delta_f_max,
            pfr1,
            pfr2,
        } => {
            let sc = load_scenario(&common)?;
            let model = load_surface(&surface)?;
            let rep = sensitivity_report(&sc.system()?, delta_f_max, &model, pfr1, pfr2)?;
            (json(&rep)?, common.out)
        }
        Command::ReproduceFigure { figure, out } => (figures::render(figure)?, out),
    };
    Ok((body, out))
}

fn write_output(body: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, body).with_context(|| format!("cannot write {}", path.display())),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("SFRKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| SfrError::InvalidInput(format!("SFRKIT_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<SfrError>() {
        Some(e) if !e.is_validation() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads()
        .and_then(|_| run(cli.command))
        .and_then(|(body, out)| write_output(&body, out.as_deref()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
