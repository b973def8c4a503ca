//! `quasikin`: batch runner for spectra, Wick sums, kinetic integrals, WKE
//! trajectories and verification campaigns.

mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use config::{Mode, RunConfig, WickDomain, WickQuantity};
use output::{fmt_f, CliError, OutputDir};
use quasikin::base_process::{n0_spectrum, NoiseStream};
use quasikin::chaos_expansion::{mc_spectrum, simulate_ensemble, ChaosIntegrator, DuhamelConfig};
use quasikin::kinetic_operator::{k_on_radial, KineticConfig};
use quasikin::spectral_domain::norm2;
use quasikin::verification::{probe_modes, run_campaign};
use quasikin::wick_engine::{n2_finite, n2_stationary, sigma_closed_form, MomentValue, SumDomain};
use quasikin::wke_solver::{steady_state, wke_solve, WkeConfig, WkeState};
use quasikin::{Horizon, RadialDensity};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(name = "quasikin", version, about = "Quasisolution spectra and the wave kinetic equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo ensemble of quasisolutions.
    Simulate(RunArgs),
    /// Closed-form Wick moments.
    Wick(RunArgs),
    /// Kinetic operator applied to B = b²/γ.
    Kinetic(RunArgs),
    /// WKE trajectory (and optional steady state).
    Wke(RunArgs),
    /// Verification campaign.
    Verify(RunArgs),
    /// Plot-ready triplets from a finished run.
    Export(ExportArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    /// Manifest of the run to export from.
    #[arg(long)]
    record: PathBuf,
    /// spectrum | rate:<check> | error
    #[arg(long, default_value = "")]
    selector: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => run(Mode::Simulate, a),
        Command::Wick(a) => run(Mode::Wick, a),
        Command::Kinetic(a) => run(Mode::Kinetic, a),
        Command::Wke(a) => run(Mode::Wke, a),
        Command::Verify(a) => run(Mode::Verify, a),
        Command::Export(a) => output::export(&a.record, &a.selector, a.out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn load_config(mode: Mode, path: Option<&Path>) -> Result<RunConfig, CliError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut table: toml::Table = text.parse().map_err(|e| CliError::Config(format!("config: {e}")))?;
    match table.get("mode").and_then(|v| v.as_str()) {
        Some(m) if m != mode.name() => {
            return Err(CliError::Config(format!(
                "config mode '{m}' does not match subcommand '{}'",
                mode.name()
            )))
        }
        _ => {
            table.insert("mode".into(), toml::Value::String(mode.name().into()));
        }
    }
    Ok(RunConfig::parse(&table.to_string())?)
}

fn thread_count(flag: Option<usize>, cfg: &RunConfig) -> Result<usize, CliError> {
    let env = match std::env::var("QUASIKIN_THREADS") {
        Ok(v) => Some(
            v.parse::<usize>()
                .map_err(|_| CliError::Config(format!("QUASIKIN_THREADS = '{v}' is not a count")))?,
        ),
        Err(_) => None,
    };
    let n = flag
        .or(env)
        .or(cfg.threads)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if n == 0 {
        return Err(CliError::Config("thread count must be positive".into()));
    }
    Ok(n)
}

fn run(mode: Mode, args: RunArgs) -> Result<(), CliError> {
    let mut cfg = load_config(mode, args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let threads = thread_count(args.threads, &cfg)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let dir = args
        .out
        .or_else(|| cfg.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut out = OutputDir::create(&dir)?;
    let start = Instant::now();
    let mut failed = None;
    match mode {
        Mode::Simulate => simulate(&cfg, &mut out)?,
        Mode::Wick => wick(&cfg, &mut out)?,
        Mode::Kinetic => kinetic(&cfg, &mut out)?,
        Mode::Wke => wke(&cfg, &mut out)?,
        Mode::Verify => failed = verify(&cfg, &mut out)?,
    }
    out.finish(&cfg, threads, start.elapsed().as_secs_f64())?;
    match failed {
        Some(names) => Err(CliError::Check(format!("failed checks: {names}"))),
        None => Ok(()),
    }
}

fn simulate(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let lat = Arc::new(cfg.lattice_spec()?);
    let params = cfg.physical()?;
    let mut dc = DuhamelConfig::for_params(&params, &cfg.profiles);
    dc.h_osc = params.nu / cfg.simulate.h_div;
    let integ = ChaosIntegrator::new(lat.clone(), cfg.profiles.clone(), params, dc)?;
    let modes = match cfg.simulate.probes {
        Some(n) => probe_modes(&lat, n),
        None => (0..lat.len()).collect(),
    };
    let ens = simulate_ensemble(
        &integ,
        &NoiseStream::new(cfg.seed),
        cfg.simulate.samples,
        &cfg.params.taus,
        &modes,
        cfg.simulate.with_a2,
    )?;
    let mut header = vec!["tau", "mode", "s1", "s2", "s3", "abs_s", "total", "total_se"];
    let order_cols = ["n0", "n0_se", "n1", "n1_se", "n2", "n2_se", "n3", "n3_se", "n4", "n4_se"];
    header.extend(order_cols);
    header.extend(["a1_sq", "a1_sq_se"]);
    let mut rows = Vec::new();
    for (ti, &tau) in cfg.params.taus.iter().enumerate() {
        let mut spec = mc_spectrum(&ens, ti)?;
        spec.sort_by(|a, b| {
            let sa = norm2(&lat.modes()[a.mode].s);
            let sb = norm2(&lat.modes()[b.mode].s);
            sa.partial_cmp(&sb).unwrap().then(a.mode.cmp(&b.mode))
        });
        for e in spec {
            let s = lat.modes()[e.mode].s;
            let mut row = vec![fmt_f(tau), e.mode.to_string()];
            row.extend(s.iter().map(|&v| fmt_f(v)));
            row.push(fmt_f(norm2(&s).sqrt()));
            row.extend([fmt_f(e.total.mean), fmt_f(e.total.se)]);
            for o in &e.orders {
                row.extend([fmt_f(o.mean), fmt_f(o.se)]);
            }
            row.extend([fmt_f(e.a1_sq.mean), fmt_f(e.a1_sq.se)]);
            rows.push(row);
        }
    }
    out.csv("spectrum.csv", "spectrum", &header, &rows)
}

fn moment_row(m: &MomentValue, quantity: &str) -> Vec<String> {
    let mut row = vec![quantity.to_string(), m.tau.map_or(String::new(), fmt_f)];
    row.extend(m.s.iter().map(|&v| fmt_f(v)));
    row.extend([fmt_f(norm2(&m.s).sqrt()), fmt_f(m.value), fmt_f(m.imag)]);
    row
}

fn wick(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let params = cfg.physical()?;
    let lat;
    let (dom, points): (SumDomain, Vec<[f64; 3]>) = match cfg.wick.domain {
        WickDomain::Lattice => {
            lat = cfg.lattice_spec()?;
            let pts = probe_modes(&lat, cfg.wick.probes).iter().map(|&j| lat.modes()[j].s).collect();
            (SumDomain::Lattice(&lat), pts)
        }
        WickDomain::Continuum => (
            SumDomain::Continuum { d: cfg.lattice.d, rule: cfg.wick.rule },
            cfg.wick.radii.iter().map(|&r| [r, 0.0, 0.0]).collect(),
        ),
    };
    let mut rows = Vec::new();
    for s in &points {
        match (cfg.wick.quantity, params.horizon) {
            (WickQuantity::Sigma, _) => {
                rows.push(moment_row(&sigma_closed_form(s, &dom, &cfg.profiles, params.nu)?, "sigma"));
            }
            (WickQuantity::N2, Horizon::Infinite) => {
                rows.push(moment_row(&n2_stationary(s, &dom, &cfg.profiles, params.nu)?, "n2"));
            }
            (WickQuantity::N2, Horizon::Finite(_)) => {
                for m in n2_finite(s, &cfg.params.taus, &dom, &cfg.profiles, &params, false)? {
                    rows.push(moment_row(&m, "n2"));
                }
            }
        }
    }
    rows.sort_by(|a, b| {
        let ka: f64 = a[5].parse().unwrap();
        let kb: f64 = b[5].parse().unwrap();
        ka.partial_cmp(&kb).unwrap()
    });
    let header = ["quantity", "tau", "s1", "s2", "s3", "abs_s", "value", "imag"];
    out.csv("wick.csv", "spectrum", &header, &rows)
}

fn kinetic_config(cfg: &RunConfig) -> KineticConfig {
    KineticConfig::compact(cfg.lattice.d, cfg.grid.r, cfg.grid.support)
}

fn kinetic(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let kc = kinetic_config(cfg);
    kc.validate()?;
    let v = RadialDensity::from_fn(cfg.grid.dr, cfg.grid.nodes, |rho| cfg.profiles.big_b(rho * rho));
    let k = k_on_radial(&v, &kc)?;
    let rows: Vec<Vec<String>> = v
        .radii()
        .enumerate()
        .map(|(i, rho)| vec![fmt_f(rho), fmt_f(v.values()[i]), fmt_f(k.values()[i])])
        .collect();
    out.csv("kinetic.csv", "kinetic", &["rho", "v", "k"], &rows)
}

fn wke(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let params = cfg.physical()?;
    let mut wc = WkeConfig::new(cfg.profiles.clone(), cfg.lattice.d, cfg.grid.r);
    wc.dr = cfg.grid.dr;
    wc.nodes = cfg.grid.nodes;
    wc.kinetic = kinetic_config(cfg);
    wc.h = cfg.wke.h;
    wc.scheme = cfg.wke.scheme;
    let t0 = match params.horizon {
        Horizon::Finite(t) => -t,
        Horizon::Infinite => 0.0,
    };
    let traj = wke_solve(&WkeState::zero(&wc, t0, params.eps), cfg.wke.tau_end, &wc)?;
    let mut rows = Vec::new();
    for st in &traj.states {
        for (i, rho) in st.m.radii().enumerate() {
            // zero data at τ₀ is the n⁽⁰⁾ law started at T = −τ₀
            let lin = n0_spectrum(rho * rho, st.tau, &cfg.profiles, Horizon::Finite(-t0));
            rows.push(vec![fmt_f(st.tau), fmt_f(rho), fmt_f(st.m.values()[i]), fmt_f(lin)]);
        }
    }
    out.csv("trajectory.csv", "trajectory", &["tau", "rho", "m", "n0"], &rows)?;
    if cfg.wke.steady {
        let st = steady_state(params.eps, &wc, 1e-12)?;
        let rows: Vec<Vec<String>> = st
            .m
            .radii()
            .enumerate()
            .map(|(i, rho)| vec![fmt_f(rho), fmt_f(st.m.values()[i])])
            .collect();
        out.csv("steady.csv", "steady", &["rho", "m"], &rows)?;
    }
    Ok(())
}

/// Returns the names of failed checks, if any.
fn verify(cfg: &RunConfig, out: &mut OutputDir) -> Result<Option<String>, CliError> {
    let report = run_campaign(&cfg.verify, &cfg.profiles, cfg.seed)?;
    for rec in &report.records {
        let rows: Vec<Vec<String>> = rec
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.series.clone(),
                    fmt_f(r.x),
                    fmt_f(r.value),
                    r.reference.map_or(String::new(), fmt_f),
                    r.budget.map_or(String::new(), fmt_f),
                ]
            })
            .collect();
        out.csv(
            &format!("check_{}.csv", rec.name),
            "check",
            &["series", "x", "value", "reference", "budget"],
            &rows,
        )?;
    }
    out.json("report.json", "report", &report)?;
    let failed: Vec<&str> = report.records.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    for rec in &report.records {
        println!("{} {}", if rec.passed { "PASS" } else { "FAIL" }, rec.name);
    }
    Ok(if failed.is_empty() { None } else { Some(failed.join(", ")) })
}
