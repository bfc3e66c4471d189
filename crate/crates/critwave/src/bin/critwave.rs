//! Experiment driver: evolve configured runs, execute verification suites,
//! and persist CSV/JSON/binary artifacts.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use critwave::config::RunConfig;
use critwave::diagnostics::EnergyBreakdown;
use critwave::report::{
    perform_conformal_check, perform_run, write_conformal_csv, write_record_bin, write_summary,
    write_timeseries, RunSummary,
};
use critwave::suites::{run_suite, SuiteResult, SUITE_NAMES};
use critwave::Result;

#[derive(Parser)]
#[command(
    name = "critwave",
    about = "Radial solver and verification harness for the 2D wave equation with exponential nonlinearity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Key = value run configuration file; defaults apply for missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides output.dir in the config and CRITWAVE_OUT.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Suites to verify, comma separated; empty means all of them.
    #[arg(long, global = true, value_delimiter = ',')]
    verify: Vec<String>,

    /// Sweep axis KEY=v1,v2,...; repeat the flag for a cartesian grid.
    #[arg(long, global = true)]
    sweep: Vec<String>,

    /// Worker pool size for sweeps.
    #[arg(long, global = true, default_value_t = 4)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the configured run and write all artifacts.
    Run,
    /// Execute verification suites; exit 0 only if every one passes.
    Verify,
    /// Energy accounting on the truncated conformal cone.
    ConformalCheck,
    /// Run with scattering-profile extraction at the configured horizons.
    Scatter,
    /// Cartesian sweep over the given axes, one directory per run.
    Sweep,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::parse(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.display().to_string();
    }
    if cfg.out_dir.is_empty() {
        cfg.out_dir = std::env::var("CRITWAVE_OUT").unwrap_or_else(|_| "out".into());
    }
    Ok(cfg)
}

fn empty_summary() -> RunSummary {
    RunSummary {
        initial_energy: EnergyBreakdown {
            kinetic: 0.0,
            gradient: 0.0,
            potential: 0.0,
            total: 0.0,
        },
        energy_drift: 0.0,
        ledger_total: 0.0,
        ledger_windows: Vec::new(),
        ledger_slope: None,
        monitor_final: 0.0,
        support_radius_final: 0.0,
        balance: None,
        cone: None,
        decay: Vec::new(),
        suites: Vec::new(),
    }
}

fn print_suite(result: &SuiteResult) {
    let verdict = if result.pass { "pass" } else { "FAIL" };
    println!("suite {}: {verdict}", result.name);
    for c in &result.checks {
        let mark = if c.pass { "ok  " } else { "FAIL" };
        println!(
            "  [{mark}] {}: {:.6e} {} {:.6e}",
            c.label, c.measured, c.op, c.threshold
        );
    }
}

fn do_run(cfg: &RunConfig, dir: &Path, with_record: bool) -> Result<bool> {
    std::fs::create_dir_all(dir)?;
    let mut out = perform_run(cfg)?;
    for name in &cfg.verify {
        out.summary.suites.push(run_suite(name)?);
    }
    write_timeseries(&dir.join("timeseries.csv"), &out.rows)?;
    if with_record {
        write_record_bin(&dir.join("record.bin"), &out.record)?;
    }
    let pass = out.summary.suites.iter().all(|s| s.pass);
    for s in &out.summary.suites {
        print_suite(s);
    }
    write_summary(&dir.join("summary.json"), &out.summary)?;
    println!(
        "run: E0 = {:.6}, drift = {:.3e}, ledger = {:.6e} -> {}",
        out.summary.initial_energy.total,
        out.summary.energy_drift,
        out.summary.ledger_total,
        dir.display()
    );
    Ok(pass)
}

fn do_verify(cfg: &RunConfig, dir: &Path, requested: &[String]) -> Result<bool> {
    std::fs::create_dir_all(dir)?;
    let names: Vec<String> = if !requested.is_empty() {
        requested.to_vec()
    } else if !cfg.verify.is_empty() {
        cfg.verify.clone()
    } else {
        SUITE_NAMES.iter().map(|s| s.to_string()).collect()
    };
    let mut summary = empty_summary();
    let mut all_pass = true;
    for name in &names {
        let result = run_suite(name)?;
        print_suite(&result);
        all_pass &= result.pass;
        summary.suites.push(result);
    }
    write_summary(&dir.join("summary.json"), &summary)?;
    Ok(all_pass)
}

fn do_conformal_check(dir: &Path) -> Result<bool> {
    std::fs::create_dir_all(dir)?;
    let (rows, balance, cone) = perform_conformal_check()?;
    write_conformal_csv(&dir.join("conformal.csv"), &rows)?;
    println!(
        "balance at T0 = {}: E = {:.6}, flux = {:.6}, remainder = {:.3e}, top energy = {:.6} -> {}",
        balance.t0,
        balance.e_t0,
        balance.flux,
        balance.pt_integral,
        balance.e_a,
        if balance.satisfied { "pass" } else { "FAIL" }
    );
    let ok = balance.satisfied;
    let mut summary = empty_summary();
    summary.balance = Some(balance);
    summary.cone = Some(cone);
    write_summary(&dir.join("summary.json"), &summary)?;
    Ok(ok)
}

fn parse_axis(raw: &str) -> Result<(String, Vec<String>)> {
    let (key, values) = raw.split_once('=').ok_or_else(|| {
        critwave::CritError::InvalidInput(format!("sweep axis needs KEY=v1,v2,..., got {raw:?}"))
    })?;
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
    if values.is_empty() || values.iter().any(|v| v.is_empty()) {
        return Err(critwave::CritError::InvalidInput(format!(
            "empty value in sweep axis {raw:?}"
        )));
    }
    Ok((key.trim().to_string(), values))
}

fn do_sweep(base: &RunConfig, dir: &Path, axes_raw: &[String], workers: usize) -> Result<bool> {
    if axes_raw.is_empty() {
        return Err(critwave::CritError::InvalidInput(
            "sweep needs at least one --sweep KEY=v1,v2 axis".into(),
        ));
    }
    let axes: Vec<(String, Vec<String>)> = axes_raw
        .iter()
        .map(|a| parse_axis(a))
        .collect::<Result<_>>()?;
    // cartesian product of value indices
    let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
    for (_, values) in &axes {
        combos = combos
            .iter()
            .flat_map(|c| {
                (0..values.len()).map(move |i| {
                    let mut c = c.clone();
                    c.push(i);
                    c
                })
            })
            .collect();
    }
    let mut jobs = Vec::new();
    for combo in &combos {
        let mut cfg = base.clone();
        let mut label = Vec::new();
        for ((key, values), &i) in axes.iter().zip(combo) {
            cfg.set(key, &values[i])?;
            label.push(format!("{key}={}", values[i]));
        }
        cfg.validate()?;
        jobs.push((cfg, dir.join(label.join("_"))));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| critwave::CritError::Config(format!("worker pool: {e}")))?;
    use rayon::prelude::*;
    let outcomes: Vec<(String, std::result::Result<bool, String>)> = pool.install(|| {
        jobs.par_iter()
            .map(|(cfg, run_dir)| {
                let name = run_dir.display().to_string();
                (
                    name,
                    do_run(cfg, run_dir, false).map_err(|e| e.to_string()),
                )
            })
            .collect()
    });
    let mut ok = true;
    for (name, outcome) in &outcomes {
        match outcome {
            Ok(pass) => {
                if !pass {
                    ok = false;
                }
                println!("sweep {name}: {}", if *pass { "pass" } else { "FAIL" });
            }
            Err(e) => {
                ok = false;
                println!("sweep {name}: error: {e}");
            }
        }
    }
    Ok(ok)
}

fn dispatch(cli: &Cli) -> Result<bool> {
    let cfg = load_config(cli)?;
    let dir = PathBuf::from(&cfg.out_dir);
    match cli.command {
        Command::Run => do_run(&cfg, &dir, true),
        Command::Verify => do_verify(&cfg, &dir, &cli.verify),
        Command::ConformalCheck => do_conformal_check(&dir),
        Command::Scatter => {
            if cfg.t_star.is_empty() {
                return Err(critwave::CritError::InvalidInput(
                    "scatter needs at least one scatter.t_star horizon in the config".into(),
                ));
            }
            do_run(&cfg, &dir, true)
        }
        Command::Sweep => do_sweep(&cfg, &dir, &cli.sweep, cli.workers),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
