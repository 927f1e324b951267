use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use dersizer::config::Config;
use dersizer::cost::{lcoe_vs_cf_curve, qfd_score};
use dersizer::planner::{
    scenario_label, sensitivity_sweep, write_scenario_table, PlanOutcome, Planner, SizingSolution,
    SweepRow,
};
use dersizer::reliability::{
    min_prm_for_lole, reliability_curve, write_curve_csv, AdequacyStudy, PrmOutcome,
};
use dersizer::Error;

const EXIT_OTHER: u8 = 1;
const EXIT_CONFIG: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;

/// Microgrid DER sizing: cost curves, technology scoring, reliability
/// curves, capacity planning and renewable-fraction sweeps.
#[derive(Debug, Parser)]
#[command(name = "dersizer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Levelized cost of energy against capacity factor per technology.
    Lcoe(RunArgs),
    /// Absolute targets of the technology scoring matrix.
    Qfd(RunArgs),
    /// LOLE and SAIFI over a reserve-margin grid, plus minimum margin per PLG.
    ReliabilityCurve(RunArgs),
    /// Size the fleet at the configured renewable fraction.
    Plan(RunArgs),
    /// Plan once per counted renewable fraction.
    Sweep(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML configuration file. Built-in defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads. Results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Print progress to stderr.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

enum Failure {
    Config(Error),
    Infeasible,
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig { .. }
            | Error::ConfigParse { .. }
            | Error::SeriesFormat { .. } => Failure::Config(e),
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Infeasible) => {
            eprintln!("error: no feasible design found; the least-violating candidate was written");
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_OTHER)
        }
    }
}

type Verb = fn(&Config, &Path, bool) -> Result<(), Failure>;

fn run(command: Command) -> Result<(), Failure> {
    let (args, verb): (&RunArgs, Verb) = match &command {
        Command::Lcoe(a) => (a, run_lcoe),
        Command::Qfd(a) => (a, run_qfd),
        Command::ReliabilityCurve(a) => (a, run_reliability_curve),
        Command::Plan(a) => (a, run_plan),
        Command::Sweep(a) => (a, run_sweep),
    };
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Other(e.to_string()))?;
    }
    let mut config = match &args.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("config.toml"), config.to_toml_string()?)?;
    verb(&config, &args.out, args.verbose > 0)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn run_lcoe(config: &Config, out: &Path, _verbose: bool) -> Result<(), Failure> {
    let costs = &config.costs;
    let eff = costs.genset_efficiency;
    let techs = [
        ("pv", &costs.pv, 1.0),
        ("wt", &costs.wt, 1.0),
        ("biomass", &costs.biomass, eff),
        ("natural_gas", &costs.natural_gas, eff),
    ];
    let mut wtr = csv::Writer::from_writer(create(out, "lcoe.csv")?);
    wtr.write_record(["technology", "capacity_factor", "lcoe"])
        .map_err(Error::from)?;
    for (name, params, eta) in techs {
        for (cf, value) in
            lcoe_vs_cf_curve(params, config.lcoe.rated_kw, eta, &config.lcoe.cf_grid)?
        {
            wtr.write_record([name.to_string(), cf.to_string(), value.to_string()])
                .map_err(Error::from)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

fn run_qfd(config: &Config, out: &Path, _verbose: bool) -> Result<(), Failure> {
    let scores = qfd_score(&config.qfd)?;
    let mut wtr = csv::Writer::from_writer(create(out, "qfd.csv")?);
    wtr.write_record(["technology", "absolute_target"])
        .map_err(Error::from)?;
    for (name, score) in &scores {
        wtr.write_record([name.clone(), score.to_string()])
            .map_err(Error::from)?;
    }
    wtr.flush()?;
    Ok(())
}

fn run_reliability_curve(config: &Config, out: &Path, verbose: bool) -> Result<(), Failure> {
    let planner = Planner::new(config.planner_config()?)?;
    let study = AdequacyStudy::new(
        Arc::clone(planner.bank()),
        planner.planning_net_load().peak(),
        config.forced_outage.genset,
    )?;

    let mut points = Vec::new();
    for &plg in &config.reliability_curve.plg_grid {
        if verbose {
            eprintln!("reliability curve at plg {plg}");
        }
        points.extend(reliability_curve(
            &study,
            &config.reliability_curve.prm_grid,
            plg,
        )?);
    }
    write_curve_csv(&points, create(out, "reliability_curve.csv")?)?;

    let mut wtr = csv::Writer::from_writer(create(out, "min_prm_vs_plg.csv")?);
    wtr.write_record(["plg", "min_prm", "lole", "lole_hw", "reachable"])
        .map_err(Error::from)?;
    for &plg in &config.reliability_curve.plg_grid {
        let outcome = min_prm_for_lole(
            &study,
            config.planner.lole_threshold,
            plg,
            &config.prm_search,
        )?;
        let (prm, lole, hw, reachable) = match outcome {
            PrmOutcome::Found {
                prm,
                lole,
                lole_half_width,
            } => (prm, lole, lole_half_width, true),
            PrmOutcome::Unreachable {
                max_prm,
                lole,
                lole_half_width,
            } => (max_prm, lole, lole_half_width, false),
        };
        wtr.write_record([
            plg.to_string(),
            prm.to_string(),
            lole.to_string(),
            hw.to_string(),
            reachable.to_string(),
        ])
        .map_err(Error::from)?;
    }
    wtr.flush()?;
    Ok(())
}

fn run_plan(config: &Config, out: &Path, verbose: bool) -> Result<(), Failure> {
    let planner = Planner::new(config.planner_config()?)?;
    if verbose {
        eprintln!(
            "planning over {} rounds",
            planner.largest_ng_schedule().len()
        );
    }
    let outcome = planner.run()?;
    write_json(out, "result.json", &outcome)?;
    let label = scenario_label(config.planner.counted_renewable_fraction);
    write_scenario_table(&[(label, &outcome.solution)], create(out, "scenarios.csv")?)?;
    write_traces(&outcome, &out.join("pso_traces"))?;
    write_candidates(&outcome, create(out, "candidates.csv")?)?;
    if outcome.solution.feasible {
        Ok(())
    } else {
        Err(Failure::Infeasible)
    }
}

fn run_sweep(config: &Config, out: &Path, verbose: bool) -> Result<(), Failure> {
    let fractions = &config.planner.sweep_fractions;
    if verbose {
        eprintln!("sweeping {} fractions", fractions.len());
    }
    let rows = sensitivity_sweep(&config.planner_config()?, fractions)?;
    write_json(out, "sweep.json", &rows)?;
    let labelled: Vec<(String, &SizingSolution)> = rows
        .iter()
        .map(|r| (scenario_label(r.fraction), &r.solution))
        .collect();
    write_scenario_table(&labelled, create(out, "scenarios.csv")?)?;
    write_sensitivity(&rows, create(out, "sensitivity.csv")?)?;
    if rows.iter().all(|r| r.solution.feasible) {
        Ok(())
    } else {
        Err(Failure::Infeasible)
    }
}

fn write_json<T: serde::Serialize>(out: &Path, name: &str, value: &T) -> Result<(), Failure> {
    let mut w = create(out, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// One `iteration,best_objective` file per outer round.
fn write_traces(outcome: &PlanOutcome, dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    for r in &outcome.rounds {
        let mut wtr = csv::Writer::from_writer(create(dir, &format!("round_{:03}.csv", r.round))?);
        wtr.write_record(["iteration", "best_objective"])
            .map_err(Error::from)?;
        for (i, v) in r.convergence_trace.iter().enumerate() {
            wtr.write_record([i.to_string(), v.to_string()])
                .map_err(Error::from)?;
        }
        wtr.flush()?;
    }
    Ok(())
}

fn write_candidates<W: Write>(outcome: &PlanOutcome, writer: W) -> Result<(), Failure> {
    let mut wtr = csv::Writer::from_writer(writer);
    for c in outcome.rounds.iter().flat_map(|r| &r.candidates) {
        wtr.serialize(c).map_err(Error::from)?;
    }
    wtr.flush()?;
    Ok(())
}

/// `fraction,annualized_cost,genset_total_mw`.
fn write_sensitivity<W: Write>(rows: &[SweepRow], writer: W) -> Result<(), Failure> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["fraction", "annualized_cost", "genset_total_mw"])
        .map_err(Error::from)?;
    for r in rows {
        wtr.write_record([
            r.fraction.to_string(),
            r.solution.total_annualized_cost.to_string(),
            (r.solution.fleet.genset_total_nominal_kw / 1000.0).to_string(),
        ])
        .map_err(Error::from)?;
    }
    wtr.flush()?;
    Ok(())
}
