//! `simulate`: the main run plus the figure sweeps.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;
use uavgrid_core::forecaster::checkpoint;
use uavgrid_core::scenario::{load_solar_trace, Scenario, ScenarioConfig};
use uavgrid_core::sim::{
    write_csv_rows, DemandForecast, MetricsReport, Policy, RunSummary, SimOptions, Sweep, SweepConfig,
};

use crate::manifest::{read_text, write_json, Run};
use crate::{CliError, OutputArgs, SweepKind};

pub struct Args {
    pub config: Option<PathBuf>,
    pub sweeps: Option<PathBuf>,
    pub solar: Option<PathBuf>,
    pub seed: Option<u64>,
    pub no_uav: bool,
    pub sweep: Option<SweepKind>,
    pub model: Option<PathBuf>,
    pub trace: bool,
    pub output: OutputArgs,
    pub argv: Vec<String>,
}

#[derive(Serialize)]
struct ResolvedConfig<'a> {
    scenario: &'a ScenarioConfig,
    sweeps: &'a SweepConfig,
    policy: &'a str,
    solar: Option<&'a PathBuf>,
    model: Option<&'a PathBuf>,
}

#[derive(Serialize)]
struct Summary<'a> {
    run: &'a RunSummary,
    report: &'a MetricsReport,
}

pub fn load_scenario_config(path: Option<&PathBuf>) -> Result<ScenarioConfig> {
    match path {
        None => Ok(ScenarioConfig::standard()),
        Some(p) => {
            let text = read_text(p, "config")?;
            ScenarioConfig::from_json_str(&text).with_context(|| format!("config {}", p.display()))
        }
    }
}

pub fn build_scenario(cfg: ScenarioConfig, solar: Option<&PathBuf>) -> Result<Scenario> {
    let n = cfg.n_areas;
    let sc = Scenario::build(cfg)?;
    match solar {
        None => Ok(sc),
        Some(p) => {
            if !p.exists() {
                return Err(CliError::Input(format!("solar data {} does not exist", p.display())).into());
            }
            let traces = load_solar_trace(p, n)?;
            Ok(sc.with_solar_traces(&traces)?)
        }
    }
}

pub fn run(args: Args) -> Result<()> {
    let mut cfg = load_scenario_config(args.config.as_ref())?;
    if let Some(seed) = args.seed {
        cfg.rng_seed = seed;
    }
    let mut sweeps = match &args.sweeps {
        None => SweepConfig::default(),
        Some(p) => serde_json::from_str(&read_text(p, "sweep settings")?)
            .with_context(|| format!("sweep settings {}", p.display()))?,
    };
    if args.no_uav {
        cfg.n_uavs = 0;
        sweeps.fleet_sizes = vec![0];
    }
    let policy = if args.no_uav { Policy::NoUav } else { Policy::Greedy };
    let mut opts = SimOptions::new(policy);
    opts.record_trace = args.trace;
    if let Some(m) = &args.model {
        let f = checkpoint::load(m).map_err(|e| CliError::Artifact(format!("model {}: {e}", m.display())))?;
        opts.forecast = DemandForecast::Lstm(Box::new(f));
    }
    let scenario = build_scenario(cfg.clone(), args.solar.as_ref())?;
    let which: Vec<Sweep> = match args.sweep {
        None => Sweep::ALL.to_vec(),
        Some(SweepKind::ExtraUsers) => vec![Sweep::ExtraUsers],
        Some(SweepKind::Fleet) => vec![Sweep::Fleet],
        Some(SweepKind::Density) => vec![Sweep::Density],
    };

    let resolved = ResolvedConfig {
        scenario: &cfg,
        sweeps: &sweeps,
        policy: if args.no_uav { "no_uav" } else { "greedy" },
        solar: args.solar.as_ref(),
        model: args.model.as_ref(),
    };
    let run = Run::start(
        "simulate",
        args.argv,
        args.config.clone(),
        cfg.rng_seed,
        &resolved,
        &args.output.out,
        args.output.force,
    )?;

    let (sim, report) = MetricsReport::collect(&scenario, &opts, &sweeps, &which)?;
    report.write_outage_csv(&run.path("outage_per_week.csv"))?;
    if which.contains(&Sweep::ExtraUsers) {
        report.write_throughput_csv(&run.path("throughput_vs_extra_users.csv"))?;
    }
    if which.contains(&Sweep::Density) {
        report.write_density_csv(&run.path("coverage_vs_density.csv"))?;
    }
    if which.contains(&Sweep::Fleet) {
        report.write_fleet_csv(&run.path("mtbo_vs_fleet.csv"))?;
    }
    let ledger = sim.ledger.iter().map(|r| {
        vec![
            r.hour.to_string(),
            r.station.to_string(),
            r.battery_before_j.to_string(),
            r.harvest_j.to_string(),
            r.served_bs.to_string(),
            r.energy_per_load_j.to_string(),
            r.battery_after_j.to_string(),
            r.served_uav.to_string(),
            r.unserved.to_string(),
            u8::from(r.outage).to_string(),
        ]
    });
    write_csv_rows(
        &run.path("energy_ledger.csv"),
        &[
            "hour",
            "station",
            "battery_before_j",
            "harvest_j",
            "served_bs",
            "energy_per_load_j",
            "battery_after_j",
            "served_uav",
            "unserved",
            "outage",
        ],
        ledger,
    )?;
    if args.trace {
        let mut f = std::io::BufWriter::new(std::fs::File::create(run.path("trace.ndjson"))?);
        for rec in &sim.trace {
            serde_json::to_writer(&mut f, rec)?;
            f.write_all(b"\n")?;
        }
        f.flush()?;
    }
    write_json(
        &run.path("summary.json"),
        &Summary {
            run: &sim.summary,
            report: &report,
        },
    )?;
    let s = &sim.summary;
    println!(
        "{} station-hours, {} outage hours in {} events, mean time between outages {:.1} h, {} dispatches",
        s.horizon * s.stations,
        s.outage_hours,
        s.outage_events,
        s.mean_time_between_outages_h,
        s.dispatches
    );
    println!("results in {}", run.dir.display());
    run.finish()
}
