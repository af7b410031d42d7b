use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use nbs_airtime::adaptive::ChannelModel;
use nbs_airtime::presets::RAYLEIGH_SNR;
use nbs_airtime::{run_algorithm1, solve_subproblem, SolverOptions};
use nbs_airtime_cli::experiment::{run_slot_sweep, sig6, ExperimentOutput};
use nbs_airtime_cli::verify::{verify_scenario, VerifyOptions};
use nbs_airtime_cli::{emit_plotdata, emit_scenario, load_results, load_scenario, run_experiment, LoadedScenario};

/// Joint group-head selection and airtime allocation by Nash bargaining.
///
/// Log verbosity follows NBS_AIRTIME_LOG (error, warn, info, debug, trace).
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Output directory for result files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Solver residual tolerance.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tolerance: f64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and select the head.
    Solve {
        scenario: PathBuf,
        /// Solve only the sub-problem with this head (1-based).
        #[arg(long)]
        head: Option<usize>,
        /// Run the message-passing protocol instead of the centralized solver.
        #[arg(long)]
        algorithm1: bool,
    },
    /// Run the experiment block of a scenario file.
    Sweep { scenario: PathBuf },
    /// Compare adaptive and non-adaptive slotting over several seeds.
    Adaptive {
        scenario: PathBuf,
        /// Slot size in seconds.
        #[arg(long)]
        slot: f64,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
        /// Rayleigh SNR; defaults to the file's value or 30.
        #[arg(long, conflicts_with = "constant_channel")]
        snr: Option<f64>,
        /// Keep the file's capacities in every slot.
        #[arg(long)]
        constant_channel: bool,
    },
    /// Check solver optima against the brute-force and sampling oracles.
    Verify {
        scenario: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Grid step in seconds.
        #[arg(long, default_value_t = 0.05)]
        resolution: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Turn results.csv into a long-format series table.
    Plot {
        results: PathBuf,
        /// `<quantity>_vs_<sweep>`, e.g. airtime_vs_budget.
        #[arg(long)]
        kind: String,
    },
    /// Print the canonical form of a scenario file.
    Canonical { scenario: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NBS_AIRTIME_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let solver = SolverOptions { tolerance: cli.tolerance, ..SolverOptions::default() };
    solver.validate()?;
    match cli.command {
        Command::Solve { scenario, head, algorithm1 } => {
            let loaded = load(&scenario)?;
            solve(&loaded, head, algorithm1, &solver, cli.out.as_deref())
        }
        Command::Sweep { scenario } => {
            let loaded = load(&scenario)?;
            let out = cli
                .out
                .or_else(|| loaded.experiment.as_ref().and_then(|e| e.output_dir.clone()))
                .unwrap_or_else(|| PathBuf::from("results"));
            let result = run_experiment(&loaded, &solver)?;
            result.write_to(&out)?;
            print_summary(&result)?;
            println!("wrote {}", out.display());
            Ok(true)
        }
        Command::Adaptive { scenario, slot, seeds, first_seed, snr, constant_channel } => {
            if !(slot > 0.0) || seeds == 0 {
                bail!("--slot must be > 0 and --seeds >= 1");
            }
            let loaded = load(&scenario)?;
            let channel = if constant_channel {
                ChannelModel::Constant
            } else {
                let file_snr = loaded.experiment.as_ref().and_then(|e| e.snr);
                ChannelModel::Rayleigh { snr: snr.or(file_snr).unwrap_or(RAYLEIGH_SNR) }
            };
            channel.validate()?;
            let seeds: Vec<u64> = (first_seed..first_seed + seeds).collect();
            let result = run_slot_sweep(&loaded.scenario, &[slot], &seeds, &channel, &solver)?;
            if let Some(dir) = &cli.out {
                result.write_to(dir)?;
            }
            print_summary(&result)?;
            Ok(true)
        }
        Command::Verify { scenario, samples, resolution, seed } => {
            let loaded = load(&scenario)?;
            let opts = VerifyOptions { samples, resolution, seed, ..VerifyOptions::default() };
            let report = verify_scenario(&loaded.scenario, &solver, &opts)?;
            for c in &report.candidates {
                let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2e}"));
                let grid =
                    c.grid.as_ref().map_or("skipped".into(), |g| format!("gap {:.2e} <= {:.2e}", g.gap, g.bound));
                println!(
                    "{} head {}: {} kkt {} fairness {} pareto {} grid {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.head,
                    c.status,
                    fmt(c.kkt_residual),
                    fmt(c.fairness),
                    c.pareto_violations.map_or("-".into(), |p| p.to_string()),
                    grid
                );
            }
            println!(
                "{} centralized head {:?}, distributed head {:?}",
                if report.centralized_head == report.distributed_head { "PASS" } else { "FAIL" },
                report.centralized_head,
                report.distributed_head
            );
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("verify.json"), serde_json::to_string_pretty(&report)? + "\n")?;
            }
            Ok(report.passed)
        }
        Command::Plot { results, kind } => {
            let file = std::fs::File::open(&results).with_context(|| format!("opening {}", results.display()))?;
            let rows = load_results(file)?;
            let text = emit_plotdata(&rows, &kind)?;
            match &cli.out {
                Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
            Ok(true)
        }
        Command::Canonical { scenario } => {
            let loaded = load(&scenario)?;
            print!("{}", emit_scenario(&loaded.scenario, loaded.experiment.clone()));
            Ok(true)
        }
    }
}

fn load(path: &Path) -> Result<LoadedScenario> {
    Ok(load_scenario(path)?)
}

fn solve(
    loaded: &LoadedScenario,
    head: Option<usize>,
    algorithm1: bool,
    solver: &SolverOptions,
    out: Option<&Path>,
) -> Result<bool> {
    let s = &loaded.scenario;
    if let Some(h) = head {
        if !(1..=s.user_count()).contains(&h) {
            bail!("--head must lie in 1..={}", s.user_count());
        }
        let sol = solve_subproblem(s, h - 1, solver)?;
        println!(
            "head {h}: {} after {} Newton steps, residual {:.2e}",
            sol.status.as_str(),
            sol.iterations,
            sol.kkt_residual
        );
        for (m, it) in s.items.iter().enumerate() {
            println!("  item {} (user {}): airtime {} s", m + 1, it.owner + 1, sig6(sol.allocation.get(m)));
        }
        for (u, (util, f)) in sol.utilities.iter().zip(&sol.flows).enumerate() {
            println!("  user {}: utility {} energy {} J", u + 1, sig6(*util), sig6(f.energy));
        }
        println!("  plain product {} weighted {}", sig6(sol.products.plain), sig6(sol.products.weighted));
        return Ok(true);
    }
    if algorithm1 {
        let j = run_algorithm1(s, solver)?;
        for m in &j.messages {
            println!("user {} broadcast {:?}", m.from + 1, m.weighted_product);
        }
        println!("agreed head: user {}", j.head + 1);
        return Ok(true);
    }
    let plain = LoadedScenario { scenario: s.clone(), experiment: None };
    let result = run_experiment(&plain, solver)?;
    if let Some(dir) = out {
        result.write_to(dir)?;
    }
    for r in &result.rows {
        println!(
            "{} head {}: {} plain {} weighted {} utilities [{}]",
            if r.selected { "*" } else { " " },
            r.candidate_head + 1,
            r.status,
            sig6(r.plain_product),
            sig6(r.weighted_product),
            r.utilities.iter().map(|&u| sig6(u)).collect::<Vec<_>>().join(", ")
        );
    }
    Ok(result.summary.points[0].selected_head.is_some())
}

fn print_summary(result: &ExperimentOutput) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(&result.summary)?);
    Ok(())
}
