use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tsn_sched::experiment::{compare, parse_list, run_scenario, write_deltas, Scenario};
use tsn_sched::workload::{generate, save_flows, WorkloadParams};
use tsn_sched::{Error, Topology};

#[derive(Parser)]
#[command(version, about = "Schedule mixed-criticality TSN flows and compare against no-wait baselines")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sweep frame counts and seeds over one or more algorithms.
    Run(RunArgs),
    /// Join result directories and print MCFS-2L minus each baseline.
    Compare {
        #[arg(required = false)]
        dirs: Vec<PathBuf>,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate one flow set and save it as JSON.
    Generate {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        critical_fraction: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON (or a manifest from an earlier run); flags override it.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    /// Frame counts: `50,100`, `50..500:50`.
    #[arg(long)]
    n: Option<String>,
    /// Seeds: `1..10`, `3,5`.
    #[arg(long)]
    seeds: Option<String>,
    /// Comma-separated: mcfs2l, nwtt, rnwtt.
    #[arg(long, visible_alias = "algo")]
    algos: Option<String>,
    #[arg(long)]
    topology: Option<PathBuf>,
    /// Fixed flow-set file instead of generated workloads.
    #[arg(long)]
    flows: Option<PathBuf>,
    #[arg(long)]
    critical_fraction: Option<f64>,
    #[arg(long)]
    step_ns: Option<u64>,
    #[arg(long)]
    aggregate_equal_periods_only: bool,
    #[arg(long)]
    normalize_per_link: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn scenario(a: &RunArgs) -> Result<Scenario, Error> {
    let mut sc = match &a.scenario {
        Some(p) => Scenario::load(p)?,
        None => Scenario::default(),
    };
    if let Some(v) = &a.name {
        sc.name = v.clone();
    }
    if let Some(v) = &a.n {
        sc.n_values = parse_list(v)?.into_iter().map(|n| n as usize).collect();
    }
    if let Some(v) = &a.seeds {
        sc.seeds = parse_list(v)?;
    }
    if let Some(v) = &a.algos {
        sc.algorithms = v.split(',').map(str::parse).collect::<Result<_, _>>()?;
    }
    if a.topology.is_some() {
        sc.topology = a.topology.clone();
    }
    if a.flows.is_some() {
        sc.flows = a.flows.clone();
    }
    if let Some(v) = a.critical_fraction {
        sc.workload.critical_fraction = v;
    }
    if let Some(v) = a.step_ns {
        sc.scheduler.step = v;
    }
    sc.aggregation.equal_periods_only |= a.aggregate_equal_periods_only;
    sc.normalize_per_link |= a.normalize_per_link;
    Ok(sc)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.cmd {
        Cmd::Run(a) => {
            let sc = scenario(&a)?;
            let res = run_scenario(&sc, &a.out)?;
            println!("algorithm,n_frames,runs,critical_acceptance,noncritical_acceptance,bandwidth");
            for r in &res.summary {
                println!(
                    "{},{},{},{:.4},{:.4},{:.4}",
                    r.algorithm, r.n_frames, r.runs, r.critical_acceptance_mean, r.noncritical_acceptance_mean, r.bandwidth_mean
                );
            }
            eprintln!("results in {}", res.dir.display());
        }
        Cmd::Compare { dirs, out } => {
            let rows = compare(&dirs)?;
            match out {
                Some(p) => {
                    let f = std::fs::File::create(&p).map_err(|source| Error::Io { path: p.clone(), source })?;
                    write_deltas(&rows, f)?;
                }
                None => write_deltas(&rows, std::io::stdout().lock())?,
            }
        }
        Cmd::Generate {
            n,
            seed,
            critical_fraction,
            out,
        } => {
            let mut p = WorkloadParams::with(n, seed);
            if let Some(cf) = critical_fraction {
                p.critical_fraction = cf;
            }
            save_flows(&generate(&p, &Topology::automotive_star())?, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Verification { run, violations }) => {
            eprintln!("error: {run}: {} violation(s)", violations.len());
            for v in &violations {
                eprintln!("  {v}");
            }
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let config = !matches!(e, Error::Json(_) | Error::Csv(_));
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}
