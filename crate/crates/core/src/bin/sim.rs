use std::path::PathBuf;
use std::process::ExitCode;

use bmcp::harness::{parse_initial, parse_variant, replay, run_experiment, suite_descriptor, ExperimentConfig, Overrides};
use bmcp::lattice::{InitialCondition, Params, Variant};
use bmcp::oracle::{build_generator, extinction_csv, mask_of};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "sim", version, about = "Boundary-modified contact process experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named suite.
    Run(RunArgs),
    /// Exact extinction probabilities on a closed segment.
    Oracle(OracleArgs),
    /// Re-run one trial of a manifest and check its digest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        trial: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    suite: String,
    /// JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: Flags,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Flags {
    #[arg(long)]
    lambda_i: Option<f64>,
    #[arg(long)]
    lambda_e: Option<f64>,
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    /// origin | set:0,2 | interval:A:B | halfline:DEPTH | stationary:BURN_IN
    #[arg(long, value_parser = parse_initial)]
    init: Option<InitialCondition>,
    #[arg(long)]
    t_max: Option<f64>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda_i: f64,
    #[arg(long)]
    lambda_e: Option<f64>,
    #[arg(long, value_parser = parse_variant, default_value = "boundary")]
    variant: Variant,
    /// Comma-separated times.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 5.0])]
    t: Vec<f64>,
    /// Initial set; every nonempty state when omitted.
    #[arg(long, value_parser = parse_initial)]
    init: Option<InitialCondition>,
    /// Also print expected extinction times.
    #[arg(long)]
    mean_time: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> bmcp::Result<i32> {
    match cli.command {
        Command::Run(a) => {
            let mut cfg = match &a.config {
                Some(p) => ExperimentConfig::from_json(&std::fs::read_to_string(p)?)?,
                None => suite_descriptor(&a.suite)?.config,
            };
            Overrides {
                lambda_i: a.flags.lambda_i,
                lambda_e: a.flags.lambda_e,
                variant: a.flags.variant,
                init: a.flags.init,
                t_max: a.flags.t_max,
                trials: a.trials,
                seed: a.seed,
                out: a.out,
                suite: Some(a.suite),
            }
            .apply(&mut cfg)?;
            let outcome = run_experiment(&cfg)?;
            let m = &outcome.manifest;
            println!(
                "{}: {} trials, {} invalid, {} artifacts, {:.1}s -> {}",
                cfg.name,
                m.invalid_census.total,
                m.invalid_census.invalid,
                m.artifacts.len(),
                m.wall_clock_seconds,
                outcome.manifest_path.display()
            );
            for n in &m.notes {
                eprintln!("note: {n}");
            }
            Ok(outcome.exit_code())
        }
        Command::Oracle(a) => {
            let params = Params::new(a.lambda_i, a.lambda_e.unwrap_or(a.lambda_i), a.variant)?;
            let model = build_generator(a.n, params)?;
            let states = match &a.init {
                None => Vec::new(),
                Some(init) => vec![mask_of(&init.finite_sites().ok_or_else(|| {
                    bmcp::Error::InvalidInitialCondition("oracle needs a finite initial set".into())
                })?)],
            };
            let mut text = extinction_csv(&model, &a.t, &states);
            if a.mean_time {
                let times = model.expected_extinction_time()?;
                text.push_str("\ninitial_state_bits,expected_extinction_time\n");
                for s in 1..model.state_count() {
                    text.push_str(&format!("{},{:.12}\n", bmcp::oracle::bits_string(s, a.n), times[s]));
                }
            }
            match a.out {
                Some(p) => std::fs::write(&p, text).map_err(|source| bmcp::Error::OutputUnwritable {
                    path: p.display().to_string(),
                    source,
                })?,
                None => print!("{text}"),
            }
            Ok(0)
        }
        Command::Replay { manifest, trial } => {
            let traj = replay(&manifest, trial)?;
            println!(
                "trial {trial}: digest verified, {} samples, {} events, extinction {:?}",
                traj.samples.len(),
                traj.event_count,
                traj.extinction_time
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
