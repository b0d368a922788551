use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hts_rrm::harness::{run_experiment, summary_csv, write_outputs, ExperimentConfig};
use hts_rrm::link_budget::{linear_to_db, reference_snr, LinkModel};
use hts_rrm::traffic::ScenarioKind;

#[derive(Parser)]
#[command(
    name = "hts-rrm",
    version,
    about = "Multibeam satellite radio resource management simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment and write result files.
    Run(RunArgs),
    /// Print the calibrated carrier power and reference SNR.
    Calibrate(CommonArgs),
    /// Cross-check the solvers against brute-force references.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario kind (HT, WHS, RT), overriding the configuration.
    #[arg(long)]
    scenario: Option<ScenarioKind>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Output directory.
    #[arg(long, env = "HTS_RRM_OUT")]
    out: Option<PathBuf>,
    /// Comma-separated strategy names, e.g. `SR,BW-SR`.
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<String>>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct OracleArgs {
    /// Random instances per check.
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn load_config(common: &CommonArgs) -> hts_rrm::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(kind) = common.scenario {
        cfg.scenario.kind = kind;
    }
    Ok(cfg)
}

fn run(args: RunArgs) -> hts_rrm::Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(seed) = args.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(runs) = args.runs {
        cfg.experiment.runs = runs;
    }
    if let Some(out) = args.out {
        cfg.experiment.output_dir = out;
    }
    if let Some(list) = args.strategies {
        cfg.strategies.list = list;
    }
    cfg.validate()?;
    let results = run_experiment(&cfg, args.jobs)?;
    write_outputs(&results, &cfg.experiment.output_dir)?;
    print!("{}", summary_csv(&results.summary()));
    if results.all_failed() {
        return Err(hts_rrm::Error::Config(
            "every strategy failed in every run".into(),
        ));
    }
    Ok(())
}

fn calibrate(args: CommonArgs) -> hts_rrm::Result<()> {
    let cfg = load_config(&args)?;
    let scenario = cfg.scenario()?;
    let link = cfg.link_params(&scenario);
    let model = LinkModel::new(cfg.antenna(), link);
    let plan = cfg.carrier_plan();
    let design = hts_rrm::harness::config::design_capacity(&scenario);
    println!("scenario               {}", scenario.kind);
    println!("design capacity        {design:.3} Mbps per beam");
    println!("carrier bandwidth      {} MHz", plan.carrier_bandwidth());
    println!("carriers per beam      {}", plan.carriers_per_color);
    let reference = reference_snr(plan.carrier_bandwidth(), design, plan.carriers_per_color);
    println!(
        "reference snr          {reference:.4} ({:.3} dB)",
        linear_to_db(reference)
    );
    println!(
        "peak snr               {:.3} dB",
        linear_to_db(model.peak_snr())
    );
    println!("carrier power          {:.6} W", link.carrier_tx_power_w);
    println!(
        "snr at beam radius     {:.3} dB",
        linear_to_db(model.snr_at_distance(cfg.link.beam_radius_km))
    );
    Ok(())
}

fn oracle(args: OracleArgs) -> hts_rrm::Result<()> {
    let report = hts_rrm::oracles::run_all(args.instances, args.seed, args.jobs)?;
    print!("{report}");
    if report.all_passed() {
        Ok(())
    } else {
        Err(hts_rrm::Error::InvalidInput("oracle mismatch".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
