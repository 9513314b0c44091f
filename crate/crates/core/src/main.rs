use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sdmimo::error::{Error, Result};
use sdmimo::estimator::FrontEndKind;
use sdmimo::harness::diagnostics::{
    beampattern, codebook_entries, input_correlation, noise_spectrum, BeampatternSpec, InputModel,
    NoiseDiagSpec, BEAMPATTERN_COLUMNS,
};
use sdmimo::harness::output::{aggregate_csv, num, table_csv, trial_csv, trial_path, write_atomic};
use sdmimo::harness::{run_experiment, ExperimentConfig, Mode};

#[derive(Parser)]
#[command(
    name = "sdmimo",
    version,
    about = "Sigma-delta massive MIMO channel estimation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo channel estimation experiment.
    Simulate {
        #[arg(value_enum)]
        mode: ModeArg,
        #[command(flatten)]
        common: Common,
        /// Comma-separated front-ends (unquantized, onebit, sigmadelta);
        /// replaces the configured method list.
        #[arg(long, value_delimiter = ',')]
        front_end: Vec<String>,
        #[arg(long)]
        trials: Option<usize>,
        /// Also write every trial to `<out stem>.trials.csv`.
        #[arg(long)]
        per_trial: bool,
        /// Worker threads (0 = all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Converter and codebook diagnostics.
    Diagnose(DiagnoseArgs),
    /// Codebook utilities.
    Codebook {
        #[arg(value_enum)]
        action: CodebookAction,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(value_enum)]
    what: Diagnostic,
    #[command(flatten)]
    common: Common,
    /// Steering angle in degrees (noise diagnostics).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    steer: f64,
    #[arg(long, default_value_t = 10_000)]
    snapshots: usize,
    #[arg(long, value_enum, default_value_t = InputArg::Path)]
    input: InputArg,
    /// Codebook stage to sweep (beampattern).
    #[arg(long, default_value_t = 1)]
    stage: usize,
    /// Path arrival angle in degrees (beampattern).
    #[arg(long, default_value_t = 20.0, allow_hyphen_values = true)]
    aoa: f64,
    #[arg(long, default_value_t = 100)]
    realizations: usize,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// SNR in dB; a comma-separated list for `simulate`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Vec<f64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Su,
    Mu,
}

#[derive(Clone, Copy, ValueEnum)]
enum Diagnostic {
    NoiseSpectrum,
    InputCorr,
    Beampattern,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputArg {
    /// One random path from [-30°, 30°] plus receiver noise.
    Path,
    /// Independent complex Gaussian entries.
    White,
}

#[derive(Clone, Copy, ValueEnum)]
enum CodebookAction {
    Dump,
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if !common.snr.is_empty() {
        cfg.snr_db = common.snr.clone();
    }
    Ok(cfg)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn single_snr(cfg: &ExperimentConfig, common: &Common, fallback: f64) -> f64 {
    if common.snr.is_empty() {
        fallback
    } else {
        cfg.snr_db[0]
    }
}

fn simulate(
    mode: ModeArg,
    common: Common,
    front_end: Vec<String>,
    trials: Option<usize>,
    per_trial: bool,
    threads: Option<usize>,
) -> Result<()> {
    let mut cfg = load_config(&common)?;
    cfg.mode = match mode {
        ModeArg::Su => Mode::Su,
        ModeArg::Mu => Mode::Mu,
    };
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(t) = threads {
        cfg.threads = t;
    }
    if !front_end.is_empty() {
        let kinds = front_end
            .iter()
            .map(|s| FrontEndKind::parse(s))
            .collect::<Result<Vec<_>>>()?;
        cfg.set_front_ends(&kinds);
    }
    let out_path = common
        .out
        .clone()
        .or_else(|| cfg.output.clone().map(PathBuf::from));
    if per_trial && out_path.is_none() {
        return Err(Error::invalid("per_trial", "requires --out"));
    }
    let result = run_experiment(&cfg)?;
    let aggregate = aggregate_csv(&cfg, &result)?;
    if per_trial {
        let path = out_path.as_deref().expect("checked above");
        write_atomic(&trial_path(path), &trial_csv(&result)?)?;
    }
    emit(out_path.as_deref(), &aggregate)
}

fn diagnose(args: DiagnoseArgs) -> Result<()> {
    let DiagnoseArgs {
        what,
        common,
        steer,
        snapshots,
        input,
        stage,
        aoa,
        realizations,
    } = args;
    let cfg = load_config(&common)?;
    let geometry = cfg.geometry()?;
    let bytes = match what {
        Diagnostic::NoiseSpectrum | Diagnostic::InputCorr => {
            let spec = NoiseDiagSpec {
                n_bs: geometry.n_bs,
                d_bs: geometry.d_bs,
                snr_db: single_snr(&cfg, &common, 0.0),
                steering_deg: steer,
                snapshots,
                seed: cfg.seed,
                input: match input {
                    InputArg::Path => InputModel::SinglePath {
                        sector_deg: [-30.0, 30.0],
                    },
                    InputArg::White => InputModel::WhiteGaussian,
                },
            };
            let comments = vec![format!(
                "n_bs={} d_bs={} snr_db={} steering_deg={} snapshots={} seed={}",
                spec.n_bs,
                num(spec.d_bs),
                num(spec.snr_db),
                num(spec.steering_deg),
                spec.snapshots,
                spec.seed
            )];
            let fmt =
                |rows: Vec<[f64; 3]>| rows.into_iter().map(|r| r.map(num)).collect::<Vec<_>>();
            if matches!(what, Diagnostic::NoiseSpectrum) {
                let rows = noise_spectrum(&spec, &cfg.aoa_grid()?)?;
                table_csv(&comments, &["angle_deg", "sigmadelta", "onebit"], fmt(rows))?
            } else {
                let rows = input_correlation(&spec)?;
                table_csv(&comments, &["channel", "sigmadelta", "onebit"], fmt(rows))?
            }
        }
        Diagnostic::Beampattern => {
            let spec = BeampatternSpec {
                geometry,
                aod_grid_size: cfg.su.aod_grid_size,
                stage,
                aoa_deg: aoa,
                snr_db: single_snr(&cfg, &common, 10.0),
                t2: cfg.su.t2,
                realizations,
                seed: cfg.seed,
                ..Default::default()
            };
            let comments = vec![format!(
                "stage={} aoa_deg={} snr_db={} realizations={} fixed_clip={}",
                spec.stage,
                num(spec.aoa_deg),
                num(spec.snr_db),
                spec.realizations,
                num(spec.fixed_clip)
            )];
            let rows = beampattern(&spec)?;
            table_csv(
                &comments,
                &BEAMPATTERN_COLUMNS,
                rows.into_iter().map(|r| r.map(num)),
            )?
        }
    };
    emit(common.out.as_deref(), &bytes)
}

fn codebook(common: Common) -> Result<()> {
    let cfg = load_config(&common)?;
    let rows = codebook_entries(cfg.geometry.n_ue, cfg.su.aod_grid_size)?;
    let comments = vec![format!(
        "n_ue={} aod_grid_size={}",
        cfg.geometry.n_ue, cfg.su.aod_grid_size
    )];
    let bytes = table_csv(
        &comments,
        &["stage", "sector", "antenna", "re", "im"],
        rows.into_iter().map(|(s, i, a, re, im)| {
            [
                s.to_string(),
                i.to_string(),
                a.to_string(),
                num(re),
                num(im),
            ]
        }),
    )?;
    emit(common.out.as_deref(), &bytes)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            mode,
            common,
            front_end,
            trials,
            per_trial,
            threads,
        } => simulate(mode, common, front_end, trials, per_trial, threads),
        Command::Diagnose(args) => diagnose(args),
        Command::Codebook {
            action: CodebookAction::Dump,
            common,
        } => codebook(common),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
