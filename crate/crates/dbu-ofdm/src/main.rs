//! Command-line front end: training, PAPR/BER/BLER/sensing evaluation, and
//! the fixed-point datapath check. All evaluation artifacts are CSV files
//! carrying a `#` header with the config hash and seed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dbu_ofdm::config::{AppConfig, Task};
use dbu_ofdm::fixedpoint::{FixedCascade, FixedComplex, Q_INT, Q_U, Q_X};
use dbu_ofdm::grid::{build_grid, ResourceGrid};
use dbu_ofdm::modem::Modulation;
use dbu_ofdm::montecarlo::{
    ber_csv, ccdf_csv, comm_loss_eval, fmt_g6, run_ber_bler, run_papr_ccdf,
    run_sensing, sense_csv, sense_loss_eval, Waveform,
};
use dbu_ofdm::sensing::SearchGrid;
use dbu_ofdm::trainer::{train, train_with_grad, TrainConfig};
use dbu_ofdm::unitary::{build_udata_applier, load_model, save_model, HouseholderParams};
use dbu_ofdm::{DbuError, Result};

#[derive(Parser)]
#[command(name = "dbu-ofdm", about = "Block-unitary OFDM training and evaluation")]
struct Cli {
    /// Monte Carlo worker count (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a model for the papr, comm, or sense objective.
    Train(TrainArgs),
    /// PAPR CCDF of a model or baseline.
    EvalPapr(EvalArgs),
    /// Uncoded BER curve over the two-ray channel.
    EvalBer(EvalArgs),
    /// Frame BLER curve over the two-ray channel.
    EvalBler(EvalArgs),
    /// Range/velocity MSE curves.
    EvalSense(EvalArgs),
    /// Fixed-point vs float datapath report.
    FixedpointCheck(FixedpointArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Objective; overrides the config file.
    #[arg(long)]
    task: Option<Task>,
    #[arg(long)]
    config: PathBuf,
    /// Output model JSON; the loss trace lands next to it as *.loss.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    csv: PathBuf,
    /// Trained model JSON.
    #[arg(long, conflicts_with = "baseline")]
    model: Option<PathBuf>,
    /// ofdm | dfts-block | dfts-comb.
    #[arg(long)]
    baseline: Option<String>,
    /// Oversampling factor for PAPR evaluation.
    #[arg(long, default_value_t = 1)]
    oversample: usize,
    /// Override the evaluation modulation (qpsk | 16qam | 64qam).
    #[arg(long)]
    modulation: Option<Modulation>,
    /// Without --model: evaluate a randomly initialized model with B blocks.
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FixedpointArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Optional quantized-model JSON dump.
    #[arg(long)]
    dump: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::EvalPapr(args) => cmd_eval_papr(args),
        Command::EvalBer(args) | Command::EvalBler(args) => cmd_eval_ber(args),
        Command::EvalSense(args) => cmd_eval_sense(args),
        Command::FixedpointCheck(args) => cmd_fixedpoint(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                DbuError::Numeric(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn csv_header(cfg: &AppConfig, seed: u64) -> String {
    format!("# config_hash={:#018x} seed={}", cfg.hash(), seed)
}

/// Resolve the waveform under evaluation from --model / --baseline /
/// --blocks; defaults to the ofdm baseline.
fn select_waveform(args: &EvalArgs, cfg: &AppConfig, grid: &ResourceGrid) -> Result<Waveform> {
    if let Some(path) = &args.model {
        return Ok(Waveform::Dbu(load_model(path)?));
    }
    if let Some(b) = args.blocks {
        // Untrained reference point with the requested block count.
        return Ok(Waveform::Dbu(HouseholderParams::random_init(
            grid.n_data(),
            cfg.train.k_factors,
            b,
            args.seed.unwrap_or(cfg.eval.seed),
        )));
    }
    match args.baseline.as_deref().unwrap_or("ofdm") {
        "ofdm" => Ok(Waveform::Ofdm),
        "dfts-block" => Ok(Waveform::DftsBlock),
        "dfts-comb" => Ok(Waveform::DftsComb),
        other => Err(DbuError::Config(format!("unknown baseline '{other}'"))),
    }
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut cfg = AppConfig::load(&args.config)?;
    if let Some(task) = args.task {
        cfg.train.task = task;
    }
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    if let Some(steps) = args.steps {
        cfg.train.steps = steps;
    }
    let grid = build_grid(cfg.grid.clone())?;
    let spec = cfg.train.clone();
    let init = HouseholderParams::random_init(
        grid.n_data(),
        spec.k_factors,
        spec.blocks,
        spec.seed,
    );
    let tc = TrainConfig {
        steps: spec.steps,
        lr: spec.lr,
        fd_step: spec.fd_step,
        seed: spec.seed,
    };
    let search = SearchGrid::default_for(&grid.config);
    let result = match spec.task {
        Task::Papr => train_with_grad(init, &tc, |p, s| {
            dbu_ofdm::adjoint::papr_loss_and_grad(
                p,
                &grid,
                spec.modulation,
                spec.batch_frames,
                spec.gamma_tar_db,
                spec.hardness,
                s,
            )
        })?,
        Task::Comm => train(init, &tc, |p, s| {
            comm_loss_eval(p, &grid, spec.modulation, spec.batch_frames, spec.snr_db, s)
        })?,
        Task::Sense => train(init, &tc, |p, s| {
            sense_loss_eval(
                p,
                &grid,
                &search,
                spec.modulation,
                spec.batch_frames,
                spec.snr_db,
                spec.n_paths,
                s,
            )
        })?,
    };
    save_model(&result.params, &args.out)?;
    let mut csv = format!("{}\nstep,loss\n", csv_header(&cfg, spec.seed));
    for (i, l) in result.history.iter().enumerate() {
        csv.push_str(&format!("{i},{}\n", fmt_g6(*l)));
    }
    std::fs::write(args.out.with_extension("loss.csv"), csv)?;
    Ok(())
}

fn cmd_eval_papr(args: EvalArgs) -> Result<()> {
    let cfg = AppConfig::load(&args.config)?;
    let grid = build_grid(cfg.grid.clone())?;
    let wf = select_waveform(&args, &cfg, &grid)?;
    let seed = args.seed.unwrap_or(cfg.eval.seed);
    let modulation = args.modulation.unwrap_or(cfg.eval.modulation);
    let run = run_papr_ccdf(
        &wf,
        &grid,
        modulation,
        cfg.eval.papr_symbols,
        args.oversample,
        seed,
    )?;
    std::fs::write(&args.csv, ccdf_csv(&run, &csv_header(&cfg, seed)))?;
    Ok(())
}

fn cmd_eval_ber(args: EvalArgs) -> Result<()> {
    let cfg = AppConfig::load(&args.config)?;
    let grid = build_grid(cfg.grid.clone())?;
    let wf = select_waveform(&args, &cfg, &grid)?;
    let seed = args.seed.unwrap_or(cfg.eval.seed);
    let modulation = args.modulation.unwrap_or(cfg.eval.modulation);
    let points = run_ber_bler(
        &wf,
        &grid,
        modulation,
        &cfg.eval.snr_db_list,
        cfg.eval.max_blocks,
        cfg.eval.min_block_errors,
        cfg.eval.ls_pilots,
        seed,
    )?;
    std::fs::write(&args.csv, ber_csv(&points, &csv_header(&cfg, seed)))?;
    Ok(())
}

fn cmd_eval_sense(args: EvalArgs) -> Result<()> {
    let cfg = AppConfig::load(&args.config)?;
    let grid = build_grid(cfg.grid.clone())?;
    let wf = select_waveform(&args, &cfg, &grid)?;
    let seed = args.seed.unwrap_or(cfg.eval.seed);
    let modulation = args.modulation.unwrap_or(cfg.eval.modulation);
    let search = SearchGrid::default_for(&grid.config);
    let points = run_sensing(
        &wf,
        &grid,
        &search,
        modulation,
        &cfg.eval.snr_db_list,
        cfg.eval.sense_trials,
        cfg.eval.n_paths,
        seed,
    )?;
    std::fs::write(&args.csv, sense_csv(&points, &csv_header(&cfg, seed)))?;
    Ok(())
}

fn cmd_fixedpoint(args: FixedpointArgs) -> Result<()> {
    use dbu_ofdm::channel::complex_gaussian;
    use num_complex::Complex64;
    use rand::SeedableRng;

    let params = load_model(&args.model)?;
    let cascade = FixedCascade::new(&params, Q_U, Q_X, Q_INT)?;
    let applier = build_udata_applier(params.clone())?;
    let n = params.n_data();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let mut max_err = 0.0f64;
    let mut sum_err = 0.0f64;
    let mut samples = 0u64;
    let mut merged_resid = 0.0f64;
    for _ in 0..args.trials {
        let v: Vec<Complex64> = (0..n).map(|_| complex_gaussian(&mut rng)).collect();
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let x: Vec<Complex64> = v.iter().map(|c| c / norm).collect();
        let fixed = cascade.fixed_apply_f64(&x, false)?;
        let float = cascade.float_apply(&x, false)?;
        for (f, d) in fixed.iter().zip(&float) {
            let e = (f - d).norm();
            max_err = max_err.max(e);
            sum_err += e;
            samples += 1;
        }
        // Merged cascade vs the sequential-reflection applier.
        let mut seq = x;
        applier.forward(&mut seq)?;
        for (m, s) in float.iter().zip(&seq) {
            merged_resid = merged_resid.max((m - s).norm());
        }
    }
    println!("fixed-point check: model {}", args.model.display());
    println!(
        "  formats: u Q({},{}), x Q({},{}), intermediates Q({},{})",
        Q_U.total_bits,
        Q_U.frac_bits,
        Q_X.total_bits,
        Q_X.frac_bits,
        Q_INT.total_bits,
        Q_INT.frac_bits
    );
    println!("  trials: {}", args.trials);
    println!("  fixed-vs-float max error:  {}", fmt_g6(max_err));
    println!(
        "  fixed-vs-float mean error: {}",
        fmt_g6(sum_err / samples as f64)
    );
    println!("  merged-vs-sequential residual: {}", fmt_g6(merged_resid));
    if let Some(path) = &args.dump {
        let file = cascade.to_file();
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    }
    // Determinism spot check: same input twice, identical raw words.
    let x: Vec<FixedComplex> = (0..n)
        .map(|_| FixedComplex::quantize(complex_gaussian(&mut rng) * 0.3, Q_X))
        .collect();
    if cascade.fixed_apply(&x, false)? != cascade.fixed_apply(&x, false)? {
        return Err(DbuError::Numeric("fixed path not deterministic".into()));
    }
    Ok(())
}
