use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mingap_core::circle::{precision_warning, FixedPointAngle};
use mingap_core::dstat::{
    d_mean_mc, d_statistic, d_variance_fourier, d_variance_mc, Sampling, DEFAULT_EPSILON,
    DEFAULT_K_FACTOR,
};
use mingap_core::energy::{energy_scan, write_energy_csv};
use mingap_core::experiments::{
    gap_rows, run, run_config, ExperimentConfig, ExperimentKind, GridSpec, OutputConfig,
    OutputFormat, ResultTable, RowOptions,
};
use mingap_core::sequences::{write_sequence, SequenceSpec};
use mingap_core::window::{WindowKind, WindowSpec};
use mingap_core::{Error, Result};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "mingap", version, about = "Minimal gaps of fractional parts α·a(n) mod 1")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the first N terms of a sequence, one per line.
    Gen(GenArgs),
    /// Exact minimal gaps for sampled or given α.
    Mingap(MingapArgs),
    /// Exact additive energies along an N grid.
    Energy(EnergyArgs),
    /// The smoothed pair count D(N,M) at one α, or its sampled mean and variance.
    Dstat(DstatArgs),
    /// Run one of the built-in checks.
    Verify(VerifyArgs),
    /// Run a TOML experiment config.
    Scan(ScanArgs),
}

#[derive(Args)]
struct SeqArgs {
    /// monomial:d=2 | lacunary:q=2 | primes | squarefree | naturals | file:PATH
    #[arg(long)]
    sequence: SequenceSpec,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long = "N", conflicts_with = "n_grid")]
    n: Option<usize>,
    /// a,b,c or geom:start:stop:factor or bc:theorem1|corollary:k_max
    #[arg(long = "N-grid")]
    n_grid: Option<GridSpec>,
}

impl GridArgs {
    fn spec(&self) -> Result<GridSpec> {
        match (&self.n, &self.n_grid) {
            (Some(n), None) => Ok(GridSpec::List(vec![*n])),
            (None, Some(g)) => Ok(g.clone()),
            _ => Err(Error::Argument("give --N or --N-grid".into())),
        }
    }
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, default_value_t = 32)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Angle precision in bits; derived from the sequence when omitted.
    #[arg(long)]
    bits: Option<u32>,
}

#[derive(Args)]
struct OutArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

impl OutArgs {
    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    seq: SeqArgs,
    #[arg(long = "N")]
    n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MingapArgs {
    #[command(flatten)]
    seq: SeqArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    sampling: SampleArgs,
    /// A fixed angle `hexmantissa:bits` instead of sampled ones.
    #[arg(long)]
    alpha: Option<FixedPointAngle>,
    #[arg(long)]
    eta: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct EnergyArgs {
    #[command(flatten)]
    seq: SeqArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct DstatArgs {
    #[command(flatten)]
    seq: SeqArgs,
    #[arg(long = "N")]
    n: usize,
    #[arg(long = "M")]
    m: u64,
    #[arg(long, default_value = "triangle")]
    window: WindowKind,
    /// Evaluate at this angle (`hexmantissa:bits`) instead of sampling.
    #[arg(long)]
    alpha: Option<FixedPointAngle>,
    #[command(flatten)]
    sampling: SampleArgs,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Also evaluate the Fourier-side variance (N ≤ 64).
    #[arg(long)]
    fourier: bool,
    /// Fourier truncation; defaults to 200·M.
    #[arg(long)]
    k_max: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    experiment: ExperimentKind,
    #[command(flatten)]
    seq: SeqArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    sampling: SampleArgs,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value = "triangle")]
    window: WindowKind,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct ScanArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
}

fn print_json(value: &impl Serialize, out: Option<&PathBuf>) -> Result<()> {
    let mut w: Box<dyn Write> = match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    };
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn write_table(table: &ResultTable, out: &OutArgs) -> Result<()> {
    let w = out.writer()?;
    match out.format {
        OutputFormat::Csv => table.write_csv(w),
        OutputFormat::Json => table.write_json(w),
    }
}

fn gen(args: GenArgs) -> Result<()> {
    let seq = args.seq.sequence.generate(args.n)?;
    let mut w: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    write_sequence(&seq, args.n, &mut w)?;
    w.flush()?;
    Ok(())
}

fn mingap(args: MingapArgs) -> Result<()> {
    let spec = args.grid.spec()?;
    let Some(alpha) = args.alpha else {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Scan, args.seq.sequence, spec);
        cfg.eta = args.eta;
        cfg.alphas.samples = args.sampling.samples;
        cfg.alphas.seed = args.sampling.seed;
        cfg.alphas.bits = args.sampling.bits;
        let report = run(&cfg)?;
        for w in &report.outcome.summary.warnings {
            log::warn!("{w}");
        }
        return write_table(&report.outcome.table, &args.out);
    };
    let ns = spec.expand(args.eta)?;
    let n_max = *ns.last().expect("nonempty grid");
    let seq = args.seq.sequence.generate(n_max)?;
    if let Some(w) = precision_warning(&seq, n_max, alpha.bits()) {
        log::warn!("{w}");
    }
    let mut opts = RowOptions::plain();
    opts.eta = args.eta;
    let rows = gap_rows(&seq, &ns, &[alpha], &opts)?;
    write_table(&ResultTable::new(rows), &args.out)
}

fn energy(args: EnergyArgs) -> Result<()> {
    let ns = args.grid.spec()?.expand(None)?;
    let seq = args.seq.sequence.generate(*ns.last().expect("nonempty grid"))?;
    let rows = energy_scan(&seq, &ns)?;
    match args.out.format {
        OutputFormat::Csv => write_energy_csv(&rows, args.out.writer()?),
        OutputFormat::Json => print_json(&rows, args.out.out.as_ref()),
    }
}

fn dstat(args: DstatArgs) -> Result<()> {
    let seq = args.seq.sequence.generate(args.n)?;
    let w = WindowSpec::new(args.window);
    if let Some(alpha) = &args.alpha {
        let r = d_statistic(&seq, args.n, args.m, alpha, &w)?;
        return print_json(&r, args.out.as_ref());
    }
    let sampling = Sampling {
        samples: args.sampling.samples,
        seed: args.sampling.seed,
        bits: args.sampling.bits,
    };
    let mut report = if sampling.samples >= 100 {
        d_variance_mc(&seq, args.n, args.m, &w, sampling, args.epsilon)?
    } else {
        d_mean_mc(&seq, args.n, args.m, &w, sampling)?
    };
    if args.fourier {
        let k_max = args.k_max.unwrap_or(DEFAULT_K_FACTOR * args.m);
        let f = d_variance_fourier(&seq, args.n, args.m, &w, k_max)?;
        if let Some(msg) = &f.warning {
            log::warn!("{msg}");
            report.warnings.push(msg.clone());
        }
        report.fourier_variance = Some(f.value);
        report.truncation_k = Some(f.k_max);
        report.fourier_tail = Some(f.tail_bound);
    }
    print_json(&report, args.out.as_ref())
}

fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::new(args.experiment, args.seq.sequence, args.grid.spec()?);
    cfg.eta = args.eta;
    if let Some(eps) = args.epsilon {
        cfg.epsilon = eps;
    }
    cfg.window = args.window;
    cfg.alphas.samples = args.sampling.samples;
    cfg.alphas.seed = args.sampling.seed;
    cfg.alphas.bits = args.sampling.bits;
    cfg.output = args.out.out.clone().map(|path| OutputConfig {
        path,
        format: args.out.format,
    });
    let report = run(&cfg)?;
    print_json(&report.outcome.summary, None)?;
    Ok(ExitCode::from(report.exit_code() as u8))
}

fn scan(args: ScanArgs) -> Result<ExitCode> {
    let report = run_config(&args.config)?;
    print_json(&report.outcome.summary, None)?;
    for p in &report.artifacts {
        eprintln!("wrote {}", p.display());
    }
    Ok(ExitCode::from(report.exit_code() as u8))
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen(a) => gen(a).map(|_| ExitCode::SUCCESS),
        Command::Mingap(a) => mingap(a).map(|_| ExitCode::SUCCESS),
        Command::Energy(a) => energy(a).map(|_| ExitCode::SUCCESS),
        Command::Dstat(a) => dstat(a).map(|_| ExitCode::SUCCESS),
        Command::Verify(a) => verify(a),
        Command::Scan(a) => scan(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
