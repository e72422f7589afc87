use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use iblt_core::oracle::exact_failure_probability_with_guard;
use iblt_core::simulate::DEFAULT_TRIALS;
use iblt_core::{
    p2_asymptote, ratio_to_f64, union_bound, Error, KeyModel, SchemeKind, SimReport, Simulator, TrialConfig, ZTable,
};

#[derive(Debug, Parser)]
#[command(name = "iblt", version, about = "IBLT listing-failure analysis; every command writes CSV to stdout")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact stopping-matrix counts z(ell, n) over [1, lmax] x [1, nmax].
    Ztable(ZtableArgs),
    /// Union bound on the listing failure probability.
    Bound(BoundArgs),
    /// Monte Carlo estimate of the listing failure probability.
    Simulate(SimulateArgs),
    /// Exact failure probability by enumerating every state matrix.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
struct ZtableArgs {
    #[arg(long)]
    lmax: usize,
    #[arg(long)]
    nmax: usize,
    /// Text cache of computed values; read if present, rewritten when extended.
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BoundArgs {
    /// Cells per subtable.
    #[arg(long, conflicts_with = "m", required_unless_present = "m")]
    ell: Option<usize>,
    /// Total cells; must be a multiple of k.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Append a second table with one row per stopping-set size.
    #[arg(long)]
    breakdown: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Uniform,
    SsAvoiding,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum KeyModelArg {
    Iid,
    Distinct,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    /// Total cells; required unless --sweep is given.
    #[arg(long, required_unless_present = "sweep")]
    m: Option<usize>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Key and value width in bits.
    #[arg(long, default_value_t = 32)]
    b: u32,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SchemeArg::Uniform)]
    scheme: SchemeArg,
    /// Defaults to iid for uniform hashing and distinct for ss-avoiding.
    #[arg(long, value_enum)]
    key_model: Option<KeyModelArg>,
    /// Inclusive grid of m values, `start:stop:step`; overrides --m.
    #[arg(long, value_parser = parse_sweep)]
    sweep: Option<Sweep>,
    /// Worker threads; 0 uses every core. Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long)]
    ell: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Largest number of state matrices to enumerate.
    #[arg(long, default_value_t = iblt_core::oracle::DEFAULT_ORACLE_GUARD)]
    guard: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Sweep {
    start: usize,
    stop: usize,
    step: usize,
}

impl Sweep {
    fn values(&self) -> Vec<usize> {
        (self.start..=self.stop).step_by(self.step).collect()
    }
}

fn parse_sweep(s: &str) -> Result<Sweep, String> {
    let parts: Vec<_> = s.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        return Err("expected start:stop:step".into());
    };
    let num = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    let sweep = Sweep { start: num(start)?, stop: num(stop)?, step: num(step)? };
    if sweep.step == 0 || sweep.start > sweep.stop {
        return Err("need step > 0 and start <= stop".into());
    }
    Ok(sweep)
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::ResourceGuard { .. }) => 2,
            CliError::Core(Error::Internal(_)) => 3,
            CliError::Core(_) | CliError::Usage(_) | CliError::Io(_) => 1,
        }
    }
}

type CliResult = Result<(), CliError>;

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:?}")
}

pub fn run(cli: Cli, out: &mut impl Write) -> CliResult {
    match cli.command {
        Command::Ztable(a) => ztable(a, out),
        Command::Bound(a) => bound(a, out),
        Command::Simulate(a) => simulate(a, out),
        Command::Oracle(a) => oracle(a, out),
    }
}

fn ztable(a: ZtableArgs, out: &mut impl Write) -> CliResult {
    if a.lmax == 0 || a.nmax == 0 {
        return Err(CliError::Usage("--lmax and --nmax must be at least 1".into()));
    }
    let mut table = match &a.cache {
        Some(path) if path.exists() => ZTable::load(path)?,
        _ => ZTable::new(),
    };
    let before = table.extent();
    table.ensure(a.lmax, a.nmax);
    if let Some(path) = &a.cache {
        if table.extent() != before {
            table.save(path)?;
        }
    }
    writeln!(out, "ell,n,z")?;
    for ell in 1..=a.lmax {
        for n in 1..=a.nmax {
            let z = table.get(ell, n).ok_or_else(|| Error::Internal(format!("z({ell}, {n}) missing")))?;
            writeln!(out, "{ell},{n},{z}")?;
        }
    }
    Ok(())
}

fn split_cells(m: usize, k: usize) -> Result<usize, CliError> {
    if k == 0 || m % k != 0 {
        return Err(CliError::Usage(format!("m={m} is not a multiple of k={k}")));
    }
    Ok(m / k)
}

fn bound(a: BoundArgs, out: &mut impl Write) -> CliResult {
    let ell = match (a.ell, a.m) {
        (Some(ell), _) => ell,
        (None, Some(m)) => split_cells(m, a.k)?,
        (None, None) => return Err(CliError::Usage("give --ell or --m".into())),
    };
    let mut table = ZTable::new();
    let b = union_bound(&mut table, ell, a.n, a.k)?;
    let p2 = p2_asymptote(ell, a.n, a.k)?;
    writeln!(out, "ell,n,k,bound_raw,bound_clamped,p2")?;
    writeln!(
        out,
        "{ell},{},{},{},{},{}",
        a.n,
        a.k,
        fmt_float(b.total),
        fmt_float(b.total_clamped),
        fmt_float(p2)
    )?;
    if a.breakdown {
        writeln!(out)?;
        writeln!(out, "i,term,ln_term")?;
        for t in &b.terms {
            writeln!(out, "{},{},{}", t.i, fmt_float(t.value), fmt_float(t.ln_value))?;
        }
    }
    Ok(())
}

fn simulate(a: SimulateArgs, out: &mut impl Write) -> CliResult {
    let scheme = match a.scheme {
        SchemeArg::Uniform => SchemeKind::PartitionedUniform,
        SchemeArg::SsAvoiding => SchemeKind::SsAvoiding,
    };
    let key_model = match (a.key_model, scheme) {
        (Some(KeyModelArg::Iid), _) => KeyModel::IidUniform,
        (Some(KeyModelArg::Distinct), _) => KeyModel::DistinctUniform,
        (None, SchemeKind::SsAvoiding) => KeyModel::DistinctUniform,
        (None, SchemeKind::PartitionedUniform) => KeyModel::IidUniform,
    };
    let base = TrialConfig {
        n: a.n,
        m: a.m.unwrap_or(0),
        k: a.k,
        b: a.b,
        trials: a.trials,
        seed: a.seed,
        scheme,
        key_model,
    };
    let mut sim = Simulator::with_workers(a.workers);
    let reports = match &a.sweep {
        Some(sweep) => {
            let ms = sweep.values();
            // Validate the whole grid before spending time on trials.
            for &m in &ms {
                TrialConfig { m, ..base }.validate()?;
            }
            let mut reports = Vec::with_capacity(ms.len());
            for (j, m) in ms.iter().enumerate() {
                eprintln!("simulate: m={m} ({}/{})", j + 1, ms.len());
                reports.push(sim.sweep_point(&base, *m, j as u64)?);
            }
            reports
        }
        None => vec![sim.run_trials(&base)?],
    };
    writeln!(out, "m,ell,n,k,b,scheme,trials,failures,p_hat,ci_low,ci_high,bound_clamped,p2,seed")?;
    for r in &reports {
        write_report(out, r)?;
    }
    Ok(())
}

fn write_report(out: &mut impl Write, r: &SimReport) -> std::io::Result<()> {
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.m,
        r.ell,
        r.n,
        r.k,
        r.b,
        r.scheme,
        r.trials,
        r.failures,
        fmt_float(r.p_hat),
        fmt_float(r.ci_low),
        fmt_float(r.ci_high),
        fmt_float(r.bound_clamped),
        fmt_float(r.p2),
        r.seed
    )
}

fn oracle(a: OracleArgs, out: &mut impl Write) -> CliResult {
    let exact = exact_failure_probability_with_guard(a.ell, a.n, a.k, a.guard)?;
    let bound = union_bound(&mut ZTable::new(), a.ell, a.n, a.k)?;
    let exact_float = ratio_to_f64(&exact);
    writeln!(out, "ell,n,k,exact_num,exact_den,exact_float,bound_clamped")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{}",
        a.ell,
        a.n,
        a.k,
        exact.numer(),
        exact.denom(),
        fmt_float(exact_float),
        fmt_float(bound.total_clamped)
    )?;
    Ok(())
}
