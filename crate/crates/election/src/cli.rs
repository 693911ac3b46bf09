//! Command-line front end.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use election_core::asymptotics::{big_f, residual_exponent, AsymptoticModel, OscillationConfig};
use election_core::chain::DEFAULT_MAX_STEPS;
use election_core::exact::{exact_cdf_dp, CdfTable};
use election_core::intervals::{cdf_exact, poisson_cdf, MAX_LEVEL};
use election_core::montecarlo::{mc_conjecture, mc_lemma_check, mc_mean_cost_via_tau, mc_protocol_mean, McRun};
use election_core::protocol::{run_election, ElectionStatus, RandomCoins, ScriptedCoins, DEFAULT_MAX_ROUNDS};
use election_core::rng::trial_rng;
use election_core::{Error, SplitParams};

use crate::cache::MeanCache;
use crate::crossval::{self, CrossvalConfig, CONJECTURE_CAVEAT};
use crate::executor::Rayon;
use crate::grid::{parse_int_grid, parse_real_grid, GridError};
use crate::table::{Cell, Format, Meta, Table};
use crate::trace::{trace_table, TraceRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_CROSSVAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(Error),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("{0} acceptance criteria failed")]
    Crossval(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numerical(_) | CliError::Io(_) => EXIT_NUMERICAL,
            CliError::Crossval(_) => EXIT_CROSSVAL,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidProbability(_)
            | Error::InvalidArgument(_)
            | Error::LevelTooDeep { .. }
            | Error::ScriptExhausted { .. }
            | Error::ScriptLength { .. } => CliError::Usage(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "election", version, about = "Biased leader election on a multiple access channel: exact values, asymptotics and simulation")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Probability that a candidate flips 1.
    #[arg(long, global = true, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct Sizes {
    /// Number of stations.
    #[arg(long)]
    pub n: Option<u64>,
    /// Grid of station counts: `a:b:step`, `a:b:xratio` or a comma list.
    #[arg(long = "n-grid")]
    pub n_grid: Option<String>,
}

impl Sizes {
    fn values(&self, default: Option<&str>) -> Result<Vec<u64>, CliError> {
        match (&self.n, &self.n_grid, default) {
            (Some(_), Some(_), _) => Err(CliError::Usage("give either --n or --n-grid, not both".into())),
            (Some(n), None, _) => Ok(vec![*n]),
            (None, Some(g), _) => Ok(parse_int_grid(g)?),
            (None, None, Some(d)) => Ok(parse_int_grid(d)?),
            (None, None, None) => Err(CliError::Usage("missing --n or --n-grid".into())),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the protocol: replay a flip script, print one trace, or estimate E(H_n).
    Simulate {
        #[command(flatten)]
        sizes: Sizes,
        /// Comma-separated flips per round, e.g. `1110,000,1000`.
        #[arg(long)]
        script: Option<String>,
        /// Print a single election trace instead of an estimate.
        #[arg(long)]
        trace: bool,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        /// Cap on coin-flip rounds per election.
        #[arg(long = "max-steps", default_value_t = DEFAULT_MAX_ROUNDS)]
        max_steps: u64,
    },
    /// Mean cost from the recurrence, optionally with P(H_n <= k) columns.
    Exact {
        #[command(flatten)]
        sizes: Sizes,
        /// Add CDF columns for k = 0..=K.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Distribution of the cost from the interval decomposition.
    Dist {
        #[arg(long)]
        n: usize,
        /// Largest level k.
        #[arg(long)]
        k: u32,
        /// Poisson population mean for the Poisson CDF column (default: n).
        #[arg(long)]
        x: Option<f64>,
    },
    /// Asymptotic decomposition of E(H_n), or F over one period.
    Asymptotic {
        #[command(flatten)]
        sizes: Sizes,
        /// Emit F(z) at this many points of [0, 1) instead.
        #[arg(long = "f-curve")]
        f_curve: Option<usize>,
    },
    /// Hitting-time estimators: E(H_n) via tau, or the Lemma check at (x, y).
    Mc {
        #[command(flatten)]
        sizes: Sizes,
        #[arg(long)]
        x: Option<f64>,
        #[arg(long)]
        y: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long = "max-steps", default_value_t = DEFAULT_MAX_STEPS)]
        max_steps: u64,
    },
    /// Exponential moment E(delta^(-2 tau(x,x))) and E(tau(x,x)) over a grid of x.
    Conjecture {
        #[arg(long = "x-grid", default_value = "0.05:0.95:0.05")]
        x_grid: String,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long = "max-steps", default_value_t = DEFAULT_MAX_STEPS)]
        max_steps: u64,
    },
    /// Run the acceptance checks and print a pass/fail matrix.
    Crossval {
        /// Comma-separated criterion numbers (default: all).
        #[arg(long)]
        only: Option<String>,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Exact { .. } => "exact",
            Command::Dist { .. } => "dist",
            Command::Asymptotic { .. } => "asymptotic",
            Command::Mc { .. } => "mc",
            Command::Conjecture { .. } => "conjecture",
            Command::Crossval { .. } => "crossval",
        }
    }

    fn is_random(&self) -> bool {
        matches!(
            self,
            Command::Simulate { .. } | Command::Mc { .. } | Command::Conjecture { .. } | Command::Crossval { .. }
        )
    }
}

/// What a command produced.
enum Output {
    Table(Table),
    Trace(TraceRecord, Table),
    Text(String),
}

fn positive(trials: u64) -> Result<u64, CliError> {
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    Ok(trials)
}

struct Ctx<'a> {
    common: &'a Common,
    params: SplitParams,
    meta: Meta,
    warn: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn warn_truncated(&mut self, what: &str, count: u64) -> io::Result<()> {
        if count > 0 {
            writeln!(self.warn, "warning: {what}: {count} trials hit the step cap and were excluded")?;
        }
        Ok(())
    }
}

fn simulate(
    ctx: &mut Ctx<'_>,
    sizes: &Sizes,
    script: Option<&str>,
    trace: bool,
    trials: u64,
    max_rounds: u64,
) -> Result<Output, CliError> {
    if script.is_some() || trace {
        let n = sizes.n.ok_or_else(|| CliError::Usage("a trace needs --n".into()))?;
        let n = u32::try_from(n).map_err(|_| CliError::Usage("--n too large for a trace".into()))?;
        let t = match script {
            Some(s) => run_election(n, &ctx.params, &mut ScriptedCoins::parse(s)?, max_rounds)?,
            None => {
                let mut rng = trial_rng(ctx.common.seed, 0);
                run_election(n, &ctx.params, &mut RandomCoins(&mut rng), max_rounds)?
            }
        };
        if t.status == ElectionStatus::Truncated {
            writeln!(ctx.warn, "warning: election truncated after {max_rounds} rounds")?;
        }
        return Ok(Output::Trace(TraceRecord::new(&t, ctx.meta.clone()), trace_table(&t, ctx.meta.clone())));
    }
    let trials = positive(trials)?;
    let mut table = Table::new(ctx.meta.clone(), &["n", "mean", "stderr", "trials", "truncated"]);
    for n in sizes.values(None)? {
        let n32 = u32::try_from(n).map_err(|_| CliError::Usage("--n too large".into()))?;
        let e = mc_protocol_mean(n32, &ctx.params, trials, ctx.common.seed, max_rounds, &Rayon)?;
        ctx.warn_truncated(&format!("n={n}"), e.truncated_count)?;
        table.push(vec![n.into(), e.value.into(), e.stderr.into(), e.trials.into(), e.truncated_count.into()]);
    }
    Ok(Output::Table(table))
}

fn exact(ctx: &mut Ctx<'_>, sizes: &Sizes, k: Option<usize>, cache: &MeanCache) -> Result<Output, CliError> {
    let ns = sizes.values(None)?;
    let max_n = *ns.iter().max().unwrap() as usize;
    let means = cache.get(max_n.max(1), &ctx.params)?;
    let mut columns = vec!["n".to_string(), "mean".to_string()];
    let cdf = k.map(|k| {
        columns.extend((0..=k).map(|j| format!("cdf_k{j}")));
        CdfTable::build(max_n.max(1), k, &ctx.params)
    });
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = Table::new(ctx.meta.clone(), &cols);
    for n in ns {
        let mut row: Vec<Cell> = vec![n.into(), means.get(n as usize).into()];
        if let (Some(k), Some(c)) = (k, &cdf) {
            // Rows past a saturated table's last level are 1 to within 1e-15.
            row.extend((0..=k).map(|j| Cell::from(c.cdf(n as usize, j).unwrap_or(1.0))));
        }
        table.push(row);
    }
    Ok(Output::Table(table))
}

fn dist(ctx: &mut Ctx<'_>, n: usize, k: u32, x: Option<f64>) -> Result<Output, CliError> {
    if n < 2 {
        return Err(CliError::Usage("dist needs --n >= 2".into()));
    }
    if k > MAX_LEVEL {
        return Err(CliError::Usage(format!(
            "refusing --k {k}: the interval decomposition is capped at level {MAX_LEVEL} (2^{MAX_LEVEL} intervals)"
        )));
    }
    let x = x.unwrap_or(n as f64);
    let mut table = Table::new(ctx.meta.clone(), &["k", "cdf_exact", "cdf_dp", "poisson_cdf"]);
    for j in 0..=k {
        table.push(vec![
            j.into(),
            cdf_exact(n, j, &ctx.params)?.into(),
            exact_cdf_dp(n, j as usize, &ctx.params).into(),
            poisson_cdf(x, j, &ctx.params)?.into(),
        ]);
    }
    table.note(format!("n={n} poisson_x={x}"));
    Ok(Output::Table(table))
}

/// Largest `n` for which the `exact` column is filled.
pub const ASYMPTOTIC_EXACT_CAP: u64 = 20_000;

fn asymptotic(ctx: &mut Ctx<'_>, sizes: &Sizes, f_curve: Option<usize>, cache: &MeanCache) -> Result<Output, CliError> {
    let qc = OscillationConfig::default();
    if let Some(points) = f_curve {
        if points == 0 {
            return Err(CliError::Usage("--f-curve needs at least one point".into()));
        }
        let mut table = Table::new(ctx.meta.clone(), &["z", "F"]);
        for i in 0..points {
            let z = i as f64 / points as f64;
            table.push(vec![z.into(), big_f(z, &ctx.params, &qc)?.into()]);
        }
        return Ok(Output::Table(table));
    }
    let ns = sizes.values(Some("2:4096:x2"))?;
    let beta = residual_exponent(&ctx.params);
    let model = AsymptoticModel::new(ctx.params, qc);
    let max_exact = ns.iter().copied().filter(|&n| n <= ASYMPTOTIC_EXACT_CAP).max();
    let means = max_exact.map(|m| cache.get(m as usize, &ctx.params)).transpose()?;
    let mut table = Table::new(
        ctx.meta.clone(),
        &["n", "leading", "constant", "oscillation", "predicted", "exact", "residual", "residual_scaled"],
    );
    for n in ns {
        let d = model.decompose(n, means.as_deref())?;
        table.push(vec![
            n.into(),
            d.leading.into(),
            d.constant.into(),
            d.oscillation.into(),
            d.predicted.into(),
            d.exact.into(),
            d.residual.into(),
            d.scaled_residual(beta).into(),
        ]);
    }
    table.note(format!("beta={beta}"));
    Ok(Output::Table(table))
}

fn mc(
    ctx: &mut Ctx<'_>,
    sizes: &Sizes,
    xy: (Option<f64>, Option<f64>),
    trials: u64,
    max_steps: u64,
    cache: &MeanCache,
) -> Result<Output, CliError> {
    let run = McRun::new(positive(trials)?, ctx.common.seed).with_max_steps(max_steps);
    match xy {
        (Some(x), Some(y)) => {
            let c = mc_lemma_check(x, y, &ctx.params, &run, &Rayon)?;
            ctx.warn_truncated("lemma", c.difference.truncated_count)?;
            let mut table = Table::new(
                ctx.meta.clone(),
                &[
                    "x", "y", "omega", "first", "second", "lhs", "lhs_stderr", "rhs", "rhs_stderr", "difference",
                    "difference_stderr", "paired_variance", "independent_variance", "trials", "truncated",
                ],
            );
            table.push(vec![
                x.into(),
                y.into(),
                c.terms.omega.into(),
                c.terms.first.into(),
                c.terms.second.into(),
                c.lhs.value.into(),
                c.lhs.stderr.into(),
                c.rhs.value.into(),
                c.rhs.stderr.into(),
                c.difference.value.into(),
                c.difference.stderr.into(),
                c.paired_variance.into(),
                c.independent_variance.into(),
                c.lhs.trials.into(),
                c.lhs.truncated_count.into(),
            ]);
            Ok(Output::Table(table))
        }
        (None, None) => {
            let ns = sizes.values(None)?;
            let max_n = *ns.iter().max().unwrap() as usize;
            let means = cache.get(max_n.max(1), &ctx.params)?;
            let mut table = Table::new(ctx.meta.clone(), &["n", "mean", "stderr", "exact", "trials", "truncated"]);
            for n in ns {
                let e = mc_mean_cost_via_tau(n, &ctx.params, &run, &Rayon)?;
                ctx.warn_truncated(&format!("n={n}"), e.truncated_count)?;
                table.push(vec![
                    n.into(),
                    e.value.into(),
                    e.stderr.into(),
                    means.get(n as usize).into(),
                    e.trials.into(),
                    e.truncated_count.into(),
                ]);
            }
            Ok(Output::Table(table))
        }
        _ => Err(CliError::Usage("the Lemma check needs both --x and --y".into())),
    }
}

fn conjecture(ctx: &mut Ctx<'_>, x_grid: &str, trials: u64, max_steps: u64) -> Result<Output, CliError> {
    let grid = parse_real_grid(x_grid)?;
    let run = McRun::new(positive(trials)?, ctx.common.seed).with_max_steps(max_steps);
    let pts = mc_conjecture(&grid, &ctx.params, &run, &Rayon)?;
    let mut table = Table::new(
        ctx.meta.clone(),
        &[
            "x", "log10_moment", "moment_stderr_log10", "mean_tau", "tau_stderr", "truncated", "trials", "seed",
            "max_tau", "top1_share", "tail_dominated",
        ],
    );
    for pt in &pts {
        ctx.warn_truncated(&format!("x={}", pt.x), pt.truncated())?;
        table.push(vec![
            pt.x.into(),
            pt.log10_moment.into(),
            pt.log10_moment_stderr.into(),
            pt.mean_tau.value.into(),
            pt.mean_tau.stderr.into(),
            pt.truncated().into(),
            pt.mean_tau.trials.into(),
            pt.mean_tau.seed.into(),
            pt.max_tau.into(),
            pt.top_share.into(),
            pt.tail_dominated().into(),
        ]);
    }
    table.note(CONJECTURE_CAVEAT);
    Ok(Output::Table(table))
}

fn parse_ids(only: Option<&str>) -> Result<Vec<u8>, CliError> {
    let Some(s) = only else {
        return Ok(crossval::CRITERIA.to_vec());
    };
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u8>()
                .ok()
                .filter(|id| crossval::CRITERIA.contains(id))
                .ok_or_else(|| CliError::Usage(format!("unknown criterion `{t}` (expected 1-9)")))
        })
        .collect()
}

fn crossval_cmd(common: &Common, only: Option<&str>, trials: u64, failed: &mut usize) -> Result<Output, CliError> {
    let ids = parse_ids(only)?;
    let cfg = CrossvalConfig {
        seed: common.seed,
        trials: positive(trials)?,
        ..CrossvalConfig::default()
    };
    let cache = MeanCache::new();
    let mut text = format!("# election {} crossval seed={}\n", crate::table::VERSION, common.seed);
    let mut matrix = String::new();
    for id in ids {
        let report = crossval::run_criterion(id, &cfg, &cache)?;
        if !report.passed {
            *failed += 1;
        }
        matrix.push_str(&report.status_line());
        matrix.push('\n');
        text.push_str(&report.to_string());
    }
    text.push_str("\nsummary\n");
    text.push_str(&matrix);
    Ok(Output::Text(text))
}

fn emit(output: &Output, format: Format, trace_json: bool, out: &mut dyn Write) -> io::Result<()> {
    match output {
        Output::Table(t) => t.write(format, out),
        Output::Trace(record, table) => {
            if trace_json || format == Format::Json {
                serde_json::to_writer_pretty(&mut *out, record)?;
                writeln!(out)
            } else {
                table.write(Format::Csv, out)
            }
        }
        Output::Text(s) => out.write_all(s.as_bytes()),
    }
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let common = &cli.common;
    let params = SplitParams::new(common.p)?;
    let seed = cli.command.is_random().then_some(common.seed);
    let mut ctx = Ctx {
        common,
        params,
        meta: Meta::new(cli.command.name(), Some(common.p), seed),
        warn: stderr,
    };
    let cache = MeanCache::new();
    let mut failed = 0;
    let mut trace_json = false;
    let output = match &cli.command {
        Command::Simulate {
            sizes,
            script,
            trace,
            trials,
            max_steps,
        } => {
            trace_json = *trace;
            simulate(&mut ctx, sizes, script.as_deref(), *trace, *trials, *max_steps)?
        }
        Command::Exact { sizes, k } => exact(&mut ctx, sizes, *k, &cache)?,
        Command::Dist { n, k, x } => dist(&mut ctx, *n, *k, *x)?,
        Command::Asymptotic { sizes, f_curve } => asymptotic(&mut ctx, sizes, *f_curve, &cache)?,
        Command::Mc {
            sizes,
            x,
            y,
            trials,
            max_steps,
        } => mc(&mut ctx, sizes, (*x, *y), *trials, *max_steps, &cache)?,
        Command::Conjecture {
            x_grid,
            trials,
            max_steps,
        } => conjecture(&mut ctx, x_grid, *trials, *max_steps)?,
        Command::Crossval { only, trials } => crossval_cmd(common, only.as_deref(), *trials, &mut failed)?,
    };
    match &common.out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            emit(&output, common.format, trace_json, &mut f)?;
            f.flush()?;
        }
        None => emit(&output, common.format, trace_json, stdout)?,
    }
    if failed > 0 {
        return Err(CliError::Crossval(failed));
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(&cli, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(CliError::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
