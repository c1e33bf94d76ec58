//! Command-line surface: argument structs, config-file merging, and the
//! resolved run descriptions the subcommands execute.
//!
//! Every long flag has a twin key in the optional config file, so a run
//! can live in a reviewable text file while explicit flags override
//! individual entries. Resolution order is flag, then file, then the
//! built-in default; missing required settings are usage errors.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use cmprec::hwmodel::{FixedPointProfile, Overflow, Rounding};
use cmprec::sim::{FbsConfig, PrecoderKind, SimConfig};
use cmprec::constellation::ConstellationName;

/// Errors carrying the process exit code: usage problems exit 2, runtime
/// failures exit 1.
#[derive(Debug)]
pub enum CliError {
    /// The invocation itself is malformed (bad flag value, inconsistent
    /// dimensions, unknown config key).
    Usage(String),
    /// The invocation was well formed but the run failed (I/O, no
    /// threshold crossing, solver breakdown).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "cmprec",
    version,
    about = "Finite-phase constant-modulus precoding: BER sweeps, rate-performance tables, self tests"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Monte-Carlo BER sweep over an SNR grid, written as CSV.
    Sweep(SweepArgs),
    /// Thresholds and throughput for iteration-count trade-off studies.
    Tradeoff(TradeoffArgs),
    /// Property suites over the geometry, algebra, and hardware model.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Transmit antennas.
    #[arg(long = "B")]
    pub b: Option<usize>,
    /// Users.
    #[arg(long = "U")]
    pub u: Option<usize>,
    /// Data constellation: bpsk, qpsk, or qam16.
    #[arg(long = "mod")]
    pub modulation: Option<String>,
    /// Precoder: mrt, zf, mrtq, zfq, c2po, or c3po.
    #[arg(long)]
    pub precoder: Option<String>,
    /// Transmit phase count for constant-modulus precoders: 4 or 8.
    #[arg(long = "P")]
    pub phases: Option<u32>,
    /// Solver iterations.
    #[arg(long)]
    pub tmax: Option<usize>,
    /// Fixed step size; omit for the spectral default.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Fixed regularization weight; omit for the default.
    #[arg(long)]
    pub delta: Option<f64>,
    /// SNR grid in dB as start:step:stop with inclusive endpoints.
    #[arg(long)]
    pub rho: Option<String>,
    /// Monte-Carlo trials per grid point.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Sweep seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Route the solver through the fixed-point datapath model.
    #[arg(long = "fixed-point", num_args = 0..=1, default_missing_value = "true")]
    pub fixed_point: Option<bool>,
    /// Rounding mode of the fixed-point datapath: truncate or nearest-even.
    #[arg(long)]
    pub rounding: Option<String>,
    /// Worker thread cap for the sweep.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output CSV path; the run manifest lands next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Config file with key=value lines mirroring the long flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TradeoffArgs {
    /// Transmit antennas.
    #[arg(long = "B")]
    pub b: Option<usize>,
    /// Users.
    #[arg(long = "U")]
    pub u: Option<usize>,
    /// Data constellation: bpsk, qpsk, or qam16.
    #[arg(long = "mod")]
    pub modulation: Option<String>,
    /// Comma-separated splitting precoders to tabulate (c2po, c3po).
    #[arg(long, value_delimiter = ',')]
    pub precoder: Option<Vec<String>>,
    /// Transmit phase count for the 8-phase precoder lineup.
    #[arg(long = "P")]
    pub phases: Option<u32>,
    /// Comma-separated iteration counts, one table row per entry.
    #[arg(long, value_delimiter = ',')]
    pub tmax: Option<Vec<usize>>,
    /// Fixed step size; omit for the spectral default.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Fixed regularization weight; omit for the default.
    #[arg(long)]
    pub delta: Option<f64>,
    /// SNR grid in dB searched for the 1% BER threshold.
    #[arg(long)]
    pub rho: Option<String>,
    /// Monte-Carlo trials per grid point.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Sweep seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Array clock in MHz used for the throughput column.
    #[arg(long = "clock-mhz")]
    pub clock_mhz: Option<f64>,
    /// Worker thread cap for the sweeps.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output CSV path; the run manifest lands next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Config file with key=value lines mirroring the long flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SelftestArgs {
    /// Shrink sample budgets while still exercising every suite.
    #[arg(long)]
    pub quick: bool,
    /// Seed for the sampled suites.
    #[arg(long, default_value_t = 0x5EED)]
    pub seed: u64,
}

/// A fully resolved sweep invocation.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub b: usize,
    pub u: usize,
    pub constellation: ConstellationName,
    pub precoder: PrecoderKind,
    pub phases: u32,
    pub t_max: usize,
    pub tau: Option<f64>,
    pub delta: Option<f64>,
    pub rho_raw: String,
    pub rho_grid_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub fixed_point: bool,
    pub rounding: Rounding,
    pub threads: Option<usize>,
    pub out: PathBuf,
}

impl SweepSpec {
    pub fn to_sim_config(&self) -> SimConfig {
        SimConfig {
            b: self.b,
            u: self.u,
            constellation: self.constellation,
            precoder: self.precoder,
            phases: self.phases,
            fbs: FbsConfig {
                t_max: self.t_max,
                tau: self.tau,
                delta: self.delta,
            },
            rho_grid_db: self.rho_grid_db.clone(),
            trials: self.trials,
            seed: self.seed,
            fixed_point: self.fixed_point,
            fx_profile: FixedPointProfile::with_modes(self.rounding, Overflow::Saturate),
        }
    }
}

/// A fully resolved trade-off invocation.
#[derive(Debug, Clone)]
pub struct TradeoffSpec {
    pub b: usize,
    pub u: usize,
    pub constellation: ConstellationName,
    pub precoders: Vec<PrecoderKind>,
    pub phases: u32,
    pub tmax_list: Vec<usize>,
    pub tau: Option<f64>,
    pub delta: Option<f64>,
    pub rho_raw: String,
    pub rho_grid_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub clock_mhz: f64,
    pub threads: Option<usize>,
    pub out: PathBuf,
}

impl TradeoffSpec {
    /// The sweep configuration of one table row.
    pub fn row_sim_config(&self, precoder: PrecoderKind, t_max: usize) -> SimConfig {
        SimConfig {
            b: self.b,
            u: self.u,
            constellation: self.constellation,
            precoder,
            phases: self.phases,
            fbs: FbsConfig {
                t_max,
                tau: self.tau,
                delta: self.delta,
            },
            rho_grid_db: self.rho_grid_db.clone(),
            trials: self.trials,
            seed: self.seed,
            fixed_point: false,
            fx_profile: FixedPointProfile::default(),
        }
    }
}

/// Expands `start:step:stop` (or a single scalar) into an inclusive grid.
pub fn parse_rho_grid(raw: &str) -> Result<Vec<f64>, CliError> {
    let bad = |m: String| CliError::Usage(format!("bad --rho '{raw}': {m}"));
    let parts: Vec<&str> = raw.split(':').collect();
    let num = |s: &str| -> Result<f64, CliError> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|e| bad(format!("'{s}' is not a number ({e})")))?;
        if !v.is_finite() {
            return Err(bad(format!("'{s}' is not finite")));
        }
        Ok(v)
    };
    match parts.as_slice() {
        [only] => Ok(vec![num(only)?]),
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if step <= 0.0 {
                return Err(bad("step must be positive".into()));
            }
            if stop < start {
                return Err(bad("stop must not be below start".into()));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
            if n > 10_000 {
                return Err(bad(format!("{n} grid points is past the 10000-point cap")));
            }
            Ok((0..n).map(|i| start + i as f64 * step).collect())
        }
        _ => Err(bad("expected start:step:stop or a single value".into())),
    }
}

/// Key=value pairs loaded from a config file. Keys are consumed as they
/// are matched so leftovers can be reported as unknown.
pub struct FileConf {
    entries: HashMap<String, String>,
    path: Option<PathBuf>,
}

impl FileConf {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self {
                entries: HashMap::new(),
                path: None,
            });
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config file {}: {e}", path.display()))
        })?;
        let mut entries = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "{}:{}: expected key=value, got '{line}'",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            if entries
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(CliError::Usage(format!(
                    "{}:{}: duplicate key '{key}'",
                    path.display(),
                    lineno + 1
                )));
            }
        }
        Ok(Self {
            entries,
            path: Some(path.to_path_buf()),
        })
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                CliError::Usage(format!("config key {key}={raw}: {e}"))
            }),
        }
    }

    fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<T>().map_err(|e| {
                        CliError::Usage(format!("config key {key}={raw}: {e}"))
                    })
                })
                .collect::<Result<Vec<T>, CliError>>()
                .map(Some),
        }
    }

    /// Errors if any key was never consumed by the subcommand.
    fn finish(self) -> Result<(), CliError> {
        if let Some(key) = self.entries.keys().next() {
            let place = self
                .path
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default();
            return Err(CliError::Usage(format!(
                "{place}: unknown config key '{key}'"
            )));
        }
        Ok(())
    }
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| {
        CliError::Usage(format!("missing {flag}: pass the flag or set it in --config"))
    })
}

fn parse_token<T: FromStr>(raw: &str, what: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>()
        .map_err(|e| CliError::Usage(format!("bad {what} '{raw}': {e}")))
}

fn parse_rounding(raw: &str) -> Result<Rounding, CliError> {
    match raw {
        "truncate" => Ok(Rounding::Truncate),
        "nearest-even" => Ok(Rounding::NearestEven),
        other => Err(CliError::Usage(format!(
            "bad --rounding '{other}': expected truncate or nearest-even"
        ))),
    }
}

pub fn resolve_sweep(args: SweepArgs) -> Result<SweepSpec, CliError> {
    let mut conf = FileConf::load(args.config.as_deref())?;

    let b = require(args.b.or(conf.take("B")?), "--B")?;
    let u = require(args.u.or(conf.take("U")?), "--U")?;
    let modulation = require(args.modulation.or(conf.take("mod")?), "--mod")?;
    let precoder = require(args.precoder.or(conf.take("precoder")?), "--precoder")?;
    let phases = args.phases.or(conf.take("P")?).unwrap_or(8);
    let t_max = args.tmax.or(conf.take("tmax")?).unwrap_or(9);
    let tau = args.tau.or(conf.take("tau")?);
    let delta = args.delta.or(conf.take("delta")?);
    let rho_raw = require(args.rho.or(conf.take("rho")?), "--rho")?;
    let trials = args.trials.or(conf.take("trials")?).unwrap_or(10_000);
    let seed = args.seed.or(conf.take("seed")?).unwrap_or(1);
    let fixed_point = args
        .fixed_point
        .or(conf.take("fixed-point")?)
        .unwrap_or(false);
    let rounding_raw = args.rounding.or(conf.take("rounding")?);
    let threads = args.threads.or(conf.take("threads")?);
    let out = require(args.out.or(conf.take("out")?), "--out")?;
    conf.finish()?;

    let spec = SweepSpec {
        b,
        u,
        constellation: parse_token(&modulation, "--mod")?,
        precoder: parse_token(&precoder, "--precoder")?,
        phases,
        t_max,
        tau,
        delta,
        rho_grid_db: parse_rho_grid(&rho_raw)?,
        rho_raw,
        trials,
        seed,
        fixed_point,
        rounding: match rounding_raw.as_deref() {
            Some(raw) => parse_rounding(raw)?,
            None => Rounding::Truncate,
        },
        threads,
        out,
    };
    if spec.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    spec.to_sim_config()
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(spec)
}

pub fn resolve_tradeoff(args: TradeoffArgs) -> Result<TradeoffSpec, CliError> {
    let mut conf = FileConf::load(args.config.as_deref())?;

    let b = require(args.b.or(conf.take("B")?), "--B")?;
    let u = require(args.u.or(conf.take("U")?), "--U")?;
    let modulation = require(args.modulation.or(conf.take("mod")?), "--mod")?;
    let precoder_raw = args
        .precoder
        .or(conf.take_list("precoder")?)
        .unwrap_or_else(|| vec!["c3po".into(), "c2po".into()]);
    let phases = args.phases.or(conf.take("P")?).unwrap_or(8);
    let tmax_list = require(args.tmax.or(conf.take_list("tmax")?), "--tmax")?;
    let tau = args.tau.or(conf.take("tau")?);
    let delta = args.delta.or(conf.take("delta")?);
    let rho_raw = require(args.rho.or(conf.take("rho")?), "--rho")?;
    let trials = args.trials.or(conf.take("trials")?).unwrap_or(10_000);
    let seed = args.seed.or(conf.take("seed")?).unwrap_or(1);
    let clock_mhz = args.clock_mhz.or(conf.take("clock-mhz")?).unwrap_or(202.0);
    let threads = args.threads.or(conf.take("threads")?);
    let out = require(args.out.or(conf.take("out")?), "--out")?;
    conf.finish()?;

    if tmax_list.is_empty() {
        return Err(CliError::Usage("--tmax list must not be empty".into()));
    }
    let mut precoders = Vec::with_capacity(precoder_raw.len());
    for raw in &precoder_raw {
        let kind: PrecoderKind = parse_token(raw, "--precoder")?;
        if !matches!(kind, PrecoderKind::C2po | PrecoderKind::C3po) {
            return Err(CliError::Usage(format!(
                "--precoder {kind} has no iteration count; the trade-off table \
                 covers c2po and c3po (zf is always added as the reference row)"
            )));
        }
        precoders.push(kind);
    }
    if !(clock_mhz.is_finite() && clock_mhz > 0.0) {
        return Err(CliError::Usage(format!(
            "--clock-mhz must be positive, got {clock_mhz}"
        )));
    }
    if threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }

    let spec = TradeoffSpec {
        b,
        u,
        constellation: parse_token(&modulation, "--mod")?,
        precoders,
        phases,
        tmax_list,
        tau,
        delta,
        rho_grid_db: parse_rho_grid(&rho_raw)?,
        rho_raw,
        trials,
        seed,
        clock_mhz,
        threads,
        out,
    };
    for &t in &spec.tmax_list {
        spec.row_sim_config(spec.precoders[0], t)
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    spec.row_sim_config(PrecoderKind::Zf, spec.tmax_list[0])
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(spec)
}

/// Installs the global worker pool cap before any parallel work runs.
pub fn apply_thread_cap(threads: Option<usize>) -> Result<(), CliError> {
    let Some(n) = threads else { return Ok(()) };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(format!("cannot size the worker pool: {e}")))
}
