//! Run manifests: a JSON record of the resolved configuration, outputs,
//! and wall-clock metadata written next to every CSV. Feeding the
//! `config` block back through the flags reproduces the CSV byte for
//! byte, because every input that affects the run (including the seed)
//! is captured here.

use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{DateTime, SecondsFormat, Utc};
use serde_json::{json, Value};

use crate::options::{CliError, SweepSpec, TradeoffSpec};

/// Wall-clock bracket around a run.
pub struct RunTimer {
    started: DateTime<Utc>,
    clock: Instant,
}

impl RunTimer {
    pub fn start() -> Self {
        Self {
            started: Utc::now(),
            clock: Instant::now(),
        }
    }
}

fn rfc3339(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// The manifest path that belongs to a CSV output path.
pub fn manifest_path(out_csv: &Path) -> PathBuf {
    out_csv.with_extension("manifest.json")
}

/// Serializes the resolved sweep configuration with keys that mirror the
/// long flags, so the block doubles as a config-file recipe.
pub fn sweep_config_value(spec: &SweepSpec) -> Value {
    json!({
        "B": spec.b,
        "U": spec.u,
        "mod": spec.constellation.to_string(),
        "precoder": spec.precoder.to_string(),
        "P": spec.phases,
        "tmax": spec.t_max,
        "tau": spec.tau,
        "delta": spec.delta,
        "rho": spec.rho_raw,
        "rho-points": spec.rho_grid_db,
        "trials": spec.trials,
        "seed": spec.seed,
        "fixed-point": spec.fixed_point,
        "rounding": match spec.rounding {
            cmprec::hwmodel::Rounding::Truncate => "truncate",
            cmprec::hwmodel::Rounding::NearestEven => "nearest-even",
        },
        "threads": spec.threads,
    })
}

/// Serializes the resolved trade-off configuration, same key convention
/// as [`sweep_config_value`].
pub fn tradeoff_config_value(spec: &TradeoffSpec) -> Value {
    json!({
        "B": spec.b,
        "U": spec.u,
        "mod": spec.constellation.to_string(),
        "precoder": spec.precoders.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
        "P": spec.phases,
        "tmax": spec.tmax_list,
        "tau": spec.tau,
        "delta": spec.delta,
        "rho": spec.rho_raw,
        "rho-points": spec.rho_grid_db,
        "trials": spec.trials,
        "seed": spec.seed,
        "clock-mhz": spec.clock_mhz,
        "threads": spec.threads,
    })
}

/// Writes the manifest next to the CSV and returns its path.
pub fn write_manifest(
    out_csv: &Path,
    command: &str,
    config: Value,
    timer: &RunTimer,
) -> Result<PathBuf, CliError> {
    let path = manifest_path(out_csv);
    let body = json!({
        "tool": {
            "name": "cmprec",
            "version": env!("CARGO_PKG_VERSION"),
        },
        "command": command,
        "started-utc": rfc3339(timer.started),
        "finished-utc": rfc3339(Utc::now()),
        "duration-seconds": timer.clock.elapsed().as_secs_f64(),
        "outputs": [out_csv.display().to_string()],
        "config": config,
    });
    let mut text = serde_json::to_string_pretty(&body)
        .map_err(|e| CliError::Runtime(format!("cannot serialize the manifest: {e}")))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| {
        CliError::Runtime(format!("cannot write manifest {}: {e}", path.display()))
    })?;
    Ok(path)
}
