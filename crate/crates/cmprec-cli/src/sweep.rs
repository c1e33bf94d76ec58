//! The `sweep` subcommand: one Monte-Carlo BER curve, written as CSV
//! with a reproducibility manifest beside it.

use cmprec::sim;

use crate::manifest::{sweep_config_value, write_manifest, RunTimer};
use crate::options::{CliError, SweepSpec};

pub fn run(spec: &SweepSpec) -> Result<(), CliError> {
    let timer = RunTimer::start();
    let cfg = spec.to_sim_config();
    let curve = sim::sweep(&cfg).map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut buf = Vec::new();
    sim::write_csv(&mut buf, &cfg, &curve)
        .map_err(|e| CliError::Runtime(format!("cannot format the CSV: {e}")))?;
    std::fs::write(&spec.out, &buf).map_err(|e| {
        CliError::Runtime(format!("cannot write {}: {e}", spec.out.display()))
    })?;
    let manifest = write_manifest(&spec.out, "sweep", sweep_config_value(spec), &timer)?;

    println!(
        "wrote {} grid points to {} (manifest {})",
        curve.points.len(),
        spec.out.display(),
        manifest.display()
    );
    Ok(())
}
