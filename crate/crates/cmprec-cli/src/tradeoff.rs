//! The `tradeoff` subcommand: for each splitting precoder and iteration
//! count, the 1% BER threshold together with the throughput the array
//! schedule sustains at a given clock. An infinite-precision ZF row goes
//! last as the performance reference; it has no iteration machinery, so
//! its hardware columns stay empty.

use cmprec::hwmodel::{cycle_report, PeArrayConfig};
use cmprec::sim::{self, PrecoderKind};
use cmprec::constellation::Constellation;

use crate::manifest::{tradeoff_config_value, write_manifest, RunTimer};
use crate::options::{CliError, TradeoffSpec};

struct Row {
    precoder: PrecoderKind,
    phases: u32,
    t_max: Option<usize>,
    cycles: Option<u64>,
    rho_star_db: f64,
    throughput_mbps: Option<f64>,
}

fn threshold_for(spec: &TradeoffSpec, precoder: PrecoderKind, t_max: usize) -> Result<f64, CliError> {
    let cfg = spec.row_sim_config(precoder, t_max);
    sim::threshold_1pct(&cfg).map_err(|e| {
        CliError::Runtime(format!(
            "{precoder} with t_max={t_max} on rho grid '{}': {e}",
            spec.rho_raw
        ))
    })
}

pub fn run(spec: &TradeoffSpec) -> Result<(), CliError> {
    let timer = RunTimer::start();
    let hw = PeArrayConfig::new(spec.b, spec.u).map_err(|e| CliError::Usage(e.to_string()))?;
    let clock_hz = spec.clock_mhz * 1e6;
    let bits_per_symbol = Constellation::new(spec.constellation).bits_per_symbol() as f64;

    let mut rows = Vec::new();
    for &precoder in &spec.precoders {
        for &t_max in &spec.tmax_list {
            let rho_star_db = threshold_for(spec, precoder, t_max)?;
            let report = cycle_report(&hw, clock_hz, t_max)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            rows.push(Row {
                precoder,
                phases: if precoder == PrecoderKind::C2po { 4 } else { spec.phases },
                t_max: Some(t_max),
                cycles: Some(report.cycles_per_iteration),
                rho_star_db,
                throughput_mbps: Some(report.symbols_per_second * bits_per_symbol / 1e6),
            });
        }
    }
    let zf_t = *spec.tmax_list.iter().max().unwrap();
    rows.push(Row {
        precoder: PrecoderKind::Zf,
        phases: 0,
        t_max: None,
        cycles: None,
        rho_star_db: threshold_for(spec, PrecoderKind::Zf, zf_t)?,
        throughput_mbps: None,
    });

    let mut csv = String::from(
        "precoder,B,U,constellation,P,t_max,clock_mhz,cycles_per_iteration,rho_star_db,throughput_mbps\n",
    );
    let opt = |v: Option<String>| v.unwrap_or_default();
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            row.precoder,
            spec.b,
            spec.u,
            spec.constellation,
            row.phases,
            opt(row.t_max.map(|t| t.to_string())),
            spec.clock_mhz,
            opt(row.cycles.map(|c| c.to_string())),
            row.rho_star_db,
            opt(row.throughput_mbps.map(|m| m.to_string())),
        ));
        match (row.t_max, row.throughput_mbps) {
            (Some(t), Some(mbps)) => println!(
                "{} t_max={}: rho* = {:.2} dB, {:.1} Mbps at {} MHz",
                row.precoder, t, row.rho_star_db, mbps, spec.clock_mhz
            ),
            _ => println!("{} reference: rho* = {:.2} dB", row.precoder, row.rho_star_db),
        }
    }
    std::fs::write(&spec.out, csv).map_err(|e| {
        CliError::Runtime(format!("cannot write {}: {e}", spec.out.display()))
    })?;
    let manifest = write_manifest(&spec.out, "tradeoff", tradeoff_config_value(spec), &timer)?;
    println!(
        "wrote {} rows to {} (manifest {})",
        rows.len(),
        spec.out.display(),
        manifest.display()
    );
    Ok(())
}
