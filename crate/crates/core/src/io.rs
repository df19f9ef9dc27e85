//! CSV and JSON exports. Floats are written with Rust's shortest round-trip
//! formatting, so every value reads back bit-exactly.

use std::io::{Read, Write};

use serde::Serialize;
use thiserror::Error;

use crate::convergence::ConvergenceTable;
use crate::inference::{Chain, PredictiveBand, Sample};
use crate::model::ModelParams;
use crate::solver::Trajectory;

pub const CHAIN_HEADER: [&str; 7] = [
    "iter",
    "log_alpha",
    "log_sigma_k",
    "log_sigma_o",
    "log_sigma_i",
    "log_posterior",
    "accepted",
];

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("chain file line {line}: {message}")]
    Chain { line: u64, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// `iter` counts retained samples from 1.
pub fn write_chain<W: Write>(chain: &Chain, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", CHAIN_HEADER.join(","))?;
    for (k, s) in chain.samples.iter().enumerate() {
        let v = s.theta.to_log_array();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            k + 1,
            v[0],
            v[1],
            v[2],
            v[3],
            s.log_posterior,
            u8::from(s.accepted)
        )?;
    }
    Ok(())
}

/// Reads a chain CSV back into retained samples. Adaptation history is not
/// part of the file and comes back empty.
pub fn read_chain<R: Read>(reader: R) -> Result<Chain, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| IoError::Chain {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.iter().ne(CHAIN_HEADER.iter().copied()) {
        return Err(IoError::Chain {
            line: 1,
            message: format!("expected header '{}'", CHAIN_HEADER.join(",")),
        });
    }
    let mut samples = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| IoError::Chain {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let num = |k: usize| {
            record[k].parse::<f64>().map_err(|_| IoError::Chain {
                line,
                message: format!("{} '{}' is not a number", CHAIN_HEADER[k], &record[k]),
            })
        };
        let theta = ModelParams::from_log_array([num(1)?, num(2)?, num(3)?, num(4)?]);
        let log_posterior = num(5)?;
        let accepted = match &record[6] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(IoError::Chain {
                    line,
                    message: format!("accepted '{other}' is not 0 or 1"),
                })
            }
        };
        samples.push(Sample {
            theta,
            log_posterior,
            accepted,
        });
    }
    let n = samples.len();
    Ok(Chain {
        samples,
        iterations: n,
        ..Default::default()
    })
}

pub fn write_trajectory<W: Write>(traj: &Trajectory, mut out: W) -> std::io::Result<()> {
    writeln!(out, "time_day,radius_mm,total_mass")?;
    for ((t, r), m) in traj.times.iter().zip(&traj.radii).zip(traj.total_masses()) {
        writeln!(out, "{t},{r},{m}")?;
    }
    Ok(())
}

pub fn write_diameters<W: Write>(traj: &Trajectory, mut out: W) -> std::io::Result<()> {
    writeln!(out, "time_day,diameter_mm")?;
    for (t, d) in traj.times.iter().zip(traj.diameters()) {
        writeln!(out, "{t},{d}")?;
    }
    Ok(())
}

/// Long format: one row per (time, particle).
pub fn write_states<W: Write>(traj: &Trajectory, mut out: W) -> std::io::Result<()> {
    writeln!(out, "time_day,x_mm,mass")?;
    for (t, state) in traj.times.iter().zip(&traj.states) {
        for (x, m) in state.atoms() {
            writeln!(out, "{t},{x},{m}")?;
        }
    }
    Ok(())
}

pub fn write_predictive<W: Write>(band: &PredictiveBand, mut out: W) -> std::io::Result<()> {
    writeln!(out, "time_day,radius_lo_mm,radius_med_mm,radius_hi_mm")?;
    for j in 0..band.times.len() {
        writeln!(
            out,
            "{},{},{},{}",
            band.times[j], band.lo[j], band.median[j], band.hi[j]
        )?;
    }
    Ok(())
}

/// Long format: one row per (particle count, time).
pub fn write_convergence<W: Write>(table: &ConvergenceTable, mut out: W) -> std::io::Result<()> {
    writeln!(out, "n_particles,time_day,weighted_flat_error")?;
    for row in &table.rows {
        for (t, e) in table.times.iter().zip(&row.errors) {
            writeln!(out, "{},{t},{e}", row.n_particles)?;
        }
    }
    Ok(())
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(value: &T, mut out: W) -> Result<(), IoError> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}
