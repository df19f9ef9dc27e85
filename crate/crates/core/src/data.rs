//! Spheroid radius time series: CSV ingestion, synthetic generation and the
//! per-cell-line prior defaults.
//!
//! Input files have the header `time_day,value_mm`; lines starting with `#`
//! are comments. Values are diameters or radii depending on [`ValueUnit`];
//! everything is stored as radius.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::PriorSpec;
use crate::model::{DiscretizationConfig, ModelParams};
use crate::solver::{self, QuantileConfig, SolverError};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: time {time} does not increase")]
    NotIncreasing { line: u64, time: f64 },
    #[error("line {line}: value {value} must be positive")]
    NonPositive { line: u64, value: f64 },
    #[error("dataset has no observations{0}")]
    Empty(&'static str),
    #[error("invalid observation window: {0}")]
    BadWindow(String),
    #[error("unknown cell line '{0}' (expected L-5178Y, V-79, B-16 or a custom prior)")]
    UnknownCellLine(String),
    #[error("observation {index}: {message}")]
    Invalid { index: usize, message: String },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum CellLine {
    L5178Y,
    V79,
    B16,
    Custom(String),
}

impl fmt::Display for CellLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellLine::L5178Y => f.write_str("L-5178Y"),
            CellLine::V79 => f.write_str("V-79"),
            CellLine::B16 => f.write_str("B-16"),
            CellLine::Custom(name) => f.write_str(name),
        }
    }
}

impl FromStr for CellLine {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, DataError> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_uppercase();
        Ok(match key.as_str() {
            "L5178Y" => CellLine::L5178Y,
            "V79" => CellLine::V79,
            "B16" => CellLine::B16,
            "" => return Err(DataError::UnknownCellLine(s.to_string())),
            _ => CellLine::Custom(s.trim().to_string()),
        })
    }
}

impl From<CellLine> for String {
    fn from(c: CellLine) -> String {
        c.to_string()
    }
}

impl TryFrom<String> for CellLine {
    type Error = DataError;

    fn try_from(s: String) -> Result<Self, DataError> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueUnit {
    Diameter,
    Radius,
}

impl FromStr for ValueUnit {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, DataError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "diameter" => Ok(ValueUnit::Diameter),
            "radius" => Ok(ValueUnit::Radius),
            other => Err(DataError::Parse {
                line: 0,
                message: format!("unknown unit '{other}' (expected diameter or radius)"),
            }),
        }
    }
}

/// Inclusive time window `[start, end]` in days. Serialised as `"T0:T1"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
}

impl TimeWindow {
    pub fn new(start: f64, end: f64) -> Result<Self, DataError> {
        if !(start.is_finite() && end.is_finite() && start <= end) {
            return Err(DataError::BadWindow(format!("{start}:{end}")));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }
}

impl fmt::Display for TimeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

impl From<TimeWindow> for String {
    fn from(w: TimeWindow) -> String {
        w.to_string()
    }
}

impl TryFrom<String> for TimeWindow {
    type Error = DataError;

    fn try_from(s: String) -> Result<Self, DataError> {
        s.parse()
    }
}

impl FromStr for TimeWindow {
    type Err = DataError;

    /// Parses `T0:T1`.
    fn from_str(s: &str) -> Result<Self, DataError> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| DataError::BadWindow(format!("'{s}' is not of the form T0:T1")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| DataError::BadWindow(format!("'{s}' is not of the form T0:T1")))
        };
        Self::new(parse(a)?, parse(b)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    pub radius: f64,
}

/// Observed colony radii for one cell line.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    cell_line: CellLine,
    observations: Vec<Observation>,
    window: Option<TimeWindow>,
}

impl Dataset {
    pub fn new(
        cell_line: CellLine,
        observations: Vec<Observation>,
        window: Option<TimeWindow>,
    ) -> Result<Self, DataError> {
        for (index, o) in observations.iter().enumerate() {
            let fail = |message: String| Err(DataError::Invalid { index, message });
            if !(o.time.is_finite() && o.time >= 0.0) {
                return fail(format!("time {} must be finite and non-negative", o.time));
            }
            if index > 0 && o.time <= observations[index - 1].time {
                return fail(format!("time {} does not increase", o.time));
            }
            if !(o.radius.is_finite() && o.radius > 0.0) {
                return fail(format!("radius {} must be positive", o.radius));
            }
            if let Some(w) = window {
                if !w.contains(o.time) {
                    return fail(format!("time {} lies outside the window", o.time));
                }
            }
        }
        Ok(Self {
            cell_line,
            observations,
            window,
        })
    }

    pub fn cell_line(&self) -> &CellLine {
        &self.cell_line
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn window(&self) -> Option<TimeWindow> {
        self.window
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.time).collect()
    }

    pub fn radii(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.radius).collect()
    }

    pub fn max_radius(&self) -> Option<f64> {
        self.observations.iter().map(|o| o.radius).reduce(f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    pub unit: ValueUnit,
    pub window: Option<TimeWindow>,
    pub cell_line: CellLine,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            unit: ValueUnit::Diameter,
            window: None,
            cell_line: CellLine::Custom("custom".into()),
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path)?;
    parse_dataset(file, options)
}

pub fn parse_dataset<R: Read>(mut reader: R, options: &LoadOptions) -> Result<Dataset, DataError> {
    // Comment and blank lines are dropped before the csv reader sees the
    // text; `physical` maps its line numbers back to the file's.
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let mut kept = String::with_capacity(text.len());
    let mut physical = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        kept.push_str(raw);
        kept.push('\n');
        physical.push(k as u64 + 1);
    }
    let to_physical = |line: u64| {
        line.checked_sub(1)
            .and_then(|k| physical.get(k as usize).copied())
            .unwrap_or(line)
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(kept.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| DataError::Parse {
            line: to_physical(e.position().map_or(1, |p| p.line())),
            message: e.to_string(),
        })?
        .clone();
    if headers.len() != 2 || &headers[0] != "time_day" || &headers[1] != "value_mm" {
        return Err(DataError::Parse {
            line: to_physical(headers.position().map_or(1, |p| p.line())),
            message: format!(
                "expected header 'time_day,value_mm', found '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let scale = match options.unit {
        ValueUnit::Diameter => 0.5,
        ValueUnit::Radius => 1.0,
    };
    let mut observations = Vec::new();
    let mut previous: Option<f64> = None;
    for record in rdr.records() {
        let record = record.map_err(|e| DataError::Parse {
            line: to_physical(e.position().map_or(0, |p| p.line())),
            message: e.to_string(),
        })?;
        let line = to_physical(record.position().map_or(0, |p| p.line()));
        if record.len() != 2 {
            return Err(DataError::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let field = |k: usize, name: &str| {
            record[k].parse::<f64>().map_err(|_| DataError::Parse {
                line,
                message: format!("{name} '{}' is not a number", &record[k]),
            })
        };
        let time = field(0, "time_day")?;
        let value = field(1, "value_mm")?;
        if !time.is_finite() || time < 0.0 {
            return Err(DataError::Parse {
                line,
                message: format!("time {time} must be finite and non-negative"),
            });
        }
        if previous.is_some_and(|p| time <= p) {
            return Err(DataError::NotIncreasing { line, time });
        }
        previous = Some(time);
        if !(value.is_finite() && value > 0.0) {
            return Err(DataError::NonPositive { line, value });
        }
        if options.window.is_some_and(|w| !w.contains(time)) {
            continue;
        }
        observations.push(Observation {
            time,
            radius: value * scale,
        });
    }
    if observations.is_empty() {
        return Err(DataError::Empty(if options.window.is_some() {
            " inside the window"
        } else {
            ""
        }));
    }
    Dataset::new(options.cell_line.clone(), observations, options.window)
}

/// Writes the observations as radii, with full round-trip precision.
pub fn write_dataset<W: Write>(dataset: &Dataset, mut out: W) -> std::io::Result<()> {
    writeln!(out, "# cell_line: {}", dataset.cell_line())?;
    writeln!(out, "# unit: radius")?;
    writeln!(out, "time_day,value_mm")?;
    for o in dataset.observations() {
        writeln!(out, "{},{}", o.time, o.radius)?;
    }
    Ok(())
}

/// Synthetic observations `r(t_i) Z_i` with `log Z_i ~ N(0, sigma_o^2)`.
pub fn synthesize(
    theta_true: &ModelParams,
    cfg: &DiscretizationConfig,
    qcfg: &QuantileConfig,
    times: &[f64],
    seed: u64,
    cell_line: CellLine,
) -> Result<Dataset, DataError> {
    let trajectory = solver::simulate(theta_true, cfg, qcfg, times)?;
    let noise = Normal::new(0.0, theta_true.sigma_o()).map_err(|e| DataError::Invalid {
        index: 0,
        message: format!("observation noise: {e}"),
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let observations = trajectory
        .times
        .iter()
        .zip(&trajectory.radii)
        .map(|(&time, &r)| Observation {
            time,
            radius: r * noise.sample(&mut rng).exp(),
        })
        .collect();
    Dataset::new(cell_line, observations, None)
}

/// Log-normal prior defaults for the built-in cell lines.
///
/// Medians: proliferation rate 1.4 / 1.04 / 0.9 per day, kernel radius
/// 0.06 / 0.06 / 0.09 mm, initial radius 0.264 / 0.403 / 0.733 mm and
/// observation noise 1 (log-location 0). Log-scales are 1 except 5 for the
/// observation noise.
pub fn builtin_priors(cell_line: &CellLine) -> Result<PriorSpec, DataError> {
    let (alpha, sigma_k, sigma_i) = match cell_line {
        CellLine::L5178Y => (1.4, 0.06, 0.264),
        CellLine::V79 => (1.04, 0.06, 0.403),
        CellLine::B16 => (0.9, 0.09, 0.733),
        CellLine::Custom(name) => return Err(DataError::UnknownCellLine(name.clone())),
    };
    Ok(PriorSpec::from_medians([alpha, sigma_k, 1.0, sigma_i], [1.0, 1.0, 5.0, 1.0])
        .expect("built-in priors are valid"))
}

/// Edge-mollification ratio used for each cell line's initial colony.
pub fn default_sigma_tilde_ratio(cell_line: &CellLine) -> f64 {
    match cell_line {
        CellLine::B16 => 1.06,
        _ => 1.065,
    }
}
