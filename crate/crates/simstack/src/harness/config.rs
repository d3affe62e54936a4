//! Experiment configuration: a flat, diffable `key = value` document.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! Lists are comma-separated. Unknown keys are rejected so typos cannot
//! silently fall back to defaults. Every key is optional; the defaults
//! reproduce the standard desk-scale sweep.
//!
//! ```text
//! schema_version = 1
//! frequency_hz = 2.8e10          # carrier frequency
//! nx = 4                         # elements per array row
//! ny_values = 1,2,4,8,16         # array columns swept (N = nx * ny)
//! l_values = 1,2,3,4             # layer counts swept (diagonal layers)
//! architectures = dris,bdris-tree
//! trials = 100
//! master_seed = 1
//! restarts = 1                   # random restarts per diagonal-layer trial
//! max_sweeps = 200
//! rel_tolerance = 1e-8
//! init = random                  # zero | random
//! sweep_order = first-to-last    # first-to-last | last-to-first
//! layer_spacing_wavelengths = 1.0
//! element_spacing_wavelengths = 0.5
//! output_path = results.csv
//! ```
//!
//! The tree-connected architecture is closed-form and single-layer; it runs
//! once per (N, trial) at `l = 1` independently of `l_values`.

use std::path::PathBuf;
use std::str::FromStr;

use crate::model::LayerArchitecture;
use crate::optimize::SweepOrder;
use crate::propagation::RngSeed;

use super::HarnessError;

pub const SCHEMA_VERSION: u64 = 1;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Phase initialization named in a config file; per-trial seeds are derived
/// by the runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigInit {
    Zero,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub frequency_hz: f64,
    pub nx: usize,
    pub ny_values: Vec<usize>,
    pub l_values: Vec<usize>,
    pub architectures: Vec<LayerArchitecture>,
    pub trials: usize,
    pub master_seed: RngSeed,
    pub restarts: usize,
    pub max_sweeps: usize,
    pub rel_tolerance: f64,
    pub init: ConfigInit,
    pub sweep_order: SweepOrder,
    pub layer_spacing_wavelengths: f64,
    pub element_spacing_wavelengths: f64,
    pub output_path: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            frequency_hz: 28e9,
            nx: 4,
            ny_values: vec![1, 2, 4, 8, 16],
            l_values: vec![1, 2, 3, 4],
            architectures: vec![
                LayerArchitecture::DRisTransmissive,
                LayerArchitecture::TreeConnected,
            ],
            trials: 100,
            master_seed: RngSeed(1),
            restarts: 1,
            max_sweeps: 200,
            rel_tolerance: crate::tolerances::CONVERGENCE_REL,
            init: ConfigInit::Random,
            sweep_order: SweepOrder::FirstToLast,
            layer_spacing_wavelengths: 1.0,
            element_spacing_wavelengths: 0.5,
            output_path: PathBuf::from("results.csv"),
        }
    }
}

impl ExperimentConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency_hz
    }

    /// Parses the `key = value` document described in the module docs.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| config_err(
                lineno + 1,
                "expected 'key = value'",
            ))?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "schema_version" => {
                    let version: u64 = parse_scalar(lineno + 1, key, value)?;
                    if version != SCHEMA_VERSION {
                        return Err(config_err(
                            lineno + 1,
                            &format!("unsupported schema_version {version}, expected {SCHEMA_VERSION}"),
                        ));
                    }
                }
                "frequency_hz" => cfg.frequency_hz = parse_scalar(lineno + 1, key, value)?,
                "nx" => cfg.nx = parse_scalar(lineno + 1, key, value)?,
                "ny_values" => cfg.ny_values = parse_list(lineno + 1, key, value)?,
                "l_values" => cfg.l_values = parse_list(lineno + 1, key, value)?,
                "architectures" => {
                    cfg.architectures = value
                        .split(',')
                        .map(|token| {
                            LayerArchitecture::from_str(token.trim())
                                .map_err(|e| config_err(lineno + 1, &e))
                        })
                        .collect::<Result<_, _>>()?;
                }
                "trials" => cfg.trials = parse_scalar(lineno + 1, key, value)?,
                "master_seed" => cfg.master_seed = RngSeed(parse_scalar(lineno + 1, key, value)?),
                "restarts" => cfg.restarts = parse_scalar(lineno + 1, key, value)?,
                "max_sweeps" => cfg.max_sweeps = parse_scalar(lineno + 1, key, value)?,
                "rel_tolerance" => cfg.rel_tolerance = parse_scalar(lineno + 1, key, value)?,
                "init" => {
                    cfg.init = match value {
                        "zero" => ConfigInit::Zero,
                        "random" => ConfigInit::Random,
                        other => {
                            return Err(config_err(
                                lineno + 1,
                                &format!("init must be 'zero' or 'random', got '{other}'"),
                            ))
                        }
                    };
                }
                "sweep_order" => {
                    cfg.sweep_order = match value {
                        "first-to-last" => SweepOrder::FirstToLast,
                        "last-to-first" => SweepOrder::LastToFirst,
                        other => {
                            return Err(config_err(
                                lineno + 1,
                                &format!(
                                    "sweep_order must be 'first-to-last' or 'last-to-first', got '{other}'"
                                ),
                            ))
                        }
                    };
                }
                "layer_spacing_wavelengths" => {
                    cfg.layer_spacing_wavelengths = parse_scalar(lineno + 1, key, value)?
                }
                "element_spacing_wavelengths" => {
                    cfg.element_spacing_wavelengths = parse_scalar(lineno + 1, key, value)?
                }
                "output_path" => cfg.output_path = PathBuf::from(value),
                other => {
                    return Err(config_err(lineno + 1, &format!("unknown key '{other}'")));
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        let mut problems = Vec::new();
        if !positive(self.frequency_hz) {
            problems.push("frequency_hz must be positive".to_string());
        }
        if self.nx == 0 {
            problems.push("nx must be at least 1".to_string());
        }
        if self.ny_values.is_empty() {
            problems.push("ny_values must be non-empty".to_string());
        }
        if self.ny_values.contains(&0) {
            problems.push("ny_values entries must be at least 1".to_string());
        }
        if self.l_values.is_empty() {
            problems.push("l_values must be non-empty".to_string());
        }
        if self.l_values.contains(&0) {
            problems.push("l_values entries must be at least 1".to_string());
        }
        if has_duplicates(&self.ny_values) {
            problems.push("ny_values entries must be distinct".to_string());
        }
        if has_duplicates(&self.l_values) {
            problems.push("l_values entries must be distinct".to_string());
        }
        if self.architectures.is_empty() {
            problems.push("architectures must be non-empty".to_string());
        }
        if self.architectures.contains(&LayerArchitecture::BdRisUnitary) {
            problems.push(
                "architecture 'bdris' has no defined tunable-impedance count; use 'bdris-tree'"
                    .to_string(),
            );
        }
        if self.trials == 0 {
            problems.push("trials must be at least 1".to_string());
        }
        if self.restarts == 0 {
            problems.push("restarts must be at least 1".to_string());
        }
        if self.max_sweeps == 0 {
            problems.push("max_sweeps must be at least 1".to_string());
        }
        if !positive(self.rel_tolerance) {
            problems.push("rel_tolerance must be positive".to_string());
        }
        if !positive(self.layer_spacing_wavelengths) || !positive(self.element_spacing_wavelengths)
        {
            problems.push("spacing multipliers must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Config {
                message: problems.join("; "),
            })
        }
    }

    pub fn load(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        let cfg = Self::parse(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn has_duplicates(values: &[usize]) -> bool {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    sorted.windows(2).any(|w| w[0] == w[1])
}

fn config_err(line: usize, message: &str) -> HarnessError {
    HarnessError::Config {
        message: format!("line {line}: {message}"),
    }
}

fn parse_scalar<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, HarnessError> {
    value
        .parse()
        .map_err(|_| config_err(line, &format!("cannot parse '{value}' for key '{key}'")))
}

fn parse_list(line: usize, key: &str, value: &str) -> Result<Vec<usize>, HarnessError> {
    value
        .split(',')
        .map(|token| parse_scalar(line, key, token.trim()))
        .collect()
}
