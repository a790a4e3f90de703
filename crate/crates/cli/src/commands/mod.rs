pub mod audit;
pub mod benchmark;
pub mod detect;
pub mod simulate;
pub mod train;

use clap::ValueEnum;
use rue_core::data::SaturatingExpParams;

use crate::error::CliError;

/// Synthetic tasks shared by `train --simulate` and `benchmark --simulate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SyntheticTask {
    /// 1-D saturating exponential with Gaussian noise.
    SaturatingExp,
    /// Training inputs on [0, 5], test inputs on [0, 10].
    Extrapolation,
}

/// Shared generator flags.
#[derive(Debug, Clone, clap::Args, serde::Serialize)]
pub struct SimulateParams {
    /// Asymptote of the mean curve.
    #[arg(long, default_value_t = 2.0)]
    pub beta1: f64,
    /// Rate of the mean curve.
    #[arg(long, default_value_t = 1.0)]
    pub beta2: f64,
    /// Observation noise standard deviation.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Input range as lo:hi.
    #[arg(long, default_value = "0:5", value_parser = parse_range)]
    pub range: (f64, f64),
}

impl SimulateParams {
    pub fn to_params(&self) -> SaturatingExpParams<f64> {
        SaturatingExpParams {
            beta1: self.beta1,
            beta2: self.beta2,
            noise_std: self.noise,
            x_min: self.range.0,
            x_max: self.range.1,
        }
    }
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("range must be lo:hi, got '{s}'"))?;
    let lo: f64 = lo.parse().map_err(|_| format!("bad range start '{lo}'"))?;
    let hi: f64 = hi.parse().map_err(|_| format!("bad range end '{hi}'"))?;
    if !(hi >= lo) {
        return Err(format!("range end {hi} below start {lo}"));
    }
    Ok((lo, hi))
}

pub fn parse_methods(list: &str) -> Result<Vec<rue_core::audit::Method>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|name| {
            rue_core::audit::Method::parse(name)
                .ok_or_else(|| CliError::input(format!("unknown method '{name}'")))
        })
        .collect()
}
