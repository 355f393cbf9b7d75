use clap::Args;
use serde::{Deserialize, Serialize};

use sympcool::budget;

use super::{print_json, to_value};
use crate::config::{flag_error, CliError, ConfigError, Loaded};
use crate::output::{Cell, Output, Table};
use crate::Common;

#[derive(Debug, Clone, Args)]
pub struct PhaseArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 4.0)]
    eta_min: f64,
    #[arg(long, default_value_t = 10.0)]
    eta_max: f64,
    #[arg(long, default_value_t = 61)]
    eta_steps: usize,
    /// `omega2_bar / omega1_bar`.
    #[arg(long, default_value_t = std::f64::consts::SQRT_2)]
    ratio: f64,
    #[arg(long, default_value_t = 0.01)]
    n2_min: f64,
    #[arg(long, default_value_t = 10.0)]
    n2_max: f64,
    #[arg(long, default_value_t = 61)]
    n2_steps: usize,
}

/// Grid definition; read from `--config` when given, else from the flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseCfg {
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta_steps: usize,
    pub trap_ratio: f64,
    /// `N2 / N2_c` range, log-spaced.
    pub n2_over_n2c_min: f64,
    pub n2_over_n2c_max: f64,
    pub n2_steps: usize,
}

impl PhaseCfg {
    fn check(&self) -> Result<(), (&'static str, String)> {
        if !(self.eta_min > 2.0 && self.eta_max >= self.eta_min) {
            return Err(("eta_min", "need 2 < eta_min <= eta_max".into()));
        }
        if self.eta_steps == 0 || self.n2_steps == 0 {
            return Err(("eta_steps", "grid sizes must be at least 1".into()));
        }
        if !(self.trap_ratio > 0.0 && self.trap_ratio.is_finite()) {
            return Err(("trap_ratio", "must be positive".into()));
        }
        if !(self.n2_over_n2c_min > 0.0 && self.n2_over_n2c_max >= self.n2_over_n2c_min) {
            return Err(("n2_over_n2c_min", "need 0 < min <= max".into()));
        }
        Ok(())
    }

    fn grids(&self) -> (Vec<f64>, Vec<f64>) {
        let lin = |a: f64, b: f64, n: usize| -> Vec<f64> {
            if n == 1 {
                return vec![a];
            }
            (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
        };
        let (lo, hi) = (self.n2_over_n2c_min.ln(), self.n2_over_n2c_max.ln());
        (
            lin(self.eta_min, self.eta_max, self.eta_steps),
            lin(lo, hi, self.n2_steps).into_iter().map(f64::exp).collect(),
        )
    }
}

fn from_flags(a: &PhaseArgs) -> PhaseCfg {
    PhaseCfg {
        eta_min: a.eta_min,
        eta_max: a.eta_max,
        eta_steps: a.eta_steps,
        trap_ratio: a.ratio,
        n2_over_n2c_min: a.n2_min,
        n2_over_n2c_max: a.n2_max,
        n2_steps: a.n2_steps,
    }
}

pub fn run(a: &PhaseArgs) -> Result<(), CliError> {
    let cfg = match &a.common.config {
        Some(path) => {
            let l = Loaded::<PhaseCfg>::read(path)?;
            l.value.check().map_err(|(k, m)| l.invalid(k, m))?;
            l.value
        }
        None => {
            let cfg = from_flags(a);
            cfg.check().map_err(|(k, m)| -> ConfigError { flag_error(&k.replace('_', "-"), m) })?;
            cfg
        }
    };
    let (etas, n2s) = cfg.grids();
    let diagram = budget::phase_diagram(&etas, &n2s, cfg.trap_ratio).map_err(|e| flag_error("eta-min", e))?;

    let mut table = Table::new(&["eta", "n2_over_n2c", "region", "d1max", "d2max", "dequal"]);
    for r in &diagram.rows {
        table.rows.push(vec![
            Cell::Num(r.eta),
            Cell::Num(r.n2_over_n2c),
            Cell::Text(r.region.as_str().into()),
            Cell::Num(r.d1max),
            Cell::Num(r.d2max),
            Cell::Num(r.dequal),
        ]);
    }
    let mut out = Output::new(&a.common.out, "phase_diagram");
    out.write_table("", &table, a.common.format)?;
    out.write_json("_boundaries.json", &diagram.boundaries)?;
    out.finish("phase-diagram", to_value(&cfg)?, a.common.seed)?;
    print_json(&serde_json::json!({ "rows": diagram.rows.len(), "boundaries": diagram.boundaries.len() }))
}
