use serde::{Deserialize, Serialize};

use sympcool::budget::{self, BudgetParams, CoolingOutcome, CriticalNumbers, DEFAULT_PSD_PREFACTOR};
use sympcool::constants::MICROKELVIN;

use super::{common_config, load, print_json, to_value};
use crate::config::{positive, CliError};
use crate::output::{Cell, Output, Table};
use crate::Common;

fn default_prefactor() -> f64 {
    DEFAULT_PSD_PREFACTOR
}

fn default_points() -> usize {
    200
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetCfg {
    pub eta: f64,
    #[serde(rename = "N1_ini")]
    pub n1_ini: f64,
    #[serde(rename = "N2")]
    pub n2: f64,
    #[serde(rename = "T_ini_uK")]
    pub t_ini_uk: f64,
    /// Geometric-mean trap frequencies, Hz.
    pub f1_bar_hz: f64,
    pub f2_bar_hz: f64,
    #[serde(default = "default_prefactor")]
    pub psd_prefactor: f64,
    /// Samples of the curve, log-spaced in `N1 + N2`.
    #[serde(default = "default_points")]
    pub curve_points: usize,
}

impl BudgetCfg {
    fn check(&self) -> Result<(), (&'static str, String)> {
        positive("N1_ini", self.n1_ini)?;
        positive("N2", self.n2)?;
        positive("T_ini_uK", self.t_ini_uk)?;
        positive("f1_bar_hz", self.f1_bar_hz)?;
        positive("f2_bar_hz", self.f2_bar_hz)?;
        positive("psd_prefactor", self.psd_prefactor)?;
        if !(self.eta > 2.0) {
            return Err(("eta", format!("must exceed 2, got {}", self.eta)));
        }
        if self.curve_points < 2 {
            return Err(("curve_points", "need at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct BudgetSummary {
    alpha: f64,
    t_min_uk: f64,
    outcome: CoolingOutcome,
    /// Absent when the buffer density has no interior maximum.
    critical_numbers: Option<CriticalNumbers>,
}

pub fn run(c: &Common) -> Result<(), CliError> {
    let cfg = load::<BudgetCfg>(common_config(c))?;
    let v = &cfg.value;
    v.check().map_err(|(k, m)| cfg.invalid(k, m))?;
    let tau = std::f64::consts::TAU;
    let p = BudgetParams::new(v.eta, v.n1_ini, v.n2, v.t_ini_uk * MICROKELVIN, tau * v.f1_bar_hz, tau * v.f2_bar_hz)
        .map_err(|e| cfg.invalid("eta", e))?
        .with_prefactor(v.psd_prefactor);

    let summary = BudgetSummary {
        alpha: p.alpha(),
        t_min_uk: budget::t_min(&p) / MICROKELVIN,
        outcome: budget::classify(v.n2, &p).map_err(CliError::runtime)?,
        critical_numbers: budget::critical_numbers(&p).ok(),
    };

    let mut table = Table::new(&["N1", "T", "D1", "D2"]);
    let (lo, hi) = (v.n2.ln(), (v.n1_ini + v.n2).ln());
    for i in 0..v.curve_points {
        let n1 = (lo + (hi - lo) * i as f64 / (v.curve_points - 1) as f64).exp() - v.n2;
        let n1 = if i == 0 { 0.0 } else { n1.max(0.0) };
        let t = budget::temperature_of(n1, &p).map_err(CliError::runtime)?;
        let (d1, d2) = budget::model_psd(n1, &p).map_err(CliError::runtime)?;
        table.rows.push(vec![Cell::Num(n1), Cell::Num(t), Cell::Num(d1), Cell::Num(d2)]);
    }
    let mut out = Output::new(&c.out, "budget");
    out.write_table("", &table, c.format)?;
    out.write_json("_summary.json", &summary)?;
    out.finish("budget", to_value(v)?, c.seed)?;
    print_json(&summary)
}
