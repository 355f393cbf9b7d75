use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use sympcool::constants::{AMU, MICROKELVIN, MICROMETER, STANDARD_GRAVITY};
use sympcool::contact::{self, TwoGasState};
use sympcool::physics::TrapFrequencies;

use super::{load, print_json, to_value};
use crate::config::{flag_error, positive, CliError};
use crate::output::{Cell, Output, Table};
use crate::Common;

#[derive(Debug, Clone, Args)]
pub struct ContactArgs {
    #[command(flatten)]
    common: Common,
    /// Two-gas state file; same as `--config`.
    #[arg(long, value_name = "PATH")]
    state: Option<PathBuf>,
    /// `var:start:stop:count`, SI values; var is one of
    /// delta, T1, T2, N1, N2, sigma12.
    #[arg(long)]
    sweep: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateCfg {
    #[serde(rename = "N1")]
    pub n1: f64,
    #[serde(rename = "N2")]
    pub n2: f64,
    #[serde(rename = "T1_uK")]
    pub t1_uk: f64,
    #[serde(rename = "T2_uK")]
    pub t2_uk: f64,
    #[serde(rename = "M1_amu")]
    pub m1_amu: f64,
    #[serde(rename = "M2_amu")]
    pub m2_amu: f64,
    /// Axis trap frequencies `[x, y, z]`, Hz; z is vertical.
    pub f1_hz: [f64; 3],
    pub f2_hz: [f64; 3],
    pub sigma12_m2: f64,
    /// Vertical separation of the cloud centres.
    pub delta_um: f64,
}

impl StateCfg {
    fn to_state(&self) -> TwoGasState {
        let trap = |f: [f64; 3]| {
            let [x, y, z] = f.map(|v| v * std::f64::consts::TAU);
            TrapFrequencies::new(x, y, z, STANDARD_GRAVITY)
        };
        TwoGasState {
            n1: self.n1,
            n2: self.n2,
            t1: self.t1_uk * MICROKELVIN,
            t2: self.t2_uk * MICROKELVIN,
            f1: trap(self.f1_hz),
            f2: trap(self.f2_hz),
            m1: self.m1_amu * AMU,
            m2: self.m2_amu * AMU,
            sigma12: self.sigma12_m2,
            delta: self.delta_um * MICROMETER,
        }
    }

    fn check(&self) -> Result<(), (&'static str, String)> {
        positive("N1", self.n1)?;
        positive("N2", self.n2)?;
        positive("T1_uK", self.t1_uk)?;
        positive("T2_uK", self.t2_uk)?;
        positive("M1_amu", self.m1_amu)?;
        positive("M2_amu", self.m2_amu)?;
        for f in self.f1_hz {
            positive("f1_hz", f)?;
        }
        for f in self.f2_hz {
            positive("f2_hz", f)?;
        }
        if !(self.sigma12_m2 >= 0.0) {
            return Err(("sigma12_m2", "must be non-negative".into()));
        }
        if !self.delta_um.is_finite() {
            return Err(("delta_um", "must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SweepVar {
    Delta,
    T1,
    T2,
    N1,
    N2,
    Sigma12,
}

impl SweepVar {
    fn apply(self, s: &mut TwoGasState, x: f64) {
        match self {
            SweepVar::Delta => s.delta = x,
            SweepVar::T1 => s.t1 = x,
            SweepVar::T2 => s.t2 = x,
            SweepVar::N1 => s.n1 = x,
            SweepVar::N2 => s.n2 = x,
            SweepVar::Sigma12 => s.sigma12 = x,
        }
    }
}

struct Sweep {
    var: SweepVar,
    name: String,
    start: f64,
    stop: f64,
    count: usize,
}

fn parse_sweep(spec: &str) -> Result<Sweep, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [name, start, stop, count] = parts[..] else {
        return Err(format!("expected var:start:stop:count, got {spec:?}"));
    };
    let var = match name {
        "delta" => SweepVar::Delta,
        "T1" => SweepVar::T1,
        "T2" => SweepVar::T2,
        "N1" => SweepVar::N1,
        "N2" => SweepVar::N2,
        "sigma12" => SweepVar::Sigma12,
        _ => return Err(format!("unknown sweep variable {name:?}")),
    };
    let num = |s: &str| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
    let (start, stop) = (num(start)?, num(stop)?);
    let count: usize = count.parse().map_err(|e| format!("{count:?}: {e}"))?;
    if count < 2 || !start.is_finite() || !stop.is_finite() {
        return Err("need finite bounds and at least 2 points".into());
    }
    Ok(Sweep {
        var,
        name: name.to_string(),
        start,
        stop,
        count,
    })
}

pub fn run(a: &ContactArgs) -> Result<(), CliError> {
    let path = a.state.as_deref().or(a.common.config.as_deref());
    let cfg = load::<StateCfg>(path)?;
    cfg.value.check().map_err(|(k, m)| cfg.invalid(k, m))?;
    let sweep = a
        .sweep
        .as_deref()
        .map(parse_sweep)
        .transpose()
        .map_err(|m| flag_error("sweep", m))?;
    let state = cfg.value.to_state();
    let report = contact::report(&state);

    let mut out = Output::new(&a.common.out, "contact");
    out.write_json(".json", &report)?;
    if let Some(sw) = sweep {
        let mut table = Table::new(&[sw.name.as_str(), "rho_z", "overlap", "Gamma", "W", "tau"]);
        for i in 0..sw.count {
            let x = sw.start + (sw.stop - sw.start) * i as f64 / (sw.count - 1) as f64;
            let mut s = state;
            sw.var.apply(&mut s, x);
            s.validate().map_err(|m| flag_error("sweep", format!("{} = {x}: {m}", sw.name)))?;
            let r = contact::report(&s);
            table.rows.push(
                [x, r.rho_z, r.overlap, r.gamma, r.w, r.tau]
                    .into_iter()
                    .map(Cell::Num)
                    .collect(),
            );
        }
        out.write_table("_sweep", &table, a.common.format)?;
    }
    out.finish("contact", to_value(&cfg.value)?, a.common.seed)?;
    print_json(&report)
}
