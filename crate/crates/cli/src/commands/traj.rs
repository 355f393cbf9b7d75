use clap::Args;
use serde::{Deserialize, Serialize};

use sympcool::budget::Region;
use sympcool::constants::MICROKELVIN;
use sympcool::contact::TwoGasState;
use sympcool::physics::{relative_sag, trap_frequencies};
use sympcool::trajectory::{
    self, ContactMode, EvaporationModel, Event, RampSchedule, Termination, TrajectoryConfig, TrajectoryError,
};

use super::{load, print_json, to_value};
use crate::config::{flag_error, positive, CliError, SpeciesCfg, TrapCfg};
use crate::output::{Cell, Format, Output, Table};
use crate::Common;

#[derive(Debug, Clone, Args)]
pub struct TrajArgs {
    #[command(flatten)]
    common: Common,
    /// Also write a gnuplot script for the series.
    #[arg(long)]
    plot: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum EvaporationCfg {
    /// `dN1/dt = -prefactor gamma1 exp(-eta) N1`.
    Rate {
        #[serde(default = "one")]
        prefactor: f64,
    },
    /// Piecewise-linear `[t_s, N1]` knots starting at `N1_ini`.
    Ramp { knots: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactCfg {
    Instant,
    Finite,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajCfg {
    pub trap: TrapCfg,
    pub buffer: SpeciesCfg,
    pub target: SpeciesCfg,
    #[serde(rename = "N1_ini")]
    pub n1_ini: f64,
    #[serde(rename = "N2")]
    pub n2: f64,
    #[serde(rename = "T1_ini_uK")]
    pub t1_ini_uk: f64,
    /// Defaults to the buffer temperature.
    #[serde(rename = "T2_ini_uK", default)]
    pub t2_ini_uk: Option<f64>,
    pub eta: f64,
    pub evaporation: EvaporationCfg,
    pub contact: ContactCfg,
    pub t_end_s: f64,
    /// Defaults to `t_end_s / 100`.
    #[serde(default)]
    pub dt_max_s: Option<f64>,
    /// Stop at the first threshold crossing.
    #[serde(default = "yes")]
    pub halt_at_bec: bool,
    #[serde(rename = "N1_floor", default = "one")]
    pub n1_floor: f64,
}

impl TrajCfg {
    fn canonical(mut self) -> Self {
        self.trap = self.trap.canonical();
        self.t2_ini_uk.get_or_insert(self.t1_ini_uk);
        self.dt_max_s.get_or_insert(self.t_end_s / 100.0);
        self
    }

    fn check(&self) -> Result<(), (&'static str, String)> {
        positive("N1_ini", self.n1_ini)?;
        positive("N2", self.n2)?;
        positive("T1_ini_uK", self.t1_ini_uk)?;
        positive("T2_ini_uK", self.t2_ini_uk.unwrap_or(self.t1_ini_uk))?;
        positive("t_end_s", self.t_end_s)?;
        positive("dt_max_s", self.dt_max_s.unwrap_or(self.t_end_s / 100.0))?;
        if !(self.eta > 2.0) {
            return Err(("eta", format!("must exceed 2, got {}", self.eta)));
        }
        match &self.evaporation {
            EvaporationCfg::Rate { prefactor } => positive("prefactor", *prefactor),
            EvaporationCfg::Ramp { knots } => match knots.first() {
                Some(&[t0, n0]) if t0 == 0.0 && (n0 / self.n1_ini - 1.0).abs() <= 1e-12 => Ok(()),
                _ => Err(("knots", "first knot must be [0, N1_ini]".into())),
            },
        }
    }
}

#[derive(Debug, Serialize)]
struct TrajSummary {
    termination: Termination,
    events: Vec<Event>,
    region: Region,
    /// Contact rates evaluated outside the equal-mass model.
    extrapolated: bool,
    energy_residual: f64,
    points: usize,
}

pub fn run(a: &TrajArgs) -> Result<(), CliError> {
    if a.plot && a.common.format == Format::Json {
        return Err(flag_error("plot", "the plot script reads CSV; use --format csv").into());
    }
    let mut cfg = load::<TrajCfg>(a.common.config.as_deref())?;
    cfg.value.check().map_err(|(k, m)| cfg.invalid(k, m))?;
    cfg.value = cfg.value.clone().canonical();
    let v = &cfg.value;

    let trap = v.trap.to_trap();
    let buffer = v.buffer.to_state().map_err(|e| cfg.invalid("buffer", e))?;
    let target = v.target.to_state().map_err(|e| cfg.invalid("target", e))?;
    let f1 = trap_frequencies(&trap, &buffer).map_err(|e| cfg.invalid("trap", e))?;
    let f2 = trap_frequencies(&trap, &target).map_err(|e| cfg.invalid("trap", e))?;
    let initial = TwoGasState {
        n1: v.n1_ini,
        n2: v.n2,
        t1: v.t1_ini_uk * MICROKELVIN,
        t2: v.t2_ini_uk.unwrap_or(v.t1_ini_uk) * MICROKELVIN,
        f1,
        f2,
        m1: buffer.mass,
        m2: target.mass,
        sigma12: buffer.sigma_cross,
        delta: relative_sag(&f1, &f2),
    };
    let evaporation = match &v.evaporation {
        EvaporationCfg::Rate { prefactor } => EvaporationModel::RateDriven {
            prefactor: *prefactor,
            sigma_self: buffer.sigma_self,
        },
        EvaporationCfg::Ramp { knots } => EvaporationModel::RampDriven(RampSchedule {
            knots: knots.iter().map(|&[t, n]| (t, n)).collect(),
        }),
    };
    let mode = match v.contact {
        ContactCfg::Instant => ContactMode::Instant,
        ContactCfg::Finite => ContactMode::Finite,
    };
    let tc = TrajectoryConfig {
        dt_max: v.dt_max_s.unwrap_or(v.t_end_s / 100.0),
        halt_at_bec: v.halt_at_bec,
        n1_floor: v.n1_floor,
        ..TrajectoryConfig::new(initial, v.eta, evaporation, mode, v.t_end_s)
    };
    let tr = trajectory::simulate(&tc).map_err(|e| match e {
        TrajectoryError::Invalid(m) => CliError::Config(cfg.invalid("evaporation", m)),
        e => CliError::runtime(e),
    })?;

    let events = trajectory::detect_events(&tr);
    let summary = TrajSummary {
        termination: tr.termination,
        region: trajectory::region_from_events(&events),
        events,
        extrapolated: tr.extrapolated,
        energy_residual: tr.energy_residual(),
        points: tr.points.len(),
    };
    let mut table = Table::new(&["t", "N1", "T1", "T2", "D1", "D2", "Gamma", "overlap", "stalled", "bec1", "bec2"]);
    for p in &tr.points {
        let mut row: Vec<Cell> = [p.t, p.n1, p.t1, p.t2, p.d1, p.d2, p.gamma, p.overlap]
            .into_iter()
            .map(Cell::Num)
            .collect();
        row.extend([p.stalled, p.bec1, p.bec2].map(Cell::Flag));
        table.rows.push(row);
    }

    let mut out = Output::new(&a.common.out, "traj");
    let series = out.write_table("", &table, a.common.format)?;
    out.write_json("_events.json", &summary)?;
    if a.plot {
        let name = series.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        out.write(".gp", gnuplot_script(&name).as_bytes())?;
    }
    out.finish("traj", to_value(v)?, a.common.seed)?;
    print_json(&summary)
}

/// Temperatures and densities against time, log scale, read from `csv`.
fn gnuplot_script(csv: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set logscale y\n\
         set xlabel 't (s)'\n\
         set multiplot layout 2,1\n\
         set ylabel 'T (K)'\n\
         plot '{csv}' using 1:3 with lines, '' using 1:4 with lines\n\
         set ylabel 'D'\n\
         plot '{csv}' using 1:5 with lines, '' using 1:6 with lines, 2.612 title 'threshold' dashtype 2\n\
         unset multiplot\n"
    )
}
