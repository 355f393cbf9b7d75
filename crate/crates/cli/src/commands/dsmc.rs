use serde::{Deserialize, Serialize};

use sympcool::constants::{MICROKELVIN, MICROMETER};
use sympcool::dsmc::{self, DsmcConfig, DsmcError, EnsembleSpec};
use sympcool::physics::TrapFrequencies;

use super::{common_config, load, print_json, to_value};
use crate::config::{positive, CliError, SpeciesCfg};
use crate::output::{Cell, Output, Table};
use crate::Common;

fn default_sample_every() -> usize {
    5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleCfg {
    pub species: SpeciesCfg,
    /// Axis trap frequencies `[x, y, z]`, Hz; z is vertical.
    pub trap_freq_hz: [f64; 3],
    /// Depth of the trap centre below the origin.
    #[serde(default)]
    pub sag_um: f64,
    pub n_test: usize,
    #[serde(rename = "T_uK")]
    pub t_uk: f64,
    /// Physical atoms per test particle.
    pub weight: f64,
}

impl EnsembleCfg {
    fn spec(&self) -> Result<EnsembleSpec, String> {
        let [x, y, z] = self.trap_freq_hz.map(|f| f * std::f64::consts::TAU);
        Ok(EnsembleSpec {
            species: self.species.to_state().map_err(|e| e.to_string())?,
            trap: TrapFrequencies {
                omega_x: x,
                omega_y: y,
                omega_z: z,
                omega_bar: (x * y * z).cbrt(),
                sag: self.sag_um * MICROMETER,
            },
            n_test: self.n_test,
            temperature: self.t_uk * MICROKELVIN,
            weight: self.weight,
        })
    }
}

/// Seeding comes from `--seed`, not from the file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DsmcCfg {
    pub ensembles: Vec<EnsembleCfg>,
    pub t_end_ms: f64,
    /// Defaults to 1/25 of the shortest trap period.
    #[serde(default)]
    pub dt_us: Option<f64>,
    /// Defaults to a quarter of the smallest initial cloud width.
    #[serde(default)]
    pub cell_um: Option<f64>,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
}

impl DsmcCfg {
    fn check(&self) -> Result<(), (&'static str, String)> {
        positive("t_end_ms", self.t_end_ms)?;
        if let Some(dt) = self.dt_us {
            positive("dt_us", dt)?;
        }
        if let Some(h) = self.cell_um {
            positive("cell_um", h)?;
        }
        for e in &self.ensembles {
            positive("T_uK", e.t_uk)?;
            positive("weight", e.weight)?;
            for f in e.trap_freq_hz {
                positive("trap_freq_hz", f)?;
            }
        }
        Ok(())
    }

    /// Fills the defaulted step and cell sizes.
    fn build(&mut self, seed: u64) -> Result<DsmcConfig, (&'static str, String)> {
        let ensembles = self
            .ensembles
            .iter()
            .map(EnsembleCfg::spec)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|m| ("species", m))?;
        let mut cfg = DsmcConfig {
            ensembles,
            dt: 0.0,
            t_end: self.t_end_ms * 1e-3,
            cell_size: 0.0,
            rng_seed: seed,
            sample_every: self.sample_every,
        };
        let max_omega = cfg.ensembles.iter().map(|e| e.trap.max_omega()).fold(0.0, f64::max);
        let dt_us = *self
            .dt_us
            .get_or_insert(std::f64::consts::TAU / max_omega / 25.0 * 1e6);
        cfg.dt = dt_us * 1e-6;
        let min_width = if cfg.ensembles.is_empty() { 0.0 } else { cfg.min_width() };
        cfg.cell_size = *self.cell_um.get_or_insert(min_width / 4.0 / MICROMETER) * MICROMETER;
        Ok(cfg)
    }
}

/// Config key most likely responsible for a rejected run.
fn key_for(e: &DsmcError) -> &'static str {
    let DsmcError::Invalid(m) = e else {
        return "ensembles";
    };
    if m.starts_with("dt") || m.contains("dt <") {
        "dt_us"
    } else if m.starts_with("cell_size") {
        "cell_um"
    } else if m.starts_with("sample_every") {
        "sample_every"
    } else {
        "ensembles"
    }
}

pub fn run(c: &Common) -> Result<(), CliError> {
    let cfg = load::<DsmcCfg>(common_config(c))?;
    cfg.value.check().map_err(|(k, m)| cfg.invalid(k, m))?;
    let mut canonical = cfg.value.clone();
    let dc = canonical.build(c.seed).map_err(|(k, m)| cfg.invalid(k, m))?;
    dc.validate().map_err(|e| cfg.invalid(key_for(&e), e))?;

    let result = dsmc::run(&dc).map_err(CliError::runtime)?;
    let summary = dsmc::summarize(&dc, &result);

    let mut table = Table::new(&["t", "T1_kin", "T2_kin", "collisions_cum"]);
    for s in &result.samples {
        table.rows.push(vec![
            Cell::Num(s.t),
            Cell::Num(s.t1_kin),
            s.t2_kin.map_or(Cell::Empty, Cell::Num),
            Cell::Int(s.collisions_cum),
        ]);
    }
    let mut out = Output::new(&c.out, "dsmc");
    out.write_table("", &table, c.format)?;
    out.write_json("_summary.json", &summary)?;
    out.finish("dsmc", to_value(&canonical)?, c.seed)?;
    for w in &summary.warnings {
        eprintln!("warning: {w:?}");
    }
    print_json(&summary)
}
