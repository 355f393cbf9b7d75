use serde::{Deserialize, Serialize};

use sympcool::constants::{self, MICROMETER};
use sympcool::physics::{relative_sag, trap_frequencies};

use super::{common_config, hz, load, print_json, to_value};
use crate::config::{CliError, SpeciesCfg, TrapCfg};
use crate::output::{Cell, Output, Table};
use crate::Common;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapRunCfg {
    pub trap: TrapCfg,
    /// One or two species.
    pub species: Vec<SpeciesCfg>,
}

#[derive(Debug, Serialize)]
struct SpeciesFrequencies {
    label: String,
    fx_hz: f64,
    fy_hz: f64,
    fz_hz: f64,
    fbar_hz: f64,
    sag_um: f64,
}

#[derive(Debug, Serialize)]
struct TrapSummary {
    species: Vec<SpeciesFrequencies>,
    /// Vertical offset of the first cloud below the second.
    relative_sag_um: Option<f64>,
}

pub fn run(c: &Common) -> Result<(), CliError> {
    let mut cfg = load::<TrapRunCfg>(common_config(c))?;
    cfg.value.trap = cfg.value.trap.clone().canonical();
    if !(1..=2).contains(&cfg.value.species.len()) {
        return Err(cfg.invalid("species", "give one or two species").into());
    }
    let trap = cfg.value.trap.to_trap();
    trap.validate().map_err(|e| cfg.invalid("trap", e))?;

    let mut freqs = Vec::new();
    for s in &cfg.value.species {
        let state = s.to_state().map_err(|e| cfg.invalid("species", e))?;
        freqs.push(trap_frequencies(&trap, &state).map_err(|e| cfg.invalid("trap", e))?);
    }
    let summary = TrapSummary {
        species: cfg
            .value
            .species
            .iter()
            .zip(&freqs)
            .map(|(s, f)| SpeciesFrequencies {
                label: s.label.clone(),
                fx_hz: hz(f.omega_x),
                fy_hz: hz(f.omega_y),
                fz_hz: hz(f.omega_z),
                fbar_hz: hz(f.omega_bar),
                sag_um: f.sag / MICROMETER,
            })
            .collect(),
        relative_sag_um: (freqs.len() == 2).then(|| relative_sag(&freqs[0], &freqs[1]) / MICROMETER),
    };

    let mut table = Table::new(&["label", "fx_hz", "fy_hz", "fz_hz", "fbar_hz", "sag_um"]);
    for s in &summary.species {
        table.rows.push(vec![
            Cell::Text(s.label.clone()),
            Cell::Num(s.fx_hz),
            Cell::Num(s.fy_hz),
            Cell::Num(s.fz_hz),
            Cell::Num(s.fbar_hz),
            Cell::Num(s.sag_um),
        ]);
    }
    let mut out = Output::new(&c.out, "trap");
    out.write_table("", &table, c.format)?;
    out.write_json("_summary.json", &summary)?;
    out.write("_constants.json", format!("{}\n", constants::table_json()).as_bytes())?;
    out.finish("trap", to_value(&cfg.value)?, c.seed)?;
    print_json(&summary)
}
