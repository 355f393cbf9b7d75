//! Physical constants (CODATA 2018) and unit conversions.
//!
//! Every derived number in the crate goes through this table so results are
//! bit-reproducible across runs and platforms.

use serde::Serialize;

/// Boltzmann constant, J/K (exact).
pub const K_B: f64 = 1.380_649e-23;
/// Planck constant, J s (exact).
pub const H: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = H / (2.0 * std::f64::consts::PI);
/// Bohr magneton, J/T.
pub const MU_B: f64 = 9.274_010_078_3e-24;
/// Atomic mass constant, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;
/// Standard gravity, m/s^2.
pub const STANDARD_GRAVITY: f64 = 9.806_65;

/// Mass of 87Rb in atomic mass units.
pub const RB87_MASS_AMU: f64 = 86.909_180_531;
/// Mass of 6Li in atomic mass units.
pub const LI6_MASS_AMU: f64 = 6.015_122_887_4;

/// Peak phase-space density at the onset of Bose-Einstein condensation, zeta(3/2).
pub const BEC_THRESHOLD: f64 = 2.612;

pub const GAUSS: f64 = 1e-4;
/// 1 kG/cm in T/m.
pub const KILOGAUSS_PER_CM: f64 = 10.0;
/// 1 G/cm^2 in T/m^2.
pub const GAUSS_PER_CM2: f64 = 1.0;
pub const MICROKELVIN: f64 = 1e-6;
pub const NANOKELVIN: f64 = 1e-9;
pub const MICROMETER: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct ConstantEntry {
    pub name: &'static str,
    pub symbol: &'static str,
    pub value: f64,
    pub unit: &'static str,
    pub source: &'static str,
}

/// The full table, in the order it is exported.
pub fn table() -> Vec<ConstantEntry> {
    let c = |name, symbol, value, unit, source| ConstantEntry {
        name,
        symbol,
        value,
        unit,
        source,
    };
    vec![
        c("Boltzmann constant", "k_B", K_B, "J/K", "CODATA 2018 (exact)"),
        c("reduced Planck constant", "hbar", HBAR, "J s", "CODATA 2018"),
        c("Planck constant", "h", H, "J s", "CODATA 2018 (exact)"),
        c("Bohr magneton", "mu_B", MU_B, "J/T", "CODATA 2018"),
        c("atomic mass constant", "u", AMU, "kg", "CODATA 2018"),
        c("standard gravity", "g_n", STANDARD_GRAVITY, "m/s^2", "CGPM 1901 (exact)"),
        c("87Rb atomic mass", "M_Rb87", RB87_MASS_AMU * AMU, "kg", "AME 2016 x CODATA u"),
        c("6Li atomic mass", "M_Li6", LI6_MASS_AMU * AMU, "kg", "AME 2016 x CODATA u"),
        c("BEC threshold", "zeta(3/2)", BEC_THRESHOLD, "1", "rounded zeta(3/2)"),
        c("gauss", "G", GAUSS, "T", "definition"),
        c("kilogauss per centimetre", "kG/cm", KILOGAUSS_PER_CM, "T/m", "definition"),
        c("gauss per square centimetre", "G/cm^2", GAUSS_PER_CM2, "T/m^2", "definition"),
    ]
}

/// Constants table as pretty-printed JSON, for audit files.
pub fn table_json() -> String {
    serde_json::to_string_pretty(&table()).expect("constant table serializes")
}
