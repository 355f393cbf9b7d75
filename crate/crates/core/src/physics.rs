//! Ioffe-Pritchard trap model: per-species harmonic frequencies and
//! gravitational sag.
//!
//! The trap has a bias field `B0`, a radial quadrupole gradient `G` and an
//! axial (dipole-direction) curvature `C`. Near the field minimum an atom in
//! hyperfine state `|F, mF>` with Lande factor `(-1)^F / 2` sees
//!
//! ```text
//! omega_radial^2 = (-1)^F mF mu_B (G^2/B0 - C) / 2M
//! omega_axial^2  = (-1)^F mF mu_B C / 2M
//! ```
//!
//! Gravity shifts the vertical equilibrium by `g / omega_z^2`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{AMU, MU_B, STANDARD_GRAVITY};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("state |F={f}, mF={mf}> is anti-trapped at a field minimum")]
    AntiTrapped { f: i32, mf: i32 },
    #[error("no radial confinement: G^2/B0 = {g2_over_b0:.6e} T/m^2 <= C = {curvature:.6e} T/m^2")]
    RadialUnconfined { g2_over_b0: f64, curvature: f64 },
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

/// One trapped atomic species (a hyperfine state of a given isotope).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesState {
    pub label: String,
    #[serde(rename = "F")]
    pub f: i32,
    #[serde(rename = "mF")]
    pub mf: i32,
    /// kg
    pub mass: f64,
    /// Intraspecies elastic cross-section, m^2.
    pub sigma_self: f64,
    /// Interspecies elastic cross-section, m^2.
    pub sigma_cross: f64,
}

impl SpeciesState {
    pub fn new(
        label: impl Into<String>,
        f: i32,
        mf: i32,
        mass: f64,
        sigma_self: f64,
        sigma_cross: f64,
    ) -> Result<Self, PhysicsError> {
        let s = Self {
            label: label.into(),
            f,
            mf,
            mass,
            sigma_self,
            sigma_cross,
        };
        s.validate()?;
        Ok(s)
    }

    /// 87Rb in the given hyperfine state with equal self and cross sections.
    pub fn rb87(f: i32, mf: i32, sigma: f64) -> Result<Self, PhysicsError> {
        Self::new(
            format!("87Rb |F={f},mF={mf}>"),
            f,
            mf,
            crate::constants::RB87_MASS_AMU * AMU,
            sigma,
            sigma,
        )
    }

    /// `(-1)^F mF`, i.e. twice the magnetic moment in units of mu_B.
    pub fn zeeman_factor(&self) -> i32 {
        if self.f.rem_euclid(2) == 0 {
            self.mf
        } else {
            -self.mf
        }
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(invalid("mass", "must be positive"));
        }
        if !(self.sigma_self >= 0.0) || !(self.sigma_cross >= 0.0) {
            return Err(invalid("cross-section", "must be non-negative"));
        }
        if self.zeeman_factor() <= 0 {
            return Err(PhysicsError::AntiTrapped {
                f: self.f,
                mf: self.mf,
            });
        }
        Ok(())
    }
}

/// Ioffe-Pritchard field parameters, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// Bias field, T.
    pub b0: f64,
    /// Radial quadrupole gradient, T/m.
    pub gradient: f64,
    /// Dipole-axis curvature, T/m^2.
    pub curvature: f64,
    /// m/s^2
    pub gravity: f64,
}

impl TrapConfig {
    /// Iron-core geometry with `B0 / C` fixed at 1 cm^2 and `G` = 1 kG/cm.
    pub fn iron_core(b0_gauss: f64) -> Self {
        let b0 = b0_gauss * crate::constants::GAUSS;
        Self {
            b0,
            gradient: crate::constants::KILOGAUSS_PER_CM,
            curvature: b0 / 1e-4,
            gravity: STANDARD_GRAVITY,
        }
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        if !(self.b0 > 0.0) {
            return Err(invalid("B0", "must be positive"));
        }
        if !(self.gradient >= 0.0) {
            return Err(invalid("G", "must be non-negative"));
        }
        if !(self.curvature >= 0.0) {
            return Err(invalid("C", "must be non-negative"));
        }
        if !self.gravity.is_finite() {
            return Err(invalid("gravity", "must be finite"));
        }
        Ok(())
    }

    /// Net radial curvature `G^2/B0 - C`, T/m^2.
    pub fn radial_curvature(&self) -> f64 {
        self.gradient * self.gradient / self.b0 - self.curvature
    }
}

/// Harmonic frequencies of one species in a trap, plus its vertical sag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapFrequencies {
    /// Dipole axis, rad/s.
    pub omega_x: f64,
    pub omega_y: f64,
    /// Vertical, rad/s.
    pub omega_z: f64,
    /// Geometric mean, rad/s.
    pub omega_bar: f64,
    /// Equilibrium vertical displacement below the field minimum, m.
    pub sag: f64,
}

impl TrapFrequencies {
    /// Frequencies with the sag implied by `gravity`.
    pub fn new(omega_x: f64, omega_y: f64, omega_z: f64, gravity: f64) -> Self {
        Self {
            omega_x,
            omega_y,
            omega_z,
            omega_bar: (omega_x * omega_y * omega_z).cbrt(),
            sag: gravity / (omega_z * omega_z),
        }
    }

    /// Isotropic trap with an explicit sag.
    pub fn isotropic(omega: f64, sag: f64) -> Self {
        Self {
            omega_x: omega,
            omega_y: omega,
            omega_z: omega,
            omega_bar: omega,
            sag,
        }
    }

    pub fn axes(&self) -> [f64; 3] {
        [self.omega_x, self.omega_y, self.omega_z]
    }

    pub fn max_omega(&self) -> f64 {
        self.omega_x.max(self.omega_y).max(self.omega_z)
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        if self.axes().iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(invalid("trap frequencies", "must be positive and finite"));
        }
        if !self.sag.is_finite() {
            return Err(invalid("sag", "must be finite"));
        }
        Ok(())
    }
}

/// Harmonic frequencies and sag of `species` in `trap`.
pub fn trap_frequencies(
    trap: &TrapConfig,
    species: &SpeciesState,
) -> Result<TrapFrequencies, PhysicsError> {
    trap.validate()?;
    species.validate()?;
    let radial = trap.radial_curvature();
    if !(radial > 0.0) {
        return Err(PhysicsError::RadialUnconfined {
            g2_over_b0: trap.gradient * trap.gradient / trap.b0,
            curvature: trap.curvature,
        });
    }
    let stiffness = f64::from(species.zeeman_factor()) * MU_B / (2.0 * species.mass);
    let omega_r = (stiffness * radial).sqrt();
    let omega_x = (stiffness * trap.curvature).sqrt();
    if !(omega_x > 0.0) {
        return Err(invalid("C", "zero curvature leaves the dipole axis unconfined"));
    }
    Ok(TrapFrequencies::new(omega_x, omega_r, omega_r, trap.gravity))
}

/// Difference of the vertical sags, `g/omega_1z^2 - g/omega_2z^2`.
pub fn relative_sag(f1: &TrapFrequencies, f2: &TrapFrequencies) -> f64 {
    f1.sag - f2.sag
}

fn invalid(field: &'static str, reason: &str) -> PhysicsError {
    PhysicsError::Invalid {
        field,
        reason: reason.to_string(),
    }
}
