//! Thermal contact between two trapped clouds.
//!
//! With both clouds Maxwell-Boltzmann distributed at `T1` and `T2`, the
//! interspecies collision rate is
//!
//! ```text
//! Gamma = N1 N2 sigma12 V / (pi^2 rho_x rho_y rho_z) * exp(-Delta^2 / 2 rho_z^2)
//! ```
//!
//! where `V` is the RMS sum of the thermal velocities and `rho_i` the RMS sum
//! of the cloud sizes along axis `i`. Each collision moves on average
//! `xi k_B (T2 - T1)` into the buffer, with `xi = 4 M1 M2 / (M1 + M2)^2`
//! (unity for equal masses). For unequal masses `V` and `rho` use each
//! species' own mass.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::K_B;
use crate::physics::TrapFrequencies;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoGasState {
    pub n1: f64,
    pub n2: f64,
    /// K
    pub t1: f64,
    /// K
    pub t2: f64,
    pub f1: TrapFrequencies,
    pub f2: TrapFrequencies,
    /// kg
    pub m1: f64,
    /// kg
    pub m2: f64,
    /// m^2
    pub sigma12: f64,
    /// Relative vertical sag, m.
    pub delta: f64,
}

impl TwoGasState {
    /// The same state with the two species relabelled.
    pub fn swapped(&self) -> Self {
        Self {
            n1: self.n2,
            n2: self.n1,
            t1: self.t2,
            t2: self.t1,
            f1: self.f2,
            f2: self.f1,
            m1: self.m2,
            m2: self.m1,
            sigma12: self.sigma12,
            delta: -self.delta,
        }
    }

    /// Unequal masses put `V` and `rho` outside the equal-mass derivation.
    pub fn is_extrapolated(&self) -> bool {
        self.m1 != self.m2
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.t1 > 0.0 && self.t2 > 0.0) {
            return Err("temperatures must be positive".into());
        }
        if !(self.n1 >= 0.0 && self.n2 >= 0.0) {
            return Err("atom numbers must be non-negative".into());
        }
        if !(self.m1 > 0.0 && self.m2 > 0.0) {
            return Err("masses must be positive".into());
        }
        if !(self.sigma12 >= 0.0) {
            return Err("sigma12 must be non-negative".into());
        }
        if !self.delta.is_finite() {
            return Err("delta must be finite".into());
        }
        self.f1.validate().map_err(|e| e.to_string())?;
        self.f2.validate().map_err(|e| e.to_string())?;
        Ok(())
    }
}

/// RMS sum of the cloud sizes along x, y, z.
pub fn rms_sizes(s: &TwoGasState) -> [f64; 3] {
    let (a, b) = (s.f1.axes(), s.f2.axes());
    std::array::from_fn(|i| {
        (K_B * (s.t1 / (s.m1 * a[i] * a[i]) + s.t2 / (s.m2 * b[i] * b[i]))).sqrt()
    })
}

/// RMS sum of the thermal velocities, `sqrt(k_B T1/M1 + k_B T2/M2)`.
pub fn relative_velocity_scale(s: &TwoGasState) -> f64 {
    (K_B * (s.t1 / s.m1 + s.t2 / s.m2)).sqrt()
}

/// `exp(-Delta^2 / 2 rho_z^2)`.
pub fn overlap_from(delta: f64, rho_z: f64) -> f64 {
    (-delta * delta / (2.0 * rho_z * rho_z)).exp()
}

pub fn overlap_factor(s: &TwoGasState) -> f64 {
    overlap_from(s.delta, rms_sizes(s)[2])
}

/// Collision rate per (buffer atom, target atom) pair, 1/s.
pub fn pair_collision_rate(s: &TwoGasState) -> f64 {
    let [rx, ry, rz] = rms_sizes(s);
    s.sigma12 * relative_velocity_scale(s) / (PI * PI * rx * ry * rz) * overlap_from(s.delta, rz)
}

/// Interspecies collisions per second.
pub fn interspecies_collision_rate(s: &TwoGasState) -> f64 {
    s.n1 * s.n2 * pair_collision_rate(s)
}

/// Fraction of `k_B (T2 - T1)` exchanged per collision, `4 M1 M2 / (M1 + M2)^2`.
pub fn energy_transfer_efficiency(m1: f64, m2: f64) -> f64 {
    4.0 * m1 * m2 / ((m1 + m2) * (m1 + m2))
}

/// Power flowing into the buffer, W. Positive when the target is hotter.
pub fn energy_exchange_rate(s: &TwoGasState) -> f64 {
    energy_transfer_efficiency(s.m1, s.m2) * K_B * (s.t2 - s.t1) * interspecies_collision_rate(s)
}

/// `8 (M1 M2)^2 / (M1 + M2)^3`.
pub fn equivalent_mass(m1: f64, m2: f64) -> f64 {
    let s = m1 + m2;
    8.0 * (m1 * m2) * (m1 * m2) / (s * s * s)
}

/// Relaxation rate of `T1 - T2`, `-(1/dT) d(dT)/dt`, from the energy
/// exchange rate and `E_i = 3 N_i k_B T_i`. Holds for any frequencies, masses
/// and sag; reduces to [`thermalization_rate_closed_form`] for equal
/// frequencies, zero sag, and to lowest order in `(T1 - T2)/T`.
pub fn interspecies_thermalization_rate(s: &TwoGasState) -> f64 {
    energy_transfer_efficiency(s.m1, s.m2) * (s.n1 + s.n2) * pair_collision_rate(s) / 3.0
}

/// `(N1 + N2) omega^3 sigma12 M_eq / (6 pi^2 k_B T)` with `T` the mean
/// temperature, for equal isotropic-mean frequencies.
pub fn thermalization_rate_closed_form(
    n_total: f64,
    t_mean: f64,
    omega_bar: f64,
    sigma12: f64,
    m_eq: f64,
) -> f64 {
    n_total * omega_bar.powi(3) * sigma12 * m_eq / (6.0 * PI * PI * K_B * t_mean)
}

/// Mean elastic collision rate per atom of a single species,
/// `N omega^3 sigma M / (2 pi^2 k_B T)`.
pub fn single_species_collision_rate(n: f64, t: f64, omega_bar: f64, sigma: f64, m: f64) -> f64 {
    n * omega_bar.powi(3) * sigma * m / (2.0 * PI * PI * K_B * t)
}

/// Contact summary used by the CLI and trajectory output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContactReport {
    pub rho_x: f64,
    pub rho_y: f64,
    pub rho_z: f64,
    pub overlap: f64,
    pub gamma: f64,
    pub w: f64,
    pub inv_tau: f64,
    pub tau: f64,
    pub extrapolated: bool,
}

pub fn report(s: &TwoGasState) -> ContactReport {
    let [rho_x, rho_y, rho_z] = rms_sizes(s);
    let inv_tau = interspecies_thermalization_rate(s);
    ContactReport {
        rho_x,
        rho_y,
        rho_z,
        overlap: overlap_from(s.delta, rho_z),
        gamma: interspecies_collision_rate(s),
        w: energy_exchange_rate(s),
        inv_tau,
        tau: 1.0 / inv_tau,
        extrapolated: s.is_extrapolated(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{AMU, LI6_MASS_AMU, RB87_MASS_AMU, STANDARD_GRAVITY};

    const M: f64 = RB87_MASS_AMU * AMU;

    fn state(t1: f64, t2: f64, delta: f64) -> TwoGasState {
        let f = TrapFrequencies::new(60.0, 700.0, 700.0, STANDARD_GRAVITY);
        TwoGasState {
            n1: 2e6,
            n2: 5e4,
            t1,
            t2,
            f1: f,
            f2: f,
            m1: M,
            m2: M,
            sigma12: 7e-16,
            delta,
        }
    }

    #[test]
    fn equal_clouds_size() {
        let s = state(1e-6, 1e-6, 0.0);
        let rho = rms_sizes(&s);
        for (r, w) in rho.iter().zip(s.f1.axes()) {
            let expect = (2.0 * K_B * 1e-6 / (M * w * w)).sqrt();
            assert!((r / expect - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn sizes_scale_with_root_temperature() {
        let (a, b) = (rms_sizes(&state(1e-6, 2e-6, 0.0)), rms_sizes(&state(4e-6, 8e-6, 0.0)));
        for i in 0..3 {
            assert!((b[i] / a[i] - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn vertical_size_in_high_field_geometry() {
        // omega_1z from Delta = 26 um with omega_2z = sqrt2 omega_1z:
        // Delta = g/(2 omega_1z^2); rho_z^2 = 1.5 k_B T / (M omega_1z^2).
        let w1 = (STANDARD_GRAVITY / (2.0 * 26e-6)).sqrt();
        let mut s = state(400e-9, 400e-9, 26e-6);
        s.f1 = TrapFrequencies::new(80.0, w1, w1, STANDARD_GRAVITY);
        s.f2 = TrapFrequencies::new(80.0 * 2f64.sqrt(), w1 * 2f64.sqrt(), w1 * 2f64.sqrt(), STANDARD_GRAVITY);
        assert!(((s.f1.sag - s.f2.sag) / 26e-6 - 1.0).abs() < 1e-12);
        let rz = rms_sizes(&s)[2];
        assert!((rz - 17.45e-6).abs() < 0.1e-6, "{rz}");
    }

    #[test]
    fn overlap_factors_at_quoted_geometries() {
        assert_eq!(overlap_from(0.0, 1e-5), 1.0);
        let high = overlap_from(26e-6, 12e-6);
        assert!((high - (-676.0f64 / 288.0).exp()).abs() < 1e-15);
        assert!((high - 0.096).abs() < 0.005);
        let low = overlap_from(7e-6, 8e-6);
        assert!((1.0 - low - 0.32).abs() < 0.01, "{low}");
    }

    #[test]
    fn energy_exchange_sign_and_identity() {
        let s = state(1e-6, 2e-6, 3e-6);
        assert!(energy_exchange_rate(&s) > 0.0);
        assert_eq!(energy_exchange_rate(&state(1e-6, 1e-6, 3e-6)), 0.0);
        let id = energy_exchange_rate(&s) / (K_B * interspecies_collision_rate(&s));
        assert!((id / (s.t2 - s.t1) - 1.0).abs() < 1e-12);
        let swapped = energy_exchange_rate(&s.swapped());
        assert!((swapped + energy_exchange_rate(&s)).abs() < 1e-12 * swapped.abs());
    }

    #[test]
    fn equivalent_mass_values() {
        assert!((equivalent_mass(M, M) / M - 1.0).abs() < 1e-15);
        let (rb, li) = (RB87_MASS_AMU, LI6_MASS_AMU);
        let m = equivalent_mass(rb, li);
        // 8 (86.909 * 6.0151)^2 / 92.924^3 = 2.7248; integer masses give 2.710
        assert!((m - 2.7248).abs() < 1e-3, "{m}");
        assert!((equivalent_mass(87.0, 6.0) - 2.710).abs() < 1e-3);
        assert!(m < li);
        assert!((equivalent_mass(6.0, 87.0) - equivalent_mass(87.0, 6.0)).abs() < 1e-15);
        let big = 1e9;
        assert!((equivalent_mass(big, 2.0) / (8.0 * 4.0 / big) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn equivalent_mass_peaks_at_equal_split() {
        let total = 10.0;
        let at_equal = equivalent_mass(5.0, 5.0);
        for i in 1..100 {
            let m1 = total * i as f64 / 100.0;
            assert!(equivalent_mass(m1, total - m1) <= at_equal + 1e-15);
        }
    }

    #[test]
    fn closed_form_recovered_for_equal_masses() {
        let f = TrapFrequencies::isotropic(400.0, 0.0);
        let s = TwoGasState {
            n1: 3e5,
            n2: 1e5,
            t1: 1.3e-6,
            t2: 0.7e-6,
            f1: f,
            f2: f,
            m1: M,
            m2: M,
            sigma12: 7e-16,
            delta: 0.0,
        };
        let general = interspecies_thermalization_rate(&s);
        let closed = thermalization_rate_closed_form(4e5, 1e-6, 400.0, 7e-16, equivalent_mass(M, M));
        assert!((general / closed - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_species_partition_gives_gamma_over_three() {
        let f = TrapFrequencies::isotropic(300.0, 0.0);
        let (n, t) = (1e6, 2e-6);
        let s = TwoGasState {
            n1: 0.3 * n,
            n2: 0.7 * n,
            t1: t,
            t2: t,
            f1: f,
            f2: f,
            m1: M,
            m2: M,
            sigma12: 7e-16,
            delta: 0.0,
        };
        let gamma = single_species_collision_rate(n, t, 300.0, 7e-16, M);
        assert!((interspecies_thermalization_rate(&s) / (gamma / 3.0) - 1.0).abs() < 1e-12);
        let g1 = single_species_collision_rate(s.n1, t, 300.0, 7e-16, M);
        let g2 = single_species_collision_rate(s.n2, t, 300.0, 7e-16, M);
        assert!((interspecies_thermalization_rate(&s) / ((g1 + g2) / 3.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mass_suppression_ratio() {
        let f = TrapFrequencies::isotropic(300.0, 0.0);
        let rb = TwoGasState {
            n1: 1e5,
            n2: 1e5,
            t1: 1e-6,
            t2: 1e-6,
            f1: f,
            f2: f,
            m1: M,
            m2: M,
            sigma12: 7e-16,
            delta: 0.0,
        };
        let li = TwoGasState {
            m2: LI6_MASS_AMU * AMU,
            ..rb
        };
        let ratio = interspecies_thermalization_rate(&li) / interspecies_thermalization_rate(&rb);
        let expect = equivalent_mass(M, li.m2) / M;
        assert!((ratio / expect - 1.0).abs() < 1e-12);
        assert!((ratio - 0.031).abs() < 1e-3);
        assert!(li.is_extrapolated() && !rb.is_extrapolated());
    }

    #[test]
    fn collision_rate_matches_boltzmann_integral() {
        // n-bar sigma v-bar with n-bar = int n^2 / N by quadrature and the
        // mean relative speed from the Maxwell speed distribution.
        let (n, t, w, sigma) = (1e6, 1e-6, 500.0, 7e-16);
        let sx = (K_B * t / (M * w * w)).sqrt();
        let gauss2 = |x: f64| {
            let g = (-x * x / (2.0 * sx * sx)).exp() / ((2.0 * PI).sqrt() * sx);
            g * g
        };
        let line = simpson(gauss2, -12.0 * sx, 12.0 * sx, 20_000);
        let mean_density = n * line.powi(3);
        // relative velocity: Maxwellian with per-axis variance 2 k T / M
        let s2 = 2.0 * K_B * t / M;
        let speed = |v: f64| {
            4.0 * PI * v * v * (-v * v / (2.0 * s2)).exp() / (2.0 * PI * s2).powf(1.5) * v
        };
        let vbar = simpson(speed, 0.0, 14.0 * s2.sqrt(), 20_000);
        let oracle = mean_density * sigma * vbar;
        let gamma = single_species_collision_rate(n, t, w, sigma, M);
        assert!((gamma / oracle - 1.0).abs() < 1e-9, "{}", gamma / oracle - 1.0);
    }

    #[test]
    fn gamma_scaling() {
        let g = single_species_collision_rate(1e5, 1e-6, 300.0, 1e-15, M);
        assert_eq!(single_species_collision_rate(2e5, 1e-6, 300.0, 1e-15, M), 2.0 * g);
        assert!((single_species_collision_rate(1e5, 2e-6, 300.0, 1e-15, M) / g - 0.5).abs() < 1e-15);
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn relabelling_leaves_gamma_invariant(
                t1 in 1e-8f64..1e-4, t2 in 1e-8f64..1e-4,
                n1 in 1.0f64..1e8, n2 in 1.0f64..1e8,
                delta in -5e-5f64..5e-5,
                mr in 0.05f64..20.0,
            ) {
                let mut s = state(t1, t2, delta);
                s.n1 = n1; s.n2 = n2; s.m2 = M * mr;
                s.f2 = TrapFrequencies::new(90.0, 900.0, 1000.0, STANDARD_GRAVITY);
                let (a, b) = (interspecies_collision_rate(&s), interspecies_collision_rate(&s.swapped()));
                prop_assert!((a / b - 1.0).abs() < 1e-12);
            }

            #[test]
            fn overlap_bounded_and_monotone(d1 in 0.0f64..1e-4, d2 in 0.0f64..1e-4, rz in 1e-6f64..1e-4) {
                let (a, b) = (overlap_from(d1, rz), overlap_from(d2, rz));
                prop_assert!((0.0..=1.0).contains(&a));
                if d1 < d2 { prop_assert!(a >= b); }
                prop_assert_eq!(overlap_from(d1, rz) == 1.0, d1 * d1 / (2.0 * rz * rz) < f64::EPSILON);
            }

            #[test]
            fn additivity_for_equal_species(n1 in 1e3f64..1e8, n2 in 1e3f64..1e8, t in 1e-8f64..1e-4, w in 10.0f64..2000.0) {
                let f = TrapFrequencies::isotropic(w, 0.0);
                let s = TwoGasState { n1, n2, t1: t, t2: t, f1: f, f2: f, m1: M, m2: M, sigma12: 7e-16, delta: 0.0 };
                let sum = (single_species_collision_rate(n1, t, w, 7e-16, M)
                    + single_species_collision_rate(n2, t, w, 7e-16, M)) / 3.0;
                let inv = interspecies_thermalization_rate(&s);
                prop_assert!((inv - sum).abs() / inv < 1e-12);
            }
        }
    }
}
