//! Time-domain simulation of sympathetic evaporative cooling.
//!
//! The buffer loses atoms to evaporation, each carrying `(eta + 1) k_B T1`.
//! Energy flows between the clouds at the rate `W` of [`crate::contact`]. With
//! `E_i = 3 N_i k_B T_i` this gives
//!
//! ```text
//! dT1/dt = (eta - 2) T1 dN1/dt / (3 N1) + W / (3 N1 k_B)
//! dT2/dt = -W / (3 N2 k_B)
//! ```
//!
//! In [`ContactMode::Instant`] the two clouds share one temperature and
//! `dT/T = alpha dN1/(N1 + N2)`, which integrates to the closed-form budget law.
//!
//! The state is integrated in logarithmic variables (`ln N1`, `ln T1`,
//! `ln T2`) so the tolerances act as relative tolerances over the many
//! decades the cooling spans.

mod events;
pub mod ode;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::budget::DEFAULT_PSD_PREFACTOR;
use crate::constants::{BEC_THRESHOLD, HBAR, K_B};
use crate::contact::{self, TwoGasState};

pub use events::{detect_events, region_from_events, Event, EventKind};
use ode::{Control, OdeError, Tolerances};

/// Overlap factor below which sympathetic cooling is considered stalled.
pub const STALL_OVERLAP: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("invalid trajectory config: {0}")]
    Invalid(String),
    #[error("integration failed: {0}")]
    StepFailure(#[from] OdeError),
}

/// Buffer atom number prescribed as a piecewise-linear function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampSchedule {
    /// `(t [s], N1)` knots, times strictly increasing, N1 non-increasing.
    pub knots: Vec<(f64, f64)>,
}

impl RampSchedule {
    /// `N1(t) = n1_start (n1_end/n1_start)^(t/duration)` sampled at `segments + 1` knots.
    pub fn exponential(n1_start: f64, n1_end: f64, duration: f64, segments: usize) -> Self {
        let knots = (0..=segments)
            .map(|i| {
                let f = i as f64 / segments as f64;
                (f * duration, n1_start * (n1_end / n1_start).powf(f))
            })
            .collect();
        Self { knots }
    }

    fn validate(&self) -> Result<(), String> {
        if self.knots.len() < 2 {
            return Err("ramp needs at least two knots".into());
        }
        if self.knots[0].0 != 0.0 {
            return Err("ramp must start at t = 0".into());
        }
        for w in self.knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err("ramp times must increase strictly".into());
            }
            if w[1].1 > w[0].1 {
                return Err("ramp atom numbers must not increase".into());
            }
        }
        if self.knots.iter().any(|k| !(k.1 >= 0.0) || !k.0.is_finite()) {
            return Err("ramp atom numbers must be non-negative".into());
        }
        Ok(())
    }

    /// `(N1, dN1/dt)` at `t`, with the derivative of the segment starting at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let k = &self.knots;
        let i = match k.iter().rposition(|kn| kn.0 <= t) {
            Some(i) if i + 1 < k.len() => i,
            Some(_) => return (k[k.len() - 1].1, 0.0),
            None => return (k[0].1, 0.0),
        };
        let (t0, n0) = k[i];
        let (t1, n1) = k[i + 1];
        let rate = (n1 - n0) / (t1 - t0);
        (n0 + rate * (t - t0), rate)
    }

    /// Segment-local evaluation, so the derivative is constant within `[t0, t1]`.
    fn eval_in(&self, seg: usize, t: f64) -> (f64, f64) {
        let (t0, n0) = self.knots[seg];
        let (t1, n1) = self.knots[seg + 1];
        let rate = (n1 - n0) / (t1 - t0);
        (n0 + rate * (t - t0), rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EvaporationModel {
    /// N1(t) given directly.
    RampDriven(RampSchedule),
    /// `dN1/dt = -prefactor * gamma1 * exp(-eta) * N1`, with `gamma1` the
    /// buffer's elastic collision rate for cross-section `sigma_self`.
    RateDriven { prefactor: f64, sigma_self: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContactMode {
    /// Both clouds always share one temperature.
    Instant,
    /// Clouds exchange energy at the finite rate `W`.
    Finite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub initial: TwoGasState,
    pub eta: f64,
    pub evaporation: EvaporationModel,
    pub contact_mode: ContactMode,
    pub t_end: f64,
    pub dt_max: f64,
    pub bec_threshold: f64,
    pub psd_prefactor: f64,
    /// Stop at the first threshold crossing; otherwise run on (beyond the
    /// model's validity, flagged by `bec1`/`bec2`).
    pub halt_at_bec: bool,
    /// Buffer considered exhausted below this number.
    pub n1_floor: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl TrajectoryConfig {
    pub fn new(
        initial: TwoGasState,
        eta: f64,
        evaporation: EvaporationModel,
        contact_mode: ContactMode,
        t_end: f64,
    ) -> Self {
        Self {
            initial,
            eta,
            evaporation,
            contact_mode,
            t_end,
            dt_max: t_end / 100.0,
            bec_threshold: BEC_THRESHOLD,
            psd_prefactor: DEFAULT_PSD_PREFACTOR,
            halt_at_bec: true,
            n1_floor: 1.0,
            rtol: 1e-8,
            atol: 1e-12,
        }
    }

    pub fn validate(&self) -> Result<(), TrajectoryError> {
        let bad = |m: String| Err(TrajectoryError::Invalid(m));
        self.initial.validate().map_err(TrajectoryError::Invalid)?;
        if !(self.eta > 2.0) {
            return bad(format!("eta = {} must exceed 2", self.eta));
        }
        if !(self.t_end > 0.0 && self.dt_max > 0.0) {
            return bad("t_end and dt_max must be positive".into());
        }
        if !(self.initial.n1 > self.n1_floor && self.n1_floor > 0.0) {
            return bad("need N1 > n1_floor > 0".into());
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if !(self.bec_threshold > 0.0 && self.psd_prefactor > 0.0) {
            return bad("bec_threshold and psd_prefactor must be positive".into());
        }
        match &self.evaporation {
            EvaporationModel::RampDriven(s) => {
                s.validate().map_err(TrajectoryError::Invalid)?;
                if (s.knots[0].1 / self.initial.n1 - 1.0).abs() > 1e-12 {
                    return bad("ramp must start at the initial N1".into());
                }
            }
            EvaporationModel::RateDriven {
                prefactor,
                sigma_self,
            } => {
                if !(*prefactor > 0.0 && *sigma_self > 0.0) {
                    return bad("rate prefactor and sigma_self must be positive".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub n1: f64,
    pub t1: f64,
    pub t2: f64,
    pub d1: f64,
    pub d2: f64,
    /// Interspecies collisions per second.
    pub gamma: f64,
    pub overlap: f64,
    pub stalled: bool,
    pub bec1: bool,
    pub bec2: bool,
    /// Cumulative energy carried off by evaporation (negative), J.
    pub evaporated_energy: f64,
}

impl TrajectoryPoint {
    /// `3 k_B (N1 T1 + N2 T2)`, J.
    pub fn total_energy(&self, n2: f64) -> f64 {
        3.0 * K_B * (self.n1 * self.t1 + n2 * self.t2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    EndTime,
    BufferExhausted,
    BecReached,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub termination: Termination,
    pub n2: f64,
    pub bec_threshold: f64,
    /// Unequal masses: contact rates are extrapolated.
    pub extrapolated: bool,
}

impl Trajectory {
    /// Largest `|E(t) - E(0) - E_evap(t)| / E(0)` along the run.
    pub fn energy_residual(&self) -> f64 {
        let e0 = self.points[0].total_energy(self.n2);
        self.points
            .iter()
            .map(|p| (p.total_energy(self.n2) - e0 - p.evaporated_energy).abs() / e0)
            .fold(0.0, f64::max)
    }
}

/// Per-call physics shared by the right-hand side and the observer.
struct Model<'a> {
    cfg: &'a TrajectoryConfig,
}

impl Model<'_> {
    fn gas(&self, n1: f64, t1: f64, t2: f64) -> TwoGasState {
        TwoGasState {
            n1,
            t1,
            t2,
            ..self.cfg.initial
        }
    }

    /// `(N1, dN1/dt)` for the current state.
    fn buffer(&self, seg: usize, t: f64, y: &[f64; 4]) -> (f64, f64) {
        match &self.cfg.evaporation {
            EvaporationModel::RampDriven(s) => s.eval_in(seg, t),
            EvaporationModel::RateDriven {
                prefactor,
                sigma_self,
            } => {
                let n1 = y[0].exp();
                let s = &self.cfg.initial;
                let gamma1 = contact::single_species_collision_rate(
                    n1,
                    y[1].exp(),
                    s.f1.omega_bar,
                    *sigma_self,
                    s.m1,
                );
                (n1, -prefactor * gamma1 * (-self.cfg.eta).exp() * n1)
            }
        }
    }

    fn rhs(&self, seg: usize, t: f64, y: &[f64; 4]) -> [f64; 4] {
        let (n1, n1dot) = self.buffer(seg, t, y);
        let (t1, t2) = (y[1].exp(), y[2].exp());
        let n2 = self.cfg.initial.n2;
        let eta = self.cfg.eta;
        let evap = (eta + 1.0) * K_B * t1 * n1dot;
        match self.cfg.contact_mode {
            ContactMode::Instant => {
                let g = (eta - 2.0) / 3.0 * n1dot / (n1 + n2);
                [n1dot / n1, g, g, evap]
            }
            ContactMode::Finite => {
                let s = self.gas(n1, t1, t2);
                // W/N1 and W/N2 without dividing by vanishing numbers.
                let per_pair = contact::energy_transfer_efficiency(s.m1, s.m2)
                    * K_B
                    * (t2 - t1)
                    * contact::pair_collision_rate(&s);
                let dln_t1 = (eta - 2.0) * n1dot / (3.0 * n1) + n2 * per_pair / (3.0 * K_B * t1);
                let dln_t2 = if n2 > 0.0 {
                    -n1 * per_pair / (3.0 * K_B * t2)
                } else {
                    0.0
                };
                [n1dot / n1, dln_t1, dln_t2, evap]
            }
        }
    }

    fn point(&self, seg: usize, t: f64, y: &[f64; 4], prev: Option<&TrajectoryPoint>) -> TrajectoryPoint {
        let (n1, n1dot) = self.buffer(seg, t, y);
        let (t1, t2) = (y[1].exp(), y[2].exp());
        let s = self.gas(n1, t1, t2);
        let psd = |n: f64, temp: f64, w: f64| {
            self.cfg.psd_prefactor * n * (HBAR * w / (K_B * temp)).powi(3)
        };
        let d1 = psd(n1, t1, s.f1.omega_bar);
        let d2 = psd(s.n2, t2, s.f2.omega_bar);
        let overlap = contact::overlap_factor(&s);
        let thr = self.cfg.bec_threshold;
        let latched = |f: fn(&TrajectoryPoint) -> bool| prev.is_some_and(f);
        TrajectoryPoint {
            t,
            n1,
            t1,
            t2,
            d1,
            d2,
            gamma: contact::interspecies_collision_rate(&s),
            overlap,
            stalled: latched(|p| p.stalled) || (overlap < STALL_OVERLAP && n1dot < 0.0),
            bec1: latched(|p| p.bec1) || d1 >= thr,
            bec2: latched(|p| p.bec2) || d2 >= thr,
            evaporated_energy: y[3],
        }
    }
}

/// Run the cooling trajectory described by `cfg`.
pub fn simulate(cfg: &TrajectoryConfig) -> Result<Trajectory, TrajectoryError> {
    cfg.validate()?;
    let model = Model { cfg };
    let s0 = &cfg.initial;
    let t_start = match cfg.contact_mode {
        // Energy-weighted common temperature.
        ContactMode::Instant => (s0.n1 * s0.t1 + s0.n2 * s0.t2) / (s0.n1 + s0.n2),
        ContactMode::Finite => s0.t1,
    };
    let t2_start = match cfg.contact_mode {
        ContactMode::Instant => t_start,
        ContactMode::Finite => s0.t2,
    };
    let mut y = [s0.n1.ln(), t_start.ln(), t2_start.ln(), 0.0];

    // Integration segments: ramp knots (derivative jumps) or one span.
    let segments: Vec<(usize, f64, f64)> = match &cfg.evaporation {
        EvaporationModel::RampDriven(s) => s
            .knots
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0].0 < cfg.t_end)
            .map(|(i, w)| (i, w[0].0, w[1].0.min(cfg.t_end)))
            .collect(),
        EvaporationModel::RateDriven { .. } => vec![(0, 0.0, cfg.t_end)],
    };

    let mut points = vec![model.point(0, 0.0, &y, None)];
    let mut termination = Termination::EndTime;
    let tol = Tolerances {
        rtol: cfg.rtol,
        atol: cfg.atol,
        h_max: cfg.dt_max,
        max_steps: 5_000_000,
    };

    for &(seg, ta, tb_full) in &segments {
        let mut tb = tb_full;
        if let EvaporationModel::RampDriven(s) = &cfg.evaporation {
            // Stop where the ramp crosses the floor.
            let (na, rate) = s.eval_in(seg, ta);
            let nb = s.eval_in(seg, tb).0;
            if nb < cfg.n1_floor {
                tb = ta + (cfg.n1_floor - na) / rate;
                termination = Termination::BufferExhausted;
            }
        }
        let h0 = ((tb - ta) * 1e-4).min(cfg.dt_max);
        let mut stop = false;
        let (_, y_end, _) = ode::integrate(
            |t, y| model.rhs(seg, t, y),
            ta,
            y,
            tb,
            h0,
            &tol,
            |t, y, _| {
                let p = model.point(seg, t, y, points.last());
                points.push(p);
                if cfg.halt_at_bec && (p.bec1 || p.bec2) {
                    termination = Termination::BecReached;
                    stop = true;
                } else if p.n1 < cfg.n1_floor {
                    termination = Termination::BufferExhausted;
                    stop = true;
                }
                if stop {
                    Control::Stop
                } else {
                    Control::Continue
                }
            },
        )?;
        y = y_end;
        if stop || termination == Termination::BufferExhausted {
            break;
        }
    }

    Ok(Trajectory {
        points,
        termination,
        n2: s0.n2,
        bec_threshold: cfg.bec_threshold,
        extrapolated: s0.is_extrapolated(),
    })
}

/// Preset cooling runs in the iron-core trap.
pub mod scenarios {
    use super::*;
    use crate::constants::MICROKELVIN;
    use crate::physics::{relative_sag, trap_frequencies, PhysicsError, SpeciesState, TrapConfig};

    /// s-wave cross-section `8 pi a^2` for a = 100 Bohr radii; a user input.
    pub const RB87_SIGMA: f64 = 7.0e-16;

    /// Buffer |1,-1> and target |2,2> 87Rb in the trap with bias `b0_gauss`,
    /// starting from 1e8 buffer atoms at 300 uK, rate-driven evaporation at
    /// eta = 6.5 and finite thermal contact.
    pub fn iron_core_run(b0_gauss: f64, n2: f64, rate_prefactor: f64) -> Result<TrajectoryConfig, PhysicsError> {
        let trap = TrapConfig::iron_core(b0_gauss);
        let buffer = SpeciesState::rb87(1, -1, RB87_SIGMA)?;
        let target = SpeciesState::rb87(2, 2, RB87_SIGMA)?;
        let f1 = trap_frequencies(&trap, &buffer)?;
        let f2 = trap_frequencies(&trap, &target)?;
        let t0 = 300.0 * MICROKELVIN;
        let initial = TwoGasState {
            n1: 1e8,
            n2,
            t1: t0,
            t2: t0,
            f1,
            f2,
            m1: buffer.mass,
            m2: target.mass,
            sigma12: buffer.sigma_cross,
            delta: relative_sag(&f1, &f2),
        };
        let mut cfg = TrajectoryConfig::new(
            initial,
            6.5,
            EvaporationModel::RateDriven {
                prefactor: rate_prefactor,
                sigma_self: buffer.sigma_self,
            },
            ContactMode::Finite,
            2000.0,
        );
        cfg.dt_max = 0.5;
        cfg.halt_at_bec = false;
        Ok(cfg)
    }
}
