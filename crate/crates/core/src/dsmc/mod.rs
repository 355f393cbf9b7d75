//! Direct simulation Monte Carlo of one or two trapped classical gases.
//!
//! Each test particle stands for `weight` physical atoms. Free flight is the
//! exact harmonic flow about each species' sag-shifted trap centre. Particles
//! are binned into cubic cells every step; within a cell, candidate pairs are
//! drawn at the majorant rate
//!
//! ```text
//! N_cand = n (n - 1) / 2 * w_max * (sigma g)_max * dt / V_cell
//! ```
//!
//! and accepted with probability `sigma_ab g / (sigma g)_max`. With unequal
//! weights a collision updates particle `i` with probability `w_j / w_max`,
//! which makes each test particle collide at the physical rate
//! `sum_j w_j sigma g / V_cell`.
//!
//! Every cell draws from its own ChaCha stream positioned by the step number,
//! so results do not depend on how cells are scheduled across threads.

mod fit;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::K_B;
use crate::contact::{self, TwoGasState};
use crate::physics::{relative_sag, SpeciesState, TrapFrequencies};

pub use fit::{fit_relaxation, fit_relaxation_window, RelaxationFit};

/// Fraction of particles alone in their cell above which a run warns.
pub const UNDERFLOW_WARN_FRACTION: f64 = 0.10;
/// Largest `dt` as a fraction of the shortest trap period.
pub const MAX_DT_PERIODS: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DsmcError {
    #[error("invalid DSMC config: {0}")]
    Invalid(String),
    #[error("relaxation spans {e_folds:.2} e-folds over {points} points; need 2 and 10")]
    InsufficientDecay { e_folds: f64, points: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DsmcWarning {
    /// Too many particles had no collision partner in their cell.
    CellUnderflow { mean_fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub r: [f64; 3],
    pub v: [f64; 3],
    /// Index of the ensemble the particle belongs to.
    pub kind: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub species: SpeciesState,
    pub positions: Vec<[f64; 3]>,
    pub velocities: Vec<[f64; 3]>,
    /// Physical atoms per test particle.
    pub weight: f64,
}

impl ParticleEnsemble {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `M / 3k_B` times the summed velocity variance about the mean.
    pub fn kinetic_temperature(&self) -> f64 {
        kinetic_temperature(self.velocities.iter(), self.species.mass)
    }
}

/// Trap center of a species: the field minimum shifted down by the sag.
pub fn trap_center(trap: &TrapFrequencies) -> [f64; 3] {
    [0.0, 0.0, -trap.sag]
}

/// Draw `n` particles from the classical equilibrium at temperature `t` in
/// `trap`: Gaussian positions about the sagged centre, Maxwellian velocities.
pub fn sample_equilibrium(
    n: usize,
    t: f64,
    trap: &TrapFrequencies,
    species: &SpeciesState,
    weight: f64,
    seed: u64,
) -> ParticleEnsemble {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = species.mass;
    let sv = (K_B * t / m).sqrt();
    let c = trap_center(trap);
    let w = trap.axes();
    let mut positions = Vec::with_capacity(n);
    let mut velocities = Vec::with_capacity(n);
    for _ in 0..n {
        let mut g = || rng.sample::<f64, _>(StandardNormal);
        positions.push(std::array::from_fn(|k| c[k] + sv / w[k] * g()));
        velocities.push(std::array::from_fn(|_| sv * g()));
    }
    ParticleEnsemble {
        species: species.clone(),
        positions,
        velocities,
        weight,
    }
}

/// Isotropic hard-sphere scattering in the centre-of-mass frame.
pub fn collide_pair<R: Rng + ?Sized>(
    v1: [f64; 3],
    v2: [f64; 3],
    m1: f64,
    m2: f64,
    rng: &mut R,
) -> ([f64; 3], [f64; 3]) {
    let mt = m1 + m2;
    let u: [f64; 3] = std::array::from_fn(|k| v1[k] - v2[k]);
    let g = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    if g == 0.0 {
        return (v1, v2);
    }
    let cos_t = 2.0 * rng.random::<f64>() - 1.0;
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let phi = std::f64::consts::TAU * rng.random::<f64>();
    let n = [sin_t * phi.cos(), sin_t * phi.sin(), cos_t];
    let (a, b) = (m2 / mt, m1 / mt);
    (
        std::array::from_fn(|k| (m1 * v1[k] + m2 * v2[k]) / mt + a * g * n[k]),
        std::array::from_fn(|k| (m1 * v1[k] + m2 * v2[k]) / mt - b * g * n[k]),
    )
}

/// Initial conditions for one ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub species: SpeciesState,
    pub trap: TrapFrequencies,
    pub n_test: usize,
    /// K
    pub temperature: f64,
    pub weight: f64,
}

impl EnsembleSpec {
    pub fn physical_number(&self) -> f64 {
        self.weight * self.n_test as f64
    }

    /// Collisions per second per atom within this ensemble alone.
    pub fn self_collision_rate(&self) -> f64 {
        contact::single_species_collision_rate(
            self.physical_number(),
            self.temperature,
            self.trap.omega_bar,
            self.species.sigma_self,
            self.species.mass,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsmcConfig {
    /// One or two ensembles.
    pub ensembles: Vec<EnsembleSpec>,
    /// s
    pub dt: f64,
    /// s
    pub t_end: f64,
    /// Cubic cell edge, m.
    pub cell_size: f64,
    pub rng_seed: u64,
    /// Steps between recorded samples.
    pub sample_every: usize,
}

impl DsmcConfig {
    pub fn validate(&self) -> Result<(), DsmcError> {
        let bad = |m: String| Err(DsmcError::Invalid(m));
        if !(1..=2).contains(&self.ensembles.len()) {
            return bad("need one or two ensembles".into());
        }
        for (i, e) in self.ensembles.iter().enumerate() {
            e.species.validate().map_err(|x| DsmcError::Invalid(format!("ensemble {i}: {x}")))?;
            e.trap.validate().map_err(|x| DsmcError::Invalid(format!("ensemble {i}: {x}")))?;
            if e.n_test < 2 {
                return bad(format!("ensemble {i}: need at least 2 test particles"));
            }
            if !(e.temperature > 0.0 && e.weight > 0.0) {
                return bad(format!("ensemble {i}: temperature and weight must be positive"));
            }
        }
        if let [a, b] = &self.ensembles[..] {
            if a.species.sigma_cross != b.species.sigma_cross {
                return bad("ensembles disagree on the interspecies cross-section".into());
            }
        }
        if !(self.dt > 0.0 && self.t_end > self.dt) {
            return bad("need 0 < dt < t_end".into());
        }
        if self.sample_every == 0 {
            return bad("sample_every must be at least 1".into());
        }
        let dt_max = MAX_DT_PERIODS * std::f64::consts::TAU / self.max_omega();
        if self.dt >= dt_max {
            return bad(format!("dt = {:.3e} s must be below {dt_max:.3e} s", self.dt));
        }
        let h_max = self.min_width() / 4.0;
        if !(self.cell_size > 0.0 && self.cell_size <= h_max) {
            return bad(format!("cell_size = {:.3e} m must be in (0, {h_max:.3e}]", self.cell_size));
        }
        Ok(())
    }

    fn max_omega(&self) -> f64 {
        self.ensembles
            .iter()
            .map(|e| e.trap.max_omega())
            .fold(0.0, f64::max)
    }

    /// Smallest initial rms cloud width over ensembles and axes, m.
    pub fn min_width(&self) -> f64 {
        self.ensembles
            .iter()
            .flat_map(|e| {
                let sv = (K_B * e.temperature / e.species.mass).sqrt();
                e.trap.axes().map(|w| sv / w)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Analytic two-gas state at the start of the run.
    pub fn two_gas_state(&self) -> Option<TwoGasState> {
        let [a, b] = &self.ensembles[..] else {
            return None;
        };
        Some(TwoGasState {
            n1: a.physical_number(),
            n2: b.physical_number(),
            t1: a.temperature,
            t2: b.temperature,
            f1: a.trap,
            f2: b.trap,
            m1: a.species.mass,
            m2: b.species.mass,
            sigma12: a.species.sigma_cross,
            delta: relative_sag(&a.trap, &b.trap),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DsmcSample {
    pub t: f64,
    pub t1_kin: f64,
    /// Absent for single-ensemble runs.
    pub t2_kin: Option<f64>,
    /// Accepted collision events so far.
    pub collisions_cum: u64,
    /// Total mechanical energy of the physical gas, J.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DsmcRun {
    pub samples: Vec<DsmcSample>,
    pub steps: usize,
    /// Mean fraction of in-grid particles alone in their cell.
    pub underflow_fraction: f64,
    pub warnings: Vec<DsmcWarning>,
}

impl DsmcRun {
    /// `(t, T2_kin - T1_kin)` for two-ensemble runs.
    pub fn temperature_gap(&self) -> Vec<(f64, f64)> {
        self.samples
            .iter()
            .filter_map(|s| s.t2_kin.map(|t2| (s.t, t2 - s.t1_kin)))
            .collect()
    }

    /// Largest `|E(t) / E(0) - 1|`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.samples[0].energy;
        self.samples
            .iter()
            .map(|s| (s.energy / e0 - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Mean collisions per test particle per second over the run.
    pub fn collision_frequency(&self, n_test: usize) -> f64 {
        let last = self.samples.last().expect("run has samples");
        2.0 * last.collisions_cum as f64 / (n_test as f64 * last.t)
    }
}

#[derive(Debug, Clone, Copy)]
struct Kind {
    mass: f64,
    weight: f64,
    center: [f64; 3],
    omega: [f64; 3],
    /// `cos(omega dt)`, `sin(omega dt)` per axis.
    rot: [(f64, f64); 3],
}

#[derive(Debug, Clone, Copy, Default)]
struct CellState {
    sg_max: f64,
    remainder: f64,
}

struct Grid {
    lo: [f64; 3],
    h: f64,
    n: [usize; 3],
}

impl Grid {
    fn cells(&self) -> usize {
        self.n.iter().product()
    }

    fn index(&self, r: &[f64; 3]) -> Option<usize> {
        let mut idx = [0usize; 3];
        for k in 0..3 {
            let x = (r[k] - self.lo[k]) / self.h;
            if !(x >= 0.0 && x < self.n[k] as f64) {
                return None;
            }
            idx[k] = x as usize;
        }
        Some(idx[0] + self.n[0] * (idx[1] + self.n[1] * idx[2]))
    }
}

/// A DSMC run in progress.
pub struct Simulation {
    cfg: DsmcConfig,
    kinds: Vec<Kind>,
    /// `sigma[a][b]` for ensembles `a`, `b`.
    sigma: [[f64; 2]; 2],
    w_max: f64,
    particles: Vec<Particle>,
    scratch: Vec<Particle>,
    cell_of: Vec<u32>,
    /// Zero outside `sort_into_cells`.
    counts: Vec<u32>,
    /// `(cell, particle count)` in storage order.
    occupied: Vec<(u32, u32)>,
    in_grid: usize,
    cells: Vec<CellState>,
    grid: Grid,
    key: [u8; 32],
    step: usize,
    collisions: u64,
    underflow_sum: f64,
}

const OUTSIDE: u32 = u32::MAX;

impl Simulation {
    pub fn new(cfg: &DsmcConfig) -> Result<Self, DsmcError> {
        cfg.validate()?;
        let mut kinds = Vec::new();
        let mut particles = Vec::new();
        for (i, e) in cfg.ensembles.iter().enumerate() {
            let ens = sample_equilibrium(
                e.n_test,
                e.temperature,
                &e.trap,
                &e.species,
                e.weight,
                cfg.rng_seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(i as u64 + 1)),
            );
            particles.extend(ens.positions.iter().zip(&ens.velocities).map(|(r, v)| Particle {
                r: *r,
                v: *v,
                kind: i as u8,
            }));
            let omega = e.trap.axes();
            kinds.push(Kind {
                mass: e.species.mass,
                weight: e.weight,
                center: trap_center(&e.trap),
                omega,
                rot: omega.map(|w| ((w * cfg.dt).cos(), (w * cfg.dt).sin())),
            });
        }
        let mut sigma = [[0.0; 2]; 2];
        for (a, ea) in cfg.ensembles.iter().enumerate() {
            for (b, s) in sigma[a].iter_mut().enumerate().take(cfg.ensembles.len()) {
                *s = if a == b {
                    ea.species.sigma_self
                } else {
                    ea.species.sigma_cross
                };
            }
        }
        let w_max = kinds.iter().map(|k| k.weight).fold(0.0, f64::max);

        // Grid covers +-6 rms widths of every cloud at its initial temperature.
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for (e, k) in cfg.ensembles.iter().zip(&kinds) {
            let sv = (K_B * e.temperature / e.species.mass).sqrt();
            for a in 0..3 {
                let half = 6.0 * sv / k.omega[a];
                lo[a] = lo[a].min(k.center[a] - half);
                hi[a] = hi[a].max(k.center[a] + half);
            }
        }
        let h = cfg.cell_size;
        let n = std::array::from_fn(|a| (((hi[a] - lo[a]) / h).ceil() as usize).max(1));
        let grid = Grid { lo, h, n };
        let cells_total = grid.cells();
        if cells_total >= OUTSIDE as usize {
            return Err(DsmcError::Invalid(format!("{cells_total} cells exceed the grid limit")));
        }

        // Majorant seed: five relative thermal speeds for the fastest pair.
        let mut sg0: f64 = 0.0;
        for (a, ea) in cfg.ensembles.iter().enumerate() {
            for (b, eb) in cfg.ensembles.iter().enumerate() {
                let t = ea.temperature.max(eb.temperature);
                let g = 5.0 * (K_B * t * (1.0 / ea.species.mass + 1.0 / eb.species.mass)).sqrt();
                sg0 = sg0.max(sigma[a][b] * g);
            }
        }
        let mut carry_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        carry_rng.set_stream(u64::MAX);
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&cfg.rng_seed.to_le_bytes());
        key[8..16].copy_from_slice(b"dsmc-col");

        Ok(Self {
            cfg: cfg.clone(),
            kinds,
            sigma,
            w_max,
            scratch: particles.clone(),
            cell_of: vec![0; particles.len()],
            particles,
            counts: vec![0; cells_total],
            occupied: Vec::new(),
            in_grid: 0,
            cells: (0..cells_total)
                .map(|_| CellState {
                    sg_max: sg0,
                    // Uniform carries keep the candidate count unbiased from the first step.
                    remainder: carry_rng.random(),
                })
                .collect(),
            grid,
            key,
            step: 0,
            collisions: 0,
            underflow_sum: 0.0,
        })
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.dt
    }

    pub fn collisions(&self) -> u64 {
        self.collisions
    }

    /// Advance one time step: free flight, then collisions.
    pub fn step(&mut self) {
        let kinds = &self.kinds;
        self.particles.par_chunks_mut(4096).for_each(|chunk| {
            for p in chunk {
                let k = &kinds[p.kind as usize];
                for a in 0..3 {
                    let (c, s) = k.rot[a];
                    let w = k.omega[a];
                    let u = p.r[a] - k.center[a];
                    let v = p.v[a];
                    p.r[a] = k.center[a] + u * c + v / w * s;
                    p.v[a] = v * c - u * w * s;
                }
            }
        });
        self.sort_into_cells();
        self.collide();
        self.step += 1;
    }

    /// Counting sort by cell, cells in order of first appearance; out-of-grid
    /// particles go last. Touches only occupied cells.
    fn sort_into_cells(&mut self) {
        self.occupied.clear();
        let mut outside = 0u32;
        for (p, slot) in self.particles.iter().zip(self.cell_of.iter_mut()) {
            let c = self.grid.index(&p.r).map_or(OUTSIDE, |c| c as u32);
            *slot = c;
            if c == OUTSIDE {
                outside += 1;
                continue;
            }
            let n = &mut self.counts[c as usize];
            if *n == 0 {
                self.occupied.push((c, 0));
            }
            *n += 1;
        }
        // counts[c] becomes the write cursor of cell c.
        let mut start = 0u32;
        for (c, len) in self.occupied.iter_mut() {
            let n = std::mem::replace(&mut self.counts[*c as usize], start);
            *len = n;
            start += n;
        }
        let mut tail = start;
        for (p, &c) in self.particles.iter().zip(&self.cell_of) {
            let pos = if c == OUTSIDE {
                tail += 1;
                tail - 1
            } else {
                let cur = &mut self.counts[c as usize];
                *cur += 1;
                *cur - 1
            };
            self.scratch[pos as usize] = *p;
        }
        debug_assert_eq!(tail - start, outside);
        for &(c, _) in &self.occupied {
            self.counts[c as usize] = 0;
        }
        self.in_grid = start as usize;
        std::mem::swap(&mut self.particles, &mut self.scratch);
    }

    fn collide(&mut self) {
        let mut alone = 0usize;
        let mut work = Vec::with_capacity(self.occupied.len());
        let mut rest: &mut [Particle] = &mut self.particles[..self.in_grid];
        for &(c, n) in &self.occupied {
            let (ps, tail) = std::mem::take(&mut rest).split_at_mut(n as usize);
            rest = tail;
            if n == 1 {
                alone += 1;
            } else {
                work.push((c, ps, self.cells[c as usize]));
            }
        }
        if self.in_grid > 0 {
            self.underflow_sum += alone as f64 / self.in_grid as f64;
        }

        let ctx = CollideCtx {
            kinds: &self.kinds,
            sigma: self.sigma,
            w_max: self.w_max,
            dt_over_v: self.cfg.dt / self.grid.h.powi(3),
            key: self.key,
            step: self.step as u64,
        };
        let done: Vec<(u32, CellState, u64)> = work
            .into_par_iter()
            .map(|(c, ps, mut cs)| {
                let k = ctx.cell(u64::from(c), ps, &mut cs);
                (c, cs, k)
            })
            .collect();
        for (c, cs, k) in done {
            self.cells[c as usize] = cs;
            self.collisions += k;
        }
    }

    pub fn sample(&self) -> DsmcSample {
        let temp = |kind: u8| {
            kinetic_temperature(
                self.particles.iter().filter(|p| p.kind == kind).map(|p| &p.v),
                self.kinds[kind as usize].mass,
            )
        };
        let energy = self
            .particles
            .iter()
            .map(|p| {
                let k = &self.kinds[p.kind as usize];
                let mut e = 0.0;
                for a in 0..3 {
                    let u = p.r[a] - k.center[a];
                    e += p.v[a] * p.v[a] + k.omega[a] * k.omega[a] * u * u;
                }
                0.5 * k.mass * k.weight * e
            })
            .sum();
        DsmcSample {
            t: self.time(),
            t1_kin: temp(0),
            t2_kin: (self.kinds.len() == 2).then(|| temp(1)),
            collisions_cum: self.collisions,
            energy,
        }
    }
}

struct CollideCtx<'a> {
    kinds: &'a [Kind],
    sigma: [[f64; 2]; 2],
    w_max: f64,
    dt_over_v: f64,
    key: [u8; 32],
    step: u64,
}

impl CollideCtx<'_> {
    fn cell(&self, id: u64, ps: &mut [Particle], cs: &mut CellState) -> u64 {
        let n = ps.len();
        let expected = 0.5 * (n * (n - 1)) as f64 * self.w_max * cs.sg_max * self.dt_over_v + cs.remainder;
        let candidates = expected.floor();
        cs.remainder = expected - candidates;
        if candidates < 1.0 {
            return 0;
        }
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(id);
        rng.set_word_pos(u128::from(self.step) << 32);
        let mut accepted = 0;
        for _ in 0..candidates as u64 {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let (a, b) = (ps[i].kind as usize, ps[j].kind as usize);
            let sig = self.sigma[a][b];
            let g = dist(&ps[i].v, &ps[j].v);
            let sg = sig * g;
            if sg > cs.sg_max {
                cs.sg_max = sg;
            }
            if rng.random::<f64>() * cs.sg_max >= sg {
                continue;
            }
            let (ka, kb) = (&self.kinds[a], &self.kinds[b]);
            let (vi, vj) = collide_pair(ps[i].v, ps[j].v, ka.mass, kb.mass, &mut rng);
            if ka.weight == kb.weight {
                ps[i].v = vi;
                ps[j].v = vj;
            } else {
                if rng.random::<f64>() * self.w_max < kb.weight {
                    ps[i].v = vi;
                }
                if rng.random::<f64>() * self.w_max < ka.weight {
                    ps[j].v = vj;
                }
            }
            accepted += 1;
        }
        accepted
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

fn kinetic_temperature<'a>(vs: impl Iterator<Item = &'a [f64; 3]>, mass: f64) -> f64 {
    let mut n = 0usize;
    let mut s = [0.0; 3];
    let mut s2 = [0.0; 3];
    for v in vs {
        n += 1;
        for a in 0..3 {
            s[a] += v[a];
            s2[a] += v[a] * v[a];
        }
    }
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let var: f64 = (0..3).map(|a| (s2[a] - s[a] * s[a] / nf) / (nf - 1.0)).sum();
    mass * var / (3.0 * K_B)
}

/// Run `cfg` to `t_end`, sampling every `sample_every` steps.
pub fn run(cfg: &DsmcConfig) -> Result<DsmcRun, DsmcError> {
    let mut sim = Simulation::new(cfg)?;
    let steps = (cfg.t_end / cfg.dt).round() as usize;
    let mut samples = vec![sim.sample()];
    for s in 1..=steps {
        sim.step();
        if s % cfg.sample_every == 0 || s == steps {
            samples.push(sim.sample());
        }
    }
    let underflow_fraction = sim.underflow_sum / steps.max(1) as f64;
    let mut warnings = Vec::new();
    if underflow_fraction > UNDERFLOW_WARN_FRACTION {
        warnings.push(DsmcWarning::CellUnderflow {
            mean_fraction: underflow_fraction,
        });
    }
    Ok(DsmcRun {
        samples,
        steps,
        underflow_fraction,
        warnings,
    })
}

/// Fitted rates next to the analytic predictions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DsmcSummary {
    pub seed: u64,
    pub steps: usize,
    pub collisions: u64,
    /// Measured collisions per atom per second.
    pub collision_frequency: f64,
    /// `gamma` of the whole gas at the initial mean temperature, single-species runs.
    pub collision_frequency_analytic: Option<f64>,
    pub relaxation: Option<RelaxationFit>,
    pub relaxation_rate_analytic: Option<f64>,
    pub energy_drift: f64,
    pub underflow_fraction: f64,
    pub warnings: Vec<DsmcWarning>,
}

pub fn summarize(cfg: &DsmcConfig, run: &DsmcRun) -> DsmcSummary {
    let n_test: usize = cfg.ensembles.iter().map(|e| e.n_test).sum();
    let same_species = cfg.ensembles.windows(2).all(|w| w[0].species == w[1].species && w[0].trap == w[1].trap);
    let gamma = same_species.then(|| {
        let e = &cfg.ensembles[0];
        let n: f64 = cfg.ensembles.iter().map(|e| e.physical_number()).sum();
        let t = cfg.ensembles.iter().map(|e| e.physical_number() * e.temperature).sum::<f64>() / n;
        contact::single_species_collision_rate(n, t, e.trap.omega_bar, e.species.sigma_self, e.species.mass)
    });
    let gap = run.temperature_gap();
    DsmcSummary {
        seed: cfg.rng_seed,
        steps: run.steps,
        collisions: run.samples.last().map_or(0, |s| s.collisions_cum),
        collision_frequency: run.collision_frequency(n_test),
        collision_frequency_analytic: gamma,
        relaxation: (!gap.is_empty()).then(|| fit_relaxation(&gap).ok()).flatten(),
        relaxation_rate_analytic: cfg.two_gas_state().map(|s| contact::interspecies_thermalization_rate(&s)),
        energy_drift: run.energy_drift(),
        underflow_fraction: run.underflow_fraction,
        warnings: run.warnings.clone(),
    }
}

/// Ready-made configurations at desk scale.
pub mod presets {
    use super::*;
    use crate::constants::{AMU, MICROKELVIN, RB87_MASS_AMU};

    /// Geometric-mean trap frequency, rad/s.
    pub const OMEGA: f64 = std::f64::consts::TAU * 100.0;
    /// Axis frequencies relative to `OMEGA`; incommensurate, product 1.
    pub const AXES: [f64; 3] = [0.7, 1.1, 1.0 / 0.77];
    pub const SIGMA: f64 = 7e-16;

    pub fn rb87() -> SpeciesState {
        SpeciesState::new("87Rb", 2, 2, RB87_MASS_AMU * AMU, SIGMA, SIGMA).expect("valid species")
    }

    /// The preset trap with its centre lowered by `sag`.
    pub fn trap(sag: f64) -> TrapFrequencies {
        let [x, y, z] = AXES.map(|a| a * OMEGA);
        TrapFrequencies {
            omega_x: x,
            omega_y: y,
            omega_z: z,
            omega_bar: (x * y * z).cbrt(),
            sag,
        }
    }

    /// Two ensembles relaxing towards a common temperature.
    #[derive(Debug, Clone)]
    pub struct Relaxation {
        pub first: SpeciesState,
        pub second: SpeciesState,
        /// Test particles per ensemble.
        pub n_test: usize,
        pub t1: f64,
        pub t2: f64,
        /// Sag of the first ensemble relative to the second, m.
        pub delta: f64,
        /// Sets the weight: a gas of `2 n_test` atoms of `first` with cross-section
        /// `sigma_cross` would collide at `gamma_over_omega * OMEGA`.
        pub gamma_over_omega: f64,
        /// Run length in periods of `OMEGA`.
        pub periods: f64,
        pub seed: u64,
    }

    impl Relaxation {
        pub fn new(first: SpeciesState, second: SpeciesState, n_test: usize) -> Self {
            Self {
                first,
                second,
                n_test,
                t1: 0.5 * MICROKELVIN,
                t2: 1.5 * MICROKELVIN,
                delta: 0.0,
                gamma_over_omega: 0.05,
                periods: 50.0,
                seed: 0,
            }
        }

        /// Cell size is a quarter of the smallest cloud width and `dt` is
        /// 1/25 of the shortest trap period.
        pub fn config(&self) -> DsmcConfig {
            let t_mean = 0.5 * (self.t1 + self.t2);
            let f = &self.first;
            let per_atom = contact::single_species_collision_rate(1.0, t_mean, OMEGA, f.sigma_cross, f.mass);
            let weight = self.gamma_over_omega * OMEGA / (per_atom * 2.0 * self.n_test as f64);
            let ensemble = |species: &SpeciesState, t, sag| EnsembleSpec {
                species: species.clone(),
                trap: trap(sag),
                n_test: self.n_test,
                temperature: t,
                weight,
            };
            let mut cfg = DsmcConfig {
                ensembles: vec![
                    ensemble(&self.first, self.t1, self.delta),
                    ensemble(&self.second, self.t2, 0.0),
                ],
                dt: std::f64::consts::TAU / trap(0.0).max_omega() / 25.0,
                t_end: self.periods * std::f64::consts::TAU / OMEGA,
                cell_size: 0.0,
                rng_seed: self.seed,
                sample_every: 5,
            };
            cfg.cell_size = cfg.min_width() / 4.0;
            cfg
        }
    }

    /// A single 87Rb gas at `1 uK` with `gamma = 0.05 OMEGA`.
    pub fn equilibrium(n_test: usize, periods: f64, seed: u64) -> DsmcConfig {
        let mut r = Relaxation::new(rb87(), rb87(), n_test / 2);
        r.t1 = MICROKELVIN;
        r.t2 = MICROKELVIN;
        r.periods = periods;
        r.seed = seed;
        let mut cfg = r.config();
        cfg.ensembles.truncate(1);
        cfg.ensembles[0].n_test = n_test;
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::MICROKELVIN;
    use proptest::prelude::*;

    fn relax(a: SpeciesState, b: SpeciesState, n: usize, gamma_over_omega: f64, periods: f64, seed: u64) -> DsmcConfig {
        let mut r = presets::Relaxation::new(a, b, n);
        (r.gamma_over_omega, r.periods, r.seed) = (gamma_over_omega, periods, seed);
        r.config()
    }

    fn energy(v1: &[f64; 3], v2: &[f64; 3], m1: f64, m2: f64) -> f64 {
        let e = |v: &[f64; 3]| v.iter().map(|x| x * x).sum::<f64>();
        0.5 * (m1 * e(v1) + m2 * e(v2))
    }

    #[test]
    fn zero_temperature_sample_sits_at_sagged_centre() {
        let trap = TrapFrequencies::new(100.0, 500.0, 500.0, 9.80665);
        let e = sample_equilibrium(10, 0.0, &trap, &presets::rb87(), 1.0, 3);
        for (r, v) in e.positions.iter().zip(&e.velocities) {
            assert_eq!(*r, [0.0, 0.0, -trap.sag]);
            assert_eq!(*v, [0.0; 3]);
        }
    }

    #[test]
    fn equilibrium_moments() {
        let n = 100_000;
        let trap = TrapFrequencies::new(100.0, 500.0, 500.0, 9.80665);
        let sp = presets::rb87();
        let e = sample_equilibrium(n, MICROKELVIN, &trap, &sp, 1.0, 11);
        let mvx2 = e.velocities.iter().map(|v| v[0] * v[0]).sum::<f64>() / n as f64 * sp.mass / K_B;
        assert!((mvx2 / MICROKELVIN - 1.0).abs() < 0.01);
        let kt = e.kinetic_temperature();
        assert!((kt / MICROKELVIN - 1.0).abs() < 3.0 * (2.0 / (3.0 * n as f64)).sqrt());
        let sz = (K_B * MICROKELVIN / sp.mass).sqrt() / trap.omega_z;
        let mean_z = e.positions.iter().map(|r| r[2]).sum::<f64>() / n as f64;
        assert!((mean_z + trap.sag).abs() < 3.0 * sz / (n as f64).sqrt());
    }

    #[test]
    fn identical_velocities_do_not_scatter() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = [1.0, -2.0, 0.5];
        assert_eq!(collide_pair(v, v, 1.0, 3.0, &mut rng), (v, v));
    }

    #[test]
    fn head_on_energy_gain_matches_centre_of_mass_identity() {
        // Equal masses: gain of particle 1 is (M/2) v_G . (v - v').
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = 2.0;
        let (v1, v2) = ([1.0, 0.0, 0.0], [-1.5, 0.0, 0.0]);
        let (w1, _) = collide_pair(v1, v2, m, m, &mut rng);
        let vg: [f64; 3] = std::array::from_fn(|k| 0.5 * (v1[k] + v2[k]));
        let u: [f64; 3] = std::array::from_fn(|k| v1[k] - v2[k]);
        let u2: [f64; 3] = std::array::from_fn(|k| 2.0 * (w1[k] - vg[k]));
        let gain = 0.5 * m * (0..3).map(|k| w1[k] * w1[k] - v1[k] * v1[k]).sum::<f64>();
        let identity = 0.5 * m * (0..3).map(|k| vg[k] * (u2[k] - u[k])).sum::<f64>();
        assert!((gain - identity).abs() < 1e-12);
    }

    #[test]
    fn scattering_direction_is_isotropic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 200_000;
        let mut mean = [0.0; 3];
        let mut zz = 0.0;
        for _ in 0..n {
            let (w, _) = collide_pair([1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], 1.0, 1.0, &mut rng);
            for k in 0..3 {
                mean[k] += w[k] / n as f64;
            }
            zz += w[2] * w[2] / n as f64;
        }
        let se = (1.0 / (3.0 * n as f64)).sqrt();
        assert!(mean.iter().all(|m| m.abs() < 4.0 * se));
        assert!((zz - 1.0 / 3.0).abs() < 0.005);
    }

    #[test]
    fn mean_transfer_per_collision_is_temperature_gap() {
        // Pairs drawn from the collision-weighted distribution (~ g) of two
        // Maxwellians; the buffer gains k_B (T2 - T1) on average.
        let m = presets::rb87().mass;
        let (t1, t2) = (1.0 * MICROKELVIN, 2.0 * MICROKELVIN);
        let (s1, s2) = ((K_B * t1 / m).sqrt(), (K_B * t2 / m).sqrt());
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g_max = 8.0 * (s1 * s1 + s2 * s2).sqrt();
        let (mut sum, mut n) = (0.0, 0u64);
        while n < 1_000_000 {
            let v1: [f64; 3] = std::array::from_fn(|_| s1 * rng.sample::<f64, _>(StandardNormal));
            let v2: [f64; 3] = std::array::from_fn(|_| s2 * rng.sample::<f64, _>(StandardNormal));
            if rng.random::<f64>() * g_max >= dist(&v1, &v2) {
                continue;
            }
            let (w1, _) = collide_pair(v1, v2, m, m, &mut rng);
            sum += energy(&w1, &[0.0; 3], m, m) - energy(&v1, &[0.0; 3], m, m);
            n += 1;
        }
        let mean = sum / n as f64 / (K_B * (t2 - t1));
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn no_collisions_conserve_energy_and_temperature() {
        let mut sp = presets::rb87();
        sp.sigma_self = 0.0;
        sp.sigma_cross = 0.0;
        let mut cfg = relax(sp.clone(), sp, 2000, 0.05, 100.0, 4);
        cfg.sample_every = 50;
        let r = run(&cfg).unwrap();
        assert!(r.energy_drift() < 1e-10, "{}", r.energy_drift());
        assert_eq!(r.samples.last().unwrap().collisions_cum, 0);
        let (a, b) = (r.samples[0], *r.samples.last().unwrap());
        // Kinetic temperature oscillates only through sampling noise in the
        // initial virial split.
        assert!((b.t1_kin / a.t1_kin - 1.0).abs() < 0.1);
    }

    #[test]
    fn rejects_under_resolved_configs() {
        let mut cfg = presets::equilibrium(100, 1.0, 1);
        cfg.dt *= 2.0;
        assert!(matches!(run(&cfg), Err(DsmcError::Invalid(_))));
        let mut cfg = presets::equilibrium(100, 1.0, 1);
        cfg.cell_size *= 1.01;
        assert!(matches!(run(&cfg), Err(DsmcError::Invalid(_))));
        let mut cfg = presets::equilibrium(100, 1.0, 1);
        cfg.ensembles[0].n_test = 1;
        assert!(run(&cfg).is_err());
    }

    #[test]
    fn collisions_conserve_energy_with_equal_weights() {
        let m = presets::rb87().mass;
        let light = SpeciesState::new("light", 2, 2, m / 14.5, presets::SIGMA, presets::SIGMA).unwrap();
        let mut cfg = relax(presets::rb87(), light, 3000, 0.5, 5.0, 8);
        cfg.sample_every = 10;
        let r = run(&cfg).unwrap();
        assert!(r.samples.last().unwrap().collisions_cum > 1000);
        assert!(r.energy_drift() < 1e-10, "{}", r.energy_drift());
    }

    #[test]
    fn seed_determinism() {
        let cfg = relax(presets::rb87(), presets::rb87(), 2000, 0.2, 5.0, 77);
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a, b);
        let mut other = cfg.clone();
        other.rng_seed = 78;
        assert_ne!(run(&other).unwrap().samples, a.samples);
    }

    #[test]
    fn serial_and_parallel_schedules_agree() {
        let cfg = relax(presets::rb87(), presets::rb87(), 2000, 0.2, 3.0, 5);
        let par = run(&cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let ser = pool.install(|| run(&cfg).unwrap());
        assert_eq!(par, ser);
    }

    #[test]
    fn equal_temperatures_stay_equal() {
        let mut r = presets::Relaxation::new(presets::rb87(), presets::rb87(), 5000);
        (r.t1, r.t2, r.gamma_over_omega, r.periods, r.seed) = (MICROKELVIN, MICROKELVIN, 0.1, 20.0, 12);
        let cfg = r.config();
        let r = run(&cfg).unwrap();
        let se = MICROKELVIN * (2.0f64 / (3.0 * 5000.0)).sqrt();
        for s in &r.samples {
            assert!((s.t1_kin - MICROKELVIN).abs() < 4.0 * se);
            assert!((s.t2_kin.unwrap() - MICROKELVIN).abs() < 4.0 * se);
        }
    }

    #[test]
    fn unequal_weights_relax_at_the_physical_rate() {
        // Half the test particles at twice the weight describe the same gas.
        let cfg = relax(presets::rb87(), presets::rb87(), 4000, 0.2, 16.0, 3);
        let mut heavy = cfg.clone();
        heavy.ensembles[1].n_test = 2000;
        heavy.ensembles[1].weight *= 2.0;
        let rate = |c: &DsmcConfig| fit_relaxation_window(&run(c).unwrap().temperature_gap(), (-2.5f64).exp()).unwrap().rate;
        let (r0, r1) = (rate(&cfg), rate(&heavy));
        assert!((r1 / r0 - 1.0).abs() < 0.15, "{r0} vs {r1}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]
        #[test]
        fn collisions_conserve_momentum_and_energy(
            v1 in prop::array::uniform3(-1e-2f64..1e-2),
            v2 in prop::array::uniform3(-1e-2f64..1e-2),
            mr in 0.05f64..20.0,
            seed in any::<u64>(),
        ) {
            let (m1, m2) = (1.4e-25, 1.4e-25 * mr);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (w1, w2) = collide_pair(v1, v2, m1, m2, &mut rng);
            for k in 0..3 {
                let p = m1 * v1[k] + m2 * v2[k];
                let scale = m1 * v1[k].abs() + m2 * v2[k].abs() + 1e-40;
                prop_assert!((m1 * w1[k] + m2 * w2[k] - p).abs() <= 1e-13 * scale);
            }
            let e0 = energy(&v1, &v2, m1, m2);
            prop_assert!((energy(&w1, &w2, m1, m2) - e0).abs() <= 1e-12 * e0);
            prop_assert!((dist(&w1, &w2) / dist(&v1, &v2) - 1.0).abs() < 1e-12);
        }
    }
}
