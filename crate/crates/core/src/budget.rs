//! Quasi-static energy budget of sympathetic evaporative cooling.
//!
//! Both gases share one temperature. Each evaporated buffer atom carries away
//! `(eta + 1) k_B T` from a total energy `3 (N1 + N2) k_B T`, which gives
//!
//! ```text
//! T(N1) = T_min (N1/N2 + 1)^alpha,   T_min = T_ini (N2/N1_ini)^alpha,   alpha = (eta - 2)/3
//! ```
//!
//! The peak phase-space densities `D = N (hbar omega_bar / k_B T)^3` of the two
//! clouds then follow as functions of `N1` alone. The target density grows
//! monotonically to `D2_max` at `N1 = 0`; the buffer density peaks at
//! `N1 = N2/(3 alpha - 1)`; the two curves cross at `N1 = N2 (omega2/omega1)^3`.
//!
//! Model densities carry the calibration factor `psd_prefactor` (default 2.17)
//! on both curves, so the closed forms for `D1_max` and `D=` (both quoted
//! relative to `D2_max`) describe the same curves the classifier scans.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{BEC_THRESHOLD, HBAR, K_B};

/// Default calibration factor applied to the model phase-space densities.
pub const DEFAULT_PSD_PREFACTOR: f64 = 2.17;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BudgetError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no interior buffer peak: 3*alpha = {three_alpha} <= 1")]
    NoInteriorPeak { three_alpha: f64 },
    #[error("invalid parameters: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetParams {
    /// Evaporation cutoff in units of k_B T.
    pub eta: f64,
    pub n1_ini: f64,
    /// Target atom number, constant.
    pub n2: f64,
    /// K
    pub t_ini: f64,
    /// rad/s
    pub omega1_bar: f64,
    /// rad/s
    pub omega2_bar: f64,
    pub psd_prefactor: f64,
}

impl BudgetParams {
    pub fn new(
        eta: f64,
        n1_ini: f64,
        n2: f64,
        t_ini: f64,
        omega1_bar: f64,
        omega2_bar: f64,
    ) -> Result<Self, BudgetError> {
        let p = Self {
            eta,
            n1_ini,
            n2,
            t_ini,
            omega1_bar,
            omega2_bar,
            psd_prefactor: DEFAULT_PSD_PREFACTOR,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters rescaled (through `t_ini`) so that the target critical
    /// number equals `n2_c`. Region boundaries only depend on ratios, so this
    /// is a convenient reference scale.
    pub fn with_target_critical_number(
        eta: f64,
        n1_ini: f64,
        n2_c: f64,
        omega1_bar: f64,
        omega2_bar: f64,
        psd_prefactor: f64,
    ) -> Result<Self, BudgetError> {
        let alpha = (eta - 2.0) / 3.0;
        // pref * n2_c^(1-3a) * (n1^a hbar w2 / k T)^3 = threshold
        let ln_t = alpha * n1_ini.ln() + (HBAR * omega2_bar / K_B).ln()
            - ((BEC_THRESHOLD / psd_prefactor).ln() - (1.0 - 3.0 * alpha) * n2_c.ln()) / 3.0;
        let p = Self {
            eta,
            n1_ini,
            n2: n2_c,
            t_ini: ln_t.exp(),
            omega1_bar,
            omega2_bar,
            psd_prefactor,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_n2(&self, n2: f64) -> Self {
        Self { n2, ..*self }
    }

    pub fn with_prefactor(&self, psd_prefactor: f64) -> Self {
        Self {
            psd_prefactor,
            ..*self
        }
    }

    /// `(eta - 2) / 3`.
    pub fn alpha(&self) -> f64 {
        (self.eta - 2.0) / 3.0
    }

    /// `omega2_bar / omega1_bar`.
    pub fn trap_ratio(&self) -> f64 {
        self.omega2_bar / self.omega1_bar
    }

    /// Whether `D=` is reached before `D1_max` along the evaporation,
    /// i.e. `3 alpha - 1 > (omega1/omega2)^3`.
    pub fn crossing_precedes_peak(&self) -> bool {
        3.0 * self.alpha() - 1.0 > self.trap_ratio().powi(-3)
    }

    pub fn validate(&self) -> Result<(), BudgetError> {
        let bad = |m: &str| Err(BudgetError::Invalid(m.to_string()));
        if !(self.eta >= 2.0 && self.eta.is_finite()) {
            return bad("eta must be >= 2");
        }
        if !(self.n2 > 0.0) {
            return bad("N2 must be positive");
        }
        if !(self.n1_ini > self.n2 && self.n1_ini.is_finite()) {
            return bad("N1_ini must exceed N2");
        }
        if !(self.t_ini > 0.0 && self.t_ini.is_finite()) {
            return bad("T_ini must be positive");
        }
        if !(self.omega1_bar > 0.0 && self.omega2_bar > 0.0) {
            return bad("mean trap frequencies must be positive");
        }
        if !(self.psd_prefactor > 0.0) {
            return bad("psd_prefactor must be positive");
        }
        Ok(())
    }
}

/// Temperature reached when the buffer still holds `n1` atoms.
pub fn temperature_of(n1: f64, p: &BudgetParams) -> Result<f64, BudgetError> {
    if !(n1 >= 0.0) {
        return Err(BudgetError::Domain(format!("N1 = {n1} is negative")));
    }
    Ok(t_min(p) * (n1 / p.n2 + 1.0).powf(p.alpha()))
}

/// Temperature once the buffer is exhausted.
pub fn t_min(p: &BudgetParams) -> f64 {
    p.t_ini * (p.n2 / p.n1_ini).powf(p.alpha())
}

/// Classical peak phase-space density `N (hbar omega_bar / k_B T)^3`.
pub fn phase_space_density(n: f64, t: f64, omega_bar: f64) -> Result<f64, BudgetError> {
    if !(t > 0.0) {
        return Err(BudgetError::Domain(format!("T = {t} is not positive")));
    }
    if !(n >= 0.0) {
        return Err(BudgetError::Domain(format!("N = {n} is negative")));
    }
    Ok(n * (HBAR * omega_bar / (K_B * t)).powi(3))
}

/// Model densities `(D1, D2)` at buffer number `n1`, prefactor included.
pub fn model_psd(n1: f64, p: &BudgetParams) -> Result<(f64, f64), BudgetError> {
    let t = temperature_of(n1, p)?;
    Ok((
        p.psd_prefactor * phase_space_density(n1, t, p.omega1_bar)?,
        p.psd_prefactor * phase_space_density(p.n2, t, p.omega2_bar)?,
    ))
}

/// Target density at the very end of the evaporation.
pub fn target_psd_max(p: &BudgetParams) -> f64 {
    let a = p.alpha();
    let ln = p.psd_prefactor.ln() - (3.0 * a - 1.0) * p.n2.ln()
        + 3.0 * (a * p.n1_ini.ln() + (HBAR * p.omega2_bar / (K_B * p.t_ini)).ln());
    ln.exp()
}

/// `D1_max / D2_max = (omega1/omega2)^3 (3a-1)^(3a-1) / (3a)^(3a)`.
pub fn buffer_peak_ratio(alpha: f64, trap_ratio: f64) -> f64 {
    let s = 3.0 * alpha;
    (-3.0 * trap_ratio.ln() + (s - 1.0) * (s - 1.0).ln() - s * s.ln()).exp()
}

/// `D= / D2_max = (1 + (omega2/omega1)^3)^(-3a)`.
pub fn equal_psd_ratio(alpha: f64, trap_ratio: f64) -> f64 {
    (-3.0 * alpha * trap_ratio.powi(3).ln_1p()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BufferPeak {
    pub n1_at_peak: f64,
    pub d1_max: f64,
}

/// Location and height of the buffer density maximum.
pub fn buffer_psd_max(p: &BudgetParams) -> Result<BufferPeak, BudgetError> {
    let s = 3.0 * p.alpha();
    if s <= 1.0 {
        return Err(BudgetError::NoInteriorPeak { three_alpha: s });
    }
    Ok(BufferPeak {
        n1_at_peak: p.n2 / (s - 1.0),
        d1_max: target_psd_max(p) * buffer_peak_ratio(p.alpha(), p.trap_ratio()),
    })
}

/// Common value of the two densities where the curves intersect.
pub fn equal_psd(p: &BudgetParams) -> f64 {
    target_psd_max(p) * equal_psd_ratio(p.alpha(), p.trap_ratio())
}

/// Buffer number at which the two density curves intersect.
pub fn crossing_n1(p: &BudgetParams) -> f64 {
    p.n2 * p.trap_ratio().powi(3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalNumbers {
    /// `D=` reaches the threshold.
    pub n2_a: f64,
    /// `D1_max` reaches the threshold.
    pub n2_b: f64,
    /// `D2_max` reaches the threshold.
    pub n2_c: f64,
}

impl CriticalNumbers {
    pub fn ratio_a(&self) -> f64 {
        self.n2_a / self.n2_c
    }
    pub fn ratio_b(&self) -> f64 {
        self.n2_b / self.n2_c
    }
}

/// Target numbers at which `D=`, `D1_max` and `D2_max` equal the BEC threshold.
pub fn critical_numbers(p: &BudgetParams) -> Result<CriticalNumbers, BudgetError> {
    let a = p.alpha();
    let e = 3.0 * a - 1.0;
    if e <= 0.0 {
        return Err(BudgetError::NoInteriorPeak {
            three_alpha: 3.0 * a,
        });
    }
    // D2_max(N2) = D2_max(p.n2) (N2/p.n2)^(-e)
    let n2_c = p.n2 * (target_psd_max(p) / BEC_THRESHOLD).powf(1.0 / e);
    let (ra, rb) = critical_ratios(a, p.trap_ratio());
    Ok(CriticalNumbers {
        n2_a: n2_c * ra,
        n2_b: n2_c * rb,
        n2_c,
    })
}

/// `(N2_a/N2_c, N2_b/N2_c)`; depends only on alpha and the trap ratio.
pub fn critical_ratios(alpha: f64, trap_ratio: f64) -> (f64, f64) {
    let e = 3.0 * alpha - 1.0;
    (
        equal_psd_ratio(alpha, trap_ratio).powf(1.0 / e),
        buffer_peak_ratio(alpha, trap_ratio).powf(1.0 / e),
    )
}

/// Outcome of a sympathetic cooling run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    /// Both condense, buffer first.
    DualBufferFirst,
    /// Both condense, target first.
    DualTargetFirst,
    TargetOnly,
    /// Only reachable for `omega2 < omega1`.
    BufferOnly,
    NoBEC,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::DualBufferFirst => "DualBufferFirst",
            Region::DualTargetFirst => "DualTargetFirst",
            Region::TargetOnly => "TargetOnly",
            Region::BufferOnly => "BufferOnly",
            Region::NoBEC => "NoBEC",
        }
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoolingOutcome {
    pub region: Region,
    pub d1_max: f64,
    pub d2_max: f64,
    pub d_equal: f64,
    pub n1_at_buffer_peak: f64,
    /// Buffer number when the buffer crosses the threshold, if it does.
    pub buffer_bec_n1: Option<f64>,
    pub target_bec_n1: Option<f64>,
    pub buffer_bec_temperature: Option<f64>,
    pub target_bec_temperature: Option<f64>,
    /// Region from the closed-form inequalities, when they apply.
    pub closed_form_region: Option<Region>,
    /// Set when the curve ordering is outside the closed-form regime.
    pub extrapolated: bool,
}

/// Number of log-spaced scan points used by [`classify`].
pub const SCAN_POINTS: usize = 4096;

/// Classify the outcome for `n2` target atoms by scanning both density
/// curves over the whole evaporation and recording threshold crossings.
pub fn classify(n2: f64, p: &BudgetParams) -> Result<CoolingOutcome, BudgetError> {
    let p = p.with_n2(n2);
    p.validate()?;
    let thr = BEC_THRESHOLD;
    let d2_max = target_psd_max(&p);
    let d_equal = equal_psd(&p);

    let ln_d1 = |n1: f64| ln_model_psd(n1, &p).0;
    let ln_d2 = |n1: f64| ln_model_psd(n1, &p).1;
    let ln_thr = thr.ln();

    // Descending buffer numbers, N1_ini down to 0.
    let grid = scan_grid(&p, SCAN_POINTS);

    let target_bec_n1 = first_crossing(&grid, ln_d2, ln_thr);

    let (n1_peak, d1_max) = match buffer_psd_max(&p) {
        Ok(peak) if peak.n1_at_peak <= p.n1_ini => (peak.n1_at_peak, peak.d1_max),
        // Peak beyond the start or absent: the maximum sits at N1_ini.
        _ => (p.n1_ini, ln_d1(p.n1_ini).exp()),
    };
    let mut buffer_bec_n1 = first_crossing(&grid, ln_d1, ln_thr);
    if buffer_bec_n1.is_none() && ln_d1(n1_peak) >= ln_thr {
        // Narrow excursion above threshold that fell between grid points.
        let lo = grid.iter().copied().find(|&n| n > n1_peak).unwrap_or(p.n1_ini);
        buffer_bec_n1 = Some(bisect_crossing(ln_d1, ln_thr, lo, n1_peak));
    }

    let region = match (buffer_bec_n1, target_bec_n1) {
        (Some(b), Some(t)) if b > t => Region::DualBufferFirst,
        (Some(_), Some(_)) => Region::DualTargetFirst,
        (None, Some(_)) => Region::TargetOnly,
        (Some(_), None) => Region::BufferOnly,
        (None, None) => Region::NoBEC,
    };

    let closed_form_region = p.crossing_precedes_peak().then_some(if d2_max <= thr {
        Region::NoBEC
    } else if d1_max <= thr {
        Region::TargetOnly
    } else if d_equal > thr {
        Region::DualBufferFirst
    } else {
        Region::DualTargetFirst
    });

    let temp = |n: Option<f64>| n.map(|n| temperature_of(n, &p)).transpose();
    Ok(CoolingOutcome {
        region,
        d1_max,
        d2_max,
        d_equal,
        n1_at_buffer_peak: n1_peak,
        buffer_bec_n1,
        target_bec_n1,
        buffer_bec_temperature: temp(buffer_bec_n1)?,
        target_bec_temperature: temp(target_bec_n1)?,
        closed_form_region,
        extrapolated: closed_form_region.is_none(),
    })
}

/// `(ln D1, ln D2)` along the evaporation.
fn ln_model_psd(n1: f64, p: &BudgetParams) -> (f64, f64) {
    let ln_t = t_min(p).ln() + p.alpha() * (n1 / p.n2).ln_1p();
    let c = p.psd_prefactor.ln() - 3.0 * (K_B.ln() + ln_t) + 3.0 * HBAR.ln();
    (
        c + n1.ln() + 3.0 * p.omega1_bar.ln(),
        c + p.n2.ln() + 3.0 * p.omega2_bar.ln(),
    )
}

fn scan_grid(p: &BudgetParams, points: usize) -> Vec<f64> {
    // Log-spaced in N1/N2 down to 1e-12, then exactly zero.
    let hi = (p.n1_ini / p.n2).ln();
    let lo = (1e-12f64).ln().min(hi - 1.0);
    let mut grid: Vec<f64> = (0..points)
        .map(|i| {
            let u = hi + (lo - hi) * i as f64 / (points - 1) as f64;
            p.n2 * u.exp()
        })
        .collect();
    grid[0] = p.n1_ini;
    grid.push(0.0);
    grid
}

/// First descending-N1 point where `f >= level`, refined by bisection.
fn first_crossing(grid: &[f64], f: impl Fn(f64) -> f64, level: f64) -> Option<f64> {
    let idx = grid.iter().position(|&n| f(n) >= level)?;
    if idx == 0 {
        return Some(grid[0]);
    }
    Some(bisect_crossing(f, level, grid[idx - 1], grid[idx]))
}

/// Bisect for `f = level` between `below` (f < level) and `above` (f >= level).
fn bisect_crossing(f: impl Fn(f64) -> f64, level: f64, mut below: f64, mut above: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (below + above);
        if mid == below || mid == above {
            break;
        }
        if f(mid) >= level {
            above = mid;
        } else {
            below = mid;
        }
    }
    above
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseDiagramRow {
    pub eta: f64,
    pub n2_over_n2c: f64,
    pub region: Region,
    pub d1max: f64,
    pub d2max: f64,
    pub dequal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub eta: f64,
    /// `None` when `3 alpha <= 1`.
    pub n2a_over_n2c: Option<f64>,
    pub n2b_over_n2c: Option<f64>,
    pub n2c_over_n2c: f64,
    /// Curve ordering differs from the closed-form regime.
    pub extrapolated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseDiagram {
    pub trap_ratio: f64,
    pub rows: Vec<PhaseDiagramRow>,
    pub boundaries: Vec<BoundaryPoint>,
}

/// Regions and boundary curves over an (eta, N2/N2_c) grid at a fixed
/// `omega2_bar / omega1_bar`.
///
/// `N2_c` is the target critical number for each eta; for `eta <= 3` (where
/// `D2_max` grows with `N2`) it is still the number at which `D2_max` equals
/// the threshold, but the row is flagged through the boundary sidecar.
pub fn phase_diagram(
    eta_grid: &[f64],
    n2_grid: &[f64],
    trap_ratio: f64,
) -> Result<PhaseDiagram, BudgetError> {
    if eta_grid.is_empty() || n2_grid.is_empty() {
        return Err(BudgetError::Invalid("empty grid".into()));
    }
    if !(trap_ratio > 0.0 && trap_ratio.is_finite()) {
        return Err(BudgetError::Invalid("trap ratio must be positive".into()));
    }
    if let Some(eta) = eta_grid
        .iter()
        .find(|&&e| !(e > 2.0) || (e - 3.0).abs() < 1e-9)
    {
        return Err(BudgetError::Invalid(format!(
            "eta = {eta}: need eta > 2 and eta != 3"
        )));
    }
    if n2_grid.iter().any(|&x| !(x > 0.0)) {
        return Err(BudgetError::Invalid("N2/N2_c values must be positive".into()));
    }

    // Reference scale; only ratios are reported.
    const N1_REF: f64 = 1e12;
    const N2C_REF: f64 = 1e6;
    let omega1 = 2.0 * std::f64::consts::PI * 100.0;
    let omega2 = trap_ratio * omega1;

    let boundaries = eta_grid
        .iter()
        .map(|&eta| {
            let alpha = (eta - 2.0) / 3.0;
            let interior = 3.0 * alpha > 1.0;
            let (ra, rb) = critical_ratios(alpha, trap_ratio);
            BoundaryPoint {
                eta,
                n2a_over_n2c: interior.then_some(ra),
                n2b_over_n2c: interior.then_some(rb),
                n2c_over_n2c: 1.0,
                extrapolated: 3.0 * alpha - 1.0 <= trap_ratio.powi(-3),
            }
        })
        .collect();

    let cells: Vec<(f64, f64)> = eta_grid
        .iter()
        .flat_map(|&e| n2_grid.iter().map(move |&x| (e, x)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(eta, x)| {
            let p = BudgetParams::with_target_critical_number(
                eta,
                N1_REF,
                N2C_REF,
                omega1,
                omega2,
                DEFAULT_PSD_PREFACTOR,
            )?;
            let n2 = x * N2C_REF;
            let outcome = classify(n2, &p)?;
            let alpha = p.alpha();
            let d2max = BEC_THRESHOLD * x.powf(1.0 - 3.0 * alpha);
            let d1max = if 3.0 * alpha > 1.0 {
                d2max * buffer_peak_ratio(alpha, trap_ratio)
            } else {
                outcome.d1_max
            };
            Ok(PhaseDiagramRow {
                eta,
                n2_over_n2c: x,
                region: outcome.region,
                d1max,
                d2max,
                dequal: d2max * equal_psd_ratio(alpha, trap_ratio),
            })
        })
        .collect::<Result<Vec<_>, BudgetError>>()?;

    Ok(PhaseDiagram {
        trap_ratio,
        rows,
        boundaries,
    })
}
