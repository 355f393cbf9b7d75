use serde::Serialize;

use super::DsmcError;

/// Log-linear least-squares fit of `dT(t) = dT0 exp(-rate t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelaxationFit {
    /// 1/s
    pub rate: f64,
    /// Standard error of `rate`, 1/s.
    pub stderr: f64,
    pub points: usize,
    /// `rate` times the fitted time span.
    pub e_folds: f64,
}

/// Fit every point up to the first non-positive gap.
pub fn fit_relaxation(series: &[(f64, f64)]) -> Result<RelaxationFit, DsmcError> {
    fit_relaxation_window(series, 0.0)
}

/// Fit the leading points whose gap stays above `min_fraction` of the first
/// one (in absolute value and with the initial sign).
pub fn fit_relaxation_window(series: &[(f64, f64)], min_fraction: f64) -> Result<RelaxationFit, DsmcError> {
    let sign = series.first().map_or(1.0, |p| p.1.signum());
    let floor = min_fraction * series.first().map_or(0.0, |p| p.1.abs());
    let pts: Vec<(f64, f64)> = series
        .iter()
        .map(|&(t, d)| (t, sign * d))
        .take_while(|&(_, d)| d > 0.0 && d > floor)
        .map(|(t, d)| (t, d.ln()))
        .collect();
    let n = pts.len();
    let insufficient = |e_folds| DsmcError::InsufficientDecay { e_folds, points: n };
    if n < 10 {
        return Err(insufficient(0.0));
    }
    let nf = n as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let slope = sxy / sxx;
    let icpt = ym - slope * tm;
    let rss: f64 = pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum();
    let rate = -slope;
    let e_folds = rate * (pts[n - 1].0 - pts[0].0);
    if !(e_folds >= 2.0) {
        return Err(insufficient(e_folds));
    }
    Ok(RelaxationFit {
        rate,
        stderr: (rss / (nf - 2.0) / sxx).sqrt(),
        points: n,
        e_folds,
    })
}
