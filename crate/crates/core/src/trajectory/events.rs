use serde::Serialize;

use super::{Termination, Trajectory, TrajectoryPoint, STALL_OVERLAP};
use crate::budget::Region;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventKind {
    /// Buffer density reaches the threshold.
    Bec1,
    /// Target density reaches the threshold.
    Bec2,
    /// Overlap falls below [`STALL_OVERLAP`] while evaporating.
    Stall,
    BufferExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub kind: EventKind,
    /// Interpolated between the bracketing output points, s.
    pub t: f64,
    pub n1: f64,
    pub t1: f64,
    pub t2: f64,
}

/// First occurrence of each event, in time order.
pub fn detect_events(tr: &Trajectory) -> Vec<Event> {
    let thr = tr.bec_threshold.ln();
    let mut out = Vec::new();
    let mut push = |kind, f: &dyn Fn(&TrajectoryPoint) -> bool, level: &dyn Fn(&TrajectoryPoint) -> f64, target| {
        if let Some(e) = first_event(&tr.points, kind, f, level, target) {
            out.push(e);
        }
    };
    push(EventKind::Bec1, &|p| p.bec1, &|p| p.d1.ln(), thr);
    push(EventKind::Bec2, &|p| p.bec2, &|p| p.d2.ln(), thr);
    push(EventKind::Stall, &|p| p.stalled, &|p| -p.overlap.ln(), -STALL_OVERLAP.ln());
    if tr.termination == Termination::BufferExhausted {
        let p = tr.points.last().expect("trajectory has a start point");
        out.push(at(EventKind::BufferExhausted, p));
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    out
}

/// Outcome implied by the threshold events, for comparison with the
/// budget classifier.
pub fn region_from_events(events: &[Event]) -> Region {
    let time = |k| events.iter().find(|e| e.kind == k).map(|e| e.t);
    match (time(EventKind::Bec1), time(EventKind::Bec2)) {
        (Some(b), Some(t)) if b < t => Region::DualBufferFirst,
        (Some(_), Some(_)) => Region::DualTargetFirst,
        (None, Some(_)) => Region::TargetOnly,
        (Some(_), None) => Region::BufferOnly,
        (None, None) => Region::NoBEC,
    }
}

fn at(kind: EventKind, p: &TrajectoryPoint) -> Event {
    Event {
        kind,
        t: p.t,
        n1: p.n1,
        t1: p.t1,
        t2: p.t2,
    }
}

fn first_event(
    pts: &[TrajectoryPoint],
    kind: EventKind,
    flag: &dyn Fn(&TrajectoryPoint) -> bool,
    level: &dyn Fn(&TrajectoryPoint) -> f64,
    target: f64,
) -> Option<Event> {
    let i = pts.iter().position(flag)?;
    if i == 0 {
        return Some(at(kind, &pts[0]));
    }
    let (a, b) = (&pts[i - 1], &pts[i]);
    let (la, lb) = (level(a), level(b));
    let f = if lb > la { ((target - la) / (lb - la)).clamp(0.0, 1.0) } else { 1.0 };
    let lerp = |x: f64, y: f64| x + f * (y - x);
    let geo = |x: f64, y: f64| (lerp(x.ln(), y.ln())).exp();
    Some(Event {
        kind,
        t: lerp(a.t, b.t),
        n1: geo(a.n1, b.n1),
        t1: geo(a.t1, b.t1),
        t2: geo(a.t2, b.t2),
    })
}
